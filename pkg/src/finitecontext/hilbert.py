"""Dense complex linear algebra on finite-dimensional Hilbert spaces.

Projectors and measurement tuples are immutable value objects wrapping
numpy arrays.  Random objects are drawn from an explicit
``numpy.random.Generator`` (or anything ``numpy.random.default_rng``
accepts as a seed), so every sampler is reproducible.
"""
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    InvalidProjectorError,
    InvalidTupleError,
    NormalizationError,
)

DEFAULT_TOL = 1e-9
TOL_NORM = 1e-9
MAX_DIM = 16


def as_rng(seed=None):
    """Return a ``numpy.random.Generator`` for ``seed`` (passes generators through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


class Projector:
    """Hermitian idempotent matrix labelling a measurement outcome.

    Construction validates the invariants within ``tol`` (Frobenius norm) and
    stores the integer rank (the rounded trace).
    """

    __slots__ = ("matrix", "rank")

    def __init__(self, matrix, tol=DEFAULT_TOL):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidProjectorError(f"projector must be a square matrix, got shape {m.shape}")
        herm = np.linalg.norm(m - m.conj().T)
        if herm > tol:
            raise InvalidProjectorError(f"not Hermitian: |E - E^dag|_F = {herm:.3e}")
        idem = np.linalg.norm(m @ m - m)
        if idem > tol:
            raise InvalidProjectorError(f"not idempotent: |E^2 - E|_F = {idem:.3e}")
        tr = np.trace(m).real
        rank = int(round(tr))
        if abs(tr - rank) > tol:
            raise InvalidProjectorError(f"trace {tr!r} is not an integer")
        if rank < 1:
            raise InvalidProjectorError("the zero projector does not label an outcome")
        self.matrix = _frozen(m)
        self.rank = rank

    @classmethod
    def trusted(cls, matrix, rank):
        """Wrap ``matrix`` without validation.  Callers guarantee the invariants."""
        obj = object.__new__(cls)
        obj.matrix = _frozen(matrix)
        obj.rank = int(rank)
        return obj

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.matrix, dtype=dtype)

    def __add__(self, other):
        if not isinstance(other, Projector):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionMismatchError(f"dimensions {self.dim} and {other.dim}")
        return Projector(self.matrix + other.matrix)

    def close_to(self, other, tol=DEFAULT_TOL):
        other = other.matrix if isinstance(other, Projector) else np.asarray(other)
        return other.shape == self.matrix.shape and np.linalg.norm(self.matrix - other) <= tol

    def conjugated(self, unitary):
        """Return ``U E U^dag``."""
        u = np.asarray(unitary)
        return Projector.trusted(u @ self.matrix @ u.conj().T, self.rank)

    def __repr__(self):
        return f"Projector(dim={self.dim}, rank={self.rank})"


def _matrix(p):
    return p.matrix if isinstance(p, Projector) else np.asarray(p, dtype=complex)


def is_complete_tuple(projectors, tol=DEFAULT_TOL):
    """True iff the projectors are pairwise orthogonal and sum to the identity.

    Accepts a :class:`MeasurementTuple` or any sequence of projectors/arrays.
    """
    mats = [_matrix(p) for p in projectors]
    if not mats:
        return False
    d = mats[0].shape[0]
    for m in mats:
        if m.shape != (d, d):
            raise DimensionMismatchError(f"mixed projector shapes {mats[0].shape} and {m.shape}")
    if np.linalg.norm(sum(mats) - np.eye(d)) > tol:
        return False
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if np.linalg.norm(mats[i] @ mats[j]) > tol:
                return False
    return True


class MeasurementTuple:
    """Ordered complete tuple of mutually orthogonal projectors."""

    __slots__ = ("projectors",)

    def __init__(self, projectors, tol=DEFAULT_TOL, check=True):
        projs = tuple(p if isinstance(p, Projector) else Projector(p, tol) for p in projectors)
        if check and not is_complete_tuple(projs, tol):
            raise InvalidTupleError("projectors are not a complete orthogonal tuple")
        self.projectors = projs

    @property
    def dim(self):
        return self.projectors[0].dim

    @property
    def ranks(self):
        return tuple(p.rank for p in self.projectors)

    def __len__(self):
        return len(self.projectors)

    def __iter__(self):
        return iter(self.projectors)

    def __getitem__(self, k):
        return self.projectors[k]

    def index_of(self, projector, tol=DEFAULT_TOL):
        """Position of ``projector`` in the tuple, or ``None``."""
        for k, p in enumerate(self.projectors):
            if p.close_to(projector, tol):
                return k
        return None

    def conjugated(self, unitary):
        return MeasurementTuple([p.conjugated(unitary) for p in self.projectors], check=False)

    def __repr__(self):
        return f"MeasurementTuple(dim={self.dim}, ranks={self.ranks})"


class RealTriple(NamedTuple):
    """Three mutually orthogonal real 3-vectors."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def from_pair(cls, v, w, tol=DEFAULT_TOL):
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        triple = cls(np.cross(v, w), v, w)
        triple.validate(tol)
        return triple

    def validate(self, tol=DEFAULT_TOL):
        for a, b in ((self.u, self.v), (self.u, self.w), (self.v, self.w)):
            if abs(np.dot(a, b)) > tol:
                raise ValueError("triple is not pairwise orthogonal")


def projector_from_vector(phi, tol_norm=TOL_NORM):
    """Rank-1 projector onto the unit vector ``phi``."""
    phi = np.asarray(phi, dtype=complex).ravel()
    norm = np.linalg.norm(phi)
    if abs(norm - 1.0) > tol_norm:
        raise NormalizationError(f"vector norm {norm!r} differs from 1")
    return Projector.trusted(np.outer(phi, phi.conj()), 1)


def coarse_grain(m, i, j):
    """Merge outcomes ``i`` and ``j`` (0-based) into ``E_i + E_j`` placed at ``min(i, j)``."""
    n = len(m)
    if i == j:
        raise ValueError("cannot coarse-grain an outcome with itself")
    for k in (i, j):
        if not 0 <= k < n:
            raise IndexError(f"outcome index {k} out of range for a {n}-tuple")
    lo, hi = min(i, j), max(i, j)
    merged = Projector.trusted(m[lo].matrix + m[hi].matrix, m[lo].rank + m[hi].rank)
    projs = list(m.projectors)
    projs[lo] = merged
    del projs[hi]
    return MeasurementTuple(projs, check=False)


def haar_random_unitary(d, seed=None):
    """Haar-distributed ``d x d`` unitary (QR of a Ginibre matrix, diag(R) made positive)."""
    rng = as_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_unit_vector(d, seed=None):
    rng = as_rng(seed)
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def _check_ranks(d, ranks):
    ranks = [int(r) for r in ranks]
    if any(r < 1 for r in ranks):
        raise ValueError(f"ranks must be positive, got {ranks}")
    if sum(ranks) != d:
        raise ValueError(f"ranks {ranks} sum to {sum(ranks)}, expected dimension {d}")
    return ranks


def tuple_from_unitary(u, ranks):
    """Partition the columns of ``u`` into consecutive blocks of the given ranks."""
    u = np.asarray(u)
    ranks = _check_ranks(u.shape[0], ranks)
    projs = []
    start = 0
    for r in ranks:
        cols = u[:, start:start + r]
        projs.append(Projector.trusted(cols @ cols.conj().T, r))
        start += r
    return MeasurementTuple(projs, check=False)


def random_complete_tuple(d, ranks, seed=None):
    """Complete tuple built from the columns of a Haar unitary."""
    ranks = _check_ranks(d, ranks)
    return tuple_from_unitary(haar_random_unitary(d, seed), ranks)


def decompose_rank1(e):
    """Split a projector into ``rank(e)`` mutually orthogonal rank-1 projectors."""
    if not isinstance(e, Projector):
        e = Projector(e)
    vals, vecs = np.linalg.eigh(e.matrix)
    cols = vecs[:, vals > 0.5]
    if cols.shape[1] != e.rank:
        raise InvalidProjectorError(
            f"spectrum has {cols.shape[1]} unit eigenvalues but trace rank is {e.rank}"
        )
    return [Projector.trusted(np.outer(c, c.conj()), 1) for c in cols.T]


def range_basis(e):
    """Orthonormal columns spanning the range of projector ``e``."""
    vals, vecs = np.linalg.eigh(_matrix(e))
    return vecs[:, vals > 0.5]


def orthogonal_complement(vectors, dim=None, tol=1e-10):
    """Orthonormal basis (list of vectors) of the complement of ``span(vectors)``."""
    vectors = [np.asarray(v, dtype=complex).ravel() for v in vectors]
    if not vectors:
        if dim is None:
            raise ValueError("dimension required when no vectors are given")
        return list(np.eye(dim, dtype=complex))
    d = vectors[0].shape[0]
    if any(v.shape[0] != d for v in vectors) or (dim is not None and dim != d):
        raise DimensionMismatchError("vectors have inconsistent dimensions")
    a = np.column_stack(vectors)
    u, s, _ = np.linalg.svd(a, full_matrices=True)
    m = len(vectors)
    if m > d or s[-1] <= tol * max(s[0], 1.0):
        raise ValueError("input vectors are linearly dependent")
    return list(u[:, m:].T)


def direct_rotation(ma, mb):
    """Unitary ``U`` with ``U E^a_k U^dag = E^b_k`` for two tuples of equal rank pattern.

    Polar factor of ``sum_k E^b_k E^a_k``; the rotation closest to the
    identity among those mapping ``ma`` onto ``mb``.  Requires the tuples to
    be close enough that the sum is invertible.
    """
    if ma.ranks != mb.ranks:
        raise ValueError(f"rank patterns differ: {ma.ranks} vs {mb.ranks}")
    x = sum(b.matrix @ a.matrix for a, b in zip(ma, mb))
    if np.linalg.svd(x, compute_uv=False)[-1] < 1e-8:
        raise ValueError("tuples are too far apart for a direct rotation")
    u, _ = scipy.linalg.polar(x)
    return u


def unitary_log(u):
    """Anti-Hermitian-generator logarithm ``H`` with ``u = exp(iH)``, ``H`` Hermitian."""
    t, z = scipy.linalg.schur(u, output="complex")
    phases = np.angle(np.diag(t))
    return (z * phases) @ z.conj().T


def tuple_geodesic(ma, mb, n_steps):
    """Tuples along the one-parameter unitary path from ``ma`` to ``mb`` (endpoints included)."""
    h = unitary_log(direct_rotation(ma, mb))
    path = []
    for t in np.linspace(0.0, 1.0, n_steps):
        path.append(ma.conjugated(scipy.linalg.expm(1j * t * h)))
    return path


def random_hermitian(d, seed=None, scale=1.0):
    """GUE-style Hermitian matrix with unit Frobenius norm times ``scale``."""
    rng = as_rng(seed)
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (z + z.conj().T) / 2
    return scale * h / np.linalg.norm(h)


def random_traceless_hermitian(d, seed=None, scale=1.0):
    h = random_hermitian(d, seed)
    h = h - np.trace(h).real / d * np.eye(d)
    return scale * h / np.linalg.norm(h)


def is_unitary(u, tol=DEFAULT_TOL):
    u = np.asarray(u)
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def basis_tuple(d):
    """Standard-basis rank-1 measurement ``(|0><0|, ..., |d-1><d-1|)``."""
    return tuple_from_unitary(np.eye(d, dtype=complex), [1] * d)


def sum_projectors(projectors: Sequence[Projector]):
    return sum(p.matrix for p in projectors)
