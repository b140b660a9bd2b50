"""Numerical checks of the generalized Gleason theorem.

Derivative identities are verified by central finite differences on real
three-dimensional sections of the Hilbert space: given orthonormal complex
vectors ``b1, b2, b3`` the section is ``x -> f(x1 b1 + x2 b2 + x3 b3)`` for
real ``x``.  A frame function that is additive on orthogonal pairs has a
radially extended section whose third derivatives vanish; the affine form
``tr(eta E) + K`` is then recovered by least squares.

Default step ``h = 1e-3`` with tolerance ``tau(h) = C h**2``, ``C = 50``.
"""
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import NotAStateError, UnderdeterminedError
from .hilbert import (
    Projector,
    as_rng,
    decompose_rank1,
    orthogonal_complement,
    random_complete_tuple,
    random_unit_vector,
    range_basis,
)
from .measures import AffineMeasure, DensityOperator, FrameFunction, Measure, radial_extension
from .report import CheckReport

DEFAULT_H = 1e-3
DEFAULT_C = 50.0

SMOOTHNESS_NOTE = (
    "finite differences assume a pointwise smooth measure; distribution-valued "
    "measures are outside what this check can detect"
)


def fd_tolerance(h=DEFAULT_H, c=DEFAULT_C):
    """``c * h**2``, the pass threshold for finite-difference residuals."""
    return c * h * h


# -- bases ----------------------------------------------------------------

def gell_mann_basis(d):
    """The ``d**2 - 1`` generalized Gell-Mann matrices, ``tr(G_a G_b) = 2 delta_ab``.

    Order: symmetric off-diagonal, antisymmetric off-diagonal, diagonal.
    """
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1
            mats.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j
            m[k, j] = 1j
            mats.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        mats.append(np.diag(np.sqrt(2 / (l * (l + 1))) * diag).astype(complex))
    return np.array(mats).reshape(d * d - 1, d, d)


# -- real sections and finite differences --------------------------------

class RealSection:
    """``x -> f(x1 b1 + x2 b2 + x3 b3)`` for a vector function ``f`` and orthonormal ``b``."""

    def __init__(self, f, basis):
        self.f = f
        self.basis = np.array(basis, dtype=complex).reshape(3, -1)
        gram = self.basis.conj() @ self.basis.T
        if np.linalg.norm(gram - np.eye(3)) > 1e-9:
            raise ValueError("section basis is not orthonormal")

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float) @ self.basis)


def section_through(f, phi1, phi2, seed=None):
    """Real section whose first two axes are ``phi1`` and ``phi2``.

    The third axis is a random unit vector orthogonal to both.  ``f`` is
    radially extended if it is a :class:`Measure` or a unit-only frame
    function.
    """
    if isinstance(f, Measure) or (isinstance(f, FrameFunction) and f.unit_only):
        f = radial_extension(f)
    rng = as_rng(seed)
    comp = orthogonal_complement([phi1, phi2])
    coeffs = rng.standard_normal(len(comp)) + 1j * rng.standard_normal(len(comp))
    b3 = np.array(comp).T @ coeffs
    b3 /= np.linalg.norm(b3)
    return RealSection(f, [phi1, phi2, b3])


def directional_derivative(f, x, direction, h=DEFAULT_H):
    x = np.asarray(x, dtype=float)
    u = np.asarray(direction, dtype=float)
    return (f(x + h * u) - f(x - h * u)) / (2 * h)


def rotation_identity_residual(f, v, w, h=DEFAULT_H, tol=1e-9):
    """Central-difference value of ``(w.d/dv - v.d/dw)[f(v) + f(w)]``.

    ``f`` is a function of real 3-vectors, or a pair ``(f1, f2)`` when the
    two slots carry different functions (``f1(v) + f2(w)``).
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if abs(np.dot(v, w)) > tol * max(1.0, np.linalg.norm(v) * np.linalg.norm(w)):
        raise ValueError(f"v and w are not orthogonal: v.w = {np.dot(v, w):.3e}")
    f1, f2 = f if isinstance(f, tuple) else (f, f)
    return directional_derivative(f1, v, w, h) - directional_derivative(f2, w, v, h)


@dataclass
class ThirdDerivTensor:
    """All 27 third partial derivatives at ``point`` estimated with step ``h``."""

    entries: np.ndarray
    h: float
    point: np.ndarray

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.entries)))

    @property
    def asymmetry(self):
        t = self.entries
        return float(max(np.max(np.abs(t - t.transpose(p)))
                         for p in itertools.permutations(range(3))))

    def contract(self, a, b, c):
        """``sum_ijk a_i b_j c_k T_ijk``."""
        return float(np.einsum("ijk,i,j,k->", self.entries, a, b, c))


def third_derivative_tensor(f, v, h=DEFAULT_H):
    """Nested central-difference third derivatives of ``f`` at the real 3-vector ``v``.

    Each entry is ``sum_{s in {+-1}^3} s1 s2 s3 f(v + h(s1 e_i + s2 e_j + s3 e_k)) / (2h)^3``,
    second-order accurate for every index combination.
    """
    v = np.asarray(v, dtype=float)
    cache = {}

    def at(offset):
        if offset not in cache:
            cache[offset] = f(v + h * np.asarray(offset, dtype=float))
        return cache[offset]

    eye = np.eye(3, dtype=int)
    t = np.empty((3, 3, 3))
    for i, j, k in itertools.product(range(3), repeat=3):
        acc = 0.0
        for s in itertools.product((1, -1), repeat=3):
            off = s[0] * eye[i] + s[1] * eye[j] + s[2] * eye[k]
            acc += s[0] * s[1] * s[2] * at(tuple(int(o) for o in off))
        t[i, j, k] = acc / (2 * h) ** 3
    return ThirdDerivTensor(t, h, v.copy())


# -- quadratic-form verifiers ---------------------------------------------

def random_orthogonal_pair(d, seed=None):
    """Two orthonormal vectors: the first columns of a Haar unitary."""
    rng = as_rng(seed)
    a = random_unit_vector(d, rng)
    b = random_unit_vector(d, rng)
    b = b - np.vdot(a, b) * a
    return a, b / np.linalg.norm(b)


def _draw(sampler, rng):
    return sampler.sampler(rng) if hasattr(sampler, "sampler") else sampler(rng)


def _pair_residuals(f1, f2, h):
    e1, e2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    rot = rotation_identity_residual((f1, f2), e1, e2, h)
    t1 = third_derivative_tensor(f1, e1, h)
    t2 = third_derivative_tensor(f2, e2, h)
    return abs(rot), max(t1.max_abs, t2.max_abs)


def _pair_report(check, rots, thirds, h, c, params):
    if not rots:
        raise ValueError("empty sample set")
    tau = fd_tolerance(h, c)
    max_rot, max_third = max(rots), max(thirds)
    return CheckReport(
        check=check,
        parameters=dict(params, h=h, C=c),
        max_residual=max(max_rot, max_third),
        tolerance=tau,
        passed=max_rot <= tau and max_third <= tau,
        samples=len(rots),
        details={"max_rotation_residual": max_rot, "max_third_derivative": max_third},
        metadata={"assumption": SMOOTHNESS_NOTE},
    )


def verify_lemma1(f, pair_sampler, n_samples, h=DEFAULT_H, c=DEFAULT_C, seed=None):
    """Finite-difference check that a frame function is quadratic near sampled pairs.

    ``f`` is a :class:`Measure` or :class:`FrameFunction`; ``pair_sampler``
    draws orthonormal vector pairs ``(phi1, phi2)`` from the declared open set
    (a callable taking a generator, or an :class:`~finitecontext.regions.OpenSet`).
    For every pair the real section through ``phi1, phi2`` is checked for the
    rotation identity and for vanishing third derivatives at both vectors.
    """
    if n_samples < 1:
        raise ValueError("empty sample set")
    rng = as_rng(seed)
    rots, thirds = [], []
    for _ in range(n_samples):
        phi1, phi2 = _draw(pair_sampler, rng)
        g = section_through(f, phi1, phi2, rng)
        rot, third = _pair_residuals(g, g, h)
        rots.append(rot)
        thirds.append(third)
    dim = f.dim
    return _pair_report("lemma1", rots, thirds, h, c, {"dim": dim, "n_samples": n_samples})


def _complement_function(mu, rest, rank):
    """``phi -> mu(phi phi^dag / |phi|^2 + rest) |phi|^2`` for ``phi`` orthogonal to ``rest``."""

    def ev(phi):
        n2 = np.real(np.vdot(phi, phi))
        e = np.outer(phi, phi.conj()) / n2 + rest
        return mu(Projector.trusted(e, rank)) * n2

    return ev


def verify_theorem3(mu, pair_set, n_samples, h=DEFAULT_H, c=DEFAULT_C, seed=None):
    """Rank-1 decomposition check for incomplete pairs of higher-rank projectors.

    For each sampled pair ``(E1, E2)`` both projectors are split into rank-1
    parts; all parts but one of each are frozen and the remaining vectors
    ``phi1, phi2`` move in the orthogonal complement of the frozen ones.  The
    slot functions ``phi -> mu(phi phi^dag + rest_i)`` must then satisfy the
    same identities as a frame function.
    """
    if n_samples < 1:
        raise ValueError("empty sample set")
    rng = as_rng(seed)
    rots, thirds = [], []
    for _ in range(n_samples):
        e1, e2 = _draw(pair_set, rng)
        if e1.rank + e2.rank >= e1.dim:
            raise ValueError("pair is complete; the decomposition argument needs r1 + r2 < d")
        f1, f2 = decompose_rank1(e1), decompose_rank1(e2)
        phi1 = range_basis(f1[0])[:, 0]
        phi2 = range_basis(f2[0])[:, 0]
        rest1 = sum((p.matrix for p in f1[1:]), np.zeros((e1.dim, e1.dim), complex))
        rest2 = sum((p.matrix for p in f2[1:]), np.zeros((e1.dim, e1.dim), complex))
        free = np.eye(e1.dim) - e1.matrix - e2.matrix
        comp = list(range_basis(free).T)
        coeffs = rng.standard_normal(len(comp)) + 1j * rng.standard_normal(len(comp))
        b3 = np.array(comp).T @ coeffs
        b3 /= np.linalg.norm(b3)
        basis = [phi1, phi2, b3]
        g1 = RealSection(_complement_function(mu, rest1, e1.rank), basis)
        g2 = RealSection(_complement_function(mu, rest2, e2.rank), basis)
        rot, third = _pair_residuals(g1, g2, h)
        rots.append(rot)
        thirds.append(third)
    return _pair_report("theorem3", rots, thirds, h, c, {"dim": mu.dim, "n_samples": n_samples})


# -- least-squares affine fit -------------------------------------------

@dataclass
class FitResult:
    """Least-squares affine representation ``tr(eta E) + K[label]``."""

    eta: np.ndarray
    constants: dict
    rms_residual: float
    n_samples: int
    max_residual: float = 0.0
    design_rank: int = 0
    metadata: dict = field(default_factory=dict)

    def predict(self, e, label=None):
        label = e.rank if label is None else label
        return float(np.real(np.vdot(e.matrix, self.eta))) + self.constants[label]

    def as_affine(self):
        """The fit as an :class:`AffineMeasure` (labels must be rank classes)."""
        return AffineMeasure(self.eta, {int(k): v for k, v in self.constants.items()})

    def to_dict(self):
        return {
            "eta": self.eta,
            "constants": {str(k): v for k, v in self.constants.items()},
            "rms_residual": self.rms_residual,
            "max_residual": self.max_residual,
            "n_samples": self.n_samples,
            "design_rank": self.design_rank,
        }


def _sorted_labels(labels):
    try:
        return sorted(set(labels))
    except TypeError:
        return sorted(set(labels), key=repr)


def design_matrix(projectors, labels, label_order=None):
    """Rows ``[tr(G_a E), indicator(label)]`` over the Gell-Mann basis ``G_a``."""
    d = projectors[0].dim
    basis = gell_mann_basis(d).reshape(d * d - 1, d * d)
    mats = np.array([p.matrix.reshape(d * d) for p in projectors])
    herm = np.real(mats @ basis.conj().T)
    order = label_order or _sorted_labels(labels)
    index = {lab: i for i, lab in enumerate(order)}
    ind = np.zeros((len(projectors), len(order)))
    ind[np.arange(len(projectors)), [index[lab] for lab in labels]] = 1.0
    return np.hstack([herm, ind]), order


def fit_affine(samples, rank_classes=None, labels=None, rtol=1e-10):
    """Fit ``mu(E) = tr(eta E) + K_i`` with traceless ``eta``.

    ``samples`` is a sequence of ``(Projector, value)``.  Each sample's class
    is its rank unless ``labels`` gives an explicit per-sample class (e.g. the
    tuple slot).  ``rank_classes``, when given, declares the admissible ranks.
    The solver is column-pivoted QR; a numerically rank-deficient design
    raises :class:`UnderdeterminedError` with the null-space dimension.
    """
    samples = list(samples)
    if not samples:
        raise UnderdeterminedError("no samples", 0)
    projectors = [s[0] for s in samples]
    y = np.array([float(s[1]) for s in samples])
    d = projectors[0].dim
    if labels is None:
        labels = [p.rank for p in projectors]
        if rank_classes is not None:
            bad = sorted(set(labels) - set(rank_classes))
            if bad:
                raise ValueError(f"sample ranks {bad} not among declared classes {list(rank_classes)}")
    labels = list(labels)
    if len(labels) != len(samples):
        raise ValueError("labels and samples differ in length")
    order = None
    if rank_classes is not None and all(isinstance(lab, (int, np.integer)) for lab in labels):
        order = [r for r in rank_classes if r in set(labels)]
    x, order = design_matrix(projectors, labels, order)
    ncols = x.shape[1]
    if len(samples) < ncols:
        raise UnderdeterminedError(
            f"{len(samples)} samples for {ncols} unknowns", ncols - len(samples))
    q, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rtol * max(x.shape) * diag[0]))
    if rank < ncols:
        raise UnderdeterminedError("design matrix is rank deficient", ncols - rank)
    coef = np.empty(ncols)
    coef[piv] = scipy.linalg.solve_triangular(r, q.T @ y)
    nb = d * d - 1
    eta = np.tensordot(coef[:nb], gell_mann_basis(d), axes=1)
    eta = (eta + eta.conj().T) / 2
    resid = x @ coef - y
    return FitResult(
        eta=eta,
        constants={lab: float(coef[nb + i]) for i, lab in enumerate(order)},
        rms_residual=float(np.sqrt(np.mean(resid ** 2))),
        max_residual=float(np.max(np.abs(resid))),
        n_samples=len(samples),
        design_rank=rank,
    )


def complete_pairs(mu, pairs):
    """Lift pair samples to complete triples: samples for ``(E1, E2, 1 - E1 - E2)``.

    The third value is defined as ``1 - mu(E1) - mu(E2)``.  Returns
    ``(samples, labels)`` with labels ``0, 1, 2`` for the three slots.
    """
    samples, labels = [], []
    for e1, e2 in pairs:
        d = e1.dim
        e3 = Projector.trusted(np.eye(d) - e1.matrix - e2.matrix, d - e1.rank - e2.rank)
        m1, m2 = mu(e1), mu(e2)
        samples += [(e1, m1), (e2, m2), (e3, 1.0 - m1 - m2)]
        labels += [0, 1, 2]
    return samples, labels


# -- patch consistency ---------------------------------------------------

@dataclass
class OverlapVerdict:
    patches: tuple
    overlap: bool
    required_equal: bool
    held: Optional[bool]
    delta_k: float
    message: str


@dataclass
class PatchReport:
    fits: list
    joint: FitResult
    verdicts: list
    passed: bool

    def to_dict(self):
        return {
            "fits": [f.to_dict() for f in self.fits],
            "joint": self.joint.to_dict(),
            "verdicts": [v.__dict__ for v in self.verdicts],
            "pass": self.passed,
        }


def verify_patch_consistency(measure, patches, n_samples=200, tol=1e-8, fit_tol=1e-8, seed=None):
    """Fit each projector patch, then jointly with a shared ``eta`` and per-patch ``K``.

    ``measure`` is one :class:`Measure`, or a sequence of per-patch measures
    (charts) when the value assigned to a projector may depend on the patch
    it was reached from.  For every pair of patches with a sampled common
    projector the constants must agree within ``tol``.
    """
    rng = as_rng(seed)
    charts = list(measure) if isinstance(measure, (list, tuple)) else [measure] * len(patches)
    draws = [[p.sampler(rng) for _ in range(n_samples)] for p in patches]
    per_patch = [
        [(e, charts[i](e)) for e in draws[i]] for i in range(len(patches))
    ]
    fits = [fit_affine(s) for s in per_patch]
    joint_samples = [s for group in per_patch for s in group]
    joint_labels = [i for i, group in enumerate(per_patch) for _ in group]
    joint = fit_affine(joint_samples, labels=joint_labels)
    verdicts = []
    for i, j in itertools.combinations(range(len(patches)), 2):
        overlap = any(patches[j].contains(e) for e in draws[i]) or any(
            patches[i].contains(e) for e in draws[j])
        dk = abs(joint.constants[i] - joint.constants[j])
        if overlap:
            held = dk <= tol
            msg = ("overlap with equal K: consistent with theorem" if held
                   else "overlap with unequal K: hypothesis violation detected")
            verdicts.append(OverlapVerdict((i, j), True, True, held, dk, msg))
        else:
            msg = ("no overlap, constants differ, consistent with theorem" if dk > tol
                   else "no overlap, constants equal")
            verdicts.append(OverlapVerdict((i, j), False, False, None, dk, msg))
    passed = joint.rms_residual <= fit_tol and all(v.held is not False for v in verdicts)
    return PatchReport(fits, joint, verdicts, passed)


# -- Gleason corollary ---------------------------------------------------

def reconstruct_density(measure, n_tuples=None, seed=None, tol_trace=1e-9, tol_eig=1e-8,
                        return_fit=False):
    """Recover ``rho = eta + K*1`` from a measure sampled on random rank-1 projectors.

    Samples ``n_tuples`` Haar-random rank-1 complete tuples (default
    ``d + 2``).  Raises :class:`NotAStateError` when the result has trace
    away from 1 or an eigenvalue below ``-tol_eig``.
    """
    d = measure.dim
    if d < 3:
        raise ValueError("the Gleason corollary needs dimension at least 3")
    rng = as_rng(seed)
    n_tuples = d + 2 if n_tuples is None else n_tuples
    samples = []
    for _ in range(n_tuples):
        for e in random_complete_tuple(d, [1] * d, rng):
            samples.append((e, measure(e)))
    fit = fit_affine(samples, rank_classes=[1])
    rho = fit.eta + fit.constants[1] * np.eye(d)
    rho = (rho + rho.conj().T) / 2
    tr = float(np.trace(rho).real)
    lo = float(np.linalg.eigvalsh(rho)[0])
    if abs(tr - 1) > tol_trace or lo < -tol_eig:
        raise NotAStateError("reconstructed operator is not a state", lo, tr)
    state = DensityOperator(rho, tol_trace=tol_trace, tol_eig=tol_eig)
    return (state, fit) if return_fit else state
