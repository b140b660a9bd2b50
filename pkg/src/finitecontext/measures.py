"""Probability measures over projectors and frame functions over vectors."""
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DimensionMismatchError, DomainError
from .hilbert import DEFAULT_TOL, Projector, as_rng, haar_random_unitary

__all__ = [
    "DensityOperator",
    "Measure",
    "AffineMeasure",
    "FrameFunction",
    "random_density_operator",
    "born",
    "born_measure",
    "affine_eval",
    "additivity_residual",
    "quadratic",
    "polynomial",
    "frame_function",
    "radial_extension",
    "radial_constraint_residual",
]


class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    __slots__ = ("rho",)

    def __init__(self, rho, tol_trace=1e-12, tol_eig=1e-10):
        rho = np.array(rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density operator must be square, got {rho.shape}")
        if np.linalg.norm(rho - rho.conj().T) > 1e-12:
            raise ValueError("density operator is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1) > tol_trace:
            raise ValueError(f"density operator trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh(rho)[0]
        if lo < -tol_eig:
            raise ValueError(f"density operator has negative eigenvalue {lo:.3e}")
        rho.flags.writeable = False
        self.rho = rho

    @property
    def dim(self):
        return self.rho.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.rho, dtype=dtype)

    def __repr__(self):
        return f"DensityOperator(dim={self.dim})"


def random_density_operator(d, seed=None, rank=None):
    """Random density operator: Haar eigenvectors with Dirichlet(1) spectrum on ``rank`` levels."""
    rng = as_rng(seed)
    rank = d if rank is None else rank
    spec = np.zeros(d)
    spec[:rank] = rng.dirichlet(np.ones(rank))
    u = haar_random_unitary(d, rng)
    rho = (u * spec) @ u.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityOperator(rho / np.trace(rho).real)


def _as_projector(e):
    return e if isinstance(e, Projector) else Projector(e)


class Measure:
    """A real-valued map on projectors with an explicit domain.

    ``evaluator`` receives a :class:`Projector`.  ``domain`` is a membership
    predicate; evaluating outside it raises :class:`DomainError` rather than
    returning 0.  ``witness`` is a projector known to lie in the domain.
    ``kind`` and ``params`` describe how the measure was built.
    """

    def __init__(self, evaluator, dim, domain=None, witness=None, kind="custom", params=None):
        self.evaluator = evaluator
        self.dim = int(dim)
        self.domain = domain
        self.witness = witness
        self.kind = kind
        self.params = dict(params or {})

    def contains(self, e):
        return self.domain is None or bool(self.domain(e))

    def __call__(self, e):
        e = _as_projector(e)
        if e.dim != self.dim:
            raise DimensionMismatchError(f"measure on C^{self.dim} evaluated on C^{e.dim}")
        if not self.contains(e):
            raise DomainError(f"projector of rank {e.rank} lies outside the domain of {self.kind}")
        return float(self.evaluator(e))

    def restricted(self, domain, witness=None):
        """Same evaluator on a smaller domain."""
        outer = self.domain

        def both(e):
            return (outer is None or outer(e)) and domain(e)

        return Measure(self.evaluator, self.dim, both, witness, self.kind, self.params)

    def __repr__(self):
        return f"Measure(kind={self.kind!r}, dim={self.dim})"


def _rho_matrix(rho):
    return rho.rho if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)


def born_measure(rho, e):
    """``tr(E rho)``."""
    r = _rho_matrix(rho)
    e = _as_projector(e)
    if r.shape != e.matrix.shape:
        raise DimensionMismatchError(f"rho is {r.shape}, projector is {e.matrix.shape}")
    return float(np.real(np.vdot(e.matrix, r)))


def born(rho):
    r = _rho_matrix(rho)
    return Measure(lambda e: np.real(np.vdot(e.matrix, r)), r.shape[0], kind="born",
                   params={"rho": r})


def quadratic(rho):
    """Non-affine test measure ``tr(E rho)**2``."""
    return polynomial(rho, [0.0, 0.0, 1.0], kind="quadratic")


def polynomial(rho, coeffs, kind="poly"):
    """``sum_k coeffs[k] * tr(E rho)**k``."""
    r = _rho_matrix(rho)
    c = np.asarray(coeffs, dtype=float)

    def ev(e):
        p = np.real(np.vdot(e.matrix, r))
        return np.polyval(c[::-1], p)

    return Measure(ev, r.shape[0], kind=kind, params={"rho": r, "coeffs": c})


class AffineMeasure:
    """``mu(E) = tr(eta E) + K[rank(E)]`` on the declared rank classes.

    The pair is defined up to the gauge shift ``eta -> eta + lam*1``,
    ``K_r -> K_r - lam*r``.  By default the constructor fixes the gauge by
    making ``eta`` traceless; pass ``normalize=False`` to keep it as given.
    """

    __slots__ = ("eta", "constants")

    def __init__(self, eta, constants: Mapping[int, float], normalize=True):
        eta = np.array(eta, dtype=complex)
        if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
            raise ValueError("eta must be a square matrix")
        if np.linalg.norm(eta - eta.conj().T) > 1e-12 * max(1.0, np.linalg.norm(eta)):
            raise ValueError("eta must be Hermitian")
        eta = (eta + eta.conj().T) / 2
        constants = {int(r): float(k) for r, k in constants.items()}
        if any(r < 1 or r > eta.shape[0] for r in constants):
            raise ValueError(f"rank classes {sorted(constants)} outside 1..{eta.shape[0]}")
        if normalize:
            lam = np.trace(eta).real / eta.shape[0]
            eta = eta - lam * np.eye(eta.shape[0])
            constants = {r: k + lam * r for r, k in constants.items()}
        eta.flags.writeable = False
        self.eta = eta
        self.constants = constants

    @property
    def dim(self):
        return self.eta.shape[0]

    @property
    def rank_classes(self):
        return tuple(sorted(self.constants))

    def shift(self, lam):
        """Gauge-equivalent representation with ``eta + lam*1`` (not normalized)."""
        return AffineMeasure(
            self.eta + lam * np.eye(self.dim),
            {r: k - lam * r for r, k in self.constants.items()},
            normalize=False,
        )

    def normalized(self):
        return AffineMeasure(self.eta, self.constants, normalize=True)

    def __call__(self, e):
        return affine_eval(self, e)

    def as_measure(self):
        return Measure(
            lambda e: affine_eval(self, e),
            self.dim,
            domain=lambda e: e.rank in self.constants,
            kind="affine",
            params={"eta": self.eta, "K": dict(self.constants)},
        )

    def __repr__(self):
        return f"AffineMeasure(dim={self.dim}, K={self.constants})"


def affine_eval(a, e):
    e = _as_projector(e)
    if e.dim != a.dim:
        raise DimensionMismatchError(f"eta is {a.dim}x{a.dim}, projector is {e.dim}x{e.dim}")
    try:
        k = a.constants[e.rank]
    except KeyError:
        raise DomainError(f"rank {e.rank} is not a declared class {a.rank_classes}") from None
    return float(np.real(np.vdot(e.matrix, a.eta))) + k


def additivity_residual(mu, e1, e2, tol=DEFAULT_TOL):
    """``mu(E1) + mu(E2) - mu(E1 + E2)`` for an orthogonal pair."""
    e1, e2 = _as_projector(e1), _as_projector(e2)
    if e1.dim != e2.dim:
        raise DimensionMismatchError(f"dimensions {e1.dim} and {e2.dim}")
    overlap = np.linalg.norm(e1.matrix @ e2.matrix)
    if overlap > tol:
        raise ValueError(f"projectors are not orthogonal: |E1 E2|_F = {overlap:.3e}")
    both = Projector.trusted(e1.matrix + e2.matrix, e1.rank + e2.rank)
    return mu(e1) + mu(e2) - mu(both)


class FrameFunction:
    """Real function of a (complex) vector.

    ``unit_only`` frame functions accept only unit vectors; the radial
    extension lifts them to the whole space minus the origin.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], float], dim, unit_only=False,
                 tol_norm=1e-9, source: Optional[Measure] = None):
        self.evaluator = evaluator
        self.dim = int(dim)
        self.unit_only = unit_only
        self.tol_norm = tol_norm
        self.source = source

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=complex)
        if phi.shape != (self.dim,):
            raise DimensionMismatchError(f"frame function on C^{self.dim} got shape {phi.shape}")
        if self.unit_only and abs(np.linalg.norm(phi) - 1) > self.tol_norm:
            raise DomainError("frame function is only defined on unit vectors")
        return float(self.evaluator(phi))


def frame_function(mu):
    """``f(phi) = mu(phi phi^dag)`` on unit vectors."""

    def ev(phi):
        return mu(Projector.trusted(np.outer(phi, phi.conj()), 1))

    return FrameFunction(ev, mu.dim, unit_only=True, source=mu)


def radial_extension(f):
    """Degree-2 homogeneous extension ``f(phi/|phi|) |phi|^2``.

    ``f`` is a unit-sphere :class:`FrameFunction` or a :class:`Measure`.
    The result raises :class:`DomainError` at the origin.
    """
    if isinstance(f, Measure):
        f = frame_function(f)
    ev = f.evaluator

    def extended(phi):
        n2 = np.real(np.vdot(phi, phi))
        if n2 == 0.0:
            raise DomainError("radial extension is undefined at the zero vector")
        return ev(phi / np.sqrt(n2)) * n2

    return FrameFunction(extended, f.dim, unit_only=False, source=f.source)


def radial_constraint_residual(f, phi, h=1e-4):
    """Central-difference value of ``phi.df/dphi + phi*.df/dphi* - 2 f`` at ``phi``.

    With ``phi = a + ib`` the left-hand operator is the real Euler operator
    ``a.d/da + b.d/db``, i.e. the derivative of ``f((1+t)phi)`` at ``t = 0``.
    """
    phi = np.asarray(phi, dtype=complex)
    euler = (f((1 + h) * phi) - f((1 - h) * phi)) / (2 * h)
    return euler - 2 * f(phi)
