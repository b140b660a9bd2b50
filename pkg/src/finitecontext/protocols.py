"""Shipped ontological models, violating fixtures, and the one-bit EPR protocol.

Compliant models:

* :func:`bb_model` - the ontic state is the quantum state itself.
* :func:`deterministic_patch_model` - outcome-deterministic, Born weights
  over the elements of a fixed basis, defined near coarse grainings of it.

Each violating fixture breaks exactly one consistency check; they exist
so the checkers can be shown to fire.
"""
import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import MembershipError
from .hilbert import (
    MeasurementTuple,
    Projector,
    as_rng,
    basis_tuple,
    random_complete_tuple,
    range_basis,
)
from .ontology import OmegaFamily, OntologicalModel, SequentialInterface
from .regions import _near_identity

SCHEMA_VERSION = 1
CSV_COLUMNS = ["a_x", "a_y", "a_z", "b_x", "b_y", "b_z", "N", "mean", "stderr", "seed"]


def _unit(psi, dim):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (dim,):
        raise ValueError(f"state must have shape ({dim},), got {psi.shape}")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-9:
        raise ValueError(f"state is not normalized (|psi| = {nrm:.12g})")
    return psi


def _expect(psi, e):
    return float(np.real(np.vdot(psi, e.matrix @ psi)))


def random_rank_pattern(d, rng, min_outcomes=2):
    """Uniformly random composition of ``d`` with at least ``min_outcomes`` parts."""
    if min_outcomes > d:
        raise ValueError(f"cannot split C^{d} into {min_outcomes} outcomes")
    while True:
        cuts = np.flatnonzero(rng.integers(0, 2, size=d - 1)) + 1
        parts = np.diff(np.concatenate([[0], cuts, [d]]))
        if len(parts) >= min_outcomes:
            return [int(p) for p in parts]


def tuple_sampler(d, min_outcomes=2):
    """Haar-random tuples with a random rank pattern."""

    def draw(rng):
        return random_complete_tuple(d, random_rank_pattern(d, rng, min_outcomes), rng)

    return draw


# -- trivial model -----------------------------------------------------------

def _born_joint(x, projectors, tau=None):
    """Probabilities of the two-outcome sequence ``{E_k, 1 - E_k}``; ``n_k = 1`` means ``E_k``."""
    out = {}
    for nvec in itertools.product((0, 1), repeat=len(projectors)):
        v = x
        for e, n in zip(projectors, nvec):
            v = e.matrix @ v if n else v - e.matrix @ v
        out[nvec] = float(np.real(np.vdot(v, v)))
    return out


def _outcome_response(e, k, x, nvec):
    return float(nvec[k])


def bb_model(d):
    """Ontic state = quantum state; one context; ``mu(E|psi) = <psi|E|psi>``.

    The sequential form uses ``n_k`` = observed outcome of step ``k`` and the
    Lueders-updated state, so both causality conditions hold exactly.
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")

    def prepare(psi, eta_prep, rng, size):
        return [(_unit(psi, d), size)]

    def sampler(x, n, rng):
        return tuple_sampler(d, min_outcomes=3)

    return OntologicalModel(
        name="bb",
        dim=d,
        prepare=prepare,
        context_dist=lambda x, m, tau: np.ones(1),
        response=lambda e, x, n: _expect(x, e),
        n_ctx=1,
        sequential=SequentialInterface(2, _born_joint, _outcome_response),
        measurement_sampler=tuple_sampler(d),
        component_sampler=sampler,
    )


# -- outcome-deterministic model ------------------------------------------------

def _set_partitions(d, rng, min_blocks):
    while True:
        labels = rng.integers(0, d, size=d)
        blocks = [np.flatnonzero(labels == v) for v in np.unique(labels)]
        if len(blocks) >= min_blocks:
            rng.shuffle(blocks)
            return blocks


def _coarse_tuple(vecs, blocks):
    projs = []
    for b in blocks:
        cols = vecs[:, b]
        projs.append(Projector.trusted(cols @ cols.conj().T, len(b)))
    return MeasurementTuple(projs, check=False)


def deterministic_patch_model(basis, leakage=1e-3):
    """Outcome-deterministic model around coarse grainings of a fixed basis.

    The ontic state is a basis index ``x`` drawn with Born weights
    ``|<b_x|psi>|^2``.  There is one context.  A measurement belongs to the
    model's set when each basis vector sits almost entirely inside one of its
    outcomes: ``max_k <b_j|E_k|b_j> > 1 - leakage`` for every ``j``.  This is
    an open neighbourhood of the exact coarse grainings, so the responses
    ``mu(E|x) = [<b_x|E|b_x> > 1/2]`` are locally constant with ``eta = 0``
    and ``K`` in {0, 1}.  Born statistics are exact on the coarse grainings
    themselves and off by at most ``leakage`` inside the neighbourhood.

    Querying the context distribution outside the set raises
    :class:`MembershipError`.
    """
    if not 0 < leakage < 0.5:
        raise ValueError("leakage must lie in (0, 1/2)")
    basis = basis if isinstance(basis, MeasurementTuple) else MeasurementTuple(basis)
    if any(r != 1 for r in basis.ranks):
        raise ValueError("basis must consist of rank-1 projectors")
    d = basis.dim
    vecs = np.column_stack([range_basis(e.matrix)[:, 0] for e in basis])

    def weights(m):
        return np.array([np.real(np.einsum("ij,ik,kj->j", vecs.conj(), e.matrix, vecs)) for e in m])

    def in_omega(m):
        return bool(np.all(weights(m).max(axis=0) > 1 - leakage))

    def prepare(psi, eta_prep, rng, size):
        p = np.abs(vecs.conj().T @ _unit(psi, d)) ** 2
        counts = rng.multinomial(size, p / p.sum())
        return [(int(j), int(c)) for j, c in enumerate(counts) if c]

    def context_dist(x, m, tau):
        if not in_omega(m):
            raise MembershipError("measurement is not near a coarse graining of the model's basis")
        return np.ones(1)

    def response(e, x, n):
        v = vecs[:, x]
        return 1.0 if np.real(np.vdot(v, e.matrix @ v)) > 0.5 else 0.0

    radius = 0.5 * np.sqrt(leakage)

    def perturbed(blocks, rng):
        for _ in range(1000):
            u = _near_identity(d, radius, rng)
            m = _coarse_tuple(u @ vecs, blocks)
            if in_omega(m):
                return m
        raise RuntimeError("could not sample inside the leakage neighbourhood")

    def measurement_sampler(rng):
        return perturbed(_set_partitions(d, rng, 2), rng)

    def exact_sampler(rng):
        return _coarse_tuple(vecs, _set_partitions(d, rng, 2))

    def component_sampler(x, n, rng):
        blocks = _set_partitions(d, rng, min(3, d))
        return lambda r: perturbed(blocks, r)

    def seq_joint(x, projectors, tau=None):
        nvec = tuple(int(response(e, x, 0)) for e in projectors)
        return {nvec: 1.0}

    return OntologicalModel(
        name="deterministic",
        dim=d,
        prepare=prepare,
        context_dist=context_dist,
        response=response,
        n_ctx=1,
        sequential=SequentialInterface(2, seq_joint, _outcome_response),
        family=OmegaFamily(lambda n, x, m: n == 0 and in_omega(m), 1, name="leakage-neighbourhood"),
        measurement_sampler=measurement_sampler,
        component_sampler=component_sampler,
        meta={"leakage": leakage, "exact_sampler": exact_sampler, "basis": vecs},
    )


# -- violating fixtures -------------------------------------------------------

def _bb_variant(d, name, response=None, context=None):
    base = bb_model(d)
    base.name = name
    if response is not None:
        base.response = response
    if context is not None:
        base.context_dist = context
    base.sequential = None
    return base


def leaky_context_model(d):
    """Context probabilities sum to 0.9: outcome normalization fails by 0.1."""
    return _bb_variant(d, "leaky", context=lambda x, m, tau: np.array([0.9]))


def overcounting_model(d=2):
    """``mu(E) = 0.5 + 0.1 <e_2|E|e_2>``: on any two-outcome tuple the responses sum to 1.1."""
    e2 = np.zeros(d)
    e2[1] = 1
    return _bb_variant(d, "overcounting", response=lambda e, x, n: 0.5 + 0.1 * _expect(e2, e))


def uniform_model(d):
    """``mu(E) = rank(E) / d`` regardless of the state."""
    return _bb_variant(d, "uniform", response=lambda e, x, n: e.rank / d)


def nonaffine_model(d):
    """``mu(E|psi) = <psi|E|psi>^2``; not affine in ``E``."""
    return _bb_variant(d, "nonaffine", response=lambda e, x, n: _expect(x, e) ** 2)


def two_context_model(d=2, p_context=(0.3, 0.7), responses=((0.2, 0.8), (0.6, 0.4))):
    """Two contexts with fixed probabilities and state-independent responses.

    ``responses[n] = (r1, r2)``: an outcome ``E`` responds with
    ``r1 w + r2 (1 - w)`` where ``w = <e_1|E|e_1>``, so on the computational
    basis of C^2 the first outcome gets ``r1`` and the second ``r2``.
    """
    pc = np.asarray(p_context, dtype=float)
    resp = np.asarray(responses, dtype=float)
    e1 = np.zeros(d)
    e1[0] = 1

    def response(e, x, n):
        w = _expect(e1, e)
        return float(resp[n][0] * w + resp[n][1] * (1 - w))

    model = _bb_variant(d, "two-context", context=lambda x, m, tau: pc, response=response)
    model.n_ctx = len(pc)
    model.component_sampler = None
    return model


def gap_family(pattern=(1, 1, 1)):
    """Claims only tuples with rank pattern ``pattern``: covering gap for mixed patterns."""
    pattern = tuple(pattern)
    return OmegaFamily(lambda n, x, m: tuple(m.ranks) == pattern, 1, name=f"pattern{list(pattern)}")


def partition_family():
    """``n = 0`` iff the first outcome has rank 1, ``n = 1`` otherwise: covers everything."""
    return OmegaFamily(lambda n, x, m: (m[0].rank == 1) == (n == 0), 2, name="first-rank partition")


def first_rank_one_family():
    """Membership iff the first outcome has rank 1: merging it with the second breaks this."""
    return OmegaFamily(lambda n, x, m: m[0].rank == 1, 1, name="first-rank-one")


def merge_closed_family(max_outcomes):
    """Membership iff the tuple has at most ``max_outcomes`` outcomes; merges only shrink it."""
    return OmegaFamily(lambda n, x, m: len(m) <= max_outcomes, 1, name=f"at-most-{max_outcomes}")


def causality_violator(d):
    """Sequential model whose first context index is drawn with probability ``<psi|E_2|psi>``."""

    def joint(x, projectors, tau=None):
        p = [_expect(x, projectors[1] if k == 0 and len(projectors) > 1 else e)
             for k, e in enumerate(projectors)]
        out = {}
        for nvec in itertools.product((0, 1), repeat=len(projectors)):
            out[nvec] = float(np.prod([pk if n else 1 - pk for pk, n in zip(p, nvec)]))
        return out

    model = bb_model(d)
    model.name = "causality-violator"
    model.sequential = SequentialInterface(2, joint, _outcome_response)
    return model


def single_context_sequential(model):
    """Lift a single-context model: every step uses context 0 and the plain response."""

    def joint(x, projectors, tau=None):
        return {(0,) * len(projectors): 1.0}

    def response(e, k, x, nvec):
        return model.response(e, x, 0)

    model.sequential = SequentialInterface(1, joint, response)
    return model


MODEL_REGISTRY = {
    "bb": bb_model,
    "deterministic": lambda d: deterministic_patch_model(basis_tuple(d)),
    "uniform": uniform_model,
    "nonaffine": nonaffine_model,
    "leaky": leaky_context_model,
    "overcounting": overcounting_model,
    "causality-violator": causality_violator,
}


def get_model(name, d):
    try:
        factory = MODEL_REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(MODEL_REGISTRY)}") from None
    return factory(d)


# -- one-bit EPR protocol -------------------------------------------------------

@dataclass(frozen=True)
class EPRSample:
    """One round: two +-1 outcomes, the single communicated bit and the shared vectors."""

    outcome_a: int
    outcome_b: int
    bit: int
    lam1: tuple
    lam2: tuple

    def __post_init__(self):
        if self.outcome_a not in (-1, 1) or self.outcome_b not in (-1, 1):
            raise ValueError("outcomes must be +1 or -1")
        if self.bit not in (0, 1):
            raise ValueError("exactly one bit is communicated: value must be 0 or 1")


def _sgn(x):
    return np.where(np.asarray(x) >= 0, 1, -1)


def bloch_vector(v, tol=1e-12):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"Bloch vector must have 3 components, got shape {v.shape}")
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("zero-norm direction")
    if abs(nrm - 1) > tol:
        raise ValueError(f"direction is not a unit vector (|v| = {nrm:.15g})")
    return v


def toner_bacon_batch(a, b, lam1, lam2):
    """Vectorized rounds for shared vectors ``lam1``, ``lam2`` of shape (N, 3).

    Alice outputs ``A = -sgn(a.l1)`` and sends ``c = 0`` if
    ``sgn(a.l1) sgn(a.l2) = +1`` else ``c = 1``.  Bob decodes ``c' = 1 - 2c``
    and outputs ``B = sgn(b.(l1 + c' l2))``.  ``sgn(0) = +1``.
    """
    s1 = _sgn(lam1 @ a)
    s2 = _sgn(lam2 @ a)
    bit = np.where(s1 * s2 == 1, 0, 1)
    cprime = 1 - 2 * bit
    out_a = -s1
    out_b = _sgn((lam1 + cprime[:, None] * lam2) @ b)
    return out_a, out_b, bit


def toner_bacon_round(a, b, lam1, lam2):
    a, b, lam1, lam2 = (bloch_vector(v) for v in (a, b, lam1, lam2))
    out_a, out_b, bit = toner_bacon_batch(a, b, lam1[None], lam2[None])
    return EPRSample(int(out_a[0]), int(out_b[0]), int(bit[0]), tuple(lam1), tuple(lam2))


def uniform_sphere(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def toner_bacon(a, b, rng, n):
    """``n`` rounds with fresh shared randomness; returns the outcome arrays and the bits.

    Both shared vectors of a round come from one block of six normals, so
    the stream consumed per round does not depend on how rounds are batched.
    """
    lam = uniform_sphere(rng, 2 * n).reshape(n, 2, 3)
    return toner_bacon_batch(a, b, lam[:, 0], lam[:, 1])


PROTOCOLS = {"toner-bacon": toner_bacon}


@dataclass
class CorrelationEstimate:
    mean: float
    stderr: float
    mean_a: float
    mean_b: float
    n: int

    def __iter__(self):
        return iter((self.mean, self.stderr))


def estimate_correlation(protocol, a, b, n, seed=None, chunk=1 << 18):
    """Sample mean of ``A*B`` with standard error ``sqrt((1 - mean^2) / N)``.

    The marginal means of ``A`` and ``B`` are kept as well.  Chunking does
    not change the result for a fixed seed.
    """
    if isinstance(protocol, str):
        protocol = PROTOCOLS[protocol]
    a, b = bloch_vector(a), bloch_vector(b)
    rng = as_rng(seed)
    s_ab = s_a = s_b = 0
    left = int(n)
    while left > 0:
        k = min(chunk, left)
        out_a, out_b, _ = protocol(a, b, rng, k)
        s_ab += int(np.sum(out_a * out_b))
        s_a += int(np.sum(out_a))
        s_b += int(np.sum(out_b))
        left -= k
    mean = s_ab / n
    return CorrelationEstimate(mean, float(np.sqrt(max(1 - mean ** 2, 0.0) / n)), s_a / n, s_b / n, int(n))


PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
SINGLET = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def spin_projectors(a):
    """``(1 +- a.sigma) / 2`` for outcomes +1 and -1."""
    s = np.einsum("i,ijk->jk", bloch_vector(a), PAULI)
    return {+1: (np.eye(2) + s) / 2, -1: (np.eye(2) - s) / 2}


def singlet_born_correlation(a, b):
    """``sum_{s,t} s t tr(rho (P_a^s x P_b^t))`` on the singlet state."""
    rho = np.outer(SINGLET, SINGLET.conj())
    pa, pb = spin_projectors(a), spin_projectors(b)
    return float(sum(s * t * np.real(np.trace(rho @ np.kron(pa[s], pb[t])))
                     for s in (1, -1) for t in (1, -1)))


def direction_grid(n_points, seed=0):
    """Deterministic list of ``(a, b)`` unit-vector pairs; the first pair has ``a = b``."""
    rng = as_rng(seed)
    a = uniform_sphere(rng, n_points)
    b = uniform_sphere(rng, n_points)
    b[0] = a[0]
    return list(zip(a, b))


def simulate_sweep(pairs, n, seed, protocol="toner-bacon"):
    """One CSV row per pair; pair ``i`` uses seed ``seed + i``."""
    rows = []
    for i, (a, b) in enumerate(pairs):
        est = estimate_correlation(protocol, a, b, n, seed + i)
        rows.append({
            "a_x": a[0], "a_y": a[1], "a_z": a[2],
            "b_x": b[0], "b_y": b[1], "b_z": b[2],
            "N": n, "mean": est.mean, "stderr": est.stderr, "seed": seed + i,
            "mean_a": est.mean_a, "mean_b": est.mean_b,
        })
    return rows


def write_sweep_csv(rows, path):
    """CSV with a ``# schema_version`` comment line, then the fixed columns."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(r[k])) if k not in ("N", "seed") else int(r[k]) for k in CSV_COLUMNS})


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [{k: (int(v) if k in ("N", "seed") else float(v)) for k, v in row.items()}
            for row in csv.DictReader(lines)]
