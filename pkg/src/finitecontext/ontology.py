"""Ontological models whose contextual information is a finite index.

A model is the triple (preparation, context distribution, response):

* ``prepare(psi, eta_prep, rng, size)`` returns a histogram
  ``[(ontic_state, count), ...]`` of ``size`` draws.  Models over
  continuous ontic spaces bin on their side.
* ``context_dist(x, M, tau)`` returns ``P_c(n | x, M, tau)`` as an array over
  ``n = 0 .. n_ctx - 1``.
* ``response(E, x, n)`` returns ``mu(E | x, n)``.

The outcome probability is ``P(E_k | x, M, tau) = sum_n mu(E_k|x,n) P_c(n|x,M,tau)``.
Terms with ``P_c = 0`` are skipped: the response is indeterminate there.
The preparation context is called ``eta_prep`` to keep it apart from the
Hermitian operator ``eta`` of the affine form.
"""
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .errors import MembershipError, MissingInterfaceError
from .gleason import FitResult, fit_affine
from .hilbert import DEFAULT_TOL, MeasurementTuple, Projector, as_rng
from .report import CheckReport

NORM_TOL = 1e-10
NEG_TOL = 1e-12
CONTEXT_TOL = 1e-12


@dataclass
class SequentialInterface:
    """Per-step structure for consecutive two-outcome measurements ``{E_k, 1 - E_k}``.

    ``joint_context(x, projectors, tau)`` maps each context tuple
    ``(n_1, ..., n_M)`` to its probability; ``response(E, k, x, nvec)`` is
    ``mu(E_k | x, n_1, ..., n_M)`` for step ``k`` (0-based).
    """

    n_ctx: int
    joint_context: Callable[[Any, Sequence[Projector], Any], dict]
    response: Callable[[Projector, int, Any, tuple], float]


@dataclass
class OmegaFamily:
    """The sets ``Omega_n(x)``: ``membership(n, x, M)`` for ``n < n_ctx``."""

    membership: Callable[[int, Any, MeasurementTuple], bool]
    n_ctx: int
    connected: bool = True
    name: str = ""

    def contains(self, n, x, m):
        return bool(self.membership(n, x, m))

    def contexts_of(self, x, m):
        return [n for n in range(self.n_ctx) if self.membership(n, x, m)]


@dataclass
class OntologicalModel:
    name: str
    dim: int
    prepare: Callable[[np.ndarray, Any, np.random.Generator, int], list]
    context_dist: Callable[[Any, MeasurementTuple, Any], np.ndarray]
    response: Callable[[Projector, Any, int], float]
    n_ctx: int = 1
    taus: tuple = (None,)
    sequential: Optional[SequentialInterface] = None
    family: Optional[OmegaFamily] = None
    measurement_sampler: Optional[Callable[[np.random.Generator], MeasurementTuple]] = None
    component_sampler: Optional[Callable[[Any, int, np.random.Generator], Callable]] = None
    meta: dict = field(default_factory=dict)

    def omega_family(self):
        """Declared family, or the one induced by the support of ``context_dist``."""
        if self.family is not None:
            return self.family

        def membership(n, x, m):
            return any(self.context_dist(x, m, tau)[n] > 0 for tau in self.taus)

        return OmegaFamily(membership, self.n_ctx, name=f"{self.name}:support")

    def sample_ontic(self, psi, eta_prep=None, seed=None, size=1):
        """Expand the preparation histogram into a list of ``size`` ontic states."""
        rng = as_rng(seed)
        out = []
        for x, c in self.prepare(psi, eta_prep, rng, size):
            out += [x] * int(c)
        return out


# -- probabilities ---------------------------------------------------------

def _context(model, x, m, tau):
    p = np.asarray(model.context_dist(x, m, tau), dtype=float)
    if p.shape != (model.n_ctx,):
        raise ValueError(f"context distribution has shape {p.shape}, expected ({model.n_ctx},)")
    return p


def outcome_probabilities(model, x, m, tau=None):
    """``P(E_k | x, M, tau)`` for every outcome ``k`` of ``m``."""
    pc = _context(model, x, m, tau)
    probs = np.zeros(len(m))
    for n in np.flatnonzero(pc > 0):
        probs += pc[n] * np.array([model.response(e, x, int(n)) for e in m])
    return probs


def response_probability(model, e_k, x, m, tau=None):
    """``sum_n mu(E_k|x,n) P_c(n|x,M,tau)`` for a component ``E_k`` of ``m``."""
    k = m.index_of(e_k)
    if k is None:
        raise ValueError("projector is not a component of the measurement")
    pc = _context(model, x, m, tau)
    return float(sum(pc[n] * model.response(m[k], x, int(n)) for n in np.flatnonzero(pc > 0)))


# -- consistency checks ------------------------------------------------------

def check_outcome_normalization(model, x, measurements, taus=None):
    """Outcome probabilities sum to 1 and are non-negative for every ``(M, tau)``."""
    taus = model.taus if taus is None else taus
    defect, negativity, ctx_defect, count = 0.0, 0.0, 0.0, 0
    for m in measurements:
        for tau in taus:
            p = outcome_probabilities(model, x, m, tau)
            defect = max(defect, abs(p.sum() - 1))
            negativity = max(negativity, -p.min())
            ctx_defect = max(ctx_defect, abs(_context(model, x, m, tau).sum() - 1))
            count += 1
    return CheckReport(
        check="outcome_normalization",
        parameters={"model": model.name, "taus": len(taus)},
        max_residual=defect,
        tolerance=NORM_TOL,
        passed=defect <= NORM_TOL and negativity <= NEG_TOL,
        samples=count,
        details={"max_negativity": negativity, "max_context_defect": ctx_defect},
    )


def check_response_consistency(model, x, measurements, family=None):
    """Normalization and non-negativity of ``mu(.|x,n)`` on each ``M`` in ``Omega_n(x)``.

    Pairs ``(M, n)`` with ``M`` outside ``Omega_n(x)`` are skipped.
    """
    family = model.omega_family() if family is None else family
    defect, negativity, checked, skipped = 0.0, 0.0, 0, 0
    for m in measurements:
        for n in range(family.n_ctx):
            if not family.contains(n, x, m):
                skipped += 1
                continue
            r = np.array([model.response(e, x, n) for e in m])
            defect = max(defect, abs(r.sum() - 1))
            negativity = max(negativity, -r.min())
            checked += 1
    return CheckReport(
        check="response_consistency",
        parameters={"model": model.name},
        max_residual=max(defect, negativity),
        tolerance=NORM_TOL,
        passed=defect <= NORM_TOL and negativity <= NEG_TOL,
        samples=checked,
        details={"max_normalization_defect": defect, "max_negativity": negativity,
                 "skipped_pairs": skipped},
    )


def check_covering(family, x, measurements):
    """Fraction of sampled ``M`` lying in at least one ``Omega_n(x)``; passes iff 1."""
    measurements = list(measurements)
    covered = sum(1 for m in measurements if family.contexts_of(x, m))
    frac = covered / len(measurements) if measurements else 1.0
    return CheckReport(
        check="covering",
        parameters={"family": family.name},
        max_residual=1.0 - frac,
        tolerance=0.0,
        passed=frac == 1.0,
        samples=len(measurements),
        details={"covered_fraction": frac},
    )


def check_coarse_grain_closure(family, x, measurements, n):
    """Every adjacent coarse graining of ``M`` in ``Omega_n(x)`` stays in ``Omega_n(x)``."""
    from .hilbert import coarse_grain

    violations, checked = [], 0
    for idx, m in enumerate(measurements):
        if len(m) < 3 or not family.contains(n, x, m):
            continue
        for i in range(len(m) - 1):
            checked += 1
            if not family.contains(n, x, coarse_grain(m, i, i + 1)):
                violations.append({"measurement": idx, "merged": [i, i + 1]})
    return CheckReport(
        check="coarse_grain_closure",
        parameters={"family": family.name, "n": n},
        max_residual=float(len(violations)),
        tolerance=0.0,
        passed=not violations,
        samples=checked,
        details={"violations": violations[:20], "n_violations": len(violations)},
    )


def check_omega_consistency(model, family, x, measurements):
    """Declared membership agrees with ``P_c > 0`` for some declared ``tau`` (both directions)."""
    mismatches, count = 0, 0
    for m in measurements:
        support = np.zeros(model.n_ctx, dtype=bool)
        for tau in model.taus:
            try:
                support |= _context(model, x, m, tau) > 0
            except MembershipError:
                pass
        for n in range(family.n_ctx):
            count += 1
            if bool(support[n]) != family.contains(n, x, m):
                mismatches += 1
    return CheckReport(
        check="omega_consistency",
        parameters={"model": model.name, "family": family.name},
        max_residual=float(mismatches),
        tolerance=0.0,
        passed=mismatches == 0,
        samples=count,
    )


# -- Born reproduction --------------------------------------------------------

@dataclass
class OutcomeStat:
    outcome: int
    frequency: float
    born: float
    z: float


@dataclass
class BornReproduction:
    outcomes: list
    n_trials: int

    @property
    def max_abs_z(self):
        return max(abs(o.z) for o in self.outcomes)

    def report(self, z_max=4.0):
        return CheckReport(
            check="born_reproduction",
            parameters={"n_trials": self.n_trials, "z_max": z_max},
            max_residual=self.max_abs_z,
            tolerance=z_max,
            passed=self.max_abs_z <= z_max,
            samples=self.n_trials,
            details={"outcomes": [o.__dict__ for o in self.outcomes]},
        )


def _z_score(freq, p, n):
    se = np.sqrt(p * (1 - p) / n)
    if se == 0:
        return 0.0 if abs(freq - p) < 1e-15 else float(np.inf)
    return float((freq - p) / se)


def born_reproduction_check(model, psi, eta_prep, m, tau=None, n_trials=100_000, seed=None):
    """Monte-Carlo estimate of ``int dx P(E_k|x,M,tau) rho(x|psi,eta_prep)`` against ``<psi|E_k|psi>``.

    Ontic states come from the preparation histogram, the context index is
    drawn from ``P_c`` per ontic state and the outcome from the responses.
    ``z = (freq - p) / sqrt(p (1 - p) / N)``.
    """
    rng = as_rng(seed)
    psi = np.asarray(psi, dtype=complex)
    counts = np.zeros(len(m), dtype=np.int64)
    for x, c in model.prepare(psi, eta_prep, rng, n_trials):
        pc = _context(model, x, m, tau)
        for n, cn in enumerate(rng.multinomial(int(c), pc / pc.sum())):
            if cn == 0:
                continue
            r = np.array([model.response(e, x, n) for e in m])
            if r.min() < -NEG_TOL:
                raise ValueError(f"negative response {r.min():.3e} at context {n}")
            r = np.clip(r, 0, None)
            counts += rng.multinomial(cn, r / r.sum())
    born = np.array([np.real(np.vdot(psi, e.matrix @ psi)) for e in m])
    freqs = counts / n_trials
    stats = [OutcomeStat(k, float(freqs[k]), float(born[k]), _z_score(freqs[k], born[k], n_trials))
             for k in range(len(m))]
    return BornReproduction(stats, n_trials)


def z_outlier_fraction(results, z_max=4.0):
    zs = [abs(o.z) for r in results for o in r.outcomes]
    return sum(z > z_max for z in zs) / len(zs)


def two_sided_p(z):
    return float(2 * norm.sf(abs(z)))


# -- affine response given the context ------------------------------------------

def check_affine_given_context(model, x, n, sampler, n_samples=200, seed=None, tol_fit=1e-8,
                               by="slot_rank"):
    """Fit ``mu(E|x,n) = tr(eta(x,n) E) + K`` over projectors of sampled measurements.

    ``sampler(rng)`` draws measurements in one connected component of
    ``Omega_n(x)``; only those with three or more outcomes are used.  The
    class of a projector is its (slot, rank) pair (``by="slot_rank"``), its
    rank (``"rank"``) or its slot (``"slot"``).  The returned fit carries
    ``metadata["pass"]`` (rms residual within ``tol_fit``).
    """
    rng = as_rng(seed)
    family = model.omega_family()
    samples, labels, used, rejected = [], [], 0, 0
    tries = 0
    while used < n_samples:
        tries += 1
        if tries > 20 * n_samples:
            raise RuntimeError("sampler rarely yields measurements in Omega_n(x) with 3+ outcomes")
        m = sampler(rng)
        if len(m) < 3 or not family.contains(n, x, m):
            rejected += 1
            continue
        used += 1
        for k, e in enumerate(m):
            samples.append((e, model.response(e, x, n)))
            labels.append({"slot_rank": (k, e.rank), "rank": e.rank, "slot": k}[by])
    fit = fit_affine(samples, labels=labels)
    fit.metadata.update({
        "check": "affine_given_context",
        "n": n,
        "measurements": used,
        "rejected": rejected,
        "tolerance": tol_fit,
        "pass": fit.rms_residual <= tol_fit,
    })
    return fit


def affine_report(fit: FitResult, model_name=""):
    return CheckReport(
        check="affine_given_context",
        parameters={"model": model_name, "by_labels": True},
        max_residual=fit.rms_residual,
        tolerance=fit.metadata["tolerance"],
        passed=fit.metadata["pass"],
        samples=fit.n_samples,
        details={"eta": fit.eta, "constants": {repr(k): v for k, v in fit.constants.items()}},
    )


# -- sequential causality -----------------------------------------------------

@dataclass
class SequentialScenario:
    """Commuting projectors ``E_1 .. E_M`` measured one after another as ``{E_k, 1 - E_k}``."""

    projectors: tuple

    def __post_init__(self):
        self.projectors = tuple(self.projectors)
        for a, b in itertools.combinations(self.projectors, 2):
            if np.linalg.norm(a.matrix @ b.matrix - b.matrix @ a.matrix) > DEFAULT_TOL:
                raise ValueError("sequential projectors must commute")

    def __len__(self):
        return len(self.projectors)

    @property
    def dim(self):
        return self.projectors[0].dim

    def common_basis(self, seed=0):
        rng = as_rng(seed)
        h = sum(rng.standard_normal() * p.matrix for p in self.projectors)
        _, u = np.linalg.eigh((h + h.conj().T) / 2)
        return u


def _diag_projector(u, pattern):
    cols = u[:, np.asarray(pattern, dtype=bool)]
    return Projector.trusted(cols @ cols.conj().T, int(np.sum(pattern)))


def _random_pattern(d, rng):
    while True:
        pat = rng.integers(0, 2, size=d)
        if 0 < pat.sum() < d:
            return pat


def random_sequential_scenario(d, n_steps, seed=None):
    """Commuting projectors diagonal in a common Haar-random basis."""
    from .hilbert import haar_random_unitary

    rng = as_rng(seed)
    u = haar_random_unitary(d, rng)
    return SequentialScenario([_diag_projector(u, _random_pattern(d, rng)) for _ in range(n_steps)])


def _prefix_marginals(joint, k):
    out = {}
    for nvec, p in joint.items():
        key = tuple(nvec[:k])
        out[key] = out.get(key, 0.0) + p
    return out


def sequential_causality_check(model, scenario, x, tau=None, n_alternatives=8, seed=None,
                               tol=1e-12):
    """Future measurements must not influence past context indices or responses.

    For every step ``k``: the marginal of ``(n_1..n_k)`` must not change when
    ``E_{k+1}..E_M`` are replaced by other commuting projectors, and
    ``mu(E_k | x, nvec)`` must not change when ``n_{k+1}..n_M`` vary.
    """
    seq = model.sequential
    if seq is None:
        raise MissingInterfaceError(f"model {model.name!r} has no sequential interface")
    rng = as_rng(seed)
    projs = list(scenario.projectors)
    steps = len(projs)
    u = scenario.common_basis(rng)
    joint = seq.joint_context(x, projs, tau)
    ctx_dev = 0.0
    for k in range(1, steps):
        base = _prefix_marginals(joint, k)
        for _ in range(n_alternatives):
            alt = projs[:k] + [_diag_projector(u, _random_pattern(scenario.dim, rng))
                               for _ in range(steps - k)]
            other = _prefix_marginals(seq.joint_context(x, alt, tau), k)
            for key in set(base) | set(other):
                ctx_dev = max(ctx_dev, abs(base.get(key, 0.0) - other.get(key, 0.0)))
    resp_dev = 0.0
    for k in range(steps):
        support = {nv[:k + 1] for nv, p in joint.items() if p > 0}
        for prefix in support:
            vals = [seq.response(projs[k], k, x, prefix + tail)
                    for tail in itertools.product(range(seq.n_ctx), repeat=steps - k - 1)]
            resp_dev = max(resp_dev, max(vals) - min(vals))
    worst = max(ctx_dev, resp_dev)
    return CheckReport(
        check="sequential_causality",
        parameters={"model": model.name, "steps": steps, "alternatives": n_alternatives},
        max_residual=worst,
        tolerance=tol,
        passed=worst <= tol,
        samples=steps,
        details={"max_context_deviation": ctx_dev, "max_response_deviation": resp_dev},
    )


def require_membership(ok, what="measurement"):
    if not ok:
        raise MembershipError(f"{what} lies outside the model's declared set")


# -- full suite ------------------------------------------------------------------

def _random_state(d, rng):
    from .hilbert import random_unit_vector

    return random_unit_vector(d, rng)


def run_model_suite(model, seed=None, n_states=3, n_measurements=50, n_trials=100_000,
                    n_born=10, affine_samples=200, z_max=4.0):
    """Every consistency check on ``model``; returns a list of :class:`CheckReport`.

    Ontic states come from preparing random pure states.  Measurements are
    drawn with ``model.measurement_sampler``; Born reproduction uses
    ``model.meta["exact_sampler"]`` when the model provides one.  The affine
    fit runs for every ``(x, n)`` with a component sampler when ``d >= 3``.
    """
    rng = as_rng(seed)
    if model.measurement_sampler is None:
        raise MissingInterfaceError(f"model {model.name!r} has no measurement sampler")
    family = model.omega_family()
    xs = []
    for _ in range(n_states):
        hist = model.prepare(_random_state(model.dim, rng), None, rng, 1)
        xs.append(hist[0][0])
    ms = [model.measurement_sampler(rng) for _ in range(n_measurements)]
    reports = []
    for i, x in enumerate(xs):
        tag = {"ontic_index": i}
        for rep in (check_outcome_normalization(model, x, ms),
                    check_response_consistency(model, x, ms, family),
                    check_covering(family, x, ms),
                    check_omega_consistency(model, family, x, ms)):
            rep.parameters.update(tag)
            reports.append(rep)
        for n in range(family.n_ctx):
            rep = check_coarse_grain_closure(family, x, ms, n)
            rep.parameters.update(tag)
            reports.append(rep)
            if model.component_sampler is not None and model.dim >= 3:
                fit = check_affine_given_context(model, x, n, model.component_sampler(x, n, rng),
                                                 affine_samples, rng)
                rep = affine_report(fit, model.name)
                rep.parameters.update(tag, n=n)
                reports.append(rep)
        if model.sequential is not None:
            scen = random_sequential_scenario(model.dim, 3, rng)
            rep = sequential_causality_check(model, scen, x, seed=rng)
            rep.parameters.update(tag)
            reports.append(rep)
    exact = model.meta.get("exact_sampler", model.measurement_sampler)
    results = []
    for _ in range(n_born):
        psi = _random_state(model.dim, rng)
        results.append(born_reproduction_check(model, psi, None, exact(rng), None, n_trials, rng))
    zs = [abs(o.z) for r in results for o in r.outcomes]
    outliers = sum(z > z_max for z in zs)
    allowed = int(0.01 * len(zs))
    reports.append(CheckReport(
        check="born_reproduction",
        parameters={"model": model.name, "scenarios": n_born, "n_trials": n_trials, "z_max": z_max},
        max_residual=max(zs),
        tolerance=z_max,
        passed=outliers <= allowed,
        samples=n_born * n_trials,
        details={"outliers": outliers, "allowed_outliers": allowed, "outcomes": len(zs)},
    ))
    return reports
