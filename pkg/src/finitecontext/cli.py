"""Command-line front end.

Every command writes a JSON report (``--out``, default stdout) holding the
schema version, the fully resolved config, one entry per check, the overall
verdict, wall-clock timings and a digest of everything except the timings.
Exit status: 0 all checks passed, 1 a check failed, 2 usage error.
The default seed comes from ``FINITECONTEXT_SEED`` (0 when unset).
"""
import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import gleason, ontology, protocols
from .dsl import load_measure
from .errors import NotAStateError, SpecError, UnderdeterminedError
from .gleason import random_orthogonal_pair
from .hilbert import Projector, as_rng, random_complete_tuple
from .measures import additivity_residual
from .report import SCHEMA_VERSION, CheckReport, jsonable
from .sampleio import SampleFileError, gen_data, read_samples, write_samples

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "FINITECONTEXT_SEED"


class UsageError(Exception):
    pass


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _positive(kind):
    def conv(text):
        try:
            v = kind(float(text)) if kind is int else kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"{text!r} must be positive")
        return v

    return conv


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be non-negative")
    return v


def _ranks(text):
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"ranks must be comma-separated integers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="finitecontext", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help=f"RNG seed (default ${SEED_ENV} or 0)")
        sp.add_argument("--out", default=None, help="report path (default stdout)")
        sp.add_argument("--workers", type=_positive(int), default=1,
                        help="worker count, recorded in the report")

    sp = sub.add_parser("verify-gleason", help="finite-difference and fit checks of a measure")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--dim", type=_positive(int), required=True)
    sp.add_argument("--samples", type=_positive(int), default=200)
    sp.add_argument("--h", type=_positive(float), default=gleason.DEFAULT_H)
    sp.add_argument("--c", type=_positive(float), default=gleason.DEFAULT_C)
    sp.add_argument("--fit-tol", type=_positive(float), default=1e-8)
    common(sp)

    sp = sub.add_parser("fit", help="least-squares affine fit of a measure or a sample file")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--measure")
    src.add_argument("--data")
    sp.add_argument("--dim", type=_positive(int), default=None)
    sp.add_argument("--samples", type=_positive(int), default=200)
    sp.add_argument("--ranks", type=_ranks, default=None)
    sp.add_argument("--tol", type=_positive(float), default=1e-8)
    common(sp)

    sp = sub.add_parser("reconstruct", help="density operator from a measure on rank-1 projectors")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--measure")
    src.add_argument("--data")
    sp.add_argument("--dim", type=_positive(int), default=None)
    sp.add_argument("--tuples", type=_positive(int), default=None)
    sp.add_argument("--tol-trace", type=_positive(float), default=1e-9)
    sp.add_argument("--tol-eig", type=_positive(float), default=1e-8)
    common(sp)

    sp = sub.add_parser("check-model", help="consistency suite for a registered ontological model")
    sp.add_argument("--model", required=True, choices=sorted(protocols.MODEL_REGISTRY))
    sp.add_argument("--dim", type=_positive(int), required=True)
    sp.add_argument("--trials", type=_positive(int), default=100_000)
    sp.add_argument("--scenarios", type=_positive(int), default=10)
    sp.add_argument("--measurements", type=_positive(int), default=50)
    sp.add_argument("--states", type=_positive(int), default=3)
    sp.add_argument("--affine-samples", type=_positive(int), default=200)
    sp.add_argument("--z-max", type=_positive(float), default=4.0)
    common(sp)

    sp = sub.add_parser("simulate-epr", help="one-bit protocol against the singlet correlation")
    sp.add_argument("--points", type=_positive(int), default=20)
    sp.add_argument("--trials", type=_positive(int), default=1_000_000)
    sp.add_argument("--grid-seed", type=int, default=0)
    sp.add_argument("--sigmas", type=_positive(float), default=5.0)
    sp.add_argument("--marginal-sigmas", type=_positive(float), default=4.0)
    sp.add_argument("--csv", default=None, help="sweep CSV path")
    common(sp)

    sp = sub.add_parser("gen-data", help="write (projector, value) samples of a measure")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--dim", type=_positive(int), required=True)
    sp.add_argument("--ranks", type=_ranks, default=[1])
    sp.add_argument("--count", type=_nonneg_int, required=True)
    sp.add_argument("--data-out", required=True, help="sample file to write")
    common(sp)
    return p


# -- helpers ----------------------------------------------------------------

def _measure(path, dim):
    try:
        mu = load_measure(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    except SpecError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if dim is not None and mu.dim != dim:
        raise UsageError(f"{path}: measure has dim {mu.dim} but --dim {dim}")
    return mu


def _data(path, dim):
    try:
        d, samples = read_samples(path)
    except SampleFileError as exc:
        raise UsageError(str(exc)) from None
    if dim is not None and d != dim:
        raise UsageError(f"{path}: file has dim {d} but --dim {dim}")
    return d, samples


def _witness(mu, r):
    d = mu.dim
    m = np.zeros((d, d), complex)
    m[np.arange(r), np.arange(r)] = 1
    return mu.contains(Projector.trusted(m, r))


def _domain_ranks(mu):
    return [r for r in range(1, mu.dim) if _witness(mu, r)]


def _fit_samples(mu, n, ranks, rng):
    samples = []
    for _ in range(n):
        r = ranks[rng.integers(len(ranks))]
        e = random_complete_tuple(mu.dim, [r, mu.dim - r], rng)[0]
        samples.append((e, mu(e)))
    return samples


def _fit_report(fit, tol, params):
    return CheckReport(
        check="fit_affine",
        parameters=params,
        max_residual=fit.rms_residual,
        tolerance=tol,
        passed=fit.rms_residual <= tol,
        samples=fit.n_samples,
        details=fit.to_dict(),
    )


def _underdetermined(exc, params):
    return CheckReport("fit_affine", params, None, None, False, 0,
                       details={"error": str(exc), "null_dim": exc.null_dim})


# -- commands --------------------------------------------------------------

def cmd_verify_gleason(cfg, rng):
    mu = _measure(cfg["measure"], cfg["dim"])
    d = mu.dim
    ranks = _domain_ranks(mu)
    if 1 not in ranks:
        raise UsageError("measure must be defined on rank-1 projectors")
    checks = [gleason.verify_lemma1(mu, lambda r: random_orthogonal_pair(d, r), cfg["samples"],
                                    cfg["h"], cfg["c"], rng)]
    if d >= 4 and 2 in ranks:
        def pair(r):
            m = random_complete_tuple(d, [2, 1, d - 3], r)
            return m[0], m[1]

        checks.append(gleason.verify_theorem3(mu, pair, max(1, cfg["samples"] // 5),
                                              cfg["h"], cfg["c"], rng))
    if 2 in ranks:
        res = []
        for _ in range(cfg["samples"]):
            m = random_complete_tuple(d, [1, 1] + ([d - 2] if d > 2 else []), rng)
            res.append(abs(additivity_residual(mu, m[0], m[1])))
        checks.append(CheckReport("additivity", {"ranks": [1, 1]}, max(res), 1e-10,
                                  max(res) <= 1e-10, len(res)))
    try:
        fit = gleason.fit_affine(_fit_samples(mu, cfg["samples"], ranks, rng))
        checks.append(_fit_report(fit, cfg["fit_tol"], {"ranks": ranks}))
    except UnderdeterminedError as exc:
        checks.append(_underdetermined(exc, {"ranks": ranks}))
    return checks, {}


def cmd_fit(cfg, rng):
    if cfg["measure"]:
        mu = _measure(cfg["measure"], cfg["dim"])
        ranks = cfg["ranks"] or _domain_ranks(mu)
        samples = _fit_samples(mu, cfg["samples"], ranks, rng)
    else:
        _, samples = _data(cfg["data"], cfg["dim"])
    params = {"source": cfg["measure"] or cfg["data"]}
    try:
        fit = gleason.fit_affine(samples)
    except UnderdeterminedError as exc:
        return [_underdetermined(exc, params)], {}
    return [_fit_report(fit, cfg["tol"], params)], {"eta": fit.eta, "constants": fit.constants}


def cmd_reconstruct(cfg, rng):
    kw = dict(tol_trace=cfg["tol_trace"], tol_eig=cfg["tol_eig"])
    if cfg["measure"]:
        mu = _measure(cfg["measure"], cfg["dim"])
        params = {"source": cfg["measure"]}
        try:
            state, fit = gleason.reconstruct_density(mu, cfg["tuples"], rng, return_fit=True, **kw)
        except NotAStateError as exc:
            return [CheckReport("reconstruct_density", params, exc.min_eigenvalue, cfg["tol_eig"], False, 0,
                                details={"error": str(exc), "trace": exc.trace})], {}
        rho = state.rho
    else:
        _, samples = _data(cfg["data"], cfg["dim"])
        params = {"source": cfg["data"]}
        fit = gleason.fit_affine(samples, rank_classes=[1])
        rho = fit.eta + fit.constants[1] * np.eye(fit.eta.shape[0])
        lo, tr = float(np.linalg.eigvalsh(rho)[0]), float(np.trace(rho).real)
        if lo < -cfg["tol_eig"] or abs(tr - 1) > cfg["tol_trace"]:
            return [CheckReport("reconstruct_density", params, lo, cfg["tol_eig"], False, fit.n_samples,
                                details={"error": "reconstructed operator is not a state", "trace": tr})], {}
    lo = float(np.linalg.eigvalsh(rho)[0])
    rep = CheckReport("reconstruct_density", params, fit.rms_residual, cfg["tol_trace"], True,
                      fit.n_samples, details={"min_eigenvalue": lo, "trace": float(np.trace(rho).real)})
    return [rep], {"rho": rho}


def cmd_check_model(cfg, rng):
    model = protocols.get_model(cfg["model"], cfg["dim"])
    checks = ontology.run_model_suite(
        model, rng, n_states=cfg["states"], n_measurements=cfg["measurements"],
        n_trials=cfg["trials"], n_born=cfg["scenarios"], affine_samples=cfg["affine_samples"],
        z_max=cfg["z_max"])
    return checks, {}


def _z(diff, se, atol=1e-12):
    """Standard score; a zero standard error only tolerates round-off differences."""
    if abs(diff) <= atol:
        return 0.0
    return diff / se if se > 0 else float(np.inf)


def cmd_simulate_epr(cfg, rng):
    pairs = protocols.direction_grid(cfg["points"], cfg["grid_seed"])
    seed = int(rng.integers(2 ** 31))
    rows = protocols.simulate_sweep(pairs, cfg["trials"], seed)
    worst, worst_marg = 0.0, 0.0
    for r, (a, b) in zip(rows, pairs):
        target = protocols.singlet_born_correlation(a, b)
        r["born"] = target
        r["z"] = _z(r["mean"] - target, r["stderr"])
        worst = max(worst, abs(r["z"]))
        for key in ("mean_a", "mean_b"):
            se = np.sqrt(max(1 - r[key] ** 2, 0) / r["N"])
            worst_marg = max(worst_marg, abs(_z(r[key], se)))
    if cfg["csv"]:
        try:
            protocols.write_sweep_csv(rows, cfg["csv"])
        except OSError as exc:
            raise UsageError(f"{cfg['csv']}: {exc.strerror}") from None
    checks = [
        CheckReport("epr_correlation", {"points": len(rows), "N": cfg["trials"]}, worst,
                    cfg["sigmas"], worst <= cfg["sigmas"], len(rows) * cfg["trials"],
                    details={"rows": rows}),
        CheckReport("epr_marginals", {"points": len(rows), "N": cfg["trials"]}, worst_marg,
                    cfg["marginal_sigmas"], worst_marg <= cfg["marginal_sigmas"],
                    len(rows) * cfg["trials"]),
    ]
    return checks, {"base_seed": seed}


def cmd_gen_data(cfg, rng):
    mu = _measure(cfg["measure"], cfg["dim"])
    try:
        samples = gen_data(mu, cfg["ranks"], cfg["count"], rng)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        write_samples(cfg["data_out"], samples, mu.dim)
    except SampleFileError as exc:
        raise UsageError(str(exc)) from None
    rep = CheckReport("gen_data", {"path": cfg["data_out"]}, 0.0, 0.0, True, len(samples))
    return [rep], {}


COMMANDS = {
    "verify-gleason": cmd_verify_gleason,
    "fit": cmd_fit,
    "reconstruct": cmd_reconstruct,
    "check-model": cmd_check_model,
    "simulate-epr": cmd_simulate_epr,
    "gen-data": cmd_gen_data,
}


def report_digest(report):
    """SHA-256 of the canonical JSON of a report without its timing and digest fields."""
    body = {k: v for k, v in report.items() if k not in ("timings", "digest")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def run(cfg):
    """Execute one resolved config; returns ``(exit_status, report_dict)``."""
    t0 = time.perf_counter()
    checks, extra = COMMANDS[cfg["command"]](cfg, as_rng(cfg["seed"]))
    passed = all(c.passed for c in checks)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": cfg["command"],
        "config": jsonable(cfg),
        "checks": [c.to_dict() for c in checks],
        "results": jsonable(extra),
        "pass": passed,
        "timings": {"total_seconds": time.perf_counter() - t0},
    }
    report["digest"] = report_digest(report)
    return (EXIT_PASS if passed else EXIT_FAIL), report


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = vars(args)
        if cfg["seed"] is None:
            cfg["seed"] = _default_seed()
        status, report = run(cfg)
    except UsageError as exc:
        print(f"finitecontext {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"finitecontext: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    return status
