import numpy as np
import pytest

from finitecontext.errors import MembershipError, MissingInterfaceError
from finitecontext.hilbert import basis_tuple, coarse_grain, random_complete_tuple, random_unit_vector
from finitecontext.ontology import (
    OmegaFamily,
    SequentialScenario,
    born_reproduction_check,
    check_affine_given_context,
    check_coarse_grain_closure,
    check_covering,
    check_omega_consistency,
    check_outcome_normalization,
    check_response_consistency,
    random_sequential_scenario,
    response_probability,
    sequential_causality_check,
)
from finitecontext.protocols import (
    bb_model,
    causality_violator,
    deterministic_patch_model,
    first_rank_one_family,
    gap_family,
    leaky_context_model,
    merge_closed_family,
    nonaffine_model,
    overcounting_model,
    partition_family,
    single_context_sequential,
    tuple_sampler,
    two_context_model,
    uniform_model,
)


def _measurements(d, n, rng, min_outcomes=2):
    draw = tuple_sampler(d, min_outcomes)
    return [draw(rng) for _ in range(n)]


# -- response probability ------------------------------------------------

def test_single_context_equals_response(rng):
    model = bb_model(3)
    psi = random_unit_vector(3, rng)
    m = random_complete_tuple(3, [1, 2], rng)
    assert response_probability(model, m[0], psi, m) == model.response(m[0], psi, 0)


def test_bb_probability_is_born(rng):
    model = bb_model(4)
    psi = random_unit_vector(4, rng)
    m = random_complete_tuple(4, [1, 2, 1], rng)
    for e in m:
        expected = np.real(np.vdot(psi, e.matrix @ psi))
        assert abs(response_probability(model, e, psi, m) - expected) <= 1e-12


def test_two_context_mixture():
    model = two_context_model()
    b = basis_tuple(2)
    # 0.3 * 0.2 + 0.7 * 0.6
    assert response_probability(model, b[0], None, b) == pytest.approx(0.48, abs=1e-15)


def test_component_not_in_measurement(rng):
    model = bb_model(3)
    m = random_complete_tuple(3, [1, 1, 1], rng)
    with pytest.raises(ValueError):
        response_probability(model, basis_tuple(3)[0], random_unit_vector(3, rng), m)


# -- normalization checks ---------------------------------------------------

def test_outcome_normalization_bb(rng):
    model = bb_model(3)
    rep = check_outcome_normalization(model, random_unit_vector(3, rng), _measurements(3, 50, rng))
    assert rep.passed and rep.max_residual <= 1e-10


def test_outcome_normalization_leaky(rng):
    model = leaky_context_model(3)
    rep = check_outcome_normalization(model, random_unit_vector(3, rng), _measurements(3, 10, rng))
    assert not rep.passed
    assert rep.max_residual == pytest.approx(0.1, abs=1e-12)


def test_response_consistency_bb(rng):
    rep = check_response_consistency(bb_model(4), random_unit_vector(4, rng), _measurements(4, 50, rng))
    assert rep.passed


def test_response_consistency_deterministic(rng):
    model = deterministic_patch_model(basis_tuple(3))
    ms = [model.measurement_sampler(rng) for _ in range(30)]
    for x in range(3):
        assert check_response_consistency(model, x, ms).passed
        assert {model.response(e, x, 0) for m in ms for e in m} <= {0.0, 1.0}


def test_response_consistency_overcounting():
    model = overcounting_model(2)
    rep = check_response_consistency(model, np.array([1, 0], complex), [basis_tuple(2)])
    assert not rep.passed
    assert rep.details["max_normalization_defect"] == pytest.approx(0.1, abs=1e-12)


def test_response_consistency_skips_outside_omega(rng):
    model = overcounting_model(2)
    fam = OmegaFamily(lambda n, x, m: False, 1, name="empty")
    rep = check_response_consistency(model, None, [basis_tuple(2)], fam)
    assert rep.passed and rep.details["skipped_pairs"] == 1 and rep.samples == 0


# -- covering and closure ----------------------------------------------------

def test_covering_single_context(rng):
    fam = bb_model(3).omega_family()
    assert check_covering(fam, random_unit_vector(3, rng), _measurements(3, 30, rng)).details[
        "covered_fraction"] == 1.0


def test_covering_gap(rng):
    ms = _measurements(3, 40, rng)
    assert any(m.ranks != (1, 1, 1) for m in ms)
    rep = check_covering(gap_family((1, 1, 1)), None, ms)
    assert not rep.passed and rep.details["covered_fraction"] < 1


def test_covering_partition(rng):
    rep = check_covering(partition_family(), None, _measurements(4, 40, rng))
    assert rep.passed


def test_closure_single_context(rng):
    fam = bb_model(4).omega_family()
    assert check_coarse_grain_closure(fam, random_unit_vector(4, rng), _measurements(4, 20, rng, 3), 0).passed


def test_closure_violation(rng):
    ms = [random_complete_tuple(3, [1, 1, 1], rng) for _ in range(5)]
    rep = check_coarse_grain_closure(first_rank_one_family(), None, ms, 0)
    assert not rep.passed
    assert {"measurement": 0, "merged": [0, 1]} in rep.details["violations"]


def test_closure_by_construction(rng):
    rep = check_coarse_grain_closure(merge_closed_family(4), None, _measurements(5, 30, rng, 3), 0)
    assert rep.passed and rep.samples > 0


def test_omega_consistency(rng):
    model = bb_model(3)
    x = random_unit_vector(3, rng)
    ms = _measurements(3, 20, rng)
    assert check_omega_consistency(model, model.omega_family(), x, ms).passed
    assert not check_omega_consistency(model, gap_family((1, 1, 1)), x, ms).passed


def test_omega_consistency_deterministic_many_probes(rng):
    model = deterministic_patch_model(basis_tuple(3))
    fam = model.omega_family()
    inside = [model.measurement_sampler(rng) for _ in range(500)]
    outside = _measurements(3, 500, rng)
    rep = check_omega_consistency(model, fam, 0, inside + outside)
    assert rep.passed and rep.samples == 1000
    assert not any(fam.contains(0, 0, m) for m in outside)


def test_deterministic_membership_error(rng):
    model = deterministic_patch_model(basis_tuple(3))
    with pytest.raises(MembershipError):
        model.context_dist(0, random_complete_tuple(3, [1, 1, 1], rng), None)


# -- Born reproduction -------------------------------------------------------

def test_born_reproduction_bb(rng):
    model = bb_model(3)
    res = born_reproduction_check(model, random_unit_vector(3, rng), None,
                                  random_complete_tuple(3, [1, 1, 1], rng), None, 100_000, 5)
    assert res.max_abs_z <= 4
    assert res.report().passed


def test_born_reproduction_deterministic_certain_outcome():
    model = deterministic_patch_model(basis_tuple(3))
    res = born_reproduction_check(model, np.array([1, 0, 0], complex), None, basis_tuple(3), None, 20_000, 1)
    assert res.outcomes[0].frequency == 1.0
    assert res.outcomes[0].born == 1.0 and res.outcomes[0].z == 0.0


def test_born_reproduction_uniform_model_flagged():
    res = born_reproduction_check(uniform_model(3), np.array([1, 0, 0], complex), None, basis_tuple(3),
                                  None, 100_000, 2)
    assert abs(res.outcomes[0].z) > 10
    assert res.outcomes[0].frequency == pytest.approx(1 / 3, abs=0.01)


def test_born_reproduction_deterministic_superposition():
    model = deterministic_patch_model(basis_tuple(2))
    psi = np.array([1, 1], complex) / np.sqrt(2)
    res = born_reproduction_check(model, psi, None, basis_tuple(2), None, 100_000, 3)
    assert all(abs(o.z) <= 4 for o in res.outcomes)
    assert [o.born for o in res.outcomes] == pytest.approx([0.5, 0.5])


def test_born_reproduction_seeded():
    model = bb_model(3)
    psi = np.ones(3, complex) / np.sqrt(3)
    a = born_reproduction_check(model, psi, None, basis_tuple(3), None, 10_000, 9)
    b = born_reproduction_check(model, psi, None, basis_tuple(3), None, 10_000, 9)
    assert a == b


# -- affine response given the context ---------------------------------------------

def test_affine_given_context_bb(rng):
    d = 4
    model = bb_model(d)
    psi = random_unit_vector(d, rng)
    fit = check_affine_given_context(model, psi, 0, tuple_sampler(d, 3), 200, 1)
    assert fit.metadata["pass"]
    assert fit.rms_residual <= 1e-9
    assert np.linalg.norm(fit.eta - (np.outer(psi, psi.conj()) - np.eye(d) / d)) <= 1e-9
    for (slot, r), k in fit.constants.items():
        assert k == pytest.approx(r / d, abs=1e-9)


def test_affine_given_context_deterministic(rng):
    model = deterministic_patch_model(basis_tuple(4))
    for x in range(4):
        fit = check_affine_given_context(model, x, 0, model.component_sampler(x, 0, rng), 200, rng)
        assert fit.metadata["pass"]
        assert np.abs(fit.eta).max() <= 1e-8
        assert all(min(abs(k), abs(k - 1)) <= 1e-8 for k in fit.constants.values())
        assert sorted(round(k) for k in fit.constants.values()).count(1) == 1


def test_affine_given_context_nonaffine(rng):
    model = nonaffine_model(3)
    fit = check_affine_given_context(model, random_unit_vector(3, rng), 0, tuple_sampler(3, 3), 200, 1)
    assert not fit.metadata["pass"]
    assert fit.rms_residual > 100 * 1e-8


def test_affine_given_context_needs_three_outcomes(rng):
    model = bb_model(3)
    two_outcomes = lambda r: random_complete_tuple(3, [1, 2], r)  # noqa: E731
    with pytest.raises(RuntimeError):
        check_affine_given_context(model, random_unit_vector(3, rng), 0, two_outcomes, 5, 1)


# -- sequential causality -----------------------------------------------------

def test_scenario_requires_commuting(rng):
    with pytest.raises(ValueError):
        SequentialScenario([random_complete_tuple(3, [1, 2], rng)[0], random_complete_tuple(3, [1, 2], rng)[0]])


def test_causality_single_context(rng):
    model = single_context_sequential(deterministic_patch_model(basis_tuple(3)))
    scen = SequentialScenario([coarse_grain(basis_tuple(3), 0, 1)[0], basis_tuple(3)[2]])
    rep = sequential_causality_check(model, scen, 1, seed=1)
    assert rep.passed and rep.max_residual == 0.0


def test_causality_bb(rng):
    model = bb_model(4)
    scen = random_sequential_scenario(4, 3, rng)
    rep = sequential_causality_check(model, scen, random_unit_vector(4, rng), seed=2)
    assert rep.passed


def test_causality_violator(rng):
    model = causality_violator(3)
    scen = random_sequential_scenario(3, 2, rng)
    rep = sequential_causality_check(model, scen, random_unit_vector(3, rng), seed=3)
    assert not rep.passed and rep.details["max_context_deviation"] > 1e-3


def test_causality_missing_interface(rng):
    with pytest.raises(MissingInterfaceError):
        sequential_causality_check(leaky_context_model(3), random_sequential_scenario(3, 2, rng), None)
