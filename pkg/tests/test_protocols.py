import numpy as np
import pytest

from finitecontext.hilbert import basis_tuple, projector_from_vector, random_complete_tuple, random_unit_vector
from finitecontext.ontology import run_model_suite
from finitecontext.protocols import (
    MODEL_REGISTRY,
    EPRSample,
    bb_model,
    deterministic_patch_model,
    direction_grid,
    estimate_correlation,
    get_model,
    read_sweep_csv,
    simulate_sweep,
    singlet_born_correlation,
    toner_bacon_batch,
    toner_bacon_round,
    uniform_sphere,
    write_sweep_csv,
)


def test_bb_response_basis():
    model = bb_model(3)
    assert model.response(basis_tuple(3)[0], np.array([1, 0, 0], complex), 0) == 1.0


def test_bb_tuple_sums_to_one(rng):
    model = bb_model(5)
    psi = random_unit_vector(5, rng)
    m = random_complete_tuple(5, [2, 1, 2], rng)
    assert abs(sum(model.response(e, psi, 0) for e in m) - 1) < 1e-14


def test_bb_prepare_is_deterministic(rng):
    psi = random_unit_vector(3, rng)
    hist = bb_model(3).prepare(psi, None, rng, 7)
    assert len(hist) == 1 and hist[0][1] == 7 and np.array_equal(hist[0][0], psi)


def test_bb_rejects_unnormalized():
    with pytest.raises(ValueError):
        bb_model(2).prepare(np.array([1, 1], complex), None, np.random.default_rng(0), 1)


@pytest.mark.parametrize("name", ["bb", "deterministic"])
@pytest.mark.parametrize("d", [3, 4])
def test_compliant_models_pass_suite(name, d):
    reports = run_model_suite(get_model(name, d), seed=d, n_born=5, n_trials=20_000)
    assert all(r.passed for r in reports), [r.check for r in reports if not r.passed]


def test_bb_zero_defect():
    reports = run_model_suite(bb_model(4), seed=5, n_born=2, n_trials=10_000)
    for r in reports:
        if r.check in ("outcome_normalization", "response_consistency", "sequential_causality",
                       "affine_given_context"):
            assert r.max_residual <= 1e-12


def test_deterministic_born_weights(rng):
    model = deterministic_patch_model(basis_tuple(3))
    psi = np.array([1, 0, 0], complex)
    assert model.prepare(psi, None, rng, 50) == [(0, 50)]


def test_deterministic_certain_outcome():
    model = deterministic_patch_model(basis_tuple(3))
    b = basis_tuple(3)
    assert model.response(b[0], 0, 0) == 1.0
    assert model.response(b[1], 0, 0) == 0.0


def test_deterministic_rotated_basis(rng):
    m = random_complete_tuple(3, [1, 1, 1], rng)
    model = deterministic_patch_model(m)
    assert model.omega_family().contains(0, 0, m)
    assert not model.omega_family().contains(0, 0, basis_tuple(3))


def test_deterministic_rejects_rank_two_basis(rng):
    with pytest.raises(ValueError):
        deterministic_patch_model(random_complete_tuple(3, [2, 1], rng))


def test_registry_factories():
    for name in MODEL_REGISTRY:
        assert get_model(name, 3).dim == 3
    with pytest.raises(KeyError):
        get_model("nope", 3)


# -- EPR -----------------------------------------------------------------

def test_singlet_correlation_values(rng):
    a = uniform_sphere(rng, 1)[0]
    assert singlet_born_correlation(a, a) == pytest.approx(-1, abs=1e-12)
    b = np.cross(a, [0, 0, 1.0])
    b /= np.linalg.norm(b)
    assert singlet_born_correlation(a, b) == pytest.approx(0, abs=1e-12)
    for theta in np.linspace(0, np.pi, 7):
        b = np.array([np.sin(theta), 0, np.cos(theta)])
        assert singlet_born_correlation([0, 0, 1.0], b) == pytest.approx(-np.cos(theta), abs=1e-12)


def test_round_structure():
    s = toner_bacon_round([0, 0, 1.0], [1.0, 0, 0], [0, 0.6, 0.8], [0.6, 0, -0.8])
    assert isinstance(s, EPRSample)
    # a.l1 = 0.8 > 0 -> A = -1; a.l2 = -0.8 -> signs differ -> bit 1, c' = -1
    # B = sgn(b.(l1 - l2)) = sgn(-0.6) = -1
    assert (s.outcome_a, s.bit, s.outcome_b) == (-1, 1, -1)


def test_round_sign_tie_break():
    s = toner_bacon_round([0, 0, 1.0], [0, 0, 1.0], [1.0, 0, 0], [0, 1.0, 0])
    # a.l1 = a.l2 = 0 count as +1
    assert (s.outcome_a, s.bit) == (-1, 0)


def test_round_rejects_zero_vector():
    with pytest.raises(ValueError):
        toner_bacon_round([0, 0, 0], [0, 0, 1.0], [1.0, 0, 0], [0, 1.0, 0])


def test_sample_carries_one_bit():
    with pytest.raises(ValueError):
        EPRSample(1, -1, 2, (0, 0, 1), (0, 0, 1))


def test_batch_matches_rounds(rng):
    a, b = uniform_sphere(rng, 2)
    l1, l2 = uniform_sphere(rng, 50), uniform_sphere(rng, 50)
    oa, ob, bit = toner_bacon_batch(a, b, l1, l2)
    for i in range(50):
        s = toner_bacon_round(a, b, l1[i], l2[i])
        assert (s.outcome_a, s.outcome_b, s.bit) == (oa[i], ob[i], bit[i])


def test_marginal_unbiased():
    est = estimate_correlation("toner-bacon", [0, 0, 1.0], [1.0, 0, 0], 1_000_000, 1)
    assert abs(est.mean_a) <= 0.004
    assert abs(est.mean) <= 0.004


def test_equal_settings_anticorrelated():
    est = estimate_correlation("toner-bacon", [0, 0, 1.0], [0, 0, 1.0], 1_000_000, 2)
    assert abs(est.mean + 1) <= 0.004
    assert abs(est.mean - singlet_born_correlation([0, 0, 1.0], [0, 0, 1.0])) <= max(3 * est.stderr, 1e-12)


def test_sixty_degrees():
    b = [np.sin(np.pi / 3), 0, np.cos(np.pi / 3)]
    mean, se = estimate_correlation("toner-bacon", [0, 0, 1.0], b, 1_000_000, 3)
    assert abs(mean - singlet_born_correlation([0, 0, 1.0], b)) <= 3 * se
    assert se == pytest.approx(np.sqrt((1 - mean ** 2) / 1_000_000))


def test_estimate_seeded():
    a = estimate_correlation("toner-bacon", [0, 0, 1.0], [1.0, 0, 0], 10_000, 4)
    b = estimate_correlation("toner-bacon", [0, 0, 1.0], [1.0, 0, 0], 10_000, 4)
    assert a == b
    c = estimate_correlation("toner-bacon", [0, 0, 1.0], [1.0, 0, 0], 10_000, 4, chunk=999)
    assert a == c


def test_sweep_csv_round_trip(tmp_path):
    rows = simulate_sweep(direction_grid(3, 1), 2000, 10)
    p = tmp_path / "s.csv"
    write_sweep_csv(rows, p)
    text = p.read_text().splitlines()
    assert text[0] == "# schema_version: 1"
    assert text[1] == "a_x,a_y,a_z,b_x,b_y,b_z,N,mean,stderr,seed"
    back = read_sweep_csv(p)
    assert [r["mean"] for r in back] == [r["mean"] for r in rows]
    assert [r["seed"] for r in back] == [10, 11, 12]


def test_projector_of_spin_direction():
    # spin projectors from the singlet oracle are rank-1
    from finitecontext.protocols import spin_projectors

    p = spin_projectors([0, 0, 1.0])
    assert np.allclose(p[1], projector_from_vector([1, 0]).matrix)
