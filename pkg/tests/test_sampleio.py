import numpy as np
import pytest

from finitecontext.dsl import parse_measure_spec
from finitecontext.gleason import fit_affine
from finitecontext.hilbert import random_traceless_hermitian
from finitecontext.measures import AffineMeasure
from finitecontext.sampleio import SampleFileError, format_samples, gen_data, parse_samples, read_samples, write_samples


def test_empty_file_is_valid(tmp_path):
    mu = parse_measure_spec("measure born dim 3 rho = identity / 3")
    p = tmp_path / "e.txt"
    write_samples(p, gen_data(mu, [1], 0, 0), 3)
    assert read_samples(p) == (3, [])
    assert "count 0" in p.read_text()


def test_round_trip_exact(tmp_path, rng):
    a = AffineMeasure(random_traceless_hermitian(3, rng), {1: 0.2, 2: 0.5})
    samples = gen_data(a.as_measure(), [1, 2], 25, rng)
    p = tmp_path / "s.txt"
    write_samples(p, samples, 3)
    d, back = read_samples(p)
    assert d == 3 and len(back) == 25
    for (e, v), (e2, v2) in zip(samples, back):
        assert v == v2 and np.array_equal(e.matrix, e2.matrix) and e.rank == e2.rank


def test_gen_then_fit_recovers_eta(tmp_path, rng):
    a = AffineMeasure(random_traceless_hermitian(4, rng), {1: 0.1, 2: 0.3})
    p = tmp_path / "s.txt"
    write_samples(p, gen_data(a.as_measure(), [1, 2], 80, 7), 4)
    fit = fit_affine(read_samples(p)[1])
    assert np.linalg.norm(fit.eta - a.eta) <= 1e-8


def test_seeded_files_identical(rng):
    mu = parse_measure_spec("measure born dim 3 rho = diag(0.5, 0.3, 0.2)")
    assert format_samples(gen_data(mu, [1, 2], 10, 3), 3) == format_samples(gen_data(mu, [1, 2], 10, 3), 3)


def test_errors_carry_path(tmp_path):
    with pytest.raises(SampleFileError) as exc:
        read_samples(tmp_path / "missing.txt")
    assert "missing.txt" in str(exc.value)
    with pytest.raises(SampleFileError):
        parse_samples("schema_version 1\ndim 2\ncount 1\n", "x")
    with pytest.raises(SampleFileError):
        parse_samples("schema_version 1\ndim 1\ncount 1\n1 0.5 0.5 0\n", "x")
    with pytest.raises(SampleFileError):
        parse_samples("schema_version 2\ndim 1\ncount 0\n", "x")


def test_gen_data_rank_range():
    mu = parse_measure_spec("measure born dim 3 rho = identity / 3")
    with pytest.raises(ValueError):
        gen_data(mu, [3], 1, 0)
