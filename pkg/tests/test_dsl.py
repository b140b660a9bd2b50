import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finitecontext.dsl import (
    Assign,
    BinOp,
    Call,
    ListLit,
    Name,
    Neg,
    Num,
    Spec,
    load_measure,
    parse,
    parse_measure_spec,
    to_text,
    tokenize,
)
from finitecontext.errors import SpecDimensionError, SpecSyntaxError, UnknownIdentifierError
from finitecontext.hilbert import basis_tuple, random_complete_tuple


def test_born_example():
    mu = parse_measure_spec("measure born dim 3 rho = diag(0.5,0.3,0.2)")
    assert mu.kind == "born"
    assert np.allclose(mu.params["rho"], np.diag([0.5, 0.3, 0.2]))
    assert mu(basis_tuple(3)[1]) == pytest.approx(0.3)


def test_affine_constant_example():
    mu = parse_measure_spec("measure affine dim 3 eta = zero K(1) = 0.25")
    for e in random_complete_tuple(3, [1, 1, 1], 4):
        assert mu(e) == pytest.approx(0.25, abs=1e-15)


def test_malformed_reports_position():
    with pytest.raises(SpecSyntaxError) as exc:
        parse_measure_spec("measure affine dim")
    assert (exc.value.line, exc.value.column) == (1, 19)
    assert "line 1, column 19" in str(exc.value)


def test_multiline_position():
    with pytest.raises(SpecSyntaxError) as exc:
        parse("measure born dim 2\nrho = [[1, 0],\n  [0, 0]] )")
    assert exc.value.line == 3


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as exc:
        parse_measure_spec("measure born dim 2\nrho = foo")
    assert exc.value.line == 2 and exc.value.column == 7
    with pytest.raises(UnknownIdentifierError):
        parse_measure_spec("measure born dim 2 sigma = identity / 2")


def test_dimension_mismatch():
    with pytest.raises(SpecDimensionError):
        parse_measure_spec("measure born dim 3 rho = diag(0.5, 0.5)")
    with pytest.raises(SpecDimensionError):
        parse_measure_spec("measure affine dim 2 eta = zero K(3) = 1")


def test_non_hermitian_rejected():
    with pytest.raises(SpecDimensionError):
        parse_measure_spec("measure born dim 2 rho = [[0.5, 1i], [1i, 0.5]]")


def test_matrix_and_complex_literals():
    text = """
    # a qubit state with coherence
    measure born dim 2
    rho = [[0.5, 0.25-0.25i], [0.25+0.25i, 0.5]]
    """
    mu = parse_measure_spec(text)
    assert mu.params["rho"][0, 1] == pytest.approx(0.25 - 0.25j)


def test_arithmetic_and_proj():
    mu = parse_measure_spec("measure born dim 3 rho = 0.5 * proj(1, 0, 0) + identity / 6 - -0.0 * zero")
    assert mu(basis_tuple(3)[0]) == pytest.approx(0.5 + 1 / 6)


def test_poly_and_quadratic():
    q = parse_measure_spec("measure quadratic dim 2 rho = diag(1, 0)")
    p = parse_measure_spec("measure poly dim 2 rho = diag(1, 0) coeffs = [0.1, 0, 2]")
    e = basis_tuple(2)[0]
    assert q(e) == pytest.approx(1.0)
    assert p(e) == pytest.approx(2.1)


def test_missing_field():
    with pytest.raises(SpecSyntaxError):
        parse_measure_spec("measure born dim 2")


def test_tokenize_imag():
    toks = tokenize("2.5i + 3")
    assert [(t.kind, t.text) for t in toks[:3]] == [("imag", "2.5"), ("op", "+"), ("number", "3")]


def test_load_measure(tmp_path):
    p = tmp_path / "m.spec"
    p.write_text("measure born dim 2\nrho = identity / 2\n")
    assert load_measure(p)(basis_tuple(2)[0]) == pytest.approx(0.5)


def test_round_trip_example():
    s = parse("measure affine dim 3 eta = diag(1, -2, 1) * 0.1 K(1) = 1/3 K(2) = -(1 + 2i)")
    assert parse(to_text(s)) == s


# -- property: parse(print(ast)) == ast -----------------------------------

names = st.from_regex(r"[a-z_][a-z0-9_]{0,6}", fullmatch=True)
nums = st.builds(Num, st.floats(0, 1e6, allow_nan=False, allow_infinity=False), st.booleans())


def exprs():
    return st.recursive(
        nums | st.builds(Name, names),
        lambda inner: st.one_of(
            st.builds(Neg, inner),
            st.builds(BinOp, st.sampled_from("+-*/"), inner, inner),
            st.builds(Call, names, st.lists(inner, max_size=3).map(tuple)),
            st.builds(ListLit, st.lists(inner, min_size=1, max_size=3).map(tuple)),
        ),
        max_leaves=12,
    )


specs = st.builds(
    Spec,
    st.sampled_from(["born", "affine", "quadratic", "poly"]),
    st.integers(1, 16),
    st.lists(st.builds(Assign, names, st.none() | st.integers(0, 16), exprs()), max_size=4).map(tuple),
)


@settings(max_examples=200, deadline=None)
@given(specs)
def test_parse_print_round_trip(spec):
    assert parse(to_text(spec)) == spec
