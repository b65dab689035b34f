import numpy as np
import pytest

from shiftbeam.problem import (ProblemSpec, constant, derive_constants,
                               make_example1, make_example2, validate)


def test_example1_data():
    spec = make_example1(1e-4)
    assert spec.m == 1
    assert spec.b(np.array([0.3]))[0] == 1.0
    assert spec.f(np.array([1.7]))[0] == 5.0
    assert spec.history(np.array([-0.5]))[0] == 0.0
    assert spec.beta == 1.0
    assert spec.delta == 1.5


def test_example2_matches_example1_except_m():
    s1, s2 = make_example1(1e-4), make_example2(1e-4)
    assert s2.m == 2
    x = np.linspace(0, 2, 11)
    for f1, f2 in ((s1.b, s2.b), (s1.c, s2.c), (s1.d, s2.d), (s1.f, s2.f)):
        assert np.array_equal(f1(x), f2(x))


@pytest.mark.parametrize("eps", [1.0, 0.1, 1e-3, 1e-6])
def test_examples_validate_for_all_eps(eps):
    validate(make_example1(eps))
    validate(make_example2(eps))


def test_derive_constants_constant_coefficients():
    beta, delta = derive_constants(constant(1.0), constant(2.0), constant(1.0),
                                   b_prime=constant(0.0))
    assert beta == pytest.approx(1.0, abs=1e-12)
    assert delta == pytest.approx(1.5, abs=1e-12)


def test_derive_constants_no_corrections():
    beta, delta = derive_constants(constant(4.0), constant(3.0), constant(0.0),
                                   b_prime=constant(0.0))
    assert beta == pytest.approx(2.0, abs=1e-12)
    assert delta == pytest.approx(3.0, abs=1e-12)


def test_derive_constants_variable_b_against_dense_sampling():
    b = lambda x: 1.0 + x / 4.0
    bp = lambda x: np.full_like(np.asarray(x, dtype=float), 0.25)
    beta, delta = derive_constants(b, constant(5.0), constant(1.0), b_prime=bp)
    # brute-force minimization on a much finer grid
    x = np.linspace(0.0, 2.0, 1_000_001)
    beta_ref = np.sqrt(b(x).min())
    delta_ref = (5.0 - 0.5 - 0.25 ** 2 / (2 * beta_ref ** 2))
    assert beta == pytest.approx(beta_ref, rel=1e-9)
    assert delta == pytest.approx(delta_ref, rel=1e-9)


def test_derive_constants_monotone_in_c():
    b, d = constant(1.0), constant(1.0)
    _, delta1 = derive_constants(b, constant(2.0), d, b_prime=constant(0.0))
    _, delta2 = derive_constants(b, constant(2.5), d, b_prime=constant(0.0))
    assert delta2 >= delta1


def test_derive_constants_rejects_nonpositive_margin():
    with pytest.raises(ValueError):
        derive_constants(constant(1.0), constant(0.4), constant(1.0),
                         b_prime=constant(0.0))


def test_history_domain_enforced():
    spec = make_example1(1e-2)
    with pytest.raises(ValueError):
        spec.history(0.5)
    with pytest.raises(ValueError):
        spec.history(-1.5)


def test_spec_immutable():
    spec = make_example1(1e-2)
    with pytest.raises(Exception):
        spec.epsilon = 1.0
