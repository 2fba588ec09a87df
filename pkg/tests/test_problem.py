import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatnet.errors import DimensionError, DomainError
from fd_oracle import fd_dt, fd_grad, fd_lap
from heatnet.problem import (
    BenchmarkParams,
    ProblemSpec,
    ScalarFieldBundle,
    constant_field,
    eval_bundle,
    make_benchmark,
    zero_field,
)

CATALOG = [("ex1", 1), ("ex2a", 2), ("ex2a", 5), ("ex2b", 3), ("ex2b", 10), ("ex3", 2), ("ex3", 6)]


def probes(d, n=100, seed=0, T=1.0, A=math.pi):
    g = np.random.default_rng(seed)
    return 0.05 * T + 0.9 * T * g.random(n), A * (2 * g.random((n, d)) - 1)


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


# -- closed forms ----------------------------------------------------------------


def test_ex1_initial_identity():
    p = make_benchmark("ex1")
    assert p.exact(0.0, np.array([math.pi / 2])) == pytest.approx(1.0, abs=1e-15)


def test_ex1_value_at_half():
    p = make_benchmark("ex1")
    expected = (0.5 + math.exp(-0.5)) * math.sin(1.0)
    assert p.exact(0.5, np.array([1.0])) == pytest.approx(expected, rel=1e-14)


def test_ex2a_closed_form_against_mpmath():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 30
    p = make_benchmark("ex2a", d=2)
    ref = mpmath.exp(-2 * mpmath.pi**2 * mpmath.mpf("0.05")) * mpmath.sin(mpmath.pi / 2) ** 2
    assert p.exact(0.05, np.array([0.5, 0.5])) == pytest.approx(float(ref), rel=1e-14)
    # the quoted six digits are a truncation of 0.3727078...
    assert float(ref) == pytest.approx(0.372707, abs=1e-6)


def test_ex2b_matches_displayed_solution():
    p = make_benchmark("ex2b", d=3)
    x = np.array([0.3, -1.1, 2.0])
    t = 0.4
    expected = (t + math.exp(-t)) * sum(math.sin(2 * v) for v in x) / math.sqrt(3)
    assert p.exact(t, x) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("name,d", CATALOG)
def test_exact_matches_u0_at_time_zero(name, d):
    p = make_benchmark(name, d=d)
    _, x = probes(d, 50)
    np.testing.assert_allclose(p.exact(0.0, x), p.u0.value(0.0, x), rtol=0, atol=1e-12)


@pytest.mark.parametrize("name,d", CATALOG)
@pytest.mark.parametrize("D", [1.0, 0.3])
def test_exact_solves_pde(name, d, D):
    """Residual of the closed form via finite differences of ``exact`` only."""
    p = make_benchmark(name, d=d, D=D)
    t, x = probes(d, 100, seed=1)
    F = p.forcing.value(t, x)
    resid = fd_dt(p.exact, t, x) - D * fd_lap(p.exact, t, x) - F
    assert np.all(np.abs(resid) <= 1e-6 * (1 + np.abs(F)))


@pytest.mark.parametrize("name,d", CATALOG)
def test_bundle_derivatives_match_finite_differences(name, d):
    p = make_benchmark(name, d=d)
    t, x = probes(d, 100, seed=2)
    for b in (p.u0, p.forcing):
        if b.is_zero:
            continue
        if b is p.u0:
            assert np.all(eval_bundle(b, "dt", t, x) == 0)
        else:
            assert rel(eval_bundle(b, "dt", t, x), fd_dt(b.value, t, x)) < 1e-5
        assert rel(eval_bundle(b, "grad", t, x), fd_grad(b.value, t, x)) < 1e-5
        assert rel(eval_bundle(b, "lap", t, x), fd_lap(b.value, t, x)) < 1e-5


@pytest.mark.parametrize("d", [1, 3, 10])
def test_ex3_forcing_is_product_rule_expansion(d):
    p = make_benchmark("ex3", d=d)
    t, x = probes(d, 100, seed=3)
    expected = fd_dt(p.exact, t, x) - p.diffusion * fd_lap(p.exact, t, x)
    assert rel(p.forcing.value(t, x), expected) < 1e-5


def test_ex3_reduces_to_ex2b_without_time_profile():
    a = make_benchmark(BenchmarkParams("ex3", alpha_q=0.0), d=4)
    b = make_benchmark("ex2b", d=4)
    t, x = probes(4, 20)
    np.testing.assert_allclose(a.exact(t, x), b.exact(t, x), rtol=1e-14)
    np.testing.assert_allclose(a.forcing.value(t, x), b.forcing.value(t, x), rtol=1e-13, atol=1e-14)


# -- bundles -----------------------------------------------------------------------


def test_ex1_u0_value_and_gradient_at_origin():
    p = make_benchmark("ex1")
    x0 = np.array([0.0])
    assert eval_bundle(p.u0, "value", 0.0, x0) == 0.0
    assert eval_bundle(p.u0, "grad", 0.0, x0) == pytest.approx([1.0])
    bare = ScalarFieldBundle(p.u0.value)
    assert eval_bundle(bare, "grad", 0.0, x0) == pytest.approx([1.0], abs=1e-9)


def test_constant_field_has_zero_laplacian():
    c = constant_field(2.5, dim=3)
    x = np.ones((4, 3))
    assert np.all(eval_bundle(c, "lap", 0.3, x) == 0)
    assert np.all(eval_bundle(ScalarFieldBundle(c.value), "lap", 0.3, x) == 0)


def test_fallback_finite_differences_are_accurate():
    p = make_benchmark("ex3", d=3)
    bare = ScalarFieldBundle(p.forcing.value)
    t, x = probes(3, 30, seed=4)
    for which in ("dt", "grad", "lap"):
        assert rel(eval_bundle(bare, which, t, x), eval_bundle(p.forcing, which, t, x)) < 1e-5


def test_fd_step_override_is_used():
    f = ScalarFieldBundle(lambda t, x: np.sum(x**3, axis=-1), fd_step=1e-2)
    # central difference of x^3 carries the h^2 term exactly: 3x^2 + h^2
    g = eval_bundle(f, "grad", 0.0, np.array([0.5]))
    assert g[0] == pytest.approx(0.75 + 1e-4, rel=1e-9)


def test_dimension_mismatch_raises():
    p = make_benchmark("ex2a", d=2)
    with pytest.raises(DimensionError):
        eval_bundle(p.u0, "value", 0.0, np.zeros(3))
    with pytest.raises(DimensionError):
        p.check_points(np.zeros(3))


def test_zero_field_flags():
    z = zero_field(2)
    assert z.is_zero
    assert eval_bundle(z, "grad", 0.1, np.zeros((5, 2))).shape == (5, 2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0, 1))
def test_value_is_deterministic(xv, tv):
    p = make_benchmark("ex3", d=2)
    x = np.array([xv, -xv / 2])
    assert p.forcing.value(tv, x) == p.forcing.value(tv, x)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5.0))
def test_scaled_bundle_scales_every_member(lam):
    p = make_benchmark("ex2b", d=2)
    s = p.forcing.scaled(lam)
    t, x = probes(2, 5)
    for which in ("value", "dt", "grad", "lap"):
        np.testing.assert_allclose(eval_bundle(s, which, t, x), lam * eval_bundle(p.forcing, which, t, x), rtol=1e-15)


# -- validation --------------------------------------------------------------------


def test_unknown_benchmark():
    with pytest.raises(ValueError):
        make_benchmark("ex9")


def test_ex1_requires_one_dimension():
    with pytest.raises(DimensionError):
        make_benchmark("ex1", d=2)


def test_zero_coefficients_rejected():
    with pytest.raises(ValueError):
        make_benchmark(BenchmarkParams("ex2b", c=[0.0, 0.0]), d=2)


def test_problem_invariants():
    p = make_benchmark("ex1")
    with pytest.raises(DomainError):
        ProblemSpec(1, 1.0, 1.0, 1.0, 2.0, p.u0, p.forcing)
    with pytest.raises(DomainError):
        ProblemSpec(1, -1.0, 1.0, 1.0, 1.0, p.u0, p.forcing)
    with pytest.raises(DomainError):
        ProblemSpec(1, 1.0, 0.0, 1.0, 1.0, p.u0, p.forcing)


def test_fingerprint_tracks_parameters():
    a = make_benchmark("ex2b", d=3)
    assert a.fingerprint == make_benchmark("ex2b", d=3).fingerprint
    assert a.fingerprint != make_benchmark("ex2b", d=3, D=2.0).fingerprint
    assert len(a.fingerprint) == 16
