import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from heatnet.errors import DomainError, SingularityError
from heatnet.kernels import (
    KernelConsts,
    TemporalMap,
    g_of_tau,
    heat_kernel,
    temporal_domain,
    transformed_inner_integrand,
)
from heatnet.problem import constant_field, make_benchmark, zero_field


def test_kernel_prefactor_identities():
    assert heat_kernel(1 / (4 * math.pi), [0.3], 0.0, [0.3], 1.0) == pytest.approx(1.0, rel=1e-15)
    assert heat_kernel(1.0, [0.0, 0.0], 0.0, [0.0, 0.0], 1.0) == pytest.approx(1 / (4 * math.pi), rel=1e-15)


def test_kernel_vanishes_for_future_sources():
    assert heat_kernel(0.5, [0.0], 0.7, [0.1], 1.0) == 0.0
    assert heat_kernel(0.5, [0.0], 0.5, [0.1], 1.0) == 0.0


def test_kernel_singularity_is_signalled():
    with pytest.raises(SingularityError):
        heat_kernel(0.5, [0.2], 0.5, [0.2], 1.0)


@pytest.mark.parametrize("D,lag", [(1.0, 0.3), (0.2, 1.0), (2.5, 0.01)])
def test_normalisation_1d(D, lag):
    sig = math.sqrt(2 * D * lag)
    val, _ = integrate.quad(lambda z: heat_kernel(lag, [0.4], 0.0, [z], D), 0.4 - 12 * sig, 0.4 + 12 * sig, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_normalisation_2d_gauss_legendre():
    D, lag = 0.7, 0.4
    x = np.array([0.1, -0.2])
    sig = math.sqrt(2 * D * lag)
    nodes, weights = np.polynomial.legendre.leggauss(120)
    half = 10 * sig
    zs = nodes * half
    Z1, Z2 = np.meshgrid(x[0] + zs, x[1] + zs, indexing="ij")
    z = np.stack([Z1, Z2], axis=-1)
    vals = heat_kernel(lag, x, 0.0, z, D)
    total = half * half * np.einsum("i,j,ij->", weights, weights, vals)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_normalisation_3d_monte_carlo():
    D, lag = 1.0, 0.5
    x = np.zeros(3)
    g = np.random.default_rng(0)
    half = 6.0
    z = half * (2 * g.random((400_000, 3)) - 1)
    vals = (2 * half) ** 3 * heat_kernel(lag, x, 0.0, z, D)
    mean, se = vals.mean(), vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(mean - 1.0) < 3 * se


def test_kernel_solves_heat_equation():
    g = np.random.default_rng(1)
    for d in (1, 2, 3):
        D = 0.8
        for _ in range(20):
            lag = 0.1 + 0.9 * g.random()
            x, z = g.normal(size=d), g.normal(size=d)
            f = lambda tt, xx: heat_kernel(tt, xx, 0.0, z, D)
            h = 1e-4
            dt = (f(lag + h, x) - f(lag - h, x)) / (2 * h)
            lap = 0.0
            hx = 1e-3
            for i in range(d):
                e = np.zeros(d)
                e[i] = hx
                lap += (f(lag, x + e) - 2 * f(lag, x) + f(lag, x - e)) / hx**2
            scale = abs(dt) + abs(D * lap)
            assert abs(dt - D * lap) <= 1e-4 * scale


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 3.0))
def test_kernel_symmetry(lag, a, b, D):
    assert heat_kernel(lag, [a, b], 0.0, [b, a], D) == heat_kernel(lag, [b, a], 0.0, [a, b], D)


def test_temporal_domains():
    assert temporal_domain(TemporalMap(1, 1.0), 0.25) == (0.0, 0.5)
    assert TemporalMap(2, 1.0, trunc_upper=20.0).domain(1.0) == (0.0, 20.0)
    lo, hi = TemporalMap(4, 1.0, trunc_upper=50.0).domain(0.5)
    assert lo == pytest.approx(2.0) and hi == 50.0
    with pytest.raises(DomainError):
        TemporalMap(1, 1.0).domain(0.0)


def test_g_values():
    assert g_of_tau(TemporalMap(1, 1.0), 0.3) == pytest.approx(0.09)
    assert g_of_tau(TemporalMap(2, 1.0), 0.0) == 1.0
    assert g_of_tau(TemporalMap(4, 1.0), 4.0) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        TemporalMap(1, 1.0).g(-0.1)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 20])
def test_g_maps_domain_onto_lag_interval(d):
    T = 0.7
    tm = TemporalMap(d, T)
    for t in (0.01, 0.3, T):
        lo, hi = tm.domain(t)
        taus = np.linspace(lo, hi, 2001)
        lags = tm.g(taus)
        # lower endpoint maps to t, and all lags lie in (0, t]
        assert lags.max() == pytest.approx(t, rel=1e-12)
        assert np.all(lags > 0) or d == 1
        assert np.all(lags <= t * (1 + 1e-12))
        steps = np.diff(lags)
        assert np.all(steps > 0) if d == 1 else np.all(steps < 0)
    if d >= 2:
        assert tm.g(tm.trunc_upper) == pytest.approx(1e-8 * T, rel=1e-9)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_activation_is_monotone(d):
    tm = TemporalMap(d, 1.0)
    taus = np.linspace(*tm.domain(1.0), 500)[1:-1]
    for t_small, t_big in ((0.2, 0.6), (0.5, 0.9)):
        small, big = tm.active(t_small, taus), tm.active(t_big, taus)
        assert np.all(big[small])


def test_kernel_constants():
    assert KernelConsts(1, 1.0).kappa == pytest.approx(2 / math.sqrt(4 * math.pi))
    assert KernelConsts(2, 1.0).c_d == 1.0
    assert KernelConsts(5, 1.0).c_d == pytest.approx(1.5)
    assert KernelConsts(5, 2.0).kappa == pytest.approx(1 / (1.5 * (8 * math.pi) ** 2.5))


def test_transformed_integrand_examples():
    tm = TemporalMap(1, 1.0)
    c = KernelConsts(1, 1.0)
    one = constant_field(1.0, 1)
    for tau in (0.0, 0.2, 0.7):
        assert transformed_inner_integrand(c, tm, 0.5, [0.3], tau, [0.3], one) == pytest.approx(0.5641895835, rel=1e-9)
    assert transformed_inner_integrand(c, tm, 0.5, [0.3], 0.4, [0.9], zero_field(1)) == 0.0
    with pytest.raises(DomainError):
        transformed_inner_integrand(c, tm, 0.25, [0.0], 0.6, [0.0], one)


def test_transformed_integrand_is_finite_everywhere():
    for d in (2, 3, 6):
        tm, c = TemporalMap(d, 1.0), KernelConsts(d, 1.0)
        p = make_benchmark("ex2b", d=d)
        lo, hi = tm.domain(0.8)
        taus = np.linspace(lo, hi, 50)
        z = np.zeros(d)
        vals = [transformed_inner_integrand(c, tm, 0.8, z, tau, z, p.forcing) for tau in taus]
        assert np.all(np.isfinite(vals))


def test_change_of_variables_identity_1d():
    """Duhamel integral over a box: transformed (tau, z) form vs plain (s, z) form."""
    p = make_benchmark("ex1", D=0.6)
    D, A, t, x = p.diffusion, 2.0, 0.7, 0.35
    tm, c = TemporalMap(1, p.horizon), KernelConsts(1, D)
    F = lambda s, z: float(p.forcing.value(s, np.array([z])))

    def z_window(width):
        return max(-A, x - 12 * width), min(A, x + 12 * width)

    def transformed_inner(tau):
        if tau == 0.0:
            return 0.0
        a, b = z_window(math.sqrt(2 * D) * tau)
        f = lambda z: transformed_inner_integrand(c, tm, t, np.array([x]), tau, np.array([z]), p.forcing)
        return integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]

    eps = 1e-9

    def plain_inner(s):
        lag = t - s
        a, b = z_window(math.sqrt(2 * D * lag))
        f = lambda z: heat_kernel(t, np.array([x]), s, np.array([z]), D) * F(s, z)
        return integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]

    lhs = integrate.quad(transformed_inner, 0.0, math.sqrt(t), epsabs=1e-11, epsrel=1e-11, limit=200)[0]
    rhs = integrate.quad(plain_inner, 0.0, t - eps, epsabs=1e-11, epsrel=1e-11, limit=200)[0]
    # the omitted sliver [t - eps, t] contributes at most eps * max|F|
    tail_bound = eps * 3.0
    assert abs(lhs - rhs) <= 1e-6 + tail_bound
