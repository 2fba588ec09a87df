"""Pointwise Monte Carlo estimators of the mild solution u = I + J.

``I`` is the heat-semigroup term acting on the initial condition and ``J``
the Duhamel integral of the forcing. Two families are provided:

* transformed estimators sample uniformly on the box [-A, A]^d (and on
  the transformed time interval D(t) for ``J``);
* importance-sampling estimators draw directly from the Gaussian kernel.

Samples are processed in chunks and folded into :class:`RunningStats`,
whose (count, mean, M2) triples merge associatively.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError
from .kernels import KernelConsts, TemporalMap
from .problem import ProblemSpec
from .sampling import Rng, as_generator

CHUNK = 1 << 16


class TruncationWarning(RuntimeWarning):
    """Sampling box too small for the truncation bias to be negligible."""


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int

    def __add__(self, other: "McEstimate") -> "McEstimate":
        return McEstimate(
            self.mean + other.mean,
            math.hypot(self.std_error, other.std_error),
            self.n_samples + other.n_samples,
        )


class RunningStats:
    """Single-pass mean/variance (Welford, batched with Chan's merge)."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return self
        other = RunningStats()
        other.n = values.size
        other.mean = float(values.mean())
        other.m2 = float(np.sum((values - other.mean) ** 2))
        return self.merge(other)

    def merge(self, other: "RunningStats"):
        n = self.n + other.n
        if n == 0:
            return self
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta**2 * self.n * other.n / n
        self.n = n
        return self

    def estimate(self, scale: float = 1.0) -> McEstimate:
        var = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        return McEstimate(scale * self.mean, abs(scale) * math.sqrt(var / self.n), self.n)


def _check_samples(M):
    if int(M) < 1:
        raise DomainError("number of samples must be positive")


def _point(p: ProblemSpec, x):
    x = p.check_points(np.atleast_1d(np.asarray(x, dtype=float)))
    if x.ndim != 1:
        raise DomainError("estimators take a single spatial point")
    return x


def _chunks(M):
    done = 0
    while done < M:
        n = min(CHUNK, M - done)
        yield n
        done += n


def _warn_box(p: ProblemSpec, x, which):
    A = p.box_half_width
    need = float(np.max(np.abs(x))) + 6 * math.sqrt(2 * p.diffusion * p.horizon)
    if which == "I":
        need = math.sqrt(18.0)
    if A < need:
        warnings.warn(
            f"box half-width {A:.3g} < {need:.3g}: truncation bias of the transformed "
            f"{which} estimator may be visible",
            TruncationWarning,
            stacklevel=3,
        )


def estimate_I_transformed(p: ProblemSpec, t, x, M0: int, rng: Rng) -> McEstimate:
    """Uniform-box estimator of I(t, x) in the scaled variable y = (z - x) / sqrt(4 D t)."""
    _check_samples(M0)
    if t < 0:
        raise DomainError("t must be non-negative")
    x = _point(p, x)
    _warn_box(p, x, "I")
    gen = as_generator(rng)
    d, A = p.d, p.box_half_width
    scale = math.sqrt(4 * p.diffusion * t)
    pref = (2 * A) ** d * math.pi ** (-d / 2)
    stats = RunningStats()
    for n in _chunks(int(M0)):
        y = A * (2 * gen.random((n, d)) - 1)
        vals = np.exp(-np.sum(y * y, axis=1)) * p.u0.value(0.0, x + scale * y)
        stats.update(vals)
    return stats.estimate(pref)


def estimate_J_transformed(p: ProblemSpec, t, x, M1: int, rng: Rng, tm: TemporalMap | None = None) -> McEstimate:
    """Uniform estimator of J(t, x) over D(t) x [-A, A]^d (singularity removed)."""
    _check_samples(M1)
    if not t > 0:
        raise DomainError("J estimator requires t > 0")
    x = _point(p, x)
    if p.forcing.is_zero:
        return McEstimate(0.0, 0.0, int(M1))
    _warn_box(p, x, "J")
    gen = as_generator(rng)
    d, A, D = p.d, p.box_half_width, p.diffusion
    tm = tm or TemporalMap(d, p.horizon)
    consts = KernelConsts(d, D)
    lo, hi = tm.domain(t)
    pref = (hi - lo) * (2 * A) ** d * consts.kappa
    stats = RunningStats()
    for n in _chunks(int(M1)):
        tau = lo + (hi - lo) * gen.random(n)
        z = A * (2 * gen.random((n, d)) - 1)
        lag = np.asarray(tm.g(tau))
        r2 = np.sum((x - z) ** 2, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            expo = np.where(lag > 0, np.exp(-r2 / (4 * D * np.where(lag > 0, lag, 1.0))), 0.0)
        stats.update(expo * p.forcing.value(t - lag, z))
    return stats.estimate(pref)


def estimate_I_is(p: ProblemSpec, t, x, M0: int, rng: Rng) -> McEstimate:
    """(1/M0) sum u0(x + sqrt(2 D t) eta_j), eta_j ~ N(0, I)."""
    _check_samples(M0)
    if t < 0:
        raise DomainError("t must be non-negative")
    x = _point(p, x)
    gen = as_generator(rng)
    sigma = math.sqrt(2 * p.diffusion * t)
    stats = RunningStats()
    for n in _chunks(int(M0)):
        eta = gen.standard_normal((n, p.d))
        stats.update(p.u0.value(0.0, x + sigma * eta))
    return stats.estimate()


def estimate_J_is(p: ProblemSpec, t, x, M1: int, rng: Rng) -> McEstimate:
    """(t/M1) sum F(r_j t, x + sqrt(2 D t (1 - r_j)) xi_j)."""
    _check_samples(M1)
    if not t > 0:
        raise DomainError("J estimator requires t > 0")
    x = _point(p, x)
    if p.forcing.is_zero:
        return McEstimate(0.0, 0.0, int(M1))
    gen = as_generator(rng)
    stats = RunningStats()
    for n in _chunks(int(M1)):
        r = gen.random(n)
        xi = gen.standard_normal((n, p.d))
        rho = np.sqrt(2 * p.diffusion * t * (1 - r))
        stats.update(p.forcing.value(r * t, x + rho[:, None] * xi))
    return stats.estimate(t)


def estimate_solution(p: ProblemSpec, t, x, M0: int, M1: int, mode: str = "importance", rng: Rng = 0) -> McEstimate:
    """I + J estimate with standard errors combined in quadrature.

    At t = 0 the forcing term vanishes and only the initial-condition
    estimator is evaluated.
    """
    gen = as_generator(rng)
    if mode == "importance":
        est_i, est_j = estimate_I_is, estimate_J_is
    elif mode == "transformed":
        est_i, est_j = estimate_I_transformed, estimate_J_transformed
    else:
        raise ValueError(f"unknown mode {mode!r}")
    total = est_i(p, t, x, M0, gen)
    if t > 0:
        total = total + est_j(p, t, x, M1, gen)
    return total


# -- deterministic reference for d = 1 ---------------------------------------

_GAUSS_WINDOW = 10.0  # exp(-100) is below double precision relative to 1


def _quad(f, a, b, tol, what):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"{what}: {exc}") from exc
    if not err <= tol:
        raise QuadratureError(f"{what}: error estimate {err:.3g} exceeds {tol:.3g}")
    return val


def quad_reference_1d(p: ProblemSpec, t, x, tol: float = 1e-8) -> float:
    """Adaptive Gauss-Kronrod evaluation of I + J for a one-dimensional problem.

    Both terms are integrated in transformed variables: I in y with
    z = x + sqrt(4 D t) y, J in (tau, w) with s = t - tau^2 and
    z = x + sqrt(4 D) tau w, which leaves the smooth weight (2 tau / sqrt(pi)) e^{-w^2}.
    """
    if p.d != 1:
        raise DomainError("quad_reference_1d requires a one-dimensional problem")
    if t < 0:
        raise DomainError("t must be non-negative")
    x = float(np.ravel(x)[0])
    D = p.diffusion
    W = _GAUSS_WINDOW
    sq = math.sqrt(4 * D * t)

    def u0(z):
        return float(p.u0.value(0.0, np.array([z])))

    def F(s, z):
        return float(p.forcing.value(s, np.array([z])))

    tol_i = tol / 2
    I = _quad(lambda y: math.exp(-y * y) * u0(x + sq * y), -W, W, tol_i * math.sqrt(math.pi), "I term")
    I /= math.sqrt(math.pi)
    if t == 0 or p.forcing.is_zero:
        return I

    root_t = math.sqrt(t)
    inner_tol = min(tol, tol * math.sqrt(math.pi) / (8 * t))
    c = math.sqrt(4 * D)

    def outer(tau):
        if tau == 0:
            return 0.0
        inner = _quad(lambda w: math.exp(-w * w) * F(t - tau * tau, x + c * tau * w), -W, W, inner_tol, "J inner")
        return 2 * tau / math.sqrt(math.pi) * inner

    J = _quad(outer, 0.0, root_t, tol / 4, "J outer")
    return I + J
