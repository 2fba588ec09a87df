"""PDE problem instances for u_t = D * Laplacian(u) + F on the whole space.

Scalar fields are carried as :class:`ScalarFieldBundle` objects. Every
callable in a bundle is vectorised: it receives a time array ``t`` and a
point array ``x`` of shape ``(..., d)`` and must broadcast ``t`` against
``x[..., 0]``. Values come back with the broadcast shape, gradients with a
trailing axis of length ``d``.

The benchmark catalog (``ex1``, ``ex2a``, ``ex2b``, ``ex3``) ships closed-form
solutions together with analytic time derivatives, gradients and
Laplacians of the initial condition and forcing.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, DomainError

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

_EPS = np.finfo(float).eps
BENCHMARKS = ("ex1", "ex2a", "ex2b", "ex3")


def _batch_shape(t, x):
    return np.broadcast_shapes(np.shape(t), np.shape(x)[:-1])


@dataclass(frozen=True)
class ScalarFieldBundle:
    """A scalar field together with whichever derivatives are known in closed form.

    Missing derivative members are replaced by central finite differences of
    ``value`` (see :func:`eval_bundle`). ``fd_step`` overrides the default
    relative step; ``dim`` (if set) is checked against incoming points.
    """

    value: Field
    dt: Optional[Field] = None
    grad: Optional[Field] = None
    lap: Optional[Field] = None
    fd_step: Optional[float] = None
    dim: Optional[int] = None
    is_zero: bool = False

    def __post_init__(self):
        if self.fd_step is not None and not self.fd_step > 0:
            raise ValueError("fd_step must be positive")

    def scaled(self, factor: float) -> "ScalarFieldBundle":
        """Return ``factor * self`` with every member scaled."""

        def wrap(f):
            if f is None:
                return None
            return lambda t, x: factor * f(t, x)

        return ScalarFieldBundle(
            value=wrap(self.value),
            dt=wrap(self.dt),
            grad=wrap(self.grad),
            lap=wrap(self.lap),
            fd_step=self.fd_step,
            dim=self.dim,
            is_zero=self.is_zero or factor == 0,
        )


def zero_field(dim=None) -> ScalarFieldBundle:
    def zero(t, x):
        return np.zeros(_batch_shape(t, x))

    def zero_vec(t, x):
        x = np.asarray(x)
        return np.zeros(_batch_shape(t, x) + (x.shape[-1],))

    return ScalarFieldBundle(zero, dt=zero, grad=zero_vec, lap=zero, dim=dim, is_zero=True)


def constant_field(c: float, dim=None) -> ScalarFieldBundle:
    z = zero_field(dim)

    def value(t, x):
        return np.full(_batch_shape(t, x), float(c))

    return ScalarFieldBundle(value, dt=z.dt, grad=z.grad, lap=z.lap, dim=dim, is_zero=(c == 0))


def _first_step(b, v):
    base = b.fd_step if b.fd_step is not None else _EPS ** (1 / 3)
    return base * np.maximum(1.0, np.abs(v))


def _second_step(b, v):
    base = b.fd_step if b.fd_step is not None else _EPS ** (1 / 4)
    return base * np.maximum(1.0, np.abs(v))


def eval_bundle(b: ScalarFieldBundle, which: str, t, x):
    """Evaluate ``which`` in {value, dt, grad, lap} of bundle ``b`` at (t, x).

    Analytic members are used when present; otherwise a second-order central
    finite difference of ``value`` is returned.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if x.ndim == 0:
        raise DimensionError("x must have a trailing spatial axis")
    if b.dim is not None and x.shape[-1] != b.dim:
        raise DimensionError(f"expected points of dimension {b.dim}, got {x.shape[-1]}")

    if which == "value":
        return b.value(t, x)
    member = getattr(b, which, None) if which in ("dt", "grad", "lap") else None
    if which not in ("dt", "grad", "lap"):
        raise ValueError(f"unknown bundle member {which!r}")
    if member is not None:
        return member(t, x)

    if which == "dt":
        h = _first_step(b, t)
        return (b.value(t + h, x) - b.value(t - h, x)) / (2 * h)

    d = x.shape[-1]
    out_shape = _batch_shape(t, x)
    if which == "grad":
        g = np.empty(out_shape + (d,))
        for i in range(d):
            h = _first_step(b, x[..., i])
            xp = x.copy()
            xm = x.copy()
            xp[..., i] += h
            xm[..., i] -= h
            g[..., i] = (b.value(t, xp) - b.value(t, xm)) / (2 * h)
        return g

    f0 = b.value(t, x)
    lap = np.zeros(out_shape)
    for i in range(d):
        h = _second_step(b, x[..., i])
        xp = x.copy()
        xm = x.copy()
        xp[..., i] += h
        xm[..., i] -= h
        lap = lap + (b.value(t, xp) - 2 * f0 + b.value(t, xm)) / h**2
    return lap


@dataclass(frozen=True)
class BenchmarkParams:
    """Parameters of the benchmark catalog.

    ``k``/``m`` are the wave numbers of the two sine sums, ``c`` the mixing
    coefficients (defaults to all ones), ``alpha_q``/``beta_E`` the amplitude
    of the time profile and the decay rate of the Gaussian envelope in ``ex3``.
    """

    name: str
    k: int = 2
    m: int = 3
    c: Optional[Sequence[float]] = None
    alpha_q: float = 1.0
    beta_E: float = 1.0

    def to_dict(self):
        return {
            "name": self.name,
            "k": self.k,
            "m": self.m,
            "c": None if self.c is None else [float(v) for v in self.c],
            "alpha_q": self.alpha_q,
            "beta_E": self.beta_E,
        }


@dataclass(frozen=True)
class ProblemSpec:
    """Linear parabolic problem on R^d truncated to boxes for sampling.

    ``box_half_width`` (A) bounds feature samples and initial-condition
    points; ``train_half_width`` bounds PDE collocation points; tests default
    to half of A.
    """

    d: int
    diffusion: float
    horizon: float
    box_half_width: float
    train_half_width: float
    u0: ScalarFieldBundle
    forcing: ScalarFieldBundle
    exact: Optional[Field] = None
    name: str = "custom"
    params: Optional[BenchmarkParams] = None
    test_half_width: Optional[float] = None
    _fingerprint: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError("d must be a positive integer")
        if not self.diffusion > 0:
            raise DomainError("diffusion coefficient must be positive")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if not self.box_half_width > 0:
            raise DomainError("box half-width must be positive")
        if not 0 < self.train_half_width <= self.box_half_width:
            raise DomainError("training half-width must lie in (0, A]")
        if self.test_half_width is None:
            object.__setattr__(self, "test_half_width", self.box_half_width / 2)
        object.__setattr__(self, "_fingerprint", self._compute_fingerprint())

    def describe(self) -> dict:
        return {
            "name": self.name,
            "d": int(self.d),
            "D": float(self.diffusion),
            "T": float(self.horizon),
            "A": float(self.box_half_width),
            "A_train": float(self.train_half_width),
            "A_test": float(self.test_half_width),
            "params": None if self.params is None else self.params.to_dict(),
        }

    def _compute_fingerprint(self):
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    def check_points(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise DimensionError(f"expected points of dimension {self.d}, got {x.shape[-1]}")
        return x


# -- closed-form building blocks ---------------------------------------------


def _g(t):
    return t + np.exp(-t)


def _dg(t):
    return 1.0 - np.exp(-t)


def _ddg(t):
    return np.exp(-t)


class _SineSum:
    """S(x) = (1/sqrt(C)) * sum_i c_i sin(k x_i) and its derivatives."""

    def __init__(self, c, k):
        self.c = np.asarray(c, dtype=float)
        self.k = float(k)
        self.norm = 1.0 / math.sqrt(float(np.sum(self.c**2)))

    def value(self, x):
        return self.norm * np.sin(self.k * x) @ self.c

    def grad(self, x):
        return (self.norm * self.k) * self.c * np.cos(self.k * x)

    def lap(self, x):
        return -self.k**2 * self.value(x)

    # pieces used by the ex3 forcing
    def q_term(self, x):
        """Q(x) = x . grad S(x)."""
        return (self.norm * self.k) * (x * np.cos(self.k * x)) @ self.c

    def second_diag(self, x):
        """Diagonal second derivatives d^2 S / dx_i^2 (per coordinate)."""
        return -(self.norm * self.k**2) * self.c * np.sin(self.k * x)


def _separable_bundles(S: _SineSum, D: float, d: int):
    """Bundles for u = g(t) S(x): forcing F = (g' + D k^2 g) S."""
    k2 = S.k**2

    def u0(t, x):
        return np.broadcast_to(S.value(x), _batch_shape(t, x)).copy()

    def u0_grad(t, x):
        g = S.grad(x)
        return np.broadcast_to(g, _batch_shape(t, x) + (x.shape[-1],)).copy()

    def u0_lap(t, x):
        return np.broadcast_to(S.lap(x), _batch_shape(t, x)).copy()

    z = zero_field(d)
    init = ScalarFieldBundle(u0, dt=z.dt, grad=u0_grad, lap=u0_lap, dim=d)

    def amp(t):
        return _dg(t) + D * k2 * _g(t)

    def amp_dt(t):
        return _ddg(t) + D * k2 * _dg(t)

    def f(t, x):
        return amp(t) * S.value(x)

    def f_dt(t, x):
        return amp_dt(t) * S.value(x)

    def f_grad(t, x):
        return np.asarray(amp(t))[..., None] * S.grad(x)

    def f_lap(t, x):
        return amp(t) * S.lap(x)

    forcing = ScalarFieldBundle(f, dt=f_dt, grad=f_grad, lap=f_lap, dim=d)

    def exact(t, x):
        return _g(t) * S.value(x)

    return init, forcing, exact


def _prod_except(s):
    """Products over the last axis leaving one factor out each time."""
    ones = np.ones(s.shape[:-1] + (1,))
    prefix = np.cumprod(np.concatenate([ones, s[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(np.concatenate([ones, s[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return prefix * suffix


def _product_sine_bundles(D: float, d: int):
    """ex2a: u0 = prod sin(pi x_i), F = 0, u = exp(-d pi^2 D t) u0."""
    pi = math.pi

    def u0(t, x):
        return np.broadcast_to(np.prod(np.sin(pi * x), axis=-1), _batch_shape(t, x)).copy()

    def u0_grad(t, x):
        g = pi * np.cos(pi * x) * _prod_except(np.sin(pi * x))
        return np.broadcast_to(g, _batch_shape(t, x) + (x.shape[-1],)).copy()

    def u0_lap(t, x):
        return -d * pi**2 * u0(t, x)

    z = zero_field(d)
    init = ScalarFieldBundle(u0, dt=z.dt, grad=u0_grad, lap=u0_lap, dim=d)

    def exact(t, x):
        return np.exp(-d * pi**2 * D * t) * np.prod(np.sin(pi * x), axis=-1)

    return init, z, exact


def _q(a, t):
    return a * t**2 * np.exp(-t / 3)


def _dq(a, t):
    return a * (2 * t - t**2 / 3) * np.exp(-t / 3)


def _ddq(a, t):
    return a * (2 - 4 * t / 3 + t**2 / 9) * np.exp(-t / 3)


def _nonseparable_bundles(Sk: _SineSum, Sm: _SineSum, D: float, d: int, alpha: float, beta: float):
    """ex3: u = g S_k + q E S_m with E = exp(-beta t |x|^2 / d).

    The forcing is F = (g' + D k^2 g) S_k + H with H = (d/dt - D Lap)(q E S_m).
    Writing a = beta t / d and E = exp(-a r2), H = E * K where
    K = a1(t, r2) S_m + a2(t) Q_m, Q_m = x . grad S_m, and
        a1 = q' - q b r2 - D q (4 a^2 r2 - 2 a d - m^2),   b = beta / d
        a2 = 4 D q a.
    Derivatives of H follow from the product rule on E * K.
    """
    init, sep_forcing, sep_exact = _separable_bundles(Sk, D, d)
    b = beta / d
    m2 = Sm.k**2

    def parts(t, x):
        t = np.asarray(t, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        a = b * t
        E = np.exp(-a * r2)
        q, dq, ddq = _q(alpha, t), _dq(alpha, t), _ddq(alpha, t)
        a1 = dq - q * b * r2 - D * q * (4 * a**2 * r2 - 2 * a * d - m2)
        a2 = 4 * D * q * a
        return t, r2, a, E, q, dq, ddq, a1, a2

    def h_value(t, x):
        t, r2, a, E, q, dq, ddq, a1, a2 = parts(t, x)
        return E * (a1 * Sm.value(x) + a2 * Sm.q_term(x))

    def h_dt(t, x):
        t, r2, a, E, q, dq, ddq, a1, a2 = parts(t, x)
        S, Q = Sm.value(x), Sm.q_term(x)
        K = a1 * S + a2 * Q
        da1 = ddq - dq * b * r2 - D * (dq * (4 * a**2 * r2 - 2 * a * d - m2) + q * (8 * a * b * r2 - 2 * b * d))
        da2 = 4 * D * (dq * a + q * b)
        return E * (-b * r2 * K + da1 * S + da2 * Q)

    def h_grad(t, x):
        t, r2, a, E, q, dq, ddq, a1, a2 = parts(t, x)
        S, Q = Sm.value(x), Sm.q_term(x)
        G, G2 = Sm.grad(x), Sm.second_diag(x)
        K = a1 * S + a2 * Q
        beta1 = -q * b - 4 * D * q * a**2  # d a1 / d r2
        grad_q = G + x * G2
        col = lambda v: np.asarray(v)[..., None]
        grad_k = col(2 * beta1 * S) * x + col(a1) * G + col(a2) * grad_q
        return col(E) * (-2 * col(a) * x * col(K) + grad_k)

    def h_lap(t, x):
        t, r2, a, E, q, dq, ddq, a1, a2 = parts(t, x)
        S, Q = Sm.value(x), Sm.q_term(x)
        G2 = Sm.second_diag(x)
        K = a1 * S + a2 * Q
        beta1 = -q * b - 4 * D * q * a**2
        R = np.sum(x * x * G2, axis=-1)
        x_grad_k = 2 * r2 * beta1 * S + a1 * Q + a2 * (Q + R)
        lap_k = 2 * d * beta1 * S + 4 * beta1 * Q - m2 * a1 * S + a2 * (-2 * m2 * S - m2 * Q)
        return E * ((4 * a**2 * r2 - 2 * a * d) * K - 4 * a * x_grad_k + lap_k)

    forcing = ScalarFieldBundle(
        lambda t, x: sep_forcing.value(t, x) + h_value(t, x),
        dt=lambda t, x: sep_forcing.dt(t, x) + h_dt(t, x),
        grad=lambda t, x: sep_forcing.grad(t, x) + h_grad(t, x),
        lap=lambda t, x: sep_forcing.lap(t, x) + h_lap(t, x),
        dim=d,
    )

    def exact(t, x):
        t = np.asarray(t, dtype=float)
        E = np.exp(-b * t * np.sum(x * x, axis=-1))
        return sep_exact(t, x) + _q(alpha, t) * E * Sm.value(x)

    return init, forcing, exact


def make_benchmark(
    params,
    d: int = 1,
    D: float = 1.0,
    T: float = 1.0,
    A: Optional[float] = None,
    A_train: Optional[float] = None,
    A_test: Optional[float] = None,
) -> ProblemSpec:
    """Build one of the catalog problems.

    ``params`` is a :class:`BenchmarkParams` or just a benchmark name.
    ``ex1`` is the one-dimensional forced heat equation with
    u = (t + e^{-t}) sin x (the ``ex2b`` family with k = 1, d = 1);
    ``ex2a`` is pure diffusion of prod sin(pi x_i); ``ex2b`` is the separable
    forced problem u = g(t) S_k(x); ``ex3`` adds the non-separable
    q(t) E(t, x) S_m(x) term.
    """
    if isinstance(params, str):
        params = BenchmarkParams(params)
    name = params.name
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; expected one of {BENCHMARKS}")
    if name == "ex1":
        if d != 1:
            raise DimensionError("ex1 is one-dimensional")
        params = BenchmarkParams("ex1", k=1, m=params.m, c=[1.0], alpha_q=params.alpha_q, beta_E=params.beta_E)
    if d < 1:
        raise DimensionError("d must be positive")

    A = math.pi if A is None else float(A)
    A_train = A if A_train is None else float(A_train)

    c = np.ones(d) if params.c is None else np.asarray(params.c, dtype=float)
    if name in ("ex2b", "ex3", "ex1"):
        if c.shape != (d,):
            raise DimensionError(f"coefficient vector has length {c.size}, expected {d}")
        if not np.sum(c**2) > 0:
            raise ValueError("coefficient vector must not vanish")

    if name == "ex2a":
        u0, forcing, exact = _product_sine_bundles(D, d)
    elif name in ("ex1", "ex2b"):
        u0, forcing, exact = _separable_bundles(_SineSum(c, params.k), D, d)
    else:
        u0, forcing, exact = _nonseparable_bundles(
            _SineSum(c, params.k), _SineSum(c, params.m), D, d, params.alpha_q, params.beta_E
        )

    return ProblemSpec(
        d=d,
        diffusion=float(D),
        horizon=float(T),
        box_half_width=A,
        train_half_width=A_train,
        u0=u0,
        forcing=forcing,
        exact=exact,
        name=name,
        params=params,
        test_half_width=A_test,
    )
