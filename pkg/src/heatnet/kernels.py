"""Heat kernel of d/dt - D Laplacian and the singularity-removing time maps.

The forcing integral over s in [0, t] is rewritten in a variable tau with
s = t - g(tau):

    d = 1:   tau = sqrt(t - s),    g(tau) = tau^2,          tau in [0, sqrt(t)]
    d = 2:   tau = -ln(t - s),     g(tau) = exp(-tau),      tau in [-ln t, B]
    d >= 3:  tau = (t - s)^alpha,  g(tau) = tau^(1/alpha),  tau in [t^alpha, B]

with alpha = 1 - d/2. The Jacobian cancels the (t - s)^(-d/2) prefactor and
leaves the constant kappa_d = 1 / (C(d) (4 pi D)^(d/2)), C(d) = 1/2, 1, |alpha|.
For d >= 2 the tau range is unbounded and is truncated at ``B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, DomainError, SingularityError
from .problem import ScalarFieldBundle

#: relative time resolution kept by the default truncation of the tau range
TRUNCATION_REL = 1e-8


def heat_kernel(t, x, s, z, D: float):
    """G(t, x; s, z) = (4 pi D (t-s))^(-d/2) exp(-|x-z|^2 / (4 D (t-s))) for s < t, else 0.

    Raises :class:`SingularityError` when s == t and x == z.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape[-1] != z.shape[-1]:
        raise DimensionError("x and z must have the same dimension")
    d = x.shape[-1]
    lag = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    r2 = np.sum((x - z) ** 2, axis=-1)
    lag, r2 = np.broadcast_arrays(lag, r2)
    if np.any((lag == 0) & (r2 == 0)):
        raise SingularityError("heat kernel evaluated at s == t, x == z")
    active = lag > 0
    safe = np.where(active, lag, 1.0)
    val = (4 * math.pi * D * safe) ** (-d / 2) * np.exp(-r2 / (4 * D * safe))
    out = np.where(active, val, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TemporalMap:
    """Transformed temporal domain D(t) and the map g for dimension ``d``."""

    d: int
    horizon: float
    trunc_upper: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise DimensionError("d must be positive")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if self.trunc_upper is None and self.d >= 2:
            tiny = TRUNCATION_REL * self.horizon
            B = -math.log(tiny) if self.d == 2 else tiny**self.alpha
            object.__setattr__(self, "trunc_upper", B)

    @property
    def alpha(self) -> float:
        return 1.0 - self.d / 2.0

    def domain(self, t: float):
        """Interval [lo, hi] of admissible tau at time t."""
        if not t > 0:
            raise DomainError("temporal domain requires t > 0")
        if self.d == 1:
            return 0.0, math.sqrt(t)
        lo = -math.log(t) if self.d == 2 else t**self.alpha
        hi = self.trunc_upper
        if not hi > lo:
            raise DomainError(f"truncation bound {hi} does not exceed lower limit {lo} at t={t}")
        return lo, hi

    def measure(self, t: float) -> float:
        lo, hi = self.domain(t)
        return hi - lo

    def g(self, tau):
        """Time lag t - s represented by tau."""
        tau = np.asarray(tau, dtype=float)
        if self.d == 1:
            if np.any(tau < 0):
                raise DomainError("tau must be non-negative for d = 1")
            out = tau**2
        elif self.d == 2:
            out = np.exp(-tau)
        else:
            if np.any(tau <= 0):
                raise DomainError("tau must be positive for d >= 3")
            out = tau ** (1.0 / self.alpha)
        return out if out.ndim else float(out)

    def active(self, t, tau):
        """Indicator that node tau contributes at time t: 0 < g(tau) < t."""
        lag = np.asarray(self.g(tau))
        return (lag > 0) & (lag < np.asarray(t, dtype=float))


def g_of_tau(tm: TemporalMap, tau):
    return tm.g(tau)


def temporal_domain(tm: TemporalMap, t: float):
    return tm.domain(t)


@dataclass(frozen=True)
class KernelConsts:
    d: int
    D: float

    @property
    def c_d(self) -> float:
        if self.d == 1:
            return 0.5
        if self.d == 2:
            return 1.0
        return abs(1.0 - self.d / 2.0)

    @property
    def kappa(self) -> float:
        return 1.0 / (self.c_d * (4 * math.pi * self.D) ** (self.d / 2))


def transformed_inner_integrand(
    consts: KernelConsts, tm: TemporalMap, t, x, tau, z, F: ScalarFieldBundle
):
    """kappa_d exp(-|x-z|^2 / (4 D g(tau))) F(t - g(tau), z), finite on D(t)."""
    t = float(t)
    lo, hi = tm.domain(t)
    tau_arr = np.asarray(tau, dtype=float)
    if np.any((tau_arr < lo) | (tau_arr > hi)):
        raise DomainError(f"tau outside D(t) = [{lo}, {hi}]")
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    lag = np.asarray(tm.g(tau_arr))
    r2 = np.sum((x - z) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = np.where(
            lag > 0,
            np.exp(-r2 / (4 * consts.D * np.where(lag > 0, lag, 1.0))),
            np.where(r2 == 0, 1.0, 0.0),  # limit at zero lag
        )
    if F.is_zero:
        out = np.zeros(np.broadcast_shapes(expo.shape, r2.shape))
    else:
        out = consts.kappa * expo * F.value(t - lag, z)
    return out if np.ndim(out) else float(out)
