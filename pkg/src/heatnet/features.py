"""HEATNET random features and their images under the heat operator.

Two feature families share the layout ``phi = [phi0 (M0 columns), phi1 (M1 columns)]``.

gaussian (transformed kernels, y_j, z_j ~ U[-A, A]^d, tau_j ~ U(D(T))):

    phi0_j(t, x) = pi^(-d/2) exp(-|y_j|^2) u0(x + y_j sqrt(4 D t))
    phi1_j(t, x) = 1[0 < g(tau_j) < t] kappa_d exp(-|x - z_j|^2 / (4 D g(tau_j)))
                   * F(t - g(tau_j), z_j)

importance (eta_j, xi_j ~ N(0, I), r_j ~ U[0, 1]):

    phi0_j(t, x) = u0(x + sigma(t) eta_j),  sigma(t) = sqrt(2 D t) (or sqrt(4 D t))
    phi1_j(t, x) = t F(r_j t, x + sqrt(2 D t (1 - r_j)) xi_j)

The time derivative and Laplacian of every feature are available in closed
form given the derivative members of the u0 / F bundles. The indicator in
the gaussian phi1 is frozen per evaluation point (its time derivative is
taken as zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, DomainError
from .kernels import KernelConsts, TemporalMap
from .problem import ProblemSpec, eval_bundle
from .sampling import BlockSampler, RngState, SamplerKind

VARIANTS = ("gaussian", "importance")
IS_SCALES = {"sqrt2Dt": 2.0, "sqrt4Dt": 4.0}

# elements per (rows x features x d) temporary
_BLOCK_ELEMS = 1 << 22


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureBank:
    """Frozen feature parameters; arrays unused by the variant have zero rows."""

    variant: str
    d: int
    D: float
    T: float
    A: float
    y: np.ndarray
    z: np.ndarray
    tau: np.ndarray
    eta: np.ndarray
    r: np.ndarray
    xi: np.ndarray
    is_scale: str = "sqrt2Dt"
    sampler: SamplerKind = SamplerKind.PSEUDO_UNIFORM
    seed: Optional[int] = None
    fingerprint: str = ""
    trunc_upper: Optional[float] = None
    _tm: TemporalMap = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.is_scale not in IS_SCALES:
            raise ValueError(f"unknown importance scale {self.is_scale!r}")
        for name in ("y", "z", "tau", "eta", "r", "xi"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        tm = TemporalMap(self.d, self.T, self.trunc_upper)
        object.__setattr__(self, "_tm", tm)
        object.__setattr__(self, "trunc_upper", tm.trunc_upper)
        if self.variant == "gaussian":
            lo, hi = tm.domain(self.T)
            if self.tau.size and (self.tau.min() < lo or self.tau.max() > hi):
                raise DomainError("tau samples outside D(T)")
        elif self.r.size and (self.r.min() < 0 or self.r.max() > 1):
            raise DomainError("r samples outside [0, 1]")

    @property
    def M0(self) -> int:
        return (self.y if self.variant == "gaussian" else self.eta).shape[0]

    @property
    def M1(self) -> int:
        return (self.z if self.variant == "gaussian" else self.r).shape[0]

    @property
    def M(self) -> int:
        return self.M0 + self.M1

    @property
    def temporal_map(self) -> TemporalMap:
        return self._tm

    def arrays(self) -> dict:
        return {k: getattr(self, k) for k in ("y", "z", "tau", "eta", "r", "xi")}

    def oracle_weights(self) -> np.ndarray:
        """Weights that turn the feature sum into the plain Monte Carlo estimator.

        For the gaussian phi1 block the estimator is the one with tau drawn on
        D(T); it coincides with the pointwise transformed estimator at t = T.
        """
        M0, M1 = self.M0, self.M1
        if self.variant == "importance":
            return np.concatenate([np.full(M0, 1.0 / max(M0, 1)), np.full(M1, 1.0 / max(M1, 1))])
        box = (2 * self.A) ** self.d
        mu = self._tm.measure(self.T)
        return np.concatenate([np.full(M0, box / max(M0, 1)), np.full(M1, mu * box / max(M1, 1))])


@dataclass
class FeatureEval:
    phi: np.ndarray
    heat_op_phi: Optional[np.ndarray] = None
    active_mask: Optional[np.ndarray] = None


def build_bank(
    p: ProblemSpec,
    variant: str,
    M0: int,
    M1: int,
    sampler=SamplerKind.PSEUDO_UNIFORM,
    seed: int = 0,
    is_scale: str = "sqrt2Dt",
    trunc_upper: Optional[float] = None,
    stream_id: int = 0,
) -> FeatureBank:
    """Sample and freeze the parameters of ``M0 + M1`` features."""
    M0, M1 = int(M0), int(M1)
    if M0 < 0 or M1 < 0 or M0 + M1 < 1:
        raise DomainError("need M0, M1 >= 0 and M0 + M1 >= 1")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    sampler = SamplerKind.parse(sampler)
    d = p.d
    blocks = BlockSampler(sampler, RngState(seed, stream_id))
    empty = np.empty((0, d))
    A = p.box_half_width
    tm = TemporalMap(d, p.horizon, trunc_upper)
    if variant == "gaussian":
        y = A * (2 * blocks.uniform(M0, d) - 1)
        lo, hi = tm.domain(p.horizon)
        if sampler.is_sobol:
            zt = blocks.uniform(M1, d + 1)
            u_tau, u_z = zt[:, 0], zt[:, 1:]
        else:
            u_tau = blocks.uniform(M1, 1)[:, 0]
            u_z = blocks.uniform(M1, d)
        tau = lo + (hi - lo) * u_tau
        z = A * (2 * u_z - 1)
        eta, r, xi = empty, np.empty(0), empty
    else:
        eta = blocks.normal(M0, d)
        r, xi = blocks.uniform_normal(M1, 1, d)
        r = r[:, 0]
        y, z, tau = empty, empty, np.empty(0)
    return FeatureBank(
        variant=variant,
        d=d,
        D=p.diffusion,
        T=p.horizon,
        A=A,
        y=y,
        z=z,
        tau=tau,
        eta=eta,
        r=r,
        xi=xi,
        is_scale=is_scale,
        sampler=sampler,
        seed=None if sampler.is_sobol else int(seed),
        fingerprint=p.fingerprint,
        trunc_upper=tm.trunc_upper,
    )


# -- evaluation ----------------------------------------------------------------


def _prepare(b: FeatureBank, p: ProblemSpec, t, x):
    if p.d != b.d:
        raise DimensionError(f"bank dimension {b.d} does not match problem dimension {p.d}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != b.d:
        raise DimensionError(f"expected points of dimension {b.d}, got {x.shape[-1]}")
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:1]).astype(float)
    single = single and np.ndim(t) <= 1 and t.size == 1
    if np.any(t < 0) or np.any(t > b.T * (1 + 1e-12)):
        raise DomainError(f"t must lie in [0, {b.T}]")
    return t, x, single


def _rows_per_block(b: FeatureBank):
    return max(1, _BLOCK_ELEMS // max(1, b.M * b.d))


def _gaussian_block(b, p, t, x, heat):
    n, d, D = x.shape[0], b.d, b.D
    M0, M1 = b.M0, b.M1
    phi = np.zeros((n, M0 + M1))
    hop = np.zeros((n, M0 + M1)) if heat else None
    mask = np.zeros((n, M1), dtype=bool)

    if M0:
        w0 = math.pi ** (-d / 2) * np.exp(-np.sum(b.y**2, axis=1))
        sc = np.sqrt(4 * D * t)
        pts = x[:, None, :] + sc[:, None, None] * b.y[None]
        phi[:, :M0] = w0 * p.u0.value(0.0, pts)
        if heat:
            grad = eval_bundle(p.u0, "grad", 0.0, pts)
            dphi = w0 * np.einsum("nmd,md->nm", grad, b.y) * np.sqrt(D / t)[:, None]
            lap = w0 * eval_bundle(p.u0, "lap", 0.0, pts)
            hop[:, :M0] = dphi - D * lap

    if M1 and not p.forcing.is_zero:
        tm = b.temporal_map
        consts = KernelConsts(d, D)
        lag = np.asarray(tm.g(b.tau))
        mask = (lag[None, :] > 0) & (lag[None, :] < t[:, None])
        safe = np.where(lag > 0, lag, 1.0)
        r2 = np.sum((x[:, None, :] - b.z[None]) ** 2, axis=-1)
        e = np.where(mask, np.exp(-r2 / (4 * D * safe)), 0.0)
        s = t[:, None] - lag[None, :]
        zb = b.z[None]
        Fv = p.forcing.value(s, zb)
        phi[:, M0:] = consts.kappa * e * Fv
        if heat:
            Fdt = eval_bundle(p.forcing, "dt", s, zb)
            lap_e = r2 / (4 * D**2 * safe**2) - d / (2 * D * safe)
            hop[:, M0:] = consts.kappa * e * (Fdt - D * Fv * lap_e)
    elif M1:
        mask = np.asarray(b.temporal_map.active(t[:, None], b.tau[None, :]))
    return phi, hop, mask


def _importance_block(b, p, t, x, heat):
    n, D = x.shape[0], b.D
    M0, M1 = b.M0, b.M1
    phi = np.zeros((n, M0 + M1))
    hop = np.zeros((n, M0 + M1)) if heat else None

    if M0:
        c = IS_SCALES[b.is_scale]
        sig = np.sqrt(c * D * t)
        pts = x[:, None, :] + sig[:, None, None] * b.eta[None]
        phi[:, :M0] = p.u0.value(0.0, pts)
        if heat:
            grad = eval_bundle(p.u0, "grad", 0.0, pts)
            dsig = (c * D / (2 * sig))[:, None]
            dphi = np.einsum("nmd,md->nm", grad, b.eta) * dsig
            hop[:, :M0] = dphi - D * eval_bundle(p.u0, "lap", 0.0, pts)

    if M1 and not p.forcing.is_zero:
        r = b.r[None, :]
        tt = t[:, None]
        s = r * tt
        rho = np.sqrt(2 * D * tt * (1 - r))
        pts = x[:, None, :] + rho[..., None] * b.xi[None]
        Fv = p.forcing.value(s, pts)
        phi[:, M0:] = tt * Fv
        if heat:
            Fdt = eval_bundle(p.forcing, "dt", s, pts)
            Fgrad = eval_bundle(p.forcing, "grad", s, pts)
            with np.errstate(divide="ignore", invalid="ignore"):
                drho = np.where(rho > 0, D * (1 - r) / rho, 0.0)
            dphi = Fv + tt * (r * Fdt + np.einsum("nmd,md->nm", Fgrad, b.xi) * drho)
            hop[:, M0:] = dphi - D * tt * eval_bundle(p.forcing, "lap", s, pts)
    return phi, hop, None


def feature_rows(b: FeatureBank, p: ProblemSpec, t, x, heat: bool = False):
    """Feature matrix (and heat-operator matrix) for a batch of points.

    Returns ``(phi, heat_op_phi, mask)`` with shapes (n, M), (n, M) or None,
    and (n, M1) or None. Rows are processed in blocks to bound memory.
    """
    block = _gaussian_block if b.variant == "gaussian" else _importance_block
    n = x.shape[0]
    step = _rows_per_block(b)
    if n <= step:
        return block(b, p, t, x, heat)
    parts = [block(b, p, t[i : i + step], x[i : i + step], heat) for i in range(0, n, step)]
    phi = np.concatenate([q[0] for q in parts])
    hop = np.concatenate([q[1] for q in parts]) if heat else None
    mask = np.concatenate([q[2] for q in parts]) if parts[0][2] is not None else None
    return phi, hop, mask


def _wrap(phi, hop, mask, single):
    if single:
        return FeatureEval(
            phi[0],
            None if hop is None else hop[0],
            None if mask is None else mask[0],
        )
    return FeatureEval(phi, hop, mask)


def eval_features(b: FeatureBank, p: ProblemSpec, t, x) -> FeatureEval:
    """Feature values at one point (x of shape (d,)) or a batch (x of shape (n, d))."""
    t, x, single = _prepare(b, p, t, x)
    phi, _, mask = feature_rows(b, p, t, x, heat=False)
    return _wrap(phi, None, mask, single)


def eval_heat_operator(b: FeatureBank, p: ProblemSpec, t, x, t_floor: Optional[float] = None) -> FeatureEval:
    """Feature values together with (d/dt - D Laplacian) of every feature.

    ``t_floor`` defaults to 1e-3 T; earlier times are rejected because the
    time derivative of phi0 grows like t^(-1/2).
    """
    t, x, single = _prepare(b, p, t, x)
    floor = 1e-3 * b.T if t_floor is None else t_floor
    if np.any(t < floor):
        raise DomainError(f"heat operator requested below t_floor = {floor}")
    phi, hop, mask = feature_rows(b, p, t, x, heat=True)
    return _wrap(phi, hop, mask, single)
