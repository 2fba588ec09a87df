"""Least-squares training of the output weights.

The PDE block holds (d/dt - D Laplacian) of every feature at interior
collocation points with the forcing as target; the initial-condition
block holds the features at t = 0 with u0 as target and is scaled by
sqrt(ic_weight). The weights minimise

    |A_pde w - b_pde|^2 + ic_weight |A_ic w - b_ic|^2 + ridge |w|^2.

With ``solver="normal_cholesky"`` the Gram matrix is accumulated in row
blocks so the full design matrix is never held in memory. ``svd_pinv``
materialises it and returns the minimum-norm least-squares solution.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import blas, lapack

from .errors import ConfigError, DomainError, NonFiniteError, SolverError
from .features import VARIANTS, IS_SCALES, FeatureBank, build_bank, feature_rows
from .problem import ProblemSpec
from .sampling import Rng, RngState, SamplerKind, as_generator

SOLVERS = ("normal_cholesky", "svd_pinv")
COLLOCATIONS = ("random", "grid")
PINV_MAX_ENTRIES = 2 * 10**8
JITTER_ATTEMPTS = 3
WORKERS_ENV = "HEATNET_WORKERS"

# rows x features per assembly block
_BLOCK_ENTRIES = 1 << 21
_MIN_BLOCK_ROWS = 256


@dataclass(frozen=True)
class TrainConfig:
    """Training hyper-parameters; ``None`` fields are resolved against the problem."""

    M0: int = 32
    M1: int = 64
    N_pde: int = 3000
    N_ic: int = 1000
    ic_weight: Optional[float] = None
    ridge: float = 0.0
    sampler: SamplerKind = SamplerKind.PSEUDO_UNIFORM
    seed: int = 0
    t_floor: Optional[float] = None
    solver: Optional[str] = None
    variant: str = "importance"
    is_scale: str = "sqrt2Dt"
    collocation: Optional[str] = None
    rcond: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "sampler", SamplerKind.parse(self.sampler))
        self.validate()

    def validate(self):
        for key in ("M0", "M1", "N_pde", "N_ic"):
            if int(getattr(self, key)) < 0:
                raise ConfigError(key, "must be non-negative")
        if self.M0 + self.M1 < 1:
            raise ConfigError("M0", "M0 + M1 must be at least 1")
        if self.N_pde + self.N_ic < 1:
            raise ConfigError("N_pde", "N_pde + N_ic must be at least 1")
        if self.ic_weight is not None and not self.ic_weight >= 0:
            raise ConfigError("ic_weight", "must be >= 0")
        if not self.ridge >= 0:
            raise ConfigError("ridge", "must be >= 0")
        if self.solver is not None and self.solver not in SOLVERS:
            raise ConfigError("solver", f"expected one of {SOLVERS}")
        if self.solver == "normal_cholesky" and self.ridge == 0:
            raise ConfigError("solver", "normal_cholesky needs ridge > 0; use svd_pinv")
        if self.variant not in VARIANTS:
            raise ConfigError("variant", f"expected one of {VARIANTS}")
        if self.is_scale not in IS_SCALES:
            raise ConfigError("is_scale", f"expected one of {tuple(IS_SCALES)}")
        if self.collocation is not None and self.collocation not in COLLOCATIONS:
            raise ConfigError("collocation", f"expected one of {COLLOCATIONS}")
        if self.t_floor is not None and not self.t_floor > 0:
            raise ConfigError("t_floor", "must be positive")
        if self.rcond is not None and not self.rcond > 0:
            raise ConfigError("rcond", "must be positive")

    def resolved(self, p: ProblemSpec) -> "TrainConfig":
        """Copy with every default filled in for problem ``p``."""
        ic_weight = self.ic_weight
        if ic_weight is None:
            ic_weight = self.N_pde / self.N_ic if self.N_ic else 1.0
        t_floor = 1e-3 * p.horizon if self.t_floor is None else self.t_floor
        if t_floor > p.horizon:
            raise ConfigError("t_floor", "exceeds the time horizon")
        solver = self.solver or ("normal_cholesky" if self.ridge > 0 else "svd_pinv")
        collocation = self.collocation
        if collocation is None:
            collocation = "grid" if p.params is not None and p.params.name == "ex1" else "random"
        if collocation == "grid" and p.d != 1:
            raise ConfigError("collocation", "grid collocation is only available for d = 1")
        rcond = self.rcond
        if rcond is None:
            rcond = np.finfo(float).eps * max(self.N_pde + self.N_ic, self.M0 + self.M1)
        return replace(
            self, ic_weight=float(ic_weight), t_floor=float(t_floor), solver=solver,
            collocation=collocation, rcond=float(rcond),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sampler"] = self.sampler.value
        return out


@dataclass(frozen=True)
class TrainingPoints:
    t_pde: np.ndarray
    x_pde: np.ndarray
    x_ic: np.ndarray

    @property
    def n_pde(self) -> int:
        return self.t_pde.shape[0]

    @property
    def n_ic(self) -> int:
        return self.x_ic.shape[0]


@dataclass
class LinearSystem:
    A: np.ndarray
    b: np.ndarray
    row_kind: np.ndarray  # "pde" / "ic" per row

    def __post_init__(self):
        if not (self.A.shape[0] == self.b.shape[0] == self.row_kind.shape[0]):
            raise DomainError("row counts of A, b and row_kind differ")


def sample_training_points(p: ProblemSpec, cfg: TrainConfig, rng: Rng | None = None) -> TrainingPoints:
    """Interior collocation points on [t_floor, T] x [-A_train, A_train]^d and IC points on [-A, A]^d."""
    cfg = cfg.resolved(p)
    d, T = p.d, p.horizon
    At, A = p.train_half_width, p.box_half_width
    if cfg.collocation == "grid":
        nt = max(1, int(math.isqrt(cfg.N_pde))) if cfg.N_pde else 0
        nx = cfg.N_pde // nt if nt else 0
        tt, xx = np.meshgrid(np.linspace(cfg.t_floor, T, nt), np.linspace(-At, At, nx), indexing="ij")
        t_pde, x_pde = tt.ravel(), xx.reshape(-1, 1)
        x_ic = np.linspace(-A, A, cfg.N_ic).reshape(-1, 1)
        return TrainingPoints(t_pde, x_pde, x_ic)
    gen = as_generator(RngState(cfg.seed, 1) if rng is None else rng)
    t_pde = cfg.t_floor + (T - cfg.t_floor) * gen.random(cfg.N_pde)
    x_pde = At * (2 * gen.random((cfg.N_pde, d)) - 1)
    x_ic = A * (2 * gen.random((cfg.N_ic, d)) - 1)
    return TrainingPoints(t_pde, x_pde, x_ic)


# -- assembly ------------------------------------------------------------------


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"not an integer: {raw!r}") from None
    return max(1, n)


def _block_rows(M: int) -> int:
    return max(_MIN_BLOCK_ROWS, _BLOCK_ENTRIES // max(M, 1))


def _row_plan(points: TrainingPoints, M: int):
    """Fixed list of (kind, start, stop) row blocks: PDE rows first, then IC rows."""
    step = _block_rows(M)
    plan = [("pde", i, min(i + step, points.n_pde)) for i in range(0, points.n_pde, step)]
    plan += [("ic", i, min(i + step, points.n_ic)) for i in range(0, points.n_ic, step)]
    return plan


def _check_finite(block, target, kind, start):
    if np.all(np.isfinite(block)) and np.all(np.isfinite(target)):
        return
    bad = np.argwhere(~np.isfinite(block))
    if bad.size:
        row, col = bad[0]
        where = f"feature {col}"
    else:
        row, where = int(np.argmax(~np.isfinite(target))), "target"
    raise NonFiniteError(f"non-finite {kind} entry at row {start + row} ({where}); check t_floor and truncation settings")


def _build_block(p, bank, points, sqrt_w, item):
    kind, i0, i1 = item
    if kind == "pde":
        t = points.t_pde[i0:i1]
        x = points.x_pde[i0:i1]
        _, rows, _ = feature_rows(bank, p, t, x, heat=True)
        target = np.asarray(p.forcing.value(t, x), dtype=float)
        target = np.broadcast_to(target, t.shape).astype(float)
    else:
        x = points.x_ic[i0:i1]
        t = np.zeros(i1 - i0)
        rows, _, _ = feature_rows(bank, p, t, x, heat=False)
        target = np.broadcast_to(np.asarray(p.u0.value(0.0, x), dtype=float), t.shape).astype(float)
        rows *= sqrt_w
        target = target * sqrt_w
    _check_finite(rows, target, kind, i0)
    return kind, rows, target


def _iter_blocks(p, bank, points, cfg):
    """Yield assembled row blocks in plan order, evaluated by a thread pool."""
    sqrt_w = math.sqrt(cfg.ic_weight)
    plan = _row_plan(points, bank.M)
    workers = worker_count()
    if workers == 1 or len(plan) == 1:
        for item in plan:
            yield _build_block(p, bank, points, sqrt_w, item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # bounded look-ahead keeps at most 2 * workers blocks alive
        for k in range(0, len(plan), 2 * workers):
            chunk = plan[k : k + 2 * workers]
            yield from pool.map(lambda it: _build_block(p, bank, points, sqrt_w, it), chunk)


def _check_bank(p: ProblemSpec, bank: FeatureBank):
    if bank.fingerprint != p.fingerprint:
        raise DomainError("feature bank was built for a different problem")


def assemble_system(p: ProblemSpec, bank: FeatureBank, points: TrainingPoints, cfg: TrainConfig) -> LinearSystem:
    """Materialise the stacked PDE / IC design matrix and right-hand side."""
    _check_bank(p, bank)
    cfg = cfg.resolved(p)
    A = np.empty((points.n_pde + points.n_ic, bank.M))
    b = np.empty(A.shape[0])
    pos = 0
    for _, rows, target in _iter_blocks(p, bank, points, cfg):
        n = rows.shape[0]
        A[pos : pos + n] = rows
        b[pos : pos + n] = target
        pos += n
    kinds = np.array(["pde"] * points.n_pde + ["ic"] * points.n_ic)
    return LinearSystem(A, b, kinds)


@dataclass
class NormalEquations:
    """Upper triangle of A^T A (Fortran order), A^T b and |b|^2."""

    gram: np.ndarray
    rhs: np.ndarray
    bb: float
    n_rows: int


def accumulate_normal_equations(p: ProblemSpec, bank: FeatureBank, points: TrainingPoints, cfg: TrainConfig) -> NormalEquations:
    """Stream A^T A and A^T b over row blocks in a fixed order."""
    _check_bank(p, bank)
    cfg = cfg.resolved(p)
    M = bank.M
    gram = np.zeros((M, M), order="F")
    rhs = np.zeros(M)
    bb = 0.0
    n = 0
    for _, rows, target in _iter_blocks(p, bank, points, cfg):
        gram = blas.dsyrk(1.0, rows.T, beta=1.0, c=gram, trans=0, lower=0, overwrite_c=1)
        rhs += rows.T @ target
        bb += float(target @ target)
        n += rows.shape[0]
    return NormalEquations(gram, rhs, bb, n)


def normal_equations_from_system(sys: LinearSystem) -> NormalEquations:
    A = np.asarray(sys.A, dtype=float)
    gram = np.asfortranarray(A.T @ A)
    return NormalEquations(gram, A.T @ sys.b, float(sys.b @ sys.b), A.shape[0])


# -- solvers -------------------------------------------------------------------


def _mirror_upper(g: np.ndarray, to_lower: bool):
    """Copy one triangle of a square Fortran array onto the other, in column blocks."""
    M = g.shape[0]
    step = max(1, _BLOCK_ENTRIES // max(M, 1))
    for j0 in range(0, M, step):
        j1 = min(j0 + step, M)
        if to_lower:
            g[j0:j1, :j0] = g[:j0, j0:j1].T
        else:
            g[:j0, j0:j1] = g[j0:j1, :j0].T
        blk = g[j0:j1, j0:j1]
        tri = np.triu(blk) if to_lower else np.tril(blk)
        g[j0:j1, j0:j1] = tri + tri.T - np.diag(np.diag(blk))


def solve_normal(ne: NormalEquations, ridge: float):
    """Cholesky solve of (A^T A + ridge I) w = A^T b, consuming ``ne.gram``.

    On factorisation failure the diagonal shift is raised by a factor of ten
    (starting from max(ridge, eps * mean diagonal)) up to three times. The
    original matrix is kept in the lower triangle so retries and the
    optimality check need no extra M x M storage.
    """
    if not ridge > 0:
        raise DomainError("normal_cholesky requires ridge > 0")
    g = ne.gram
    if not g.flags.f_contiguous:
        g = np.asfortranarray(g)
    M = g.shape[0]
    _mirror_upper(g, to_lower=True)
    diag = np.diag(g).copy()
    base = max(ridge, np.finfo(float).eps * float(np.mean(diag)) if M else ridge)
    shifts = [ridge] + [base * 10.0**k for k in range(1, JITTER_ATTEMPTS + 1)]
    for attempt, shift in enumerate(shifts):
        if attempt:
            _mirror_upper(g, to_lower=False)
        g[np.diag_indices(M)] = diag + shift
        c, info = lapack.dpotrf(g, lower=0, clean=0, overwrite_a=1)
        if info == 0:
            break
    else:
        raise SolverError(f"Cholesky factorisation failed after {JITTER_ATTEMPTS} jitter attempts")
    w, info = lapack.dpotrs(c, ne.rhs, lower=0)
    if info != 0:
        raise SolverError(f"dpotrs failed with info={info}")
    rdiag = np.abs(np.diag(c))
    cond = float((rdiag.max() / rdiag.min()) ** 2) if M else 1.0
    # restore the original Gram matrix (lower triangle + diagonal) for diagnostics
    c[np.diag_indices(M)] = diag
    gw = blas.dsymv(1.0, c, w, lower=1)
    grad = gw + shift * w - ne.rhs
    resid2 = float(w @ gw - 2 * w @ ne.rhs + ne.bb)
    diagnostics = {
        "ridge_used": float(shift),
        "jitter_attempts": attempt,
        "cond_estimate": cond,
        "optimality_grad": float(np.linalg.norm(grad)),
        "rhs_norm": float(np.linalg.norm(ne.rhs)),
        "residual_norm": math.sqrt(max(resid2, 0.0)),
    }
    return w, diagnostics


def solve_pinv(sys: LinearSystem, rcond: Optional[float] = None):
    """Minimum-norm least-squares solution with singular values below rcond * s_max dropped."""
    A = np.asarray(sys.A, dtype=float)
    N, M = A.shape
    if N * M > PINV_MAX_ENTRIES:
        raise SolverError(f"svd_pinv limited to {PINV_MAX_ENTRIES} matrix entries, got {N * M}")
    if rcond is None:
        rcond = np.finfo(float).eps * max(N, M)
    try:
        w, _, rank, sv = np.linalg.lstsq(A, sys.b, rcond=rcond)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"SVD did not converge: {exc}") from exc
    resid = A @ w - sys.b
    diagnostics = {
        "rank": int(rank),
        "cond_estimate": float(sv[0] / sv[rank - 1]) if rank else math.inf,
        "residual_norm": float(np.linalg.norm(resid)),
        "residual_norm_pde": float(np.linalg.norm(resid[sys.row_kind == "pde"])),
        "residual_norm_ic": float(np.linalg.norm(resid[sys.row_kind == "ic"])),
    }
    return w, diagnostics


def solve_ridge(sys: LinearSystem, ridge: float, solver: Optional[str] = None, rcond: Optional[float] = None):
    """Weights for a materialised system; returns ``(w, diagnostics)``."""
    solver = solver or ("normal_cholesky" if ridge > 0 else "svd_pinv")
    if solver == "svd_pinv":
        if ridge > 0:
            raise DomainError("svd_pinv solves the unregularised problem; set ridge = 0")
        return solve_pinv(sys, rcond)
    if solver == "normal_cholesky":
        return solve_normal(normal_equations_from_system(sys), ridge)
    raise DomainError(f"unknown solver {solver!r}")


# -- model ---------------------------------------------------------------------


@dataclass(frozen=True)
class TrainedModel:
    problem: ProblemSpec
    bank: FeatureBank
    weights: np.ndarray
    config: TrainConfig
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.shape != (self.bank.M,):
            raise DomainError(f"expected {self.bank.M} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NonFiniteError("trained weights contain non-finite values")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def predict(self, t, x):
        """w . phi(t, x) for one point (x of shape (d,)) or a batch (n, d)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[-1] != self.problem.d:
            raise DomainError(f"expected points of dimension {self.problem.d}")
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:1]).astype(float)
        if np.any(t < 0) or np.any(t > self.problem.horizon * (1 + 1e-12)):
            raise DomainError(f"t must lie in [0, {self.problem.horizon}]")
        step = _block_rows(self.bank.M)
        out = np.empty(x.shape[0])
        for i in range(0, x.shape[0], step):
            phi, _, _ = feature_rows(self.bank, self.problem, t[i : i + step], x[i : i + step])
            out[i : i + step] = phi @ self.weights
        return float(out[0]) if single else out


def predict(m: TrainedModel, t, x):
    return m.predict(t, x)


def train(p: ProblemSpec, cfg: TrainConfig) -> TrainedModel:
    """Sample features and collocation points, assemble, solve."""
    cfg = cfg.resolved(p)
    start = time.perf_counter()
    bank = build_bank(p, cfg.variant, cfg.M0, cfg.M1, cfg.sampler, cfg.seed, is_scale=cfg.is_scale)
    points = sample_training_points(p, cfg)
    if cfg.solver == "svd_pinv":
        sys = assemble_system(p, bank, points, cfg)
        built = time.perf_counter()
        w, diag = solve_pinv(sys, cfg.rcond)
    else:
        ne = accumulate_normal_equations(p, bank, points, cfg)
        built = time.perf_counter()
        w, diag = solve_normal(ne, cfg.ridge)
    done = time.perf_counter()
    diag.update(
        build_seconds=built - start,
        train_seconds=done - built,
        n_pde=points.n_pde,
        n_ic=points.n_ic,
        solver=cfg.solver,
    )
    return TrainedModel(p, bank, w, cfg, diag)
