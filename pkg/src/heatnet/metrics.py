"""Relative error norms, test point sets and percentile summaries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, DomainError
from .problem import ProblemSpec
from .sampling import Rng, RngState, as_generator

PERCENTILES = (10, 25, 50, 75, 90)
TEST_MODES = ("grid_1d", "random_box")


def rel_errors(pred, truth):
    """(rel_l1, rel_l2, rel_linf) of ``pred`` against ``truth``."""
    pred = np.ravel(np.asarray(pred, dtype=float))
    truth = np.ravel(np.asarray(truth, dtype=float))
    if pred.shape != truth.shape or truth.size == 0:
        raise DimensionError("pred and truth must be non-empty and of equal length")
    e = np.abs(pred - truth)
    u = np.abs(truth)
    l1, l2, linf = u.sum(), np.sqrt(np.sum(u * u)), u.max()
    if not (l1 > 0 and l2 > 0 and linf > 0):
        raise DomainError("reference values have zero norm")
    return float(e.sum() / l1), float(np.sqrt(np.sum(e * e)) / l2), float(e.max() / linf)


@dataclass(frozen=True)
class TestPoints:
    t: np.ndarray
    x: np.ndarray

    __test__ = False  # not a pytest class

    def __len__(self):
        return self.t.shape[0]


def make_test_grid(p: ProblemSpec, n_test, mode: str = "random_box", rng: Rng | None = None) -> TestPoints:
    """Test points on [0, T] x [-A_test, A_test]^d.

    ``grid_1d`` takes ``n_test`` as (nt, nx) or as a total split into a
    square grid; ``random_box`` draws uniformly (stream 2 of seed 0 by default).
    """
    h = p.test_half_width
    if mode == "grid_1d":
        if p.d != 1:
            raise DimensionError("grid_1d test sets need d = 1")
        if np.ndim(n_test):
            nt, nx = (int(v) for v in n_test)
        else:
            nt = nx = int(round(np.sqrt(int(n_test))))
        if nt < 1 or nx < 1:
            raise DomainError("test grid needs at least one point per axis")
        tt, xx = np.meshgrid(np.linspace(0.0, p.horizon, nt), np.linspace(-h, h, nx), indexing="ij")
        return TestPoints(tt.ravel(), xx.reshape(-1, 1))
    if mode != "random_box":
        raise ValueError(f"unknown test mode {mode!r}; expected one of {TEST_MODES}")
    n = int(n_test)
    if n < 1:
        raise DomainError("n_test must be at least 1")
    gen = as_generator(RngState(0, 2) if rng is None else rng)
    t = p.horizon * gen.random(n)
    x = h * (2 * gen.random((n, p.d)) - 1)
    return TestPoints(t, x)


def percentile_bands(values):
    """(P10, P25, P50, P75, P90) with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DomainError("no values to summarise")
    if v.size < 2:
        raise DomainError("percentile bands need at least two values")
    return tuple(float(q) for q in np.percentile(v, PERCENTILES, method="linear"))


@dataclass
class ErrorReport:
    rel_l1: float
    rel_l2: float
    rel_linf: float
    n_test: int
    build_seconds: float = 0.0
    train_seconds: float = 0.0
    seed: Optional[int] = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("rel_l1", "rel_l2", "rel_linf"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative")


def evaluate_model(model, points: TestPoints) -> ErrorReport:
    """Compare ``model.predict`` with the exact solution of its problem."""
    p = model.problem
    if p.exact is None:
        raise DomainError("problem has no exact solution to compare against")
    pred = model.predict(points.t, points.x)
    truth = p.exact(points.t, points.x)
    l1, l2, linf = rel_errors(pred, truth)
    diag = model.diagnostics
    return ErrorReport(
        l1, l2, linf, len(points),
        build_seconds=float(diag.get("build_seconds", 0.0)),
        train_seconds=float(diag.get("train_seconds", 0.0)),
        seed=model.config.seed,
        config=model.config.to_dict(),
    )
