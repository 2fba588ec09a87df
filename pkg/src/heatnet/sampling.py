"""Seeded pseudo-random and Sobol point generation.

Pseudo-random streams use numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=(stream_id,))``; this pairing is the
replay contract recorded in model files (see :data:`RNG_ALGORITHM`).
Sobol points are unscrambled and use the Joe-Kuo direction numbers shipped
with scipy (up to 21201 dimensions).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import DimensionError, DomainError

RNG_ALGORITHM = "numpy.PCG64/SeedSequence(seed, spawn_key=(stream_id,))"
SOBOL_MAX_DIM = 21201


@dataclass(frozen=True)
class RngState:
    """Seed plus substream id; each call to :meth:`generator` restarts the stream."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, stream_id: int) -> "RngState":
        return RngState(self.seed, stream_id)


Rng = Union[RngState, np.random.Generator, int]


def as_generator(rng: Rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return rng.generator()
    return RngState(int(rng)).generator()


class SamplerKind(str, enum.Enum):
    PSEUDO_UNIFORM = "pseudo_uniform"
    PSEUDO_NORMAL = "pseudo_normal"
    SOBOL_UNIFORM = "sobol_uniform"
    SOBOL_NORMAL = "sobol_normal"

    @property
    def is_sobol(self) -> bool:
        return self.value.startswith("sobol")

    @classmethod
    def parse(cls, text) -> "SamplerKind":
        """Accept a kind name or just the family ("pseudo" / "sobol")."""
        if isinstance(text, cls):
            return text
        text = str(text).strip().lower()
        if text == "pseudo":
            return cls.PSEUDO_UNIFORM
        if text == "sobol":
            return cls.SOBOL_UNIFORM
        return cls(text)


def _check_count(n, d):
    if int(n) < 1:
        raise DomainError("sample count must be at least 1")
    if int(d) < 1:
        raise DimensionError("dimension must be at least 1")


def uniform_box(n: int, d: int, half_width: float, rng: Rng) -> np.ndarray:
    """``n`` points i.i.d. uniform on [-half_width, half_width]^d."""
    _check_count(n, d)
    if not half_width > 0:
        raise DomainError("half_width must be positive")
    u = as_generator(rng).random((int(n), int(d)))
    return half_width * (2.0 * u - 1.0)


def std_normal(n: int, d: int, rng: Rng) -> np.ndarray:
    _check_count(n, d)
    return as_generator(rng).standard_normal((int(n), int(d)))


def sobol_unit(n: int, d: int, skip: int = 0) -> np.ndarray:
    """First ``n`` points (after ``skip``) of the unscrambled Sobol sequence."""
    _check_count(n, d)
    if d > SOBOL_MAX_DIM:
        raise DimensionError(f"Sobol direction numbers cover at most {SOBOL_MAX_DIM} dimensions")
    eng = qmc.Sobol(int(d), scramble=False)
    if skip:
        eng.fast_forward(int(skip))
    with warnings.catch_warnings():
        # balance warnings for non power-of-two n are expected here
        warnings.simplefilter("ignore", UserWarning)
        return eng.random(int(n))


def inverse_normal_cdf(p):
    """Standard normal quantile; raises for p outside the open unit interval."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("probabilities must lie strictly inside (0, 1)")
    out = ndtri(p)
    return out if out.ndim else float(out)


class BlockSampler:
    """Draws named blocks of unit-uniform or normal samples for one consumer.

    Pseudo kinds consume a single generator in call order. Sobol kinds
    allocate disjoint coordinate ranges of one Sobol sequence so that
    blocks drawn for the same consumer are not copies of each other.
    Normal blocks from Sobol skip the all-zeros first point, which has no
    finite normal image.
    """

    def __init__(self, kind: SamplerKind, rng: Rng | None = None):
        self.kind = SamplerKind.parse(kind)
        self._gen = None if self.kind.is_sobol else as_generator(0 if rng is None else rng)
        self._next_dim = 0

    def _sobol_block(self, n, d, skip):
        lo = self._next_dim
        self._next_dim += d
        return sobol_unit(n, lo + d, skip=skip)[:, lo:]

    def uniform(self, n: int, d: int) -> np.ndarray:
        if n == 0:
            return np.empty((0, d))
        if self.kind.is_sobol:
            return self._sobol_block(n, d, skip=0)
        return self._gen.random((n, d))

    def normal(self, n: int, d: int) -> np.ndarray:
        if n == 0:
            return np.empty((0, d))
        if self.kind.is_sobol:
            return inverse_normal_cdf(self._sobol_block(n, d, skip=1))
        return self._gen.standard_normal((n, d))

    def uniform_normal(self, n: int, du: int, dn: int):
        """Jointly drawn (uniform, normal) blocks sharing point indices."""
        if n == 0:
            return np.empty((0, du)), np.empty((0, dn))
        if self.kind.is_sobol:
            block = self._sobol_block(n, du + dn, skip=1)
            return block[:, :du], inverse_normal_cdf(block[:, du:])
        return self._gen.random((n, du)), self._gen.standard_normal((n, dn))
