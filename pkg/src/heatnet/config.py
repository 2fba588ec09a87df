"""Run configuration: flat ``section.key = value`` text files plus overrides.

Example file::

    # ex2b in ten dimensions
    problem.example = ex2b
    problem.d = 10
    train.M0 = 500
    train.seed = 3
    run.repeat = 5

Blank lines and ``#`` comments are ignored. A bare key (``seed``) is
accepted when it names exactly one dotted key. Unknown keys, malformed
values and violated constraints raise :class:`ConfigError` naming the key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError, HeatnetError
from .metrics import TEST_MODES
from .problem import BENCHMARKS, BenchmarkParams, ProblemSpec, make_benchmark
from .sampling import SamplerKind
from .trainer import COLLOCATIONS, SOLVERS, TrainConfig
from .features import IS_SCALES, VARIANTS


def _optional(conv):
    def parse(text):
        if str(text).strip().lower() in ("", "none", "null", "auto"):
            return None
        return conv(text)

    return parse


def _bool(text):
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    v = float(text) if isinstance(text, str) and ("e" in text.lower() or "." in text) else text
    if isinstance(v, float) and not v.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _choice(options):
    def parse(text):
        s = str(text).strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s

    return parse


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _sampler(text):
    try:
        return SamplerKind.parse(text).value
    except ValueError:
        raise ValueError(f"unknown sampler {text!r}") from None


# key -> (parser, default); defaults of None are filled per example
SCHEMA: dict[str, tuple[Callable[[Any], Any], Any]] = {
    "problem.example": (_choice(BENCHMARKS), "ex1"),
    "problem.d": (_optional(_int), None),
    "problem.D": (float, 1.0),
    "problem.T": (_optional(float), None),
    "problem.A": (_optional(float), None),
    "problem.A_train": (_optional(float), None),
    "problem.A_test": (_optional(float), None),
    "problem.k": (_int, 2),
    "problem.m": (_int, 3),
    "problem.c": (_optional(_floats), None),
    "problem.alpha_q": (float, 1.0),
    "problem.beta_E": (float, 1.0),
    "train.M0": (_optional(_int), None),
    "train.M1": (_optional(_int), None),
    "train.N_pde": (_optional(_int), None),
    "train.N_ic": (_optional(_int), None),
    "train.ic_weight": (_optional(float), None),
    "train.ridge": (_optional(float), None),
    "train.sampler": (_sampler, "pseudo_uniform"),
    "train.seed": (_int, 0),
    "train.t_floor": (_optional(float), None),
    "train.solver": (_optional(_choice(SOLVERS)), None),
    "train.variant": (_optional(_choice(VARIANTS)), None),
    "train.is_scale": (_choice(tuple(IS_SCALES)), "sqrt2Dt"),
    "train.collocation": (_optional(_choice(COLLOCATIONS)), None),
    "train.rcond": (_optional(float), None),
    "test.n": (_optional(_int), None),
    "test.mode": (_optional(_choice(TEST_MODES)), None),
    "test.seed": (_int, 0),
    "mc.M0": (_int, 100_000),
    "mc.M1": (_int, 100_000),
    "mc.mode": (_choice(("importance", "transformed")), "importance"),
    "mc.t": (_optional(float), None),
    "mc.x": (_optional(_floats), None),
    "run.repeat": (_int, 1),
    "run.out": (str, "-"),
    "run.model": (_optional(str), None),
    "run.report_timings": (_bool, False),
}

# defaults drawn from the experiments each benchmark reproduces
EXAMPLE_DEFAULTS = {
    "ex1": dict(d=1, T=1.0, M0=32, M1=64, N_pde=3000, N_ic=1000, ic_weight=3.0, ridge=0.0,
                variant="gaussian", test_n=10000, test_mode="grid_1d"),
    "ex2a": dict(d=2, T=0.05, M0=15000, M1=0, N_pde=20000, N_ic=4000, ic_weight=5.0, ridge=1e-6,
                 variant="importance", test_n=6000, test_mode="random_box"),
    "ex2b": dict(d=10, T=0.5, M0=500, M1=1000, N_pde=10000, N_ic=2000, ic_weight=5.0, ridge=1e-6,
                 variant="importance", test_n=6000, test_mode="random_box"),
    "ex3": dict(d=10, T=0.5, M0=4000, M1=6000, N_pde=15000, N_ic=3000, ic_weight=5.0, ridge=1e-6,
                variant="importance", test_n=6000, test_mode="random_box"),
}


def _resolve_key(key: str) -> str:
    key = key.strip()
    if key in SCHEMA:
        return key
    hits = [k for k in SCHEMA if k.split(".", 1)[1] == key]
    if len(hits) == 1:
        return hits[0]
    if hits:
        raise ConfigError(key, f"ambiguous key; use one of {', '.join(hits)}")
    raise ConfigError(key, "unknown key")


def parse_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a {dotted key: raw string} mapping."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[_resolve_key(key)] = value
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[_resolve_key(key)]

    @property
    def example(self) -> str:
        return self.values["problem.example"]

    def problem(self) -> ProblemSpec:
        v = self.values
        params = BenchmarkParams(
            v["problem.example"], k=v["problem.k"], m=v["problem.m"], c=v["problem.c"],
            alpha_q=v["problem.alpha_q"], beta_E=v["problem.beta_E"],
        )
        try:
            return make_benchmark(
                params, d=v["problem.d"], D=v["problem.D"], T=v["problem.T"], A=v["problem.A"],
                A_train=v["problem.A_train"], A_test=v["problem.A_test"],
            )
        except HeatnetError as exc:
            raise ConfigError("problem", str(exc)) from exc
        except ValueError as exc:
            raise ConfigError("problem", str(exc)) from exc

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        v = self.values
        return TrainConfig(
            M0=v["train.M0"], M1=v["train.M1"], N_pde=v["train.N_pde"], N_ic=v["train.N_ic"],
            ic_weight=v["train.ic_weight"], ridge=v["train.ridge"], sampler=v["train.sampler"],
            seed=v["train.seed"] if seed is None else seed, t_floor=v["train.t_floor"],
            solver=v["train.solver"], variant=v["train.variant"], is_scale=v["train.is_scale"],
            collocation=v["train.collocation"], rcond=v["train.rcond"],
        )

    def seeds(self):
        s = self.values["train.seed"]
        return list(range(s, s + self.values["run.repeat"]))

    def echo(self):
        """Sorted ``key = value`` lines describing the resolved configuration."""
        return [f"{k} = {_fmt(self.values[k])}" for k in sorted(self.values)]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ",".join(repr(float(x)) for x in v)
    return str(v)


def build_config(raw: dict) -> RunConfig:
    """Type-convert raw values, fill defaults and check cross-key constraints."""
    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, str(exc)) from None
        else:
            values[key] = default
    ex = EXAMPLE_DEFAULTS[values["problem.example"]]
    for short in ("d", "T"):
        if values[f"problem.{short}"] is None:
            values[f"problem.{short}"] = ex[short]
    for short in ("M0", "M1", "N_pde", "N_ic", "ic_weight", "ridge", "variant"):
        if values[f"train.{short}"] is None:
            values[f"train.{short}"] = ex[short]
    if values["test.n"] is None:
        values["test.n"] = ex["test_n"]
    if values["test.mode"] is None:
        values["test.mode"] = ex["test_mode"] if values["problem.d"] == 1 else "random_box"
    if values["problem.A"] is None:
        values["problem.A"] = math.pi
    if values["problem.A_train"] is None:
        values["problem.A_train"] = values["problem.A"]
    _check(values)
    cfg = RunConfig(values)
    cfg.train_config()  # surfaces TrainConfig constraint errors now
    return cfg


def _check(v):
    positive = ("problem.d", "problem.D", "problem.T", "problem.A", "problem.A_train", "test.n", "run.repeat")
    for key in positive:
        if not v[key] > 0:
            raise ConfigError(key, "must be positive")
    if v["problem.A_train"] > v["problem.A"]:
        raise ConfigError("problem.A_train", "training half-width exceeds A")
    if v["problem.A_test"] is not None and not 0 < v["problem.A_test"] <= v["problem.A"]:
        raise ConfigError("problem.A_test", "test half-width must lie in (0, A]")
    if v["problem.example"] == "ex1" and v["problem.d"] != 1:
        raise ConfigError("problem.d", "ex1 is one-dimensional")
    if v["test.mode"] == "grid_1d" and v["problem.d"] != 1:
        raise ConfigError("test.mode", "grid_1d needs d = 1")
    if v["mc.M0"] < 1 or v["mc.M1"] < 1:
        raise ConfigError("mc.M0", "sample counts must be positive")
    if v["mc.x"] is not None and len(v["mc.x"]) != v["problem.d"]:
        raise ConfigError("mc.x", f"expected {v['problem.d']} coordinates")


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Read ``path`` (optional) and apply ``overrides`` (dotted or bare keys)."""
    raw = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {p}: {exc.strerror}") from None
        raw.update(parse_text(text, str(p)))
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[_resolve_key(key)] = value
    return build_config(raw)
