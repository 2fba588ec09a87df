"""Binary model container.

Layout::

    b"HEATNET1\\n"
    uint64 LE   header length
    header      UTF-8 JSON (format version, config, sampler, seed, variant,
                problem description and fingerprint, array directory)
    per array:  uint64 LE element count, then float64 LE values

Arrays appear in the order listed in the header directory.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ModelFormatError
from .features import FeatureBank
from .problem import BenchmarkParams, ProblemSpec, make_benchmark
from .sampling import RNG_ALGORITHM, SamplerKind
from .trainer import TrainConfig, TrainedModel

MAGIC = b"HEATNET1\n"
FORMAT_VERSION = 1
_ARRAYS = ("y", "z", "tau", "eta", "r", "xi", "weights")
_LE_F8 = np.dtype("<f8")


def _header(m: TrainedModel) -> dict:
    b = m.bank
    arrays = {**b.arrays(), "weights": m.weights}
    return {
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "variant": b.variant,
        "sampler": b.sampler.value,
        "seed": m.config.seed,
        "bank_seed": b.seed,  # None for Sobol banks, which ignore the seed
        "is_scale": b.is_scale,
        "trunc_upper": b.trunc_upper,
        "fingerprint": b.fingerprint,
        "problem": m.problem.describe(),
        "config": m.config.to_dict(),
        "diagnostics": {k: v for k, v in m.diagnostics.items() if isinstance(v, (int, float, str))},
        "arrays": [{"name": k, "shape": list(arrays[k].shape)} for k in _ARRAYS],
    }


def save_model(m: TrainedModel, path) -> None:
    b = m.bank
    arrays = {**b.arrays(), "weights": m.weights}
    head = json.dumps(_header(m), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for name in _ARRAYS:
            a = np.ascontiguousarray(arrays[name], dtype=_LE_F8).ravel()
            fh.write(struct.pack("<Q", a.size))
            fh.write(a.tobytes())


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise ModelFormatError(f"truncated model file while reading {what}")
    return data


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    if _read_exact(fh, len(MAGIC), "magic") != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    (n,) = struct.unpack("<Q", _read_exact(fh, 8, "header length"))
    try:
        head = json.loads(_read_exact(fh, n, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable header: {exc}") from exc
    if head.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {head.get('format_version')!r}")
    return head


def problem_from_description(desc: dict) -> ProblemSpec:
    """Rebuild a catalog problem from :meth:`ProblemSpec.describe` output."""
    params = desc.get("params")
    if params is None:
        raise ModelFormatError("model was trained on a custom problem; pass it explicitly")
    return make_benchmark(
        BenchmarkParams(**params),
        d=desc["d"], D=desc["D"], T=desc["T"], A=desc["A"],
        A_train=desc["A_train"], A_test=desc["A_test"],
    )


def load_model(path, problem: Optional[ProblemSpec] = None, allow_mismatch: bool = False) -> TrainedModel:
    """Read a model; the problem is rebuilt from the header unless given.

    A fingerprint mismatch between header and problem raises unless
    ``allow_mismatch`` is set.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = _read_header(fh)
        arrays = {}
        for entry in head["arrays"]:
            (count,) = struct.unpack("<Q", _read_exact(fh, 8, f"{entry['name']} length"))
            shape = tuple(entry["shape"])
            if count != int(np.prod(shape)):
                raise ModelFormatError(f"array {entry['name']} length {count} does not match shape {shape}")
            raw = _read_exact(fh, 8 * count, entry["name"])
            arrays[entry["name"]] = np.frombuffer(raw, dtype=_LE_F8).astype(float).reshape(shape)
        if fh.read(1):
            raise ModelFormatError("trailing bytes after last array")
    if problem is None:
        problem = problem_from_description(head["problem"])
    if problem.fingerprint != head["fingerprint"] and not allow_mismatch:
        raise ModelFormatError(
            f"problem fingerprint {problem.fingerprint} does not match model ({head['fingerprint']})"
        )
    desc = head["problem"]
    bank = FeatureBank(
        variant=head["variant"], d=desc["d"], D=desc["D"], T=desc["T"], A=desc["A"],
        y=arrays["y"], z=arrays["z"], tau=arrays["tau"], eta=arrays["eta"],
        r=arrays["r"], xi=arrays["xi"], is_scale=head["is_scale"],
        sampler=SamplerKind(head["sampler"]), seed=head["bank_seed"],
        fingerprint=problem.fingerprint if allow_mismatch else head["fingerprint"],
        trunc_upper=head["trunc_upper"],
    )
    cfg = TrainConfig(**head["config"])
    return TrainedModel(problem, bank, arrays["weights"], cfg, dict(head.get("diagnostics", {})))
