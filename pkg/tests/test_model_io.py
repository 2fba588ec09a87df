import json
import struct

import numpy as np
import pytest

from heatnet.errors import ModelFormatError
from heatnet.model_io import MAGIC, load_model, read_header, save_model
from heatnet.problem import ProblemSpec, constant_field, make_benchmark
from heatnet.trainer import TrainConfig, train


@pytest.fixture(scope="module")
def trained():
    p = make_benchmark("ex3", d=3)
    return train(p, TrainConfig(M0=20, M1=30, N_pde=600, N_ic=150, ridge=1e-6, variant="gaussian",
                                sampler="sobol_uniform", seed=4))


def test_round_trip_bit_exact(trained, tmp_path):
    path = tmp_path / "m.bin"
    save_model(trained, path)
    back = load_model(path)
    g = np.random.default_rng(0)
    t, x = g.random(200) * trained.problem.horizon, g.normal(size=(200, 3))
    assert np.array_equal(back.predict(t, x), trained.predict(t, x))
    assert np.array_equal(back.weights, trained.weights)
    assert back.config == trained.config
    for k, v in trained.bank.arrays().items():
        assert np.array_equal(back.bank.arrays()[k], v)


def test_header_contents(trained, tmp_path):
    path = tmp_path / "m.bin"
    save_model(trained, path)
    head = read_header(path)
    assert head["variant"] == "gaussian" and head["sampler"] == "sobol_uniform" and head["seed"] == 4
    assert head["fingerprint"] == trained.problem.fingerprint
    assert [a["name"] for a in head["arrays"]][-1] == "weights"
    raw = path.read_bytes()
    assert raw.startswith(MAGIC)
    (n,) = struct.unpack("<Q", raw[len(MAGIC): len(MAGIC) + 8])
    json.loads(raw[len(MAGIC) + 8: len(MAGIC) + 8 + n])


def test_identical_saves_are_byte_identical(trained, tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    save_model(trained, a)
    save_model(trained, b)
    assert a.read_bytes() == b.read_bytes()


def test_fingerprint_mismatch(trained, tmp_path):
    path = tmp_path / "m.bin"
    save_model(trained, path)
    other = make_benchmark("ex3", d=3, D=2.0)
    with pytest.raises(ModelFormatError, match="fingerprint"):
        load_model(path, other)
    m = load_model(path, other, allow_mismatch=True)
    assert m.problem is other


@pytest.mark.parametrize(
    "mutate,match",
    [
        (lambda b: b"NOTMODEL\n" + b[9:], "magic"),
        (lambda b: b[:-8], "truncated"),
        (lambda b: b + b"\0", "trailing"),
        (lambda b: b[:20], "truncated"),
    ],
)
def test_corrupt_files_rejected(trained, tmp_path, mutate, match):
    path = tmp_path / "m.bin"
    save_model(trained, path)
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(ModelFormatError, match=match):
        load_model(path)


def test_version_mismatch_rejected(trained, tmp_path):
    path = tmp_path / "m.bin"
    save_model(trained, path)
    raw = path.read_bytes()
    (n,) = struct.unpack("<Q", raw[9:17])
    head = json.loads(raw[17: 17 + n])
    head["format_version"] = 99
    new = json.dumps(head).encode()
    path.write_bytes(MAGIC + struct.pack("<Q", len(new)) + new + raw[17 + n:])
    with pytest.raises(ModelFormatError, match="version"):
        load_model(path)


def test_custom_problem_needs_explicit_problem(tmp_path):
    p = ProblemSpec(1, 1.0, 1.0, 3.0, 3.0, constant_field(1.0, 1), constant_field(0.0, 1))
    m = train(p, TrainConfig(M0=3, M1=3, N_pde=30, N_ic=10))
    path = tmp_path / "c.bin"
    save_model(m, path)
    with pytest.raises(ModelFormatError, match="custom"):
        load_model(path)
    back = load_model(path, p)
    assert np.array_equal(back.predict(np.array([0.5]), np.array([[0.1]])), m.predict(np.array([0.5]), np.array([[0.1]])))
