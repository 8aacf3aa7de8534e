import json

import numpy as np
import pytest

from stochheat.covariance import Kernel, assemble_covariance, factorize
from stochheat.errors import ConfigurationError
from stochheat.harness import ErrorRecord
from stochheat.io import (
    HIERARCHY_MAGIC,
    fmt,
    read_covariance_csv,
    read_errors_csv,
    read_hierarchy,
    read_matrix,
    read_trajectory_binary,
    write_covariance_csv,
    write_errors_csv,
    write_hierarchy,
    write_trajectory_binary,
    write_trajectory_csv,
)
from stochheat.noise import ou_path_exact, sample_brownian
from stochheat.scheme import Nonlinearity, SchemeConfig, simulate, two_mode_initial_condition


@pytest.fixture(scope="module")
def factor():
    return factorize(assemble_covariance(Kernel.q2(0.1), 8))


@pytest.fixture(scope="module")
def traj(factor):
    ou = ou_path_exact(sample_brownian(factor, 64, 1.0, 0))
    return simulate(SchemeConfig(8, 64), Nonlinearity.rational5(), two_mode_initial_condition(8), ou)


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, np.pi):
        assert float(fmt(x)) == x


def test_hierarchy_round_trip(tmp_path, factor):
    h = sample_brownian(factor, 32, 1.0, 9)
    path = tmp_path / "h.bin"
    write_hierarchy(path, h)
    raw = path.read_bytes()
    assert raw[:8] == HIERARCHY_MAGIC
    assert int.from_bytes(raw[8:16], "little") == 32
    assert int.from_bytes(raw[16:24], "little") == 8
    meta = json.loads((tmp_path / "h.bin.json").read_text())
    assert meta["seed"] == 9 and meta["sigma_sha256"] == factor.covariance.digest()
    back = read_hierarchy(path, factor)
    assert np.array_equal(back.increments, h.increments)
    assert back.digest() == h.digest()
    other = factorize(assemble_covariance(Kernel.q2(0.2), 8))
    with pytest.raises(ConfigurationError):
        read_hierarchy(path, other)


def test_matrix_reader_rejects_bad_files(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"BADMAGIC" + bytes(16))
    with pytest.raises(ConfigurationError):
        read_matrix(p, HIERARCHY_MAGIC)
    p.write_bytes(b"abc")
    with pytest.raises(ConfigurationError):
        read_matrix(p, HIERARCHY_MAGIC)


def test_trajectory_binary_round_trip(tmp_path, traj):
    path = tmp_path / "t.bin"
    write_trajectory_binary(path, traj, extra={"seed": 0})
    coeffs, meta = read_trajectory_binary(path)
    assert np.array_equal(coeffs, traj.coefficients)
    assert meta["noise_hash"] == traj.noise_hash and meta["seed"] == 0


def test_trajectory_csv(tmp_path, traj):
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj, every=10)
    lines = path.read_text().splitlines()
    g = traj.eval_grid
    assert lines[0].split(",") == ["t"] + [f"x_{j}" for j in range(1, g + 1)]
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    assert [r[0] for r in rows] == pytest.approx([m / 64 for m in (0, 10, 20, 30, 40, 50, 60, 64)])
    vals = traj.grid_values()
    assert np.array_equal(np.array(rows[-1][1:]), vals[-1])
    meta = json.loads((tmp_path / "t.csv.json").read_text())
    assert meta["grid_points"] == g and meta["noise_hash"] == traj.noise_hash


def test_covariance_csv(tmp_path):
    cov = assemble_covariance(Kernel.q2(0.1), 5)
    path = tmp_path / "c.csv"
    write_covariance_csv(path, cov)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,l,value" and len(lines) == 26
    assert np.array_equal(read_covariance_csv(path), cov.entries)


def test_errors_csv(tmp_path):
    recs = [ErrorRecord(16, 256, 0, 0.125, 1.5, "h"), ErrorRecord(32, 1024, 0, 0.0625, 2.5, "h")]
    p = tmp_path / "e.csv"
    write_errors_csv(p, recs)
    assert p.read_text().splitlines() == [
        "seed,N,M,sup_error,runtime_s",
        "0,16,256,0.125,nan",
        "0,32,1024,0.0625,nan",
    ]
    write_errors_csv(p, recs, include_runtime=True)
    back = read_errors_csv(p)
    assert back[1]["runtime_s"] == 2.5 and back[0]["sup_error"] == 0.125
