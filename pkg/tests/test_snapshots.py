"""Snapshot file format, manifests, trajectory checkpoints."""

import os

import numpy as np
import pytest

from lansopt.control import ControlField, ProblemConfig
from lansopt.errors import ConfigurationError
from lansopt.fields import random_solenoidal, taylor_green
from lansopt.forward import solve_forward
from lansopt.snapshots import (
    control_hash,
    read_manifest,
    read_snapshot,
    read_trajectory_snapshots,
    write_manifest,
    write_snapshot,
    write_trajectory,
)
from lansopt.spectral import GridSpec, PhysicalField, to_physical, zero_spectral


def test_physical_round_trip(tmp_path, grid):
    rng = np.random.default_rng(0)
    field = PhysicalField(grid, rng.standard_normal(grid.shape))
    path = str(tmp_path / "phys.dat")
    write_snapshot(path, field)
    back = read_snapshot(path, grid)
    assert isinstance(back, PhysicalField)
    assert np.array_equal(back.values, field.values)


def test_spectral_round_trip_marks_divergence(tmp_path, grid):
    field = random_solenoidal(grid, seed=1)
    path = str(tmp_path / "spec.dat")
    write_snapshot(path, field)
    back = read_snapshot(path, grid)
    assert np.array_equal(back.coeffs, field.coeffs)
    assert back.divergence_free


def test_header_contents(tmp_path, grid):
    path = str(tmp_path / "f.dat")
    write_snapshot(path, taylor_green(grid, 0.5))
    with open(path, "rb") as fh:
        header = fh.readline().decode().split()
    assert header[0] == "LANSA1"
    assert int(header[1]) == grid.n
    assert float(header[2]) == pytest.approx(grid.length)
    assert header[3] == "spec"


def test_layout_is_component_major_x_fastest(tmp_path, grid):
    # value at (component c, ix, iy, iz) lands at c*n^3 + iz*n^2 + iy*n + ix
    values = np.zeros(grid.shape)
    values[1, 3, 0, 0] = 7.0
    path = str(tmp_path / "layout.dat")
    write_snapshot(path, PhysicalField(grid, values))
    with open(path, "rb") as fh:
        fh.readline()
        flat = np.frombuffer(fh.read(), dtype="<f8")
    n = grid.n
    assert flat[1 * n**3 + 3] == 7.0
    assert np.count_nonzero(flat) == 1


def test_wrong_grid_rejected(tmp_path, grid):
    path = str(tmp_path / "f.dat")
    write_snapshot(path, taylor_green(grid, 0.5))
    other = GridSpec(n=16, dt=grid.dt, n_steps=grid.n_steps)
    with pytest.raises(ConfigurationError):
        read_snapshot(path, other)


def test_garbage_header_rejected(tmp_path):
    path = str(tmp_path / "junk.dat")
    with open(path, "wb") as fh:
        fh.write(b"NOTAFORMAT 1 2 3\n")
    with pytest.raises(ConfigurationError):
        read_snapshot(path)


def test_truncated_payload_rejected(tmp_path, grid):
    path = str(tmp_path / "short.dat")
    write_snapshot(path, taylor_green(grid, 0.5))
    data = open(path, "rb").read()
    with open(path, "wb") as fh:
        fh.write(data[:-16])
    with pytest.raises(ConfigurationError):
        read_snapshot(path, grid)


def test_trajectory_checkpoint_round_trip(tmp_path, grid, plain_cfg):
    control = ControlField.zeros(grid)
    traj = solve_forward(taylor_green(grid, 0.4), control, plain_cfg)
    directory = str(tmp_path / "traj")
    write_trajectory(directory, traj, control.stacked)

    manifest = read_manifest(os.path.join(directory, "manifest.txt"))
    assert int(manifest["grid"]["n"]) == grid.n
    assert int(manifest["grid"]["n_steps"]) == grid.n_steps
    assert manifest["control"]["sha256"] == control_hash(control.stacked)

    snapshots = read_trajectory_snapshots(directory, grid)
    assert len(snapshots) == grid.n_steps + 1
    for original, loaded in zip(traj.snapshots, snapshots):
        assert np.array_equal(original.coeffs, loaded.coeffs)


def test_control_hash_distinguishes(grid):
    a = np.zeros((grid.n_steps,) + grid.shape)
    b = a.copy()
    b[0, 0, 0, 0, 0] = 1e-300
    assert control_hash(a) != control_hash(b)
    assert control_hash(a) == control_hash(a.copy())


def test_manifest_round_trip(tmp_path):
    path = str(tmp_path / "m.txt")
    sections = {"alpha": {"x": "1.5", "note": "free text = allowed"}, "beta": {"k": "v"}}
    write_manifest(path, sections)
    back = read_manifest(path)
    assert back["alpha"]["x"] == "1.5"
    assert back["alpha"]["note"] == "free text = allowed"
    assert back["beta"]["k"] == "v"
