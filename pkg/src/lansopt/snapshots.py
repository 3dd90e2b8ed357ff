"""Field snapshot files and trajectory checkpoints.

Snapshot format: one ASCII header line

    LANSA1 <n> <domain_length> <phys|spec>

followed by raw little-endian binary, component-major with x varying
fastest: 64-bit floats for physical fields, interleaved real/imag 64-bit
pairs for spectral coefficients.

A trajectory checkpoint is a directory of snapshot files plus a
``manifest.txt`` of ``key = value`` lines under ``[section]`` headers
recording the grid, the physics parameters, and a hash of the control
that produced the trajectory.
"""

from __future__ import annotations

import hashlib
import os
from typing import Dict, List, Optional

import numpy as np

from .errors import ConfigurationError
from .spectral import (
    GridSpec,
    PhysicalField,
    SpectralField,
    is_divergence_free,
)

MAGIC = "LANSA1"


def _flatten(values: np.ndarray) -> np.ndarray:
    # component-major, x fastest: reverse the spatial axes so that a C
    # ravel walks x innermost
    return values.transpose(0, 3, 2, 1).ravel()


def _unflatten(flat: np.ndarray, n: int) -> np.ndarray:
    return flat.reshape(3, n, n, n).transpose(0, 3, 2, 1)


def write_snapshot(path: str, field) -> None:
    """Write a PhysicalField or SpectralField to ``path``."""
    if isinstance(field, PhysicalField):
        rep, data = "phys", _flatten(field.values).astype("<f8")
    elif isinstance(field, SpectralField):
        rep, data = "spec", _flatten(field.coeffs).astype("<c16")
    else:
        raise ConfigurationError(f"cannot write a {type(field).__name__} snapshot")
    header = f"{MAGIC} {field.grid.n} {field.grid.length!r} {rep}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())


def read_snapshot(path: str, grid: Optional[GridSpec] = None):
    """Read a snapshot; returns PhysicalField or SpectralField.

    When ``grid`` is given the file must match its resolution and box
    size, and the returned field is attached to it (so time-stepping
    metadata carries over).  Otherwise a minimal grid is synthesized.
    """
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        payload = fh.read()
    parts = header.split()
    if len(parts) != 4 or parts[0] != MAGIC:
        raise ConfigurationError(f"{path}: not a {MAGIC} snapshot (header {header!r})")
    n, length, rep = int(parts[1]), float(parts[2]), parts[3]
    if grid is None:
        grid = GridSpec(n=n, dt=1.0, n_steps=1, length=length)
    elif grid.n != n or abs(grid.length - length) > 1e-12 * max(1.0, abs(length)):
        raise ConfigurationError(
            f"{path}: snapshot grid (n={n}, L={length}) does not match the configured grid"
        )

    if rep == "phys":
        flat = np.frombuffer(payload, dtype="<f8")
        if flat.size != 3 * n**3:
            raise ConfigurationError(f"{path}: truncated physical snapshot")
        return PhysicalField(grid, _unflatten(flat.astype(float), n))
    if rep == "spec":
        flat = np.frombuffer(payload, dtype="<c16")
        if flat.size != 3 * n**3:
            raise ConfigurationError(f"{path}: truncated spectral snapshot")
        coeffs = _unflatten(flat.astype(complex), n)
        field = SpectralField(grid, coeffs)
        field.divergence_free = is_divergence_free(field)
        return field
    raise ConfigurationError(f"{path}: unknown representation {rep!r}")


def control_hash(stacked: np.ndarray) -> str:
    """sha256 of the control values, layout-normalized."""
    return hashlib.sha256(np.ascontiguousarray(stacked).astype("<f8").tobytes()).hexdigest()


def write_manifest(path: str, sections: Dict[str, Dict[str, object]]) -> None:
    lines: List[str] = []
    for name, entries in sections.items():
        lines.append(f"[{name}]")
        for key, value in entries.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def read_manifest(path: str) -> Dict[str, Dict[str, str]]:
    sections: Dict[str, Dict[str, str]] = {}
    current: Optional[Dict[str, str]] = None
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = sections.setdefault(line[1:-1], {})
                continue
            if current is None or "=" not in line:
                raise ConfigurationError(f"{path}: malformed manifest line {line!r}")
            key, value = line.split("=", 1)
            current[key.strip()] = value.strip()
    return sections


def write_trajectory(directory: str, traj, control_stacked: Optional[np.ndarray] = None) -> None:
    """Checkpoint a state or adjoint trajectory into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    grid = traj.grid
    for idx, snap in enumerate(traj.snapshots):
        write_snapshot(os.path.join(directory, f"snapshot_{idx:05d}.dat"), snap)
    manifest = {
        "grid": {
            "n": grid.n,
            "length": repr(grid.length),
            "dealias": grid.dealias,
            "dt": repr(grid.dt),
            "n_steps": grid.n_steps,
        },
        "physics": {
            "alpha": repr(getattr(traj, "alpha", "")),
            "nu": repr(getattr(traj, "nu", "")),
        },
        "control": {
            "sha256": control_hash(control_stacked) if control_stacked is not None else "none",
        },
    }
    write_manifest(os.path.join(directory, "manifest.txt"), manifest)


def read_trajectory_snapshots(directory: str, grid: GridSpec) -> List[SpectralField]:
    names = sorted(
        name for name in os.listdir(directory) if name.startswith("snapshot_") and name.endswith(".dat")
    )
    if not names:
        raise ConfigurationError(f"{directory}: no snapshot files")
    fields = []
    for name in names:
        field = read_snapshot(os.path.join(directory, name), grid)
        if isinstance(field, PhysicalField):
            raise ConfigurationError(f"{directory}/{name}: expected spectral snapshots")
        fields.append(field)
    return fields
