"""Analytic and random divergence-free field constructors."""

from __future__ import annotations

import numpy as np
import scipy.fft as _fft

from .errors import ConfigurationError
from .spectral import (
    GridSpec,
    SpectralField,
    leray_project,
    l2_norm,
    to_spectral,
    PhysicalField,
    v_norm,
)


def taylor_green(grid: GridSpec, amplitude: float = 1.0) -> SpectralField:
    """Taylor-Green vortex, divergence-free by construction.

    u = A (sin x' cos y' cos z', -cos x' sin y' cos z', 0) with coordinates
    scaled to one full period across the box.
    """
    x, y, z = grid.mesh()
    s = 2.0 * np.pi / grid.length
    values = np.stack(
        [
            np.sin(s * x) * np.cos(s * y) * np.cos(s * z),
            -np.cos(s * x) * np.sin(s * y) * np.cos(s * z),
            np.zeros_like(x),
        ]
    )
    field = to_spectral(PhysicalField(grid, amplitude * values))
    # analytically solenoidal; projection only tags the flag and strips roundoff
    return leray_project(field)


def single_mode(grid: GridSpec, mode, direction, amplitude: float = 1.0) -> SpectralField:
    """amplitude * direction * sin(k.x) for an integer wavevector ``mode``.

    ``direction`` must be orthogonal to ``mode`` for the result to be
    divergence-free; inputs are Leray-projected, so a non-orthogonal
    direction simply loses its parallel part.
    """
    mode = np.asarray(mode, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if mode.shape != (3,) or direction.shape != (3,):
        raise ConfigurationError("mode and direction must be 3-vectors")
    x, y, z = grid.mesh()
    s = 2.0 * np.pi / grid.length
    phase = s * (mode[0] * x + mode[1] * y + mode[2] * z)
    values = amplitude * direction[:, None, None, None] * np.sin(phase)[None]
    return leray_project(to_spectral(PhysicalField(grid, values)))


def random_solenoidal(
    grid: GridSpec,
    seed: int,
    band: int | None = None,
    amplitude: float = 1.0,
    normalize: str = "v",
) -> SpectralField:
    """Seeded random divergence-free field, band-limited to |k_i| <= band.

    The default band n/4 keeps quadratic products alias-free under either
    dealiasing rule.  ``normalize`` picks the norm scaled to ``amplitude``:
    "v" (gradient norm), "l2", or "none".
    """
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.shape)
    coeffs = _fft.fftn(noise, axes=(-3, -2, -1)) / grid.n**3

    if band is None:
        band = max(1, grid.n // 4)
    band = min(band, grid.max_mode)
    keep = np.abs(grid.modes) <= band
    mask = keep[:, None, None] & keep[None, :, None] & keep[None, None, :]
    field = leray_project(SpectralField(grid, coeffs * mask))

    if normalize == "v":
        scale = v_norm(field)
    elif normalize == "l2":
        scale = l2_norm(field)
    elif normalize == "none":
        scale = 1.0
    else:
        raise ConfigurationError(f"unknown normalization {normalize!r}")
    if scale == 0.0:
        return field
    return field * (amplitude / scale)


def random_control_slice(grid: GridSpec, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    """Smooth random physical control values (not solenoidal on purpose)."""
    coeffs = _fft.fftn(rng.standard_normal(grid.shape), axes=(-3, -2, -1)) / grid.n**3
    band = max(1, grid.n // 4)
    keep = np.abs(grid.modes) <= band
    mask = keep[:, None, None] & keep[None, :, None] & keep[None, None, :]
    values = _fft.ifftn(coeffs * mask * grid.n**3, axes=(-3, -2, -1)).real
    peak = np.max(np.abs(values))
    if peak > 0:
        values *= amplitude / peak
    return values
