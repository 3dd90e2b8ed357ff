"""State solver: nonlinearity, IMEX time stepper, and the tangent solver.

The momentum equation advanced here is

    filtered(u)_t + nu * filtered(A u) + B(u, u) = P v,

with the Helmholtz filter and Stokes operator diagonal in Fourier space.
One step treats the linear terms implicitly and the nonlinearity
explicitly; since the filter commutes with the time derivative and the
dissipation, it cancels from the implicit part and only divides the
explicit sources.  The tangent solver reuses the identical update with the
nonlinearity replaced by its derivative, which keeps the discrete adjoint
an exact transpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .control import ControlField, ProblemConfig
from .errors import BlowUpError, ConfigurationError
from .spectral import (
    GridSpec,
    SpectralField,
    _require_divergence_free,
    fine_values,
    l2_norm,
    leray_project,
    require_same_grid,
    spectrum_from_fine,
    to_spectral,
)

#: blow-up guard: ||u_n|| may not exceed AMPLITUDE_GUARD * ||u_0|| + 1
AMPLITUDE_GUARD = 1e6


@dataclass(eq=False)
class StateTrajectory:
    """Snapshots of the state at t_n = n*dt, n = 0..n_steps."""

    grid: GridSpec
    snapshots: List[SpectralField]
    alpha: float
    nu: float

    def __post_init__(self):
        if len(self.snapshots) != self.grid.n_steps + 1:
            raise ConfigurationError(
                f"trajectory needs {self.grid.n_steps + 1} snapshots, got {len(self.snapshots)}"
            )

    def final(self) -> SpectralField:
        return self.snapshots[-1]


def bilinear_B(u: SpectralField, v: SpectralField, alpha: float) -> SpectralField:
    """The model nonlinearity B(u, v) = (u.grad) m + (grad u)^T m with
    m = v - alpha*Lap(v).

    Products are formed alias-free on the fine grid; the result is the
    truncation of the exact quadratic product and is returned without
    Leray projection (callers pairing against divergence-free fields do
    not see the difference, and the raw representative is what the
    transpose-of-gradient identity is stated for).
    """
    require_same_grid(u, v)
    _require_divergence_free(u, "bilinear_B")
    _require_divergence_free(v, "bilinear_B")
    grid = u.grid

    m_coeffs = (1.0 + alpha * grid.k2) * v.coeffs
    pair = np.stack([u.coeffs, m_coeffs])                       # (2, 3, n, n, n)
    u_fine, m_fine = fine_values(grid, pair)                    # each (3, M, M, M)
    dpair = 1j * grid.k[None, :, None] * pair[:, None]          # (2, 3, 3, ...): d_i applied to each component
    grad_u, grad_m = fine_values(grid, dpair)                   # grad_m[i, j] = d_i m_j

    advect = np.einsum("ixyz,ijxyz->jxyz", u_fine, grad_m)      # (u.grad) m
    stretch = np.einsum("jixyz,ixyz->jxyz", grad_u, m_fine)     # ((grad u)^T m)_j = sum_i d_j u_i m_i
    coeffs = spectrum_from_fine(grid, advect + stretch)
    return SpectralField(grid, coeffs, divergence_free=False)


def linearized_Bu(u_hat: SpectralField, w: SpectralField, alpha: float) -> SpectralField:
    """Derivative of u -> B(u, u) at u_hat: B(u_hat, w) + B(w, u_hat)."""
    return bilinear_B(u_hat, w, alpha) + bilinear_B(w, u_hat, alpha)


def _step_factors(grid: GridSpec, alpha: float, nu: float):
    """Diagonal implicit factor E = 1/(1 + nu*dt*|k|^2) and inverse filter
    H = 1/(1 + alpha*|k|^2)."""
    E = 1.0 / (1.0 + nu * grid.dt * grid.k2)
    H = 1.0 / (1.0 + alpha * grid.k2)
    return E, H


def _check_finite(coeffs: np.ndarray, step: int, ref_norm: float, grid: GridSpec):
    if not np.all(np.isfinite(coeffs)):
        raise BlowUpError(step, f"non-finite state at step {step}")
    amp = grid.length**1.5 * float(np.sqrt(np.sum(np.abs(coeffs) ** 2)))
    # the +1 floor keeps the guard meaningful for zero initial data, where
    # any legitimately forced response would otherwise trip it
    if amp > AMPLITUDE_GUARD * (ref_norm + 1.0):
        raise BlowUpError(step, f"amplitude guard tripped at step {step}")


def step_forward(u_n: SpectralField, v_n: SpectralField, cfg: ProblemConfig) -> SpectralField:
    """One IMEX step.

    u_{n+1}(k) = [u_n(k) + dt*(v_n(k) - P B(u_n, u_n)(k)) / (1 + alpha|k|^2)]
                 / (1 + nu dt |k|^2)

    ``v_n`` is the already Leray-projected spectral control slice.
    """
    grid = cfg.grid
    require_same_grid(u_n, v_n)
    E, H = _step_factors(grid, cfg.alpha, cfg.nu)
    b = leray_project(bilinear_B(u_n, u_n, cfg.alpha))
    coeffs = E * (u_n.coeffs + grid.dt * H * (v_n.coeffs - b.coeffs))
    _check_finite(coeffs, 1, l2_norm(u_n), grid)
    return SpectralField(grid, coeffs, divergence_free=True)


def project_control_slices(control: ControlField) -> List[SpectralField]:
    """Transform every control slice to spectral space and Leray-project."""
    grid = control.grid
    out = []
    for n in range(control.n_steps):
        out.append(leray_project(to_spectral(control.slice(n))))
    return out


def solve_forward(u0: SpectralField, control: ControlField, cfg: ProblemConfig) -> StateTrajectory:
    """March the state across the horizon; n_steps+1 snapshots."""
    grid = cfg.grid
    require_same_grid(u0, control)
    u = leray_project(u0)
    ref = l2_norm(u)
    E, H = _step_factors(grid, cfg.alpha, cfg.nu)
    v_spec = project_control_slices(control)

    snapshots = [u]
    for n in range(grid.n_steps):
        b = leray_project(bilinear_B(u, u, cfg.alpha))
        coeffs = E * (u.coeffs + grid.dt * H * (v_spec[n].coeffs - b.coeffs))
        _check_finite(coeffs, n + 1, ref, grid)
        u = SpectralField(grid, coeffs, divergence_free=True)
        snapshots.append(u)
    return StateTrajectory(grid, snapshots, cfg.alpha, cfg.nu)


def solve_linearized(
    traj: StateTrajectory, sources: Sequence[SpectralField], cfg: ProblemConfig
) -> StateTrajectory:
    """Tangent sweep: the forward scheme linearized around ``traj``.

    w_0 = 0;  w_{n+1} = E (w_n + dt H (g_n - P [B(u_n, w_n) + B(w_n, u_n)])).

    ``sources`` holds one divergence-free spectral field per step (a
    perturbation of the projected control enters here directly).
    """
    grid = traj.grid
    if len(sources) != grid.n_steps:
        raise ConfigurationError(f"need {grid.n_steps} source slices, got {len(sources)}")
    E, H = _step_factors(grid, cfg.alpha, cfg.nu)

    w = SpectralField(grid, np.zeros(grid.shape, dtype=complex), divergence_free=True)
    snapshots = [w]
    for n in range(grid.n_steps):
        u_n = traj.snapshots[n]
        lin = leray_project(linearized_Bu(u_n, w, cfg.alpha))
        coeffs = E * (w.coeffs + grid.dt * H * (sources[n].coeffs - lin.coeffs))
        _check_finite(coeffs, n + 1, 1.0, grid)
        w = SpectralField(grid, coeffs, divergence_free=True)
        snapshots.append(w)
    return StateTrajectory(grid, snapshots, cfg.alpha, cfg.nu)


def filtered_energy(u: SpectralField, alpha: float) -> float:
    """||u||^2 + alpha*||grad u||^2, the quantity the model dissipates."""
    grid = u.grid
    return grid.length**3 * float(np.sum((1.0 + alpha * grid.k2) * np.abs(u.coeffs) ** 2))
