"""Tracking cost, reduced gradient and first-order optimality residual.

Time quadrature is trapezoidal for the tracking term and left-endpoint
for the control term (the control is piecewise constant per step).  The
adjoint sweep transposes exactly this quadrature, so the reduced gradient
``gamma3 v + lambda`` is the exact derivative of the discrete cost.
"""

from __future__ import annotations

import numpy as np

from .adjoint import AdjointTrajectory, solve_adjoint
from .control import Bounds, ControlField, CostBreakdown, ProblemConfig, project_admissible
from .errors import ConfigurationError, ContractViolationError
from .forward import StateTrajectory, solve_forward
from .spectral import da_norm, l2_norm, to_physical


def evaluate_cost(traj: StateTrajectory, control: ControlField, cfg: ProblemConfig) -> CostBreakdown:
    """The three cost terms for a state/control pair."""
    grid = cfg.grid
    if traj.grid is not grid and traj.grid != grid:
        raise ConfigurationError("trajectory grid does not match problem grid")
    if control.stacked.shape[0] != grid.n_steps:
        raise ConfigurationError("control does not cover the time horizon")

    tracking = 0.0
    for n, snap in enumerate(traj.snapshots):
        weight = 0.5 if n in (0, grid.n_steps) else 1.0
        tracking += weight * da_norm(snap - cfg.desired_at(n)) ** 2
    tracking *= 0.5 * cfg.gamma1 * grid.dt

    terminal = 0.5 * cfg.gamma2 * l2_norm(traj.final() - cfg.u_T) ** 2

    h = grid.length / grid.n
    control_term = 0.5 * cfg.gamma3 * grid.dt * h**3 * float(np.sum(control.stacked**2))

    return CostBreakdown(tracking=tracking, terminal=terminal, control=control_term)


def reduced_cost(control: ControlField, cfg: ProblemConfig) -> CostBreakdown:
    """Cost of the state induced by ``control`` (one forward solve)."""
    traj = solve_forward(cfg.u0, control, cfg)
    return evaluate_cost(traj, control, cfg)


def adjoint_physical_slices(adj: AdjointTrajectory) -> np.ndarray:
    """Multiplier slices aligned with the control nodes, physical space,
    stacked (n_steps, 3, n, n, n)."""
    return np.stack([to_physical(adj.snapshots[n]).values for n in range(adj.grid.n_steps)])


def reduced_gradient(control: ControlField, adj: AdjointTrajectory, gamma3: float) -> np.ndarray:
    """Per-slice gradient gamma3*v_n + lambda_n in physical space.

    The multiplier is divergence-free with zero mean by construction, so
    its physical values are already the projected representative.
    """
    if adj.grid.n_steps != control.n_steps:
        raise ContractViolationError("adjoint and control cover different horizons")
    return gamma3 * control.stacked + adjoint_physical_slices(adj)


def optimality_residual(
    control: ControlField,
    adj: AdjointTrajectory,
    gamma3: float,
    bounds: Bounds | None,
) -> float:
    """Space-time L2 norm of v - Proj(-lambda/gamma3); zero exactly at a
    first-order point."""
    lam = adjoint_physical_slices(adj)
    candidate = ControlField(control.grid, -lam / gamma3, bounds=None)
    projected = project_admissible(candidate, bounds)
    diff = control.stacked - projected.stacked
    h = control.grid.length / control.grid.n
    return float(np.sqrt(control.grid.dt * h**3 * np.sum(diff**2)))


def lagrangian_control_gap(
    v_other: ControlField,
    v_hat: ControlField,
    adj: AdjointTrajectory,
    gamma3: float,
) -> float:
    """L(u_hat, v, lambda) - L(u_hat, v_hat, lambda) at frozen state and
    multiplier.

    Only the control penalty and the source pairing depend on v once the
    state is frozen, so the gap reduces to

        (gamma3/2) (||v||^2 - ||v_hat||^2) + (v - v_hat, lambda)

    in the space-time inner product.  Nonnegative at a first-order point.
    """
    grid = v_hat.grid
    lam = adjoint_physical_slices(adj)
    h = grid.length / grid.n
    quad = 0.5 * gamma3 * (np.sum(v_other.stacked**2) - np.sum(v_hat.stacked**2))
    pairing = float(np.sum((v_other.stacked - v_hat.stacked) * lam))
    return grid.dt * h**3 * (quad + pairing)


def control_gradient(control: ControlField, cfg: ProblemConfig):
    """One forward + one adjoint solve; returns (cost, gradient, residual).

    The gradient is the stacked physical array gamma3*v + lambda; the
    residual is the projected first-order measure against cfg.bounds.
    """
    traj = solve_forward(cfg.u0, control, cfg)
    cost = evaluate_cost(traj, control, cfg)
    adj = solve_adjoint(traj, cfg)
    grad = reduced_gradient(control, adj, cfg.gamma3)
    residual = optimality_residual(control, adj, cfg.gamma3, cfg.bounds)
    return cost, grad, residual, traj, adj
