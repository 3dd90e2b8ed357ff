"""Projected gradient descent with Armijo backtracking.

The iteration v <- Proj(v - s*(gamma3 v + lambda)) realizes the
first-order optimality system computationally: states from the forward
solver, multipliers from the adjoint sweep, and the projection onto the
box of admissible controls.  With the natural step 1/gamma3 a single
unconstrained step lands on Proj(-lambda/gamma3).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .adjoint import solve_adjoint
from .control import ControlField, CostBreakdown, ProblemConfig, project_admissible
from .cost import evaluate_cost, optimality_residual, reduced_gradient
from .forward import solve_forward

MAX_SHRINKS = 40
STAGNATION_WINDOW = 5
STAGNATION_RTOL = 1e-12

TERMINATIONS = ("residual_tol", "max_iter", "line_search_fail", "stagnation")


@dataclass
class OptimizerOptions:
    max_iter: int = 200
    step0: Optional[float] = None  # None -> 1/gamma3
    armijo_c: float = 1e-4
    shrink: float = 0.5
    residual_tol: float = 1e-8
    # optional: also stop once the residual falls below this fraction of
    # the initial residual (the looser of the two thresholds wins)
    residual_tol_rel: Optional[float] = None


@dataclass
class OptimizationResult:
    final_control: ControlField
    cost_history: List[CostBreakdown]
    residual_history: List[float]
    iterations: int
    termination: str
    step_history: List[float] = field(default_factory=list)


def check_convergence(cost_totals: List[float]) -> Optional[str]:
    """Stagnation rule: relative cost decrease below 1e-12 across the last
    five iterations.  Returns a termination tag or None to continue."""
    if len(cost_totals) < STAGNATION_WINDOW + 1:
        return None
    recent = cost_totals[-(STAGNATION_WINDOW + 1):]
    scale = max(abs(recent[0]), 1e-300)
    if (recent[0] - recent[-1]) / scale < STAGNATION_RTOL:
        return "stagnation"
    return None


def projected_gradient(
    cfg: ProblemConfig,
    opts: Optional[OptimizerOptions] = None,
    initial_control: Optional[ControlField] = None,
    callback: Optional[Callable[[int, CostBreakdown, float, float, float], None]] = None,
) -> OptimizationResult:
    """Minimize the tracking cost over box-constrained controls.

    Each iteration costs one adjoint solve for the gradient plus one
    forward solve per line-search trial; the trajectory of the accepted
    trial is reused for the next gradient.  Backtracking from ``step0``
    stops at the Armijo test

        J(v+) <= J(v) - armijo_c * (1/s) * ||v+ - v||^2.

    Terminates on the residual threshold, stagnation, the iteration cap,
    or an exhausted line search (never an exception).
    """
    opts = opts or OptimizerOptions()
    step0 = opts.step0 if opts.step0 is not None else 1.0 / cfg.gamma3
    bounds = cfg.bounds
    grid = cfg.grid
    h3 = (grid.length / grid.n) ** 3

    if initial_control is None:
        v = ControlField.zeros(grid, bounds)
    else:
        v = project_admissible(initial_control, bounds)

    def gradient_at(control, traj):
        adj = solve_adjoint(traj, cfg)
        grad = reduced_gradient(control, adj, cfg.gamma3)
        res = optimality_residual(control, adj, cfg.gamma3, bounds)
        return grad, res

    traj = solve_forward(cfg.u0, v, cfg)
    cost = evaluate_cost(traj, v, cfg)
    grad, residual = gradient_at(v, traj)

    cost_history = [cost]
    residual_history = [residual]
    step_history: List[float] = []
    tol = opts.residual_tol
    if opts.residual_tol_rel is not None:
        tol = max(tol, opts.residual_tol_rel * residual)

    if callback:
        callback(0, cost, residual, float("nan"), 0.0)
    if residual <= tol:
        return OptimizationResult(v, cost_history, residual_history, 0, "residual_tol", step_history)

    termination = "max_iter"
    iterations = 0
    s_prev = step0

    for it in range(1, opts.max_iter + 1):
        t0 = time.perf_counter()
        # warm-start the backtracking near the last accepted step; one
        # doubling per iteration lets the step recover after transients
        s = min(step0, 2.0 * s_prev)
        accepted = None
        stuck = False
        for _ in range(MAX_SHRINKS + 1):
            trial = ControlField(grid, v.stacked - s * grad, bounds=None)
            candidate = project_admissible(trial, bounds)
            move2 = grid.dt * h3 * float(np.sum((candidate.stacked - v.stacked) ** 2))
            if move2 == 0.0:
                # the projected step does not move at all; shrinking the
                # step can only move less, so this iterate is a fixed point
                stuck = True
                break
            cand_traj = solve_forward(cfg.u0, candidate, cfg)
            cand_cost = evaluate_cost(cand_traj, candidate, cfg)
            if cand_cost.total <= cost.total - opts.armijo_c * move2 / s:
                accepted = (candidate, cand_cost, cand_traj)
                break
            s *= opts.shrink
        if stuck:
            termination = "stagnation"
            iterations = it
            break
        if accepted is None:
            termination = "line_search_fail"
            iterations = it
            break

        v, cost, traj = accepted
        s_prev = s
        grad, residual = gradient_at(v, traj)
        cost_history.append(cost)
        residual_history.append(residual)
        step_history.append(s)
        iterations = it
        if callback:
            callback(it, cost, residual, s, (time.perf_counter() - t0) * 1e3)

        if residual <= tol:
            termination = "residual_tol"
            break
        stagnated = check_convergence([c.total for c in cost_history])
        if stagnated:
            termination = stagnated
            break

    return OptimizationResult(v, cost_history, residual_history, iterations, termination, step_history)
