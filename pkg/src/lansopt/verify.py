"""Executable oracle battery for the operator identities the solver rests on.

Every check returns a :class:`CheckReport` with a scalar ``measured``
defect, the tolerance it was judged against, and enough context to
reproduce the number.  Checks are deterministic given their seed.  Random
fields are band-limited to |k| <= n/4 with unit gradient norm so the
dealiasing is exact and tolerances do not drift with resolution.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .adjoint import adjoint_sweep, bilinear_B_star, solve_adjoint
from .control import ControlField, ProblemConfig
from .cost import evaluate_cost, reduced_gradient
from .errors import ConfigurationError
from .fields import random_control_slice, random_solenoidal, single_mode, taylor_green
from .forward import (
    StateTrajectory,
    bilinear_B,
    filtered_energy,
    linearized_Bu,
    solve_forward,
    solve_linearized,
)
from .spectral import (
    GridSpec,
    SpectralField,
    apply_helmholtz,
    apply_stokes,
    da_dual_norm,
    da_norm,
    l2_inner,
    l2_norm,
    leray_project,
    v_norm,
    zero_spectral,
)


@dataclass
class CheckReport:
    name: str
    measured: float
    tolerance: float
    context: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.measured <= self.tolerance

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "context": self.context,
        }
        return json.dumps(payload)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: measured {self.measured:.3e} vs tolerance {self.tolerance:.3e}"


def _default_grid(n: int = 8) -> GridSpec:
    return GridSpec(n=n, dt=0.02, n_steps=16)


# ---------------------------------------------------------------------------
# operator identities


def check_skew_symmetry(
    n_trials: int = 50, grid: Optional[GridSpec] = None, alpha: float = 1.0, seed: int = 0
) -> CheckReport:
    """<B(u, v), u> vanishes for divergence-free u, v."""
    grid = grid or _default_grid()
    worst = 0.0
    for trial in range(n_trials):
        u = random_solenoidal(grid, seed=seed + 2 * trial)
        v = random_solenoidal(grid, seed=seed + 2 * trial + 1)
        pairing = abs(l2_inner(leray_project(bilinear_B(u, v, alpha)), u))
        scale = v_norm(u) * da_norm(v) * l2_norm(u)
        worst = max(worst, pairing / scale)
    return CheckReport(
        "skew_symmetry",
        worst,
        1e-12,
        {"n_trials": n_trials, "alpha": alpha, "n": grid.n, "seed": seed},
    )


def divergence_free_basis(grid: GridSpec) -> List[SpectralField]:
    """Orthonormal real basis of the resolved divergence-free subspace.

    For each half-space wavevector two tangent directions and two phases
    (cos/sin) give four real fields of unit L2 norm.
    """
    K = grid.max_mode
    fields: List[SpectralField] = []
    norm = 1.0 / np.sqrt(grid.length**3 / 2.0)
    for mx, my, mz in itertools.product(range(-K, K + 1), repeat=3):
        if (mx, my, mz) == (0, 0, 0):
            continue
        # half-space selection: keep one of each conjugate pair
        if not (mz > 0 or (mz == 0 and my > 0) or (mz == my == 0 and mx > 0)):
            continue
        k = np.array([mx, my, mz], dtype=float)
        helper = np.array([0.0, 0.0, 1.0])
        if abs(k @ helper) == np.linalg.norm(k):
            helper = np.array([1.0, 0.0, 0.0])
        e1 = np.cross(k, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(k, e1) / np.linalg.norm(k)
        ix = (mx % grid.n, my % grid.n, mz % grid.n)
        ix_neg = (-mx % grid.n, -my % grid.n, -mz % grid.n)
        for direction in (e1, e2):
            for phase in ("cos", "sin"):
                coeffs = np.zeros(grid.shape, dtype=complex)
                half = 0.5 * direction if phase == "cos" else -0.5j * direction
                coeffs[(slice(None),) + ix] = half
                coeffs[(slice(None),) + ix_neg] = np.conj(half)
                fields.append(SpectralField(grid, coeffs * norm, divergence_free=True))
    return fields


def _operator_matrix(apply: Callable[[SpectralField], SpectralField], basis) -> np.ndarray:
    mat = np.empty((len(basis), len(basis)))
    for j, b in enumerate(basis):
        image = apply(b)
        for i, a in enumerate(basis):
            mat[i, j] = l2_inner(image, a)
    return mat


def check_adjoint_identity(
    n_trials: int = 50, grid: Optional[GridSpec] = None, alpha: float = 1.0, seed: int = 0
) -> CheckReport:
    """<B'(u)h, lam> = <h, B'*(u)lam> plus a dense-transpose oracle at n=4."""
    grid = grid or _default_grid()
    worst = 0.0
    for trial in range(n_trials):
        u_hat = random_solenoidal(grid, seed=seed + 3 * trial)
        h = random_solenoidal(grid, seed=seed + 3 * trial + 1)
        lam = random_solenoidal(grid, seed=seed + 3 * trial + 2)
        lhs = l2_inner(leray_project(linearized_Bu(u_hat, h, alpha)), lam)
        rhs = l2_inner(h, bilinear_B_star(u_hat, lam, alpha))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))

    # dense oracle: the matrix of B'* equals the transpose of the matrix of
    # B' on an orthonormal divergence-free basis at tiny resolution
    tiny = GridSpec(n=4, dt=grid.dt, n_steps=grid.n_steps, dealias=grid.dealias)
    u_tiny = random_solenoidal(tiny, seed=seed + 991, band=1)
    basis = divergence_free_basis(tiny)
    fwd = _operator_matrix(lambda w: leray_project(linearized_Bu(u_tiny, w, alpha)), basis)
    adj = _operator_matrix(lambda lam: bilinear_B_star(u_tiny, lam, alpha), basis)
    scale = max(float(np.max(np.abs(fwd))), 1e-300)
    dense_defect = float(np.max(np.abs(adj - fwd.T))) / scale

    return CheckReport(
        "adjoint_identity",
        max(worst, dense_defect),
        1e-12,
        {
            "n_trials": n_trials,
            "alpha": alpha,
            "n": grid.n,
            "seed": seed,
            "pairing_defect": worst,
            "dense_transpose_defect": dense_defect,
            "dense_dim": len(basis),
        },
    )


def check_frechet_remainder(
    grid: Optional[GridSpec] = None, alpha: float = 1.0, seed: int = 0
) -> CheckReport:
    """B(u+w, u+w) - B(u, u) - [B(u, w) + B(w, u)] equals B(w, w) exactly,
    and the remainder is homogeneous of degree two."""
    grid = grid or _default_grid()
    u = random_solenoidal(grid, seed=seed)
    w = random_solenoidal(grid, seed=seed + 1)

    remainder = bilinear_B(u + w, u + w, alpha) - bilinear_B(u, u, alpha) - linearized_Bu(u, w, alpha)
    expected = bilinear_B(w, w, alpha)
    identity_defect = l2_norm(remainder - expected) / max(l2_norm(expected), 1e-300)

    r1 = l2_norm(bilinear_B(w, w, alpha))
    r2 = l2_norm(bilinear_B(2.0 * w, 2.0 * w, alpha))
    ratio_defect = abs(r2 / r1 - 4.0)

    return CheckReport(
        "frechet_remainder",
        identity_defect,
        1e-13,
        {
            "alpha": alpha,
            "n": grid.n,
            "seed": seed,
            "quadratic_ratio": r2 / r1,
            "ratio_defect": ratio_defect,
        },
    )


def check_dual_norm_inequality(
    n_trials: int = 100, grid: Optional[GridSpec] = None, alpha: float = 1.0, seed: int = 0
) -> CheckReport:
    """Dual norm of u never exceeds that of the Helmholtz-filtered u;
    strictly smaller for alpha > 0."""
    grid = grid or _default_grid()
    worst = -np.inf
    min_gap = np.inf
    for trial in range(n_trials):
        u = random_solenoidal(grid, seed=seed + trial)
        lhs = da_dual_norm(u)
        rhs = da_dual_norm(apply_helmholtz(u, alpha))
        worst = max(worst, (lhs - rhs) / max(rhs, 1e-300))
        min_gap = min(min_gap, rhs - lhs)
    if alpha > 0 and min_gap <= 0.0:
        worst = max(worst, 1.0)  # strictness failed
    return CheckReport(
        "dual_norm",
        max(worst, 0.0),
        1e-14,
        {"n_trials": n_trials, "alpha": alpha, "n": grid.n, "seed": seed, "min_gap": min_gap},
    )


# ---------------------------------------------------------------------------
# time-stepping checks


def check_energy_decay(
    cfg: Optional[ProblemConfig] = None, n_trials: int = 10, seed: int = 0
) -> CheckReport:
    """Without forcing, the filtered energy decays at every step and the
    dissipation-summed inequality holds."""
    if cfg is None:
        grid = _default_grid()
        cfg = ProblemConfig(
            grid,
            alpha=0.1,
            nu=0.5,
            gamma1=1.0,
            gamma2=1.0,
            gamma3=1.0,
            u0=zero_spectral(grid),
            u_T=zero_spectral(grid),
            u_d=zero_spectral(grid),
        )
    grid = cfg.grid
    control = ControlField.zeros(grid)
    worst_increase = -np.inf
    worst_summed = -np.inf
    for trial in range(n_trials):
        u0 = random_solenoidal(grid, seed=seed + trial)
        traj = solve_forward(u0, control, cfg)
        energies = [filtered_energy(s, cfg.alpha) for s in traj.snapshots]
        scale = max(energies[0], 1e-300)
        worst_increase = max(worst_increase, max(np.diff(energies)) / scale)
        dissipated = 0.0
        for snap, energy in zip(traj.snapshots[1:], energies[1:]):
            dissipated += (
                2.0 * cfg.nu * grid.dt * (v_norm(snap) ** 2 + cfg.alpha * da_norm(snap) ** 2)
            )
            worst_summed = max(worst_summed, (energy + dissipated - energies[0]) / scale)
    return CheckReport(
        "energy_decay",
        max(worst_increase, worst_summed),
        0.0,
        {
            "n_trials": n_trials,
            "n": grid.n,
            "nu": cfg.nu,
            "alpha": cfg.alpha,
            "seed": seed,
            "max_step_increase": worst_increase,
            "summed_inequality_slack": worst_summed,
        },
    )


def check_linear_decay_convergence(
    nu: float = 0.5, total_time: float = 0.5, n: int = 8, alpha: float = 0.1
) -> CheckReport:
    """A single mode decays like exp(-nu |k|^2 t) up to a first-order-in-dt
    defect, and halving dt halves the defect (ratio within [1.7, 2.3])."""
    mode = (1, 0, 0)
    defects = []
    for n_steps in (16, 32):
        grid = GridSpec(n=n, dt=total_time / n_steps, n_steps=n_steps)
        cfg = ProblemConfig(
            grid,
            alpha=alpha,
            nu=nu,
            gamma1=1.0,
            gamma2=1.0,
            gamma3=1.0,
            u0=zero_spectral(grid),
            u_T=zero_spectral(grid),
            u_d=zero_spectral(grid),
        )
        u0 = single_mode(grid, mode, (0.0, 1.0, 0.0), amplitude=1e-3)
        traj = solve_forward(u0, ControlField.zeros(grid), cfg)
        a0 = l2_norm(u0)
        aT = l2_norm(traj.final())
        defects.append(abs(aT - a0 * np.exp(-nu * total_time)))
    ratio = defects[0] / defects[1]
    measured = abs(ratio - 2.0)
    return CheckReport(
        "linear_decay",
        measured,
        0.3,
        {
            "defect_dt": defects[0],
            "defect_half_dt": defects[1],
            "ratio": ratio,
            "nu": nu,
            "total_time": total_time,
            "coarse_dt": total_time / 16,
            "initial_norm": a0,
        },
    )


# ---------------------------------------------------------------------------
# gradient check


def fd_gradient_check(
    cfg: ProblemConfig,
    n_directions: int = 5,
    epsilons: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
    seed: int = 0,
    control: Optional[ControlField] = None,
    flip_adjoint_sign: bool = False,
) -> CheckReport:
    """Adjoint gradient vs central finite differences of the reduced cost.

    The epsilon sweep is reported so the V-shaped error curve
    (discretization vs roundoff) is visible; the check passes when every
    direction reaches a plateau error of at most 1e-6.
    ``flip_adjoint_sign`` corrupts the multiplier term on purpose and is
    only useful as a negative control.
    """
    grid = cfg.grid
    rng = np.random.default_rng(seed)
    if control is None:
        stacked = np.stack(
            [random_control_slice(grid, rng, amplitude=0.2) for _ in range(grid.n_steps)]
        )
        if cfg.bounds is not None:
            stacked = cfg.bounds.clamp(stacked)
        control = ControlField(grid, stacked, cfg.bounds)

    traj = solve_forward(cfg.u0, control, cfg)
    adj = solve_adjoint(traj, cfg)
    grad = reduced_gradient(control, adj, cfg.gamma3)
    if flip_adjoint_sign:
        grad = 2.0 * cfg.gamma3 * control.stacked - grad

    h3 = (grid.length / grid.n) ** 3

    def total(stacked: np.ndarray) -> float:
        c = ControlField(grid, stacked)
        t = solve_forward(cfg.u0, c, cfg)
        return evaluate_cost(t, c, cfg).total

    sweep: Dict[str, float] = {}
    plateau_errors = []
    for d in range(n_directions):
        direction = np.stack(
            [random_control_slice(grid, rng, amplitude=1.0) for _ in range(grid.n_steps)]
        )
        directional = grid.dt * h3 * float(np.sum(grad * direction))
        best = np.inf
        for eps in epsilons:
            j_plus = total(control.stacked + eps * direction)
            j_minus = total(control.stacked - eps * direction)
            fd = (j_plus - j_minus) / (2.0 * eps)
            rel = abs(fd - directional) / max(abs(fd), abs(directional), 1e-300)
            sweep[f"dir{d}_eps{eps:.0e}"] = rel
            best = min(best, rel)
        plateau_errors.append(best)

    measured = max(plateau_errors)
    return CheckReport(
        "gradient_fd",
        measured,
        1e-6,
        {
            "n": grid.n,
            "n_steps": grid.n_steps,
            "n_directions": n_directions,
            "seed": seed,
            "plateau_errors": plateau_errors,
            "sweep": sweep,
        },
    )


def _battery_problem(n: int = 8, n_steps: int = 16, seed: int = 0) -> ProblemConfig:
    """Small tracking problem with nontrivial targets for gradient checks."""
    grid = GridSpec(n=n, dt=0.03125, n_steps=n_steps)
    u0 = taylor_green(grid, amplitude=0.3)
    return ProblemConfig(
        grid,
        alpha=0.1,
        nu=0.5,
        gamma1=2.0,
        gamma2=1.5,
        gamma3=0.01,
        u0=u0,
        u_T=taylor_green(grid, amplitude=0.2),
        u_d=random_solenoidal(grid, seed=seed + 17, amplitude=0.3),
    )


# ---------------------------------------------------------------------------
# battery

CHECK_NAMES = (
    "skew_symmetry",
    "adjoint_identity",
    "frechet_remainder",
    "dual_norm",
    "energy_decay",
    "linear_decay",
    "gradient_fd",
)


def run_battery(
    names: Optional[Sequence[str]] = None, seed: int = 0, n: int = 8
) -> List[CheckReport]:
    """Run the selected checks (all by default) and return their reports."""
    selected = list(names) if names else list(CHECK_NAMES)
    unknown = [name for name in selected if name not in CHECK_NAMES]
    if unknown:
        raise ConfigurationError(f"unknown check(s): {', '.join(unknown)}")

    grid = _default_grid(n)
    reports: List[CheckReport] = []
    for name in selected:
        if name == "skew_symmetry":
            worst = None
            for alpha in (0.0, 0.1, 1.0):
                rep = check_skew_symmetry(50, grid, alpha, seed)
                worst = rep if worst is None or rep.measured > worst.measured else worst
            worst.context["alphas"] = [0.0, 0.1, 1.0]
            reports.append(worst)
        elif name == "adjoint_identity":
            worst = None
            for alpha in (0.0, 0.1, 1.0):
                rep = check_adjoint_identity(50, grid, alpha, seed)
                worst = rep if worst is None or rep.measured > worst.measured else worst
            worst.context["alphas"] = [0.0, 0.1, 1.0]
            reports.append(worst)
        elif name == "frechet_remainder":
            reports.append(check_frechet_remainder(grid, alpha=1.0, seed=seed))
        elif name == "dual_norm":
            reports.append(check_dual_norm_inequality(100, grid, alpha=0.5, seed=seed))
        elif name == "energy_decay":
            reports.append(check_energy_decay(n_trials=10, seed=seed))
        elif name == "linear_decay":
            reports.append(check_linear_decay_convergence(n=n))
        elif name == "gradient_fd":
            reports.append(fd_gradient_check(_battery_problem(n=n, seed=seed), seed=seed))
    return reports
