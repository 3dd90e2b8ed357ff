"""Controls, box constraints, cost parameters and the problem definition.

The control is a space-time field: one physical slice per time step,
piecewise constant on [t_n, t_{n+1}).  Box constraints act pointwise and
componentwise; bounds may be scalars, per-component vectors, or full
space-time arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError
from .spectral import GridSpec, PhysicalField, SpectralField, leray_project


def _bound_array(grid: GridSpec, n_steps: int, spec, name: str) -> np.ndarray:
    """Normalize a bound specifier to an array broadcastable to
    (n_steps, 3, n, n, n)."""
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1, 1, 1, 1)
    if arr.shape == (3,):
        return arr.reshape(1, 3, 1, 1, 1)
    if arr.shape == grid.shape:
        return arr[None]
    if arr.shape == (n_steps,) + grid.shape:
        return arr
    raise ConfigurationError(f"{name} has unsupported shape {arr.shape}")


@dataclass
class Bounds:
    """Componentwise box constraints v_a <= v <= v_b."""

    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, grid: GridSpec, n_steps: int, lower, upper) -> "Bounds":
        lo = _bound_array(grid, n_steps, lower, "lower bound")
        hi = _bound_array(grid, n_steps, upper, "upper bound")
        if np.any(lo > hi):
            raise ConfigurationError("bounds are inverted: lower > upper somewhere")
        return cls(lo, hi)

    def clamp(self, stacked: np.ndarray) -> np.ndarray:
        return np.clip(stacked, self.lower, self.upper)

    def contains(self, stacked: np.ndarray, slack: float = 0.0) -> bool:
        return bool(np.all(stacked >= self.lower - slack) and np.all(stacked <= self.upper + slack))


@dataclass(eq=False)
class ControlField:
    """Space-time control on the collocation grid.

    ``stacked`` has shape (n_steps, 3, n, n, n); slice n applies on
    [t_n, t_{n+1}).  If bounds are present the control must be feasible.
    """

    grid: GridSpec
    stacked: np.ndarray
    bounds: Optional[Bounds] = None

    def __post_init__(self):
        expected = (self.grid.n_steps,) + self.grid.shape
        if self.stacked.shape != expected:
            raise ConfigurationError(
                f"control array shape {self.stacked.shape}, expected {expected}"
            )
        if self.bounds is not None and not self.bounds.contains(self.stacked, slack=1e-14):
            raise ConfigurationError("control violates its box constraints")

    @classmethod
    def zeros(cls, grid: GridSpec, bounds: Optional[Bounds] = None) -> "ControlField":
        stacked = np.zeros((grid.n_steps,) + grid.shape)
        if bounds is not None:
            stacked = bounds.clamp(stacked)
        return cls(grid, stacked, bounds)

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    def slice(self, n: int) -> PhysicalField:
        return PhysicalField(self.grid, self.stacked[n])

    def with_values(self, stacked: np.ndarray) -> "ControlField":
        return ControlField(self.grid, stacked, self.bounds)

    def copy(self) -> "ControlField":
        return ControlField(self.grid, self.stacked.copy(), self.bounds)

    def spacetime_norm(self) -> float:
        """sqrt(dt * sum_n integral |v_n|^2 dx)."""
        h = self.grid.length / self.grid.n
        return float(np.sqrt(self.grid.dt * h**3 * np.sum(self.stacked**2)))


def project_admissible(v: ControlField, bounds: Optional[Bounds]) -> ControlField:
    """Pointwise componentwise clamp onto the box; identity without bounds."""
    if bounds is None:
        return ControlField(v.grid, v.stacked.copy(), None)
    return ControlField(v.grid, bounds.clamp(v.stacked), bounds)


@dataclass
class CostBreakdown:
    """The three terms of the tracking functional and their sum."""

    tracking: float
    terminal: float
    control: float

    @property
    def total(self) -> float:
        return self.tracking + self.terminal + self.control

    def as_dict(self) -> dict:
        return {
            "tracking": self.tracking,
            "terminal": self.terminal,
            "control": self.control,
            "total": self.total,
        }


@dataclass
class ProblemConfig:
    """Everything a control problem needs: grid, physics, weights, data.

    ``u_d`` may be a single field (broadcast in time) or one field per
    snapshot (n_steps + 1 of them).  Targets are Leray-projected on
    ingestion; only their solenoidal part is observable through the
    tracking norm of divergence-free differences.
    """

    grid: GridSpec
    alpha: float
    nu: float
    gamma1: float
    gamma2: float
    gamma3: float
    u0: SpectralField
    u_T: SpectralField
    u_d: Union[SpectralField, Sequence[SpectralField]]
    bounds: Optional[Bounds] = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError("alpha must be nonnegative")
        if self.nu <= 0:
            raise ConfigurationError("nu must be positive")
        for name in ("gamma1", "gamma2", "gamma3"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")
        if self.gamma3 == 0:
            raise ConfigurationError("gamma3 must be positive")
        self.u0 = leray_project(self.u0)
        self.u_T = leray_project(self.u_T)
        if isinstance(self.u_d, SpectralField):
            self.u_d = leray_project(self.u_d)
        else:
            traj = [leray_project(f) for f in self.u_d]
            if len(traj) != self.grid.n_steps + 1:
                raise ConfigurationError(
                    f"u_d trajectory needs {self.grid.n_steps + 1} slices, got {len(traj)}"
                )
            self.u_d = traj

    def desired_at(self, n: int) -> SpectralField:
        if isinstance(self.u_d, SpectralField):
            return self.u_d
        return self.u_d[n]
