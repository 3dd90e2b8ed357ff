"""Fourier discretization of a periodic box.

Velocity-like fields are stored either on the collocation grid
(:class:`PhysicalField`) or as truncated Fourier series coefficients
(:class:`SpectralField`).  Coefficients follow the Fourier-series
normalization ``u(x) = sum_k c(k) exp(i k.x)``, so they are independent of
the grid on which a band-limited field is sampled.  All inner products are
scaled to equal integrals over the box.

The module also provides the operators every other part of the package is
built from: Leray projection onto divergence-free fields, the Stokes
operator (diagonal ``|k|^2`` on divergence-free modes), the Helmholtz
filter ``I - alpha*Lap`` (diagonal ``1 + alpha*|k|^2``), and alias-free
quadratic products via 3/2-rule zero padding (2/3-rule masking available
as an alternative).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .errors import ConfigurationError, ContractViolationError

_FFT_AXES = (-3, -2, -1)

#: divergence residual above this (relative to the largest coefficient)
#: fails the divergence-free contract checks
DIV_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid plus the time discretization riding on it.

    Parameters
    ----------
    n : int
        Collocation points (and retained modes) per axis; even, >= 4.
    dt : float
        Time step.
    n_steps : int
        Number of steps, so the horizon is ``T = n_steps * dt``.
    length : float
        Box side.  Wavevectors are ``2*pi/length`` times integer triples.
    dealias : str
        ``"three_halves"`` (zero-padded products, default) or
        ``"two_thirds"`` (same-grid masked products).

    Derived arrays (wavevectors, dealias masks, padding index maps) are
    computed once and treated as immutable.
    """

    n: int
    dt: float
    n_steps: int
    length: float = 2.0 * np.pi
    dealias: str = "three_halves"

    def __post_init__(self):
        if self.n < 4 or self.n % 2 != 0:
            raise ConfigurationError(f"n_per_axis must be even and >= 4, got {self.n}")
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.length <= 0:
            raise ConfigurationError(f"domain_length must be positive, got {self.length}")
        if self.dealias not in ("three_halves", "two_thirds"):
            raise ConfigurationError(f"unknown dealias rule {self.dealias!r}")

        n = self.n
        modes = np.fft.fftfreq(n, d=1.0 / n)  # 0, 1, ..., n/2-1, -n/2, ..., -1
        k1 = 2.0 * np.pi / self.length * modes
        kx = k1[:, None, None]
        ky = k1[None, :, None]
        kz = k1[None, None, :]
        k2 = kx**2 + ky**2 + kz**2

        if self.dealias == "three_halves":
            max_mode = n // 2 - 1
            fine_n = 3 * n // 2
        else:
            max_mode = n // 3 if 3 * (n // 3) < n else n // 3 - 1
            fine_n = n
        absm = np.abs(modes)
        axis_ok = absm <= max_mode
        resolved = axis_ok[:, None, None] & axis_ok[None, :, None] & axis_ok[None, None, :]

        # index maps embedding retained modes of the n-grid into the fine grid
        src = np.concatenate([np.arange(0, max_mode + 1), np.arange(n - max_mode, n)])
        dst = np.concatenate([np.arange(0, max_mode + 1), np.arange(fine_n - max_mode, fine_n)])

        set_ = object.__setattr__
        set_(self, "modes", modes.astype(np.int64))
        set_(self, "k", np.stack(np.broadcast_arrays(kx, ky, kz)))
        set_(self, "k2", k2)
        set_(self, "k4", k2**2)
        set_(self, "max_mode", int(max_mode))
        set_(self, "fine_n", int(fine_n))
        set_(self, "resolved_mask", resolved)
        set_(self, "_pad_src", src)
        set_(self, "_pad_dst", dst)

    @property
    def total_time(self) -> float:
        return self.dt * self.n_steps

    @property
    def shape(self):
        return (3, self.n, self.n, self.n)

    def times(self) -> np.ndarray:
        """Snapshot times t_n = n*dt, n = 0..n_steps."""
        return self.dt * np.arange(self.n_steps + 1)

    def mesh(self):
        """Collocation coordinates, three arrays of shape (n, n, n)."""
        x1 = self.length / self.n * np.arange(self.n)
        return np.meshgrid(x1, x1, x1, indexing="ij")


@dataclass(eq=False)
class SpectralField:
    """Three-component field as Fourier coefficients, shape (3, n, n, n)."""

    grid: GridSpec
    coeffs: np.ndarray
    divergence_free: bool = False

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise ConfigurationError(
                f"coefficient array shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy(), self.divergence_free)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        require_same_grid(self, other)
        return SpectralField(
            self.grid,
            self.coeffs + other.coeffs,
            self.divergence_free and other.divergence_free,
        )

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        require_same_grid(self, other)
        return SpectralField(
            self.grid,
            self.coeffs - other.coeffs,
            self.divergence_free and other.divergence_free,
        )

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar, self.divergence_free)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs, self.divergence_free)


@dataclass(eq=False)
class PhysicalField:
    """Three-component real field on the collocation grid, shape (3, n, n, n)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"value array shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "PhysicalField":
        return PhysicalField(self.grid, self.values.copy())


def zero_spectral(grid: GridSpec) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.shape, dtype=complex), divergence_free=True)


def zero_physical(grid: GridSpec) -> PhysicalField:
    return PhysicalField(grid, np.zeros(grid.shape))


def require_same_grid(a, b):
    if a.grid is b.grid:
        return
    ga, gb = a.grid, b.grid
    if (ga.n, ga.length, ga.dealias, ga.dt, ga.n_steps) != (gb.n, gb.length, gb.dealias, gb.dt, gb.n_steps):
        raise ConfigurationError("fields live on different grids")


# ---------------------------------------------------------------------------
# transforms


def to_spectral(f: PhysicalField) -> SpectralField:
    """Forward transform; coefficients are Fourier-series normalized."""
    coeffs = _fft.fftn(f.values, axes=_FFT_AXES) / f.grid.n**3
    return SpectralField(f.grid, coeffs, divergence_free=False)


def to_physical(f: SpectralField) -> PhysicalField:
    """Inverse transform.  The imaginary residue of a conjugate-symmetric
    coefficient array is roundoff and is discarded."""
    values = _fft.ifftn(f.coeffs * f.grid.n**3, axes=_FFT_AXES).real
    return PhysicalField(f.grid, values)


def conjugate_symmetry_defect(f: SpectralField) -> float:
    """max_k |c(-k) - conj(c(k))|; zero for fields that are real in space."""
    c = f.coeffs
    c_neg = np.roll(c[..., ::-1, ::-1, ::-1], 1, axis=_FFT_AXES)
    return float(np.max(np.abs(c_neg - np.conj(c))))


def divergence_defect(f: SpectralField) -> float:
    """max_k |k . c(k)|, the absolute divergence residual."""
    return float(np.max(np.abs(np.sum(f.grid.k * f.coeffs, axis=0))))


def is_divergence_free(f: SpectralField, tol: float = DIV_TOL) -> bool:
    scale = float(np.max(np.abs(f.coeffs)))
    if scale == 0.0:
        return True
    return divergence_defect(f) <= tol * scale


def _require_divergence_free(f: SpectralField, op: str):
    if f.divergence_free:
        return
    if not is_divergence_free(f):
        raise ContractViolationError(f"{op} requires a divergence-free field")


# ---------------------------------------------------------------------------
# modewise operators


def leray_project(f: SpectralField) -> SpectralField:
    """Project onto divergence-free, zero-mean fields.

    Modewise ``c(k) <- (I - k k^T/|k|^2) c(k)`` for k != 0; the mean mode
    is zeroed so the Stokes operator is invertible on the range.
    """
    grid = f.grid
    k = grid.k
    k2 = np.where(grid.k2 == 0.0, 1.0, grid.k2)
    k_dot_c = np.sum(k * f.coeffs, axis=0)
    coeffs = f.coeffs - k * (k_dot_c / k2)
    coeffs[:, 0, 0, 0] = 0.0
    return SpectralField(grid, coeffs, divergence_free=True)


def apply_stokes(u: SpectralField) -> SpectralField:
    """Stokes operator; multiplication by |k|^2 on divergence-free fields."""
    _require_divergence_free(u, "apply_stokes")
    return SpectralField(u.grid, u.grid.k2 * u.coeffs, divergence_free=True)


def apply_helmholtz(u: SpectralField, alpha: float) -> SpectralField:
    """Helmholtz filter: multiplication by 1 + alpha*|k|^2."""
    return SpectralField(u.grid, (1.0 + alpha * u.grid.k2) * u.coeffs, u.divergence_free)


def invert_helmholtz(u: SpectralField, alpha: float) -> SpectralField:
    """Inverse Helmholtz filter: division by 1 + alpha*|k|^2 (always > 0)."""
    return SpectralField(u.grid, u.coeffs / (1.0 + alpha * u.grid.k2), u.divergence_free)


# ---------------------------------------------------------------------------
# inner products and norms


def l2_inner(u, v) -> float:
    """L2 inner product, equal to the integral of u.v over the box.

    Accepts two spectral or two physical fields; Parseval makes the two
    routes agree to roundoff.
    """
    require_same_grid(u, v)
    if isinstance(u, SpectralField) and isinstance(v, SpectralField):
        return u.grid.length**3 * float(np.real(np.sum(u.coeffs * np.conj(v.coeffs))))
    if isinstance(u, PhysicalField) and isinstance(v, PhysicalField):
        h = u.grid.length / u.grid.n
        return h**3 * float(np.sum(u.values * v.values))
    raise ConfigurationError("l2_inner needs both fields in the same representation")


def l2_norm(u) -> float:
    return float(np.sqrt(max(l2_inner(u, u), 0.0)))


def v_inner(u: SpectralField, v: SpectralField) -> float:
    """Gradient inner product (grad u, grad v) = sum_k |k|^2 u_k . conj(v_k)."""
    require_same_grid(u, v)
    return u.grid.length**3 * float(np.real(np.sum(u.grid.k2 * u.coeffs * np.conj(v.coeffs))))


def v_norm(u: SpectralField) -> float:
    return float(np.sqrt(max(v_inner(u, u), 0.0)))


def da_norm(u: SpectralField) -> float:
    """||A u||: sqrt of sum_k |k|^4 |u_k|^2 (Stokes-weighted norm)."""
    val = u.grid.length**3 * float(np.sum(u.grid.k4 * np.abs(u.coeffs) ** 2))
    return float(np.sqrt(max(val, 0.0)))


def da_dual_norm(u: SpectralField) -> float:
    """Dual norm: sqrt of sum_{k != 0} |u_k|^2 / |k|^4."""
    k4 = np.where(u.grid.k4 == 0.0, 1.0, u.grid.k4)
    weights = 1.0 / k4
    weights[0, 0, 0] = 0.0
    val = u.grid.length**3 * float(np.sum(weights * np.abs(u.coeffs) ** 2))
    return float(np.sqrt(max(val, 0.0)))


# ---------------------------------------------------------------------------
# alias-free products
#
# Quadratic products are formed on a finer collocation grid (3/2-rule) or on
# the same grid with a 2/3-rule mask.  Retained modes are limited to
# |m_i| <= grid.max_mode on every axis -- in particular the Nyquist plane is
# excluded -- which makes products of resolved fields exact, so the paper's
# integration-by-parts identities hold to roundoff rather than approximately.


def _embed(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """Place resolved modes of an n-grid coefficient array on the fine grid."""
    if grid.fine_n == grid.n:
        return np.where(grid.resolved_mask, coeffs, 0.0)
    src, dst = grid._pad_src, grid._pad_dst
    out = np.zeros(coeffs.shape[:-3] + (grid.fine_n,) * 3, dtype=complex)
    out[..., dst[:, None, None], dst[None, :, None], dst[None, None, :]] = coeffs[
        ..., src[:, None, None], src[None, :, None], src[None, None, :]
    ]
    return out


def _extract(grid: GridSpec, fine_coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`_embed`: keep resolved modes, zero the rest."""
    if grid.fine_n == grid.n:
        return np.where(grid.resolved_mask, fine_coeffs, 0.0)
    src, dst = grid._pad_src, grid._pad_dst
    out = np.zeros(fine_coeffs.shape[:-3] + (grid.n,) * 3, dtype=complex)
    out[..., src[:, None, None], src[None, :, None], src[None, None, :]] = fine_coeffs[
        ..., dst[:, None, None], dst[None, :, None], dst[None, None, :]
    ]
    return out


def fine_values(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """Collocation values of the resolved part of ``coeffs`` on the fine grid."""
    fine = _embed(grid, coeffs * grid.fine_n**3)
    return _fft.ifftn(fine, axes=_FFT_AXES, overwrite_x=True).real


def fine_gradient(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """All partial derivatives on the fine grid.

    For ``coeffs`` of shape (3, n, n, n) returns ``g`` of shape
    (3, 3, M, M, M) with ``g[i, j] = d_i f_j``.
    """
    dcoeffs = 1j * grid.k[:, None] * coeffs[None, :]
    return fine_values(grid, dcoeffs)


def spectrum_from_fine(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Transform fine-grid collocation values back to resolved n-grid modes."""
    fine = _fft.fftn(values, axes=_FFT_AXES)
    return _extract(grid, fine) / grid.fine_n**3
