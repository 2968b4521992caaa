"""Periodic 2-D grid, discrete Fourier transforms, and multiplier calculus.

Fields live on a rectangular box [-lx/2, lx/2) x [-ly/2, ly/2) sampled on a
uniform nx x ny lattice.  Real fields are stored as (ny, nx) float arrays;
spectra use the half-complex rfft layout (ny, nx//2 + 1) with the x-transform
along the last axis, so Hermitian symmetry in x is implicit in the storage.
The column xi = 0 holds the x-mean of each y-wavenumber line, which is what
the antiderivative and zero-mean machinery pivot on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Raised for dimension mismatches and violated spectral preconditions."""


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    """Periodic computational box with precomputed wavenumber tables.

    nx, ny must be powers of two (transform efficiency).  xi holds the
    non-negative x-wavenumbers of the rfft layout, eta the full fft-ordered
    y-wavenumbers.  XI, ETA are (ny, nx//2+1) broadcast tables.
    """

    nx: int
    ny: int
    lx: float
    ly: float
    x: np.ndarray = field(init=False, repr=False, compare=False)
    y: np.ndarray = field(init=False, repr=False, compare=False)
    xi: np.ndarray = field(init=False, repr=False, compare=False)
    eta: np.ndarray = field(init=False, repr=False, compare=False)
    XI: np.ndarray = field(init=False, repr=False, compare=False)
    ETA: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (_is_pow2(self.nx) and _is_pow2(self.ny)):
            raise GridError(f"nx, ny must be powers of two, got {self.nx}, {self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise GridError("box lengths must be positive")
        dx, dy = self.lx / self.nx, self.ly / self.ny
        object.__setattr__(self, "x", -self.lx / 2 + dx * np.arange(self.nx))
        object.__setattr__(self, "y", -self.ly / 2 + dy * np.arange(self.ny))
        object.__setattr__(self, "xi", 2 * np.pi * np.fft.rfftfreq(self.nx, dx))
        object.__setattr__(self, "eta", 2 * np.pi * np.fft.fftfreq(self.ny, dy))
        nxr = self.nx // 2 + 1
        object.__setattr__(self, "XI", np.broadcast_to(self.xi[None, :], (self.ny, nxr)).copy())
        object.__setattr__(self, "ETA", np.broadcast_to(self.eta[:, None], (self.ny, nxr)).copy())

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def nxr(self) -> int:
        return self.nx // 2 + 1

    def meshgrid(self):
        """(X, Y) tables of shape (ny, nx)."""
        return np.meshgrid(self.x, self.y)

    def sample(self, f) -> "RealField2D":
        """Sample a callable f(x, y) on the grid."""
        X, Y = self.meshgrid()
        return RealField2D(self, np.asarray(f(X, Y), dtype=float))


@dataclass
class RealField2D:
    """Physical-space real field u(x, y) on a Grid2D."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.ny, self.grid.nx):
            raise GridError(
                f"field shape {self.values.shape} does not match grid "
                f"({self.grid.ny}, {self.grid.nx})"
            )
        if not np.all(np.isfinite(self.values)):
            raise GridError("field contains non-finite values")

    def copy(self) -> "RealField2D":
        return RealField2D(self.grid, self.values.copy())

    def l2(self) -> float:
        """Grid-weighted L2 norm, trapezoid rule on the periodic box."""
        g = self.grid
        return float(np.sqrt(np.sum(self.values**2) * g.dx * g.dy))

    def lp(self, p: float) -> float:
        g = self.grid
        return float((np.sum(np.abs(self.values) ** p) * g.dx * g.dy) ** (1.0 / p))

    def x_mean_per_line(self) -> np.ndarray:
        """Per-y-line x-average, shape (ny,)."""
        return self.values.mean(axis=1)


@dataclass
class ComplexSpectrum2D:
    """Half-complex DFT coefficients of a real field (rfft along x)."""

    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.grid.ny, self.grid.nxr):
            raise GridError(
                f"spectrum shape {self.coeffs.shape} does not match grid "
                f"({self.grid.ny}, {self.grid.nxr})"
            )

    def copy(self) -> "ComplexSpectrum2D":
        return ComplexSpectrum2D(self.grid, self.coeffs.copy())

    def l2(self) -> float:
        """Parseval partner of RealField2D.l2 (accounts for rfft folding)."""
        g = self.grid
        w = np.full(g.nxr, 2.0)
        w[0] = 1.0
        if g.nx % 2 == 0:
            w[-1] = 1.0
        s = np.sum(w[None, :] * np.abs(self.coeffs) ** 2)
        return float(np.sqrt(s * g.dx * g.dy / (g.nx * g.ny)))

    def x_mean_per_line(self) -> np.ndarray:
        """Per-y-line x-average recovered from the xi = 0 column."""
        return np.fft.ifft(self.coeffs[:, 0]).real / self.grid.nx


def forward(f: RealField2D) -> ComplexSpectrum2D:
    return ComplexSpectrum2D(f.grid, np.fft.rfft2(f.values, axes=(0, 1)))


def inverse(s: ComplexSpectrum2D) -> RealField2D:
    g = s.grid
    return RealField2D(g, np.fft.irfft2(s.coeffs, s=(g.ny, g.nx), axes=(0, 1)))


def apply_multiplier(s: ComplexSpectrum2D, m) -> ComplexSpectrum2D:
    """Pointwise Fourier multiplier  coeff(xi, eta) *= m(xi, eta).

    m is a callable acting on the broadcast wavenumber tables.  Non-finite
    symbol values are tolerated only on modes whose coefficient is exactly
    zero; a non-finite value on a live mode is an error.
    """
    g = s.grid
    with np.errstate(divide="ignore", invalid="ignore"):
        mv = np.asarray(m(g.XI, g.ETA), dtype=complex)
    mv = np.broadcast_to(mv, s.coeffs.shape)
    bad = ~np.isfinite(mv)
    if np.any(bad):
        if np.any(s.coeffs[bad] != 0):
            raise GridError("non-finite multiplier value on a live spectral mode")
        mv = np.where(bad, 0.0, mv)
    return ComplexSpectrum2D(g, s.coeffs * mv)


def deriv_x(s: ComplexSpectrum2D, order: int = 1) -> ComplexSpectrum2D:
    return apply_multiplier(s, lambda xi, eta: (1j * xi) ** order)


def deriv_y(s: ComplexSpectrum2D, order: int = 1) -> ComplexSpectrum2D:
    return apply_multiplier(s, lambda xi, eta: (1j * eta) ** order)


def check_zero_x_mean(s: ComplexSpectrum2D, tol_rel: float = 1e-10) -> None:
    """Enforce the zero-mean contract on the xi = 0 column.

    The tolerance is relative to the field norm; the error names the worst
    offending y-wavenumber.
    """
    scale = s.l2()
    row = np.abs(s.coeffs[:, 0]) * np.sqrt(s.grid.dx * s.grid.dy / (s.grid.nx * s.grid.ny))
    worst = int(np.argmax(row))
    if row[worst] > tol_rel * max(scale, 1e-300):
        raise GridError(
            f"nonzero x-mean: xi=0 content {row[worst]:.3e} at eta={s.grid.eta[worst]:.6g} "
            f"exceeds {tol_rel:.1e} x field norm {scale:.3e}"
        )


def antideriv_x(s: ComplexSpectrum2D, tol_rel: float = 1e-10) -> ComplexSpectrum2D:
    """Spectral antiderivative: divide by i*xi, pinning the xi = 0 row to 0.

    Requires the per-line x-mean content to sit below tol_rel relative to the
    field norm (zero-mean contract).
    """
    check_zero_x_mean(s, tol_rel)
    g = s.grid
    out = s.coeffs.copy()
    out[:, 1:] = out[:, 1:] / (1j * g.XI[:, 1:])
    out[:, 0] = 0.0
    return ComplexSpectrum2D(g, out)


def dealias_mask(g: Grid2D) -> np.ndarray:
    """True on modes kept by the 2/3 rule."""
    xicut = (2.0 / 3.0) * np.abs(g.xi).max()
    etacut = (2.0 / 3.0) * np.abs(g.eta).max()
    return (np.abs(g.XI) <= xicut) & (np.abs(g.ETA) <= etacut)


def dealias(s: ComplexSpectrum2D) -> ComplexSpectrum2D:
    out = s.coeffs.copy()
    out[~dealias_mask(s.grid)] = 0.0
    return ComplexSpectrum2D(s.grid, out)


def shift_x(s: ComplexSpectrum2D, shift) -> ComplexSpectrum2D:
    """Translate u(x, y) -> u(x - shift(y), y) by Fourier phase in x.

    shift may be a scalar or an (ny,) array of per-line offsets.  A constant
    shift is a diagonal phase on the 2-D spectrum; a per-line shift must act
    in the mixed representation (physical y, spectral x), since the y-DFT has
    already mixed the lines.
    """
    g = s.grid
    sh = np.asarray(shift, dtype=float)
    if sh.ndim == 0:
        phase = np.exp(-1j * g.xi[None, :] * float(sh))
        return ComplexSpectrum2D(g, s.coeffs * phase)
    if sh.shape != (g.ny,):
        raise GridError(f"per-line shift must have shape ({g.ny},), got {sh.shape}")
    mixed = np.fft.ifft(s.coeffs, axis=0)  # rows are physical y again
    mixed *= np.exp(-1j * g.xi[None, :] * sh[:, None])
    return ComplexSpectrum2D(g, np.fft.fft(mixed, axis=0))


def shift_field_x(f: RealField2D, shift) -> RealField2D:
    return inverse(shift_x(forward(f), shift))
