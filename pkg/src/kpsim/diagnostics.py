"""Scalar functionals used as numerical evidence: exponentially weighted
norms, the localized energy density, the virial functional, the almost
conserved Q functional, and anisotropic imbedding ratios.

All quadratures are trapezoid sums on the periodic grid (spectrally accurate
for smooth integrands).  One box-specific regularization: the exponential
weight e^{2 alpha z} is truncated to zero beyond z_cap (default lx/4).  On
the unbounded domain the fields measured by this norm decay ahead of the
soliton faster than the weight grows, and the natural antiderivative
(vanishing at +infinity) puts the auxiliary mass flow entirely behind the
crest.  On a periodic box that flow has nowhere to go: its return current
wraps around and forms a thin O(1/lx) shelf ahead of the soliton, which an
unbounded weight would amplify above every signal of interest.  The
truncation is irrelevant for any field supported left of z_cap and is
overridable everywhere it appears.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridError, RealField2D, antideriv_x, deriv_x, deriv_y, forward, inverse
from .kp2 import DiagnosticsSeries
from .soliton import psi_bump_l2sq, psi_cL


@dataclass
class WeightSpec:
    """Exponential-weight parameters; kind is one of 'X', 'W', 'virial'."""

    alpha: float
    kind: str = "X"
    eps: float = 0.05
    z_cap: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 2.0):
            raise ValueError("weight rate alpha must lie in (0, 2)")
        if self.kind not in ("X", "W", "virial"):
            raise ValueError(f"unknown weight kind {self.kind!r}")


def _cap(grid, z_cap):
    return grid.lx / 4.0 if z_cap is None else float(z_cap)


def x_weight(grid, alpha: float, z_cap: float | None = None) -> np.ndarray:
    """e^{2 alpha z} truncated to zero beyond z_cap, as a (1, nx) row."""
    cap = _cap(grid, z_cap)
    w = np.where(grid.x <= cap, np.exp(2.0 * alpha * np.minimum(grid.x, cap)), 0.0)
    return w[None, :]


def norm_X(v: RealField2D, alpha: float, z_cap: float | None = None) -> float:
    """Weighted L2 norm ||e^{alpha z} v||_{L^2} (capped weight)."""
    g = v.grid
    w = x_weight(g, alpha, z_cap)
    return float(np.sqrt(np.sum(w * v.values**2) * g.dx * g.dy))


def norm_W(v: RealField2D, alpha: float, t: float, L: float) -> float:
    """||(e^{-alpha|z|/2} + e^{-alpha|z+3t+L|}) v||_{L^2}; weight bounded by 2."""
    g = v.grid
    w = np.exp(-alpha * np.abs(g.x) / 2.0) + np.exp(-alpha * np.abs(g.x + 3.0 * t + L))
    return float(np.sqrt(np.sum((w[None, :] * v.values) ** 2) * g.dx * g.dy))


def energy_density(w: RealField2D, tol_mean: float = 1e-8) -> np.ndarray:
    """Pointwise 3 (dz w)^2 + 3 (dz^{-1} dy w)^2 + 4 w^2 (zero-mean contract)."""
    s = forward(w)
    try:
        anti = antideriv_x(deriv_y(s), tol_rel=tol_mean)
    except GridError as e:
        raise GridError(f"energy density needs the zero-mean contract: {e}") from e
    wx = inverse(deriv_x(s)).values
    wyx = inverse(anti).values
    return 3.0 * wx**2 + 3.0 * wyx**2 + 4.0 * w.values**2


def energy_E(
    w: RealField2D,
    alpha: float,
    z_cap: float | None = None,
    use_weight_derivative: bool = False,
) -> float:
    """Integral of the localized energy density against e^{2 alpha z} or its
    derivative 2 alpha e^{2 alpha z} (the dissipation pairing)."""
    g = w.grid
    dens = energy_density(w)
    wt = x_weight(g, alpha, z_cap)
    if use_weight_derivative:
        wt = 2.0 * alpha * wt
    return float(np.sum(wt * dens) * g.dx * g.dy)


def chi_plus(x, eps: float):
    """Virial cutoff 1 + tanh(eps x)."""
    return 1.0 + np.tanh(eps * np.asarray(x))


def chi_plus_prime(x, eps: float):
    return eps / np.cosh(eps * np.asarray(x)) ** 2


def virial_I(v: RealField2D, eps: float, center: float) -> float:
    """I = int chi_{+,eps}(x - center) v^2 dx dy."""
    g = v.grid
    w = chi_plus(g.x - center, eps)[None, :]
    return float(np.sum(w * v.values**2) * g.dx * g.dy)


def virial_dissipation(v: RealField2D, eps: float, center: float) -> float:
    """int chi'_{+,eps}(x - center) {(dx v)^2 + (dx^{-1} dy v)^2 + v^2}."""
    g = v.grid
    s = forward(v)
    vx = inverse(deriv_x(s)).values
    vyx = inverse(antideriv_x(deriv_y(s))).values
    w = chi_plus_prime(g.x - center, eps)[None, :]
    return float(np.sum(w * (vx**2 + vyx**2 + v.values**2)) * g.dx * g.dy)


def virial_series(snapshots, eps: float = 0.05, c1: float = 2.0, x0: float = 0.0) -> DiagnosticsSeries:
    """I_{x0}(t) with center x1(t) = c1 t + x0, plus the running dissipation
    integral accumulated by the trapezoid rule in t.

    snapshots: iterable of (t, RealField2D) in increasing t.
    """
    series = DiagnosticsSeries(columns=("t", "virial", "virial_dissip"))
    acc = 0.0
    prev = None
    for t, field in snapshots:
        center = c1 * t + x0
        rate = virial_dissipation(field, eps, center)
        if prev is not None:
            t_prev, rate_prev = prev
            acc += 0.5 * (rate + rate_prev) * (t - t_prev)
        series.append(t, virial_I(field, eps, center), acc)
        prev = (t, rate)
    return series


def Q_functional(v: RealField2D, c_of_y: np.ndarray, t: float, L: float) -> float:
    """Q = int { v^2 - 2 psi_{c(y),L}(z + 3t) v } dz dy."""
    g = v.grid
    c_of_y = np.broadcast_to(np.asarray(c_of_y, dtype=float), (g.ny,))
    psi = psi_cL(g.x[None, :] + 3.0 * t, c_of_y[:, None], L)
    return float(np.sum(v.values**2 - 2.0 * psi * v.values) * g.dx * g.dy)


def Q_companion(v: RealField2D, c_of_y: np.ndarray, t: float, L: float) -> float:
    """Q + 8 ||psi||_{L^2}^2 ||sqrt(c) - sqrt(2)||_{L^2(y)}^2; the combination
    whose drift stays quadratically small along the modulated flow."""
    g = v.grid
    c_of_y = np.broadcast_to(np.asarray(c_of_y, dtype=float), (g.ny,))
    amp = float(np.sum((np.sqrt(c_of_y) - np.sqrt(2.0)) ** 2) * g.dy)
    return Q_functional(v, c_of_y, t, L) + 8.0 * psi_bump_l2sq() * amp


def aniso_ratio(u: RealField2D, alpha: float, p: float, z_cap: float | None = None) -> float:
    """LHS/RHS of the weighted anisotropic imbedding at exponent p in [2, 6]:

        ||e^{alpha x} u||_{L^p}  vs  ||u||_X^{3/p - 1/2}
            (||dx u||_X + ||dx^{-1} dy u||_X + ||u||_X)^{3/2 - 3/p}.

    Both sides are degree-1 homogeneous in u, so the ratio is scale-free.
    """
    if not (2.0 <= p <= 6.0):
        raise ValueError("p must lie in [2, 6]")
    g = u.grid
    wt = x_weight(g, alpha, z_cap)  # = e^{2 alpha z}
    lhs = float((np.sum(wt ** (p / 2.0) * np.abs(u.values) ** p) * g.dx * g.dy) ** (1.0 / p))
    s = forward(u)
    nx_ = norm_X(u, alpha, z_cap)
    dux = norm_X(inverse(deriv_x(s)), alpha, z_cap)
    duyx = norm_X(inverse(antideriv_x(deriv_y(s))), alpha, z_cap)
    rhs = nx_ ** (3.0 / p - 0.5) * (dux + duyx + nx_) ** (1.5 - 3.0 / p)
    if rhs == 0.0:
        if lhs == 0.0:
            return 0.0
        raise GridError("aniso_ratio: vanishing right-hand side on a nonzero field")
    return lhs / rhs
