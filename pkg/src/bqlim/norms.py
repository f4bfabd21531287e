"""Norms and integral functionals used by the bound engine.

All quadrature is the uniform rectangle rule on the collocation grid,
which on the area-1 torus reduces to plain means; it is spectrally
accurate for smooth periodic fields.  Supremum norms are maxima over
collocation points and therefore slightly underestimate the continuum
supremum; callers that assert L-infinity bounds carry an explicit slack
factor for this.
"""

from __future__ import annotations

import numpy as np

from .spectral import GridField, SpectralField, VelocityField, from_spectral, gradient_grids


def lp_norm(f: GridField, p: float) -> float:
    """L^p norm on the unit torus; p = inf gives the grid maximum of |f|."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float(np.mean(np.abs(f.values) ** p) ** (1.0 / p))


def l2_from_spectral(F: SpectralField) -> float:
    """L^2 norm via Parseval, no inverse transform needed."""
    return float(np.sqrt(np.sum(np.abs(F.coeffs) ** 2)))


def sobolev_w1p_norm(F: SpectralField, p: float) -> float:
    """W^{1,p} norm in the sum form ||f||_p + || |grad f| ||_p."""
    f = from_spectral(F)
    g1, g2 = gradient_grids(F)
    grad_mag = GridField(np.hypot(g1, g2), F.grid)
    return lp_norm(f, p) + lp_norm(grad_mag, p)


def besov_b1_inf1_norm(F: SpectralField) -> float:
    """B^1_{inf,1} norm with sharp dyadic frequency blocks.

    Block j = -1 is the mean mode with weight 2^{-1}; block j >= 0 keeps the
    annulus 2^{j-1} <= |k| < 2^j (Euclidean modulus of the integer
    wavevector) and is weighted by 2^j, measured in L^infinity on the grid.
    """
    g = F.grid
    total = 0.5 * abs(F.coeffs[0, 0])
    kmag = g.kmag
    kmax = float(np.max(kmag))
    j = 0
    while 2.0 ** (j - 1) <= kmax:
        mask = (kmag >= 2.0 ** (j - 1)) & (kmag < 2.0**j)
        if np.any(mask):
            block = from_spectral(SpectralField(F.coeffs * mask, g))
            total += 2.0**j * float(np.max(np.abs(block.values)))
        j += 1
    return float(total)


def velocity_gradient_magnitude(u: VelocityField) -> np.ndarray:
    """Pointwise Frobenius norm of the 2x2 velocity gradient."""
    a11, a12 = gradient_grids(u.u1)
    a21, a22 = gradient_grids(u.u2)
    return np.sqrt(a11**2 + a12**2 + a21**2 + a22**2)


def exp_gradient_integral(u: VelocityField, beta: float) -> float:
    """Quadrature of exp(beta * |grad u|); returns +inf on overflow."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return exp_integral_of_gradient_grid(velocity_gradient_magnitude(u), beta)


def exp_integral_of_gradient_grid(grad_mag: np.ndarray, beta: float) -> float:
    """Same integral for a precomputed |grad u| grid (cheap to re-evaluate)."""
    with np.errstate(over="ignore"):
        val = float(np.mean(np.exp(beta * grad_mag)))
    return val if np.isfinite(val) else float("inf")
