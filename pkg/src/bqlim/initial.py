"""Initial-data families for the flow experiments.

Two vorticity classes are provided: a smooth analytic cellular flow and a
rough random field with bounded amplitude, built by clipping a random
low-wavenumber spectrum and re-filtering.  Temperature fields are either
a smooth periodic bump or a random field with prescribed algebraic
spectral decay.  All constructors return mean-adjusted spectral fields on
the requested grid.
"""

from __future__ import annotations

import numpy as np

from .spectral import Grid, GridField, SpectralField, dealias, from_spectral, to_spectral

ROUGH_KMAX_FRACTION = 8  # random vorticity populates |k_i| <= n/8
ROUGH_CLIP_PASSES = 2


def taylor_green_vorticity(grid: Grid, amplitude: float = 1.0) -> SpectralField:
    """Cellular vorticity a*4*pi*sin(2*pi*x1)*sin(2*pi*x2) (|u| max = a)."""
    x1, x2 = grid.points()
    w = amplitude * 4.0 * np.pi * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)
    return to_spectral(GridField(w, grid))


def gaussian_bump(
    grid: Grid,
    amplitude: float = 0.2,
    width: float = 0.1,
    center=(0.5, 0.5),
    remove_mean: bool = True,
) -> SpectralField:
    """Smooth periodic bump exp(-(sin^2(pi*dx1)+sin^2(pi*dx2))/(2*width^2))."""
    x1, x2 = grid.points()
    s1 = np.sin(np.pi * (x1 - center[0]))
    s2 = np.sin(np.pi * (x2 - center[1]))
    f = amplitude * np.exp(-(s1**2 + s2**2) / (2.0 * width**2))
    F = to_spectral(GridField(f, grid))
    if remove_mean:
        c = F.coeffs.copy()
        c[0, 0] = 0.0
        F = SpectralField(c, grid)
    return F


def _random_hermitian_coeffs(grid: Grid, radial_profile, kmax: float, rng) -> np.ndarray:
    """Random-phase coefficients |c(k)| = profile(|k|), Hermitian by construction."""
    n = grid.n
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n, n))
    c = np.zeros((n, n), dtype=np.complex128)
    kmag = grid.kmag
    active = (kmag > 0) & (kmag <= kmax)
    # Drop unpaired Nyquist rows so conj-symmetrisation below is exact.
    active &= (grid.k1 != -n // 2) & (grid.k2 != -n // 2)
    c[active] = radial_profile(kmag[active]) * np.exp(1j * phases[active])
    mirrored = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
    return 0.5 * (c + np.conj(mirrored))


def rough_vorticity(grid: Grid, target_linf: float = 5.0, seed: int = 0) -> SpectralField:
    """Random bounded vorticity: |k|^{-1} spectrum on |k| <= n/8, clipped.

    The field is scaled to the target amplitude, then (clip to the target,
    low-pass back to |k| <= n/8, remove the mean) twice.  The final grid
    maximum lands within 10% of the target; a violation raises.
    """
    rng = np.random.default_rng(seed)
    kmax = grid.n / ROUGH_KMAX_FRACTION
    c = _random_hermitian_coeffs(grid, lambda r: 1.0 / r, kmax, rng)
    band = grid.kmag <= kmax

    w = from_spectral(SpectralField(c, grid)).values
    w *= target_linf / np.max(np.abs(w))
    for _ in range(ROUGH_CLIP_PASSES):
        w = np.clip(w, -target_linf, target_linf)
        ch = np.fft.fft2(w) / grid.n**2
        ch *= band
        ch[0, 0] = 0.0
        w = np.real(np.fft.ifft2(ch) * grid.n**2)
    final = float(np.max(np.abs(w)))
    if abs(final - target_linf) > 0.1 * target_linf:
        raise RuntimeError(
            f"clip-filter loop missed the amplitude target: {final:.3f} vs {target_linf:.3f}"
        )
    return SpectralField(np.fft.fft2(w) / grid.n**2, grid)


def spectral_tail_scalar(
    grid: Grid,
    amplitude: float = 0.2,
    decay: float = 3.5,
    seed: int = 0,
    remove_mean: bool = True,
) -> SpectralField:
    """Random scalar with algebraic spectrum (1+|k|)^{-decay} up to the dealias cut.

    Slow decay keeps measurable energy beyond any mollifier cutoff of
    interest, which the mollification-consistency checks rely on.
    """
    rng = np.random.default_rng(seed)
    kmax = grid.n // 3
    c = _random_hermitian_coeffs(grid, lambda r: (1.0 + r) ** (-decay), kmax, rng)
    if remove_mean:
        c[0, 0] = 0.0
    f = from_spectral(SpectralField(c, grid)).values
    f *= amplitude / np.max(np.abs(f))
    return SpectralField(np.fft.fft2(f) / grid.n**2, grid)


def build_field(grid: Grid, spec: dict, role: str) -> SpectralField:
    """Construct an initial field from a named-family description.

    ``spec`` carries ``family`` plus family parameters; ``role`` is
    "omega" or "theta" and selects which families are admissible.
    """
    family = spec.get("family")
    params = {k: v for k, v in spec.items() if k != "family"}
    if family == "zero":
        return SpectralField(np.zeros((grid.n, grid.n), dtype=np.complex128), grid)
    if role == "omega":
        if family == "taylor_green":
            return taylor_green_vorticity(grid, **params)
        if family == "rough":
            return rough_vorticity(grid, **params)
    if role == "theta":
        if family == "gaussian":
            params = dict(params)
            params.pop("seed", None)
            return dealias(gaussian_bump(grid, **params))
        if family == "spectral_tail":
            return spectral_tail_scalar(grid, **params)
    raise ValueError(f"unknown {role} initial-data family: {family!r}")
