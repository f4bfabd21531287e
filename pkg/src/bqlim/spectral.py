"""Fourier-side field algebra on the periodic unit square.

Fields live on an n x n collocation grid of the torus [0,1]^2 and are
represented either by real point values (``GridField``) or by complex
Fourier coefficients indexed by integer wavevectors k = (k1, k2) with
|ki| <= n/2 in numpy fft layout (``SpectralField``).  Coefficients are
normalised so that ``coeffs[0, 0]`` equals the mean of the field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Mean-freeness tolerance accepted by the vorticity inversion.
MEAN_FREE_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform n x n collocation grid on the unit torus (area exactly 1).

    Parameters
    ----------
    n : int
        Collocation points per axis; must be even and >= 8.

    Derived arrays (cached at construction): integer wavevectors ``k1``,
    ``k2`` varying along axes 0 and 1, ``ksq = |k|^2``, first-derivative
    multipliers ``d1``, ``d2`` (Nyquist row zeroed), the 2/3-rule dealias
    mask, and the Biot-Savart inversion multipliers ``bs1``, ``bs2``.
    """

    n: int

    def __post_init__(self):
        n = self.n
        if n % 2 != 0 or n < 8:
            raise ValueError(f"grid size must be even and >= 8, got {n}")
        kax = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        k1 = kax[:, None] + np.zeros((1, n), dtype=np.int64)
        k2 = kax[None, :] + np.zeros((n, 1), dtype=np.int64)
        ksq = k1 * k1 + k2 * k2

        # Spectral d/dx_i: multiply by 2*pi*i*k_i; the unpaired Nyquist
        # mode k_i = -n/2 is zeroed to keep derivatives real-valued.
        d1 = TWO_PI * 1j * k1.astype(np.float64)
        d2 = TWO_PI * 1j * k2.astype(np.float64)
        d1[k1 == -n // 2] = 0.0
        d2[k2 == -n // 2] = 0.0

        # u = rot^{-1} omega: u1_hat = 2*pi*i*k2 * omega_hat / (2*pi*|k|)^2,
        # u2_hat = -2*pi*i*k1 * omega_hat / (2*pi*|k|)^2, so rot(u) = omega.
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / (TWO_PI**2 * ksq.astype(np.float64))
        inv[0, 0] = 0.0
        bs1 = d2 * inv
        bs2 = -d1 * inv

        cut = n // 3
        dealias_mask = (np.abs(k1) <= cut) & (np.abs(k2) <= cut)

        object.__setattr__(self, "spacing", 1.0 / n)
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "ksq", ksq)
        object.__setattr__(self, "kmag", np.sqrt(ksq.astype(np.float64)))
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "d2", d2)
        object.__setattr__(self, "bs1", bs1)
        object.__setattr__(self, "bs2", bs2)
        object.__setattr__(self, "dealias_mask", dealias_mask)

    def points(self):
        """Collocation coordinates (x1, x2) as two n x n arrays."""
        x = np.arange(self.n) * self.spacing
        return np.meshgrid(x, x, indexing="ij")


@dataclass(frozen=True)
class GridField:
    """Real scalar field sampled on the collocation points."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError("field shape does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid field contains non-finite entries")


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a real field (Hermitian-symmetric)."""

    coeffs: np.ndarray
    grid: Grid

    def __post_init__(self):
        if self.coeffs.shape != (self.grid.n, self.grid.n):
            raise ValueError("coefficient shape does not match grid")


@dataclass(frozen=True)
class VelocityField:
    """Divergence-free velocity, one SpectralField per component."""

    u1: SpectralField
    u2: SpectralField

    @property
    def grid(self):
        return self.u1.grid

    @property
    def mean(self):
        return (float(self.u1.coeffs[0, 0].real), float(self.u2.coeffs[0, 0].real))


def to_spectral(f: GridField) -> SpectralField:
    """Forward transform; coeffs[0,0] equals the mean of f."""
    n = f.grid.n
    return SpectralField(np.fft.fft2(f.values) / (n * n), f.grid)


def from_spectral(F: SpectralField) -> GridField:
    """Inverse transform, discarding the round-off imaginary part."""
    n = F.grid.n
    return GridField(np.real(np.fft.ifft2(F.coeffs) * (n * n)), F.grid)


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Max deviation of coeffs from conj-symmetry coeffs(-k) = conj(coeffs(k))."""
    mirrored = np.roll(coeffs[::-1, ::-1], 1, axis=(0, 1))
    return float(np.max(np.abs(coeffs - np.conj(mirrored))))


def derivative(F: SpectralField, axis: int) -> SpectralField:
    """Spectral partial derivative along axis 1 or 2 (Nyquist zeroed)."""
    if axis == 1:
        mult = F.grid.d1
    elif axis == 2:
        mult = F.grid.d2
    else:
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    return SpectralField(mult * F.coeffs, F.grid)


def gradient_grids(F: SpectralField):
    """Both partial derivatives of F evaluated on the grid."""
    g1 = from_spectral(derivative(F, 1)).values
    g2 = from_spectral(derivative(F, 2)).values
    return g1, g2


def dealias(F: SpectralField) -> SpectralField:
    """2/3-rule truncation: zero all modes with max(|k1|,|k2|) > n/3."""
    return SpectralField(F.coeffs * F.grid.dealias_mask, F.grid)


def biot_savart(omega: SpectralField, mean_u=(0.0, 0.0)) -> VelocityField:
    """Invert vorticity to the divergence-free velocity with rot(u) = omega.

    The vorticity must be mean-free; the k = 0 velocity mode is set from
    ``mean_u`` since it is invisible to the vorticity.
    """
    coeffs = omega.coeffs
    scale = max(1.0, float(np.sqrt(np.sum(np.abs(coeffs) ** 2))))
    if abs(coeffs[0, 0]) > MEAN_FREE_TOL * scale:
        raise ValueError(
            f"vorticity must be mean-free; |mean| = {abs(coeffs[0, 0]):.3e}"
        )
    g = omega.grid
    u1 = g.bs1 * coeffs
    u2 = g.bs2 * coeffs
    u1[0, 0] = mean_u[0]
    u2[0, 0] = mean_u[1]
    return VelocityField(SpectralField(u1, g), SpectralField(u2, g))


def rot(u: VelocityField) -> SpectralField:
    """Scalar curl d1(u2) - d2(u1)."""
    g = u.grid
    return SpectralField(g.d1 * u.u2.coeffs - g.d2 * u.u1.coeffs, g)


def divergence(u: VelocityField) -> SpectralField:
    g = u.grid
    return SpectralField(g.d1 * u.u1.coeffs + g.d2 * u.u2.coeffs, g)


def mollifier_weights(grid: Grid, ell: int) -> np.ndarray:
    """Smooth low-pass response: 1 up to |k| = ell, Gaussian roll-off to 2*ell.

    The roll-off factor is exp(-4*ln2*(|k|/ell - 1)^2), i.e. the response is
    1/16 at |k| = 2*ell, beyond which it is truncated to zero.
    """
    if ell < 1:
        raise ValueError(f"mollifier cutoff must be >= 1, got {ell}")
    r = grid.kmag / float(ell)
    w = np.exp(-4.0 * np.log(2.0) * (r - 1.0) ** 2)
    w[r <= 1.0] = 1.0
    w[r > 2.0] = 0.0
    return w


def mollify(F: SpectralField, ell: int) -> SpectralField:
    """Apply the smooth spectral low-pass at cutoff ell."""
    return SpectralField(F.coeffs * mollifier_weights(F.grid, ell), F.grid)
