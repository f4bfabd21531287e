"""Tour of the spectral toolkit: transforms, inversion, norms, filters.

Run with:  python3 demos/01_spectral_toolkit.py
"""

import numpy as np

from bqlim.initial import taylor_green_vorticity
from bqlim.norms import besov_b1_inf1_norm, exp_gradient_integral, lp_norm, sobolev_w1p_norm
from bqlim.spectral import (
    Grid,
    GridField,
    biot_savart,
    dealias,
    derivative,
    from_spectral,
    mollify,
    rot,
    to_spectral,
)

grid = Grid(128)
x1, x2 = grid.points()

# Round trip: the transform pair is an identity up to round-off.
f = GridField(np.sin(2 * np.pi * 3 * x1) * np.cos(2 * np.pi * x2), grid)
F = to_spectral(f)
print("round-trip error:", np.max(np.abs(from_spectral(F).values - f.values)))

# Spectral derivative of sin(2 pi x1) is 2 pi cos(2 pi x1) to machine precision.
s = to_spectral(GridField(np.sin(2 * np.pi * x1), grid))
ds = from_spectral(derivative(s, 1)).values
print("derivative error:", np.max(np.abs(ds - 2 * np.pi * np.cos(2 * np.pi * x1))))

# Vorticity inversion: u = rot^{-1} omega is divergence-free and exact.
omega = taylor_green_vorticity(grid)
u = biot_savart(omega)
back = rot(u)
rel = np.sqrt(np.sum(np.abs(back.coeffs - omega.coeffs) ** 2)
              / np.sum(np.abs(omega.coeffs) ** 2))
print("rot(biot_savart(omega)) relative error:", rel)

# The norm family used by the bound engine.
w = from_spectral(omega)
print("|omega|_L1 =", lp_norm(w, 1))
print("|omega|_L2 =", lp_norm(w, 2))
print("|omega|_Linf =", lp_norm(w, np.inf), " (exact: 4 pi =", 4 * np.pi, ")")
print("W^{1,2} norm of omega:", sobolev_w1p_norm(omega, 2))
print("B^1_{inf,1} norm of omega:", besov_b1_inf1_norm(omega))

# Exponential integrability of the velocity gradient: at small beta the
# integral approaches the domain area 1; it grows monotonically in beta.
for beta in (0.01, 0.1, 0.2):
    print(f"int exp({beta} |grad u|) = {exp_gradient_integral(u, beta):.4f}")

# Low-pass filters: 2/3-rule truncation and the smooth mollifier.
noisy = to_spectral(GridField(np.random.default_rng(0).standard_normal((128, 128)), grid))
print("energy before/after dealias:",
      np.sum(np.abs(noisy.coeffs) ** 2), np.sum(np.abs(dealias(noisy).coeffs) ** 2))
for ell in (4, 8, 16):
    err = np.sqrt(np.sum(np.abs(mollify(noisy, ell).coeffs - noisy.coeffs) ** 2))
    print(f"mollify cutoff {ell}: residual {err:.4f}")
