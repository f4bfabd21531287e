"""Pseudo-spectral 2D Boussinesq flows and their vanishing-viscosity bounds."""

from .config import Constants, RunConfig, SweepConfig, parse_config
from .dynamics import FlowState, NormTrace, cfl_dt, energy_balance_residual, rhs, simulate, step
from .estimates import (
    BoundConstants,
    DominationReport,
    Envelope,
    arithmetic_bound,
    calibrate_gamma,
    check_domination,
    exponent_schedule,
    final_velocity_bound,
    flow_constants,
    gronwall_envelope,
    iterate_discrete,
    sigma_l2_bound,
    smallness_envelope,
    theta_stability_bound,
)
from .harness import convergence_order, mollified_consistency, sweep, vorticity_gap_gronwall_check
from .norms import besov_b1_inf1_norm, exp_gradient_integral, lp_norm, sobolev_w1p_norm
from .spectral import (
    Grid,
    GridField,
    SpectralField,
    VelocityField,
    biot_savart,
    dealias,
    derivative,
    from_spectral,
    mollify,
    rot,
    to_spectral,
)

__version__ = "0.1.0"
