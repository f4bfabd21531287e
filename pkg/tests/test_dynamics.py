import math

import numpy as np
import pytest

from bqlim.config import RunConfig
from bqlim.dynamics import (
    DT_CAP,
    FlowState,
    cfl_dt,
    energy_balance_residual,
    initial_state,
    rhs,
    run_invariant_report,
    sample_times,
    simulate,
    step,
)
from bqlim.spectral import Grid, GridField, SpectralField, from_spectral, to_spectral


def _zero_state(grid, nu=0.0, kappa=1e-2):
    z = np.zeros((grid.n, grid.n), dtype=complex)
    return FlowState(SpectralField(z.copy(), grid), SpectralField(z.copy(), grid),
                     t=0.0, nu=nu, kappa=kappa)


def _state_with_theta(grid, theta_values, nu=0.0, kappa=1e-2):
    z = np.zeros((grid.n, grid.n), dtype=complex)
    th = to_spectral(GridField(theta_values, grid))
    return FlowState(SpectralField(z, grid), th, t=0.0, nu=nu, kappa=kappa)


def test_state_rejects_nonzero_mean_vorticity(grid32):
    c = np.zeros((32, 32), dtype=complex)
    c[0, 0] = 1.0
    with pytest.raises(ValueError, match="mean-free"):
        FlowState(SpectralField(c, grid32),
                  SpectralField(np.zeros_like(c), grid32), 0.0, 0.0, 1e-2)


def test_rhs_zero_state(grid32):
    dw, dth = rhs(_zero_state(grid32))
    assert np.all(dw.coeffs == 0)
    assert np.all(dth.coeffs == 0)


def test_rhs_theta_independent_of_x1(grid32):
    _, x2 = grid32.points()
    st = _state_with_theta(grid32, np.sin(2 * np.pi * x2))
    dw, dth = rhs(st)
    assert np.max(np.abs(dw.coeffs)) < 1e-14
    assert np.max(np.abs(dth.coeffs)) < 1e-14


def test_rhs_buoyancy_forcing(grid64):
    x1, _ = grid64.points()
    st = _state_with_theta(grid64, np.sin(2 * np.pi * x1))
    dw, dth = rhs(st)
    expected = 2 * np.pi * np.cos(2 * np.pi * x1)
    assert np.max(np.abs(from_spectral(dw).values - expected)) < 1e-12
    assert np.max(np.abs(dth.coeffs)) < 1e-14


def test_step_zero_state_stays_zero(grid32):
    st = step(_zero_state(grid32), 0.01)
    assert st.t == pytest.approx(0.01)
    assert np.all(st.omega_hat.coeffs == 0)
    assert np.all(st.theta_hat.coeffs == 0)


def test_step_pure_diffusion_exact(grid32):
    _, x2 = grid32.points()
    st = _state_with_theta(grid32, np.sin(2 * np.pi * x2), kappa=3e-2)
    out = step(st, 0.125)
    decay = math.exp(-3e-2 * (2 * np.pi) ** 2 * 0.125)
    assert out.theta_hat.coeffs[0, 1] == pytest.approx(-0.5j * decay, abs=1e-15)
    assert np.max(np.abs(out.omega_hat.coeffs)) < 1e-14


def test_step_rejects_nonpositive_dt(grid32):
    with pytest.raises(ValueError):
        step(_zero_state(grid32), 0.0)


def test_temporal_order_at_least_rk4():
    cfg = RunConfig(n=32, t_final=0.1, nu=1e-3, kappa=1e-2,
                    omega0={"family": "taylor_green"},
                    theta0={"family": "gaussian", "amplitude": 0.2, "width": 0.25})
    st0 = initial_state(cfg)

    def run(nsteps):
        s = st0
        dt = 0.1 / nsteps
        for _ in range(nsteps):
            s = step(s, dt)
        return s.omega_hat.coeffs

    a, b, c = run(25), run(50), run(100)
    e1 = np.sqrt(np.sum(np.abs(a - c) ** 2))
    e2 = np.sqrt(np.sum(np.abs(b - c) ** 2))
    assert math.log2(e1 / e2) >= 3.7


def test_cfl_rest_flow_hits_cap(grid32):
    assert cfl_dt(_zero_state(grid32)) == DT_CAP


def test_cfl_scaling_in_resolution_and_safety():
    def state_for(n):
        grid = Grid(n)
        x1, x2 = grid.points()
        w = 4 * np.pi * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)
        z = np.zeros((n, n), dtype=complex)
        return FlowState(to_spectral(GridField(w, grid)), SpectralField(z, grid),
                         0.0, 0.0, 1e-2)

    st64, st128 = state_for(64), state_for(128)
    assert cfl_dt(st128) == pytest.approx(0.5 * cfl_dt(st64), rel=1e-10)
    assert cfl_dt(st64, safety=0.25) == pytest.approx(0.5 * cfl_dt(st64, safety=0.5), rel=1e-12)


def test_sample_times_include_endpoint():
    t = sample_times(0.1, 64)
    assert t[0] == 0.0
    assert t[-1] == pytest.approx(0.1)
    assert np.all(np.diff(t) > 0)
    assert list(sample_times(0.0, 64)) == [0.0]


def test_simulate_t_zero_single_sample():
    cfg = RunConfig(n=32, t_final=0.0, nu=0.0, kappa=1e-2,
                    omega0={"family": "taylor_green"}, theta0={"family": "zero"})
    trace, state = simulate(cfg)
    assert len(trace.t) == 1
    assert trace.steps == 0
    assert state.t == 0.0


def test_taylor_green_transport_conserves_lp_norms():
    cfg = RunConfig(n=64, t_final=0.25, nu=0.0, kappa=1e-2, cadence=64,
                    omega0={"family": "taylor_green"}, theta0={"family": "zero"})
    trace, _ = simulate(cfg)
    for col in (trace.omega_l1, trace.omega_l2, trace.omega_l4, trace.omega_linf):
        assert np.max(np.abs(col - col[0])) <= 1e-6 * col[0]


def test_theta_l2_nonincreasing_and_mean_conserved():
    cfg = RunConfig(n=32, t_final=0.2, nu=1e-3, kappa=5e-2, cadence=64,
                    omega0={"family": "taylor_green"},
                    theta0={"family": "gaussian", "amplitude": 0.2, "width": 0.25})
    st0 = initial_state(cfg)
    trace, final = simulate(cfg)
    assert np.all(np.diff(trace.theta_l2) <= 1e-12)
    assert abs(final.theta_hat.coeffs[0, 0] - st0.theta_hat.coeffs[0, 0]) < 1e-12
    assert final.mean_u == pytest.approx((0.0, 0.0), abs=1e-12)


def test_mean_u2_driven_by_theta_mean(grid32):
    th = np.zeros((32, 32), dtype=complex)
    th[0, 0] = 0.25  # constant temperature injects vertical momentum
    st = FlowState(SpectralField(np.zeros_like(th), grid32), SpectralField(th, grid32),
                   0.0, 0.0, 1e-2)
    out = step(st, 0.5)
    assert out.mean_u[1] == pytest.approx(0.125, abs=1e-14)
    assert out.mean_u[0] == 0.0


def test_blowup_aborts_with_partial_trace():
    cfg = RunConfig(n=32, t_final=0.5, nu=0.0, kappa=1e-2, cadence=16,
                    omega0={"family": "taylor_green", "amplitude": 1e7},
                    theta0={"family": "zero"})
    trace, _ = simulate(cfg)
    assert trace.aborted
    assert "exceeded" in trace.abort_reason
    assert 1 <= len(trace.t) < len(sample_times(0.5, 16))


def test_energy_balance_residual_needs_three_samples():
    cfg = RunConfig(n=32, t_final=0.0, nu=0.0, kappa=1e-2,
                    omega0={"family": "zero"}, theta0={"family": "zero"})
    trace, _ = simulate(cfg)
    with pytest.raises(ValueError):
        energy_balance_residual(trace)


def test_energy_balance_residual_refines_with_cadence():
    def residual(cadence):
        cfg = RunConfig(n=32, t_final=0.2, nu=1e-3, kappa=1e-2, cadence=cadence,
                        omega0={"family": "taylor_green"},
                        theta0={"family": "gaussian", "amplitude": 0.2, "width": 0.25})
        trace, _ = simulate(cfg)
        return energy_balance_residual(trace)

    assert residual(256) < residual(32)


def test_invariant_report_passes_on_resolved_run():
    cfg = RunConfig(n=64, t_final=0.25, nu=1e-3, kappa=1e-2, cadence=256,
                    omega0={"family": "taylor_green"},
                    theta0={"family": "gaussian", "amplitude": 0.2, "width": 0.25})
    trace, _ = simulate(cfg)
    report = run_invariant_report(trace)
    assert report["passed"], report


def test_companion_matches_plain_run_when_unfiltered():
    # A tracer whose cutoff exceeds every retained mode evolves exactly
    # like the vorticity itself.
    cfg = RunConfig(n=32, t_final=0.1, nu=1e-3, kappa=1e-2, cadence=32,
                    omega0={"family": "taylor_green"},
                    theta0={"family": "gaussian", "amplitude": 0.2, "width": 0.25},
                    mollify_cutoffs=(64,))
    trace, final = simulate(cfg)
    assert np.max(trace.companion_gap_l2[64]) < 1e-12
    ell, comp = final.companions[0]
    assert ell == 64
    assert np.max(np.abs(comp - final.omega_hat.coeffs)) < 1e-13
