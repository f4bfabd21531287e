"""Time integration of the vorticity-temperature system on the torus.

State variables are the Fourier coefficients of vorticity and
temperature.  The velocity is recovered from vorticity at every stage,
the buoyancy force enters the vorticity equation as the x1-derivative of
temperature, and both advection products are evaluated pseudo-spectrally
with 2/3-rule truncation, so the semi-discrete system is the alias-free
Galerkin truncation.  Diffusion (nu for vorticity, kappa for
temperature) is integrated exactly by integrating factors wrapped around
classical four-stage Runge-Kutta; with nu = 0 the vorticity factor is
exactly the identity, so viscous and inviscid runs share one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig
from .initial import build_field
from .norms import lp_norm
from .spectral import TWO_PI, Grid, GridField, SpectralField, mollifier_weights

BLOWUP_LINF = 1e6
U_FLOOR = 1e-8
# Upper bound on any single step, returned when the flow is at rest.
DT_CAP = 1e-2


class BlowupError(RuntimeError):
    """Raised when the integration produces non-finite or runaway fields."""


@dataclass(frozen=True)
class FlowState:
    """Prognostic state of one run: (omega_hat, theta_hat, t, nu, kappa).

    ``companions`` holds optional low-pass-filtered vorticity tracers
    (cutoff, coeffs) transported by the same velocity with the
    correspondingly filtered buoyancy forcing; they ride along for the
    mollification-consistency diagnostics.
    """

    omega_hat: SpectralField
    theta_hat: SpectralField
    t: float
    nu: float
    kappa: float
    mean_u: tuple = (0.0, 0.0)
    companions: tuple = ()

    def __post_init__(self):
        if self.nu < 0 or self.kappa <= 0:
            raise ValueError("need nu >= 0 and kappa > 0")
        w0 = self.omega_hat.coeffs[0, 0]
        if abs(w0) > 1e-12 * max(1.0, float(np.abs(self.omega_hat.coeffs).max())):
            raise ValueError(f"vorticity must be mean-free, got mean {w0}")

    @property
    def grid(self) -> Grid:
        return self.omega_hat.grid


@dataclass
class NormTrace:
    """Sampled norm time series of one run plus integration metadata."""

    t: np.ndarray
    u_l2: np.ndarray
    omega_l1: np.ndarray
    omega_l2: np.ndarray
    omega_l4: np.ndarray
    omega_linf: np.ndarray
    theta_l2: np.ndarray
    theta_linf: np.ndarray
    theta_h1: np.ndarray
    grad_theta_linf: np.ndarray
    d1_theta_linf: np.ndarray
    theta_besov: np.ndarray
    kinetic: np.ndarray
    work: np.ndarray
    dissipation: np.ndarray
    omega_tail: np.ndarray
    theta_diss_cum: np.ndarray
    nu: float
    kappa: float
    n: int
    steps: int = 0
    dt_min: float = math.inf
    dt_max: float = 0.0
    aborted: bool = False
    abort_reason: str = ""
    companion_gap_l2: dict = None
    companion_forcing_tail_l2: dict = None
    companion_ic_tail_l2: dict = None

    @property
    def grad_theta_l2(self) -> np.ndarray:
        # The H1 column is the sum form ||theta||_2 + ||grad theta||_2.
        return self.theta_h1 - self.theta_l2

    def columns(self):
        return {
            "t": self.t, "u_l2": self.u_l2, "omega_l1": self.omega_l1,
            "omega_l2": self.omega_l2, "omega_l4": self.omega_l4,
            "omega_linf": self.omega_linf, "theta_l2": self.theta_l2,
            "theta_linf": self.theta_linf, "theta_h1": self.theta_h1,
            "grad_theta_linf": self.grad_theta_linf,
            "d1_theta_linf": self.d1_theta_linf,
            "theta_besov": self.theta_besov, "kinetic": self.kinetic,
            "work": self.work, "dissipation": self.dissipation,
            "omega_tail": self.omega_tail, "theta_diss_cum": self.theta_diss_cum,
        }


def _grid_values(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.shape[0]
    return np.real(np.fft.ifft2(coeffs) * (n * n))


def _to_coeffs(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    return np.fft.fft2(values) / (n * n)


def _nonlinear(grid, w, th, comps, mean_u, comp_weights):
    """Dealiased advection plus buoyancy forcing for all carried fields."""
    u1h = grid.bs1 * w
    u2h = grid.bs2 * w
    u1h[0, 0] = mean_u[0]
    u2h[0, 0] = mean_u[1]
    u1 = _grid_values(u1h)
    u2 = _grid_values(u2h)

    mask = grid.dealias_mask
    f_th = grid.d1 * th

    def advect(c):
        cx = _grid_values(grid.d1 * c)
        cy = _grid_values(grid.d2 * c)
        return _to_coeffs(u1 * cx + u2 * cy) * mask

    dw = -advect(w) + f_th
    dth = -advect(th)
    if not (np.isfinite(dw[0, 0]) and np.all(np.isfinite(dth)) and np.all(np.isfinite(dw))):
        raise BlowupError("non-finite advection product; integration aborted")
    dcomps = tuple(-advect(c) + weights * f_th
                   for (c, weights) in zip(comps, comp_weights))
    return dw, dth, dcomps


def cfl_dt(state: FlowState, safety: float = 0.5) -> float:
    """Advective step limit.

    dt = safety * spacing / max(|u|_inf, floor), additionally capped by
    half the oscillation period of the fastest retained mode advected at
    |u|_inf, and by the absolute ceiling DT_CAP (which is what a flow at
    rest receives).
    """
    g = state.grid
    w = state.omega_hat.coeffs
    u1h = g.bs1 * w
    u2h = g.bs2 * w
    u1h[0, 0] = state.mean_u[0]
    u2h[0, 0] = state.mean_u[1]
    umax = float(np.max(np.hypot(_grid_values(u1h), _grid_values(u2h))))
    kcut = g.n // 3
    dt_advect = safety * g.spacing / max(umax, U_FLOOR)
    dt_mode = 0.5 / max(kcut * umax, U_FLOOR)
    return min(dt_advect, dt_mode, DT_CAP)


def rhs(state: FlowState):
    """Tendencies of (omega_hat, theta_hat) excluding the diffusion terms."""
    g = state.grid
    comp_cuts = tuple(ell for ell, _ in state.companions)
    comps = tuple(c for _, c in state.companions)
    weights = tuple(mollifier_weights(g, ell) for ell in comp_cuts)
    dw, dth, _ = _nonlinear(g, state.omega_hat.coeffs, state.theta_hat.coeffs,
                            comps, state.mean_u, weights)
    return SpectralField(dw, g), SpectralField(dth, g)


class _Stepper:
    """Per-run workspace: cached integrating factors and mollifier weights."""

    def __init__(self, grid: Grid, nu: float, kappa: float, companion_cutoffs=()):
        self.grid = grid
        self.nu = nu
        self.kappa = kappa
        self.lap = (TWO_PI**2) * grid.ksq.astype(np.float64)
        self.comp_weights = tuple(mollifier_weights(grid, ell) for ell in companion_cutoffs)
        # 2*kappa*int ||grad theta||^2 dt accumulated with the RK4 quadrature
        # rule itself, so the dissipation identity holds to integrator order.
        self.theta_diss = 0.0
        self._dt = None
        self._factors = None

    def _grad_sq(self, th):
        return float(np.sum(self.lap * np.abs(th) ** 2))

    def _half_factors(self, dt):
        if dt != self._dt:
            ew = np.exp(-0.5 * dt * self.nu * self.lap) if self.nu > 0 else None
            eth = np.exp(-0.5 * dt * self.kappa * self.lap)
            self._dt = dt
            self._factors = (ew, eth)
        return self._factors

    def step(self, state: FlowState, dt: float) -> FlowState:
        """One integrating-factor RK4 step of size dt."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        g = self.grid
        ew_h, eth_h = self._half_factors(dt)

        w0 = state.omega_hat.coeffs
        th0 = state.theta_hat.coeffs
        comps0 = tuple(c for _, c in state.companions)
        mean_th = float(th0[0, 0].real)
        mu1, mu2 = state.mean_u
        mean_half = (mu1, mu2 + 0.5 * dt * mean_th)
        mean_full = (mu1, mu2 + dt * mean_th)

        def scale_w(c):
            return c if ew_h is None else ew_h * c

        def nonlin(w, th, comps, mean_u):
            return _nonlinear(g, w, th, comps, mean_u, self.comp_weights)

        kw1, kth1, kc1 = nonlin(w0, th0, comps0, state.mean_u)

        s2_w = scale_w(w0 + 0.5 * dt * kw1)
        s2_th = eth_h * (th0 + 0.5 * dt * kth1)
        s2_c = tuple(scale_w(c + 0.5 * dt * k) for c, k in zip(comps0, kc1))
        kw2, kth2, kc2 = nonlin(s2_w, s2_th, s2_c, mean_half)

        s3_w = scale_w(w0) + 0.5 * dt * kw2
        s3_th = eth_h * th0 + 0.5 * dt * kth2
        s3_c = tuple(scale_w(c) + 0.5 * dt * k for c, k in zip(comps0, kc2))
        kw3, kth3, kc3 = nonlin(s3_w, s3_th, s3_c, mean_half)

        s4_w = scale_w(scale_w(w0) + dt * kw3)
        s4_th = eth_h * (eth_h * th0 + dt * kth3)
        s4_c = tuple(scale_w(scale_w(c) + dt * k) for c, k in zip(comps0, kc3))
        kw4, kth4, kc4 = nonlin(s4_w, s4_th, s4_c, mean_full)

        sixth = dt / 6.0
        w1 = scale_w(scale_w(w0 + sixth * kw1) + 2.0 * sixth * (kw2 + kw3)) + sixth * kw4
        th1 = eth_h * (eth_h * (th0 + sixth * kth1) + 2.0 * sixth * (kth2 + kth3)) + sixth * kth4
        self.theta_diss += 2.0 * self.kappa * sixth * (
            self._grad_sq(th0) + 2.0 * self._grad_sq(s2_th)
            + 2.0 * self._grad_sq(s3_th) + self._grad_sq(s4_th))
        comps1 = tuple(
            scale_w(scale_w(c + sixth * k1) + 2.0 * sixth * (k2 + k3)) + sixth * k4
            for c, k1, k2, k3, k4 in zip(comps0, kc1, kc2, kc3, kc4)
        )
        w1[0, 0] = 0.0

        return replace(
            state,
            omega_hat=SpectralField(w1, g),
            theta_hat=SpectralField(th1, g),
            t=state.t + dt,
            mean_u=mean_full,
            companions=tuple((ell, c) for (ell, _), c in zip(state.companions, comps1)),
        )


def step(state: FlowState, dt: float) -> FlowState:
    """Single step entry point (builds a throwaway workspace)."""
    cuts = tuple(ell for ell, _ in state.companions)
    return _Stepper(state.grid, state.nu, state.kappa, cuts).step(state, dt)


def sample_times(t_final: float, cadence: int) -> np.ndarray:
    """t = k/cadence up to t_final, with t_final itself always included."""
    m = int(math.floor(t_final * cadence + 1e-9))
    times = [k / cadence for k in range(m + 1)]
    if times[-1] < t_final - 1e-12:
        times.append(t_final)
    return np.asarray(times)


def initial_state(cfg: RunConfig) -> FlowState:
    """Assemble the (dealiased, mean-adjusted) initial state for a config."""
    grid = Grid(cfg.n)
    w = build_field(grid, cfg.omega0, "omega")
    th = build_field(grid, cfg.theta0, "theta")
    wc = w.coeffs * grid.dealias_mask
    thc = th.coeffs * grid.dealias_mask
    wc[0, 0] = 0.0
    companions = tuple(
        (ell, wc * mollifier_weights(grid, ell)) for ell in cfg.mollify_cutoffs
    )
    return FlowState(
        omega_hat=SpectralField(wc, grid),
        theta_hat=SpectralField(thc, grid),
        t=0.0, nu=cfg.nu, kappa=cfg.kappa,
        mean_u=tuple(cfg.mean_u0), companions=companions,
    )


def iterate_samples(cfg: RunConfig, state: FlowState = None):
    """Generator driving one run; yields (sample_index, state) at sample times.

    Steps adaptively under the CFL limit, clamped so every sample time is
    hit exactly.  Raises BlowupError mid-iteration on runaway vorticity;
    the states yielded before the abort remain valid.  Deterministic for
    a fixed config.
    """
    if state is None:
        state = initial_state(cfg)
    stepper = _Stepper(state.grid, cfg.nu, cfg.kappa, cfg.mollify_cutoffs)
    times = sample_times(cfg.t_final, cfg.cadence)
    stats = {"steps": 0, "dt_min": math.inf, "dt_max": 0.0, "theta_diss": 0.0}

    yield 0, state, stats
    coeff_l1_cap = BLOWUP_LINF  # sum |omega_hat| bounds the grid maximum
    for idx in range(1, len(times)):
        target = float(times[idx])
        while state.t < target - 1e-13:
            dt = min(cfl_dt(state, cfg.safety), target - state.t)
            state = stepper.step(state, dt)
            stats["steps"] += 1
            stats["dt_min"] = min(stats["dt_min"], dt)
            stats["dt_max"] = max(stats["dt_max"], dt)
            stats["theta_diss"] = stepper.theta_diss
            if float(np.sum(np.abs(state.omega_hat.coeffs))) > coeff_l1_cap:
                wmax = float(np.max(np.abs(_grid_values(state.omega_hat.coeffs))))
                if wmax > BLOWUP_LINF:
                    raise BlowupError(
                        f"|omega|_inf = {wmax:.3e} exceeded {BLOWUP_LINF:.0e} at t = {state.t:.6f}"
                    )
        state = replace(state, t=target)
        yield idx, state, stats


def sample_norms(state: FlowState) -> dict:
    """All trace columns for one state."""
    from .norms import besov_b1_inf1_norm, sobolev_w1p_norm

    g = state.grid
    w = state.omega_hat.coeffs
    th = state.theta_hat.coeffs

    u1h = g.bs1 * w
    u2h = g.bs2 * w
    u1h[0, 0] = state.mean_u[0]
    u2h[0, 0] = state.mean_u[1]
    u_l2_sq = float(np.sum(np.abs(u1h) ** 2 + np.abs(u2h) ** 2))
    lap = (TWO_PI**2) * g.ksq
    grad_u_sq = float(np.sum(lap * (np.abs(u1h) ** 2 + np.abs(u2h) ** 2)))
    work = float(np.real(np.sum(th * np.conj(u2h))))

    w_grid = GridField(_grid_values(w), g)
    th_field = SpectralField(th, g)
    th_grid = GridField(_grid_values(th), g)
    d1th = _grid_values(g.d1 * th)
    d2th = _grid_values(g.d2 * th)

    # Resolution diagnostic: relative coefficient magnitude on the
    # outermost retained ring (the dealias boundary).
    cut = g.n // 3
    ring = np.maximum(np.abs(g.k1), np.abs(g.k2)) == cut
    wabs_max = float(np.max(np.abs(w)))
    tail = float(np.max(np.abs(w[ring]))) / max(wabs_max, 1e-300)

    return {
        "u_l2": math.sqrt(u_l2_sq),
        "omega_l1": lp_norm(w_grid, 1),
        "omega_l2": lp_norm(w_grid, 2),
        "omega_l4": lp_norm(w_grid, 4),
        "omega_linf": lp_norm(w_grid, np.inf),
        "theta_l2": lp_norm(th_grid, 2),
        "theta_linf": lp_norm(th_grid, np.inf),
        "theta_h1": sobolev_w1p_norm(th_field, 2),
        "grad_theta_linf": float(np.max(np.hypot(d1th, d2th))),
        "d1_theta_linf": float(np.max(np.abs(d1th))),
        "theta_besov": besov_b1_inf1_norm(th_field),
        "kinetic": 0.5 * u_l2_sq,
        "work": work,
        "dissipation": state.nu * grad_u_sq,
        "omega_tail": tail,
    }


_SAMPLE_COLUMNS = ("u_l2", "omega_l1", "omega_l2", "omega_l4", "omega_linf",
                   "theta_l2", "theta_linf", "theta_h1", "grad_theta_linf",
                   "d1_theta_linf", "theta_besov", "kinetic", "work",
                   "dissipation", "omega_tail")
_COLUMNS = _SAMPLE_COLUMNS + ("theta_diss_cum",)


def simulate(cfg: RunConfig, on_sample=None):
    """Integrate one run to t_final, sampling the norm trace on the way.

    Returns (trace, final_state).  ``on_sample(idx, state)`` is invoked at
    every sample time (checkpointing, field-difference streaming).  A
    runaway run is truncated: the returned trace carries the samples
    collected so far with ``aborted`` set and the reason recorded.
    """
    times = sample_times(cfg.t_final, cfg.cadence)
    rows = {name: [] for name in _COLUMNS}
    comp_gap = {ell: [] for ell in cfg.mollify_cutoffs}
    comp_tail = {ell: [] for ell in cfg.mollify_cutoffs}
    comp_ic = {}
    stats = {"steps": 0, "dt_min": math.inf, "dt_max": 0.0}
    aborted, reason = False, ""
    state = None
    n_done = 0
    try:
        for idx, state, stats in iterate_samples(cfg):
            vals = sample_norms(state)
            vals["theta_diss_cum"] = stats["theta_diss"]
            for name in _COLUMNS:
                rows[name].append(vals[name])
            g = state.grid
            for (ell, c) in state.companions:
                comp_gap[ell].append(
                    float(np.sqrt(np.sum(np.abs(c - state.omega_hat.coeffs) ** 2))))
                tail = (1.0 - mollifier_weights(g, ell)) * (g.d1 * state.theta_hat.coeffs)
                comp_tail[ell].append(float(np.sqrt(np.sum(np.abs(tail) ** 2))))
                if idx == 0:
                    ic_tail = (1.0 - mollifier_weights(g, ell)) * state.omega_hat.coeffs
                    comp_ic[ell] = float(np.sqrt(np.sum(np.abs(ic_tail) ** 2)))
            n_done = idx + 1
            if on_sample is not None:
                on_sample(idx, state)
    except BlowupError as exc:
        aborted, reason = True, str(exc)

    trace = NormTrace(
        t=np.asarray(times[:n_done]),
        **{name: np.asarray(rows[name]) for name in _COLUMNS},
        nu=cfg.nu, kappa=cfg.kappa, n=cfg.n,
        steps=stats["steps"], dt_min=stats["dt_min"], dt_max=stats["dt_max"],
        aborted=aborted, abort_reason=reason,
        companion_gap_l2={k: np.asarray(v) for k, v in comp_gap.items()},
        companion_forcing_tail_l2={k: np.asarray(v) for k, v in comp_tail.items()},
        companion_ic_tail_l2=comp_ic,
    )
    return trace, state


def energy_balance_residual(trace: NormTrace) -> float:
    """Worst normalized defect of d/dt(kinetic) = work - dissipation.

    The time derivative is a centered difference on the sample grid, so
    the residual mixes the scheme's time-integration error with the
    finite-difference sampling error; both shrink under refinement.
    """
    if len(trace.t) < 3:
        raise ValueError("need at least 3 samples for a centered difference")
    t, kin = trace.t, trace.kinetic
    # Three-point stencil, second-order on nonuniform spacing (the final
    # sample interval is generally shorter than the cadence step).
    h_r = t[2:] - t[1:-1]
    h_l = t[1:-1] - t[:-2]
    dkin = (h_l**2 * kin[2:] + (h_r**2 - h_l**2) * kin[1:-1] - h_r**2 * kin[:-2]) \
        / (h_l * h_r * (h_l + h_r))
    resid = np.abs(dkin - trace.work[1:-1] + trace.dissipation[1:-1])
    scale = np.maximum(1.0, kin[1:-1])
    return float(np.max(resid / scale))


def cumulative_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(np.asarray(y, dtype=np.float64))
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def run_invariant_report(trace: NormTrace) -> dict:
    """Physical-invariant verdicts for one completed run.

    Checks the temperature maximum principle, the temperature L2
    dissipation identity, the velocity energy inequality
    ||u(t)||^2 <= ||u0||^2 e^t + ||theta0||^2 (e^t - 1), the energy
    balance residual, and (inviscid runs) the transport bound on
    |omega|_inf.  Tolerances are fixed here, not configurable.
    """
    t = trace.t
    report = {}

    theta_max_excess = float(np.max(trace.theta_linf - trace.theta_linf[0]))
    report["theta_max_principle"] = {
        "excess": theta_max_excess, "tol": 1e-8, "passed": theta_max_excess <= 1e-8}

    lhs = trace.theta_l2**2 + trace.theta_diss_cum
    denom = max(trace.theta_l2[0] ** 2, 1e-300)
    diss_defect = float(np.max(np.abs(lhs - trace.theta_l2[0] ** 2)) / denom) \
        if trace.theta_l2[0] > 0 else 0.0
    report["theta_dissipation_identity"] = {
        "defect": diss_defect, "tol": 1e-6, "passed": diss_defect <= 1e-6}

    bound = trace.u_l2[0] ** 2 * np.exp(t) + trace.theta_l2[0] ** 2 * (np.exp(t) - 1.0)
    energy_margin = float(np.max(trace.u_l2**2 - bound))
    report["velocity_energy_inequality"] = {
        "excess": energy_margin, "tol": 1e-9,
        "passed": energy_margin <= 1e-9 * max(1.0, float(bound.max()))}

    if len(t) >= 3:
        resid = energy_balance_residual(trace)
        report["energy_balance_residual"] = {
            "residual": resid, "tol": 1e-5, "passed": resid <= 1e-5}

    if trace.nu == 0.0:
        envelope = 1.05 * (trace.omega_linf[0] + cumulative_trapezoid(trace.d1_theta_linf, t))
        excess = float(np.max(trace.omega_linf - envelope))
        report["inviscid_transport_bound"] = {
            "excess": excess, "tol": 0.0, "passed": excess <= 0.0}

    # Logged, not gated: worst relative coefficient mass at the dealias
    # boundary over the run (resolution adequacy indicator).
    report["enstrophy_tail"] = {"worst": float(np.max(trace.omega_tail))}

    report["passed"] = all(v.get("passed", True) for v in report.values()
                           if isinstance(v, dict))
    return report
