"""Executable bound inventory: inequality evaluators and envelope generators.

Every quantitative bound used by the inviscid-limit verification lives
here as a pure function: the exponential-substitute arithmetic
inequality, the integral-form Gronwall envelope, the empirical
calibration of the exponential-integrability constant, the flow-constant
inventory, the decreasing-exponent transport schedule, the short-window
propagation-of-smallness envelope, the windowed discrete iteration with
its closed form, and the resulting terminal velocity-gap bound.

Where the source bounds leave universal constants symbolic they appear
here as explicit configuration values (reported next to every envelope),
so a domination failure is a falsifiable statement about a concrete
constant set rather than a silent judgement call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Constants
from .norms import exp_integral_of_gradient_grid, velocity_gradient_magnitude
from .spectral import VelocityField, from_spectral, rot

GAMMA_BISECT_RTOL = 1e-4
DOMINATION_RTOL = 1e-9


class DegenerateFlowError(ValueError):
    """Raised when the constant inventory is degenerate (e.g. zero velocity scale)."""


@dataclass(frozen=True)
class BoundConstants:
    """Scale inventory of one run family.

    beta and the quartic window constant are derived quantities,
    recomputed from the stored fields on access so they can never drift
    out of sync with their defining formulas.
    """

    U: float
    Omega1: float
    Omega2: float
    Omega4: float
    OmegaInf: float
    Theta: float
    gamma_emp: float
    c_k: float = 2.0
    c0: float = 1.0
    k_form: str = "proof"

    def __post_init__(self):
        for name in ("U", "Omega1", "Omega2", "Omega4", "OmegaInf", "Theta",
                     "gamma_emp", "c_k", "c0"):
            if getattr(self, name) <= 0:
                raise DegenerateFlowError(f"{name} must be positive, got {getattr(self, name)}")
        if not (self.Omega1 <= self.Omega2 + 1e-12 <= self.Omega4 + 2e-12
                <= self.OmegaInf + 3e-12):
            raise DegenerateFlowError("Omega_p must be nondecreasing in p")

    @property
    def beta(self) -> float:
        return self.gamma_emp / self.OmegaInf

    @property
    def k_script(self) -> float:
        """Quartic window constant, in the configured form.

        proof form:  2*c_k*(c0*beta*Omega2*Omega4/U + beta*sqrt(U)*Theta)^4
        remark form: 2*c0*beta*(Omega2*Omega4/U + sqrt(U)*Theta)^4
        """
        if self.k_form == "remark":
            core = self.Omega2 * self.Omega4 / self.U + math.sqrt(self.U) * self.Theta
            return 2.0 * self.c0 * self.beta * core**4
        core = (self.c0 * self.beta * self.Omega2 * self.Omega4 / self.U
                + self.beta * math.sqrt(self.U) * self.Theta)
        return 2.0 * self.c_k * core**4

    def to_dict(self) -> dict:
        return {
            "U": self.U, "Omega1": self.Omega1, "Omega2": self.Omega2,
            "Omega4": self.Omega4, "OmegaInf": self.OmegaInf, "Theta": self.Theta,
            "gamma_emp": self.gamma_emp, "c_k": self.c_k, "c0": self.c0,
            "k_form": self.k_form, "beta": self.beta, "k_script": self.k_script,
        }


@dataclass(frozen=True)
class Envelope:
    """A bound curve on a time grid with an explicit validity mask."""

    times: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    label: str

    def __post_init__(self):
        if not (len(self.times) == len(self.values) == len(self.mask)):
            raise ValueError("envelope arrays must share one time grid")


@dataclass(frozen=True)
class DominationReport:
    """Outcome of measured-vs-envelope comparison on the valid samples."""

    passed: bool
    n_checked: int
    fraction_valid: float
    worst_margin: float
    first_violation_time: float | None
    label: str

    def to_dict(self) -> dict:
        return {
            "passed": bool(self.passed), "n_checked": self.n_checked,
            "fraction_valid": self.fraction_valid, "worst_margin": self.worst_margin,
            "first_violation_time": self.first_violation_time, "label": self.label,
        }


def arithmetic_bound(a: float, b: float):
    """The inequality a*b <= e^a + b*log(b) - b; returns (lhs, rhs)."""
    if b <= 0:
        raise ValueError(f"b must be positive, got {b}")
    lhs = a * b
    with np.errstate(over="ignore"):
        rhs = float(np.exp(a)) + b * math.log(b) - b
    assert rhs - lhs >= -1e-12 * max(1.0, abs(lhs)), (a, b, lhs, rhs)
    return lhs, rhs


def cumulative_trapezoid(y, t):
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def gronwall_envelope(y0: float, A, B, times) -> Envelope:
    """Integral-form Gronwall bound for y' <= A(t) y + B(t), y(t0) = y0.

    envelope(t) = y0 * exp(int_{t0}^t A) + int_{t0}^t B(s) exp(int_s^t A) ds,
    with all integrals by the trapezoid rule on the given sample times.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if y0 < 0 or np.any(A < 0) or np.any(B < 0):
        raise ValueError("Gronwall data must be nonnegative")
    if not (len(A) == len(B) == len(times)):
        raise ValueError("A, B, times must share one grid")
    intA = cumulative_trapezoid(A, times)
    inner = cumulative_trapezoid(B * np.exp(-intA), times)
    values = np.exp(intA) * (y0 + inner)
    return Envelope(times, values, np.ones(len(times), dtype=bool), "gronwall")


@dataclass(frozen=True)
class GammaCalibration:
    gamma: float
    omega_inf: float
    unconstrained: bool
    n_snapshots: int

    def to_dict(self):
        return {"gamma": self.gamma, "omega_inf": self.omega_inf,
                "unconstrained": self.unconstrained, "n_snapshots": self.n_snapshots}


def calibrate_gamma_from_gradients(grad_grids, omega_inf: float, c_k: float = 2.0) -> GammaCalibration:
    """Largest gamma with int exp((gamma/omega_inf)|grad u|) <= c_k on every grid.

    The admissible set is an interval [0, gamma_max] because the integral
    is monotone in the exponent scale; gamma_max is located by doubling
    then bisection to 1e-4 relative.  Constant-velocity families
    (omega_inf = 0) impose no constraint and get an infinite sentinel.
    """
    grad_grids = list(grad_grids)
    if not grad_grids:
        raise ValueError("need at least one snapshot")
    if c_k <= 1.0:
        raise ValueError("c_k must exceed 1 (the integral of exp(0) is already 1)")
    if omega_inf == 0.0:
        return GammaCalibration(math.inf, 0.0, True, len(grad_grids))

    def admissible(gamma):
        beta = gamma / omega_inf
        return all(exp_integral_of_gradient_grid(g, beta) <= c_k for g in grad_grids)

    lo, hi = 0.0, 1.0
    if admissible(hi):
        lo = hi
        while admissible(2.0 * lo):
            lo *= 2.0
            if lo > 1e12:
                return GammaCalibration(math.inf, omega_inf, True, len(grad_grids))
        hi = 2.0 * lo
    else:
        while not admissible(hi / 2.0):
            hi /= 2.0
            if hi < 1e-30:
                raise RuntimeError("no admissible gamma above 1e-30")
        lo = hi / 2.0
    while hi - lo > GAMMA_BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            lo = mid
        else:
            hi = mid
    return GammaCalibration(lo, omega_inf, False, len(grad_grids))


def calibrate_gamma(snapshots, c_k: float = 2.0) -> GammaCalibration:
    """Calibrate on velocity snapshots (gradients and vorticity derived here)."""
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("need at least one snapshot")
    grads, winf = [], 0.0
    for u in snapshots:
        if not isinstance(u, VelocityField):
            raise TypeError("snapshots must be VelocityField instances")
        grads.append(velocity_gradient_magnitude(u))
        winf = max(winf, float(np.max(np.abs(from_spectral(rot(u)).values))))
    return calibrate_gamma_from_gradients(grads, winf, c_k)


def _trace_theta_aggregate(trace) -> float:
    """||theta||_{L1_t W^{1,inf}} + ||theta||_{L2_t H^1} for one trace."""
    w1inf = trace.theta_linf + trace.grad_theta_linf
    l1 = float(np.trapezoid(w1inf, trace.t)) if len(trace.t) > 1 else 0.0
    h1sq = float(np.trapezoid(trace.theta_h1**2, trace.t)) if len(trace.t) > 1 else 0.0
    return l1 + math.sqrt(h1sq)


def flow_constants(reference_trace, family_traces, gamma_emp: float,
                   constants: Constants = Constants()) -> BoundConstants:
    """Constant inventory of a run family per the sup-plus-reference convention.

    Each scale is the supremum over the positive-viscosity family plus the
    reference run's own value.  Raises DegenerateFlowError on all-zero
    fields (the quartic constant divides by U).
    """
    family_traces = list(family_traces)
    for tr in family_traces:
        if len(tr.t) != len(reference_trace.t) or not np.allclose(tr.t, reference_trace.t):
            raise ValueError("traces must share one sample grid")

    def scale(column):
        fam = max((float(np.max(getattr(tr, column))) for tr in family_traces), default=0.0)
        return fam + float(np.max(getattr(reference_trace, column)))

    U = scale("u_l2")
    if U <= 0:
        raise DegenerateFlowError("zero velocity scale: the run family is degenerate")
    theta = max((_trace_theta_aggregate(tr) for tr in family_traces), default=0.0) \
        + _trace_theta_aggregate(reference_trace)
    return BoundConstants(
        U=U,
        Omega1=scale("omega_l1"),
        Omega2=scale("omega_l2"),
        Omega4=scale("omega_l4"),
        OmegaInf=scale("omega_linf"),
        Theta=theta,
        gamma_emp=gamma_emp,
        c_k=constants.c_k,
        c0=constants.c0,
        k_form=constants.k_form,
    )


def exponent_schedule(p0: float, beta: float, num: int = None):
    """Decreasing exponent p(t) = beta*p0/(beta + 2*p0*t) down to p = 1.

    Returns (times, p, t_star) with t_star = beta*(p0-1)/(2*p0), the time
    at which p reaches 1.  The schedule solves p' = -2 p^2 / beta; by
    default the grid is fine enough that the centered-difference residual
    of that identity stays below 1e-6 (the step resolves p''' at t = 0).
    """
    if p0 <= 1:
        raise ValueError(f"p0 must exceed 1, got {p0}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    t_star = beta * (p0 - 1.0) / (2.0 * p0)
    if num is None:
        p3_max = 48.0 * p0**4 / beta**3
        h = math.sqrt(6e-7 / p3_max)
        num = max(1025, int(math.ceil(t_star / h)) + 1)
    times = np.linspace(0.0, t_star, num)
    p = beta * p0 / (beta + 2.0 * p0 * times)
    return times, p, t_star


def sigma_l2_bound(p0: float, beta: float, f_l1_linf: float, sigma0_l2p: float,
                   c_univ: float):
    """Transported-scalar L2 bound C'(1 + ||sigma_0||^p0) on [0, t_star].

    C' = exp(c_univ * p0 * (t_star + ||f||_{L1_t L^inf})).
    """
    if p0 <= 1 or beta <= 0 or c_univ <= 0:
        raise ValueError("need p0 > 1, beta > 0, c_univ > 0")
    if f_l1_linf < 0 or sigma0_l2p < 0:
        raise ValueError("norms must be nonnegative")
    t_star = beta * (p0 - 1.0) / (2.0 * p0)
    cprime = math.exp(c_univ * p0 * (t_star + f_l1_linf))
    return cprime * (1.0 + sigma0_l2p**p0), t_star


# Window-validity constants of the propagation-of-smallness bound: the
# base exponent is 1 - 20*(t-t0)/beta and the proof needs Gamma >= e^{1/4}.
SMALLNESS_EXP_RATE = 20.0
SMALLNESS_K_RATE = 4.0
GAMMA_MIN = math.exp(0.25)


def smallness_eta(y_t0: float, nu: float, bc: BoundConstants) -> float:
    return y_t0 + bc.beta * bc.Omega2**2 * nu / bc.U**2


def smallness_envelope(y_t0: float, nu: float, t0: float, times,
                       bc: BoundConstants) -> Envelope:
    """Short-window envelope for y(t) = ||u_nu - u||^2 / U^2 from anchor t0.

    envelope(t) = 4 * K^{4(t-t0)/beta} * eta^{1 - 20(t-t0)/beta} with
    eta = y(t0) + beta * Omega2^2 * nu / U^2.  The mask is true only while
    the base exponent stays positive and the smallness proxy
    Gamma = K / eta^5 exceeds e^{1/4}.
    """
    if y_t0 < 0 or nu < 0:
        raise ValueError("need y(t0) >= 0 and nu >= 0")
    times = np.asarray(times, dtype=np.float64)
    beta = bc.beta
    K = bc.k_script
    eta = smallness_eta(y_t0, nu, bc)
    dt = times - t0
    exp_eta = 1.0 - SMALLNESS_EXP_RATE * dt / beta
    gamma_proxy = math.inf if eta == 0.0 else K / eta**5
    mask = (dt >= -1e-15) & (exp_eta > 0.0) & (gamma_proxy > GAMMA_MIN)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        raw = 4.0 * K ** (SMALLNESS_K_RATE * dt / beta) * eta**exp_eta
    values = np.where(mask, raw, np.inf)
    return Envelope(times, values, mask, f"smallness[t0={t0:.6g},nu={nu:.3g}]")


@dataclass(frozen=True)
class DiscreteIteration:
    """Windowed-iteration sequence, its closed-form bound, and the smallness verdict."""

    delta: np.ndarray
    bound: np.ndarray
    verdict: bool
    r_star: float
    nu_tilde: float


def iterate_discrete(y0: float, nu: float, c1: float, c2: float, n: int) -> DiscreteIteration:
    """Iterate delta_j = sqrt(delta_{j-1} + nu_tilde) with the closed-form bound.

    delta_0 = y0 / c1^2 and nu_tilde = c2 * nu / c1^2, so the iteration is
    y_j = c1 * sqrt(y_{j-1} + c2 * nu) in the normalisation delta = y/c1^2.
    The closed form is delta_0^{2^-j} + nu_tilde^{2^{-j+1}} / (1 - nu_tilde).
    The verdict states the smallness hypotheses: nu_tilde <= 1/(sqrt(5)-1)
    and 0 < delta_0 < r_star, the positive root of x^2 - x - nu_tilde = 0;
    under it sup_j delta_j <= r_star (the map's fixed point is exactly r_star).
    """
    if c1 <= 0 or c2 <= 0:
        raise ValueError("need c1 > 0 and c2 > 0")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if y0 < 0 or nu < 0:
        raise ValueError("need y0 >= 0 and nu >= 0")
    nu_tilde = c2 * nu / c1**2
    delta = np.empty(n + 1)
    delta[0] = y0 / c1**2
    for j in range(1, n + 1):
        delta[j] = math.sqrt(delta[j - 1] + nu_tilde)

    j = np.arange(n + 1)
    if nu_tilde == 0.0:
        tail = np.zeros(n + 1)
    elif nu_tilde < 1.0:
        tail = nu_tilde ** (2.0 ** (-j + 1)) / (1.0 - nu_tilde)
    else:
        tail = np.full(n + 1, math.inf)
    bound = delta[0] ** (2.0 ** (-j.astype(np.float64))) + tail
    if delta[0] == 0.0:
        bound[0] = tail[0] if nu_tilde > 0 else 0.0  # 0^1 = 0, not the 0^0 = 1 of powers

    r_star = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * nu_tilde))
    verdict = (nu_tilde <= 1.0 / (math.sqrt(5.0) - 1.0)) and (0.0 < delta[0] < r_star)
    return DiscreteIteration(delta, bound, verdict, r_star, nu_tilde)


def final_velocity_bound(t: float, nu: float, u0_gap_sq: float,
                         bc: BoundConstants, e1: float = 40.0) -> float:
    """Terminal bound on ||u_nu - u||^2(t) from the tiled window iteration.

    (16 K^{2 e1} U^2)^{1-e} * (||u0_nu - u0||^2 + 2 C2 U^2 nu)^e with
    e = exp(-40 ln2 (t/beta)) and C2 = beta * Omega2^2 / U^2; evaluated in
    log space since the prefactor overflows for large K.
    """
    if t < 0 or nu < 0 or u0_gap_sq < 0:
        raise ValueError("need t, nu, u0_gap_sq >= 0")
    c2 = bc.beta * bc.Omega2**2 / bc.U**2
    e = math.exp(-40.0 * math.log(2.0) * t / bc.beta)
    base = u0_gap_sq + 2.0 * c2 * bc.U**2 * nu
    if base == 0.0:
        return 0.0
    log_pre = math.log(16.0) + 2.0 * e1 * math.log(bc.k_script) + 2.0 * math.log(bc.U)
    log_bound = (1.0 - e) * log_pre + e * math.log(base)
    return math.exp(log_bound) if log_bound < 700.0 else math.inf


def theta_stability_bound(theta0_gap: float, U: float, Theta: float) -> float:
    """exp(2 U Theta) * gap^2: bound on the squared temperature gap."""
    if theta0_gap < 0 or U < 0 or Theta < 0:
        raise ValueError("inputs must be nonnegative")
    return math.exp(2.0 * U * Theta) * theta0_gap**2


def check_domination(measured, envelope: Envelope, label: str = "") -> DominationReport:
    """Per-sample verdict measured <= envelope*(1 + 1e-9) on the valid mask."""
    measured = np.asarray(measured, dtype=np.float64)
    if measured.shape != envelope.values.shape:
        raise ValueError("measured series and envelope must share one grid")
    valid = envelope.mask
    n_checked = int(np.sum(valid))
    if n_checked == 0:
        return DominationReport(True, 0, 0.0, math.inf, None, label or envelope.label)
    env = envelope.values[valid]
    meas = measured[valid]
    ok = meas <= env * (1.0 + DOMINATION_RTOL)
    with np.errstate(invalid="ignore"):
        rel_margin = np.where(np.isinf(env), math.inf,
                              (env - meas) / np.maximum(env, 1e-300))
    worst = float(np.min(rel_margin))
    first_violation = None
    if not np.all(ok):
        first_violation = float(envelope.times[valid][np.argmax(~ok)])
    return DominationReport(bool(np.all(ok)), n_checked,
                            float(np.mean(envelope.mask)), worst,
                            first_violation, label or envelope.label)
