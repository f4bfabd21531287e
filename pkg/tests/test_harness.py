import math

import numpy as np
import pytest

from bqlim.config import RunConfig, SweepConfig
from bqlim.estimates import BoundConstants
from bqlim.harness import (
    _gap_row,
    convergence_order,
    mollified_consistency,
    sweep,
    tiled_smallness_envelope,
    verify_report,
    vorticity_gap_gronwall_check,
)


def _base(n=32, t_final=0.1, cadence=64, **theta_kw):
    theta = {"family": "gaussian", "amplitude": 0.2, "width": 0.25}
    theta.update(theta_kw)
    return RunConfig(n=n, t_final=t_final, nu=0.0, kappa=1e-2, cadence=cadence,
                     omega0={"family": "taylor_green"}, theta0=theta)


@pytest.fixture(scope="module")
def tiny_sweep():
    cfg = SweepConfig(base=_base(cadence=256), nu_list=(1e-2, 1e-3), tm_stride=16)
    return cfg, sweep(cfg)


def test_sweep_of_reference_against_itself_is_zero():
    cfg = SweepConfig(base=_base(t_final=0.05), nu_list=(0.0,), tm_stride=8)
    result = sweep(cfg)
    run = result.report["runs"][0]
    for key in ("l1", "l2", "l4", "linf"):
        assert run["sup_gaps"][key] <= 1e-13
    assert max(run["u_gap_sq"]) <= 1e-26
    assert run["domination"]["passed"]


def test_sweep_gap_decreases_with_nu(tiny_sweep):
    _, result = tiny_sweep
    sups = [r["sup_gaps"]["l2"] for r in result.report["runs"]]
    assert sups[0] > sups[1] > 0


def test_sweep_report_verdicts_all_pass(tiny_sweep):
    _, result = tiny_sweep
    verdicts, _ = verify_report(result.report)
    failures = [v for v in verdicts if not v["passed"]]
    assert not failures, failures


def test_sweep_constants_recorded(tiny_sweep):
    _, result = tiny_sweep
    consts = result.report["constants"]
    assert consts["beta"] * consts["OmegaInf"] == pytest.approx(consts["gamma_emp"])
    assert consts["c0_history"] == [1.0]
    assert result.report["calibration"]["gamma"] > 0


def test_sweep_is_deterministic(tiny_sweep):
    cfg, result = tiny_sweep
    import json

    from bqlim.io import _json_safe
    again = sweep(cfg)
    a = json.dumps(_json_safe(result.report), sort_keys=True)
    b = json.dumps(_json_safe(again.report), sort_keys=True)
    assert a == b


def test_perturbed_omega_initial_gap_linear_in_nu():
    cfg = SweepConfig(base=_base(t_final=0.02), nu_list=(1e-2, 1e-3, 1e-4),
                      perturbation={"target": "omega", "amplitude": 1.0, "width": 0.2},
                      tm_stride=8)
    result = sweep(cfg)
    gaps = [r["initial_gaps"]["omega_l2"] for r in result.report["runs"]]
    assert gaps[0] / gaps[1] == pytest.approx(10.0, rel=1e-6)
    assert gaps[1] / gaps[2] == pytest.approx(10.0, rel=1e-6)


def test_theta_perturbation_stability_bound():
    cfg = SweepConfig(base=_base(t_final=0.1), nu_list=(1e-2, 1e-3),
                      perturbation={"target": "theta", "amplitude": 1.0, "width": 0.2},
                      tm_stride=8)
    result = sweep(cfg)
    for run in result.report["runs"]:
        entry = run["theta_stability"]
        assert entry["applicable"]
        assert entry["passed"], entry
        assert entry["gap0"] > 0


def test_gap_row_is_symmetric_under_pair_swap():
    from bqlim.dynamics import initial_state
    import dataclasses
    a = initial_state(_base())
    b_cfg = dataclasses.replace(_base(), nu=1e-2, omega0={"family": "taylor_green",
                                                          "amplitude": 0.9})
    b = initial_state(b_cfg)
    ab = _gap_row(a, b)
    ba = _gap_row(b, a)
    for key, val in ab.items():
        assert ba[key] == pytest.approx(val, rel=1e-14)


def test_tiled_envelope_anchors_and_mask():
    bc = BoundConstants(U=1.0, Omega1=8.0, Omega2=10.0, Omega4=12.0, OmegaInf=20.0,
                        Theta=3.0, gamma_emp=1.5, c_k=2.0, c0=1.0)
    width = bc.beta / 40.0
    times = np.linspace(0.0, 20 * width, 201)  # 10 samples per window
    y = np.full(201, 1e-3)
    values, mask, anchors = tiled_smallness_envelope(times, y, 1e-3, bc)
    assert anchors[0] == 0
    assert len(anchors) >= 18
    assert mask[1:].mean() > 0.9  # fine sampling: nearly every sample checked
    assert np.all(values[mask] > 0)


def test_convergence_order_synthetic_powers():
    def fake_report(power):
        runs = [{"nu": nu, "aborted": False,
                 "sup_gaps": {"l2": nu**power, "l4": nu**power}}
                for nu in (1e-1, 1e-2, 1e-3, 1e-4)]
        return {"runs": runs}

    order, resid = convergence_order(fake_report(1.0), 2)
    assert order == pytest.approx(1.0, abs=1e-10)
    assert resid < 1e-12
    order, _ = convergence_order(fake_report(0.5), 2)
    assert order == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ValueError):
        convergence_order({"runs": [{"nu": 1e-1, "aborted": False,
                                     "sup_gaps": {"l2": 0.1}}]}, 2)


def test_mollified_consistency_table():
    cfg = RunConfig(n=64, t_final=0.1, nu=0.0, kappa=1e-2, cadence=64,
                    omega0={"family": "taylor_green"},
                    theta0={"family": "spectral_tail", "amplitude": 0.2,
                            "decay": 3.0, "seed": 11},
                    mollify_cutoffs=(2, 4, 8))
    rows, trace = mollified_consistency(cfg)
    assert [r["ell"] for r in rows] == [2, 4, 8]
    for row in rows:
        assert row["passed"], row
    meas = [r["measured_sup"] for r in rows]
    rhs = [r["rhs_sup"] for r in rows]
    assert meas[0] > meas[1] > meas[2] > 0
    assert rhs[0] > rhs[1] > rhs[2] > 0


def test_mollified_consistency_band_limited_solution_is_exact():
    # All initial data below the cutoff: both columns vanish.
    import dataclasses
    cfg = dataclasses.replace(_base(n=32, t_final=0.02, cadence=64, width=0.45),
                              mollify_cutoffs=(16,))
    rows, _ = mollified_consistency(cfg)
    assert rows[0]["measured_sup"] < 1e-10
    assert rows[0]["rhs_sup"] < 1e-10


def test_vorticity_gap_gronwall_identical_pair_trivial():
    cfg = SweepConfig(base=_base(t_final=0.05), nu_list=(1e-3,), tm_stride=8)
    report, c_ell = vorticity_gap_gronwall_check(cfg, 0.0, 4)
    assert report.passed
    assert c_ell == 0.0


def test_vorticity_gap_gronwall_viscous_pair():
    cfg = SweepConfig(base=_base(t_final=0.1), nu_list=(1e-3,), tm_stride=8)
    report, c_ell = vorticity_gap_gronwall_check(cfg, 1e-3, 4)
    assert report.passed, report
    assert c_ell >= 0.0


def test_vorticity_gap_gronwall_theta_perturbed_inviscid_pair():
    # nu = 0 on both sides: the viscosity term drops out of the balance.
    cfg = SweepConfig(base=_base(t_final=0.05), nu_list=(1e-3,),
                      perturbation={"target": "theta", "amplitude": 0.5,
                                    "width": 0.2, "scale": "constant"},
                      tm_stride=8)
    report, c_ell = vorticity_gap_gronwall_check(cfg, 0.0, 4)
    assert report.passed, report
    assert c_ell > 0.0


def test_sweep_partial_on_blowup():
    base = RunConfig(n=32, t_final=0.3, nu=0.0, kappa=1e-2, cadence=16,
                     omega0={"family": "taylor_green", "amplitude": 1e7},
                     theta0={"family": "zero"})
    cfg = SweepConfig(base=base, nu_list=(1e-3,), tm_stride=64)
    result = sweep(cfg)
    assert result.report["partial"]
    assert result.report["runs"][0]["aborted"]
    verdicts, _ = verify_report(result.report)
    assert all(v["passed"] for v in verdicts)
