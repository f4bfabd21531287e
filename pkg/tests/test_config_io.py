import json
import math

import numpy as np
import pytest

from bqlim.config import ConfigError, Constants, RunConfig, SweepConfig, parse_config
from bqlim.dynamics import FlowState, initial_state, simulate
from bqlim.io import (
    CheckpointError,
    emit_plot_svg,
    emit_report_json,
    emit_trace_csv,
    read_checkpoint,
    write_checkpoint,
)
from bqlim.spectral import SpectralField


MINIMAL_RUN = {
    "kind": "run",
    "n": 32,
    "t_final": 0.1,
    "nu": 0.001,
    "kappa": 0.01,
    "initial": {"omega": {"family": "taylor_green"},
                "theta": {"family": "gaussian", "amplitude": 0.2, "width": 0.25}},
}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if isinstance(doc, dict) else doc)
    return path


def test_minimal_run_config_fills_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, MINIMAL_RUN))
    assert isinstance(cfg, RunConfig)
    assert cfg.cadence == 64
    assert cfg.safety == 0.5
    assert cfg.constants == Constants()
    assert cfg.outdir == "out"


def test_zero_kappa_rejected_with_reason(tmp_path):
    doc = {**MINIMAL_RUN, "kappa": 0}
    with pytest.raises(ConfigError, match="kappa must be > 0"):
        parse_config(_write(tmp_path, doc))


def test_duplicate_key_names_the_key(tmp_path):
    text = MINIMAL_RUN.copy()
    raw = json.dumps(text)[:-1] + ', "nu": 0.01}'
    with pytest.raises(ConfigError, match="duplicate key: 'nu'"):
        parse_config(_write(tmp_path, raw))


def test_unknown_keys_rejected(tmp_path):
    doc = {**MINIMAL_RUN, "viscosity": 1e-3}
    with pytest.raises(ConfigError, match="unknown keys.*viscosity"):
        parse_config(_write(tmp_path, doc))


def test_all_violations_reported_together(tmp_path):
    doc = {**MINIMAL_RUN, "kappa": 0, "n": 7, "t_final": -1}
    with pytest.raises(ConfigError) as err:
        parse_config(_write(tmp_path, doc))
    assert len(err.value.problems) == 3


def test_random_family_requires_seed(tmp_path):
    doc = {**MINIMAL_RUN,
           "initial": {"omega": {"family": "rough", "target_linf": 5.0},
                       "theta": {"family": "zero"}}}
    with pytest.raises(ConfigError, match="requires a seed"):
        parse_config(_write(tmp_path, doc))


def test_sweep_config_validation(tmp_path):
    doc = {**MINIMAL_RUN, "kind": "sweep", "nu_list": [1e-2, 1e-3, 1e-4]}
    del doc["nu"]
    cfg = parse_config(_write(tmp_path, doc))
    assert isinstance(cfg, SweepConfig)
    assert cfg.nu_list == (1e-2, 1e-3, 1e-4)
    assert cfg.p_list == (1.0, 2.0, 4.0, math.inf)

    bad = {**doc, "nu_list": [1e-3, 1e-2]}
    with pytest.raises(ConfigError, match="strictly decreasing"):
        parse_config(_write(tmp_path, bad))
    bad = {**doc, "nu_list": [1e-2, 0.0]}
    with pytest.raises(ConfigError, match="> 0"):
        parse_config(_write(tmp_path, bad))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ConfigError, match="kind"):
        parse_config(_write(tmp_path, {**MINIMAL_RUN, "kind": "experiment"}))


# ------------------------------------------------------------ checkpoints

def _state():
    cfg = RunConfig(n=32, t_final=0.0, nu=1e-3, kappa=2e-2,
                    omega0={"family": "taylor_green"},
                    theta0={"family": "gaussian", "amplitude": 0.2, "width": 0.25})
    return initial_state(cfg)


def test_checkpoint_round_trip_bit_identical(tmp_path):
    state = _state()
    path = tmp_path / "state.bqchk"
    write_checkpoint(state, path)
    first_bytes = path.read_bytes()
    loaded = read_checkpoint(path)
    assert loaded.t == state.t
    assert loaded.nu == state.nu
    assert loaded.kappa == state.kappa
    assert loaded.mean_u == state.mean_u
    assert np.array_equal(loaded.omega_hat.coeffs, state.omega_hat.coeffs)
    assert np.array_equal(loaded.theta_hat.coeffs, state.theta_hat.coeffs)
    write_checkpoint(loaded, tmp_path / "again.bqchk")
    assert (tmp_path / "again.bqchk").read_bytes() == first_bytes


def test_checkpoint_norms_preserved_exactly(tmp_path):
    from bqlim.dynamics import sample_norms
    state = _state()
    path = tmp_path / "state.bqchk"
    write_checkpoint(state, path)
    a = sample_norms(state)
    b = sample_norms(read_checkpoint(path))
    assert a == b


def test_checkpoint_truncation_detected(tmp_path):
    state = _state()
    path = tmp_path / "state.bqchk"
    write_checkpoint(state, path)
    data = path.read_bytes()
    for cut in (3, 20, len(data) - 5):
        bad = tmp_path / "bad.bqchk"
        bad.write_bytes(data[:cut])
        with pytest.raises(CheckpointError):
            read_checkpoint(bad)


def test_checkpoint_bad_magic_and_version(tmp_path):
    state = _state()
    path = tmp_path / "state.bqchk"
    write_checkpoint(state, path)
    data = bytearray(path.read_bytes())

    wrong_magic = tmp_path / "magic.bqchk"
    wrong_magic.write_bytes(b"XXXXXX" + bytes(data[6:]))
    with pytest.raises(CheckpointError, match="magic"):
        read_checkpoint(wrong_magic)

    data[6] = 99  # version field
    wrong_version = tmp_path / "version.bqchk"
    wrong_version.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="version 99"):
        read_checkpoint(wrong_version)


def test_checkpoint_hermitian_violation_detected(tmp_path):
    state = _state()
    broken = SpectralField(state.omega_hat.coeffs.copy(), state.grid)
    broken.coeffs[3, 5] += 1.0  # no matching conjugate update
    bad_state = FlowState(broken, state.theta_hat, state.t, state.nu, state.kappa)
    path = tmp_path / "bad.bqchk"
    write_checkpoint(bad_state, path)
    with pytest.raises(CheckpointError, match="Hermitian"):
        read_checkpoint(path)


# ----------------------------------------------------------------- emitters

def test_trace_csv_empty_trace_is_header_only(tmp_path):
    cols = {name: [] for name in
            ("t", "u_l2", "omega_l1", "omega_l2", "omega_l4", "omega_linf",
             "theta_l2", "theta_linf", "theta_h1", "grad_theta_linf",
             "d1_theta_linf", "theta_besov", "kinetic", "work", "dissipation",
             "omega_tail", "theta_diss_cum")}
    path = tmp_path / "empty.csv"
    emit_trace_csv(cols, path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 1
    assert lines[0].startswith("t,u_l2,")


def test_trace_csv_round_trips_17_digits(tmp_path):
    cfg = RunConfig(n=32, t_final=0.05, nu=1e-3, kappa=1e-2, cadence=64,
                    omega0={"family": "taylor_green"},
                    theta0={"family": "gaussian", "amplitude": 0.2, "width": 0.25})
    trace, _ = simulate(cfg)
    path = tmp_path / "trace.csv"
    emit_trace_csv(trace, path)
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    parsed = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    for j, name in enumerate(header):
        assert np.array_equal(parsed[:, j], np.asarray(trace.columns()[name]))
    emit_trace_csv(trace, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_report_json_deterministic_and_null_for_inf(tmp_path):
    report = {"b": [1.0, math.inf], "a": {"x": math.nan, "y": np.float64(2.5)},
              "c": np.arange(3)}
    p1, p2 = tmp_path / "r1.json", tmp_path / "r2.json"
    emit_report_json(report, p1)
    emit_report_json(report, p2)
    assert p1.read_bytes() == p2.read_bytes()
    loaded = json.loads(p1.read_text())
    assert loaded["b"] == [1.0, None]
    assert loaded["a"]["x"] is None
    assert loaded["a"]["y"] == 2.5
    assert loaded["c"] == [0, 1, 2]


def test_convergence_plot_svg(tmp_path):
    nus = [1e-2, 1e-3, 1e-4]
    sups = {"l2": [1e-2, 1e-3, 1e-4]}  # synthetic order-1 data
    path = tmp_path / "conv.svg"
    emit_plot_svg({"kind": "convergence", "nus": nus, "sup_by_p": sups}, path)
    text = path.read_text()
    assert text.startswith("<svg")
    assert "polyline" in text
    emit_plot_svg({"kind": "convergence", "nus": nus, "sup_by_p": sups},
                  tmp_path / "again.svg")
    assert (tmp_path / "again.svg").read_bytes() == path.read_bytes()


def test_envelope_plot_svg_handles_masked_segments(tmp_path):
    times = np.linspace(0, 1, 9)
    measured = np.linspace(0.1, 0.2, 9)
    env = [0.5, 0.6, None, 0.7, 0.8, None, 0.9, 1.0, 1.1]
    mask = [True, True, False, True, True, False, True, True, True]
    path = tmp_path / "env.svg"
    emit_plot_svg({"kind": "envelope", "times": times, "measured": measured,
                   "env_values": env, "env_mask": mask}, path)
    assert "envelope" in path.read_text()


def test_emit_plot_svg_unknown_kind(tmp_path):
    with pytest.raises(ValueError, match="kind"):
        emit_plot_svg({"kind": "pie"}, tmp_path / "x.svg")
