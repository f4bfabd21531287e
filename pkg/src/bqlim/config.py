"""Run and sweep configuration: dataclasses, JSON parsing, validation.

Config files are JSON key-value documents.  Parsing is strict: unknown
keys and duplicate keys are hard errors (a silent typo in a constant
override would invalidate every envelope verdict downstream), and all
violations found in one file are reported together.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path


class ConfigError(ValueError):
    """Carries the full list of validation problems for one config file."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class Constants:
    """Tunable universal constants of the bound inventory.

    c_k is the exponential-integrability budget (default 2 = twice the
    domain area); c0 and c_univ are the calibration prefactors reported
    alongside every envelope; e1 is the exponent of the quartic constant
    in the window-iteration prefactor; k_form selects which of the two
    published forms of that constant is used.
    """

    c_k: float = 2.0
    c0: float = 1.0
    c_univ: float = 1.0
    e1: float = 40.0
    k_form: str = "proof"


@dataclass(frozen=True)
class RunConfig:
    n: int
    t_final: float
    nu: float
    kappa: float
    omega0: dict
    theta0: dict
    cadence: int = 64
    safety: float = 0.5
    checkpoint_times: tuple = ()
    mean_u0: tuple = (0.0, 0.0)
    mollify_cutoffs: tuple = ()
    constants: Constants = field(default_factory=Constants)
    outdir: str = "out"


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    nu_list: tuple
    p_list: tuple = (1.0, 2.0, 4.0, math.inf)
    perturbation: dict = field(default_factory=lambda: {"target": "none"})
    tm_stride: int = 16
    auto_recalibrate: bool = True
    max_c0: float = 4096.0


OMEGA_FAMILIES = {
    "taylor_green": {"amplitude"},
    "rough": {"target_linf", "seed"},
    "zero": set(),
}
THETA_FAMILIES = {
    "gaussian": {"amplitude", "width", "center"},
    "spectral_tail": {"amplitude", "decay", "seed"},
    "zero": set(),
}
RANDOM_FAMILIES = {"rough", "spectral_tail"}

PERTURBATION_TARGETS = {"none", "theta", "omega"}

_RUN_KEYS = {
    "kind", "n", "t_final", "nu", "kappa", "initial", "cadence", "safety",
    "checkpoint_times", "mean_u0", "mollify_cutoffs", "constants", "outdir",
}
_SWEEP_ONLY_KEYS = {"nu_list", "p_list", "perturbation", "tm_stride",
                    "auto_recalibrate", "max_c0"}
_CONSTANT_KEYS = {"c_k", "c0", "c_univ", "e1", "k_form"}


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ConfigError([f"duplicate key: {key!r}"])
        seen[key] = value
    return seen


def _check_family(spec, role, allowed, problems):
    if not isinstance(spec, dict) or "family" not in spec:
        problems.append(f"initial.{role} must be an object with a 'family' key")
        return
    family = spec["family"]
    if family not in allowed:
        problems.append(f"unknown initial.{role} family {family!r}; "
                        f"expected one of {sorted(allowed)}")
        return
    extra = set(spec) - allowed[family] - {"family"}
    if extra:
        problems.append(f"unknown keys in initial.{role}: {sorted(extra)}")
    if family in RANDOM_FAMILIES and "seed" not in spec:
        problems.append(f"initial.{role} family {family!r} is random and requires a seed")


def _validate_run(doc, problems, *, require_nu=True):
    n = doc.get("n")
    if not isinstance(n, int) or n % 2 != 0 or n < 8:
        problems.append(f"n must be an even integer >= 8, got {n!r}")
    t_final = doc.get("t_final")
    if not isinstance(t_final, (int, float)) or t_final < 0:
        problems.append(f"t_final must be a number >= 0, got {t_final!r}")
    kappa = doc.get("kappa")
    if not isinstance(kappa, (int, float)) or kappa <= 0:
        problems.append(f"kappa must be > 0 (diffusive temperature is required), got {kappa!r}")
    if require_nu:
        nu = doc.get("nu")
        if not isinstance(nu, (int, float)) or nu < 0:
            problems.append(f"nu must be a number >= 0, got {nu!r}")
    cadence = doc.get("cadence", 64)
    if not isinstance(cadence, int) or cadence < 1:
        problems.append(f"cadence must be a positive integer, got {cadence!r}")
    safety = doc.get("safety", 0.5)
    if not isinstance(safety, (int, float)) or not 0 < safety <= 1.5:
        problems.append(f"safety must lie in (0, 1.5], got {safety!r}")
    initial = doc.get("initial")
    if not isinstance(initial, dict) or set(initial) - {"omega", "theta"}:
        problems.append("initial must be an object with keys 'omega' and 'theta'")
    else:
        _check_family(initial.get("omega", {}), "omega", OMEGA_FAMILIES, problems)
        _check_family(initial.get("theta", {}), "theta", THETA_FAMILIES, problems)
    for t in doc.get("checkpoint_times", []):
        if not isinstance(t, (int, float)) or t < 0 or (isinstance(t_final, (int, float)) and t > t_final):
            problems.append(f"checkpoint time {t!r} outside [0, t_final]")
    for ell in doc.get("mollify_cutoffs", []):
        if not isinstance(ell, int) or ell < 1:
            problems.append(f"mollify cutoff must be a positive integer, got {ell!r}")
    consts = doc.get("constants", {})
    if not isinstance(consts, dict):
        problems.append("constants must be an object")
    else:
        extra = set(consts) - _CONSTANT_KEYS
        if extra:
            problems.append(f"unknown constants keys: {sorted(extra)}")
        for key in ("c_k", "c0", "c_univ", "e1"):
            if key in consts and (not isinstance(consts[key], (int, float)) or consts[key] <= 0):
                problems.append(f"constants.{key} must be > 0, got {consts[key]!r}")
        if consts.get("k_form", "proof") not in ("proof", "remark"):
            problems.append(f"constants.k_form must be 'proof' or 'remark', got {consts.get('k_form')!r}")


def _build_run(doc) -> RunConfig:
    consts = Constants(**doc.get("constants", {}))
    initial = doc["initial"]
    return RunConfig(
        n=doc["n"],
        t_final=float(doc["t_final"]),
        nu=float(doc.get("nu", 0.0)),
        kappa=float(doc["kappa"]),
        omega0=dict(initial["omega"]),
        theta0=dict(initial["theta"]),
        cadence=doc.get("cadence", 64),
        safety=float(doc.get("safety", 0.5)),
        checkpoint_times=tuple(float(t) for t in doc.get("checkpoint_times", [])),
        mean_u0=tuple(float(v) for v in doc.get("mean_u0", (0.0, 0.0))),
        mollify_cutoffs=tuple(doc.get("mollify_cutoffs", [])),
        constants=consts,
        outdir=doc.get("outdir", "out"),
    )


def _parse_p(value):
    if value in ("inf", "Infinity"):
        return math.inf
    if isinstance(value, (int, float)) and value >= 1:
        return float(value)
    raise ConfigError([f"p_list entries must be numbers >= 1 or 'inf', got {value!r}"])


def parse_config(path):
    """Load and validate a config file; returns RunConfig or SweepConfig."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from exc

    problems = []
    kind = doc.get("kind")
    if kind not in ("run", "sweep"):
        raise ConfigError([f"kind must be 'run' or 'sweep', got {kind!r}"])

    allowed = _RUN_KEYS | (_SWEEP_ONLY_KEYS if kind == "sweep" else set())
    unknown = set(doc) - allowed
    if unknown:
        problems.append(f"unknown keys: {sorted(unknown)}")

    missing = {"n", "t_final", "kappa", "initial"} - set(doc)
    if kind == "run" and "nu" not in doc:
        missing.add("nu")
    if missing:
        problems.append(f"missing required keys: {sorted(missing)}")

    if not missing:
        _validate_run(doc, problems, require_nu=(kind == "run"))

    if kind == "sweep":
        nu_list = doc.get("nu_list")
        if not isinstance(nu_list, list) or not nu_list:
            problems.append("nu_list must be a non-empty list")
        else:
            if any(not isinstance(v, (int, float)) or v <= 0 for v in nu_list):
                problems.append("nu_list entries must all be > 0 (the reference run is nu = 0)")
            if any(b >= a for a, b in zip(nu_list, nu_list[1:])):
                problems.append("nu_list must be strictly decreasing")
        pert = doc.get("perturbation", {"target": "none"})
        if not isinstance(pert, dict) or pert.get("target", "none") not in PERTURBATION_TARGETS:
            problems.append(f"perturbation.target must be one of {sorted(PERTURBATION_TARGETS)}")
        else:
            extra = set(pert) - {"target", "amplitude", "width", "center", "scale"}
            if extra:
                problems.append(f"unknown keys in perturbation: {sorted(extra)}")
            if pert.get("scale", "nu") not in ("nu", "constant"):
                problems.append(f"perturbation.scale must be 'nu' or 'constant', "
                                f"got {pert.get('scale')!r}")
        stride = doc.get("tm_stride", 16)
        if not isinstance(stride, int) or stride < 1:
            problems.append(f"tm_stride must be a positive integer, got {stride!r}")

    if problems:
        raise ConfigError(problems)

    if kind == "run":
        return _build_run(doc)
    base = _build_run({**doc, "nu": 0.0})
    return SweepConfig(
        base=base,
        nu_list=tuple(float(v) for v in doc["nu_list"]),
        p_list=tuple(_parse_p(p) for p in doc.get("p_list", [1, 2, 4, "inf"])),
        perturbation=dict(doc.get("perturbation", {"target": "none"})),
        tm_stride=doc.get("tm_stride", 16),
        auto_recalibrate=doc.get("auto_recalibrate", True),
        max_c0=float(doc.get("max_c0", 4096.0)),
    )


def run_config_to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["checkpoint_times"] = list(cfg.checkpoint_times)
    d["mean_u0"] = list(cfg.mean_u0)
    d["mollify_cutoffs"] = list(cfg.mollify_cutoffs)
    return d


def sweep_config_to_dict(cfg: SweepConfig) -> dict:
    return {
        "base": run_config_to_dict(cfg.base),
        "nu_list": list(cfg.nu_list),
        "p_list": ["inf" if math.isinf(p) else p for p in cfg.p_list],
        "perturbation": dict(cfg.perturbation),
        "tm_stride": cfg.tm_stride,
        "auto_recalibrate": cfg.auto_recalibrate,
        "max_c0": cfg.max_c0,
    }
