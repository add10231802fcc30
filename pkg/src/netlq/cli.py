"""Scenario-driven command line front end.

Every subcommand resolves a configuration in three layers (built-in
preset, optional scenario file, repeatable --set overrides), validates
it against a strict schema (unknown keys rejected), and emits CSV curve
data plus a manifest and a provenance record, so any output directory
is reproducible byte-for-byte from its provenance block.

Exit codes: 0 success, 2 schema violation, 3 numerical failure.  Errors
print one machine-parsable line to stderr: ``E_<CODE> <path>: <detail>``.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .coding import (
    AdditiveNoise,
    EventTriggered,
    FixedRate,
    Quantizer,
    SilenceEnvelope,
    VariableRate,
)
from .design import (
    ConstraintSet,
    StageEncoderSpec,
    constrained_gamma_curve,
    dual_effect_curves,
    gamma1_curve,
    min_gamma,
)
from .envelope import (
    PREDICTOR_LINEAR,
    ZOH,
    EnvelopeCostModel,
    GridResolutionError,
    optimize_envelope,
    optimize_envelope_with_symmetric_baseline,
)
from .estimation import filter_error_variance, two_step_posterior, wbar_moments
from .gauss import Interval, Normal
from .lqcore import CostParams, PlantParams, gain_schedule
from .sim import (
    CEController,
    CompanderEncoder,
    EnvelopeController,
    EnvelopeEncoder,
    FixedU0ThenCE,
    NoiseLaw,
    OpenLoopController,
    QuantizedEncoder,
    Scenario,
    ScenarioError,
    simulate,
)

SUBCOMMANDS = (
    "gains",
    "fig-dual-effect",
    "fig-example3",
    "fig-symmetry",
    "fig-constrained-encoder",
    "fig-constrained-control",
    "fig-interval-control",
    "et-envelope",
    "simulate",
    "selftest",
    "validate",
)


class SchemaError(Exception):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path
        self.msg = msg


class NumericalFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# Schema: section -> field -> (checker, description)
# ---------------------------------------------------------------------------


def _num(lo=None, hi=None, strict_lo=False):
    def check(v, path):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(path, f"expected a number, got {v!r}")
        if lo is not None and (v <= lo if strict_lo else v < lo):
            raise SchemaError(path, f"must be {'>' if strict_lo else '>='} {lo}")
        if hi is not None and v > hi:
            raise SchemaError(path, f"must be <= {hi}")
        return float(v)

    return check


def _int(lo=None):
    def check(v, path):
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(path, f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise SchemaError(path, f"must be >= {lo}")
        return v

    return check


def _choice(*options):
    def check(v, path):
        if v not in options:
            raise SchemaError(path, f"must be one of {options}, got {v!r}")
        return v

    return check


def _bool(v, path):
    if not isinstance(v, bool):
        raise SchemaError(path, f"expected true/false, got {v!r}")
    return v


def _number_list(v, path):
    if not isinstance(v, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        raise SchemaError(path, f"expected a list of numbers, got {v!r}")
    return [float(x) for x in v]


def _threshold_lists(v, path):
    if not isinstance(v, list):
        raise SchemaError(path, "expected a list of per-time threshold lists")
    out = []
    for i, item in enumerate(v):
        out.append(_number_list(item, f"{path}[{i}]"))
    return out


def _interval_list(v, path):
    """Per-time [lo, hi] pairs; null means the infinite endpoint."""
    if not isinstance(v, list):
        raise SchemaError(path, "expected a list of [lo, hi] pairs")
    out = []
    for i, pair in enumerate(v):
        p = f"{path}[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(p, "expected [lo, hi]")
        lo = -math.inf if pair[0] is None else float(pair[0])
        hi = math.inf if pair[1] is None else float(pair[1])
        if lo > hi:
            raise SchemaError(p, "needs lo <= hi")
        out.append((lo, hi))
    return out


_PLANT_FIELDS = {
    "a": _num(),
    "sigma_w": _num(lo=0.0),
    "x0_mean": _num(),
    "x0_std": _num(lo=0.0),
    "T": _int(lo=0),
}
_COST_FIELDS = {"p": _num(lo=0.0, strict_lo=True), "q": _num(lo=0.0), "m": _num(lo=0.0)}

_CHANNEL_KINDS = {
    "fixed_rate": {"N": _int(lo=1)},
    "variable_rate": {"eta_bar": _int(lo=1), "rate_cap": _num(lo=0.0), "m": _num(lo=0.0)},
    "event_triggered": {"sample_budget": _int(lo=0), "m": _num(lo=0.0)},
    "additive_noise": {
        "sigma_chi": _num(lo=0.0),
        "amp_cap": _num(lo=0.0),
        "power_cap": _num(lo=0.0),
        "m": _num(lo=0.0),
    },
}
_ENCODER_KINDS = {
    "quantizer": {"thresholds": _threshold_lists, "innovation": _bool},
    "one_cell": {},
    "envelope": {"intervals": _interval_list},
    "compander": {"gain": _num()},
}
_CONTROLLER_KINDS = {
    "ce": {},
    "fixed_u0_then_ce": {"u0": _num()},
    "open_loop": {"controls": _number_list},
    "envelope": {"regime": _choice(PREDICTOR_LINEAR, ZOH), "kappa": _num()},
}
_NOISE_KINDS = {"gaussian": {}, "uniform": {}, "laplace": {}}

_EXPERIMENT_FIELDS = {
    "seed": _int(lo=0),
    "paths": _int(lo=1),
    "theta": _num(lo=0.0, strict_lo=True),
    "u0_min": _num(),
    "u0_max": _num(),
    "u0_points": _int(lo=2),
    "u0_list": _number_list,
    "alpha_min": _num(),
    "alpha_max": _num(),
    "alpha_points": _int(lo=2),
    "delta0": _num(),
    "delta1_min": _num(),
    "delta1_max": _num(),
    "delta1_points": _int(lo=2),
    "z0_label": _int(lo=1),
    "theta_lo": _num(),
    "theta_hi": _num(),
    "u_set": _number_list,
    "u_min": _num(),
    "u_max": _num(),
    "regime": _choice(PREDICTOR_LINEAR, ZOH),
    "n_starts": _int(lo=1),
    "max_sweeps": _int(lo=1),
}


def _validate_section(name, cfg, fields, kinds=None):
    if not isinstance(cfg, dict):
        raise SchemaError(name, "expected an object")
    if kinds is not None:
        kind = cfg.get("kind")
        if kind not in kinds:
            raise SchemaError(f"{name}.kind", f"must be one of {sorted(kinds)}")
        allowed = dict(kinds[kind])
        allowed["kind"] = None
    else:
        allowed = fields
    for key, value in cfg.items():
        path = f"{name}.{key}"
        if key not in allowed:
            raise SchemaError(path, "unknown key")
        if key == "kind":
            continue
        cfg[key] = allowed[key](value, path)
    return cfg


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise SchemaError("<root>", "configuration must be an object")
    for key in cfg:
        if key not in ("plant", "cost", "channel", "encoder", "controller", "noise", "experiment"):
            raise SchemaError(key, "unknown section")
    _validate_section("plant", cfg["plant"], _PLANT_FIELDS)
    _validate_section("cost", cfg["cost"], _COST_FIELDS)
    _validate_section("channel", cfg["channel"], None, _CHANNEL_KINDS)
    _validate_section("encoder", cfg["encoder"], None, _ENCODER_KINDS)
    _validate_section("controller", cfg["controller"], None, _CONTROLLER_KINDS)
    _validate_section("noise", cfg["noise"], None, _NOISE_KINDS)
    _validate_section("experiment", cfg["experiment"], _EXPERIMENT_FIELDS)
    return cfg


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_BASE = {
    "plant": {"a": 1.0, "sigma_w": 0.7, "x0_mean": 2.0, "x0_std": 0.0, "T": 1},
    "cost": {"p": 0.01, "q": 0.01, "m": 0.0},
    "channel": {"kind": "fixed_rate", "N": 3},
    "encoder": {
        "kind": "quantizer",
        "thresholds": [[], [-1.6, 1.6]],
        "innovation": False,
    },
    "controller": {"kind": "fixed_u0_then_ce", "u0": -1.0},
    "noise": {"kind": "gaussian"},
    "experiment": {"seed": 20240801, "paths": 100000},
}

_TWO_STEP_BASE = {
    "plant": {"a": 1.0, "sigma_w": 1.0, "x0_mean": 0.0, "x0_std": 1.0, "T": 1},
    "cost": {"p": 1.0, "q": 1.0, "m": 0.0},
    "channel": {"kind": "fixed_rate", "N": 2},
    "encoder": {"kind": "quantizer", "thresholds": [[0.0], [0.0]], "innovation": False},
    "controller": {"kind": "ce"},
    "noise": {"kind": "gaussian"},
    "experiment": {"seed": 20240801, "paths": 100000},
}


def _preset(sub: str) -> dict:
    cfg = copy.deepcopy(_BASE)
    exp = cfg["experiment"]
    if sub in ("gains", "simulate", "validate", "selftest"):
        return cfg
    if sub == "fig-dual-effect":
        exp.update(theta=1.6, u0_min=-4.0, u0_max=1.0, u0_points=501)
        return cfg
    cfg = copy.deepcopy(_TWO_STEP_BASE)
    exp = cfg["experiment"]
    if sub == "fig-example3":
        exp.update(alpha_min=-3.0, alpha_max=3.0, alpha_points=121, z0_label=1)
        return cfg
    if sub == "fig-symmetry":
        exp.update(
            delta0=0.0, delta1_min=-4.0, delta1_max=4.0, delta1_points=161,
            u0_list=[-1.0, 0.0, 1.0], z0_label=1,
        )
        return cfg
    if sub == "fig-constrained-encoder":
        exp.update(
            delta0=0.0, delta1_min=-4.0, delta1_max=4.0, delta1_points=161,
            u0_list=[-1.0, 0.0, 1.0], z0_label=1, theta_lo=-1.0, theta_hi=1.0,
        )
        return cfg
    if sub == "fig-constrained-control":
        exp.update(
            delta0=0.0, delta1_min=-4.0, delta1_max=4.0, delta1_points=161,
            u0_list=[-1.0, 0.0, 1.0], z0_label=1, u_set=[-1.0, 0.0, 1.0],
        )
        return cfg
    if sub == "fig-interval-control":
        exp.update(
            delta0=0.0, delta1_min=-4.0, delta1_max=4.0, delta1_points=161,
            u0_list=[-1.0, 0.0, 1.0], z0_label=1, u_min=-2.0, u_max=2.0,
        )
        return cfg
    if sub == "et-envelope":
        cfg = copy.deepcopy(_BASE)
        cfg["plant"].update(sigma_w=0.5, T=4)
        cfg["cost"].update(p=1.0, q=0.2)
        cfg["channel"] = {"kind": "event_triggered", "sample_budget": 1, "m": 0.0}
        cfg["encoder"] = {"kind": "envelope", "intervals": [[None, None]] * 4}
        cfg["controller"] = {"kind": "envelope", "regime": ZOH, "kappa": 0.0}
        cfg["experiment"].update(regime=ZOH, n_starts=3, max_sweeps=10)
        return cfg
    raise ValueError(f"no preset for {sub}")


# ---------------------------------------------------------------------------
# Config resolution with provenance
# ---------------------------------------------------------------------------


def _merge(dst, src, sources, origin, prefix=""):
    for key, value in src.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict) and isinstance(dst.get(key), dict):
            _merge(dst[key], value, sources, origin, prefix=path + ".")
        else:
            dst[key] = copy.deepcopy(value)
            sources[path] = origin


def _record_defaults(cfg, sources, prefix=""):
    for key, value in cfg.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            _record_defaults(value, sources, prefix=path + ".")
        elif path not in sources:
            sources[path] = "default"


def _parse_set(option: str) -> tuple[str, object]:
    if "=" not in option:
        raise SchemaError("--set", f"expected key=value, got {option!r}")
    key, raw = option.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_set(cfg, key, value, sources):
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise SchemaError(key, "unknown key")
        node = node[part]
    if parts[-1] not in node and parts[-1] != "kind" and not isinstance(node, dict):
        raise SchemaError(key, "unknown key")
    node[parts[-1]] = value
    sources[key] = "override"


def resolve_config(sub: str, args) -> tuple[dict, dict]:
    cfg = _preset(sub)
    sources: dict[str, str] = {}
    _record_defaults(cfg, sources)
    if args.scenario:
        try:
            with open(args.scenario, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise SchemaError("<scenario>", f"cannot read {args.scenario}: {exc}")
        except json.JSONDecodeError as exc:
            raise SchemaError("<scenario>", f"invalid JSON: {exc}")
        if not isinstance(file_cfg, dict):
            raise SchemaError("<root>", "scenario file must hold an object")
        for section in file_cfg:
            if section not in cfg:
                raise SchemaError(section, "unknown section")
        _merge(cfg, file_cfg, sources, "file")
    for option in args.set or ():
        key, value = _parse_set(option)
        _apply_set(cfg, key, value, sources)
    if args.seed is not None:
        cfg["experiment"]["seed"] = args.seed
        sources["experiment.seed"] = "override"
    if args.paths is not None:
        cfg["experiment"]["paths"] = args.paths
        sources["experiment.paths"] = "override"
    validate_config(cfg, sources)
    return cfg, sources


# ---------------------------------------------------------------------------
# Config -> domain objects
# ---------------------------------------------------------------------------


def build_plant(cfg) -> PlantParams:
    p = cfg["plant"]
    return PlantParams(p["a"], p["sigma_w"], Normal(p["x0_mean"], p["x0_std"]), p["T"])


def build_cost(cfg) -> CostParams:
    c = cfg["cost"]
    return CostParams(c["p"], c["q"], c.get("m", 0.0))


def build_channel(cfg):
    ch = cfg["channel"]
    kind = ch["kind"]
    if kind == "fixed_rate":
        return FixedRate(ch["N"])
    if kind == "variable_rate":
        return VariableRate(ch["eta_bar"], ch["rate_cap"], ch.get("m", 0.0))
    if kind == "event_triggered":
        return EventTriggered(ch["sample_budget"], ch.get("m", 0.0))
    return AdditiveNoise(ch["sigma_chi"], ch["amp_cap"], ch["power_cap"], ch.get("m", 0.0))


def build_scenario(cfg) -> Scenario:
    plant = build_plant(cfg)
    enc = cfg["encoder"]
    kind = enc["kind"]
    if kind == "quantizer":
        quantizers = tuple(Quantizer(tuple(th)) for th in enc["thresholds"])
        encoder = QuantizedEncoder(quantizers, enc.get("innovation", False))
    elif kind == "one_cell":
        encoder = QuantizedEncoder(tuple(Quantizer(()) for _ in range(plant.T + 1)))
    elif kind == "envelope":
        ivs = tuple(Interval(lo, hi) for lo, hi in enc["intervals"])
        encoder = EnvelopeEncoder(SilenceEnvelope(ivs))
    else:
        encoder = CompanderEncoder(enc["gain"])

    ctl = cfg["controller"]
    kind = ctl["kind"]
    if kind == "ce":
        controller = CEController()
    elif kind == "fixed_u0_then_ce":
        controller = FixedU0ThenCE(ctl["u0"])
    elif kind == "open_loop":
        controller = OpenLoopController(tuple(ctl["controls"]))
    else:
        controller = EnvelopeController(ctl["regime"], ctl.get("kappa"))

    return Scenario(
        plant=plant,
        cost=build_cost(cfg),
        channel=build_channel(cfg),
        encoder=encoder,
        controller=controller,
        noise=NoiseLaw(cfg["noise"]["kind"]),
    )


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(_canonical_json(cfg).encode("utf-8")).hexdigest()


class OutputWriter:
    """CSV + JSON emitter with a manifest naming every column."""

    def __init__(self, out_dir: str, cfg: dict, sources: dict):
        self.out_dir = out_dir
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.sources = sources
        self.files: dict[str, dict] = {}
        os.makedirs(out_dir, exist_ok=True)

    def _fmt(self, v) -> str:
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)

    def csv(self, name: str, columns: list[str], rows, units: list[str]):
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(self._fmt(v) for v in row) + "\n")
        self.files[name] = {"columns": columns, "units": units}

    def json(self, name: str, obj):
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True))
            fh.write("\n")
        self.files[name] = {"columns": None, "units": None}

    def finalize(self, seed: int):
        manifest = {
            "config_hash": self.hash,
            "tool_version": __version__,
            "files": self.files,
        }
        self.json("manifest.json", manifest)
        provenance = {
            "tool_version": __version__,
            "config": self.cfg,
            "config_hash": self.hash,
            "sources": self.sources,
            "seed": seed,
        }
        self.json("provenance.json", provenance)


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _curve_rows(grid, values):
    return list(zip(grid, values))


def cmd_gains(cfg, sources, out_dir):
    schedule = gain_schedule(build_plant(cfg), build_cost(cfg))
    w = OutputWriter(out_dir, cfg, sources)
    w.json("gains.json", schedule.to_json_dict())
    w.finalize(cfg["experiment"]["seed"])
    return 0


def cmd_fig_dual_effect(cfg, sources, out_dir):
    plant, cost = build_plant(cfg), build_cost(cfg)
    exp = cfg["experiment"]
    grid = np.linspace(exp["u0_min"], exp["u0_max"], exp["u0_points"])
    gamma, total, u0_ce = dual_effect_curves(plant, cost, exp["theta"], grid)
    w = OutputWriter(out_dir, cfg, sources)
    w.csv("gamma_vs_u0.csv", ["u0", "gamma"], _curve_rows(grid, gamma.values),
          ["control", "cost"])
    w.csv("cost_vs_u0.csv", ["u0", "cost"], _curve_rows(grid, total.values),
          ["control", "cost"])
    j_ce = dual_effect_curves(plant, cost, exp["theta"], [u0_ce])[1].values[0]
    w.csv("ce_marker.csv", ["u0_ce", "cost_at_ce"], [(u0_ce, j_ce)],
          ["control", "cost"])
    w.json("summary.json", {
        "u0_ce": u0_ce,
        "argmin_cost": total.argmin,
        "min_cost": total.min_value,
        "gamma_min": float(gamma.values.min()),
        "gamma_max": float(gamma.values.max()),
    })
    w.finalize(exp["seed"])
    return 0


def cmd_fig_example3(cfg, sources, out_dir):
    plant, cost = build_plant(cfg), build_cost(cfg)
    exp = cfg["experiment"]
    enc = cfg["encoder"]
    qz0 = Quantizer(tuple(enc["thresholds"][0]))
    qz1 = Quantizer(tuple(enc["thresholds"][1]))
    label = exp["z0_label"]
    alphas = np.linspace(exp["alpha_min"], exp["alpha_max"], exp["alpha_points"])
    wbar_vals, var_vals = [], []
    for alpha in alphas:
        post = two_step_posterior(plant, float(alpha), qz0, qz1)
        wbar_vals.append(wbar_moments(post)[label - 1])
        var_vals.append(filter_error_variance(post)[label - 1])
    w = OutputWriter(out_dir, cfg, sources)
    w.csv("wbar_second_moment_vs_alpha.csv", ["alpha", "wbar_second_moment"],
          _curve_rows(alphas, wbar_vals), ["control", "state^2"])
    w.csv("filter_error_variance_vs_alpha.csv", ["alpha", "error_variance"],
          _curve_rows(alphas, var_vals), ["control", "state^2"])
    w.finalize(exp["seed"])
    return 0


def _u0_tag(u0: float) -> str:
    return ("m" if u0 < 0 else "p") + f"{abs(u0):g}".replace(".", "_")


def cmd_fig_symmetry(cfg, sources, out_dir, constrained=False):
    plant, cost = build_plant(cfg), build_cost(cfg)
    exp = cfg["experiment"]
    grid = np.linspace(exp["delta1_min"], exp["delta1_max"], exp["delta1_points"])
    label = exp["z0_label"]
    if constrained:
        cset = ConstraintSet.interval(exp["theta_lo"], exp["theta_hi"])
        grid = grid[(grid >= cset.lo) & (grid <= cset.hi)]
    else:
        cset = ConstraintSet.unconstrained()
    w = OutputWriter(out_dir, cfg, sources)
    minima = {}
    for u0 in exp["u0_list"]:
        curve = gamma1_curve(plant, cost, exp["delta0"], u0, grid, label)
        name = f"gamma1_u0_{_u0_tag(u0)}.csv"
        w.csv(name, ["delta1", "gamma1"], _curve_rows(grid, curve.values),
              ["threshold", "cost"])

        def fn(d, u0=u0):
            return gamma1_curve(plant, cost, exp["delta0"], u0, [d], label).values[0]

        span = (exp["delta1_min"] - 2.0, exp["delta1_max"] + 2.0)
        argmin, min_val = min_gamma(fn, cset, search=span, coarse_step=0.05)
        minima[f"{u0:g}"] = {"argmin_delta1": argmin, "min_gamma1": min_val}
    w.json("minima.json", minima)
    w.finalize(exp["seed"])
    return 0


def cmd_fig_constrained_control(cfg, sources, out_dir, interval=False):
    plant, cost = build_plant(cfg), build_cost(cfg)
    exp = cfg["experiment"]
    grid = np.linspace(exp["delta1_min"], exp["delta1_max"], exp["delta1_points"])
    label = exp["z0_label"]
    if interval:
        u_set = ConstraintSet.interval(exp["u_min"], exp["u_max"])
        stem = "gamma_ic"
    else:
        u_set = ConstraintSet.finite(exp["u_set"])
        stem = "gamma_rc"
    w = OutputWriter(out_dir, cfg, sources)
    minima = {}
    for u0 in exp["u0_list"]:
        curve = constrained_gamma_curve(
            plant, cost, exp["delta0"], u0, grid, u_set, label
        )
        w.csv(f"{stem}_u0_{_u0_tag(u0)}.csv", ["delta1", stem],
              _curve_rows(grid, curve.values), ["threshold", "cost"])

        def fn(d, u0=u0):
            return constrained_gamma_curve(
                plant, cost, exp["delta0"], u0, [d], u_set, label
            ).values[0]

        span = (exp["delta1_min"] - 2.0, exp["delta1_max"] + 2.0)
        argmin, min_val = min_gamma(
            fn, ConstraintSet.unconstrained(), search=span, coarse_step=0.05
        )
        minima[f"{u0:g}"] = {"argmin_delta1": argmin, f"min_{stem}": min_val}
    w.json("minima.json", minima)
    w.finalize(exp["seed"])
    return 0


def _interval_json(iv: Interval):
    lo = None if math.isinf(iv.lo) else iv.lo
    hi = None if math.isinf(iv.hi) else iv.hi
    return [lo, hi]


def cmd_et_envelope(cfg, sources, out_dir):
    plant, cost = build_plant(cfg), build_cost(cfg)
    exp = cfg["experiment"]
    regime = exp["regime"]
    kwargs = dict(n_starts=exp["n_starts"], max_sweeps=exp["max_sweeps"])
    if regime == ZOH:
        free, sym = optimize_envelope_with_symmetric_baseline(
            plant, cost, regime, **kwargs
        )
    else:
        free = optimize_envelope(plant, cost, regime, **kwargs)
        sym = optimize_envelope(plant, cost, regime, symmetric=True, **kwargs)
    w = OutputWriter(out_dir, cfg, sources)
    rows = []
    for t in range(1, plant.T + 1):
        iv = free.envelope.interval_at(t)
        rows.append(
            (t, iv.lo, iv.hi, free.pre_sample_means[t], free.alive_probs[t - 1])
        )
    w.csv("envelope.csv", ["t", "lo", "hi", "predictor_mean", "alive_prob"],
          rows, ["time", "state", "state", "state", "probability"])
    w.json("summary.json", {
        "regime": regime,
        "expected_cost": free.expected_cost,
        "kappa": free.kappa,
        "asymmetry": free.asymmetry,
        "symmetric_expected_cost": sym.expected_cost,
        "symmetric_kappa": sym.kappa,
        "envelope": [_interval_json(iv) for iv in free.envelope.intervals],
    })
    w.finalize(exp["seed"])
    return 0


def cmd_simulate(cfg, sources, out_dir):
    scenario = build_scenario(cfg)
    exp = cfg["experiment"]
    result = simulate(scenario, exp["paths"], exp["seed"])
    w = OutputWriter(out_dir, cfg, sources)
    w.json("result.json", result.to_json_dict())
    w.finalize(exp["seed"])
    return 0


def cmd_validate(cfg, sources, out_dir):
    # listing only; no artifacts
    try:
        build_scenario(cfg)
    except ScenarioError as exc:
        raise SchemaError("encoder.kind/channel.kind", str(exc))
    flat = []

    def walk(node, prefix=""):
        for key in sorted(node):
            path = f"{prefix}{key}"
            if isinstance(node[key], dict):
                walk(node[key], path + ".")
            else:
                flat.append((path, node[key], sources.get(path, "default")))

    walk(cfg)
    width = max(len(p) for p, _, _ in flat)
    for path, value, origin in flat:
        print(f"{path:<{width}}  {origin:<8}  {json.dumps(value)}")
    return 0


def cmd_selftest(cfg, sources, out_dir):
    from . import selftest

    failures = selftest.run(verbose=True)
    if failures:
        raise NumericalFailure(f"{failures} selftest check(s) failed")
    return 0


_HANDLERS = {
    "gains": cmd_gains,
    "fig-dual-effect": cmd_fig_dual_effect,
    "fig-example3": cmd_fig_example3,
    "fig-symmetry": cmd_fig_symmetry,
    "fig-constrained-encoder": lambda c, s, o: cmd_fig_symmetry(c, s, o, True),
    "fig-constrained-control": cmd_fig_constrained_control,
    "fig-interval-control": lambda c, s, o: cmd_fig_constrained_control(c, s, o, True),
    "et-envelope": cmd_et_envelope,
    "simulate": cmd_simulate,
    "selftest": cmd_selftest,
    "validate": cmd_validate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netlq",
        description="Co-design toolkit for networked linear-quadratic control",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, help="override experiment.seed")
        p.add_argument("--paths", type=int, help="override experiment.paths")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, sources = resolve_config(args.command, args)
        return _HANDLERS[args.command](cfg, sources, args.out)
    except SchemaError as exc:
        print(f"E_SCHEMA {exc.path}: {exc.msg}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"E_SCHEMA scenario: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, GridResolutionError) as exc:
        print(f"E_NUMERIC {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
