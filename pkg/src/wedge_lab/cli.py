"""Command-line runner: one TOML config in, CSV/JSON reports out.

Usage::

    wedge-lab [--workers N] [--plot-data] [--output-dir DIR] config.toml

The config names a ``subcommand`` and fills parameter blocks; every key has
an explicit default (see :data:`DEFAULTS`), unknown keys are rejected.  Exit
status is 0 when every verdict passes, 1 when any check fails or diverges,
and 2 for usage or config errors.

Reports are written to ``output_dir``: CSV for tables (header row, ``.``
decimal separator) and JSON for single records.  The first line of a CSV is
a ``#`` comment holding the resolved config as JSON; JSON reports carry it
under ``"config"``.
"""

import argparse
import ast
import copy
import csv
import io
import itertools
import json
import math
import operator
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import tomli

__all__ = ["ConfigError", "DEFAULTS", "load_config", "resolve", "run", "main"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (exit status 2)."""


# -- defaults --------------------------------------------------------------

_REFINEMENT = {"levels": 4, "n_panels": 1, "order": 6, "grading": 3.0, "ratio": 8.0, "tail": 7.0}
_VERDICT = {"bounded_tol": 0.02, "growth": 0.25, "growth_levels": 3, "scale_tol": 0.05}
_GRID = {"radii": [float(v) for v in 10.0 ** np.linspace(-3, 2, 11)],
         "fracs": [0.002, 0.05, 0.25, 0.5, 0.75, 0.95, 0.998]}
_RULES = {"time_panels": 6, "time_order": 6, "time_grading": 2.0, "space_panels": 3, "space_order": 6,
          "tol": 1e-11, "max_modes": 20000, "time_floor": 0.01, "time_ratio": 4.0}
_WEIGHTS = {"p": 2.0, "Theta": 2.0, "theta": 2.0}
_FIELDS = {"families": ["semigroup", "bump", "power"], "scales": [0.0625, 0.125, 0.25], "edge_fraction": 0.15,
           "delta": 0.5}

DEFAULTS = {
    "kernel": {"kernel": {"t": 1.0, "x": [1.0, "pi/2"], "y": [1.0, "pi/2"], "tol": 1e-14, "max_terms": 8192,
                          "oracle_tol": 1e-8}},
    "green-bound": {"green": {"lambda1": "0.9*pi/kappa0", "lambda2": "0.9*pi/kappa0", "sigma": 0.25},
                    "sample": {"t_values": [0.1, 1.0, 10.0], "n_r": 7, "n_angle": 4, "r_min": 0.01, "r_max": 4.0,
                               "levels": 3, "polish": 3, "sigma_steps": 6, "resolve": 1e4},
                    "verdict": _VERDICT},
    "lemma-at": {"lemma": {"alpha": 1, "A": [0.001, 1, 1000]}},
    "lemma-b1b2s": {"lemma": {"sigma": 1.0, "beta1": 0.0, "beta2": 0.0},
                    "grid": _GRID, "refinement": _REFINEMENT, "verdict": _VERDICT},
    "lemma-b1a1s": {"lemma": {"d": 2, "sigma": 1.0, "alpha": 0.0, "beta": 0.0},
                    "refinement": _REFINEMENT, "verdict": _VERDICT},
    "lemma-a2s": {"lemma": {"sigma": 1.0, "alpha": 0.0},
                  "grid": _GRID, "refinement": _REFINEMENT, "verdict": _VERDICT},
    "lemma-combined": {"lemma": {"sigma": 1.0, "beta1": 0.0, "beta2": 0.0, "alpha1": 0.0, "alpha2": 0.0,
                                 "scales": [0.01, 1.0, 100.0]},
                       "grid": {"radii": [float(v) for v in 10.0 ** np.linspace(-4, 3, 15)],
                                "fracs": _GRID["fracs"]},
                       "refinement": _REFINEMENT, "verdict": _VERDICT},
    "lp-stoch": {"weights": _WEIGHTS, "time": {"T": [0.25, 1.0, 4.0]}, "fields": _FIELDS, "rules": _RULES},
    "lp-det": {"weights": _WEIGHTS, "time": {"T": [0.25, 1.0, 4.0]}, "fields": _FIELDS, "rules": _RULES},
    "sharpness": {"weights": _WEIGHTS,
                  "sharpness": {"delta": 0.5, "eps": [0.1, 0.01, 0.001], "T": 1.0, "kind": "stoch"},
                  "rules": _RULES},
    "regularity": {"regularity": {"t": 1.0, "angle": "kappa0/2", "r_min": 0.001, "r_max": 0.03, "n_r": 8,
                                  "tolerance": 0.1},
                   "rules": _RULES},
    "apriori": {"weights": _WEIGHTS,
                "apriori": {"f": "none", "g": "semigroup", "scale": 0.25, "T": [0.5, 1.0, 2.0], "tolerance": 0.1},
                "rules": _RULES},
    "sweep": {"sweep": {"command": "lemma-at", "params": {}}},
}

COMMON = {"kappa0": "pi", "seed": 0, "output_dir": "wedge_lab_out"}

# -- parsing ---------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.Pow: operator.pow}


def _eval_expr(text, names):
    """Arithmetic on numbers, ``pi`` and the given names (no calls, no attributes)."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in names:
            return float(names[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(f"unsupported expression {text!r}")

    # allow "3pi/2" as shorthand for "3*pi/2"
    text = re.sub(r"(\d)\s*(pi|kappa0)\b", r"\1*\2", str(text))
    return ev(ast.parse(text, mode="eval"))


def _key_lines(text):
    """Map ``(table path, key)`` to its 1-based line number in the TOML source."""
    out, table = {}, ()
    for i, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]$", s)
        if m:
            table = tuple(p.strip().strip('"') for p in m.group(1).split("."))
            out.setdefault((table[:-1], table[-1]), i)
            continue
        m = re.match(r'^("?[A-Za-z0-9_.\-]+"?)\s*=', s)
        if m:
            key = m.group(1).strip('"')
            out.setdefault((table, key), i)
    return out


def load_config(path):
    """Parse a TOML file; returns ``(raw dict, key line map)``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return raw, _key_lines(text)


def _where(path, lines, table, key):
    line = lines.get((tuple(table), key))
    return f"{path}:{line}" if line else f"{path}"


def _merge(defaults, given, table, path, lines, free=False):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults and not free:
            raise ConfigError(f"{_where(path, lines, table, key)}: unknown key '{'.'.join((*table, key))}'")
        d = defaults.get(key)
        if isinstance(d, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{_where(path, lines, table, key)}: '{key}' must be a table")
            out[key] = _merge(d, val, (*table, key), path, lines, free=(key == "params"))
        else:
            if d is not None and isinstance(d, list) != isinstance(val, list):
                kind = "a list" if isinstance(d, list) else "a scalar"
                raise ConfigError(f"{_where(path, lines, table, key)}: '{key}' must be {kind}")
            out[key] = val
    return out


def resolve(raw, path="<config>", lines=None):
    """Fill defaults and validate; returns the resolved config dict."""
    lines = lines or {}
    if not raw:
        raise ConfigError(f"{path}: empty config (a 'subcommand' key is required)")
    if "subcommand" not in raw:
        raise ConfigError(f"{path}: missing 'subcommand'")
    sub = raw["subcommand"]
    if sub not in DEFAULTS:
        raise ConfigError(f"{_where(path, lines, (), 'subcommand')}: unknown subcommand {sub!r}; "
                          f"expected one of {', '.join(DEFAULTS)}")
    spec = {"subcommand": None, **COMMON, **DEFAULTS[sub]}
    cfg = _merge(spec, raw, (), path, lines)
    cfg["subcommand"] = sub
    try:
        cfg["kappa0"] = _eval_expr(cfg["kappa0"], {"pi": math.pi})
    except (ValueError, SyntaxError, ZeroDivisionError):
        raise ConfigError(f"{_where(path, lines, (), 'kappa0')}: cannot parse kappa0 {cfg['kappa0']!r}") from None
    if not 0 < cfg["kappa0"] <= 2 * math.pi:
        raise ConfigError(f"{_where(path, lines, (), 'kappa0')}: kappa0 must lie in (0, 2 pi]")
    names = {"pi": math.pi, "kappa0": cfg["kappa0"]}

    def numeric(block, table):
        for key, val in block.items():
            if isinstance(val, dict):
                numeric(val, (*table, key))
            elif isinstance(val, str) and key not in ("kind", "f", "g", "command", "output_dir") and \
                    not (table[-1:] == ("fields",) and key == "families"):
                try:
                    block[key] = _eval_expr(val, names)
                except (ValueError, SyntaxError, ZeroDivisionError):
                    raise ConfigError(f"{_where(path, lines, table, key)}: cannot parse {key} = {val!r}") from None
            elif isinstance(val, list) and key != "families":
                try:
                    block[key] = [_eval_expr(v, names) if isinstance(v, str) else v for v in val]
                except (ValueError, SyntaxError, ZeroDivisionError):
                    raise ConfigError(f"{_where(path, lines, table, key)}: cannot parse {key}") from None

    for key, val in cfg.items():
        if isinstance(val, dict) and key != "sweep":
            numeric(val, (key,))
    if sub == "sweep":
        base = cfg["sweep"]["command"]
        if base not in DEFAULTS or base == "sweep":
            raise ConfigError(f"{_where(path, lines, ('sweep',), 'command')}: cannot sweep {base!r}")
        if not cfg["sweep"]["params"]:
            raise ConfigError(f"{path}: [sweep.params] must list at least one parameter")
        for key, vals in cfg["sweep"]["params"].items():
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"{_where(path, lines, ('sweep', 'params'), key)}: sweep values must be a "
                                  "non-empty list")
    return cfg


# -- output ----------------------------------------------------------------


def _num(v):
    """Deterministic text form: 12 significant digits, shortest round-trip repr."""
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return float(f"{v:.12g}")


def _param(v):
    """Input parameters: integral values print without a decimal point."""
    if isinstance(v, float) and v.is_integer() and abs(v) < 1e15:
        return int(v)
    return _num(v)


def _clean(obj, exact=False):
    # config values are kept exact, computed values are rounded by _num
    if isinstance(obj, dict):
        return {str(k): _clean(v, exact) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, exact) for v in obj]
    if isinstance(obj, (str, bool)) or obj is None:
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)):
        if exact and isinstance(obj, (float, np.floating)) and math.isfinite(obj):
            return float(obj)
        return _num(obj)
    return str(obj)


def _csv_bytes(header, rows, config):
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(_clean(config, exact=True), sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    return buf.getvalue().encode()


def _json_bytes(record, config):
    doc = {"config": _clean(config, exact=True), **_clean(record)}
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()


class Outcome:
    """Files to write, a pass flag, a summary scalar and optional plot columns."""

    def __init__(self, passed, summary, files=None, plot=None):
        self.passed = bool(passed)
        self.summary = summary
        self.files = files or {}
        self.plot = plot


# -- subcommands -----------------------------------------------------------


def _verdict_cfg(cfg):
    from .lemma_verifier import VerdictConfig

    return VerdictConfig(**cfg["verdict"])


def _refinement(cfg):
    from .lemma_verifier import RefinementSpec

    return RefinementSpec(**cfg["refinement"])


def _grid(cfg):
    from .lemma_verifier import stratified_grid

    return stratified_grid(cfg["kappa0"], cfg["grid"]["radii"], cfg["grid"]["fracs"])


def _rules(cfg):
    from .convolution import ConvolutionRules

    return ConvolutionRules(**cfg["rules"])


def _weights(cfg):
    from .domain_geometry import WeightParams

    w = cfg["weights"]
    return WeightParams(w["p"], w["Theta"], w["theta"])


def _report_outcome(name, rep, cfg):
    rec = rep.to_dict()
    plot = (["level", "grid_max"], [[i, _num(v)] for i, v in enumerate(rep.history)])
    return Outcome(rep.verdict == "bounded", rep.grid_max, {f"{name}.json": ("json", rec)}, plot)


def cmd_kernel(cfg, executor=None):
    from .domain_geometry import WedgePoint
    from .heat_kernel import KernelConfig, WedgeHeatKernel, eval_images

    k = cfg["kernel"]
    G = WedgeHeatKernel(KernelConfig(cfg["kappa0"], k["tol"], int(k["max_terms"])))
    x, y = WedgePoint(*k["x"]), WedgePoint(*k["y"])
    val = G.eval(k["t"], x, y)
    g, dr, da = G.gradient(k["t"], x, y)
    try:
        oracle = eval_images(k["t"], x, y, cfg["kappa0"])
    except ValueError:
        oracle = None
    rec = {"G": val, "oracle": oracle, "grad_r": float(dr), "grad_angle": float(da)}
    passed = True
    if oracle is not None:
        rec["abs_error"] = abs(val - oracle)
        rec["rel_error"] = abs(val - oracle) / max(abs(oracle), 1e-300)
        passed = rec["abs_error"] <= k["oracle_tol"] * max(1.0, abs(oracle))
    return Outcome(passed, val, {"kernel.json": ("json", rec)})


def cmd_green_bound(cfg, executor=None):
    from .heat_kernel import KernelConfig
    from .lemma_verifier import GreenSample, check_green_bound

    g = cfg["green"]
    s = cfg["sample"]
    spec = GreenSample(tuple(s["t_values"]), int(s["n_r"]), int(s["n_angle"]), s["r_min"], s["r_max"],
                       int(s["levels"]), int(s["polish"]), int(s["sigma_steps"]), s["resolve"])
    rep = check_green_bound(cfg["kappa0"], g["lambda1"], g["lambda2"], g["sigma"], spec, KernelConfig(cfg["kappa0"]),
                            _verdict_cfg(cfg))
    return _report_outcome("green_bound", rep, cfg)


def cmd_lemma_at(cfg, executor=None):
    from .lemma_verifier import check_lemma_At

    lem = cfg["lemma"]
    rep = check_lemma_At(lem["alpha"], lem["A"])
    rows = [[_param(lem["alpha"]), _param(A), _num(v), _num(rep.extra["bound"])]
            for A, v in zip(lem["A"], rep.extra["values"])]
    plot = (["A", "value"], [[_param(A), _num(v)] for A, v in zip(lem["A"], rep.extra["values"])])
    return Outcome(rep.bounded, rep.grid_max, {"lemma_at.csv": ("csv", (["alpha", "A", "value", "bound"], rows))},
                   plot)


def cmd_lemma_b1b2s(cfg, executor=None):
    from .lemma_verifier import check_lemma_b1b2s

    lem = cfg["lemma"]
    rep = check_lemma_b1b2s(lem["sigma"], lem["beta1"], lem["beta2"], cfg["kappa0"], _grid(cfg), _refinement(cfg),
                            _verdict_cfg(cfg))
    return _report_outcome("lemma_b1b2s", rep, cfg)


def cmd_lemma_b1a1s(cfg, executor=None):
    from .lemma_verifier import check_lemma_b1a1s

    lem = cfg["lemma"]
    rep = check_lemma_b1a1s(int(lem["d"]), lem["sigma"], lem["alpha"], lem["beta"], None, _refinement(cfg),
                            _verdict_cfg(cfg))
    return _report_outcome("lemma_b1a1s", rep, cfg)


def cmd_lemma_a2s(cfg, executor=None):
    from .lemma_verifier import check_lemma_a2s

    lem = cfg["lemma"]
    rep = check_lemma_a2s(lem["sigma"], lem["alpha"], cfg["kappa0"], _grid(cfg), _refinement(cfg), _verdict_cfg(cfg))
    return _report_outcome("lemma_a2s", rep, cfg)


def cmd_lemma_combined(cfg, executor=None):
    from .lemma_verifier import check_lemma_combined

    lem = cfg["lemma"]
    rep = check_lemma_combined(lem["sigma"], lem["beta1"], lem["beta2"], lem["alpha1"], lem["alpha2"], cfg["kappa0"],
                               _grid(cfg), tuple(lem["scales"]), _refinement(cfg), _verdict_cfg(cfg))
    return _report_outcome("lemma_combined", rep, cfg)


def _family_field(kappa0, family, scale, fcfg):
    from .fields import radial_bump_family, semigroup_family, vertex_power_family

    if family == "semigroup":
        return semigroup_family(kappa0, (scale,), angle_frac=fcfg["edge_fraction"])[0]
    if family == "bump":
        return radial_bump_family(kappa0, (scale,), angular=1)[0]
    if family == "power":
        return vertex_power_family(kappa0, (scale,), delta=fcfg["delta"])[0]
    raise ConfigError(f"unknown field family {family!r}; expected semigroup, bump or power")


def _lp_job(job):
    # worker entry point: fields are rebuilt from plain descriptors
    from .convolution import ConvolutionRules
    from .domain_geometry import WeightParams
    from .theorem_verifier import _field_rows

    kind, w, kappa0, family, scale, fcfg, Ts, rules = job
    g = _family_field(kappa0, family, scale, fcfg)
    return _field_rows((kind, WeightParams(*w), kappa0, g, Ts, ConvolutionRules(**rules)))


def _cmd_lp(cfg, executor, kind):
    from .lemma_verifier import range_gate
    from .theorem_verifier import RatioTable, _meta

    params = _weights(cfg)
    if not range_gate(params, cfg["kappa0"]):
        raise ConfigError("weights are outside the admissible range; use the 'sharpness' subcommand instead")
    if kind == "stoch" and params.p < 2:
        raise ConfigError("lp-stoch needs p >= 2")
    f = cfg["fields"]
    for fam in f["families"]:
        if fam not in ("semigroup", "bump", "power"):
            raise ConfigError(f"unknown field family {fam!r}; expected semigroup, bump or power")
    Ts = sorted(float(t) for t in cfg["time"]["T"])
    w = (params.p, params.Theta, params.theta)
    jobs = [(kind, w, cfg["kappa0"], fam, float(s), f, Ts, cfg["rules"]) for fam in f["families"] for s in f["scales"]]
    mapper = executor.map if executor is not None else map
    rows = [r for res in mapper(_lp_job, jobs) for r in res]
    table = RatioTable("stochastic" if kind == "stoch" else "deterministic", rows, _meta(params, cfg["kappa0"]))
    header = ["T", "field", "family", "numerator", "denominator", "ratio"]
    body = [[_param(r.T), r.field_id, r.family, _num(r.numerator), _num(r.denominator), _num(r.ratio)]
            for r in table.rows]
    mx = table.max_by_T()
    summary = {"verdict": table.verdict, "variation": table.variation, "max_by_T": {str(_param(k)): v
                                                                                    for k, v in mx.items()},
               "family_max": table.max_by_family()}
    name = f"lp_{kind}"
    plot = (["T", "max_ratio"], [[_param(k), _num(v)] for k, v in mx.items()])
    return Outcome(table.passed, max(mx.values()),
                   {f"{name}.csv": ("csv", (header, body)), f"{name}.summary.json": ("json", summary)}, plot)


def cmd_lp_stoch(cfg, executor=None):
    return _cmd_lp(cfg, executor, "stoch")


def cmd_lp_det(cfg, executor=None):
    return _cmd_lp(cfg, executor, "det")


def cmd_sharpness(cfg, executor=None):
    from .theorem_verifier import sharpness_probe

    s = cfg["sharpness"]
    if s["kind"] not in ("stoch", "det"):
        raise ConfigError("sharpness.kind must be 'stoch' or 'det'")
    rep = sharpness_probe(_weights(cfg), cfg["kappa0"], s["delta"], s["eps"], s["T"], s["kind"], _rules(cfg))
    rows = [[_param(e), _num(r)] for e, r in zip(rep.eps, rep.ratios)]
    summary = {"growth": rep.growth, "monotone": rep.monotone, "in_range": rep.in_range}
    return Outcome(True, rep.growth, {"sharpness.csv": ("csv", (["eps", "ratio"], rows)),
                                      "sharpness.summary.json": ("json", summary)},
                   (["eps", "ratio"], rows))


def cmd_regularity(cfg, executor=None):
    from .theorem_verifier import regularity_probe

    r = cfg["regularity"]
    grid = np.geomspace(r["r_min"], r["r_max"], int(r["n_r"]))
    fit = regularity_probe(cfg["kappa0"], None, r["t"], r["angle"], grid, _rules(cfg))
    rec = {"slope": fit.slope, "expected": fit.expected, "error": fit.error, "residual": fit.residual,
           "r": fit.r, "sigma": fit.sigma}
    plot = (["log_r", "log_sigma"], [[_num(math.log(a)), _num(math.log(b))] for a, b in zip(fit.r, fit.sigma)])
    return Outcome(fit.error <= r["tolerance"], fit.slope, {"regularity.json": ("json", rec)}, plot)


def cmd_apriori(cfg, executor=None):
    from .theorem_verifier import verify_apriori_p2

    a = cfg["apriori"]
    k0 = cfg["kappa0"]
    fcfg = dict(_FIELDS)
    f = None if a["f"] == "none" else _family_field(k0, a["f"], a["scale"], fcfg)
    g = None if a["g"] == "none" else _family_field(k0, a["g"], a["scale"], fcfg)
    if f is None and g is None:
        raise ConfigError("apriori needs f or g (both are 'none')")
    params = _weights(cfg)
    if params.p != 2:
        raise ConfigError("apriori is implemented for p = 2")
    recs = verify_apriori_p2(k0, f, g, list(a["T"]), params, _rules(cfg))
    ratios = [r.ratio for r in recs]
    med = float(np.median(ratios))
    var = max(abs(q - med) for q in ratios) / med
    rows = [[_param(r.T), _num(r.lhs), _num(r.rhs), _num(r.ratio)] for r in recs]
    return Outcome(all(math.isfinite(q) for q in ratios) and var <= a["tolerance"], max(ratios),
                   {"apriori.csv": ("csv", (["T", "lhs", "rhs", "ratio"], rows))},
                   (["T", "ratio"], [[row[0], row[3]] for row in rows]))


COMMANDS = {
    "kernel": cmd_kernel,
    "green-bound": cmd_green_bound,
    "lemma-at": cmd_lemma_at,
    "lemma-b1b2s": cmd_lemma_b1b2s,
    "lemma-b1a1s": cmd_lemma_b1a1s,
    "lemma-a2s": cmd_lemma_a2s,
    "lemma-combined": cmd_lemma_combined,
    "lp-stoch": cmd_lp_stoch,
    "lp-det": cmd_lp_det,
    "sharpness": cmd_sharpness,
    "regularity": cmd_regularity,
    "apriori": cmd_apriori,
}


def _set_dotted(cfg, key, value):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"sweep parameter '{key}' does not name a config key")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"sweep parameter '{key}' does not name a config key")
    node[parts[-1]] = value


def _sweep_job(job):
    base, overrides = job
    cfg = copy.deepcopy(base)
    for key, val in overrides:
        _set_dotted(cfg, key, val)
    cfg = resolve({k: v for k, v in cfg.items()}, "<sweep>")
    out = COMMANDS[cfg["subcommand"]](cfg, None)
    return out.passed, out.summary


def cmd_sweep(cfg, executor=None):
    sw = cfg["sweep"]
    base = {"subcommand": sw["command"], "kappa0": cfg["kappa0"], "seed": cfg["seed"],
            "output_dir": cfg["output_dir"], **copy.deepcopy(DEFAULTS[sw["command"]])}
    keys = sorted(sw["params"])
    for key in keys:
        _set_dotted(copy.deepcopy(base), key, None)
    combos = list(itertools.product(*[sw["params"][k] for k in keys]))
    jobs = [(base, list(zip(keys, combo))) for combo in combos]
    mapper = executor.map if executor is not None else map
    results = list(mapper(_sweep_job, jobs))
    rows = [[*[_param(v) if not isinstance(v, str) else v for v in combo], "pass" if ok else "fail", _num(val)]
            for combo, (ok, val) in zip(combos, results)]
    header = [*keys, "verdict", "value"]
    return Outcome(all(ok for ok, _ in results), len(rows), {"sweep.csv": ("csv", (header, rows))},
                   ([*keys, "value"], [[*r[:-2], r[-1]] for r in rows]))


COMMANDS["sweep"] = cmd_sweep


# -- driver ----------------------------------------------------------------


def _workers(arg):
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("WEDGE_LAB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"WEDGE_LAB_WORKERS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run(cfg, workers=1, plot_data=False):
    """Execute a resolved config; writes the reports and returns the exit status."""
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    np.random.seed(int(cfg["seed"]) % 2**32)
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        outcome = COMMANDS[cfg["subcommand"]](cfg, executor)
    finally:
        if executor is not None:
            executor.shutdown()
    for name, (kind, payload) in sorted(outcome.files.items()):
        data = _csv_bytes(*payload, cfg) if kind == "csv" else _json_bytes(payload, cfg)
        (out_dir / name).write_bytes(data)
    if plot_data and outcome.plot is not None:
        stem = cfg["subcommand"].replace("-", "_")
        (out_dir / f"{stem}.plot.csv").write_bytes(_csv_bytes(*outcome.plot, cfg))
    return 0 if outcome.passed else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="wedge-lab", description="Run a wedge_lab verification from a TOML config.")
    parser.add_argument("config", help="path to the TOML config")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel workers (default: $WEDGE_LAB_WORKERS or the number of cores)")
    parser.add_argument("--plot-data", action="store_true", help="also write x/y columns for plotting")
    parser.add_argument("--output-dir", default=None, help="override output_dir from the config")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        raw, lines = load_config(args.config)
        cfg = resolve(raw, args.config, lines)
        if args.output_dir is not None:
            cfg["output_dir"] = args.output_dir
        workers = _workers(args.workers)
        return run(cfg, workers, args.plot_data)
    except ConfigError as exc:
        print(f"wedge-lab: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"wedge-lab: {args.config}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
