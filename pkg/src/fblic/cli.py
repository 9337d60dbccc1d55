"""Command-line entry point.

Commands:
    exponent                     (R, E_r) curve for a channel, CSV or JSON
    dueck lc-check               scan (a, k) for a positive outer-bound margin
    dueck feasibility            the example's feasibility chain as JSON
    bounds check                 run a theorem checker on an instance file
    bounds search                scan scheme parameters over a grid
    simulate dueck               end-to-end chain on the example/fixture
    simulate generic             layered pipeline on a generic instance
    test interleave              column-law chi-square report
    test cc-exponent             ensemble ML error vs the exponent bound

Global flags: --config FILE (JSON of long option names; explicit flags
win), --seed, --out, --format {json,csv}, --threads, --unit {nats,bits},
--no-timestamp. The environment variable FBLIC_SEED supplies the default
seed. Exit code 0 means success (and feasible/passed where applicable),
1 means an infeasible or failed report, 2 means an error.

Everything internal is in nats. With --unit bits the unambiguous rate
outputs (exponent curves, simulation rate fields, the cc-exponent rate
and exponent) are divided by log 2 at emission; condition reports mix
rates, probabilities, and log-domain values, so they are always emitted
in nats and say so in their "unit" field.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import bounds as _bounds
from . import dueck as _dueck
from . import exponent as _exponent
from . import probkit as _probkit
from . import simulate as _simulate

_LN2 = math.log(2.0)
SEED_ENV_VAR = "FBLIC_SEED"


@dataclass
class RunConfig:
    command: str
    subcommand: str | None
    seed: int
    out: str | None
    format: str
    threads: int
    unit: str
    no_timestamp: bool
    options: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        # the output path is deliberately omitted so two runs writing to
        # different files stay byte-identical
        return {
            "command": self.command, "subcommand": self.subcommand,
            "seed": self.seed, "format": self.format,
            "threads": self.threads, "unit": self.unit,
            "no_timestamp": self.no_timestamp, "options": self.options,
        }


_GLOBAL_KEYS = {"seed", "out", "format", "threads", "unit", "no_timestamp", "config"}

_COMMAND_OPTIONS = {
    ("exponent", None): {"channel", "input_pmf", "rates"},
    ("dueck", "lc-check"): {"a_grid", "k_grid", "eta", "sat_outputs"},
    ("dueck", "feasibility"): {"a", "k", "eta", "sat_outputs"},
    ("bounds", "check"): {"instance", "scheme", "theorem"},
    ("bounds", "search"): {"spec"},
    ("simulate", "dueck"): {"params", "scheme", "trials", "e_max", "hash_bits",
                            "capacity_slack"},
    ("simulate", "generic"): {"instance", "scheme", "trials", "e_max", "hash_bits"},
    ("test", "interleave"): {"law", "m", "significance", "control"},
    ("test", "cc-exponent"): {"channel", "composition", "rate", "l",
                              "codebooks", "trials_per_book"},
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="JSON file of option defaults")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output path (default stdout)")
    common.add_argument("--format", choices=["json", "csv"], default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--unit", choices=["nats", "bits"], default=argparse.SUPPRESS)
    common.add_argument("--no-timestamp", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="fblic", description=__doc__, parents=[common],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)

    sub = p.add_subparsers(dest="command", required=True)

    def add_sub(parent, name, **kw):
        return parent.add_parser(name, parents=[common], **kw)

    pe = add_sub(sub, "exponent", help="(R, E_r) curve")
    pe.add_argument("--channel", default=None, help="Dmc JSON file")
    pe.add_argument("--input-pmf", dest="input_pmf", default=None, help="Pmf JSON file")
    pe.add_argument("--rates", default=None,
                    help="start:stop:step or comma list, nats (default 0:0.7:0.05)")

    pd = sub.add_parser("dueck", help="worked-example reports")
    dsub = pd.add_subparsers(dest="subcommand", required=True)
    plc = add_sub(dsub, "lc-check")
    plc.add_argument("--a-grid", dest="a_grid", default=None)
    plc.add_argument("--k-grid", dest="k_grid", default=None)
    plc.add_argument("--eta", type=int, default=None)
    plc.add_argument("--sat-outputs", dest="sat_outputs", default=None)
    pfe = add_sub(dsub, "feasibility")
    pfe.add_argument("--a", type=int, default=None)
    pfe.add_argument("--k", type=int, default=None)
    pfe.add_argument("--eta", type=int, default=None)
    pfe.add_argument("--sat-outputs", dest="sat_outputs", default=None)

    pb = sub.add_parser("bounds", help="sufficient-condition checks")
    bsub = pb.add_subparsers(dest="subcommand", required=True)
    pbc = add_sub(bsub, "check")
    pbc.add_argument("--instance", default=None, help="ProblemInstance JSON file")
    pbc.add_argument("--scheme", default=None, help="SchemeParams JSON file")
    pbc.add_argument("--theorem", choices=["thm1", "thm3", "thm2-rate"], default=None)
    pbs = add_sub(bsub, "search")
    pbs.add_argument("--spec", default=None,
                     help="JSON file with instance, base scheme, and grid lists")

    ps = sub.add_parser("simulate", help="Monte Carlo chains")
    ssub = ps.add_subparsers(dest="subcommand", required=True)
    psd = add_sub(ssub, "dueck")
    psd.add_argument("--params", default=None,
                     help="JSON {a,k,eta} or {joint: [[...]]} file")
    psd.add_argument("--scheme", default=None)
    psd.add_argument("--trials", type=int, default=None)
    psd.add_argument("--e-max", dest="e_max", type=int, default=None)
    psd.add_argument("--hash-bits", dest="hash_bits", type=int, default=None)
    psd.add_argument("--capacity-slack", dest="capacity_slack", type=float, default=None)
    psg = add_sub(ssub, "generic")
    psg.add_argument("--instance", default=None)
    psg.add_argument("--scheme", default=None)
    psg.add_argument("--trials", type=int, default=None)
    psg.add_argument("--e-max", dest="e_max", type=int, default=None)
    psg.add_argument("--hash-bits", dest="hash_bits", type=int, default=None)

    pt = sub.add_parser("test", help="statistical validation runs")
    tsub = pt.add_subparsers(dest="subcommand", required=True)
    pti = add_sub(tsub, "interleave")
    pti.add_argument("--law", default=None,
                     help="JSON {positions: [[...], ...]} per-position pmfs")
    pti.add_argument("--m", type=int, default=None)
    pti.add_argument("--significance", type=float, default=None)
    pti.add_argument("--control", action="store_true", default=None,
                     help="test raw columns instead of interleaved ones")
    ptc = add_sub(tsub, "cc-exponent")
    ptc.add_argument("--channel", default=None)
    ptc.add_argument("--composition", default=None, help="comma counts, sums to l")
    ptc.add_argument("--rate", type=float, default=None, help="nats per symbol")
    ptc.add_argument("--l", type=int, default=None)
    ptc.add_argument("--codebooks", type=int, default=None)
    ptc.add_argument("--trials-per-book", dest="trials_per_book", type=int, default=None)

    return p


def parse_config(argv) -> RunConfig:
    """Parse flags, then fill unset values from the --config file.

    Unknown keys in the file are an error naming the key; malformed
    numbers are an error naming the field.
    """
    parser = _build_parser()
    ns = parser.parse_args(argv)
    values = vars(ns).copy()
    command = values.pop("command")
    subcommand = values.pop("subcommand", None)
    config_path = values.pop("config", None)
    values.setdefault("no_timestamp", None)

    allowed = _GLOBAL_KEYS | _COMMAND_OPTIONS.get((command, subcommand), set())
    file_values: dict = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            try:
                file_values = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SystemExit(f"error: config file is not valid JSON: {exc}")
        if not isinstance(file_values, dict):
            raise SystemExit("error: config file must hold a JSON object")
        for key in file_values:
            norm = key.replace("-", "_")
            if norm not in allowed:
                raise SystemExit(f"error: unknown config key {key!r}")

    def pick(name: str, default, caster=None):
        val = values.get(name)
        if val is None and name in {k.replace("-", "_") for k in file_values}:
            raw = {k.replace("-", "_"): v for k, v in file_values.items()}[name]
            if caster is not None:
                try:
                    val = caster(raw)
                except (TypeError, ValueError):
                    raise SystemExit(f"error: malformed value for field {name!r}: {raw!r}")
            else:
                val = raw
        return default if val is None else val

    env_seed = os.environ.get(SEED_ENV_VAR)
    default_seed = int(env_seed) if env_seed else 0
    seed = pick("seed", default_seed, int)
    out = pick("out", None, str)
    fmt = pick("format", "json", str)
    threads = pick("threads", 1, int)
    unit = pick("unit", "nats", str)
    nots = pick("no_timestamp", False, bool)
    if fmt not in ("json", "csv"):
        raise SystemExit(f"error: malformed value for field 'format': {fmt!r}")
    if unit not in ("nats", "bits"):
        raise SystemExit(f"error: malformed value for field 'unit': {unit!r}")

    casters = {
        "trials": int, "e_max": int, "hash_bits": int, "m": int, "l": int,
        "codebooks": int, "trials_per_book": int, "a": int, "k": int, "eta": int,
        "rate": float, "significance": float, "capacity_slack": float,
    }
    options = {}
    for name in _COMMAND_OPTIONS.get((command, subcommand), set()):
        options[name] = pick(name, None, casters.get(name))

    return RunConfig(command=command, subcommand=subcommand, seed=seed, out=out,
                     format=fmt, threads=threads, unit=unit, no_timestamp=bool(nots),
                     options=options)


# ---------------------------------------------------------------------------
# input loading helpers
# ---------------------------------------------------------------------------

def _load_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_pmf(path: str) -> _probkit.Pmf:
    return _probkit.Pmf(_load_json(path)["probs"])


def _load_dmc(path: str) -> _probkit.Dmc:
    return _probkit.Dmc(_load_json(path)["rows"])


def _load_scheme(path: str) -> _bounds.SchemeParams:
    d = _load_json(path)
    return _bounds.SchemeParams(l=int(d["l"]), delta=float(d["delta"]),
                                A=float(d["A"]), B=float(d["B"]),
                                rho=float(d["rho"]), m=int(d.get("m", 1)))


def _load_instance(path: str) -> _bounds.ProblemInstance:
    d = _load_json(path)
    kw = {}
    if d.get("p_w1") is not None:
        kw["p_w1"] = _probkit.Pmf(d["p_w1"])
    if d.get("p_w2") is not None:
        kw["p_w2"] = _probkit.Pmf(d["p_w2"])
    return _bounds.ProblemInstance(
        source=_probkit.JointPmf(d["source"]),
        f1=d["f1"], f2=d["f2"], ic=d["ic"],
        p_u=_probkit.Pmf(d["p_u"]),
        p_v1=_probkit.Pmf(d["p_v1"]), p_v2=_probkit.Pmf(d["p_v2"]),
        p_x1_given_uv1=d["p_x1_given_uv1"], p_x2_given_uv2=d["p_x2_given_uv2"],
        k_size=d.get("k_size"), **kw)


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if str(v).strip()]


def _parse_rates(text: str) -> list[float]:
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    return [float(v) for v in text.split(",")]


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _emit(payload, cfg: RunConfig, csv_rows=None) -> None:
    """Write the report atomically (or to stdout), embedding the config."""
    if cfg.format == "csv" and csv_rows is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
        for row in csv_rows:
            writer.writerow(row)
        text = buf.getvalue()
    else:
        doc = {"config": cfg.resolved(), "unit": cfg.unit, "report": payload}
        if not cfg.no_timestamp:
            doc["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if cfg.out:
        tmp = cfg.out + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, cfg.out)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if obj == math.inf:
        return "inf"
    if obj == -math.inf:
        return "-inf"
    return str(obj)


def _unit_factor(cfg: RunConfig) -> float:
    return _LN2 if cfg.unit == "bits" else 1.0


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------

def _opt(cfg: RunConfig, name: str, default):
    val = cfg.options.get(name)
    return default if val is None else val


def _require(cfg: RunConfig, name: str):
    val = cfg.options.get(name)
    if val is None:
        raise ValueError(f"missing required option {name!r}")
    return val


def _cmd_exponent(cfg: RunConfig) -> int:
    channel = _load_dmc(_require(cfg, "channel"))
    pmf = (_load_pmf(cfg.options["input_pmf"]) if cfg.options.get("input_pmf")
           else _probkit.Pmf.uniform(channel.num_inputs))
    rates = _parse_rates(_opt(cfg, "rates", "0:0.7:0.05"))
    factor = _unit_factor(cfg)
    rows = [("rate", "exponent")]
    curve = []
    for r in rates:
        er = _exponent.random_coding_exponent(_exponent.ExponentQuery(
            rate=r, input_pmf=pmf, channel=channel))
        rows.append((r / factor, er / factor))
        curve.append({"rate": r / factor, "exponent": er / factor})
    _emit({"curve": curve}, cfg, csv_rows=rows)
    return 0


def _cmd_dueck_lc_check(cfg: RunConfig) -> int:
    a_grid = _parse_int_list(_opt(cfg, "a_grid", "2,4,8,16,32,64,128,256,512,1024,2048,4096"))
    k_grid = _parse_int_list(_opt(cfg, "k_grid", "2,5,10,20,50,100,200,500,1000,2000"))
    ny1, ny2 = _parse_int_list(_opt(cfg, "sat_outputs", "4,4"))
    scan = _dueck.scan_lc_margin(a_grid, k_grid, eta=int(_opt(cfg, "eta", 8)),
                                 sat_output_sizes=(ny1, ny2))
    rows = [("a", "k", "margin")] + [(a, k, m) for a, k, m in scan.margins]
    _emit(scan.to_dict(), cfg, csv_rows=rows)
    return 0 if scan.first_positive else 1


def _cmd_dueck_feasibility(cfg: RunConfig) -> int:
    params = _dueck.DueckParams(int(_require(cfg, "a")), int(_require(cfg, "k")),
                                int(_opt(cfg, "eta", 8)))
    ny1, ny2 = _parse_int_list(_opt(cfg, "sat_outputs", "4,4"))
    report = _dueck.section3a_feasibility(params, sat_output_sizes=(ny1, ny2))
    payload = {"section3a": report.to_dict()}
    try:
        inst, sp = _dueck.lemma2_scheme(params, sat_output_sizes=(ny1, ny2))
        payload["witness"] = _bounds.check_thm1(inst, sp).to_dict()
    except ValueError as exc:
        payload["witness"] = {"skipped": str(exc)}
    payload["lc_margin"] = _dueck.lc_infeasibility_margin(
        params, _dueck.log_output_alphabet(params.a, ny1, ny2))
    _emit(payload, cfg)
    return 0 if report.overall else 1


def _cmd_bounds_check(cfg: RunConfig) -> int:
    inst = _load_instance(_require(cfg, "instance"))
    sp = _load_scheme(_require(cfg, "scheme"))
    theorem = _opt(cfg, "theorem", "thm1")
    if theorem == "thm1":
        report = _bounds.check_thm1(inst, sp)
    elif theorem == "thm3":
        report = _bounds.check_thm3(inst, sp)
    else:
        report = _bounds.check_thm2_rate_point(inst, sp)
    _emit(report.to_dict(), cfg)
    return 0 if report.overall else 1


def _cmd_bounds_search(cfg: RunConfig) -> int:
    spec = _load_json(_require(cfg, "spec"))
    inst_doc = spec["instance"]
    tmp_inst = json.dumps(inst_doc)
    inst = _load_instance_from_doc(inst_doc)
    base = spec["scheme"]
    grid_axes = spec.get("grid", {})
    names = sorted(grid_axes)
    combos = [()]
    for name in names:
        combos = [c + (v,) for c in combos for v in grid_axes[name]]

    def make_case(combo):
        params = dict(base)
        params.update(dict(zip(names, combo)))
        sp = _bounds.SchemeParams(l=int(params["l"]), delta=float(params["delta"]),
                                  A=float(params["A"]), B=float(params["B"]),
                                  rho=float(params["rho"]), m=int(params.get("m", 1)))
        return inst, sp

    result = _bounds.search_feasible(make_case, combos)
    rows = [tuple(names) + ("phi", "min_slack", "feasible")]
    for combo in combos:
        _, sp = make_case(combo)
        rep = _bounds.check_thm1(inst, sp)
        rows.append(combo + (rep.phi, rep.min_slack, bool(rep.overall)))
    payload = {
        "feasible": [{"params": dict(zip(names, c)), "min_slack": r.min_slack}
                     for c, r in result.feasible],
        "best_attempt": (
            {"params": dict(zip(names, result.best_attempt[0])),
             "report": result.best_attempt[1].to_dict()}
            if result.best_attempt else None),
        "instance_digest": zlib.crc32(tmp_inst.encode()),
    }
    _emit(payload, cfg, csv_rows=rows)
    return 0 if result.feasible else 1


def _load_instance_from_doc(d: dict) -> _bounds.ProblemInstance:
    kw = {}
    if d.get("p_w1") is not None:
        kw["p_w1"] = _probkit.Pmf(d["p_w1"])
    if d.get("p_w2") is not None:
        kw["p_w2"] = _probkit.Pmf(d["p_w2"])
    return _bounds.ProblemInstance(
        source=_probkit.JointPmf(d["source"]), f1=d["f1"], f2=d["f2"], ic=d["ic"],
        p_u=_probkit.Pmf(d["p_u"]), p_v1=_probkit.Pmf(d["p_v1"]),
        p_v2=_probkit.Pmf(d["p_v2"]), p_x1_given_uv1=d["p_x1_given_uv1"],
        p_x2_given_uv2=d["p_x2_given_uv2"], k_size=d.get("k_size"), **kw)


def _scheme_from_doc(d: dict) -> _bounds.SchemeParams:
    return _bounds.SchemeParams(l=int(d["l"]), delta=float(d["delta"]),
                                A=float(d["A"]), B=float(d["B"]),
                                rho=float(d["rho"]), m=int(d.get("m", 1)))


_STATS_COLUMNS = (
    "trials", "m", "l", "seed",
    "inner_error_1", "inner_error_2", "block_error_1", "block_error_2",
    "matrix_fail_1", "matrix_fail_2", "wrong_accepts_1", "wrong_accepts_2",
    "rate_demand", "satellite_capacity", "phi_bound", "s1_neq_s2_rate",
)


def _stats_row(stats: "_simulate.TrialStats", factor: float) -> tuple:
    return (stats.trials, stats.m, stats.l, stats.seed,
            stats.inner_error_rate[0], stats.inner_error_rate[1],
            stats.block_error_rate[0], stats.block_error_rate[1],
            stats.matrix_failure_rate[0], stats.matrix_failure_rate[1],
            stats.wrong_accepts[0], stats.wrong_accepts[1],
            stats.rate_demand[0] / factor, stats.satellite_capacity[0] / factor,
            stats.phi_bound, stats.s1_neq_s2_rate)


def _emit_stats(all_stats: list, cfg: RunConfig) -> None:
    """One JSON document, or a CSV with one row per configuration."""
    factor = _unit_factor(cfg)
    rows = [_STATS_COLUMNS] + [_stats_row(s, factor) for s in all_stats]
    docs = [_convert_stats(s, cfg) for s in all_stats]
    _emit(docs[0] if len(docs) == 1 else docs, cfg, csv_rows=rows)


def _cmd_simulate_dueck(cfg: RunConfig) -> int:
    d = _load_json(_require(cfg, "params"))
    if "joint" in d:
        source = _probkit.JointPmf(d["joint"])
    else:
        source = _dueck.DueckParams(int(d["a"]), int(d["k"]), int(d["eta"]))
    scheme_doc = _load_json(_require(cfg, "scheme"))
    schemes = scheme_doc if isinstance(scheme_doc, list) else [scheme_doc]
    all_stats = [
        _simulate.simulate_dueck(
            source, _scheme_from_doc(sd), trials=int(_opt(cfg, "trials", 1000)),
            seed=cfg.seed, e_max=int(_opt(cfg, "e_max", 2)),
            hash_bits=int(_opt(cfg, "hash_bits", 128)),
            capacity_slack=float(_opt(cfg, "capacity_slack", 0.2)),
            threads=cfg.threads)
        for sd in schemes
    ]
    _emit_stats(all_stats, cfg)
    return 0


def _cmd_simulate_generic(cfg: RunConfig) -> int:
    inst = _load_instance(_require(cfg, "instance"))
    scheme_doc = _load_json(_require(cfg, "scheme"))
    schemes = scheme_doc if isinstance(scheme_doc, list) else [scheme_doc]
    all_stats = [
        _simulate.simulate_generic(
            inst, _scheme_from_doc(sd), trials=int(_opt(cfg, "trials", 200)),
            seed=cfg.seed, e_max=int(_opt(cfg, "e_max", 1)),
            hash_bits=int(_opt(cfg, "hash_bits", 96)),
            threads=cfg.threads)
        for sd in schemes
    ]
    _emit_stats(all_stats, cfg)
    return 0


def _convert_stats(stats: _simulate.TrialStats, cfg: RunConfig) -> dict:
    doc = stats.to_dict()
    factor = _unit_factor(cfg)
    if factor != 1.0:
        doc["rate_demand"] = [v / factor for v in doc["rate_demand"]]
        doc["satellite_capacity"] = [v / factor for v in doc["satellite_capacity"]]
    return doc


def _cmd_test_interleave(cfg: RunConfig) -> int:
    d = _load_json(_require(cfg, "law"))
    pmfs = [_probkit.Pmf(p) for p in d["positions"]]
    report = _simulate.interleave_iid_test(
        pmfs, m=int(_opt(cfg, "m", 10000)), seed=cfg.seed,
        significance=float(_opt(cfg, "significance", 0.01)),
        interleaved=not bool(_opt(cfg, "control", False)))
    _emit(report.to_dict(), cfg)
    return 0 if report.passed else 1


def _cmd_test_cc_exponent(cfg: RunConfig) -> int:
    channel = _load_dmc(_require(cfg, "channel"))
    comp = _parse_int_list(_require(cfg, "composition"))
    factor = _unit_factor(cfg)
    report = _simulate.cc_exponent_test(
        channel, comp, rate=float(_require(cfg, "rate")), l=int(_require(cfg, "l")),
        codebooks=int(_opt(cfg, "codebooks", 100)),
        trials_per_book=int(_opt(cfg, "trials_per_book", 20)), seed=cfg.seed)
    doc = report.to_dict()
    if factor != 1.0:
        doc["rate"] /= factor
        doc["exponent"] /= factor
    _emit(doc, cfg)
    return 0 if report.passed else 1


_HANDLERS = {
    ("exponent", None): _cmd_exponent,
    ("dueck", "lc-check"): _cmd_dueck_lc_check,
    ("dueck", "feasibility"): _cmd_dueck_feasibility,
    ("bounds", "check"): _cmd_bounds_check,
    ("bounds", "search"): _cmd_bounds_search,
    ("simulate", "dueck"): _cmd_simulate_dueck,
    ("simulate", "generic"): _cmd_simulate_generic,
    ("test", "interleave"): _cmd_test_interleave,
    ("test", "cc-exponent"): _cmd_test_cc_exponent,
}


def run(cfg: RunConfig) -> int:
    handler = _HANDLERS.get((cfg.command, cfg.subcommand))
    if handler is None:
        print(f"error: unknown command {cfg.command} {cfg.subcommand}", file=sys.stderr)
        return 2
    try:
        return handler(cfg)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        code = exc.code
        if isinstance(code, str):
            print(code, file=sys.stderr)
            return 2
        return 2 if code not in (0, None) else int(code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
