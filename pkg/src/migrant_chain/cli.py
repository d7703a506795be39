"""Command-line entry point ``migrant-chain``.

Subcommands: simulate, classify, verify <battery>, figure1, sweep, hitting,
drops. Each reads an optional JSON config (``--config``), validates it against
the subcommand's schema (unknown keys are errors), merges it over
:data:`DEFAULTS`, and writes its outputs plus ``manifest.json`` to ``--out``.

Exit codes: 0 success or informational run, 1 a verified inequality or
threshold failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from . import batteries as B
from ._svg import line_chart
from .chain import ChainConfig, simulate
from .exact import write_bound_reports
from .families import FamilyError, ThinningFamily, classify, gamma0
from .montecarlo import (EnsembleSpec, drop_census, ensemble_speed, hitting_estimate,
                         resolve_threads, tail_window_means)
from .passage import DENSE_SOLVE_CAP, first_passage_down

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

# One place for every default horizon, replication count and threshold.
DEFAULTS = {
    "simulate": {"family": {"kind": "power_law", "a": 1.5}, "x0": 100, "steps": 1000, "seed": 0},
    "classify": {"family": {"kind": "power_law", "a": 1.5}},
    "verify": {"seed": 0},
    "figure1": {"x0": 100, "steps": 10000, "seed": 0, "a_red": 0.99, "a_blue": 1.01,
                "batch": {"replications": 100, "steps": 100000, "tail_fraction": 0.2,
                          "red_threshold": 60, "red_min_count": 95, "blue_min_count": 99}},
    "sweep": {"grid": [0.5, 0.9, 0.99, 1.0, 1.01, 1.5, 2.0, 2.5], "x0": 100, "steps": 10000,
              "replications": 20, "seed": 0},
    "hitting": {"family": {"kind": "power_law", "a": 1.0}, "x0": 10, "target": 1, "M_cap": 200,
                "replications": 2000, "max_steps": 10**8, "seed": 0},
    "drops": {"family": {"kind": "power_law", "a": 2.5}, "x0": 10, "window": [5000, 10000],
              "replications": 200, "seed": 0},
}

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_INT = {"type": "integer", "minimum": 0}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_SIGN = {"enum": ["nonnegative", "below_minus_reciprocal", "unknown"]}
_PROB = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}

FAMILY_SCHEMA = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["kind", "a"],
         "properties": {"kind": {"const": "power_law"}, "a": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "c"],
         "properties": {"kind": {"const": "constant"}, "c": _PROB}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "rho"],
         "properties": {"kind": {"const": "rescaled"}, "rho": {"type": "number", "exclusiveMinimum": 0},
                        "cap": _PROB}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "eta"],
         "properties": {"kind": {"const": "critical"},
                        "eta": {"enum": ["reciprocal_plus", "reciprocal_minus", "zero", "tabulated"]},
                        "cap": _PROB, "values": {"type": "array", "items": _NUM, "minItems": 1},
                        "eventual_sign": _SIGN}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "values"],
         "properties": {"kind": {"const": "tabulated"},
                        "values": {"type": "array", "items": _PROB, "minItems": 1},
                        "declared_rho": {"type": "number", "minimum": 0},
                        "eventual_sign": _SIGN, "tail_exponent": _NUM}},
    ]
}

_COMMAND_PROPS = {
    "simulate": {"family": FAMILY_SCHEMA, "x0": _POS_INT, "steps": _NONNEG_INT, "seed": _SEED},
    "classify": {"family": FAMILY_SCHEMA},
    "verify": {"seed": _SEED, "family": FAMILY_SCHEMA, "rho_bar": _PROB,
               "epsilon": {"type": ["number", "null"], "exclusiveMinimum": 0},
               "k_max": _NONNEG_INT, "j_max": _POS_INT, "grid_points": _POS_INT,
               "x_max": _POS_INT, "c_values": {"type": "array", "items": _PROB},
               "N_values": {"type": "array", "items": _NONNEG_INT},
               "a_values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
               "l_max": _POS_INT, "M": {"type": "integer", "minimum": 2}},
    "figure1": {"x0": _POS_INT, "steps": _POS_INT, "seed": _SEED, "a_red": _NUM, "a_blue": _NUM,
                "batch": {"type": "object", "additionalProperties": False,
                          "properties": {"replications": _POS_INT, "steps": _POS_INT,
                                         "tail_fraction": _PROB, "red_threshold": _NUM,
                                         "red_min_count": _NONNEG_INT,
                                         "blue_min_count": _NONNEG_INT}}},
    "sweep": {"grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                       "minItems": 1},
              "x0": _POS_INT, "steps": _POS_INT, "replications": _POS_INT, "seed": _SEED},
    "hitting": {"family": FAMILY_SCHEMA, "x0": _POS_INT, "target": _POS_INT, "M_cap": _POS_INT,
                "replications": _POS_INT, "max_steps": _POS_INT, "seed": _SEED},
    "drops": {"family": FAMILY_SCHEMA, "x0": _POS_INT,
              "window": {"type": "array", "items": _NONNEG_INT, "minItems": 2, "maxItems": 2},
              "replications": _POS_INT, "seed": _SEED},
}


def config_schema(command: str) -> dict:
    """Published JSON schema of the config file for ``command``."""
    return {"$schema": "https://json-schema.org/draft/2020-12/schema", "type": "object",
            "additionalProperties": False, "properties": _COMMAND_PROPS[command]}


class ConfigError(Exception):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "family":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(command: str, path: Optional[str], seed: Optional[int],
                   battery: Optional[str] = None) -> dict:
    user = {}
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    validator = jsonschema.Draft202012Validator(config_schema(command))
    errors = sorted(validator.iter_errors(user), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  {'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("config failed schema validation:\n" + "\n".join(lines))
    base = DEFAULTS[command]
    if battery is not None:
        base = _merge(base, B.BATTERY_DEFAULTS[battery])
    cfg = _merge(base, user)
    if seed is not None:
        cfg["seed"] = seed
    if "family" in cfg:
        try:
            ThinningFamily.from_record(cfg["family"])
        except FamilyError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


class Run:
    """Output directory plus a manifest rewritten as files are added."""

    def __init__(self, command: str, cfg: dict, out: Path, threads: int):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "toolkit_version": __version__,
            "command": command,
            "config_hash": config_hash(cfg),
            "seed": cfg.get("seed"),
            "threads": threads,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "finished": None,
            "outputs": [],
            "config": cfg,
        }
        self._write_manifest()

    def _write_manifest(self):
        (self.out / "manifest.json").write_text(json.dumps(self.manifest, indent=2) + "\n")

    def path(self, name: str) -> Path:
        self.manifest["outputs"].append(name)
        return self.out / name

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def finish(self, status: str) -> None:
        self.manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.manifest["status"] = status
        self._write_manifest()


def _family(cfg):
    return ThinningFamily.from_record(cfg["family"])


def cmd_simulate(cfg, run: Run, threads: int) -> int:
    config = ChainConfig(_family(cfg), cfg["x0"], cfg["steps"], cfg["seed"])
    traj = simulate(config)
    traj.check()
    with open(run.path("trajectory.csv"), "w", newline="") as fh:
        traj.to_csv(fh)
    return EXIT_OK


def cmd_classify(cfg, run: Run, threads: int) -> int:
    report = classify(_family(cfg)).to_dict()
    report["family"] = cfg["family"]
    run.write_json("classify.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify(cfg, run: Run, threads: int, battery: str) -> int:
    if battery == "domination":
        scan, reports = B.domination_battery(_family(cfg), cfg["rho_bar"], cfg["epsilon"],
                                             cfg["k_max"], cfg["j_max"], cfg["grid_points"])
        extra = {"J": scan.J, "epsilon": scan.law.epsilon,
                 "all_j_in_range_hold": bool(scan.ok[(scan.J or 1) - 1:].all())}
    elif battery == "martingale":
        reports = B.martingale_battery(cfg["x_max"], cfg["c_values"], cfg["N_values"])
        extra = {}
    elif battery == "tails":
        reports = B.tails_battery(cfg["a_values"], cfg["l_max"], cfg["k_max"])
        extra = {}
    elif battery == "ladder":
        reports = B.ladder_battery(cfg["a_values"], cfg["l_max"], cfg["k_max"])
        extra = {}
    else:
        reports = B.hitting_battery(cfg["M"], cfg["x_max"], cfg["N_values"])
        extra = {}
    with open(run.path(f"verify_{battery}.csv"), "w", newline="") as fh:
        write_bound_reports(fh, reports)
    summary = dict(B.summarize(reports), battery=battery, **extra)
    run.write_json(f"verify_{battery}.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if summary["violations"] == 0 else EXIT_FAILED


def cmd_figure1(cfg, run: Run, threads: int, batch: bool) -> int:
    red = ThinningFamily.power_law(cfg["a_red"])
    blue = ThinningFamily.power_law(cfg["a_blue"])
    if batch:
        b = cfg["batch"]
        red_means, _ = tail_window_means(red, cfg["x0"], b["steps"], b["replications"], cfg["seed"],
                                         b["tail_fraction"], threads)
        _, blue_final = tail_window_means(blue, cfg["x0"], b["steps"], b["replications"], cfg["seed"],
                                          b["tail_fraction"], threads)
        with open(run.path("figure1_batch.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "red_tail_mean", "blue_final"])
            for r, (m, f) in enumerate(zip(red_means, blue_final)):
                w.writerow([r, repr(float(m)), int(f)])
        red_ok = int(np.sum(red_means < b["red_threshold"]))
        blue_ok = int(np.sum(blue_final > cfg["x0"]))
        summary = {"replications": b["replications"], "steps": b["steps"],
                   "red_tail_mean_below_threshold": red_ok, "blue_final_above_x0": blue_ok,
                   "red_pass": red_ok >= b["red_min_count"], "blue_pass": blue_ok >= b["blue_min_count"]}
        run.write_json("figure1_batch.json", summary)
        print(json.dumps(summary, sort_keys=True))
        return EXIT_OK if summary["red_pass"] and summary["blue_pass"] else EXIT_FAILED
    paths = {}
    for fam in (red, blue):
        paths[fam.params[0]] = simulate(ChainConfig(fam, cfg["x0"], cfg["steps"], cfg["seed"])).states
    ar, ab = cfg["a_red"], cfg["a_blue"]
    with open(run.path("figure1.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", f"a={ar:g}", f"a={ab:g}"])
        for n, (xr, xb) in enumerate(zip(paths[ar], paths[ab])):
            w.writerow([n, int(xr), int(xb)])
    steps = np.arange(cfg["steps"] + 1)
    svg = line_chart([(f"a={ar:g}", steps, paths[ar], "red"), (f"a={ab:g}", steps, paths[ab], "blue")],
                     f"c(k) = 1/(k^a + 1), X_0 = {cfg['x0']}", "n", "X_n")
    run.path("figure1.svg").write_text(svg)
    return EXIT_OK


def cmd_sweep(cfg, run: Run, threads: int) -> int:
    with open(run.path("sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["a", "regime", "gamma0", "speed_hat", "stderr"])
        for a in cfg["grid"]:
            fam = ThinningFamily.power_law(a)
            rep = classify(fam)
            spec = EnsembleSpec(ChainConfig(fam, cfg["x0"], cfg["steps"], cfg["seed"]), cfg["replications"])
            est = ensemble_speed(spec, threads)
            g0 = gamma0(fam)
            w.writerow([repr(float(a)), rep.regime, "" if g0 is None else g0,
                        repr(est.mean), repr(est.stderr)])
    return EXIT_OK


def cmd_hitting(cfg, run: Run, threads: int) -> int:
    fam = _family(cfg)
    est = hitting_estimate(fam, cfg["x0"], cfg["target"], cfg["M_cap"], cfg["replications"],
                           cfg["seed"], cfg["max_steps"], threads)
    out = {"monte_carlo": est.to_dict(), "x0": cfg["x0"], "target": cfg["target"], "M_cap": cfg["M_cap"]}
    if cfg["target"] == 1 and cfg["M_cap"] <= DENSE_SOLVE_CAP:
        sol = first_passage_down(fam, cfg["M_cap"])
        with open(run.path("first_passage.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "g_x"])
            for x, g in sol.rows():
                w.writerow([x, repr(g)])
        out["exact"] = sol[cfg["x0"]]
        out["z_score"] = ((est.p_hat - out["exact"]) / est.stderr) if est.stderr > 0 else None
    run.write_json("hitting.json", out)
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_drops(cfg, run: Run, threads: int) -> int:
    fam = _family(cfg)
    start, end = cfg["window"]
    spec = EnsembleSpec(ChainConfig(fam, cfg["x0"], max(end, 1), cfg["seed"]), cfg["replications"])
    census = drop_census(spec, (start, end), threads)
    summary = census.to_dict(gamma0(fam))
    run.write_json("drops.json", summary)
    with open(run.path("drops.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replication", "size", "count"])
        for r, counts in enumerate(census.per_replication):
            for size in sorted(counts):
                w.writerow([r, size, counts[size]])
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap; falls back to $MIGRANT_CHAIN_THREADS, then 1")
    p = argparse.ArgumentParser(prog="migrant-chain", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate one trajectory to CSV")
    sub.add_parser("classify", parents=[common], help="classify the regime of a family")
    v = sub.add_parser("verify", parents=[common], help="run an exact verification battery")
    v.add_argument("battery", choices=sorted(B.BATTERY_DEFAULTS))
    f = sub.add_parser("figure1", parents=[common], help="two-trajectory phase figure (SVG + CSV)")
    f.add_argument("--batch", action="store_true", help="many seeds; check the qualitative criteria")
    sub.add_parser("sweep", parents=[common], help="phase table over a grid of power-law exponents")
    sub.add_parser("hitting", parents=[common], help="Monte Carlo downward hitting vs the exact solver")
    sub.add_parser("drops", parents=[common], help="drop-size census in a step window")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    battery = getattr(args, "battery", None)
    try:
        cfg = resolve_config(args.command, args.config, args.seed, battery)
        threads = resolve_threads(args.threads)
        if args.command == "hitting" and not cfg["target"] < cfg["x0"] < cfg["M_cap"]:
            raise ConfigError("hitting needs target < x0 < M_cap")
        if args.command == "drops" and not cfg["window"][0] <= cfg["window"][1]:
            raise ConfigError("drops window must satisfy start <= end")
    except (ConfigError, ValueError) as exc:
        print(f"migrant-chain: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if battery is not None:
        cfg["battery"] = battery
    run = Run(args.command, cfg, Path(args.out), threads)
    if args.command == "verify":
        code = cmd_verify(cfg, run, threads, battery)
    elif args.command == "figure1":
        code = cmd_figure1(cfg, run, threads, args.batch)
    else:
        code = globals()[f"cmd_{args.command}"](cfg, run, threads)
    run.finish("passed" if code == EXIT_OK else "failed")
    return code


if __name__ == "__main__":
    sys.exit(main())
