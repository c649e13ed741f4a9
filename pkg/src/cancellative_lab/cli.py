"""
Command line front end.

Every subcommand takes a flat JSON spec (``--spec FILE``) overridden by
flags, validates the merged spec against ``SCHEMA``, fills defaults and
writes its result together with a manifest that can be fed back through
``--spec`` to reproduce the run.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
import warnings

import jsonschema

from . import __version__
from .algebra_suite import corrupted_psi, run_suite
from .exact import check_H_duality, check_duality, truncated_hatY_analysis
from .gf2core import Config, Lattice
from .models import (RateTable, diagram_closure, interface_table,
                     model_from_spec)
from .montecarlo import (RandomStream, alpha_scan, clustering_curve,
                         estimate_h, estimate_p, interface_tightness_report, make_sim,
                         martingale_test, product_config, product_sampler, simulate_hatY,
                         survival_probability)

log = logging.getLogger("cancellative_lab")

EXIT_OK, EXIT_INVALID, EXIT_FAILED, EXIT_INCONCLUSIVE = 0, 2, 3, 4
SEED_ENV = "CANCELLATIVE_LAB_SEED"

COMMANDS = ("verify-algebra", "exact-dual", "simulate", "interface-tightness", "harmonic",
            "martingale", "clustering", "survival", "estimate-p", "alpha-scan")
NEEDS_MODEL = ("exact-dual", "simulate", "interface-tightness", "harmonic", "martingale",
               "clustering", "survival", "estimate-p")
MODEL_KINDS = ("rebellious", "voter", "disagreement", "np", "affine")

_nonneg = {"type": "number", "minimum": 0}
_count = {"type": "integer", "minimum": 1}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_sites = {"type": "array", "items": {"type": "integer"}}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "model": {"oneOf": [
            {"enum": list(MODEL_KINDS)},
            {"type": "object", "required": ["kind"], "properties": {
                "kind": {"enum": list(MODEL_KINDS) + ["table"]},
                "alpha": _prob, "R": _count, "form": {"enum": ["table", "flip"]},
                "lattice": {"enum": ["Z", "Z+1/2"]},
                "entries": {"type": "array", "items": {
                    "type": "object", "required": ["shape", "rate"],
                    "properties": {
                        # operator literal: [[row, col], ...] in doubled coordinates
                        "shape": {"type": "array", "minItems": 1, "items": {
                            "type": "array", "items": {"type": "integer"},
                            "minItems": 2, "maxItems": 2}},
                        "rate": {"type": ["number", "string"]}}}}}},
        ]},
        "alpha": _prob,
        "R": _count,
        "form": {"enum": ["table", "flip"]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "n": _count,
        "t": _nonneg,
        "eps": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "trials": _count,
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
        "configs": _count,
        "corrupt_psi": {"type": "boolean"},
        "init": {"enum": ["delta", "heaviside", "product"]},
        "horizon": _nonneg,
        "burn_in": _nonneg,
        "thin": {"type": "number", "exclusiveMinimum": 0},
        "cap": _count,
        "K": _count,
        "n_max": {"type": "integer", "minimum": 0},
        "replicates": _count,
        "times": {"type": "array", "items": _nonneg, "minItems": 1},
        "alphas": {"type": "array", "items": _prob, "minItems": 1},
        "events": _count,
        "p": _prob,
        "x": _sites,
        "x0": _sites,
        "draws": _count,
    },
    "required": ["command"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"model": {"enum": ["rebellious", "np", "affine"]}},
                "required": ["model"]},
         "then": {"required": ["alpha"]}},
        {"if": {"properties": {"command": {"enum": list(NEEDS_MODEL)}}},
         "then": {"required": ["model"]}},
    ],
}

DEFAULTS = {
    "verify-algebra": {"iterations": 1000, "configs": 100, "corrupt_psi": False},
    "exact-dual": {"n": 8, "t": 1.0, "eps": 1e-10, "trials": 50, "tolerance": 1e-8},
    "simulate": {"init": "delta", "horizon": 10.0, "n": 64, "p": 0.5},
    "interface-tightness": {"horizon": 1e4, "burn_in": 1e2, "thin": 1.0, "cap": 512,
                            "n_max": 10},
    "harmonic": {"horizon": 1e4, "burn_in": 1e2, "thin": 1.0, "cap": 512, "x": [0, 1]},
    "martingale": {"horizon": 1e4, "burn_in": 1e2, "thin": 1.0, "cap": 512, "x0": [0, 1],
                   "times": [1, 2, 5, 10, 20], "replicates": 2000},
    "clustering": {"n": 256, "p": 0.5, "times": [0, 1, 10, 100, 1000], "replicates": 100},
    "survival": {"x0": [0], "horizon": 100.0, "replicates": 1000},
    "estimate-p": {"horizon": 1e4, "burn_in": 1e2, "thin": 1.0, "cap": 512, "p": 0.5,
                   "draws": 10000},
    "alpha-scan": {"model": "rebellious", "alphas": [0.2, 0.35, 0.5, 0.65, 0.8, 1.0],
                   "events": 100000, "replicates": 20, "cap": 512},
}

# flag name -> (spec key, parser type)
PARAM_FLAGS = {
    "--model": ("model", str), "--alpha": ("alpha", float), "--R": ("R", int),
    "--form": ("form", str), "--n": ("n", int), "--t": ("t", float), "--eps": ("eps", float),
    "--trials": ("trials", int), "--tolerance": ("tolerance", float),
    "--iterations": ("iterations", int), "--configs": ("configs", int),
    "--init": ("init", str), "--horizon": ("horizon", float), "--burn-in": ("burn_in", float),
    "--thin": ("thin", float), "--cap": ("cap", int), "--K": ("K", int),
    "--n-max": ("n_max", int), "--replicates": ("replicates", int),
    "--times": ("times", "floats"), "--alphas": ("alphas", "floats"),
    "--events": ("events", int), "--p": ("p", float), "--x": ("x", "ints"),
    "--x0": ("x0", "ints"), "--draws": ("draws", int),
}


class SpecError(Exception):
    pass


def _floats(s: str) -> list:
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s: str) -> list:
    return [int(v) for v in s.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="JSON spec file (or a manifest from a previous run)")
    common.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV})")
    common.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    common.add_argument("--out", help="output directory (default: print to stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="result format")
    common.add_argument("-v", "--verbose", action="store_true")
    for flag, (key, kind) in PARAM_FLAGS.items():
        typ = {"floats": _floats, "ints": _ints}.get(kind, kind)
        common.add_argument(flag, dest=key, type=typ, default=None,
                            help="comma-separated list" if kind in ("floats", "ints") else None)
    common.add_argument("--corrupt-psi", dest="corrupt_psi", action="store_true",
                        default=None, help=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="cancellative-lab",
                                description="Cancellative particle systems: exact checks "
                                            "and Monte Carlo estimators.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    run = sub.add_parser("run", parents=[common], help="dispatch on --command or the spec file")
    run.add_argument("--command", dest="command_flag", choices=COMMANDS)
    return p


def _load_spec(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise SpecError(f"cannot read spec {path}: {e}")
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    if "manifest_version" in data:
        data = dict(data["spec"])
    return data


def resolve_spec(args: argparse.Namespace, env=None) -> dict:
    """Merge spec file, flags and the seed fallback; validate; fill defaults."""
    env = os.environ if env is None else env
    spec = _load_spec(args.spec) if args.spec else {}
    command = args.subcommand
    if command == "run":
        command = args.command_flag or spec.get("command")
        if command is None:
            raise SpecError("run needs --command or a spec with a command")
    elif spec.get("command") not in (None, command):
        raise SpecError(f"spec is for {spec['command']!r}, not {command!r}")
    spec["command"] = command
    for key, _ in PARAM_FLAGS.values():
        v = getattr(args, key, None)
        if v is not None:
            spec[key] = v
    if args.corrupt_psi:
        spec["corrupt_psi"] = True
    if args.seed is not None:
        spec["seed"] = args.seed
    elif "seed" not in spec and env.get(SEED_ENV):
        try:
            spec["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise SpecError(f"${SEED_ENV} is not an integer")
    spec.setdefault("seed", 0)
    try:
        jsonschema.validate(spec, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(v) for v in e.absolute_path) or "spec"
        raise SpecError(f"{where}: {e.message}")
    resolved = dict(DEFAULTS[command])
    resolved.update(spec)
    return resolved


def _model(spec: dict):
    m = spec["model"]
    if isinstance(m, str):
        m = {"kind": m}
        for key in ("alpha", "R", "form"):
            if key in spec:
                m[key] = spec[key]
    try:
        return model_from_spec(m)
    except (ValueError, KeyError) as e:
        raise SpecError(f"model: {e}")


def _table(spec: dict, ts: bool = False) -> RateTable:
    model = _model(spec)
    if not isinstance(model, RateTable):
        raise SpecError("this command needs a cancellative rate table, not a flip-rate model")
    if ts and not model.is_ts:
        raise SpecError("this command needs a type-symmetric table")
    return model


def _hat_samples(spec: dict, table: RateTable):
    return simulate_hatY(table, spec["horizon"], spec["burn_in"], spec["thin"], spec["cap"],
                         seed=spec["seed"])


def _finite(sites, lat: Lattice) -> Config:
    return Config.from_doubled([lat.doubled(k) for k in sites], lat)


# -- commands ---------------------------------------------------------------------
# each returns (result dict, csv rows or None, exit code)

def cmd_verify_algebra(spec, jobs):
    psi_fn = corrupted_psi if spec["corrupt_psi"] else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = run_suite(spec["iterations"], spec["configs"], spec["seed"], psi_fn=psi_fn)
    for w in caught:
        log.warning("%s", w.message)
    rows = [{"check": k, **v} for k, v in rep["checks"].items()]
    return rep, rows, EXIT_OK if rep["passed"] else EXIT_FAILED


def cmd_exact_dual(spec, jobs):
    rt = _table(spec)
    args = (rt, spec["n"], spec["t"], spec["trials"], spec["eps"], spec["seed"])
    reports = [check_duality(*args)]
    if rt.is_ts and rt.parity == 0:
        reports.append(check_H_duality(*args))
    timing = {r.identity: r.runtime_ms for r in reports}
    rows = [r.to_dict(timing=False) for r in reports]
    ok = all(r.max_deviation <= spec["tolerance"] for r in reports)
    return {"reports": rows, "tolerance": spec["tolerance"], "passed": ok,
            "_timing": timing}, rows, EXIT_OK if ok else EXIT_FAILED


def cmd_simulate(spec, jobs):
    model = _model(spec)
    parity = model.parity if isinstance(model, RateTable) else 0
    rng = RandomStream(spec["seed"], 0)
    if spec["init"] == "product":
        x = product_config(spec["n"], spec["p"], rng, parity)
    elif spec["init"] == "heaviside":
        x = Config.heaviside(0, Lattice(parity))
    else:
        x = Config.from_doubled([parity], Lattice(parity))
    try:
        sim = make_sim(model, x, rng=rng)
    except ValueError as e:
        raise SpecError(str(e))
    times = spec.get("times") or [spec["horizon"] * k / 10 for k in range(11)]
    rows = []
    for t in sorted(times):
        sim.advance(t)
        tt, off, bits = sim.snapshot_row()
        rows.append({"time": t, "window_offset": off, "bitstring": bits})
    return {"snapshots": rows, "events": sim.events}, rows, EXIT_OK


def _tightness_setup(spec):
    X = _table(spec, ts=True)
    run = _hat_samples(spec, interface_table(X))
    return X, run


def cmd_interface_tightness(spec, jobs):
    X, run = _tightness_setup(spec)
    if run.aborted:
        res = {"aborted": True, "abort_time": run.abort_time, "events": run.events}
        return res, [res], EXIT_INCONCLUSIVE
    rep = interface_tightness_report(run.samples, spec["n_max"])
    rep.update(aborted=False, events=run.events)
    if "K" in spec:
        ex = truncated_hatY_analysis(interface_table(X), spec["K"])
        rep["exact"] = {"K": ex.K, "p_delta0": ex.p_delta0, "mean_size": ex.mean_size,
                        "leakage": ex.leakage, "states": int(len(ex.states))}
    rows = [{"n": t["n"], "size": 2 * t["n"] + 1, "estimate": t["estimate"],
             "stderr": t["stderr"]} for t in rep["tail"]]
    return rep, rows, EXIT_OK


def cmd_harmonic(spec, jobs):
    X, run = _tightness_setup(spec)
    if run.aborted:
        res = {"aborted": True, "abort_time": run.abort_time}
        return res, [res], EXIT_INCONCLUSIVE
    rep = estimate_h(run.samples, spec["x"]).to_dict()
    rep["seed"] = spec["seed"]
    return rep, [{k: v for k, v in rep.items() if k != "parameters"}], EXIT_OK


def cmd_martingale(spec, jobs):
    X, run = _tightness_setup(spec)
    if run.aborted:
        res = {"aborted": True, "abort_time": run.abort_time}
        return res, [res], EXIT_INCONCLUSIVE
    Xp = diagram_closure(X).Xp
    x0 = _finite(spec["x0"], Xp.lattice)
    res = martingale_test(Xp, run.samples, x0, spec["times"], spec["replicates"],
                          seed=spec["seed"], jobs=jobs)
    ok = all(abs(p["z"]) <= 3 for p in res["points"])
    res["passed"] = ok
    return res, res["points"], EXIT_OK if ok else EXIT_FAILED


def cmd_clustering(spec, jobs):
    model = _model(spec)
    curve = clustering_curve(model, spec["n"], spec["p"], spec["times"], spec["replicates"],
                             seed=spec["seed"], jobs=jobs)
    return {"curve": curve}, curve, EXIT_OK


def cmd_survival(spec, jobs):
    rt = _table(spec)
    x0 = _finite(spec["x0"], rt.lattice)
    rep = survival_probability(rt, x0, spec["horizon"], spec["replicates"], spec["seed"],
                               jobs=jobs).to_dict()
    return rep, [{k: v for k, v in rep.items() if k != "parameters"}], EXIT_OK


def cmd_estimate_p(spec, jobs):
    X = _table(spec, ts=True)
    # the dual's interface model is the dual table of X
    run = _hat_samples(spec, diagram_closure(X).Yp)
    if run.aborted:
        res = {"aborted": True, "abort_time": run.abort_time}
        return res, [res], EXIT_INCONCLUSIVE
    rep = estimate_p(product_sampler(spec["p"]), run.samples, spec["draws"],
                     spec["seed"]).to_dict()
    return rep, [{k: v for k, v in rep.items() if k != "parameters"}], EXIT_OK


def cmd_alpha_scan(spec, jobs):
    m = spec["model"]
    kind = m if isinstance(m, str) else m.get("kind")
    try:
        res = alpha_scan(kind, spec["alphas"], spec["events"], spec["replicates"], spec["cap"],
                         seed=spec["seed"], jobs=jobs)
    except ValueError as e:
        raise SpecError(str(e))
    code = EXIT_OK if res["bracket"] is not None else EXIT_INCONCLUSIVE
    return res, res["points"], code


HANDLERS = {
    "verify-algebra": cmd_verify_algebra, "exact-dual": cmd_exact_dual,
    "simulate": cmd_simulate, "interface-tightness": cmd_interface_tightness,
    "harmonic": cmd_harmonic, "martingale": cmd_martingale, "clustering": cmd_clustering,
    "survival": cmd_survival, "estimate-p": cmd_estimate_p, "alpha-scan": cmd_alpha_scan,
}
CSV_DEFAULT = ("simulate", "clustering", "martingale", "alpha-scan")


# -- output -------------------------------------------------------------------------

def _clean(v):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "item"):
        return _clean(v.item())
    return v


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def render(spec: dict, result: dict, rows, fmt: str) -> str:
    if fmt == "json":
        return _dumps({"spec": spec, "seed": spec["seed"], "version": __version__,
                       "result": result})
    buf = io.StringIO()
    buf.write(f"# spec: {json.dumps(_clean(spec), sort_keys=True)}\n")
    buf.write(f"# seed: {spec['seed']}\n")
    rows = [_clean(r) for r in rows or []]
    if rows:
        fields = list(rows[0])
        for r in rows[1:]:
            fields += [k for k in r if k not in fields]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v)
                        for k, v in r.items()})
    return buf.getvalue()


def write_outputs(out_dir: str, spec: dict, text: str, fmt: str, timing: dict) -> list:
    try:
        os.makedirs(out_dir, exist_ok=True)
        name = f"{spec['command']}.{fmt}"
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text)
        manifest = {"manifest_version": 1, "spec": spec, "seed": spec["seed"],
                    "version": __version__, "outputs": [name]}
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            fh.write(_dumps(manifest))
        # wall-clock data lives apart so the files above stay byte-identical
        with open(os.path.join(out_dir, "timing.json"), "w") as fh:
            fh.write(_dumps(timing))
    except OSError as e:
        raise SpecError(f"cannot write to {out_dir}: {e}")
    return [name, "manifest.json", "timing.json"]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        spec = resolve_spec(args)
    except SpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    command = spec["command"]
    fmt = args.format or ("csv" if command in CSV_DEFAULT else "json")
    jobs = args.jobs or os.cpu_count() or 1
    t0 = time.perf_counter()
    try:
        result, rows, code = HANDLERS[command](spec, jobs)
    except (SpecError, ValueError) as e:
        # library ValueErrors here are parameter checks (ring too small, etc.)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    timing = {"runtime_ms": (time.perf_counter() - t0) * 1e3, "jobs": jobs}
    timing.update(result.pop("_timing", {}))
    text = render(spec, result, rows, fmt)
    if args.out:
        try:
            files = write_outputs(args.out, spec, text, fmt, timing)
        except SpecError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INVALID
        print(f"{command}: exit {code}, wrote {', '.join(files)} to {args.out} "
              f"in {timing['runtime_ms']:.0f} ms")
    else:
        sys.stdout.write(text)
        print(f"runtime_ms: {timing['runtime_ms']:.1f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
