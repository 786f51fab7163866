"""Config-driven experiment runner.

Subcommands::

    mlfczo run --config CONFIG [--out DIR] [--seed S] [--threads K]
               [--cap-cells C] [--cap-seconds T]
    mlfczo sweep --config CONFIG --param NAME --values V1,V2,... [--check I]
    mlfczo describe NAME | --all

``CONFIG`` is a JSON file or the name of a bundled config (``smoke``,
``fault``).  Exit status: 0 all checks pass, 1 some check failed, 2 invalid
config, 3 resource cap exceeded.

Seeds: check ``k`` draws its family from ``SeedSequence([seed, k])``, and case
``i`` of a family draws from ``SeedSequence(family_seed, spawn_key=(i,))``.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import harness as H
from .grid import Cube, Grid
from .kernelcore import kernel_from_dict
from .operators import APPLY_CAPS, ResourceCapError
from .serialize import dump_json, load_grid_function, write_csv

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_CAP = 0, 1, 2, 3
BUNDLED = ("smoke", "fault")
SWEEP_PARAMS = ("alpha", "delta", "q", "lambda", "gamma", "N", "a")
KERNEL_CHECKS = {"endpoint-weak", "weighted", "sharp-pointwise", "T-vs-maximal", "varexp-bound"}
DEFAULT_MAX_CELLS = 1 << 16

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["grid", "checks"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "grid": {
            "type": "object",
            "required": ["n", "N"],
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1, "maximum": 2},
                "N": {"type": "integer", "minimum": 1},
                "lo": {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]},
                "L": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "kernel": {"type": "object", "required": ["type"]},
        "family": {"$ref": "#/definitions/family"},
        "caps": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_cells": {"type": "integer", "minimum": 1},
                "max_cases": {"type": "integer", "minimum": 0},
                "max_seconds": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"enum": sorted(H.CHECK_INFO)},
                    "params": {"type": "object"},
                    "family": {"$ref": "#/definitions/family"},
                    "refine": {"type": "boolean"},
                },
            },
        },
    },
    "definitions": {
        "family": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(H.FAMILY_KINDS) + ["files"]},
                "count": {"type": "integer", "minimum": 0},
                "normalize": {"type": "boolean"},
                "cases": {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
            },
        }
    },
}


class ConfigError(ValueError):
    pass


class CapExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------- config


def resolve_config_path(ref: str) -> Path | None:
    """A filesystem path, or ``None`` for a bundled config name."""
    p = Path(ref)
    if p.exists():
        return p
    if ref in BUNDLED:
        return None
    raise ConfigError(f"config {ref!r} not found (bundled configs: {', '.join(BUNDLED)})")


def load_config(ref: str) -> tuple[dict[str, Any], Path]:
    path = resolve_config_path(ref)
    try:
        if path is None:
            text = resources.files("mlfczo").joinpath("configs", f"{ref}.json").read_text()
            base = Path.cwd()
        else:
            text = path.read_text()
            base = path.resolve().parent
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(x) for x in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {e.message}") from None
    return cfg, base


def _grid(cfg: dict[str, Any]) -> Grid:
    g = cfg["grid"]
    try:
        return Grid.make(int(g["n"]), g.get("lo", 0.0), float(g.get("L", 1.0)), int(g["N"]))
    except ValueError as e:
        raise ConfigError(f"grid: {e}") from None


def _check_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def _family(fcfg: dict[str, Any], seed: int, m: int, base: Path, grid: Grid):
    if fcfg["kind"] == "files":
        cases = []
        for row in fcfg.get("cases", []):
            fs = []
            for ref in row:
                head = (base / ref).with_suffix(".json")
                if not head.exists():
                    raise ConfigError(f"referenced file {head} does not exist")
                f = load_grid_function(base / ref)
                if f.grid != grid:
                    raise ConfigError(f"{ref} lives on another grid than the config grid")
                fs.append(f)
            cases.append(tuple(fs))
        return cases
    return H.TestFamily(fcfg["kind"], int(fcfg.get("count", 10)), seed, m, bool(fcfg.get("normalize", False)))


def _family_size(fam) -> int:
    return fam.count if isinstance(fam, H.TestFamily) else len(fam)


def _slots(name: str, params: dict[str, Any], kernel) -> int:
    if name in KERNEL_CHECKS:
        return kernel.m
    if name == "product-domination":
        return len(params.get("split", (0.5, 0.5)))
    return 1


def _cube(params: dict[str, Any], grid: Grid) -> Cube | None:
    c = params.get("cube")
    if c is None:
        return None
    return Cube(grid, tuple(c["corner"]), int(c["side"]))


def _handle(name: str, params: dict[str, Any], kernel, fam):
    """A callable ``grid -> InequalityReport`` for one configured check."""
    p = params
    if name == "endpoint-weak":
        return lambda g: H.check_endpoint_weak(kernel, fam, g, p.get("lambdas", ()), p.get("gammas", (1.0,)))
    if name == "weighted":
        v = {"weights": p["weights"], "P": p["P"]}
        return lambda g: H.check_weighted(kernel, v, fam, g, p.get("strong_or_weak", "auto"))
    if name == "sharp-pointwise":
        return lambda g: H.check_sharp_pointwise(kernel, fam, g, p.get("delta"), p.get("mode", "full"))
    if name == "T-vs-maximal":
        return lambda g: H.check_T_vs_maximal(
            kernel, fam, g, float(p.get("q", 2.0)), p.get("weight"), p.get("strong_or_weak", "strong"))
    if name == "fefferman-stein":
        return lambda g: H.check_fefferman_stein(
            fam, g, float(p.get("delta", 1.0)), float(p.get("p", 2.0)), p.get("weight"), p.get("mode", "full"))
    if name == "kolmogorov":
        return lambda g: H.check_kolmogorov(fam, g, float(p.get("p", 1.0)), float(p.get("q", 2.0)), _cube(p, g))
    if name == "varexp-bound":
        return lambda g: H.check_varexp_bound(kernel, p["exponents"], p["split"], fam, g)
    if name == "product-domination":
        return lambda g: H.check_product_domination(
            fam, float(p.get("alpha", 1.0)), p.get("split", (0.5, 0.5)), g, p.get("mode", "full"))
    if name == "tail-integral":
        n = int(p.get("n", 1))
        return lambda g: H.check_tail_integral(n, float(p.get("alpha", 0.5)), float(p.get("a", 1.0)), int(p.get("m", 2)))
    if name == "ap-constant":
        return lambda g: H.check_ap_constant(g, float(p.get("a", 0.5)), float(p.get("p", 2.0)), p.get("mode", "full"))
    raise ConfigError(f"unknown check {name!r}")


def _enforce_cells(grid: Grid, refine: bool, max_cells: int, name: str, m: int) -> None:
    top = grid.refine(2) if refine else grid
    if top.size > max_cells:
        raise CapExceeded(f"{name}: {top.size} cells exceed the cap of {max_cells}")
    if name in KERNEL_CHECKS:
        cap = APPLY_CAPS.get((m, grid.n))
        if cap is not None and top.N > cap:
            raise CapExceeded(f"{name}: N = {top.N} exceeds the operator cap {cap} for m={m}, n={grid.n}")


def _prepare(cfg: dict[str, Any], base: Path, seed: int, max_cells: int):
    """Validate everything that needs no compute; return runnable items."""
    grid = _grid(cfg)
    kernel = None
    if "kernel" in cfg:
        try:
            kernel = kernel_from_dict(cfg["kernel"])
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigError(f"kernel: {e}") from None
        if kernel.n != grid.n:
            raise ConfigError(f"kernel dimension {kernel.n} differs from grid dimension {grid.n}")
    max_cases = cfg.get("caps", {}).get("max_cases")
    items = []
    for k, chk in enumerate(cfg["checks"]):
        name, params = chk["name"], chk.get("params", {})
        if name in KERNEL_CHECKS and kernel is None:
            raise ConfigError(f"check {k} ({name}) needs a kernel")
        m = _slots(name, params, kernel)
        fcfg = chk.get("family", cfg.get("family", {"kind": "indicators", "count": 10}))
        fam = _family(fcfg, _check_seed(seed, k), m, base, grid)
        if max_cases is not None and _family_size(fam) > max_cases:
            raise CapExceeded(f"check {k} ({name}): {_family_size(fam)} cases exceed the cap of {max_cases}")
        refine = bool(chk.get("refine", False))
        _enforce_cells(grid, refine, max_cells, name, m)
        try:
            handle = _handle(name, params, kernel, fam)
        except KeyError as e:
            raise ConfigError(f"check {k} ({name}) is missing parameter {e}") from None
        items.append((k, name, handle, refine))
    return grid, items


def _run_items(grid: Grid, items, max_seconds: float | None) -> list[dict[str, Any]]:
    start = time.monotonic()
    out = []
    for k, name, handle, refine in items:
        if max_seconds is not None and time.monotonic() - start > max_seconds:
            raise CapExceeded(f"wall-clock budget of {max_seconds} s exhausted before check {k} ({name})")
        try:
            if refine:
                res = H.refinement_stability(handle, grid)
                rep, passed = res.fine, res.ok
                extra = {"coarse": res.coarse.to_dict()}
            else:
                rep = handle(grid)
                passed, extra = rep.passed, {}
        except ResourceCapError as e:
            raise CapExceeded(f"check {k} ({name}): {e}") from None
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigError(f"check {k} ({name}): {e}") from None
        out.append({"index": k, "name": name, "passed": bool(passed), "report": rep, **extra})
    return out


def _write_outputs(out: Path, cfg: dict[str, Any], seed: int, results: list[dict[str, Any]]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    failures = [f"{r['index']}:{r['name']}" for r in results if not r["passed"]]
    report = {
        "config": cfg,
        "seed": seed,
        "passed": not failures,
        "failures": failures,
        "checks": [
            {"index": r["index"], "name": r["name"], "passed": r["passed"],
             "report": r["report"].to_dict(), **({"coarse": r["coarse"]} if "coarse" in r else {})}
            for r in results
        ],
    }
    dump_json(report, out / "report.json")
    rows = [[r["index"], *row] for r in results for row in r["report"].rows()]
    write_csv(out / "cases.csv", ["check_index", "check", "N", "case", "lhs", "rhs", "ratio"], rows)
    for r in results:
        rep = r["report"]
        write_csv(
            out / "plotdata" / f"{r['index']:02d}-{r['name']}.csv",
            ["case", "ratio"],
            [[c.index, c.ratio] for c in rep.cases if c.ratio is not None],
        )


# ---------------------------------------------------------------- sweep


def _set_param(cfg: dict[str, Any], k: int, param: str, value: float) -> dict[str, Any]:
    cfg = copy.deepcopy(cfg)
    chk = cfg["checks"][k]
    params = chk.setdefault("params", {})
    name = chk["name"]
    if param == "N":
        cfg["grid"]["N"] = int(value)
    elif param == "alpha":
        if "kernel" in cfg and name in KERNEL_CHECKS:
            old = cfg["kernel"]["alpha"]
            cfg["kernel"]["alpha"] = value
            if "split" in params:
                params["split"] = [s * value / old for s in params["split"]]
        else:
            if "split" in params:
                old = params.get("alpha", sum(params["split"]))
                params["split"] = [s * value / old for s in params["split"]]
            params["alpha"] = value
    elif param == "lambda":
        params["lambdas"] = [value]
    elif param == "gamma":
        params["gammas"] = [value]
    elif param == "a":
        if name in ("tail-integral", "ap-constant"):
            params["a"] = value
        elif name == "weighted":
            params["weights"] = [{"type": "power", "a": value} for _ in params["weights"]]
        else:
            params["weight"] = {"type": "power", "a": value}
    else:
        params[param] = value
    return cfg


def _sweep_value(cfg: dict[str, Any], base: Path, seed: int, max_cells: int, k: int):
    grid, items = _prepare(cfg, base, seed, max_cells)
    _, name, handle, _ = items[k]
    try:
        res = H.refinement_stability(handle, grid)
    except ResourceCapError as e:
        raise CapExceeded(str(e)) from None
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"check {k} ({name}): {e}") from None
    return res


# ---------------------------------------------------------------- commands


def _caps(args, cfg) -> tuple[int, float | None]:
    caps = cfg.get("caps", {})
    cells = args.cap_cells if args.cap_cells is not None else caps.get("max_cells", DEFAULT_MAX_CELLS)
    secs = args.cap_seconds if args.cap_seconds is not None else caps.get("max_seconds")
    return int(cells), secs


def cmd_run(args) -> int:
    cfg, base = load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = Path(args.out or cfg.get("output", "out"))
    max_cells, max_seconds = _caps(args, cfg)
    grid, items = _prepare(cfg, base, seed, max_cells)
    results = _run_items(grid, items, max_seconds)
    _write_outputs(out, cfg, seed, results)
    failed = [r for r in results if not r["passed"]]
    for r in failed:
        notes = "; ".join(r["report"].notes)
        print(f"FAIL check {r['index']} ({r['name']}): {notes}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    cfg, base = load_config(args.config)
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; valid: {', '.join(SWEEP_PARAMS)}")
    if not 0 <= args.check < len(cfg["checks"]):
        raise ConfigError(f"--check {args.check} is out of range for {len(cfg['checks'])} checks")
    values = _parse_values(args.values)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = Path(args.out or cfg.get("output", "out"))
    max_cells, max_seconds = _caps(args, cfg)
    start = time.monotonic()
    rows, runs = [], []
    all_ok = True
    for v in values:
        if max_seconds is not None and time.monotonic() - start > max_seconds:
            raise CapExceeded(f"wall-clock budget of {max_seconds} s exhausted at {args.param} = {v}")
        res = _sweep_value(_set_param(cfg, args.check, args.param, v), base, seed, max_cells, args.check)
        row = [v, res.fine.constant, res.ratio]
        if "lambda_sweep" in res.fine.diagnostics:
            row.append(max(e["weak_at_lambda"] for e in res.fine.diagnostics["lambda_sweep"]))
        rows.append(row)
        runs.append({"value": v, "passed": res.ok, "coarse": res.coarse.to_dict(), "fine": res.fine.to_dict()})
        all_ok &= res.ok
    out.mkdir(parents=True, exist_ok=True)
    name = cfg["checks"][args.check]["name"]
    header = ["value", "constant", "refinement_ratio"]
    # lambda and gamma only move the per-height diagnostic, not the weak constant
    if rows and len(rows[0]) > 3:
        header.append("weak_at_lambda")
    write_csv(out / "sweep.csv", header, rows)
    write_csv(out / "plotdata" / f"sweep-{name}-{args.param}.csv", header, rows)
    dump_json({"config": cfg, "seed": seed, "check": name, "parameter": args.param,
               "passed": all_ok, "runs": runs}, out / "report.json")
    if not all_ok:
        bad = [r["value"] for r in runs if not r["passed"]]
        print(f"FAIL sweep {name} over {args.param}: values {bad}", file=sys.stderr)
    return EXIT_OK if all_ok else EXIT_FAIL


def describe_text(name: str) -> str:
    if name not in H.CHECK_INFO:
        raise ConfigError(f"unknown check {name!r}; valid names: {', '.join(sorted(H.CHECK_INFO))}")
    info = H.CHECK_INFO[name]
    return f"{name}\n  statement: {info['statement']}\n  parameters: {info['parameters']}\n  pass: {info['pass']}\n"


def cmd_describe(args) -> int:
    if args.all:
        names = sorted(H.CHECK_INFO)
        sys.stdout.write("\n".join(describe_text(n) for n in names))
        return EXIT_OK
    if not args.name:
        raise ConfigError(f"give a check name or --all; valid names: {', '.join(sorted(H.CHECK_INFO))}")
    sys.stdout.write(describe_text(args.name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlfczo", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config path or bundled name (smoke, fault)")
        p.add_argument("--out", help="output directory (default: config 'output' or ./out)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for per-case work")
        p.add_argument("--cap-cells", type=int, help="maximum grid cells, counting refinement runs")
        p.add_argument("--cap-seconds", type=float, help="wall-clock budget, checked between checks")

    run = sub.add_parser("run", help="run every configured check")
    common(run)
    run.set_defaults(func=cmd_run)
    sw = sub.add_parser("sweep", help="rerun one check across parameter values")
    common(sw)
    sw.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--check", type=int, default=0, help="index of the check to sweep (default 0)")
    sw.set_defaults(func=cmd_sweep)
    de = sub.add_parser("describe", help="print a check's statement, parameters and pass criteria")
    de.add_argument("name", nargs="?")
    de.add_argument("--all", action="store_true", help="list every registered check")
    de.set_defaults(func=cmd_describe)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        H.set_threads(max(1, getattr(args, "threads", 1)))
        return args.func(args)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID
    except CapExceeded as e:
        print(f"resource cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP
    finally:
        H.set_threads(1)


if __name__ == "__main__":
    sys.exit(main())
