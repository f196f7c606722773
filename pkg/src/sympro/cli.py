"""Command-line front end: ``sympro run|check|list``."""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .errors import ConfigError, SymproError
from .experiments import DEFAULTS, EXPERIMENTS, RUNNERS
from .report import csv_text, json_text, sha256_file, svg_plot, write_text

CONFIG_FIELDS = ("experiment", "seed", "jobs", "out", "settings")
INTEGRATOR = "rk4 fixed step"


def default_seed() -> int:
    raw = os.environ.get("SYMPRO_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"SYMPRO_SEED must be an integer, got {raw!r}") from None


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a JSON object")
    return cfg


def resolve_settings(overrides: dict | None) -> dict:
    """Merge per-experiment overrides into the defaults, rejecting unknown names."""
    settings = copy.deepcopy(DEFAULTS)
    for exp, vals in (overrides or {}).items():
        if exp not in settings:
            raise ConfigError(f"settings.{exp}: unknown experiment")
        if not isinstance(vals, dict):
            raise ConfigError(f"settings.{exp}: must be an object")
        for k, v in vals.items():
            if k not in settings[exp]:
                raise ConfigError(f"settings.{exp}.{k}: unknown field")
            settings[exp][k] = v
    return settings


def effective_config(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    for k in cfg:
        if k not in CONFIG_FIELDS:
            raise ConfigError(f"config field {k!r}: unknown field")
    eff = {
        "experiment": cfg.get("experiment", "all"),
        "seed": cfg.get("seed", default_seed()),
        "jobs": cfg.get("jobs", os.cpu_count() or 1),
        "out": cfg.get("out", "results"),
    }
    for k in ("experiment", "seed", "jobs", "out"):
        v = getattr(args, k, None)
        if v is not None:
            eff[k] = v
    if eff["experiment"] != "all" and eff["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {eff['experiment']!r}")
    for k in ("seed", "jobs"):
        if not isinstance(eff[k], int) or isinstance(eff[k], bool):
            raise ConfigError(f"{k}: must be an integer")
    if eff["jobs"] < 1:
        raise ConfigError("jobs: must be >= 1")
    eff["settings"] = resolve_settings(cfg.get("settings"))
    return eff


@contextmanager
def make_mapper(jobs: int):
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # Executor.map preserves input order, so merged results stay deterministic
        yield lambda fn, items: pool.map(fn, list(items))


def write_experiment(out_dir: Path, result) -> list[Path]:
    d = out_dir / result.name
    paths = []
    for stem, (columns, rows) in sorted(result.tables.items()):
        paths.append(write_text(d / f"{stem}.csv", csv_text(rows, columns)))
    paths.append(write_text(d / "summary.json", json_text(result.summary)))
    for stem, svg in sorted(result.plots.items()):
        paths.append(write_text(d / f"{stem}.svg", svg))
    return paths


def run_experiments(eff: dict) -> tuple[list, dict]:
    """Run the configured experiment(s) and write tables plus the manifest."""
    out_dir = Path(eff["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    names = list(EXPERIMENTS) if eff["experiment"] == "all" else [eff["experiment"]]
    results, files, timings = [], [], {}
    with make_mapper(eff["jobs"]) as mapper:
        for name in names:
            t0 = time.perf_counter()
            res = RUNNERS[name](eff["settings"][name], eff["seed"], mapper)
            timings[name] = time.perf_counter() - t0
            files += write_experiment(out_dir, res)
            results.append(res)
    manifest = {
        "tool": "sympro",
        "version": __version__,
        "config": {k: eff[k] for k in ("experiment", "seed", "jobs", "out")},
        "settings": {n: eff["settings"][n] for n in names},
        "integrator": INTEGRATOR,
        "seeds": {"base": eff["seed"], "per_row": "sha256-derived from (base seed, row keys)"},
        "wall_clock_s": timings,
        "files": [{"path": p.relative_to(out_dir).as_posix(), "sha256": sha256_file(p)} for p in files],
    }
    write_text(out_dir / "manifest.json", json_text(manifest))
    return results, manifest


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def print_checks(results, stream=None) -> bool:
    stream = stream or sys.stdout
    ok = True
    for res in results:
        for c in res.checks:
            ok &= bool(c.passed)
            print(f"{'PASS' if c.passed else 'FAIL'}  {res.name}: {c.name}: achieved {_fmt_value(c.achieved)} "
                  f"(required {c.required})", file=stream)
    return ok


def cmd_run(args) -> int:
    eff = effective_config(args)
    results, manifest = run_experiments(eff)
    print(f"wrote {len(manifest['files'])} files and manifest.json to {eff['out']}")
    if args.check:
        return 0 if print_checks(results) else 2
    return 0


def cmd_check(args) -> int:
    from .acceptance import format_table, run_all_criteria

    eff = effective_config(args)
    crits = run_all_criteria(eff["seed"], eff["settings"], jobs=eff["jobs"])
    print(format_table(crits))
    return 0 if all(c.status == "pass" for c in crits) else 2


def cmd_list(args) -> int:
    for name in EXPERIMENTS:
        print(name)
        for k, v in DEFAULTS[name].items():
            print(f"  {k} = {json.dumps(v)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sympro", description="Symmetry-protection experiments and acceptance checks.")
    p.add_argument("--version", action="version", version=f"sympro {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "run experiment(s) and write CSV/JSON/SVG plus manifest.json"),
                      ("check", "run the acceptance criteria and print a pass/fail table"),
                      ("list", "list experiments and their default settings")):
        sp = sub.add_parser(name, help=hlp, description=hlp)
        if name == "list":
            continue
        sp.add_argument("--experiment", choices=EXPERIMENTS + ("all",), help="experiment to run (default: all)")
        sp.add_argument("--config", help="strict JSON config with experiment, seed, jobs, out, settings")
        sp.add_argument("--seed", type=int, help="base seed (default: $SYMPRO_SEED or 0)")
        sp.add_argument("--jobs", type=int, help="worker processes for independent rows (default: CPU count)")
        sp.add_argument("--out", help="output directory (default: results); created if missing")
        sp.add_argument("--check", action="store_true",
                        help="after running, evaluate the experiment's checks; exit 2 on failure")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"run": cmd_run, "check": cmd_check, "list": cmd_list}[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SymproError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
