"""Command line runner: ``lakegame {steady,solve,table1,dump-grids}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import experiments as ex

log = logging.getLogger("lakegame")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON object or 'key = value' file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--concept", choices=ex.CONCEPTS)
    common.add_argument("--dim", choices=ex.DIMS)
    common.add_argument("--n", type=int)
    common.add_argument("--M", type=float, help="constant sediment level (1d)")
    common.add_argument("--rho", type=float)
    common.add_argument("--seed-grids", dest="seed_grids", help="directory of dumped grids to warm-start from")
    common.add_argument("--parallel", type=int, nargs="?", const=0, default=None,
                        help="run independent experiments in worker processes (default: one per core)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set max_iter=200 --set lake.c=0.2")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="lakegame", description="Equilibria of the shallow-lake game.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("steady", parents=[common], help="steady-state report only")
    sub.add_parser("solve", parents=[common], help="full solve of one experiment")
    sub.add_parser("table1", parents=[common], help="all reference experiments with comparisons")
    sub.add_parser("dump-grids", parents=[common], help="value, loading and velocity grids")
    return parser


def load_config(args) -> ex.ExperimentConfig:
    data = {}
    if args.config:
        data = ex.ExperimentConfig.from_file(args.config)
        data = {k: getattr(data, k) for k in ex.ExperimentConfig.keys()}
    for key in ("concept", "dim", "n", "M", "out", "seed_grids"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.rho is not None:
        lake = dict(data.get("lake", {}))
        lake["rho"] = args.rho
        data["lake"] = lake
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        data[key] = ex.parse_value(value)
    if data.get("dim") == "2d":
        data["M"] = None
    return ex.ExperimentConfig.from_mapping(data)


def _run_all(configs, parallel):
    if parallel is None:
        return [ex.run_experiment(c) for c in configs]
    # results come back in submission order, so the report does not depend on scheduling
    with ProcessPoolExecutor(max_workers=parallel or None) as pool:
        return list(pool.map(ex.run_experiment, configs))


def cmd_steady(config, args) -> int:
    out = Path(config.out)
    if config.concept == "olne":
        rows = ex.steady_rows(config)
    else:
        row = ex.run_experiment(config)
        if row.status != "OK":
            print(f"{config.label}: {row.status}", file=sys.stderr)
        rows = row.steady
    path = out / f"{config.label}-steady.csv"
    ex.write_steady_csv(path, rows)
    for r in rows:
        print(f"P*={r['P_star']:.4f} M*={r['M_star']} L*={r['L_star']:.4f} stable={r['stable']} "
              f"V={r['welfare']:.3f}")
    print(f"wrote {path}")
    return 0


def cmd_solve(config, args) -> int:
    row = ex.run_experiment(config)
    out = Path(config.out)
    files = ex.dump_grids(row, out) if row.estimator is not None and hasattr(row.estimator, "grid_") else []
    summary = dict(label=row.label, status=row.status, runtime=row.runtime, V_range=row.V_range,
                   steady=row.steady, files=[str(f) for f in files])
    (out / f"{row.label}-summary.json").parent.mkdir(parents=True, exist_ok=True)
    (out / f"{row.label}-summary.json").write_text(json.dumps(summary, indent=2, default=float))
    print(ex.summary_text([row], ex.compare_reference(row)))
    return 0 if row.status == "OK" else 1


def cmd_dump(config, args) -> int:
    row = ex.run_experiment(config)
    if row.estimator is None:
        print(f"{row.label}: {row.status}", file=sys.stderr)
        return 1
    for f in ex.dump_grids(row, Path(config.out)):
        print(f"wrote {f}")
    return 0 if row.status == "OK" else 1


def cmd_table1(config, args) -> int:
    out = Path(config.out)
    configs = ex.table1_configs(config)
    # isolated output directories per experiment
    configs = [c.replace(out=str(out / c.label)) for c in configs]
    rows = _run_all(configs, args.parallel)
    checks = []
    for c, row in zip(configs, rows):
        checks.extend(ex.compare_reference(row))
        if row.steady:
            ex.write_steady_csv(Path(c.out) / f"{row.label}-steady.csv", row.steady)
    text = ex.summary_text(rows, checks)
    out.mkdir(parents=True, exist_ok=True)
    (out / "table1-report.txt").write_text(text)
    print(text)
    return 0 if all(c.passed for c in checks) else 1


COMMANDS = {"steady": cmd_steady, "solve": cmd_solve, "table1": cmd_table1, "dump-grids": cmd_dump}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"lakegame: configuration error: {exc}", file=sys.stderr)
        return 2
    return COMMANDS[args.command](config, args)


if __name__ == "__main__":
    sys.exit(main())
