"""Command-line entry point: ``riskhte {simulate,aggregate,figure,apply,grid}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .external import ColumnSpec, DataFormatError, apply_external
from .models import ALL_KINDS
from .scenarios import ScenarioFormatError, default_scenarios, load_scenarios


def parse_ids(text: str) -> tuple[int, ...]:
    """``"1-36,217,400-402"`` -> sorted unique ids."""
    ids = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                a, b = int(lo), int(hi)
                if b < a:
                    raise ValueError
                ids.update(range(a, b + 1))
            else:
                ids.add(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad id range {part!r}") from None
    if not ids:
        raise argparse.ArgumentTypeError("no scenario ids given")
    return tuple(sorted(ids))


def _scenarios(path):
    if path is None:
        return default_scenarios()
    return load_scenarios(path)


def cmd_simulate(args) -> int:
    scenarios = _scenarios(args.scenarios)
    ids = args.ids if args.ids is not None else tuple(s.id for s in scenarios)
    overrides = {"master_seed": args.seed, "worker_count": args.workers, "output_dir": Path(args.out),
                 "metric_pop": args.metric_pop}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.superpop is not None:
        overrides["superpop_size"] = args.superpop
    config = harness.RunConfig.fast(ids, **overrides) if args.fast else harness.RunConfig(ids, **overrides)
    out = harness.run_to_dir(scenarios, config)
    print(f"wrote {out / 'results.csv'} ({len(ids)} scenarios x {config.replications} replications)")
    return 0


def cmd_aggregate(args) -> int:
    src = Path(args.inp)
    results_file = src / "results.csv" if src.is_dir() else src
    summary = harness.aggregate(harness.read_results(results_file))
    harness.write_summary(summary, args.out)
    print(f"wrote {args.out} and {harness.selection_path(args.out)}")
    return 0


def cmd_figure(args) -> int:
    summary = harness.read_summary(args.inp)
    scenarios = _scenarios(args.scenarios)
    harms = None
    harms_file = Path(args.harms) if args.harms else Path(args.inp).parent / "harms.csv"
    if harms_file.exists():
        harms = harness.read_harms(harms_file)
    paths = harness.emit_figure_data(summary, args.id, args.out, scenarios, harms)
    for p in paths:
        print(p)
    return 0


def cmd_apply(args) -> int:
    spec = ColumnSpec(args.outcome, args.treatment, tuple(c.strip() for c in args.covariates.split(",") if c.strip()))
    res = apply_external(args.data, spec, args.method, args.folds, args.seed, args.out)
    s = res.summary()
    print(f"method {s['method']}" + (f" (selected {s['selected_model']})" if s["selected_model"] else ""))
    for kind, aic in s["aic"].items():
        print(f"  AIC {kind:<8} {'failed' if aic is None else f'{aic:.2f}'}")
    print(f"  cross-validated c-for-benefit {s['cv_c_for_benefit']}, ICI {s['cv_ici_benefit']}")
    print(f"wrote {Path(args.out) / 'benefit.csv'}")
    return 0


def cmd_grid(args) -> int:
    from .grid import write_shipped_grids

    write_shipped_grids(args.out)
    print(f"wrote scenarios.csv and interaction_scenarios.csv to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskhte", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run replications for a set of scenarios")
    s.add_argument("--scenarios", help="scenario grid file (default: shipped grid incl. interaction scenarios)")
    s.add_argument("--ids", type=parse_ids, help="ids such as 1-36,217 (default: all)")
    s.add_argument("--replications", type=int)
    s.add_argument("--superpop", type=int)
    s.add_argument("--seed", type=int, default=harness.RunConfig.master_seed)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--fast", action="store_true", help="200 replications, super-population 100,000")
    s.add_argument("--metric-pop", choices=("superpop", "trial"), default="superpop")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("aggregate", help="summarise a results file")
    a.add_argument("--in", dest="inp", required=True, help="simulate output directory or results.csv")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_aggregate)

    f = sub.add_parser("figure", help="write plot-ready data for one figure")
    f.add_argument("--id", required=True, choices=sorted(harness.FIGURES))
    f.add_argument("--in", dest="inp", required=True, help="summary file from 'aggregate'")
    f.add_argument("--out", required=True)
    f.add_argument("--scenarios")
    f.add_argument("--harms", help="harms.csv from 'simulate' (default: next to the summary)")
    f.set_defaults(func=cmd_figure)

    x = sub.add_parser("apply", help="fit the benefit models to a trial data file")
    x.add_argument("--data", required=True)
    x.add_argument("--outcome", required=True)
    x.add_argument("--treatment", required=True)
    x.add_argument("--covariates", required=True, help="comma-separated; suffix ':cat' forces one-hot coding")
    x.add_argument("--method", choices=ALL_KINDS, default="adaptive")
    x.add_argument("--folds", type=int, default=5)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_apply)

    g = sub.add_parser("grid", help="rebuild the shipped scenario grid files")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_grid)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (DataFormatError, ScenarioFormatError, KeyError, ValueError) as exc:
        print(f"riskhte: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
