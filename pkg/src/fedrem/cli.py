"""Command line entry point: ``fedrem <subcommand> [options]``.

Subcommands::

    simulate   capture chi samples for every (location, channel) to CSV
    baseline   build the reference REM and save it as JSON
    run        sweep SAIM / LOCAL / GLOBAL and write report JSON + CSV
    select     per-location channel choice from one or more saved REMs
    inspect    dump a saved REM to CSV

Output goes to ``--out``, else ``$FEDREM_OUTPUT_DIR``, else ``./fedrem-out``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .cqa import argmin_channel
from .experiment import (
    MODES,
    TemporalFits,
    build_baseline,
    capture_chi,
    capture_seed,
    outage_table,
    packaged_baseline,
    run_experiment,
    thresholds,
)
from .rem import RemStore
from .scenario import load_scenario
from .spectral import write_chi_csv

OUTPUT_ENV = "FEDREM_OUTPUT_DIR"
DEFAULT_OUTPUT = "fedrem-out"


def _output_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario(args):
    overrides: dict = {}
    if getattr(args, "k", None) is not None:
        overrides["learning"] = {"k": args.k}
    exp = {}
    if getattr(args, "platoons", None) is not None:
        exp["platoons_U"] = args.platoons
    if getattr(args, "laps", None) is not None:
        exp["laps_R"] = args.laps
    if getattr(args, "seeds", None) is not None:
        exp["seeds"] = args.seeds
    if exp:
        overrides["experiment"] = exp
    if getattr(args, "ns", None) is not None:
        overrides["capture"] = {"n_s": args.ns}
    return load_scenario(args.scenario, overrides)


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    out = _output_dir(args)
    n_s = scenario.capture.n_s
    paths = []
    for seed in scenario.seeds:
        # same captures as platoon 0, lap 0 of a `run` with this seed
        batches = [
            capture_chi(scenario, loc, ch, n_s, capture_seed(seed, 0, 0, loc, ch), args.method)
            for loc in range(scenario.n_locations)
            for ch in range(scenario.n_channels)
        ]
        path = out / f"chi_seed{seed}.csv"
        write_chi_csv(path, batches)
        paths.append(path)
    print("\n".join(str(p) for p in paths))
    return 0


def cmd_baseline(args) -> int:
    scenario = _scenario(args)
    out = _output_dir(args)
    n_components = args.components
    if n_components not in (None, "aic"):
        n_components = int(n_components)
    store = build_baseline(scenario, args.samples, seed=args.baseline_seed, n_components=n_components)
    path = out / "baseline_rem.json"
    store.save(path)
    print(path)
    return 0


def cmd_run(args) -> int:
    scenario = _scenario(args)
    out = _output_dir(args)
    modes = [m.upper() for m in args.mode]
    if args.baseline:
        baseline = RemStore.load(args.baseline)
    else:
        baseline = packaged_baseline(scenario) or build_baseline(scenario)
    sweep = {
        "platoons_U": [scenario.platoons_U],
        "n_s": [scenario.capture.n_s],
        "k": [scenario.k],
        "laps_R": scenario.laps_R,
        "seeds": scenario.seeds,
    }
    fits = TemporalFits(scenario, n_init=args.n_init)
    report = run_experiment(scenario, modes, sweep, baseline=baseline, fits=fits, selection=args.selection)
    for path in report.write(out, args.stem):
        print(path)
    return 0


def cmd_select(args) -> int:
    scenario = _scenario(args)
    t = thresholds(scenario)
    stores = [(Path(p).stem, RemStore.load(p)) for p in args.rem]
    columns = []
    for _, store in stores:
        table = outage_table(store, scenario, t)
        if np.isnan(table).any():
            missing = [tuple(int(v) for v in ix) for ix in np.argwhere(np.isnan(table))]
            raise KeyError(f"REM has no entry for (location, channel) {missing[0]}")
        columns.append([argmin_channel(row, scenario.outage_resolution) for row in table])
    fh = open(Path(args.out_file), "w", newline="") if args.out_file else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location"] + [name for name, _ in stores])
        for loc in range(scenario.n_locations):
            w.writerow([loc] + [col[loc] for col in columns])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_inspect(args) -> int:
    store = RemStore.load(args.rem)
    if args.out_file:
        store.to_csv(args.out_file)
    else:
        out = _output_dir(args)
        path = out / (Path(args.rem).stem + ".csv")
        store.to_csv(path)
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedrem", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p, experiment=True):
        p.add_argument("--scenario", help="scenario JSON (defaults fill missing keys)")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
        p.add_argument("--seeds", type=int, help="number of seeds, 0..n-1")
        if experiment:
            p.add_argument("--ns", type=int, help="segments per capture")

    p = sub.add_parser("simulate", help="capture chi datasets to CSV")
    common(p)
    p.add_argument("--method", choices=("spectral", "iq"), default="spectral")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseline", help="build and save the reference REM")
    common(p, experiment=False)
    p.add_argument("--samples", type=int, help="chi samples per entry")
    p.add_argument("--components", help="fixed J, or 'aic' to select per entry")
    p.add_argument("--baseline-seed", type=int, default=0)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("run", help="experiment sweep to report files")
    common(p)
    p.add_argument("--mode", nargs="+", type=str.upper, choices=MODES, default=["GLOBAL"])
    p.add_argument("--platoons", type=int, help="platoon count U")
    p.add_argument("--k", type=int, help="cap multiplier for the stored model's weight")
    p.add_argument("--laps", type=int, help="laps (update rounds)")
    p.add_argument("--baseline", help="saved baseline REM JSON (packaged or built if omitted)")
    p.add_argument("--n-init", type=int, default=None, help="EM restarts per temporal fit")
    p.add_argument("--selection", action="store_true", help="add the channel selection table")
    p.add_argument("--stem", default="report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("select", help="channel table from saved REMs")
    common(p, experiment=False)
    p.add_argument("rem", nargs="+", help="REM JSON files")
    p.add_argument("--out-file", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("inspect", help="dump a REM to CSV")
    p.add_argument("rem", help="REM JSON file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--out-file", help="CSV path")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"fedrem: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
