"""``ppa-lab`` command line.

Exit status: 2 when any scenario file fails to parse (that file produces no
outputs), otherwise 1 when any verdict is ``fail`` or ``error``, otherwise 0.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..exceptions import ConfigError
from .runner import count_statuses, report_failed, run_scenario
from .scenario import bundled_scenarios, load_scenario

log = logging.getLogger("ppalab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PPA_LAB_SEED")
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"PPA_LAB_SEED must be an integer, got {env!r}") from None


def _load_all(paths, strict):
    """Parse every file; returns (scenarios, number of config errors)."""
    scenarios, errors, names = [], 0, set()
    for path in paths:
        try:
            scn = load_scenario(path, strict=strict)
        except (ConfigError, OSError) as exc:
            print(f"config error in {path}: {exc}", file=sys.stderr)
            errors += 1
            continue
        if scn.name in names:
            print(f"config error in {path}: name: duplicate scenario name {scn.name!r}",
                  file=sys.stderr)
            errors += 1
            continue
        names.add(scn.name)
        scenarios.append(scn)
    return scenarios, errors


def _print_table(rows, out=sys.stdout):
    width = max([len("scenario")] + [len(r[0]) for r in rows])
    print(f"{'scenario':<{width}}  pass  fail  error  skipped  result", file=out)
    for name, c, failed in rows:
        result = "FAIL" if failed else "ok"
        print(f"{name:<{width}}  {c['pass']:>4}  {c['fail']:>4}  {c['error']:>5}  "
              f"{c['skipped']:>7}  {result}", file=out)


def _batch(args, stages, filter_probes=None):
    paths = list(args.files)
    if getattr(args, "bundled", False):
        paths += [str(p) for p in bundled_scenarios()]
    if not paths:
        print("no scenario files given", file=sys.stderr)
        return EXIT_CONFIG
    try:
        seed = _seed(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    scenarios, errors = _load_all(paths, args.strict)
    if filter_probes is not None:
        scenarios = [dataclasses.replace(s, probes=tuple(p for p in s.probes if filter_probes(p)))
                     for s in scenarios]

    def one(scn):
        return run_scenario(scn, args.out, seed=seed, max_iter=getattr(args, "max_iter", None),
                            plots_on=not args.no_plots, stages=stages)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(one, scenarios))
    else:
        reports = [one(s) for s in scenarios]
    rows = [(r["scenario"], count_statuses(r), report_failed(r)) for r in reports]
    if rows:
        _print_table(rows)
    if errors:
        return EXIT_CONFIG
    return EXIT_FAIL if any(f for _, _, f in rows) else EXIT_OK


def _report(args):
    root = Path(args.dir)
    files = sorted(root.rglob("report.json"))
    if not files:
        print(f"no report.json under {root}", file=sys.stderr)
        return EXIT_CONFIG
    rows = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            rep = json.load(fh)
        rows.append((rep.get("scenario", str(f.parent)), count_statuses(rep), report_failed(rep)))
    _print_table(rows)
    return EXIT_FAIL if any(f for _, _, f in rows) else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ppa-lab",
                                description="Run proximal point scenarios and certificates.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, many=True):
        if many:
            sp.add_argument("files", nargs="*", help="scenario JSON files")
        else:
            sp.add_argument("files", nargs=1, help="scenario JSON file")
        sp.add_argument("--seed", type=int, default=None,
                        help="sampling seed (falls back to PPA_LAB_SEED, then the scenario)")
        sp.add_argument("--out", default=".", help="root directory for outputs")
        mode = sp.add_mutually_exclusive_group()
        mode.add_argument("--strict", dest="strict", action="store_true", default=True,
                          help="reject unknown keys (default)")
        mode.add_argument("--lenient", dest="strict", action="store_false",
                          help="ignore unknown keys with a warning")
        sp.add_argument("--no-plots", action="store_true", help="skip SVG output")
        sp.add_argument("--jobs", type=int, default=1, help="scenarios run concurrently")

    run = sub.add_parser("run", help="run scenarios end to end")
    common(run)
    run.add_argument("--max-iter", type=int, default=None, help="override ppaConfig.maxIterations")
    run.add_argument("--bundled", action="store_true", help="also run the bundled scenarios")
    common(sub.add_parser("modulus", help="only estimate moduli"), many=False)
    common(sub.add_parser("probe", help="only run regularity probes"), many=False)
    rep = sub.add_parser("report", help="summarise report.json files under a directory")
    rep.add_argument("dir")
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return _report(args)
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        if args.max_iter is not None and args.max_iter < 1:
            print("--max-iter must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        return _batch(args, ("modulus", "ppa", "probes", "checks"))
    if args.command == "modulus":
        return _batch(args, ("modulus", "probes"), filter_probes=lambda p: p.kind == "modulus")
    return _batch(args, ("probes",))


if __name__ == "__main__":
    sys.exit(main())
