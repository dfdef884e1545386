"""Command-line entry point: ``thermovisco {run,sweep,renormheat,dump-basis}``.

Exit status is 0 when every enabled check passes, 1 when a check fails and
2 on configuration or numerical errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from . import runner
from . import scenario as sc
from .errors import ThermoviscoError

log = logging.getLogger("thermovisco")


def shipped_scenarios() -> dict:
    """Name -> path of the scenario files installed with the package."""
    root = resources.files("thermovisco") / "scenarios"
    return {p.name[:-4]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".cfg")}


def _resolve(config: str) -> Path:
    path = Path(config)
    if path.exists():
        return path
    shipped = shipped_scenarios()
    if config in shipped:
        return shipped[config]
    return path   # load() reports the missing file


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thermovisco",
                                 description="Galerkin thermo-visco-elasticity with Orlicz-growth flow laws.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, checks=True):
        p.add_argument("--config", required=True,
                       help="scenario file, or the name of a shipped scenario (e.g. smooth_p2)")
        p.add_argument("--out", required=True, help="output directory")
        if checks:
            p.add_argument("--checks", choices=runner.CHECK_GROUPS, default="all")
        p.add_argument("--seed", type=int, default=None, help="override [checks] seed")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="single evolution with diagnostics"))
    sw = sub.add_parser("sweep", help="sweep over (k,l), dt or K")
    common(sw)
    sw.add_argument("--sweep-axis", choices=("kl", "dt", "K"), default="kl")
    sw.add_argument("--workers", type=int, default=1)
    common(sub.add_parser("renormheat", help="L1-data heat study"))
    db = sub.add_parser("dump-basis", help="write the Galerkin bases")
    common(db, checks=False)
    db.add_argument("--modes", type=int, default=4, help="modes written as VTK")
    return ap


def _print_records(records):
    for r in records:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: value={r.value:.6g} margin={r.margin:.6g} ({r.anchor})")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scen = sc.load(_resolve(args.config))
        if args.seed is not None:
            scen = scen.with_overrides(checks__seed=args.seed)
        if args.command == "dump-basis":
            path = runner.dump_basis(scen, args.out, args.modes)
            print(f"wrote {path}")
            return 0
        if args.command == "run":
            if scen.mode != sc.EVOLUTION:
                log.warning("scenario mode is %s; running the evolution anyway", scen.mode)
            res = runner.run_evolution(scen, args.out, args.checks)
        elif args.command == "sweep":
            if args.workers < 1:
                raise SystemExit("--workers must be at least 1")
            res = runner.sweep(scen, args.sweep_axis, args.out, args.checks, workers=args.workers)
        else:
            res = runner.renormheat_study(scen, args.out, args.checks)
    except ThermoviscoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_records(res.records)
    print(f"{'all checks passed' if res.passed else 'some checks failed'}; outputs in {res.out_dir}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
