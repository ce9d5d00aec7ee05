"""Command-line front end: ``lowmach {run,sweep,check,infsup}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import checks
from .diagnostics import infsup_estimate
from .grid import build_grid
from .harness import RunConfig, check_records, mach_sweep, run_compressible, sweep_checks

_HELP = {
    "dims": "cells per axis, e.g. 32,32",
    "lengths": "domain lengths, e.g. 1,1",
    "machs": "decreasing Mach numbers for a sweep",
    "T": "final time (T/dt must be an integer)",
    "psi_amp": "stream-function amplitude A",
    "rho_amp": "density perturbation amplitude B",
    "w_amp": "amplitude of the Ma-scaled gradient velocity",
    "snapshot_stride": "write field snapshots every this many steps (0: initial state only)",
    "workers": "processes for a sweep",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file with [section] headers")
    for f in fields(RunConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None, help=_HELP.get(f.name))
    p.add_argument("-v", "--verbose", action="store_true")


def _config(args) -> RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
    if args.config:
        return RunConfig.from_file(args.config, **overrides)
    return RunConfig.from_strings({k: v for k, v in overrides.items() if v is not None})


def _report(results: dict[str, bool]) -> bool:
    for name, ok in results.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return all(results.values())


def cmd_run(args) -> int:
    cfg = _config(args)
    if cfg.output_dir is None:
        cfg.output_dir = "out"
    mach = float(args.mach) if args.mach is not None else cfg.machs[0]
    res = run_compressible(cfg, mach)
    last = res.records[-1] if res.records else None
    print(f"Ma={mach:g}: {len(res.records)}/{cfg.n_steps} steps, output in {cfg.output_dir}")
    if last:
        print(f"  final ||rho-1||_L2={last.rho_dev_l2:.6e}  ||dp||_L2={last.dp_l2:.6e}  "
              f"global entropy={last.global_entropy:.6e}  C0={last.C0:.6e}")
    if res.error:
        print(f"  run aborted: {res.error}")
    ok = _report(check_records(res.records, mach))
    return 0 if ok and res.ok else 1


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if cfg.output_dir is None:
        cfg.output_dir = "out"
    rep = mach_sweep(cfg)
    print(f"{'Ma':>8} {'max|rho-1|_L2':>14} {'max|dp|_L2':>12} {'|u-u_inc|_1M':>13} {'|dp-dp_inc|':>12}  status")
    for e in rep.entries:
        status = "ok" if e.ok else f"FAILED ({e.error})"
        print(f"{e.mach:8.0e} {e.max_rho_dev_l2:14.6e} {e.max_dp_l2:12.6e} {e.u_diff_h1:13.6e} "
              f"{e.dp_diff_l2:12.6e}  {status}")
    print(f"order of max ||rho-1||_L2 in Ma: {rep.order_rho_l2:.4f}  "
          f"(L^{rep.q:g}: {rep.order_rho_lq:.4f})")
    return 0 if _report(sweep_checks(rep)) else 1


def cmd_check(args) -> int:
    dims = tuple(int(x) for x in args.dims.split(","))
    results = checks.run_all(dims, seed=args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.ok for r in results) else 1


def cmd_infsup(args) -> int:
    betas = []
    for n in args.sizes:
        beta = infsup_estimate(build_grid((n, n)))
        betas.append(beta)
        print(f"beta({n}x{n}) = {beta:.6f}")
    ok = {"positive": all(b > 0 for b in betas),
          "stable_under_refinement": betas[-1] >= 0.5 * betas[0]}
    return 0 if _report(ok) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lowmach", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one compressible run at a single Mach number")
    _add_config_flags(p)
    p.add_argument("--mach", help="Mach number (default: first of --machs)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Mach sweep against the incompressible limit")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="operator identities on random fields")
    p.add_argument("--dims", default="16,16")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("infsup", help="discrete inf-sup constant on square grids")
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32])
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_infsup)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
