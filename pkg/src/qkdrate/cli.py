"""Command-line interface: distance sweeps to CSV.

  qkdrate --config run.json [--protocol bb84|mdi-coherent] [--out rates.csv]
          [--workers N] [--solver ipm|fw] [--audit] [--verbose]

Flags override config-file values.  The config file is a JSON object with
keys {protocol, delta, epsilon, eta_d, p_d, f, distances:{start,stop,step},
alpha:{min,max}, solver:{tol_gap,tol_feas,max_iter}}; unknown keys are
rejected.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .exceptions import QkdrateError, StructureError
from .rates import RunConfig, SolverOptions, sweep_distance, write_csv

_TOP_KEYS = {"protocol", "delta", "epsilon", "eta_d", "p_d", "f",
             "distances", "alpha", "solver"}
_DIST_KEYS = {"start", "stop", "step"}
_ALPHA_KEYS = {"min", "max"}
_SOLVER_KEYS = {"tol_gap", "tol_feas", "max_iter"}


def load_config(path: str) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise StructureError("config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise StructureError(f"unknown config keys: {sorted(unknown)}")
    for key, allowed in (("distances", _DIST_KEYS), ("alpha", _ALPHA_KEYS),
                         ("solver", _SOLVER_KEYS)):
        sub = raw.get(key)
        if sub is not None:
            bad = set(sub) - allowed
            if bad:
                raise StructureError(f"unknown keys in '{key}': {sorted(bad)}")
    return raw


def config_from_dict(raw: dict, overrides: argparse.Namespace) -> RunConfig:
    eps = raw.get("epsilon", 0.0)
    if not isinstance(eps, (list, tuple)):
        eps = [eps]
    dist = raw.get("distances", {})
    alpha = raw.get("alpha", {})
    sol = raw.get("solver", {})
    solver = SolverOptions(
        tol_gap=float(sol.get("tol_gap", 1e-6)),
        tol_feas=float(sol.get("tol_feas", 1e-8)),
        max_iter=int(sol.get("max_iter", 500)),
        strategy=overrides.solver or "ipm",
    )
    return RunConfig(
        protocol=overrides.protocol or raw.get("protocol", "bb84"),
        delta=float(raw.get("delta", 0.0)),
        epsilon=tuple(float(e) for e in eps),
        eta_d=float(raw.get("eta_d", 0.73)),
        p_d=float(raw.get("p_d", 1e-6)),
        f=float(raw.get("f", 1.16)),
        distances=(float(dist.get("start", 0.0)),
                   float(dist.get("stop", 100.0)),
                   float(dist.get("step", 5.0))),
        alpha=(float(alpha.get("min", 0.03)), float(alpha.get("max", 0.5))),
        solver=solver,
        workers=overrides.workers,
        audit=overrides.audit,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdrate",
        description="Certified key-rate distance sweeps for partially "
                    "characterized QKD sources.")
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--protocol", choices=["bb84", "mdi-coherent"],
                        default=None)
    parser.add_argument("--out", default="rates.csv", help="output CSV path")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--solver", choices=["ipm", "fw"], default=None)
    parser.add_argument("--audit", action="store_true",
                        help="reconstruct states from every solved Gram "
                             "matrix and append an audit_pass column")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr)
    try:
        config = config_from_dict(load_config(args.config), args)
        points = sweep_distance(config)
        write_csv(points, args.out, audit=config.audit)
    except (QkdrateError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(points)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
