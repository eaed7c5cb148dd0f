"""End-to-end key rates: solve one point, sweep distance, optimize alpha.

Rates follow  R = h - p_pass * lambda_EC  with h the certified optimum in
the asymptotic normalization (both BB84 basis weights at 1; MDI solved at
p_c = 2/3 and rescaled by 9/4).  Clamping at zero happens only in
reporting; h and the unclamped value are recoverable from the columns.
"""

from __future__ import annotations

import concurrent.futures
import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelParams, ObservedStats, bb84_observed_stats, mdi_observed_stats
from .exceptions import QkdrateError, StructureError
from .problems import build_problem
from .protocols import ProtocolSpec, build_bb84, build_mdi_coherent
from .solver import solve
from .verify import audit_gram

log = logging.getLogger("qkdrate.rates")

CSV_COLUMNS = ["distance_km", "alpha", "epsilon", "delta", "h_bits", "p_pass",
               "lambda_ec", "key_rate", "gap", "status"]


@dataclass(frozen=True)
class SolverOptions:
    tol_gap: float = 1e-6
    tol_feas: float = 1e-8
    max_iter: int = 500
    strategy: str = "ipm"


@dataclass(frozen=True)
class RunConfig:
    protocol: str = "bb84"
    delta: float = 0.0
    epsilon: tuple[float, ...] = (0.0,)
    eta_d: float = 0.73
    p_d: float = 1e-6
    f: float = 1.16
    distances: tuple[float, float, float] = (0.0, 100.0, 5.0)
    alpha: tuple[float, float] = (0.03, 0.5)
    solver: SolverOptions = field(default_factory=SolverOptions)
    workers: int = 1
    audit: bool = False
    alpha_coarse_points: int = 12

    def __post_init__(self):
        if self.protocol not in ("bb84", "mdi-coherent"):
            raise StructureError(f"unknown protocol '{self.protocol}'")
        start, stop, step = self.distances
        if step <= 0 or stop < start:
            raise StructureError("degenerate distance range")
        lo, hi = self.alpha
        if not (0 < lo <= hi <= 1.0):
            raise StructureError("alpha window must lie within (0, 1]")

    def distance_grid(self) -> list[float]:
        start, stop, step = self.distances
        out = []
        x = start
        while x <= stop + 1e-9:
            out.append(round(x, 9))
            x += step
        return out

    def channel(self, distance_km: float) -> ChannelParams:
        return ChannelParams(distance_km=distance_km,
                             detector_efficiency=self.eta_d,
                             dark_count=self.p_d,
                             ec_inefficiency=self.f)


@dataclass
class KeyRatePoint:
    distance_km: float
    alpha: float | None
    epsilon: float
    delta: float
    h_bits: float
    p_pass: float
    lambda_ec: float
    key_rate: float
    gap: float
    status: str
    audit_pass: bool | None = None


def _build_instance(config: RunConfig, distance_km: float, epsilon: float,
                    alpha: float | None
                    ) -> tuple[ProtocolSpec, ObservedStats, ChannelParams]:
    params = config.channel(distance_km)
    if config.protocol == "bb84":
        spec = build_bb84(config.delta, epsilon)
        stats = bb84_observed_stats(params, config.delta)
    else:
        if alpha is None:
            raise StructureError("MDI point needs an alpha value")
        spec = build_mdi_coherent(alpha, config.delta, epsilon)
        stats = mdi_observed_stats(params, alpha, config.delta)
    return spec, stats, params


def key_rate_point(spec: ProtocolSpec, stats: ObservedStats,
                   solver_opts: SolverOptions = SolverOptions(),
                   use_gram: bool = True, audit: bool = False,
                   distance_km: float = 0.0) -> KeyRatePoint:
    """Solve one instance and assemble the rate point from the certificate."""
    problem, layout = build_problem(spec, stats, use_gram=use_gram)
    t0 = time.perf_counter()
    result = solve(problem, tol_gap=solver_opts.tol_gap,
                   tol_feas=solver_opts.tol_feas,
                   max_iter=solver_opts.max_iter,
                   strategy=solver_opts.strategy)
    mult = spec.metadata.get("rate_multiplier", 1.0)
    if result.status in ("infeasible", "numerical-failure"):
        return KeyRatePoint(
            distance_km=distance_km, alpha=spec.metadata.get("alpha"),
            epsilon=float(spec.metadata.get("eps", 0.0)),
            delta=float(spec.metadata.get("delta", 0.0)),
            h_bits=float("nan"), p_pass=stats.p_pass,
            lambda_ec=stats.lambda_ec, key_rate=0.0, gap=float("nan"),
            status=result.status)

    h_cert = result.h_certified_lower * mult
    raw = h_cert - stats.p_pass * stats.lambda_ec
    audit_flag = None
    if audit and result.gram_star is not None and layout is not None:
        audit_flag = audit_gram(result.gram_star, layout, spec)
    point = KeyRatePoint(
        distance_km=distance_km,
        alpha=spec.metadata.get("alpha"),
        epsilon=float(spec.metadata.get("eps", 0.0)),
        delta=float(spec.metadata.get("delta", 0.0)),
        h_bits=h_cert,
        p_pass=stats.p_pass,
        lambda_ec=stats.lambda_ec,
        key_rate=max(0.0, raw),
        gap=result.gap * mult,
        status=result.status,
        audit_pass=audit_flag,
    )
    log.info("point d=%.1fkm eps=%.2e alpha=%s: R=%.6e h=%.6f status=%s "
             "(%.2fs)", distance_km, point.epsilon, point.alpha,
             point.key_rate, point.h_bits, point.status,
             time.perf_counter() - t0)
    return point


def _evaluate_alpha(config: RunConfig, distance_km: float, epsilon: float,
                    alpha: float, audit: bool = False) -> KeyRatePoint:
    spec, stats, _ = _build_instance(config, distance_km, epsilon, alpha)
    return key_rate_point(spec, stats, config.solver, audit=audit,
                          distance_km=distance_km)


def optimize_alpha(config: RunConfig, distance_km: float,
                   epsilon: float | None = None
                   ) -> tuple[float, KeyRatePoint]:
    """Coarse log-spaced grid plus golden-section refinement of the rate.

    Ties break toward smaller alpha.  A grid with no positive rate is
    returned flagged (status 'zero-rate', alpha at the window minimum).
    """
    if config.protocol != "mdi-coherent":
        raise StructureError("alpha optimization applies to the MDI protocol")
    eps = config.epsilon[0] if epsilon is None else epsilon
    lo, hi = config.alpha
    grid = list(np.geomspace(lo, hi, config.alpha_coarse_points))
    evals: dict[float, KeyRatePoint] = {}
    for a in grid:
        evals[a] = _evaluate_alpha(config, distance_km, eps, a)

    def rate(a: float) -> float:
        return evals[a].key_rate

    best = min(sorted(evals), key=lambda a: (-rate(a), a))
    if rate(best) <= 0.0:
        point = replace(evals[grid[0]], status="zero-rate")
        return grid[0], point

    idx = grid.index(best)
    left = grid[max(idx - 1, 0)]
    right = grid[min(idx + 1, len(grid) - 1)]
    inv_phi = (math.sqrt(5.0) - 1) / 2
    a, b = left, right
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    for _ in range(10):
        for point_alpha in (c, d):
            if point_alpha not in evals:
                evals[point_alpha] = _evaluate_alpha(config, distance_km, eps,
                                                     point_alpha)
        if rate(c) >= rate(d):
            b, d = d, c
            c = b - inv_phi * (b - a)
        else:
            a, c = c, d
            d = a + inv_phi * (b - a)
        if b - a < 1e-3 * max(best, lo):
            break

    best = min(sorted(evals), key=lambda alpha: (-rate(alpha), alpha))
    # the refinement may only improve on the coarse grid
    assert rate(best) >= max(rate(g) for g in grid) - 1e-15
    return best, evals[best]


def _sweep_one(args) -> KeyRatePoint:
    config, distance_km, epsilon = args
    try:
        if config.protocol == "bb84":
            spec, stats, _ = _build_instance(config, distance_km, epsilon, None)
            return key_rate_point(spec, stats, config.solver,
                                  audit=config.audit, distance_km=distance_km)
        _, point = optimize_alpha(config, distance_km, epsilon)
        if config.audit and point.status == "optimal":
            point = replace(point, audit_pass=_evaluate_alpha(
                config, distance_km, epsilon, point.alpha,
                audit=True).audit_pass)
        return point
    except QkdrateError as exc:
        log.warning("sweep point d=%s eps=%s failed: %s", distance_km,
                    epsilon, exc)
        return KeyRatePoint(distance_km=distance_km, alpha=None,
                            epsilon=epsilon, delta=config.delta,
                            h_bits=float("nan"), p_pass=float("nan"),
                            lambda_ec=float("nan"), key_rate=0.0,
                            gap=float("nan"), status="numerical-failure")


def sweep_distance(config: RunConfig) -> list[KeyRatePoint]:
    """One rate point per (distance, epsilon) pair, ascending distance."""
    tasks = [(config, d, e) for d in config.distance_grid()
             for e in config.epsilon]
    if config.workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            points = list(pool.map(_sweep_one, tasks))
    else:
        points = [_sweep_one(t) for t in tasks]
    points.sort(key=lambda p: (p.distance_km, p.epsilon))
    return points


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.12g}"


def write_csv(points: list[KeyRatePoint], path, audit: bool = False) -> None:
    """Write the sweep table.

    The key_rate column is recomputed from the rounded h/p_pass/lambda_ec
    columns so that re-reading the file and recomputing R reproduces the
    column exactly.
    """
    columns = CSV_COLUMNS + (["audit_pass"] if audit else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for p in points:
            h_r = float(_fmt(p.h_bits)) if p.h_bits is not None else math.nan
            pp_r = float(_fmt(p.p_pass))
            lam_r = float(_fmt(p.lambda_ec))
            rate = max(0.0, h_r - pp_r * lam_r)
            if math.isnan(h_r):
                rate = 0.0
            row = [_fmt(p.distance_km), _fmt(p.alpha), _fmt(p.epsilon),
                   _fmt(p.delta), _fmt(h_r), _fmt(pp_r), _fmt(lam_r),
                   _fmt(rate), _fmt(p.gap), p.status]
            if audit:
                row.append("" if p.audit_pass is None else str(p.audit_pass))
            writer.writerow(row)
