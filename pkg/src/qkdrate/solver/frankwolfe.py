"""Conditional-gradient (Frank-Wolfe) fallback strategy.

First-order minimization of the entropy objective over the feasible set.
Each iteration solves a linear SDP for the descent vertex; the same SDP's
dual point yields the rigorous tangent-plane lower bound, so the method is
self-certifying.  Convergence is slow compared to the interior-point path
(O(1/k) in the objective) but every ingredient is simple to audit.
"""

from __future__ import annotations

import logging
import time

import numpy as np

from .barrier import BarrierOptions, NumericalFailure
from .cones import EntropyCone
from .linsdp import analytic_center, certified_bound, solve_linear_sdp
from .realize import RealizedProblem, svec

log = logging.getLogger("qkdrate.solver")


def _value(cones, blocks) -> float:
    return sum(c.value(blocks[c.block]) for c in cones)


def solve_frank_wolfe(rp: RealizedProblem, cones: list[EntropyCone],
                      opts: BarrierOptions) -> tuple[np.ndarray, dict]:
    start = time.perf_counter()
    blocks = analytic_center(rp)
    if blocks is None:
        raise NumericalFailure("no strictly feasible interior point found "
                               "for the conditional-gradient start")
    best_lb = -np.inf
    iters = 0
    f_cur = _value(cones, blocks)

    for iters in range(1, opts.max_iter + 1):
        grads = [np.zeros((bl.dim, bl.dim), dtype=complex) for bl in rp.blocks]
        lin = 0.0
        for cone in cones:
            _, _, g = cone.value_grad(blocks[cone.block])
            grads[cone.block] = grads[cone.block] + g
            lin += float(np.real(np.trace(g @ blocks[cone.block])))

        sdp = solve_linear_sdp(rp, grads, tol_gap=1e-8)
        bound, _ = certified_bound(rp, grads, sdp.y)
        best_lb = max(best_lb, f_cur - lin + bound)
        if f_cur - best_lb <= opts.tol_gap:
            break

        target = sdp.x_blocks

        # exact line search on the segment by golden section
        def seg_value(gamma: float) -> float:
            mix = [(1 - gamma) * blocks[k] + gamma * target[k]
                   for k in range(len(rp.blocks))]
            return _value(cones, mix)

        lo, hi = 0.0, 1.0
        phi = (np.sqrt(5.0) - 1) / 2
        a, b = hi - phi * (hi - lo), lo + phi * (hi - lo)
        fa, fb = seg_value(a), seg_value(b)
        for _ in range(40):
            if fa <= fb:
                hi, b, fb = b, a, fa
                a = hi - phi * (hi - lo)
                fa = seg_value(a)
            else:
                lo, a, fa = a, b, fb
                b = lo + phi * (hi - lo)
                fb = seg_value(b)
        gamma = (lo + hi) / 2
        new_blocks = [(1 - gamma) * blocks[k] + gamma * target[k]
                      for k in range(len(rp.blocks))]
        new_f = _value(cones, new_blocks)
        if new_f >= f_cur - 1e-15:
            break
        blocks, f_cur = new_blocks, new_f

    x = np.zeros(rp.n_vars)
    for k in range(len(rp.blocks)):
        rp.set_block(x, k, blocks[k])
    x = rp.project_affine(x)
    for g_idx, cone in enumerate(cones):
        x[g_idx] = cone.value(rp.get_block(x, cone.block))
    info = {
        "iterations": iters,
        "fw_best_lower": best_lb,
        "wall_time": time.perf_counter() - start,
        "centered": True,
    }
    return x, info
