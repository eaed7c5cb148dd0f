"""Dense linear SDP engine: dual barrier path-following.

Solves  min sum_b <C_b, X_b>  s.t.  A x = b,  X_b >= 0  through its dual
max b^T y  s.t.  S_b(y) = C_b - mat(A^T y)_b >= 0.  Iterates stay strictly
dual feasible, so any returned y yields a rigorous lower bound on the
primal optimum after the explicit min-eigenvalue correction computed in
:func:`certified_bound`.

A uniform diagonal shift C -> C + mu I makes y = 0 strictly feasible; the
shift is exact (not a relaxation) because the total block trace is fixed
on the feasible set of the problems assembled here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _core
from ..exceptions import QkdrateError
from .realize import RealizedProblem, smat, svec, svec_stack


class LinSdpFailure(QkdrateError):
    """Dual barrier could not make progress."""


@dataclass
class LinSdpResult:
    y: np.ndarray
    dual_objective: float
    s_blocks: list[np.ndarray]
    x_blocks: list[np.ndarray]
    t_final: float
    iterations: int
    converged: bool
    mu_shift: float
    primal_residual: float


def _block_rows(rp: RealizedProblem):
    """Per-block: column slice of A, touching rows, and their smat forms."""
    out = []
    for k, bl in enumerate(rp.blocks):
        sl = slice(bl.offset, bl.offset + bl.size)
        cols = rp.a[:, sl]
        nz = np.where(np.abs(cols).max(axis=1) > 0)[0]
        mats = (np.stack([smat(cols[r], bl.dim) for r in nz])
                if nz.size else np.zeros((0, bl.dim, bl.dim), dtype=complex))
        out.append((sl, cols, nz, mats))
    return out


def solve_linear_sdp(rp: RealizedProblem, c_blocks: list[np.ndarray],
                     tol_gap: float = 1e-9, max_iter: int = 400,
                     sigma: float = 20.0, t0: float = 1.0) -> LinSdpResult:
    """Run the dual barrier method; see module docstring for the contract."""
    m = rp.a.shape[0]
    dims = [bl.dim for bl in rp.blocks]
    nu = float(sum(dims))
    binfo = _block_rows(rp)

    # shift to make y=0 strictly dual feasible
    min_eig = min(float(np.linalg.eigvalsh(c)[0]) for c in c_blocks)
    scale_c = max(float(np.max(np.abs(c))) for c in c_blocks)
    mu = max(0.0, -min_eig) + max(1.0, 0.01 * scale_c)
    c_shift = [c + mu * np.eye(d) for c, d in zip(c_blocks, dims)]

    y = np.zeros(m)
    t = t0
    total_iters = 0

    def s_of(yv):
        aty = rp.a.T @ yv
        return [c_shift[k] - smat(aty[sl], dims[k]) for k, (sl, _, _, _) in
                zip(range(len(dims)), binfo)]

    def barrier_value(s_blocks):
        val = 0.0
        for s in s_blocks:
            ok, ld = _core.logdet_chol(s)
            if not ok:
                return None
            val += ld
        return val

    s_blocks = s_of(y)
    if barrier_value(s_blocks) is None:
        raise LinSdpFailure("shifted dual start is not feasible")

    while total_iters < max_iter:
        # Newton centering at parameter t
        for _ in range(60):
            total_iters += 1
            invs = []
            for s in s_blocks:
                w, u = _core.eigh(s)
                invs.append((u / w) @ u.conj().T)
            grad = t * rp.b.copy()
            hess = np.zeros((m, m))
            for k, (sl, cols, nz, mats) in enumerate(binfo):
                inv = invs[k]
                grad[nz] -= cols[nz] @ svec(inv)
                if nz.size:
                    conj = np.einsum("ab,rbc,cd->rad", inv, mats, inv,
                                     optimize=True)
                    p = svec_stack(conj)
                    hess[np.ix_(nz, nz)] += cols[nz] @ p.T
            ridge = 1e-13 * max(1.0, float(np.trace(hess)) / m)
            dy = np.linalg.solve(hess + ridge * np.eye(m), grad)
            lam2 = float(grad @ dy)
            if lam2 < 0:  # numerical loss of positive definiteness
                dy = grad / max(1.0, np.linalg.norm(grad))
                lam2 = float(grad @ dy)
            if lam2 <= 1e-18:
                break
            base = barrier_value(s_blocks)
            merit0 = t * float(rp.b @ y) + base
            alpha = 1.0
            accepted = False
            for _ in range(50):
                y_try = y + alpha * dy
                s_try = s_of(y_try)
                val = barrier_value(s_try)
                if val is not None:
                    merit = t * float(rp.b @ y_try) + val
                    if merit >= merit0 + 0.01 * alpha * lam2:
                        y, s_blocks = y_try, s_try
                        accepted = True
                        break
                alpha *= 0.5
            if not accepted:
                break
            if lam2 * min(alpha, 1.0) <= 1e-16 * max(1.0, abs(merit0)):
                break
        if nu / t <= tol_gap:
            break
        t *= sigma

    invs = []
    for s in s_blocks:
        w, u = _core.eigh(s)
        invs.append((u / w) @ u.conj().T)
    x_blocks = [inv / t for inv in invs]
    x_vec = np.zeros(rp.n_vars)
    for k, (sl, _, _, _) in enumerate(binfo):
        x_vec[sl] = svec(x_blocks[k])
    primal_residual = float(np.max(np.abs(rp.a @ x_vec - rp.b))) if m else 0.0

    return LinSdpResult(
        y=y,
        dual_objective=float(rp.b @ y),
        s_blocks=s_blocks,
        x_blocks=x_blocks,
        t_final=t,
        iterations=total_iters,
        converged=nu / t <= tol_gap,
        mu_shift=mu,
        primal_residual=primal_residual,
    )


def certified_bound(rp: RealizedProblem, c_blocks: list[np.ndarray],
                    y: np.ndarray) -> tuple[float, dict]:
    """Rigorous lower bound on min <C, X> over the feasible set, from y.

    Uses only unshifted data:  <C, X> = b.y + sum_b <C_b - mat(A^T y)_b, X_b>
    for every feasible X, and each inner product is bounded below by the
    slack's most negative eigenvalue times the (fixed) block trace.
    """
    aty = rp.a.T @ y
    lam_neg = []
    for k, bl in enumerate(rp.blocks):
        sl = slice(bl.offset, bl.offset + bl.size)
        s_orig = c_blocks[k] - smat(aty[sl], bl.dim)
        lam_neg.append(min(0.0, float(np.linalg.eigvalsh(s_orig)[0])))

    correction = 0.0
    detail = {"lambda_min": lam_neg}
    per_block_ok = True
    for k, lam in enumerate(lam_neg):
        if lam < 0.0:
            ident = rp.identity_functional(k)
            if ident is None:
                per_block_ok = False
                break
            correction += lam * ident[1]
    if not per_block_ok:
        ident_total = rp.identity_functional(None)
        if ident_total is None:
            raise LinSdpFailure(
                "block traces are not fixed by the constraints; cannot certify")
        correction = min(lam_neg) * ident_total[1]
    detail["correction"] = correction
    bound = float(rp.b @ y) + correction
    return bound, detail


def analytic_center(rp: RealizedProblem, tol: float = 1e-6,
                    max_iter: int = 200) -> list[np.ndarray] | None:
    """Interior blocks close to the affine set, or None if none was found.

    At a converged centering step the primal recovery X = S^{-1}/t satisfies
    A x = b up to the Newton tolerance; the barrier solver's own
    feasibility-restoration phase removes the remainder.
    """
    zeros = [np.zeros((bl.dim, bl.dim)) for bl in rp.blocks]
    try:
        res = solve_linear_sdp(rp, zeros, tol_gap=1e9, max_iter=max_iter,
                               t0=1.0)
    except LinSdpFailure:
        return None
    if res.primal_residual > tol:
        return None
    min_eig = min(float(np.linalg.eigvalsh(x)[0]) for x in res.x_blocks)
    scale = max(float(np.max(np.abs(x))) for x in res.x_blocks)
    if min_eig <= 1e-10 * max(scale, 1.0):
        return None
    return res.x_blocks
