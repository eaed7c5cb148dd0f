"""Interior-point solver: primal path-following on the epigraph formulation.

minimize  sum_g h_g   s.t.  A x = b,  (h_g, rho_g) in the entropy cones,
all Hermitian blocks PSD.  Barrier per cone: -log(h - f(rho)); barrier per
block: -logdet(X + psd_floor I).  Newton steps solve the equality-KKT
system by block elimination.

Feasibility is handled exactly rather than asymptotically: the compressed
constraint rows are orthonormal, so each Newton step is corrected by
dx += A^T (r - A dx), which makes A(x + a dx) - b shrink by the factor
(1 - a) in exact arithmetic regardless of how ill-conditioned the Schur
system was.  Once the residual is at rounding level the iteration is a
plain feasible damped-Newton path following with an Armijo line search.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .. import _core
from .cones import EntropyCone, psd_hessian_inverse_apply
from .realize import RealizedProblem, conjugation_matrix, smat, svec, svec_stack

log = logging.getLogger("qkdrate.solver")

_FEAS_EPS = 1e-12


@dataclass
class BarrierOptions:
    tol_gap: float = 1e-6
    tol_feas: float = 1e-8
    max_iter: int = 500
    sigma: float = 20.0
    t0: float = 1.0
    psd_floor: float = 0.0
    inner_tol: float = 1e-9
    gap_margin: float = 0.2  # stop the path at nu/t <= gap_margin * tol_gap


@dataclass
class BarrierState:
    """Per-iterate evaluation cache."""

    x: np.ndarray
    ok: bool = False
    f_vals: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    grads: list = field(default_factory=list)   # cone gradients, d x d
    blocks: list = field(default_factory=list)  # block matrices (floored)
    invs: list = field(default_factory=list)
    logdets: list = field(default_factory=list)


class NumericalFailure(RuntimeError):
    """Newton iteration broke down."""


class BarrierSolver:
    def __init__(self, rp: RealizedProblem, cones: list[EntropyCone],
                 opts: BarrierOptions):
        self.rp = rp
        self.cones = cones
        self.opts = opts
        self.cone_of_block = {c.block: c for c in cones}
        if len(self.cone_of_block) != len(cones):
            raise ValueError("each block may carry at most one entropy cone")
        self.nu = len(cones) + sum(bl.dim for bl in rp.blocks)
        # per-block constraint data: variable indices, A columns, touching
        # rows, and (for pure PSD blocks) the smat stack of those rows
        self._acols = []
        for k, bl in enumerate(rp.blocks):
            sl = slice(bl.offset, bl.offset + bl.size)
            cone = self.cone_of_block.get(k)
            if cone is not None:
                idx = np.concatenate([[cone.h_index],
                                      np.arange(sl.start, sl.stop)])
            else:
                idx = np.arange(sl.start, sl.stop)
            acols = rp.a[:, idx]
            nz = np.where(np.abs(acols).max(axis=1) > 0)[0]
            mats = None
            if cone is None and nz.size:
                mats = np.stack([smat(rp.a[r, sl], bl.dim) for r in nz])
            self._acols.append((idx, acols, nz, mats))

    # -- evaluation -------------------------------------------------------

    def evaluate(self, x: np.ndarray, need_grad: bool = True) -> BarrierState:
        st = BarrierState(x=x)
        floor = self.opts.psd_floor
        for k, bl in enumerate(self.rp.blocks):
            mat = self.rp.get_block(x, k)
            if floor > 0.0:
                mat = mat + floor * np.eye(bl.dim)
            ok, ld = _core.logdet_chol(mat)
            if not ok:
                return st
            st.blocks.append(mat)
            st.logdets.append(ld)
            st.invs.append(None)
        for cone in self.cones:
            rho = st.blocks[cone.block]
            if need_grad:
                f, _, grad = cone.value_grad(rho)
                st.grads.append(grad)
            else:
                f = cone.value(rho)
                st.grads.append(None)
            gap = x[cone.h_index] - f
            if gap <= 0.0:
                return st
            st.f_vals.append(f)
            st.gaps.append(gap)
        st.ok = True
        return st

    def _inv(self, st: BarrierState, k: int) -> np.ndarray:
        if st.invs[k] is None:
            st.invs[k] = np.linalg.inv(st.blocks[k])
        return st.invs[k]

    def merit(self, st: BarrierState, t: float) -> float:
        val = t * sum(st.x[c.h_index] for c in self.cones)
        val -= sum(np.log(g) for g in st.gaps)
        val -= sum(st.logdets)
        return float(val)

    def gradient(self, st: BarrierState, t: float) -> np.ndarray:
        g = np.zeros(self.rp.n_vars)
        for i, cone in enumerate(self.cones):
            s = st.gaps[i]
            g[cone.h_index] = t - 1.0 / s
            sl = self.rp.block_slice(cone.block)
            g[sl] += svec(st.grads[i]) / s
        for k in range(len(self.rp.blocks)):
            sl = self.rp.block_slice(k)
            g[sl] -= svec(self._inv(st, k))
        return g

    # -- Newton step --------------------------------------------------------

    def _newton_direction(self, st: BarrierState, t: float, grad: np.ndarray
                          ) -> tuple[np.ndarray, np.ndarray, float]:
        rp = self.rp
        a = rp.a
        m = a.shape[0]
        r_prim = rp.b - a @ st.x

        hinv_g = np.zeros(rp.n_vars)
        hinv_at = np.zeros((rp.n_vars, m))

        for k, bl in enumerate(rp.blocks):
            idx, acols, nz, mats = self._acols[k]
            cone = self.cone_of_block.get(k)
            mat = st.blocks[k]
            sl = rp.block_slice(k)
            if cone is None:
                hinv_g[sl] = psd_hessian_inverse_apply(mat, grad[sl])
                if nz.size:
                    conj = np.einsum("ab,rbc,cd->rad", mat, mats, mat,
                                     optimize=True)
                    hinv_at[np.ix_(np.arange(sl.start, sl.stop), nz)] = \
                        svec_stack(conj).T
            else:
                i = self.cones.index(cone)
                s = st.gaps[i]
                gvec = svec(st.grads[i])
                n2 = bl.size
                h_joint = np.empty((1 + n2, 1 + n2))
                h_joint[0, 0] = 1.0 / s ** 2
                h_joint[0, 1:] = -gvec / s ** 2
                h_joint[1:, 0] = -gvec / s ** 2
                hf = cone.hessian(mat)
                h_ld = _logdet_superop(mat)
                h_joint[1:, 1:] = np.outer(gvec, gvec) / s ** 2 + hf / s + h_ld
                try:
                    cho = np.linalg.cholesky(h_joint)
                except np.linalg.LinAlgError:
                    bump = 1e-10 * max(1.0, float(np.max(np.diag(h_joint))))
                    h_joint[np.diag_indices_from(h_joint)] += bump
                    cho = np.linalg.cholesky(h_joint)
                rhs = np.concatenate([[grad[cone.h_index]], grad[sl]])
                sol = _cho_solve(cho, rhs)
                hinv_g[cone.h_index] = sol[0]
                hinv_g[sl] = sol[1:]
                if nz.size:
                    sols = _cho_solve(cho, acols[nz].T)
                    hinv_at[np.ix_(idx, nz)] = sols

        schur = a @ hinv_at
        schur = (schur + schur.T) / 2
        rhs_w = -(a @ hinv_g) - r_prim
        ridge = 1e-13 * max(1.0, float(np.trace(schur)) / max(m, 1))
        try:
            w = np.linalg.solve(schur + ridge * np.eye(m), rhs_w)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"KKT Schur solve failed: {exc}") from exc
        dx = -(hinv_g + hinv_at @ w)
        # exact affine correction: rounding in the Schur solve must not leak
        # into the equality residuals (A rows are orthonormal)
        dx += a.T @ (r_prim - a @ dx)
        lam2 = float(-dx @ grad - r_prim @ w)
        return dx, w, lam2

    # -- main loop ------------------------------------------------------------

    def _restore_feasibility(self, x: np.ndarray, t: float
                             ) -> tuple[np.ndarray, BarrierState, int]:
        """Infeasible-start Newton phase: drive ||Ax - b|| to rounding."""
        rp = self.rp
        st = self.evaluate(x)
        if not st.ok:
            raise NumericalFailure("starting point outside barrier domain")
        iters = 0
        for _ in range(200):
            r_norm = float(np.max(np.abs(rp.a @ st.x - rp.b)))
            if r_norm <= _FEAS_EPS:
                break
            iters += 1
            grad = self.gradient(st, t)
            dx, w, lam2 = self._newton_direction(st, t, grad)
            alpha = 1.0
            accepted = False
            for _ in range(60):
                st_try = self.evaluate(st.x + alpha * dx)
                if st_try.ok:
                    st = st_try
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                raise NumericalFailure("cannot restore feasibility inside "
                                       "the barrier domain")
        else:
            raise NumericalFailure("feasibility phase did not converge")
        # snap exactly onto the affine set
        x_snap = rp.project_affine(st.x)
        st_snap = self.evaluate(x_snap)
        if st_snap.ok:
            st = st_snap
        return st.x, st, iters

    def solve(self, x0: np.ndarray) -> tuple[np.ndarray, dict]:
        opts = self.opts
        rp = self.rp
        start_time = time.perf_counter()
        x, st, iters = self._restore_feasibility(x0, opts.t0)
        t = opts.t0
        target = opts.gap_margin * opts.tol_gap
        stalled = False

        while iters < opts.max_iter:
            # center at t with Armijo-backtracked feasible Newton steps
            for _ in range(100):
                if iters >= opts.max_iter:
                    break
                iters += 1
                grad = self.gradient(st, t)
                dx, w, lam2 = self._newton_direction(st, t, grad)
                if lam2 / 2 <= opts.inner_tol:
                    break
                slope = float(grad @ dx)  # = -lam2 up to rounding
                merit0 = self.merit(st, t)
                alpha = 1.0
                accepted = False
                for _ in range(60):
                    st_try = self.evaluate(st.x + alpha * dx)
                    if st_try.ok and self.merit(st_try, t) <= \
                            merit0 + 0.25 * alpha * slope:
                        st = st_try
                        x = st.x
                        accepted = True
                        break
                    alpha *= 0.5
                if not accepted:
                    stalled = True
                    log.debug("line search stalled at t=%.3e (iter %d)",
                              t, iters)
                    break
            if self.nu / t <= target or stalled:
                break
            t *= opts.sigma

        x_proj = rp.project_affine(x)
        st_proj = self.evaluate(x_proj, need_grad=False)
        if st_proj.ok:
            x = x_proj
        info = {
            "iterations": iters,
            "t_final": t,
            "wall_time": time.perf_counter() - start_time,
            "centered": self.nu / t <= target,
            "stalled": stalled,
        }
        return x, info


def _cho_solve(cho: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    y = np.linalg.solve(cho, rhs)
    return np.linalg.solve(cho.T, y)


def _logdet_superop(mat: np.ndarray) -> np.ndarray:
    """svec Hessian of -logdet at mat: E -> X^{-1} E X^{-1}."""
    w, u = _core.eigh(mat)
    rot = conjugation_matrix(u, u)
    q = 1.0 / np.maximum(w, 1e-300)
    d = mat.shape[0]
    r, c = np.triu_indices(d, 1)
    qq = np.outer(q, q)
    qvec = np.concatenate([q ** 2, qq[r, c], qq[r, c]])
    return rot.T @ (qvec[:, None] * rot)
