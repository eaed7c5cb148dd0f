"""Epigraph cones of the conditional-entropy objective.

Each cone couples one scalar epigraph variable h with one Hermitian block
rho through  h >= H(Z(rho)) - H(G(rho))  where G filters into a reduced
space (isometry conjugation, optionally followed by a block pinching) and
Z is a finer pinching onto Alice's key blocks.  Values are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _core
from .realize import conjugation_matrix, herm_basis, smat, svec, svec_stack

_LN2 = float(np.log(2.0))


def pinch(m: np.ndarray, sizes: tuple[int, ...]) -> np.ndarray:
    """Zero out entries between different diagonal blocks."""
    out = np.zeros_like(m)
    start = 0
    for size in sizes:
        out[start:start + size, start:start + size] = \
            m[start:start + size, start:start + size]
        start += size
    return out


def _pinch_mask_svec(d: int, sizes: tuple[int, ...]) -> np.ndarray:
    """0/1 vector over svec coordinates kept by the pinching."""
    owner = np.empty(d, dtype=int)
    start = 0
    for b, size in enumerate(sizes):
        owner[start:start + size] = b
        start += size
    r, c = np.triu_indices(d, 1)
    same = (owner[r] == owner[c]).astype(float)
    return np.concatenate([np.ones(d), same, same])


@dataclass
class EntropyCone:
    """Structural data of one epigraph cone.

    ``vhat``: (d x r) isometry onto the reduced space; ``key_sizes``:
    diagonal blocks kept by the key map; ``filter_sizes``: optional coarser
    pinching applied by the filter map (None means no pinching, the plain
    isometry-conjugation filter); ``scale``: scalar multiplier of the
    filtered state.
    """

    block: int
    h_index: int
    vhat: np.ndarray
    key_sizes: tuple[int, ...]
    filter_sizes: tuple[int, ...] | None = None
    scale: float = 1.0

    def __post_init__(self):
        self.vhat = np.asarray(self.vhat, dtype=complex)
        self.r = self.vhat.shape[1]
        self.d = self.vhat.shape[0]
        if sum(self.key_sizes) != self.r:
            raise ValueError("key blocks must partition the reduced space")
        self._l_map = None
        self._masks = None

    # -- structure matrices (cached) ------------------------------------

    @property
    def l_map(self) -> np.ndarray:
        """svec_d -> svec_r matrix of E -> scale * V^dag E V."""
        if self._l_map is None:
            self._l_map = self.scale * conjugation_matrix(self.vhat, self.vhat)
        return self._l_map

    @property
    def masks(self) -> tuple[np.ndarray, np.ndarray]:
        if self._masks is None:
            key_mask = _pinch_mask_svec(self.r, self.key_sizes)
            if self.filter_sizes is None:
                filt_mask = np.ones(self.r * self.r)
            else:
                filt_mask = _pinch_mask_svec(self.r, self.filter_sizes)
            self._masks = (key_mask, filt_mask)
        return self._masks

    # -- evaluations -----------------------------------------------------

    def reduced_state(self, rho: np.ndarray) -> np.ndarray:
        m = self.scale * (self.vhat.conj().T @ rho @ self.vhat)
        if self.filter_sizes is not None:
            m = pinch(m, self.filter_sizes)
        return m

    def value(self, rho: np.ndarray, floor: float = 1e-14) -> float:
        """f(rho) = H(key-pinched filtered state) - H(filtered state), bits."""
        m = self.reduced_state(rho)
        f, _, _, _ = _core.pinched_relative_terms(m, self.key_sizes, floor)
        return f

    def value_grad(self, rho: np.ndarray, floor: float = 1e-14
                   ) -> tuple[float, float, np.ndarray]:
        """(f, min reduced eigenvalue, gradient as a d x d Hermitian)."""
        m = self.reduced_state(rho)
        f, min_eig, ln_m, ln_n = _core.pinched_relative_terms(
            m, self.key_sizes, floor)
        inner = ln_m - ln_n
        grad = (self.scale / _LN2) * (self.vhat @ inner @ self.vhat.conj().T)
        return f, min_eig, (grad + grad.conj().T) / 2

    def hessian(self, rho: np.ndarray, floor: float = 1e-14) -> np.ndarray:
        """Hessian of f in svec_d coordinates, shape (d^2, d^2)."""
        m = self.reduced_state(rho)
        key_mask, filt_mask = self.masks
        k_m = _log_superop(m, floor)
        n = pinch(m, self.key_sizes)
        k_n = _log_superop(n, floor, block_sizes=self.key_sizes)
        mid = filt_mask[:, None] * k_m * filt_mask[None, :] \
            - key_mask[:, None] * k_n * key_mask[None, :]
        l_map = self.l_map
        return (l_map.T @ mid @ l_map) / _LN2


def _loewner_log(w: np.ndarray, floor: float) -> np.ndarray:
    """First divided differences of log at (floored) eigenvalues."""
    wf = np.maximum(w, floor)
    lw = np.log(wf)
    diff = wf[:, None] - wf[None, :]
    close = np.abs(diff) < 1e-13 * np.maximum(wf[:, None], wf[None, :])
    safe = np.where(close, 1.0, diff)
    phi = np.where(close, 2.0 / (wf[:, None] + wf[None, :]),
                   (lw[:, None] - lw[None, :]) / safe)
    return phi


def _phi_to_svec_diag(phi: np.ndarray) -> np.ndarray:
    d = phi.shape[0]
    r, c = np.triu_indices(d, 1)
    off = phi[r, c]
    return np.concatenate([np.diag(phi), off, off])


def _log_superop(m: np.ndarray, floor: float,
                 block_sizes: tuple[int, ...] | None = None) -> np.ndarray:
    """svec matrix of the Frechet derivative of matrix log at m.

    When ``block_sizes`` is given, m is block diagonal and the
    eigendecomposition is done per block.
    """
    d = m.shape[0]
    if block_sizes is None:
        w, u = _core.eigh(m)
    else:
        w = np.empty(d)
        u = np.zeros((d, d), dtype=complex)
        start = 0
        for size in block_sizes:
            wb, ub = _core.eigh(m[start:start + size, start:start + size])
            w[start:start + size] = wb
            u[start:start + size, start:start + size] = ub
            start += size
    rot = conjugation_matrix(u, u)
    q = _phi_to_svec_diag(_loewner_log(w, floor))
    return rot.T @ (q[:, None] * rot)


def logdet_gradient(inv: np.ndarray) -> np.ndarray:
    """Gradient of -logdet at X, given X^{-1}, in svec coordinates."""
    return -svec(inv)


def psd_hessian_inverse_apply(x_mat: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Apply the inverse Hessian of -logdet at X to svec vector y.

    The Hessian is E -> X^{-1} E X^{-1}, so its inverse is conjugation by X.
    """
    return svec(x_mat @ smat(y, x_mat.shape[0]) @ x_mat)
