"""Dense complex Hermitian linear algebra and entropy calculus.

All entropic quantities are in bits (base-2 logarithms) so that key rates
come out in bits per pulse.  States may be subnormalized: no operation here
renormalizes its input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _core
from .exceptions import (
    DimensionMismatchError,
    NegativityError,
    NotPSDError,
    StructureError,
    SupportError,
)

HERMITICITY_TOL = 1e-12
PSD_CLIP_TOL = 1e-9


def _as_complex(a) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(arr.view(float))):
        raise StructureError("non-finite entries in input matrix")
    return arr


@dataclass(frozen=True)
class HermitianMatrix:
    """Dense complex Hermitian matrix with optional tensor-factor metadata."""

    entries: np.ndarray
    factor_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        arr = _as_complex(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise StructureError(f"expected a square matrix, got shape {arr.shape}")
        dev = np.max(np.abs(arr - arr.conj().T)) if arr.size else 0.0
        if dev > HERMITICITY_TOL:
            raise StructureError(f"matrix is not Hermitian (deviation {dev:.3e})")
        arr = (arr + arr.conj().T) / 2
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        if self.factor_dims is not None:
            dims = tuple(int(d) for d in self.factor_dims)
            if int(np.prod(dims)) != arr.shape[0]:
                raise StructureError(
                    f"factor dims {dims} do not multiply to dimension {arr.shape[0]}"
                )
            object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def mat(self) -> np.ndarray:
        return self.entries

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))


@dataclass(frozen=True)
class Ket:
    """Complex state vector; unit norm unless flagged subnormalized."""

    amplitudes: np.ndarray
    subnormalized: bool = False

    def __post_init__(self):
        v = _as_complex(self.amplitudes).ravel()
        if not self.subnormalized and abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise StructureError(f"ket norm {np.linalg.norm(v)} is not 1")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> HermitianMatrix:
        v = self.amplitudes
        return HermitianMatrix(np.outer(v, v.conj()))


@dataclass(frozen=True)
class CPMap:
    """Completely positive map given by a list of Kraus operators."""

    kraus_ops: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        ops = tuple(np.ascontiguousarray(_as_complex(k)) for k in self.kraus_ops)
        if not ops:
            raise StructureError("CPMap needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops):
            raise StructureError("all Kraus operators must share in/out dimensions")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def in_dim(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def is_trace_nonincreasing(self, tol: float = 1e-10) -> bool:
        """Check sum_k K^dag K <= identity within tol."""
        acc = sum(k.conj().T @ k for k in self.kraus_ops)
        w = np.linalg.eigvalsh(acc - np.eye(self.in_dim))
        return bool(w[-1] <= tol)


def eig_herm(m: HermitianMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with eigenvalues sorted descending.

    Returns ``(w, u)`` with ``m = u diag(w) u^dag`` and unitary columns.
    """
    w, u = _core.eigh(m.mat)
    return w[::-1].copy(), u[:, ::-1].copy()


def von_neumann_entropy(rho: HermitianMatrix) -> float:
    """H(rho) = -sum(w log2 w) in bits; subnormalized inputs allowed.

    Eigenvalues in [-1e-9, 0) are clipped to zero; anything below that
    raises :class:`NegativityError`.
    """
    w = np.linalg.eigvalsh(rho.mat)
    if w[0] < -PSD_CLIP_TOL:
        raise NegativityError(f"eigenvalue {w[0]:.3e} below -{PSD_CLIP_TOL}")
    return _core.entropy_bits(w, floor=0.0)


def relative_entropy(rho: HermitianMatrix, sigma: HermitianMatrix,
                     support_tol: float = 1e-9) -> float:
    """Quantum relative entropy D(rho || sigma) in bits.

    Requires support(rho) within support(sigma): eigenvectors of sigma with
    eigenvalue <= ``support_tol`` must carry at most ``support_tol`` of rho's
    weight, otherwise :class:`SupportError` (infinite divergence) is raised.
    """
    if rho.dim != sigma.dim:
        raise DimensionMismatchError("states have different dimensions")
    w_r = np.linalg.eigvalsh(rho.mat)
    if w_r[0] < -PSD_CLIP_TOL:
        raise NegativityError(f"rho eigenvalue {w_r[0]:.3e} below tolerance")
    w_s, u_s = _core.eigh(sigma.mat)
    if w_s[0] < -PSD_CLIP_TOL:
        raise NegativityError(f"sigma eigenvalue {w_s[0]:.3e} below tolerance")

    # weight of rho on sigma's kernel
    diag_r = np.real(np.einsum("ij,ji->i", u_s.conj().T @ rho.mat, u_s))
    dead = w_s <= support_tol
    if np.any(dead) and float(np.sum(diag_r[dead])) > support_tol:
        raise SupportError(
            f"rho has weight {np.sum(diag_r[dead]):.3e} outside sigma's support"
        )

    tr_rho_log_rho = -_core.entropy_bits(w_r, floor=0.0)
    live = ~dead
    tr_rho_log_sigma = float(np.dot(diag_r[live], np.log2(w_s[live])))
    return tr_rho_log_rho - tr_rho_log_sigma


def partial_trace(m: HermitianMatrix, keep: set[int] | list[int] | tuple[int, ...]
                  ) -> HermitianMatrix:
    """Trace out all tensor factors not listed in ``keep``."""
    if m.factor_dims is None:
        raise StructureError("partial_trace needs factor_dims metadata")
    dims = m.factor_dims
    keep_idx = sorted(set(int(i) for i in keep))
    if not keep_idx or any(i < 0 or i >= len(dims) for i in keep_idx):
        raise StructureError(f"keep set {keep_idx} invalid for {len(dims)} factors")

    n = len(dims)
    tensor = m.mat.reshape(dims + dims)
    # contract row/column indices of every traced factor; descending order
    # keeps the remaining axis numbering stable
    rank = n
    for i in sorted((i for i in range(n) if i not in keep_idx), reverse=True):
        tensor = np.trace(tensor, axis1=i, axis2=i + rank)
        rank -= 1
    kept_dims = tuple(dims[i] for i in keep_idx)
    d = int(np.prod(kept_dims))
    return HermitianMatrix(tensor.reshape(d, d), factor_dims=kept_dims)


def apply_cp_map(cp_map: CPMap, rho: HermitianMatrix,
                 factor_dims: tuple[int, ...] | None = None) -> HermitianMatrix:
    """sum_k K rho K^dag."""
    if cp_map.in_dim != rho.dim:
        raise DimensionMismatchError(
            f"map acts on dimension {cp_map.in_dim}, state has {rho.dim}"
        )
    out = np.zeros((cp_map.out_dim, cp_map.out_dim), dtype=complex)
    for k in cp_map.kraus_ops:
        out += k @ rho.mat @ k.conj().T
    return HermitianMatrix((out + out.conj().T) / 2, factor_dims=factor_dims)


def gram_vectors(g: np.ndarray, tol: float) -> tuple[np.ndarray, int]:
    """Factorize a PSD Gram matrix into column vectors of dimension rank(g).

    Returns ``(w, rank)`` where ``w`` is rank x n with ``w^dag w = g``.
    Eigenvalues below ``tol`` are treated as zero; below ``-tol`` is an error.
    """
    g = _as_complex(g)
    w_ev, u = _core.eigh(g)
    if w_ev[0] < -tol:
        raise NotPSDError(f"Gram matrix eigenvalue {w_ev[0]:.3e} below -{tol}")
    pos = np.where(w_ev > tol)[0][::-1]  # descending order
    rank = len(pos)
    w = (np.sqrt(w_ev[pos])[:, None] * u[:, pos].conj().T)
    return np.ascontiguousarray(w), rank


def gram_factorize(g: HermitianMatrix, tol: float = 1e-10
                   ) -> tuple[list[Ket], int]:
    """Vectors reproducing the inner products of a PSD Gram matrix.

    The i-th returned ket w_i satisfies <w_i|w_j> = g_ij; all vectors live
    in dimension rank(g).
    """
    w, rank = gram_vectors(g.mat, tol)
    kets = [Ket(w[:, i], subnormalized=True) for i in range(g.dim)]
    return kets, rank


def coherent_overlap(a: complex, b: complex) -> complex:
    """Inner product <a|b> of two coherent states with amplitudes a, b."""
    a = complex(a)
    b = complex(b)
    return np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + np.conj(a) * b)
