"""Independent verification constructions.

Two tools, used as oracles in the test suite and as post-solve audits:

* :func:`lemma1_embed` realizes a partially characterized mixed state as
  the reduced state of an explicit pure state of the worst-case form
  sqrt(1-eps)|phi> + sqrt(eps)|phi_perp>, via a maximal-overlap
  purification and a fictitious qubit register.

* :func:`reconstruct_from_gram` factorizes a PSD Gram matrix back into
  explicit vectors (and, given an announcement partition, measurement
  operators) that reproduce its entries, confirming that a Gram-variable
  solution corresponds to actual states.  Applying it to the deviation
  Gram of a solved instance is this package's extension of the idea and is
  labeled as such in the docs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .exceptions import NotPSDError, PreconditionError, StructureError
from .gram import GramLayout
from .linalg import HermitianMatrix, Ket, gram_vectors
from .protocols import ProtocolSpec


@dataclass(frozen=True)
class EmbeddingResult:
    psi: Ket
    eps_prime: float
    phase: float
    reduced_check: float


@dataclass(frozen=True)
class ReconstructionResult:
    vectors: list
    operators: list
    entry_residual: float
    operator_residual: float


def _householder_to_e0(y: np.ndarray) -> np.ndarray:
    """Unitary sending the unit vector y to e_0 with a real positive phase."""
    d = y.shape[0]
    theta = np.angle(y[0]) if abs(y[0]) > 0 else 0.0
    y_rot = np.exp(-1j * theta) * y
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1.0
    w = y_rot - e0
    nw2 = float(np.real(w.conj() @ w))
    if nw2 < 1e-28:
        return np.exp(-1j * theta) * np.eye(d, dtype=complex)
    house = np.eye(d, dtype=complex) - 2.0 * np.outer(w, w.conj()) / nw2
    return house * np.exp(-1j * theta)


def lemma1_embed(rho: HermitianMatrix, phi: Ket, eps: float) -> EmbeddingResult:
    """Purify rho into the worst-case pure-state form at deviation eps.

    Requires <phi|rho|phi> >= 1 - eps.  Returns the pure state psi on
    a (x) S (x) F (ancilla dimension = dim rho, fictitious qubit F) whose
    overlap with |phi>|0>_S|0>_F equals sqrt(1 - eps) and whose reduced
    state on the first factor is rho.
    """
    d = rho.dim
    if phi.dim != d:
        raise StructureError("phi and rho dimensions differ")
    fidelity = float(np.real(phi.amplitudes.conj() @ rho.mat @ phi.amplitudes))
    if fidelity < 1.0 - eps - 1e-10:
        raise PreconditionError(
            f"<phi|rho|phi> = {fidelity:.6f} below 1 - eps = {1 - eps:.6f}")

    w_ev, u = _core.eigh(rho.mat)
    w_ev = np.clip(w_ev, 0.0, None)
    # canonical purification sum_k sqrt(w_k) v_k (x) |k>_S
    x = np.sqrt(w_ev) * (phi.amplitudes.conj() @ u)  # overlap vector on S
    norm_x = float(np.linalg.norm(x))
    phase = float(np.angle(x[np.argmax(np.abs(x))])) if norm_x > 0 else 0.0
    eps_prime = min(max(1.0 - norm_x ** 2, 0.0), eps)

    if norm_x > 1e-14:
        u_s = _householder_to_e0(x / norm_x)
    else:
        u_s = np.eye(d, dtype=complex)
    # psi' = sum_k sqrt(w_k) v_k (x) U_S|k>
    psi_as = (u * np.sqrt(w_ev)) @ u_s.T  # (a, S) coefficient matrix
    # fictitious qubit restores the deviation budget from eps' to eps
    if 1.0 - eps_prime > 1e-15:
        ratio = (1.0 - eps) / (1.0 - eps_prime)
    else:
        ratio = 1.0
    ratio = min(max(ratio, 0.0), 1.0)
    f_qubit = np.array([np.sqrt(ratio), np.sqrt(1.0 - ratio)])
    psi = np.einsum("as,f->asf", psi_as, f_qubit).reshape(-1)

    rho_back = psi_as @ psi_as.conj().T
    reduced_check = float(np.max(np.abs(rho_back - rho.mat)))
    return EmbeddingResult(psi=Ket(psi, subnormalized=True),
                           eps_prime=eps_prime, phase=phase,
                           reduced_check=reduced_check)


def reconstruct_from_gram(g, layout: GramLayout | None = None,
                          announcement_blocks: list | None = None,
                          tol: float = 1e-9) -> ReconstructionResult:
    """Rebuild explicit vectors (and operators) from a PSD Gram matrix.

    Without ``announcement_blocks``: factorize g into vectors whose inner
    products reproduce its entries (the audit used on solver outputs).
    With blocks (a partition of the index set by announcement): build the
    summed Gram, its canonical factor W and right inverse, and the
    per-announcement operators M with M W matching the block columns.
    """
    g_mat = g.mat if isinstance(g, HermitianMatrix) else np.asarray(g)
    n = g_mat.shape[0]

    if announcement_blocks is None:
        w, rank = gram_vectors(g_mat, tol)
        resid = float(np.max(np.abs(w.conj().T @ w - g_mat)))
        vectors = [Ket(w[:, i], subnormalized=True) for i in range(n)]
        return ReconstructionResult(vectors=vectors, operators=[],
                                    entry_residual=resid,
                                    operator_residual=0.0)

    blocks = [np.asarray(idx, dtype=int) for idx in announcement_blocks]
    sizes = {idx.size for idx in blocks}
    if len(sizes) != 1:
        raise StructureError("announcement blocks must have equal size")
    if sorted(np.concatenate(blocks).tolist()) != list(range(n)):
        raise StructureError("announcement blocks must partition the index set")

    v_fact, _ = gram_vectors(g_mat, tol)
    g_sum = np.zeros((blocks[0].size, blocks[0].size), dtype=complex)
    for idx in blocks:
        g_sum += g_mat[np.ix_(idx, idx)]

    evals, evecs = _core.eigh(g_sum)
    if evals[0] < -tol:
        raise NotPSDError("summed announcement Gram is not PSD")
    pos = np.where(evals > tol)[0][::-1]
    w_fact = (np.sqrt(evals[pos])[:, None] * evecs[:, pos].conj().T)
    w_right = (evecs[:, pos] / np.sqrt(evals[pos]))

    operators = []
    op_resid = 0.0
    for idx in blocks:
        v_gamma = v_fact[:, idx]
        m_gamma = v_gamma @ w_right
        operators.append(m_gamma)
        op_resid = max(op_resid, float(np.max(np.abs(m_gamma @ w_fact
                                                     - v_gamma))))
    entry_resid = float(np.max(np.abs(w_fact.conj().T @ w_fact - g_sum)))
    vectors = [Ket(w_fact[:, i], subnormalized=True)
               for i in range(blocks[0].size)]
    return ReconstructionResult(vectors=vectors, operators=operators,
                                entry_residual=entry_resid,
                                operator_residual=op_resid)


def audit_gram(g_star: np.ndarray, layout: GramLayout, spec: ProtocolSpec,
               tol: float = 1e-8) -> bool:
    """Post-solve audit: the Gram solution corresponds to actual vectors.

    Checks PSD-factorizability, unit norms, the orthogonality of each
    deviation vector to its reference, and the pinned reference block.
    """
    try:
        rec = reconstruct_from_gram(g_star, layout, tol=max(tol * 0.1, 1e-10))
    except NotPSDError:
        return False
    if rec.entry_residual > tol:
        return False
    checks = [abs(float(np.real(g_star[m, m])) - 1.0) <= tol
              for m in range(layout.size)]
    n = layout.n
    if layout.mode == "reduced":
        c = layout.coefficients
        nd = layout.n_dim
        checks.append(float(np.max(np.abs(
            g_star[:nd, :nd] - np.eye(nd)))) <= tol)
        for j in range(n):
            val = sum(g_star[nd + j, l] * c[l, j] for l in range(nd))
            checks.append(abs(val) <= tol)
    else:
        checks.append(float(np.max(np.abs(
            g_star[:n, :n] - spec.reference_inner_products))) <= tol)
        for j in range(n):
            checks.append(abs(g_star[n + j, j]) <= tol)
    return all(checks)
