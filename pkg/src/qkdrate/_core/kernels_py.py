"""Pure-numpy reference implementation of the hot numerical kernels.

The compiled extension in ``_kernels.pyx`` mirrors this module exactly;
either backend may be active at runtime (see ``qkdrate._core``).  Keep
the two in lockstep: the test suite asserts agreement to 1e-12.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_LN2 = float(np.log(2.0))


def eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a complex Hermitian matrix, eigenvalues ascending."""
    w, u = np.linalg.eigh(a)
    return w, u


def entropy_bits(evals: np.ndarray, floor: float = 1e-14) -> float:
    """-sum(w log2 w) over eigenvalues above ``floor``; no normalization."""
    w = np.asarray(evals, dtype=float)
    w = w[w > floor]
    if w.size == 0:
        return 0.0
    return float(-np.dot(w, np.log2(w)))


def logdet_chol(a: np.ndarray) -> tuple[bool, float]:
    """(ok, log det a) via Cholesky; ok=False when a is not positive definite."""
    try:
        ell = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False, 0.0
    return True, float(2.0 * np.sum(np.log(np.real(np.diag(ell)))))


def pinched_relative_terms(
    m: np.ndarray,
    key_sizes: tuple[int, ...],
    floor: float = 1e-14,
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Entropy split of a state against its block-diagonal pinching.

    ``m`` is Hermitian on the reduced key space; ``key_sizes`` gives the
    sizes of the consecutive diagonal blocks that the pinching keeps.
    Returns ``(f_bits, min_eig, ln_m, ln_n)`` where ``f_bits`` is
    H(pinch(m)) - H(m) in bits and ``ln_m``/``ln_n`` are matrix logarithms
    (natural base) with eigenvalues floored at ``floor``.
    """
    r = m.shape[0]
    w_m, u_m = np.linalg.eigh(m)
    min_eig = float(w_m[0])
    wf = np.maximum(w_m, floor)
    ln_m = (u_m * np.log(wf)) @ u_m.conj().T

    ln_n = np.zeros((r, r), dtype=complex)
    h_n_nats = 0.0
    start = 0
    for size in key_sizes:
        stop = start + size
        block = m[start:stop, start:stop]
        w_b, u_b = np.linalg.eigh(block)
        min_eig = min(min_eig, float(w_b[0]))
        wbf = np.maximum(w_b, floor)
        ln_n[start:stop, start:stop] = (u_b * np.log(wbf)) @ u_b.conj().T
        w_pos = w_b[w_b > floor]
        if w_pos.size:
            h_n_nats -= float(np.dot(w_pos, np.log(w_pos)))
        start = stop

    w_pos = w_m[w_m > floor]
    h_m_nats = -float(np.dot(w_pos, np.log(w_pos))) if w_pos.size else 0.0
    f_bits = (h_n_nats - h_m_nats) / _LN2
    return f_bits, min_eig, ln_m, ln_n
