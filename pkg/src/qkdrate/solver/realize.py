"""Real-valued realization of conic problems over complex Hermitian blocks.

Hermitian matrices are coordinatized isometrically ('svec'): diagonal
entries first, then sqrt(2) times the real and imaginary parts of the
upper triangle.  Complex equality constraints become paired real rows;
self-conjugate constraints produce a single row.  The realized system is
compressed to full row rank by SVD, which also detects inconsistent
(infeasible) statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import StructureError

_SVEC_CACHE: dict = {}


def _svec_indices(d: int):
    cached = _SVEC_CACHE.get(d)
    if cached is None:
        iu = np.triu_indices(d, 1)
        cached = (iu[0], iu[1])
        _SVEC_CACHE[d] = cached
    return cached


def svec_dim(d: int) -> int:
    return d * d


def svec(h: np.ndarray) -> np.ndarray:
    """Isometric real coordinates of a Hermitian matrix."""
    d = h.shape[0]
    r, c = _svec_indices(d)
    up = h[r, c]
    return np.concatenate([np.real(np.diag(h)),
                           np.sqrt(2.0) * np.real(up),
                           np.sqrt(2.0) * np.imag(up)])


def smat(x: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    r, c = _svec_indices(d)
    npair = r.size
    h = np.zeros((d, d), dtype=complex)
    h[np.arange(d), np.arange(d)] = x[:d]
    up = (x[d:d + npair] + 1j * x[d + npair:]) / np.sqrt(2.0)
    h[r, c] = up
    h[c, r] = np.conj(up)
    return h


def svec_stack(t: np.ndarray) -> np.ndarray:
    """Apply svec to a stack of Hermitian matrices, shape (k, d, d) -> (k, d*d)."""
    k, d, _ = t.shape
    r, c = _svec_indices(d)
    up = t[:, r, c]
    return np.concatenate([np.real(t[:, np.arange(d), np.arange(d)]),
                           np.sqrt(2.0) * np.real(up),
                           np.sqrt(2.0) * np.imag(up)], axis=1)


_BASIS_CACHE: dict = {}


def herm_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian basis as a stack (d*d, d, d), svec-ordered."""
    cached = _BASIS_CACHE.get(d)
    if cached is not None:
        return cached
    r, c = _svec_indices(d)
    n = d * d
    basis = np.zeros((n, d, d), dtype=complex)
    for i in range(d):
        basis[i, i, i] = 1.0
    s = 1.0 / np.sqrt(2.0)
    for k in range(r.size):
        basis[d + k, r[k], c[k]] = s
        basis[d + k, c[k], r[k]] = s
        basis[d + r.size + k, r[k], c[k]] = 1j * s
        basis[d + r.size + k, c[k], r[k]] = -1j * s
    basis.setflags(write=False)
    _BASIS_CACHE[d] = basis
    return basis


def conjugation_matrix(u: np.ndarray, v: np.ndarray | None = None) -> np.ndarray:
    """svec representation of E -> u^dag E v-conjugation.

    For square unitary u (v=u) this is the orthogonal change to u's frame;
    for a (d x r) isometry it maps svec_d -> svec_r coordinates of V^dag E V.
    Returned with shape (r*r, d*d); apply as ``out @ x``.
    """
    if v is None:
        v = u
    d = u.shape[0]
    basis = herm_basis(d)
    t = np.einsum("pa,kpq,qb->kab", u.conj(), basis, v, optimize=True)
    return svec_stack(t).T.copy()


@dataclass
class Block:
    name: str
    dim: int
    offset: int = 0

    @property
    def size(self) -> int:
        return self.dim * self.dim


@dataclass
class RealizedProblem:
    """Flat real variable vector plus compressed equality system.

    Layout: ``x = [h_0 .. h_{k-1}, svec(block_0), svec(block_1), ...]``.
    """

    n_h: int
    blocks: list[Block]
    a_full: np.ndarray
    b_full: np.ndarray
    labels: list[str]
    a: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)
    consistent: bool = field(init=False)
    lstsq_residual: float = field(init=False)
    x_particular: np.ndarray = field(init=False)

    def __post_init__(self):
        a, b = self.a_full, self.b_full
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0)
        tol = max(tol, 1e-12 * (s[0] if s.size else 1.0))
        r = int(np.sum(s > tol))
        self.a = np.ascontiguousarray(vt[:r])
        self.b = (u.T @ b)[:r] / s[:r]
        self.x_particular = self.a.T @ self.b
        self.lstsq_residual = float(np.max(np.abs(a @ self.x_particular - b))) \
            if a.size else 0.0
        self.consistent = self.lstsq_residual <= 1e-9

    @property
    def n_vars(self) -> int:
        return self.n_h + sum(bl.size for bl in self.blocks)

    def block_slice(self, idx: int) -> slice:
        bl = self.blocks[idx]
        return slice(bl.offset, bl.offset + bl.size)

    def get_block(self, x: np.ndarray, idx: int) -> np.ndarray:
        return smat(x[self.block_slice(idx)], self.blocks[idx].dim)

    def set_block(self, x: np.ndarray, idx: int, m: np.ndarray) -> None:
        x[self.block_slice(idx)] = svec(m)

    def project_affine(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto {x : A x = b} (compressed rows are
        orthonormal)."""
        return x + self.a.T @ (self.b - self.a @ x)

    def residuals_full(self, x: np.ndarray) -> np.ndarray:
        """Per-row violation of the original (uncompressed) constraints."""
        return np.abs(self.a_full @ x - self.b_full)

    def identity_functional(self, block_idx: int | None = None
                            ) -> tuple[np.ndarray, float, float] | None:
        """Dual vector w with A^T w = svec of (block) identity, if in range.

        Returns (w, trace_value, residual) or None when the functional is
        not representable in the row space.
        """
        cache = getattr(self, "_ident_cache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_ident_cache", cache)
        if block_idx in cache:
            return cache[block_idx]
        i_vec = np.zeros(self.n_vars)
        for k, bl in enumerate(self.blocks):
            if block_idx is None or k == block_idx:
                i_vec[bl.offset:bl.offset + bl.size] = svec(np.eye(bl.dim))
        # compressed rows are orthonormal, so the least-squares dual is A i_vec
        w = self.a @ i_vec
        resid = float(np.max(np.abs(self.a.T @ w - i_vec)))
        result = None if resid > 1e-8 else (w, float(self.b @ w), resid)
        cache[block_idx] = result
        return result


def realize(constraints, blocks: list[tuple[str, int]], n_h: int
            ) -> RealizedProblem:
    """Assemble the real equality system from complex LinearConstraints."""
    block_objs = []
    offset = n_h
    index = {}
    for name, dim in blocks:
        bl = Block(name=name, dim=dim, offset=offset)
        block_objs.append(bl)
        index[name] = bl
        offset += bl.size

    n_vars = offset
    rows, rhs, labels = [], [], []
    for con in constraints:
        row_re = np.zeros(n_vars)
        row_im = np.zeros(n_vars)
        has_im = False
        for name, k in con.coeffs.items():
            bl = index.get(name)
            if bl is None:
                raise StructureError(f"constraint references unknown block '{name}'")
            k = np.asarray(k, dtype=complex)
            if k.shape != (bl.dim, bl.dim):
                raise StructureError(
                    f"coefficient for block '{name}' has shape {k.shape}, "
                    f"expected {(bl.dim, bl.dim)}")
            k_h = (k + k.conj().T) / 2
            k_a = (k - k.conj().T) / 2j
            sl = slice(bl.offset, bl.offset + bl.size)
            row_re[sl] += svec(k_h)
            if np.max(np.abs(k_a)) > 1e-15:
                row_im[sl] += svec(k_a)
                has_im = True
        rows.append(row_re)
        rhs.append(float(np.real(con.rhs)))
        labels.append(con.label + ":re")
        if has_im or abs(np.imag(con.rhs)) > 1e-15:
            rows.append(row_im)
            rhs.append(float(np.imag(con.rhs)))
            labels.append(con.label + ":im")

    a = np.array(rows) if rows else np.zeros((0, n_vars))
    b = np.array(rhs) if rhs else np.zeros(0)
    return RealizedProblem(n_h=n_h, blocks=block_objs, a_full=a, b_full=b,
                           labels=labels)
