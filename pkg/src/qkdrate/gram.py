"""Layout of the Gram optimization variable and assembly of all linear
equality constraints tying the state, the Gram matrix and the observed
statistics together.

Constraints are emitted per unordered index pair; the conjugate partner of
every complex equation is implied and realized as paired real rows at the
solver boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ObservedStats
from .exceptions import InvalidStatisticsError, StructureError
from .linalg import gram_vectors
from .protocols import ProtocolSpec

RANK_TOL = 1e-9


@dataclass(frozen=True)
class GramLayout:
    """Index bookkeeping for the Gram variable.

    mode 'full' / 'mdi-full': size 2n, reference vectors occupy rows 0..n-1
    and their orthogonal complements rows n..2n-1.  mode 'reduced': the
    reference span is replaced by an orthonormal basis of dimension
    ``n_dim`` (rows 0..n_dim-1) with expansion coefficients ``coefficients``
    (column j holds c^{(j)}), and complements occupy rows n_dim..n_dim+n-1.
    """

    mode: str
    n: int
    n_dim: int
    size: int
    coefficients: np.ndarray | None = None

    def perp_index(self, j: int) -> int:
        if self.mode == "reduced":
            return self.n_dim + j
        return self.n + j

    def ref_index(self, j: int) -> int:
        if self.mode == "reduced":
            raise StructureError("reduced layout has no reference rows")
        return j


@dataclass(frozen=True)
class LinearConstraint:
    """sum_b Tr[coeffs[b] @ X_b] = rhs over named Hermitian variable blocks."""

    coeffs: dict
    rhs: complex
    label: str = ""


def layout_gram(spec: ProtocolSpec, rank_tol: float = RANK_TOL) -> GramLayout:
    """Choose the Gram parametrization for a protocol instance.

    The reduced layout is selected exactly when the reference Gram is
    numerically rank-deficient (singular values below ``rank_tol`` times
    the largest count as zero).
    """
    g = spec.reference_inner_products
    n = spec.n_settings
    evals = np.linalg.eigvalsh(g)
    tol = rank_tol * max(float(evals[-1]), 1.0)
    rank = int(np.sum(evals > tol))
    if rank < n:
        coeffs, rank_f = gram_vectors(g, tol)
        if rank_f != rank:
            raise StructureError("rank detection disagrees with factorization")
        check = coeffs.conj().T @ coeffs
        if np.max(np.abs(check - g)) > 1e-10:
            raise StructureError("basis coefficients do not reproduce the "
                                 "reference inner products")
        return GramLayout(mode="reduced", n=n, n_dim=rank, size=rank + n,
                          coefficients=coeffs)
    mode = "mdi-full" if spec.kind == "mdi" else "full"
    return GramLayout(mode=mode, n=n, n_dim=n, size=2 * n)


def known_entry_constraints(spec: ProtocolSpec, layout: GramLayout
                            ) -> list[LinearConstraint]:
    """Equality constraints pinning the known entries of the Gram variable."""
    out = []
    n = layout.n

    def entry(row: int, col: int) -> np.ndarray:
        k = np.zeros((layout.size, layout.size), dtype=complex)
        k[col, row] = 1.0  # Tr[K G] = G[row, col]
        return k

    if layout.mode in ("full", "mdi-full"):
        g_ref = spec.reference_inner_products
        for i in range(n):
            for j in range(i + 1, n):
                out.append(LinearConstraint({"gram": entry(i, j)}, g_ref[i, j],
                                            label=f"gram_ref[{i},{j}]"))
        for m in range(layout.size):
            out.append(LinearConstraint({"gram": entry(m, m)}, 1.0,
                                        label=f"gram_diag[{m}]"))
        for j in range(n):
            out.append(LinearConstraint({"gram": entry(n + j, j)}, 0.0,
                                        label=f"gram_perp[{j}]"))
    else:
        c = layout.coefficients
        nd = layout.n_dim
        for l in range(nd):
            for lp in range(l + 1, nd):
                out.append(LinearConstraint({"gram": entry(l, lp)}, 0.0,
                                            label=f"gram_basis[{l},{lp}]"))
        for m in range(layout.size):
            out.append(LinearConstraint({"gram": entry(m, m)}, 1.0,
                                        label=f"gram_diag[{m}]"))
        for j in range(n):
            k = np.zeros((layout.size, layout.size), dtype=complex)
            for l in range(nd):
                k[l, nd + j] = c[l, j]  # sum_l c_l^(j) G[nd+j, l]
            out.append(LinearConstraint({"gram": k}, 0.0,
                                        label=f"gram_orth[{j}]"))
    return out


def _gram_side(layout: GramLayout, spec: ProtocolSpec, i: int, j: int
               ) -> tuple[np.ndarray, complex]:
    """Gram-entry coefficients and known scalar of <psi_j|psi_i>.

    Returns (K, known) such that <psi_j|psi_i> = known + Tr[K G] on the
    layout's Gram variable.
    """
    eps_i = float(spec.epsilons[i])
    eps_j = float(spec.epsilons[j])
    t00 = np.sqrt((1 - eps_i) * (1 - eps_j))
    t01 = np.sqrt((1 - eps_i) * eps_j)  # on <phi_j_perp | phi_i>
    t10 = np.sqrt(eps_i * (1 - eps_j))  # on <phi_j | phi_i_perp>
    t11 = np.sqrt(eps_i * eps_j)

    k = np.zeros((layout.size, layout.size), dtype=complex)
    pi = layout.perp_index(i)
    pj = layout.perp_index(j)
    known: complex = 0.0

    if layout.mode in ("full", "mdi-full"):
        # reference rows are part of the variable; their values are pinned
        # by the known-entry constraints
        k[i, j] += t00          # G[j, i]
        k[i, pj] += t01         # G[perp_j, i]
        k[pi, j] += t10         # G[j, perp_i]
        k[pi, pj] += t11        # G[perp_j, perp_i]
    else:
        c = layout.coefficients
        g_ref = spec.reference_inner_products
        known = t00 * g_ref[j, i]
        for l in range(layout.n_dim):
            k[l, pj] += t01 * c[l, i]            # sum_l c_l^(i) G[perp_j, l]
            k[pi, l] += t10 * np.conj(c[l, j])   # sum_l conj(c_l^(j)) G[l, perp_i]
        k[pi, pj] += t11
    return k, known


def rho_link_constraints(spec: ProtocolSpec, layout: GramLayout
                         ) -> list[LinearConstraint]:
    """Constraints linking the key-register block of rho to Gram entries.

    One constraint per unordered setting pair (i, j):
        <i|rho_A|j> = sqrt(p_i p_j) <psi_j|psi_i>
    with the right-hand side expanded over the Gram variable.  For MDI the
    left side is the sum over announcement blocks.
    """
    out = []
    n = spec.n_settings
    p = spec.probabilities

    if spec.kind == "pm":
        dim_b = spec.dim_b
        rho_blocks = ("rho",)
    else:
        rho_blocks = ("rho0", "rho1", "rho2")

    for i in range(n):
        for j in range(i, n):
            k_gram, known = _gram_side(layout, spec, i, j)
            scale = float(np.sqrt(p[i] * p[j]))
            e_ij = np.zeros((n, n), dtype=complex)
            e_ij[j, i] = 1.0  # Tr[(|j><i| (x) I) rho] = <i|rho_A|j>
            coeffs: dict = {}
            if spec.kind == "pm":
                k_rho = np.kron(e_ij, np.eye(dim_b))
                coeffs["rho"] = k_rho
            else:
                for name in rho_blocks:
                    coeffs[name] = e_ij
            coeffs["gram"] = -scale * k_gram
            out.append(LinearConstraint(coeffs, scale * known,
                                        label=f"rho_link[{i},{j}]"))
    return out


def yield_constraints(spec: ProtocolSpec, stats: ObservedStats
                      ) -> list[LinearConstraint]:
    """Equality constraints from the observed statistics, one per observable."""
    out = []
    p = spec.probabilities
    if spec.kind == "pm":
        outcomes = ("Z0", "Z1", "X0", "X1", "perp")
        for j in range(spec.n_settings):
            for k_idx, label in enumerate(outcomes):
                y = stats.yields[(j, label)]
                if y < 0:
                    raise InvalidStatisticsError(f"negative yield at ({j}, {label})")
                e_jj = np.zeros((spec.n_settings, spec.n_settings))
                e_jj[j, j] = 1.0
                k_rho = np.kron(e_jj, spec.bob_povm[k_idx])
                out.append(LinearConstraint({"rho": k_rho}, p[j] * y,
                                            label=f"yield[{j},{label}]"))
    else:
        n_a, n_b = spec.setting_shape
        for i in range(n_a):
            for j in range(n_b):
                s = i * n_b + j
                for gamma in spec.announcements:
                    y = stats.yields[((i, j), gamma)]
                    if y < 0:
                        raise InvalidStatisticsError(
                            f"negative yield at ({i},{j},{gamma})")
                    k = np.zeros((spec.n_settings, spec.n_settings))
                    k[s, s] = 1.0
                    out.append(LinearConstraint({f"rho{gamma}": k}, p[s] * y,
                                                label=f"yield[{i}{j}|{gamma}]"))
    return out
