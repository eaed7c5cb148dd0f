"""Assembly of conic problem instances from a protocol, a Gram layout and
observed statistics; plus honest-channel witness states.

The witnesses reproduce the channel-model statistics exactly (the unknown
orthogonal complements are placed in fresh orthogonal directions), so every
assembled problem has an explicit feasible point.  They serve as test
oracles and optional warm starts.
"""

from __future__ import annotations

import math

import numpy as np

from .channel import ChannelParams, ObservedStats, bb84_theta
from .exceptions import StructureError
from .gram import (GramLayout, LinearConstraint, known_entry_constraints,
                   layout_gram, rho_link_constraints, yield_constraints)
from .linalg import coherent_overlap
from .protocols import ProtocolSpec
from .solver import ConicProblem, EntropyCone


def _marginal_constraints_direct(spec: ProtocolSpec) -> list[LinearConstraint]:
    """Full-characterization marginal constraints (no Gram variable):
    the emitted states equal the references."""
    out = []
    n = spec.n_settings
    p = spec.probabilities
    g_ref = spec.reference_inner_products
    for i in range(n):
        for j in range(i, n):
            e_ij = np.zeros((n, n), dtype=complex)
            e_ij[j, i] = 1.0
            rhs = math.sqrt(p[i] * p[j]) * g_ref[j, i]
            if spec.kind == "pm":
                coeffs = {"rho": np.kron(e_ij, np.eye(spec.dim_b))}
            else:
                coeffs = {f"rho{g}": e_ij for g in spec.announcements}
            out.append(LinearConstraint(coeffs, rhs,
                                        label=f"marginal[{i},{j}]"))
    return out


def build_problem(spec: ProtocolSpec, stats: ObservedStats,
                  use_gram: bool = True,
                  rank_tol: float = 1e-9) -> tuple[ConicProblem, GramLayout | None]:
    """Assemble the conic program for a protocol instance.

    With ``use_gram`` the partial-characterization program (Gram variable,
    deviation bounds active) is built; without it the direct
    full-characterization program, valid when all epsilons vanish.
    """
    if not use_gram and np.any(spec.epsilons > 0):
        raise StructureError("direct pipeline requires all epsilons zero")

    red = spec.reduction
    if spec.kind == "pm":
        blocks = [("rho", spec.dim_a * spec.dim_b)]
        cones = [EntropyCone(block=0, h_index=0, vhat=red.isometry,
                             key_sizes=red.pinch_sizes, scale=red.scale)]
    else:
        dim = spec.dim_a
        blocks = [(f"rho{g}", dim) for g in spec.announcements]
        cones = [EntropyCone(block=g, h_index=g, vhat=red.isometry,
                             key_sizes=red.pinch_sizes, scale=red.scale)
                 for g in spec.key_announcements]

    layout = None
    constraints = []
    if use_gram:
        layout = layout_gram(spec, rank_tol)
        blocks.append(("gram", layout.size))
        constraints += rho_link_constraints(spec, layout)
        constraints += known_entry_constraints(spec, layout)
    else:
        constraints += _marginal_constraints_direct(spec)
    constraints += yield_constraints(spec, stats)

    problem = ConicProblem(
        blocks=tuple(blocks),
        cones=tuple(cones),
        constraints=tuple(constraints),
        metadata={
            **spec.metadata,
            "label": spec.metadata.get("protocol", spec.kind),
            "layout_mode": layout.mode if layout is not None else "direct",
            "kind": spec.kind,
        },
    )
    return problem, layout


# ---------------------------------------------------------------------------
# honest-channel witnesses


def _bb84_channel_matrix(params: ChannelParams, theta: float) -> np.ndarray:
    """Embedded qubit state cos(theta), sin(theta) -- used by the witness."""
    return np.array([math.cos(theta), math.sin(theta), 0.0])


def bb84_witness(spec: ProtocolSpec, params: ChannelParams,
                 layout: GramLayout | None) -> dict:
    """Exactly feasible (rho, G) for BB84 channel-model statistics.

    The honest channel keeps the qubit with probability eta(1 - p_d),
    replaces it by dark-count noise with probability p_d(1 - eta/2) per
    basis state, and sends vacuum otherwise.  The orthogonal complements
    live in a fictitious qubit tensor factor, which makes the unknown Gram
    blocks equal to the reference block and the cross blocks vanish.
    """
    delta = spec.metadata["delta"]
    eta = params.eta
    p_d = params.dark_count
    q = 2 * (1 - eta) * p_d + eta
    eps = spec.epsilons
    p = spec.probabilities
    n = spec.n_settings

    kets = [_bb84_channel_matrix(params, bb84_theta(j, delta)) for j in range(n)]
    qubit_noise = np.diag([p_d * (1 - eta / 2), p_d * (1 - eta / 2), 0.0])
    vac = np.diag([0.0, 0.0, 1.0 - q])

    rho = np.zeros((n * 3, n * 3), dtype=complex)
    for i in range(n):
        for j in range(n):
            kappa = (math.sqrt((1 - eps[i]) * (1 - eps[j]))
                     + math.sqrt(eps[i] * eps[j]))
            overlap = float(np.dot(kets[j], kets[i]))
            cond = (eta * (1 - p_d) * np.outer(kets[i], kets[j])
                    + overlap * (qubit_noise + vac))
            rho[i * 3:(i + 1) * 3, j * 3:(j + 1) * 3] = \
                math.sqrt(p[i] * p[j]) * kappa * cond

    out = {"rho": rho}
    if layout is not None:
        g_ref = spec.reference_inner_products
        g = np.zeros((layout.size, layout.size), dtype=complex)
        if layout.mode == "reduced":
            g[:layout.n_dim, :layout.n_dim] = np.eye(layout.n_dim)
            g[layout.n_dim:, layout.n_dim:] = g_ref
        else:
            g[:n, :n] = g_ref
            g[n:, n:] = g_ref
        out["gram"] = g
    return out


def mdi_witness(spec: ProtocolSpec, params: ChannelParams,
                layout: GramLayout | None) -> dict:
    """Exactly feasible per-announcement states for the MDI channel model.

    Honest Charlie: both links lose amplitude by sqrt(eta), interfere on a
    balanced beam splitter, and threshold detectors with dark-count
    probability p_d click on the outputs.  All matrix elements are analytic
    coherent-state overlaps.
    """
    alpha = spec.metadata["alpha"]
    delta = spec.metadata["delta"]
    eta = params.eta
    p_d = params.dark_count
    eps = spec.epsilons
    p = spec.probabilities
    amps = [alpha, -alpha * np.exp(1j * delta), 0.0]
    n_a, n_b = spec.setting_shape
    n = spec.n_settings

    def loss_mult(a_ket, a_bra):
        # environment overlap picked up by a transmittance-eta loss channel
        r = 1 - eta
        return coherent_overlap(math.sqrt(r) * a_bra, math.sqrt(r) * a_ket)

    def click_factors(u_ket, u_bra):
        no_click = (1 - p_d) * np.exp(-abs(u_ket) ** 2 / 2
                                      - abs(u_bra) ** 2 / 2)
        full = coherent_overlap(u_bra, u_ket)
        return full - no_click, no_click, full

    rhos = {g: np.zeros((n, n), dtype=complex) for g in spec.announcements}
    for s in range(n):
        i, j = divmod(s, n_b)
        for sp in range(n):
            ip, jp = divmod(sp, n_b)
            m_links = loss_mult(amps[i], amps[ip]) * loss_mult(amps[j], amps[jp])
            u_ket = math.sqrt(eta / 2) * (amps[i] + amps[j])
            u_bra = math.sqrt(eta / 2) * (amps[ip] + amps[jp])
            v_ket = math.sqrt(eta / 2) * (amps[i] - amps[j])
            v_bra = math.sqrt(eta / 2) * (amps[ip] - amps[jp])
            c_click, c_none, c_full = click_factors(u_ket, u_bra)
            d_click, d_none, d_full = click_factors(v_ket, v_bra)
            f0 = c_click * d_none * m_links
            f1 = c_none * d_click * m_links
            f2 = c_full * d_full * m_links - f0 - f1
            kappa = (math.sqrt((1 - eps[s]) * (1 - eps[sp]))
                     + math.sqrt(eps[s] * eps[sp]))
            base = math.sqrt(p[s] * p[sp]) * kappa
            rhos[0][s, sp] = base * f0
            rhos[1][s, sp] = base * f1
            rhos[2][s, sp] = base * f2

    out = {f"rho{g}": rhos[g] for g in spec.announcements}
    if layout is not None:
        g_ref = spec.reference_inner_products
        g = np.zeros((layout.size, layout.size), dtype=complex)
        if layout.mode == "reduced":
            g[:layout.n_dim, :layout.n_dim] = np.eye(layout.n_dim)
            g[layout.n_dim:, layout.n_dim:] = g_ref
        else:
            g[:n, :n] = g_ref
            g[n:, n:] = g_ref
        out["gram"] = g
    return out
