"""Protocol instances: settings, reference-state inner products, deviation
bounds, measurements and key maps for the built-in BB84 and coherent-light
MDI protocols.

Reference states are never materialized as amplitude vectors; only their
mutual inner products are stored.  Coherent states therefore cause no
truncation anywhere in the production path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import mdi_amplitudes
from .exceptions import InvalidIsometryError, StructureError
from .linalg import CPMap, coherent_overlap
from .channel import bb84_theta

_CHECK_SEED = 7041


def _proj(dim: int, idx: int) -> np.ndarray:
    p = np.zeros((dim, dim))
    p[idx, idx] = 1.0
    return p


def _random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def _apply(kraus: tuple[np.ndarray, ...], rho: np.ndarray) -> np.ndarray:
    out = np.zeros((kraus[0].shape[0], kraus[0].shape[0]), dtype=complex)
    for k in kraus:
        out += k @ rho @ k.conj().T
    return out


@dataclass(frozen=True)
class FacialReduction:
    """Reduced key maps plus the isometry embedding them in the full space.

    ``ghat``/``zhat`` act on the reduced space of dimension r; ``isometry``
    is the (full_dim x r) embedding V with V^dag V = I.  For the built-in
    protocols the reduced filter is `scale * V^dag rho V` and the key map is
    the pinching onto consecutive diagonal blocks of sizes ``pinch_sizes``.
    """

    isometry: np.ndarray
    ghat: CPMap
    zhat: CPMap
    pinch_sizes: tuple[int, ...] | None = None
    scale: float = 1.0

    @property
    def reduced_dim(self) -> int:
        return self.isometry.shape[1]

    @property
    def full_dim(self) -> int:
        return self.isometry.shape[0]


@dataclass(frozen=True)
class ProtocolSpec:
    """Complete description of one protocol instance.

    For prepare-and-measure: ``n_settings`` Alice settings, Bob's POVM on
    the squashed receiver space, per-setting deviation bounds ``epsilons``.
    For MDI: settings are joint pairs flattened row-major, announcements
    index Eve's public outcome, and ``key_announcements`` lists the ones
    kept for key generation.
    """

    kind: str  # "pm" | "mdi"
    n_settings: int
    probabilities: np.ndarray
    reference_inner_products: np.ndarray
    epsilons: np.ndarray
    key_maps: tuple[CPMap, CPMap]
    reduction: FacialReduction
    bob_povm: tuple[np.ndarray, ...] | None = None
    povm_completeness: np.ndarray | None = None
    setting_shape: tuple[int, int] | None = None  # (n_A, n_B) for MDI
    announcements: tuple[int, ...] | None = None
    key_announcements: tuple[int, ...] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_settings
        g = np.asarray(self.reference_inner_products, dtype=complex)
        if g.shape != (n, n):
            raise StructureError("reference inner-product matrix has wrong shape")
        if np.max(np.abs(g - g.conj().T)) > 1e-12:
            raise StructureError("reference Gram is not Hermitian")
        if np.max(np.abs(np.diag(g) - 1.0)) > 1e-10:
            raise StructureError("reference states must be normalized")
        if np.linalg.eigvalsh(g)[0] < -1e-10:
            raise StructureError("reference Gram is not PSD")
        eps = np.asarray(self.epsilons, dtype=float)
        if eps.shape != (n,) or np.any(eps < 0) or np.any(eps > 1):
            raise StructureError("epsilons must lie in [0, 1], one per setting")
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (n,) or np.any(p <= 0):
            raise StructureError("selection probabilities must be positive")
        if self.bob_povm is not None:
            target = self.povm_completeness
            if target is None:
                target = np.eye(self.bob_povm[0].shape[0])
            acc = sum(self.bob_povm) - target
            if np.max(np.abs(acc)) > 1e-10:
                raise StructureError("POVM does not sum to its completeness target")
            for gamma in self.bob_povm:
                if np.linalg.eigvalsh(gamma)[0] < -1e-10:
                    raise StructureError("POVM element is not PSD")

    @property
    def dim_a(self) -> int:
        return self.n_settings if self.kind == "pm" else int(np.prod(self.setting_shape))

    @property
    def dim_b(self) -> int:
        if self.kind != "pm":
            raise StructureError("dim_b is a prepare-and-measure notion")
        return self.bob_povm[0].shape[0]


def facial_reduce(gmap: CPMap, zmap: CPMap, v: np.ndarray,
                  pinch_sizes: tuple[int, ...] | None = None,
                  scale: float | None = None) -> FacialReduction:
    """Restrict the key maps to the support captured by the isometry ``v``.

    Builds ghat(rho) = V^dag G(rho) V and zhat(rho) = V^dag (Z o G)(rho) V
    and verifies the reconstruction identities G(rho) = V ghat(rho) V^dag
    and (Z o G)(rho) = V zhat(rho) V^dag on random inputs.  A residual above
    1e-8 means ``v`` does not capture the support and raises
    :class:`InvalidIsometryError`.
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim != 2:
        raise InvalidIsometryError("isometry must be a rectangular matrix")
    r = v.shape[1]
    if np.max(np.abs(v.conj().T @ v - np.eye(r))) > 1e-12:
        raise InvalidIsometryError("V^dag V != identity")

    ghat_kraus = tuple(v.conj().T @ k for k in gmap.kraus_ops)
    zhat_kraus = tuple(v.conj().T @ z @ k
                       for z in zmap.kraus_ops for k in gmap.kraus_ops)
    ghat = CPMap(ghat_kraus, label=f"{gmap.label}^")
    zhat = CPMap(zhat_kraus, label=f"{zmap.label}^")

    rng = np.random.default_rng(_CHECK_SEED)
    d = gmap.in_dim
    worst = 0.0
    for _ in range(3):
        rho = _random_hermitian(rng, d)
        g_full = _apply(gmap.kraus_ops, rho)
        zg_full = _apply(tuple(z @ k for z in zmap.kraus_ops
                               for k in gmap.kraus_ops), rho)
        g_rec = v @ _apply(ghat_kraus, rho) @ v.conj().T
        z_rec = v @ _apply(zhat_kraus, rho) @ v.conj().T
        worst = max(worst,
                    float(np.max(np.abs(g_full - g_rec))),
                    float(np.max(np.abs(zg_full - z_rec))))
    if worst > 1e-8:
        raise InvalidIsometryError(
            f"isometry does not capture the map support (residual {worst:.3e})"
        )

    min_out = np.linalg.eigvalsh(_apply(ghat_kraus, np.eye(d)))[0]
    if min_out <= 0:
        raise InvalidIsometryError("reduced filter map is not strictly positive")

    if scale is None:
        g_id = _apply(ghat_kraus, np.eye(d))
        scale = float(np.real(np.trace(g_id))) / r
    if pinch_sizes is not None:
        if sum(pinch_sizes) != r:
            raise InvalidIsometryError("pinch sizes do not partition the reduced space")
        # zhat must equal the declared pinching of ghat
        rho = _random_hermitian(rng, d)
        m = _apply(ghat_kraus, rho)
        pinched = np.zeros_like(m)
        start = 0
        for size in pinch_sizes:
            pinched[start:start + size, start:start + size] = \
                m[start:start + size, start:start + size]
            start += size
        if np.max(np.abs(_apply(zhat_kraus, rho) - pinched)) > 1e-10:
            raise InvalidIsometryError("zhat is not the declared block pinching of ghat")

    return FacialReduction(isometry=v, ghat=ghat, zhat=zhat,
                           pinch_sizes=pinch_sizes, scale=scale)


def _bb84_povm(p_zb: float, p_xb: float) -> tuple[np.ndarray, ...]:
    """Five-outcome POVM on the squashed 3-dim receiver space."""
    ket_p = np.array([1, 1, 0]) / math.sqrt(2)
    ket_m = np.array([1, -1, 0]) / math.sqrt(2)
    return (
        p_zb * _proj(3, 0),
        p_zb * _proj(3, 1),
        p_xb * np.outer(ket_p, ket_p),
        p_xb * np.outer(ket_m, ket_m),
        _proj(3, 2),
    )


def build_bb84(delta: float, eps: float,
               p_za: float = 1.0, p_zb: float = 1.0) -> ProtocolSpec:
    """BB84 with characterized encoding flaw ``delta`` and deviation ``eps``.

    With the default ``p_za = p_zb = 1`` both basis weights are set to one
    (the asymptotic-limit convention: Tr rho_AB = 2, flagged 'trace2' in the
    metadata).  Physical basis probabilities in (0, 1) give the finite-bias
    protocol with X weights 1 - p.
    """
    if not 0 <= delta < math.pi:
        raise StructureError(f"delta {delta} outside [0, pi)")
    if not 0 <= eps <= 1:
        raise StructureError("eps must lie in [0, 1]")
    if not (0 < p_za <= 1 and 0 < p_zb <= 1):
        raise StructureError("basis probabilities must lie in (0, 1]")

    trick = (p_za == 1.0 and p_zb == 1.0)
    p_xa = 1.0 if trick else 1.0 - p_za
    p_xb = 1.0 if trick else 1.0 - p_zb
    if p_xa <= 0 or p_xb <= 0:
        raise StructureError("basis probability 1 requires the joint limit "
                             "p_za = p_zb = 1")

    thetas = [bb84_theta(j, delta) for j in range(4)]
    gram = np.array([[math.cos(ti - tj) for tj in thetas] for ti in thetas],
                    dtype=complex)
    probs = np.array([p_za / 2, p_za / 2, p_xa / 2, p_xa / 2])
    povm = _bb84_povm(p_zb, p_xb)
    qubit = _proj(3, 0) + _proj(3, 1)
    completeness = (p_zb + p_xb) * qubit + _proj(3, 2)

    # key maps on the 4 (x) 3 joint space
    p_a01 = _proj(4, 0) + _proj(4, 1)
    g_op = math.sqrt(p_zb) * np.kron(p_a01, qubit)
    z_ops = tuple(np.kron(_proj(4, j), qubit) for j in (0, 1))
    gmap = CPMap((g_op,), label="key-filter")
    zmap = CPMap(z_ops, label="key-pinch")

    embed_a = np.zeros((4, 2))
    embed_a[0, 0] = embed_a[1, 1] = 1.0
    embed_b = np.zeros((3, 2))
    embed_b[0, 0] = embed_b[1, 1] = 1.0
    v = np.kron(embed_a, embed_b)
    reduction = facial_reduce(gmap, zmap, v, pinch_sizes=(2, 2), scale=p_zb)

    return ProtocolSpec(
        kind="pm",
        n_settings=4,
        probabilities=probs,
        reference_inner_products=gram,
        epsilons=np.full(4, eps),
        key_maps=(gmap, zmap),
        reduction=reduction,
        bob_povm=povm,
        povm_completeness=completeness,
        metadata={
            "protocol": "bb84",
            "delta": delta,
            "eps": eps,
            "p_za": p_za,
            "p_zb": p_zb,
            "normalization": "trace2" if trick else "physical",
            "rate_multiplier": 1.0,
        },
    )


def build_mdi_coherent(alpha: float, delta: float, eps: float,
                       p_c: float = 2.0 / 3.0) -> ProtocolSpec:
    """Coherent-light MDI protocol: amplitudes (alpha, -alpha e^{i delta}, vac).

    Joint deviation bounds follow 1 - eps_ij = (1 - eps)^2.  The default
    emission probability p_c = 2/3 makes all nine joint settings uniform;
    the asymptotic rate is recovered downstream by the 9/4 multiplier.
    """
    if alpha <= 0:
        raise StructureError("coherent amplitude alpha must be positive")
    if not 0 <= delta < math.pi:
        raise StructureError(f"delta {delta} outside [0, pi)")
    if not 0 <= eps <= 1:
        raise StructureError("eps must lie in [0, 1]")
    if not 0 < p_c < 1:
        raise StructureError("p_c must lie in (0, 1)")

    amps = mdi_amplitudes(alpha, delta)
    g_user = np.array([[coherent_overlap(amps[i], amps[j]) for j in range(3)]
                       for i in range(3)])
    gram = np.kron(g_user, g_user)
    p_user = np.array([p_c / 2, p_c / 2, 1.0 - p_c])
    probs = np.kron(p_user, p_user)
    eps_joint = np.full(9, 1.0 - (1.0 - eps) ** 2)

    # key maps on the 3 (x) 3 (x) 3 joint space A, B, announcement register
    p01_3 = _proj(3, 0) + _proj(3, 1)
    g_op = np.kron(np.kron(p01_3, p01_3), p01_3)
    z_ops = tuple(np.kron(np.kron(_proj(3, j), p01_3), p01_3) for j in (0, 1))
    gmap = CPMap((g_op,), label="key-filter")
    zmap = CPMap(z_ops, label="key-pinch")

    # per-announcement reduced maps on the 3 (x) 3 setting space
    g_op_blk = np.kron(p01_3, p01_3)
    z_ops_blk = tuple(np.kron(_proj(3, j), p01_3) for j in (0, 1))
    gmap_blk = CPMap((g_op_blk,), label="key-filter-block")
    zmap_blk = CPMap(z_ops_blk, label="key-pinch-block")
    embed = np.zeros((3, 2))
    embed[0, 0] = embed[1, 1] = 1.0
    v = np.kron(embed, embed)
    reduction = facial_reduce(gmap_blk, zmap_blk, v, pinch_sizes=(2, 2), scale=1.0)

    return ProtocolSpec(
        kind="mdi",
        n_settings=9,
        probabilities=probs,
        reference_inner_products=gram,
        epsilons=eps_joint,
        key_maps=(gmap, zmap),
        reduction=reduction,
        setting_shape=(3, 3),
        announcements=(0, 1, 2),
        key_announcements=(0, 1),
        metadata={
            "protocol": "mdi-coherent",
            "alpha": alpha,
            "delta": delta,
            "eps": eps,
            "p_c": p_c,
            "normalization": "physical",
            "rate_multiplier": 1.0 / p_c ** 2,
        },
    )
