"""Channel models: the statistics an honest experiment would observe.

Yields, error rates, sifting probability and error-correction cost for the
built-in BB84 and coherent-light MDI setups.  Dark counts are treated to
first order (O(p_d^2) terms dropped) so results stay comparable with the
standard simulation formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateStatisticsError, InvalidStatisticsError, StructureError
from .linalg import coherent_overlap

# fiber loss fixed at 0.2 dB/km: eta_channel = 10^(-0.02 * l)
LOSS_EXPONENT_PER_KM = 0.02

BB84_OUTCOMES = ("Z0", "Z1", "X0", "X1", "perp")


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0."""
    if x < 0.0 or x > 1.0:
        raise InvalidStatisticsError(f"binary entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class ChannelParams:
    """Loss-and-noise model: distance, detector efficiency, dark counts, EC."""

    distance_km: float = 0.0
    detector_efficiency: float = 0.73
    dark_count: float = 1e-6
    ec_inefficiency: float = 1.16

    def __post_init__(self):
        if self.distance_km < 0:
            raise StructureError("distance must be non-negative")
        if not 0 < self.detector_efficiency <= 1:
            raise StructureError("detector efficiency must be in (0, 1]")
        if not 0 <= self.dark_count < 1:
            raise StructureError("dark count probability must be in [0, 1)")
        if self.ec_inefficiency < 1:
            raise StructureError("error correction inefficiency must be >= 1")

    @property
    def eta(self) -> float:
        """End-to-end transmission: eta_d * 10^(-0.02 l)."""
        return self.detector_efficiency * 10 ** (-LOSS_EXPONENT_PER_KM * self.distance_km)


@dataclass(frozen=True)
class ObservedStats:
    """Observed yields plus the derived error/sifting/EC quantities.

    ``normalization`` is 'physical' when basis probabilities sum to one;
    the asymptotic-limit convention (both basis weights set to 1) is
    flagged 'trace2' and exempted from the unit-sum checks.
    """

    yields: dict
    bit_error: float
    p_pass: float
    lambda_ec: float
    kind: str = "pm"
    normalization: str = "physical"

    def __post_init__(self):
        for key, val in self.yields.items():
            if val < -1e-12:
                raise InvalidStatisticsError(f"negative yield {val} at {key}")
            if val > 1 + 1e-12:
                raise InvalidStatisticsError(f"yield {val} above 1 at {key}")
        if self.kind == "pm" and self.normalization == "physical":
            settings = sorted({j for j, _ in self.yields})
            for j in settings:
                total = sum(v for (jj, _), v in self.yields.items() if jj == j)
                if abs(total - 1.0) > 1e-12:
                    raise InvalidStatisticsError(
                        f"yields for setting {j} sum to {total}, expected 1"
                    )
        if self.kind == "mdi":
            pairs = sorted({ij for ij, _ in self.yields})
            for ij in pairs:
                total = sum(self.yields[(ij, g)] for g in (0, 1, 2))
                if abs(total - 1.0) > 1e-12:
                    raise InvalidStatisticsError(
                        f"announcement yields for {ij} sum to {total}"
                    )


def bb84_theta(j: int, delta: float) -> float:
    """Encoding angle theta_j = (1 + delta/pi) phi_j / 2 for setting j."""
    phi = (0.0, math.pi, math.pi / 2, 3 * math.pi / 2)[j]
    return (1.0 + delta / math.pi) * phi / 2.0


def bb84_yields(params: ChannelParams, delta: float, p_zb: float) -> dict:
    """Conditional outcome probabilities for the four BB84 settings.

    Returns a dict keyed by (setting, outcome) with outcome in
    ``BB84_OUTCOMES``.  ``p_zb`` is Bob's Z-basis probability; the X basis
    gets weight 1 - p_zb.  The inconclusive yield completes each setting
    to unit total.
    """
    eta = params.eta
    p_d = params.dark_count
    p_xb = 1.0 - p_zb
    out = {}
    for j in range(4):
        th = bb84_theta(j, delta)
        base = (1.0 - eta) * p_d
        z0 = p_zb * (base + eta / 2 * (1 + (1 - p_d) * math.cos(2 * th)))
        z1 = p_zb * (base + eta / 2 * (1 - (1 - p_d) * math.cos(2 * th)))
        x0 = p_xb * (base + eta / 2 * (1 + (1 - p_d) * math.sin(2 * th)))
        x1 = p_xb * (base + eta / 2 * (1 - (1 - p_d) * math.sin(2 * th)))
        out[(j, "Z0")] = z0
        out[(j, "Z1")] = z1
        out[(j, "X0")] = x0
        out[(j, "X1")] = x1
        out[(j, "perp")] = 1.0 - (z0 + z1 + x0 + x1)
    return out


def bb84_error_and_pass(yields: dict, p_za: float) -> tuple[float, float]:
    """Z-basis bit-error rate and sifting probability.

    e_Z = (Y_Z1|0 + Y_Z0|1) / (sum of the four key yields);
    p_pass = (p_ZA / 2) * (that same sum).
    """
    num = yields[(0, "Z1")] + yields[(1, "Z0")]
    den = (yields[(0, "Z0")] + yields[(0, "Z1")]
           + yields[(1, "Z0")] + yields[(1, "Z1")])
    if den <= 0:
        raise DegenerateStatisticsError("no conclusive Z events: e_Z undefined")
    return num / den, p_za / 2 * den


def mdi_amplitudes(alpha: float, delta: float) -> tuple[complex, complex, complex]:
    """Coherent amplitudes (alpha, -alpha e^{i delta}, 0) of the three settings."""
    return complex(alpha), -alpha * np.exp(1j * delta), 0.0 + 0.0j


def mdi_yields(params: ChannelParams, alpha: float, delta: float) -> dict:
    """Announcement probabilities Y_{gamma|ij} for the coherent MDI setup.

    Charlie interferes the two links (each with transmittance eta) on a
    balanced beam splitter; gamma=0/1 are the single-click events and
    gamma=2 collects the rest.
    """
    eta = params.eta
    p_d = params.dark_count
    amps = mdi_amplitudes(alpha, delta)
    out = {}
    for i in range(3):
        for j in range(3):
            sum_int = eta / 2 * abs(amps[i] + amps[j]) ** 2
            dif_int = eta / 2 * abs(amps[i] - amps[j]) ** 2
            y0 = (1 - math.exp(-sum_int) * (1 - p_d)) * math.exp(-dif_int) * (1 - p_d)
            y1 = (1 - math.exp(-dif_int) * (1 - p_d)) * math.exp(-sum_int) * (1 - p_d)
            out[((i, j), 0)] = y0
            out[((i, j), 1)] = y1
            out[((i, j), 2)] = 1.0 - y0 - y1
    return out


def mdi_error_and_pass(yields: dict, p_joint: dict) -> tuple[float, float]:
    """Bit-error rate (with the gamma=1 flip convention built in) and p_pass.

    ``p_joint`` maps (i, j) to the joint selection probability used for the
    sifting sum; only i, j in {0, 1} contribute.
    """
    same = ((0, 0), (1, 1))
    diff = ((0, 1), (1, 0))
    num = sum(yields[(ij, 0)] for ij in diff) + sum(yields[(ij, 1)] for ij in same)
    den = sum(yields[(ij, 0)] + yields[(ij, 1)] for ij in same + diff)
    if den <= 0:
        raise DegenerateStatisticsError("no conclusive MDI events: e_bit undefined")
    p_pass = sum(
        p_joint[ij] * (yields[(ij, 0)] + yields[(ij, 1)]) for ij in same + diff
    )
    return num / den, p_pass


def ec_cost(e: float, f: float) -> float:
    """Error-correction leakage per sifted bit: f * h(e)."""
    if not 0 <= e <= 1:
        raise InvalidStatisticsError(f"error rate {e} outside [0, 1]")
    if f < 1:
        raise InvalidStatisticsError(f"EC inefficiency {f} below 1")
    return f * binary_entropy(e)


def bb84_observed_stats(params: ChannelParams, delta: float,
                        p_za: float = 1.0, p_zb: float = 1.0) -> ObservedStats:
    """Full BB84 statistics bundle at the requested basis weights.

    With ``p_za = p_zb = 1`` this is the asymptotic-limit convention: the Z
    and X conditional yields are both taken at full basis weight and the
    inconclusive yield keeps its physical value, so per-setting totals
    exceed one (flagged 'trace2').
    """
    if p_za == 1.0 and p_zb == 1.0:
        y_z = bb84_yields(params, delta, p_zb=1.0)
        y_x = bb84_yields(params, delta, p_zb=0.0)
        yields = {}
        for j in range(4):
            yields[(j, "Z0")] = y_z[(j, "Z0")]
            yields[(j, "Z1")] = y_z[(j, "Z1")]
            yields[(j, "X0")] = y_x[(j, "X0")]
            yields[(j, "X1")] = y_x[(j, "X1")]
            yields[(j, "perp")] = 1.0 - y_z[(j, "Z0")] - y_z[(j, "Z1")]
        normalization = "trace2"
    else:
        yields = bb84_yields(params, delta, p_zb)
        normalization = "physical"
    e_z, p_pass = bb84_error_and_pass(yields, p_za)
    lam = ec_cost(e_z, params.ec_inefficiency)
    return ObservedStats(yields=yields, bit_error=e_z, p_pass=p_pass,
                         lambda_ec=lam, kind="pm", normalization=normalization)


def mdi_observed_stats(params: ChannelParams, alpha: float, delta: float
                       ) -> ObservedStats:
    """Full MDI statistics bundle; p_pass is taken in the p_c -> 1 limit."""
    yields = mdi_yields(params, alpha, delta)
    p_limit = {ij: 0.25 for ij in ((0, 0), (0, 1), (1, 0), (1, 1))}
    e_bit, p_pass = mdi_error_and_pass(yields, p_limit)
    lam = ec_cost(e_bit, params.ec_inefficiency)
    return ObservedStats(yields=yields, bit_error=e_bit, p_pass=p_pass,
                         lambda_ec=lam, kind="mdi", normalization="physical")
