"""Channel realisations, PER-driven SNR thresholds, and per-slot unit counts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

import numpy as np
from scipy.special import erfc

from .config import McsScheme, PhyConfig

# floor() of products like tau*B can land a hair below an integer in binary
# floating point (0.009 * 1e6 etc.); the guard keeps those exact.
_FLOOR_GUARD = 1e-9


def floor_count(x):
    return np.floor(np.asarray(x, dtype=float) + _FLOOR_GUARD)


@dataclass(frozen=True)
class LinkBudget:
    gain: float
    bandwidth: float
    noise_power: float


# ---------------------------------------------------------------------------
# channel


def pathloss_db(distance, ref_db: float = 61.34, exponent: float = 2.0):
    """Close-in reference path loss, in dB, with the reference at 1 m.

    Distances below 1 m are evaluated at 1 m (the model is not meant for the
    near field); zero or negative distances are rejected.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be > 0")
    return ref_db + 10.0 * exponent * np.log10(np.maximum(d, 1.0))


def mean_gain(ue_positions, ap_position, phy: PhyConfig) -> np.ndarray:
    d = np.linalg.norm(np.atleast_2d(ue_positions) - np.asarray(ap_position, dtype=float), axis=1)
    return 10 ** (-pathloss_db(d, phy.pathloss_ref_db, phy.pathloss_exponent) / 10)


def sample_channel_gain(ue_position, ap_position, rng: np.random.Generator,
                        phy: PhyConfig | None = None, fading: float | None = None) -> float:
    """One linear power gain: path loss times a unit-mean exponential (Rayleigh power) draw.

    ``fading`` pins the small-scale factor instead of drawing it.
    """
    phy = phy or PhyConfig()
    d = math.dist(ue_position, ap_position)
    if d <= 0:
        raise ValueError("UE and AP positions coincide")
    pl = float(pathloss_db(d, phy.pathloss_ref_db, phy.pathloss_exponent))
    f = rng.exponential(1.0) if fading is None else fading
    return 10 ** (-pl / 10) * f


# ---------------------------------------------------------------------------
# PER model and SNR thresholds


class PerModel(Protocol):
    def required_snr(self, mcs: McsScheme, target_per: float, packet_bits: int) -> float: ...


def qfunc(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class QamPerModel:
    """Gray-mapped M-QAM over AWGN with coding folded in as an SNR gain.

    A code of rate R is worth ``R**-g`` in linear SNR (``g`` = ``coding_gain_exponent``),
    i.e. ``10*g*log10(1/R)`` dB.  Packet errors assume independent bit errors.
    """

    coding_gain_exponent: float = 1.5
    rel_tol: float = 1e-3

    def ber(self, snr, mcs: McsScheme):
        m = mcs.modulation_order
        eff = np.asarray(snr, dtype=float) * mcs.code_rate ** (-self.coding_gain_exponent)
        if m == 2:
            return qfunc(np.sqrt(2 * eff))
        k = math.log2(m)
        coef = 4.0 / k * (1 - 1 / math.sqrt(m))
        return np.minimum(coef * qfunc(np.sqrt(3 * eff / (m - 1))), 0.5)

    def per(self, snr, mcs: McsScheme, packet_bits: int):
        b = self.ber(snr, mcs)
        # 1 - (1-b)^N without cancellation for tiny b
        return -np.expm1(packet_bits * np.log1p(-b))

    def required_snr(self, mcs: McsScheme, target_per: float, packet_bits: int) -> float:
        if not 0 < target_per < 1:
            raise ValueError("target PER must lie in (0, 1)")
        if self.per(0.0, mcs, packet_bits) <= target_per:
            return 0.0
        lo, hi = 0.0, 1.0
        while self.per(hi, mcs, packet_bits) > target_per:
            lo, hi = hi, hi * 2
        while hi - lo > self.rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if self.per(mid, mcs, packet_bits) <= target_per:
                hi = mid
            else:
                lo = mid
        return hi


@dataclass(frozen=True)
class TableSnrModel:
    """SNR thresholds read from a table keyed by (M, R); the PER target is baked in."""

    table: tuple[tuple[int, float, float], ...]

    def required_snr(self, mcs: McsScheme, target_per: float, packet_bits: int) -> float:
        for m, r, g in self.table:
            if m == mcs.modulation_order and math.isclose(r, mcs.code_rate):
                return g
        raise KeyError(f"no SNR threshold for M={mcs.modulation_order}, R={mcs.code_rate}")


def load_snr_table(path) -> TableSnrModel:
    """Read a CSV with header ``M,R,gamma`` (gamma as linear SNR)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append((int(rec["M"]), float(rec["R"]), float(rec["gamma"])))
    return TableSnrModel(tuple(rows))


def per_model_for(phy: PhyConfig) -> PerModel:
    if phy.snr_table_csv:
        return load_snr_table(phy.snr_table_csv)
    return QamPerModel(phy.coding_gain_exponent)


def required_snr(mcs: McsScheme, target_per: float, packet_bits: int,
                 model: PerModel | None = None) -> float:
    return (model or QamPerModel()).required_snr(mcs, target_per, packet_bits)


@lru_cache(maxsize=256)
def snr_thresholds(mcs_set: tuple[McsScheme, ...], target_per: float, packet_bits: int,
                   model: PerModel) -> np.ndarray:
    """Vector of thresholds for a whole MCS set (cached; the set never changes within a run)."""
    return np.array([model.required_snr(m, target_per, packet_bits) for m in mcs_set])


def min_tx_power(gamma_bar, link: LinkBudget):
    """Smallest transmit power meeting the SNR target: gamma * noise / gain."""
    if np.any(np.asarray(link.gain) <= 0):
        raise ValueError("channel gain must be > 0")
    return gamma_bar * link.noise_power / link.gain


# ---------------------------------------------------------------------------
# unit counts


def packets_per_slot(bits_per_symbol, bandwidth, tau: float, packet_bits: int):
    n_sym = floor_count(tau * np.asarray(bandwidth, dtype=float))
    return floor_count(n_sym * np.asarray(bits_per_symbol, dtype=float) / packet_bits)


def uplink_units(mcs: McsScheme, bandwidth: float, tau: float, unit_bits: float, packet_bits: int) -> int:
    """Whole input units that fit in one slot's worth of packets."""
    n_p = packets_per_slot(mcs.bits_per_symbol, bandwidth, tau, packet_bits)
    return int(floor_count(n_p * packet_bits / unit_bits))


def downlink_units(mcs: McsScheme, bandwidth: float, tau: float, unit_bits: float, packet_bits: int) -> int:
    # same packetisation as the uplink, counted in output units
    return uplink_units(mcs, bandwidth, tau, unit_bits, packet_bits)


def unit_capacity(bits_per_symbol: np.ndarray, bandwidth: np.ndarray, tau: float,
                  unit_bits: np.ndarray, packet_bits: int) -> np.ndarray:
    """Vectorised counts: rows are UEs, columns are MCS schemes."""
    n_p = packets_per_slot(bits_per_symbol[None, :], bandwidth[:, None], tau, packet_bits)
    return floor_count(n_p * packet_bits / unit_bits[:, None])
