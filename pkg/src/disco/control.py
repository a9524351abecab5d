"""Outer-loop control: reliability-threshold adaptation, bandwidth split, strategy presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import ScenarioConfig


@dataclass(frozen=True)
class StrategyPreset:
    name: str
    alphas: Optional[tuple[float, float, float]] = None
    force_ap_on: bool = False
    force_ue_on: bool = False
    force_es_on: bool = False
    equal_cpu_split: bool = False
    bandwidth_policy: Optional[str] = None  # None keeps the scenario's policy


PRESETS: dict[str, StrategyPreset] = {
    p.name: p
    for p in (
        StrategyPreset("holistic", alphas=(1 / 3, 1 / 3, 1 / 3)),
        StrategyPreset("ue_centric", alphas=(1.0, 0.0, 0.0)),
        StrategyPreset("ap_centric", alphas=(0.0, 1.0, 0.0)),
        StrategyPreset("es_centric", alphas=(0.0, 0.0, 1.0)),
        StrategyPreset("no_sleep", force_ap_on=True, force_ue_on=True, force_es_on=True),
        StrategyPreset("radio_sleep", force_es_on=True),
        StrategyPreset("es_sleep", force_ap_on=True, force_ue_on=True),
        StrategyPreset("equal_fk", equal_cpu_split=True),
    )
}


def get_preset(name: str) -> StrategyPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; valid presets: {', '.join(PRESETS)}") from None


def apply_strategy(strategy, config: ScenarioConfig) -> tuple[ScenarioConfig, StrategyPreset]:
    """Fold a preset into the scenario: weights and bandwidth policy overrides.

    The remaining flags (forced activity, equal CPU split) are read by the
    solvers from the returned preset.
    """
    preset = strategy if isinstance(strategy, StrategyPreset) else get_preset(strategy)
    changes = {"strategy": preset.name}
    if preset.alphas is not None:
        changes["lyapunov"] = dataclasses.replace(config.lyapunov, alphas=preset.alphas)
    if preset.bandwidth_policy is not None:
        changes["bandwidth_policy"] = preset.bandwidth_policy
    return config.replace(**changes), preset


# ---------------------------------------------------------------------------
# reliability threshold adaptation


def estimate_oos_probability(delays: Sequence[float], d_max: float, window_max: Optional[int] = None) -> float:
    """Fraction of the most recent delays strictly above ``d_max``; 0 with no evidence."""
    d = np.asarray(delays, dtype=float)
    if window_max is not None:
        d = d[-window_max:] if window_max > 0 else d[:0]
    if d.size == 0:
        return 0.0
    return float(np.count_nonzero(d > d_max)) / d.size


def stepsize(nu0, beta: float, t: int):
    """Diminishing step nu0 / t**beta for slot index t >= 1."""
    if t < 1:
        raise ValueError("slot index starts at 1")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    return nu0 / t ** beta


def update_delta(delta_prev, nu_t, p_hat, epsilon):
    return np.maximum(delta_prev - nu_t * (np.asarray(p_hat) - epsilon), 1.0)


# ---------------------------------------------------------------------------
# bandwidth


def allocate_bandwidth(q_tilde_ul: np.ndarray, q_tilde_dl: np.ndarray, policy: str,
                       total_ul: float, total_dl: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-UE (uplink, downlink) bandwidth.

    ``equal`` splits evenly.  ``heuristic`` splits in proportion to the positive
    backlog weights; UEs with non-positive weight get nothing, and if no UE has
    positive weight the whole band stays unassigned.
    """
    k = len(q_tilde_ul)
    if policy == "equal":
        return np.full(k, total_ul / k), np.full(k, total_dl / k)
    if policy != "heuristic":
        raise ValueError(f"unknown bandwidth policy {policy!r}")
    return _proportional(q_tilde_ul, total_ul), _proportional(q_tilde_dl, total_dl)


def _proportional(weights: np.ndarray, total: float) -> np.ndarray:
    w = np.where(np.asarray(weights, dtype=float) > 0, weights, 0.0)
    s = w.sum()
    if s <= 0:
        return np.zeros_like(w)
    return total * w / s


def preset_names() -> Iterable[str]:
    return PRESETS.keys()
