"""Scenario description: slot timing, power models, PHY, constraints, Lyapunov knobs.

Everything here is immutable once validated.  Units are SI throughout: seconds,
watts, joules, hertz (cycles/s for CPU frequencies).  Arrival rates are stored
in data units per slot.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import types
import typing
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

BANDWIDTH_POLICIES = ("equal", "heuristic")


class ConfigError(ValueError):
    """Raised with the full list of violated invariants (field path + reason)."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class SlotTiming:
    tau_s: float = 1e-3  # signalling / state-transition portion
    tau: float = 9e-3  # offloading portion

    @property
    def tau_l(self) -> float:
        return self.tau_s + self.tau


@dataclass(frozen=True)
class ApPowerModel:
    p_on: float = 2.2
    p_sleep: float = 0.278
    p_dl_max: float = 0.251


@dataclass(frozen=True)
class TxPowerCurve:
    """Two-segment piecewise-linear map from radiated power to consumed power.

    Slope ``slope_low`` up to ``knee`` watts, ``slope_high`` above it.
    """

    knee: float = 0.01
    slope_low: float = 10.0
    slope_high: float = 15.0

    def __call__(self, p_tx):
        p = np.asarray(p_tx, dtype=float)
        low = self.slope_low * np.minimum(p, self.knee)
        high = self.slope_high * np.maximum(p - self.knee, 0.0)
        out = low + high
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConstraintSpec:
    d_avg: float = 0.1
    d_max: float = 0.25
    epsilon: float = 1e-2
    mu: float = 10.0
    per_target_ul: float = 1e-4
    per_target_dl: float = 1e-4


@dataclass(frozen=True)
class UeProfile:
    p_on: float = 0.9
    p_sleep: float = 0.346
    p_tx_max: float = 0.1
    tx_power_curve: TxPowerCurve = field(default_factory=TxPowerCurve)
    input_unit_bits: float = 1000.0
    output_unit_bits: float = 100.0
    cycles_per_unit_inv: float = 1e-4  # J_k, data units per CPU cycle
    arrival_rate: float = 5.0  # units per slot
    arrival_max: Optional[int] = None  # only needed for the drift bound constant
    position: tuple[float, float] = (50.0, 0.0)
    constraint: ConstraintSpec = field(default_factory=ConstraintSpec)


@dataclass(frozen=True)
class McsScheme:
    modulation_order: int
    code_rate: float

    @property
    def bits_per_symbol(self) -> float:
        return math.log2(self.modulation_order) * self.code_rate


def default_mcs_set() -> tuple[McsScheme, ...]:
    rates = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    return tuple(McsScheme(m, r) for m in (4, 16, 64, 256) for r in rates)


@dataclass(frozen=True)
class CpuModel:
    f_max: float = 4.5e9
    levels: tuple[float, ...] = tuple(i / 10 for i in range(11))  # fractions of f_max
    kappa: float = 1e-27
    p_on: float = 20.0
    p_sleep: float = 10.0

    @property
    def freq_set(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=float) * self.f_max


@dataclass(frozen=True)
class PhyConfig:
    total_bw_ul: float = 5e6
    total_bw_dl: float = 5e6
    packet_bits: int = 12000
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    carrier_freq: float = 28e9
    pathloss_exponent: float = 2.0
    pathloss_ref_db: float = 61.34
    coding_gain_exponent: float = 1.5
    snr_table_csv: Optional[str] = None

    @property
    def noise_psd(self) -> float:
        """N0 in W/Hz (without the noise figure)."""
        return 10 ** ((self.noise_psd_dbm_hz - 30.0) / 10)

    def noise_power(self, bandwidth):
        """Thermal noise plus receiver noise figure over ``bandwidth`` Hz, in watts."""
        return self.noise_psd * 10 ** (self.noise_figure_db / 10) * np.asarray(bandwidth, dtype=float)


@dataclass(frozen=True)
class LyapunovConfig:
    v: float = 5e6
    alphas: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    delta_init: tuple[float, ...] = (2.0,)
    nu_init: tuple[float, ...] = (1.0,)
    beta: float = 0.5
    window_max: int = 10_000
    adapt_delta: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    ues: tuple[UeProfile, ...] = (UeProfile(),)
    timing: SlotTiming = field(default_factory=SlotTiming)
    ap: ApPowerModel = field(default_factory=ApPowerModel)
    cpu: CpuModel = field(default_factory=CpuModel)
    phy: PhyConfig = field(default_factory=PhyConfig)
    lyapunov: LyapunovConfig = field(default_factory=LyapunovConfig)
    mcs_ul: tuple[McsScheme, ...] = field(default_factory=default_mcs_set)
    mcs_dl: tuple[McsScheme, ...] = field(default_factory=default_mcs_set)
    ap_position: tuple[float, float] = (0.0, 0.0)
    strategy: str = "holistic"
    bandwidth_policy: str = "equal"

    @property
    def n_users(self) -> int:
        return len(self.ues)

    # per-UE vectors used on every slot; computed once

    @cached_property
    def q_avg(self) -> np.ndarray:
        """Average total-queue target per UE, in units: D_avg (in slots) times A_avg."""
        tau_l = self.timing.tau_l
        return np.array([u.constraint.d_avg / tau_l * u.arrival_rate for u in self.ues])

    @cached_property
    def delta_init(self) -> np.ndarray:
        return _broadcast(self.lyapunov.delta_init, self.n_users)

    @cached_property
    def nu_init(self) -> np.ndarray:
        return _broadcast(self.lyapunov.nu_init, self.n_users)

    @cached_property
    def arrays(self) -> "UeArrays":
        return UeArrays.from_config(self)

    def equal_bandwidth(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.n_users
        return np.full(k, self.phy.total_bw_ul / k), np.full(k, self.phy.total_bw_dl / k)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class UeArrays:
    """Column view of the per-UE parameters for vectorised per-slot work."""

    p_on: np.ndarray
    p_sleep: np.ndarray
    p_tx_max: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray
    j: np.ndarray
    arrival_rate: np.ndarray
    d_avg: np.ndarray
    d_max: np.ndarray
    epsilon: np.ndarray
    mu: np.ndarray
    per_ul: np.ndarray
    per_dl: np.ndarray
    positions: np.ndarray
    tx_knee: np.ndarray
    tx_slope_low: np.ndarray
    tx_slope_high: np.ndarray

    def tx_consumed(self, p_tx: np.ndarray) -> np.ndarray:
        """Vectorised transmit-chain power, one curve per UE (rows of ``p_tx``)."""
        p = np.asarray(p_tx, dtype=float)
        shape = (-1,) + (1,) * (p.ndim - 1)
        knee = self.tx_knee.reshape(shape)
        return (self.tx_slope_low.reshape(shape) * np.minimum(p, knee)
                + self.tx_slope_high.reshape(shape) * np.maximum(p - knee, 0.0))

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "UeArrays":
        ues = cfg.ues

        def col(fn):
            return np.array([fn(u) for u in ues], dtype=float)

        return cls(
            p_on=col(lambda u: u.p_on),
            p_sleep=col(lambda u: u.p_sleep),
            p_tx_max=col(lambda u: u.p_tx_max),
            s_in=col(lambda u: u.input_unit_bits),
            s_out=col(lambda u: u.output_unit_bits),
            j=col(lambda u: u.cycles_per_unit_inv),
            arrival_rate=col(lambda u: u.arrival_rate),
            d_avg=col(lambda u: u.constraint.d_avg),
            d_max=col(lambda u: u.constraint.d_max),
            epsilon=col(lambda u: u.constraint.epsilon),
            mu=col(lambda u: u.constraint.mu),
            per_ul=col(lambda u: u.constraint.per_target_ul),
            per_dl=col(lambda u: u.constraint.per_target_dl),
            positions=np.array([u.position for u in ues], dtype=float).reshape(-1, 2),
            tx_knee=col(lambda u: u.tx_power_curve.knee),
            tx_slope_low=col(lambda u: u.tx_power_curve.slope_low),
            tx_slope_high=col(lambda u: u.tx_power_curve.slope_high),
        )


def _broadcast(values: Sequence[float], k: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 1:
        return np.full(k, arr[0])
    return arr.copy()


# ---------------------------------------------------------------------------
# validation


def validate_config(config: ScenarioConfig) -> ScenarioConfig:
    """Check every invariant of the scenario; raise ConfigError listing all violations.

    Returns the config unchanged so calls can be chained.
    """
    from .control import PRESETS  # local import: control depends on config

    bad: list[str] = []

    def need(cond: bool, path: str, why: str) -> None:
        if not cond:
            bad.append(f"{path}: {why}")

    t = config.timing
    need(t.tau_s > 0, "timing.tau_s", "must be > 0")
    need(t.tau > 0, "timing.tau", "must be > 0")

    ap = config.ap
    need(0 <= ap.p_sleep < ap.p_on, "ap", "need 0 <= p_sleep < p_on")
    need(ap.p_dl_max > 0, "ap.p_dl_max", "must be > 0")

    cpu = config.cpu
    levels = np.asarray(cpu.levels, dtype=float)
    need(bool(np.any(levels == 0.0)), "cpu.levels", "frequency set must contain 0")
    need(bool(np.all(levels >= 0)) and bool(np.all(levels <= 1.0)), "cpu.levels", "fractions must lie in [0, 1]")
    need(bool(np.isclose(levels.max(initial=0.0), 1.0)), "cpu.levels", "max level must be 1 (f_max)")
    need(len(set(cpu.levels)) == len(cpu.levels), "cpu.levels", "duplicate frequencies")
    need(cpu.f_max > 0, "cpu.f_max", "must be > 0")
    need(cpu.kappa > 0, "cpu.kappa", "must be > 0")
    need(0 <= cpu.p_sleep < cpu.p_on, "cpu", "need 0 <= p_sleep < p_on")

    phy = config.phy
    for name in ("total_bw_ul", "total_bw_dl", "carrier_freq", "pathloss_exponent", "pathloss_ref_db"):
        need(getattr(phy, name) > 0, f"phy.{name}", "must be > 0")
    need(phy.packet_bits >= 1, "phy.packet_bits", "must be >= 1")
    need(phy.coding_gain_exponent >= 0, "phy.coding_gain_exponent", "must be >= 0")
    if phy.snr_table_csv is not None:
        need(Path(phy.snr_table_csv).is_file(), "phy.snr_table_csv", "file not found")

    for label, mcs_set in (("mcs_ul", config.mcs_ul), ("mcs_dl", config.mcs_dl)):
        need(len(mcs_set) > 0, label, "empty MCS set")
        for i, m in enumerate(mcs_set):
            need(m.modulation_order >= 2 and (m.modulation_order & (m.modulation_order - 1)) == 0,
                 f"{label}[{i}].modulation_order", "must be a power of two >= 2")
            need(0 < m.code_rate <= 1, f"{label}[{i}].code_rate", "must lie in (0, 1]")

    ly = config.lyapunov
    k = config.n_users
    need(k >= 1, "ues", "at least one UE required")
    need(ly.v >= 0, "lyapunov.v", "must be >= 0")
    need(len(ly.alphas) == 3, "lyapunov.alphas", "need exactly three weights")
    need(all(a >= 0 for a in ly.alphas), "lyapunov.alphas", "weights must be >= 0")
    need(math.isclose(sum(ly.alphas), 1.0, abs_tol=1e-9), "lyapunov.alphas", f"weights sum to {sum(ly.alphas):g}, not 1")
    need(0 < ly.beta <= 1, "lyapunov.beta", "must lie in (0, 1]")
    need(ly.window_max >= 1, "lyapunov.window_max", "must be >= 1")
    for name in ("delta_init", "nu_init"):
        vals = getattr(ly, name)
        need(len(vals) in (1, k), f"lyapunov.{name}", f"need 1 or {k} values, got {len(vals)}")
    need(all(d >= 1 for d in ly.delta_init), "lyapunov.delta_init", "must be >= 1")
    need(all(n > 0 for n in ly.nu_init), "lyapunov.nu_init", "must be > 0")

    for i, u in enumerate(config.ues):
        p = f"ues[{i}]"
        need(0 <= u.p_sleep < u.p_on, p, "need 0 <= p_sleep < p_on")
        need(u.p_tx_max > 0, f"{p}.p_tx_max", "must be > 0")
        c = u.tx_power_curve
        need(c.knee >= 0 and c.slope_low >= 0 and c.slope_high >= 0, f"{p}.tx_power_curve",
             "knee and slopes must be >= 0 (monotone, zero at zero)")
        need(u.input_unit_bits >= 1, f"{p}.input_unit_bits", "must be >= 1")
        need(u.output_unit_bits >= 1, f"{p}.output_unit_bits", "must be >= 1")
        need(u.cycles_per_unit_inv > 0, f"{p}.cycles_per_unit_inv", "must be > 0")
        need(u.arrival_rate >= 0, f"{p}.arrival_rate", "must be >= 0")
        if u.arrival_max is not None:
            need(u.arrival_max >= 0, f"{p}.arrival_max", "must be >= 0")
        dist = math.dist(u.position, config.ap_position)
        need(dist > 0, f"{p}.position", "UE co-located with the AP")
        cs = u.constraint
        need(cs.d_avg > 0, f"{p}.constraint.d_avg", "must be > 0")
        need(cs.d_max > 0, f"{p}.constraint.d_max", "must be > 0")
        need(0 < cs.epsilon < 1, f"{p}.constraint.epsilon", "must lie in (0, 1)")
        need(cs.mu > 0, f"{p}.constraint.mu", "must be > 0")
        need(0 < cs.per_target_ul < 1, f"{p}.constraint.per_target_ul", "must lie in (0, 1)")
        need(0 < cs.per_target_dl < 1, f"{p}.constraint.per_target_dl", "must lie in (0, 1)")

    need(config.strategy in PRESETS, "strategy", f"unknown preset {config.strategy!r}; valid: {', '.join(PRESETS)}")
    need(config.bandwidth_policy in BANDWIDTH_POLICIES, "bandwidth_policy",
         f"unknown policy {config.bandwidth_policy!r}; valid: {', '.join(BANDWIDTH_POLICIES)}")

    if bad:
        raise ConfigError(bad)
    return config


# ---------------------------------------------------------------------------
# JSON round trip


def to_dict(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [to_dict(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _build(tp: Any, data: Any, path: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if data is None:
            return None
        inner = [a for a in args if a is not type(None)]
        return _build(inner[0], data, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(data, dict):
            raise ConfigError([f"{path or '<root>'}: expected an object"])
        hints = typing.get_type_hints(tp)
        names = {f.name for f in dataclasses.fields(tp) if f.init}
        unknown = sorted(set(data) - names)
        if unknown:
            prefix = path + "." if path else ""
            raise ConfigError([f"{prefix}{key}: unknown key" for key in unknown])
        kwargs = {name: _build(hints[name], value, f"{path}.{name}" if path else name)
                  for name, value in data.items()}
        return tp(**kwargs)
    if origin is tuple:
        if not isinstance(data, (list, tuple)):
            raise ConfigError([f"{path}: expected a list"])
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_build(args[0], v, f"{path}[{i}]") for i, v in enumerate(data))
        if len(args) != len(data):
            raise ConfigError([f"{path}: expected {len(args)} items, got {len(data)}"])
        return tuple(_build(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, data)))
    if tp is float:
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            raise ConfigError([f"{path}: expected a number"])
        return float(data)
    if tp is int:
        if isinstance(data, bool) or not isinstance(data, (int, float)) or int(data) != data:
            raise ConfigError([f"{path}: expected an integer"])
        return int(data)
    if tp is bool:
        if not isinstance(data, bool):
            raise ConfigError([f"{path}: expected true/false"])
        return data
    if tp is str:
        if not isinstance(data, str):
            raise ConfigError([f"{path}: expected a string"])
        return data
    return data


def from_dict(data: dict) -> ScenarioConfig:
    """Build a config from plain JSON data.  Unknown keys are rejected.

    ``mcs_ul``/``mcs_dl`` may be given as ``[[M, R], ...]`` pairs, and the per-UE
    ``lyapunov.delta_init``/``nu_init`` as a bare number (broadcast to all UEs).
    """
    data = dict(data)
    for key in ("mcs_ul", "mcs_dl"):
        if key in data and isinstance(data[key], list):
            data[key] = [
                {"modulation_order": e[0], "code_rate": e[1]} if isinstance(e, (list, tuple)) else e
                for e in data[key]
            ]
    ly = data.get("lyapunov")
    if isinstance(ly, dict):
        ly = dict(ly)
        for key in ("delta_init", "nu_init"):
            if isinstance(ly.get(key), (int, float)) and not isinstance(ly.get(key), bool):
                ly[key] = [ly[key]]
        data["lyapunov"] = ly
    return _build(ScenarioConfig, data, "")


def dumps(config: ScenarioConfig) -> str:
    # rebuild first so that e.g. an int given for a float field prints as a float
    canonical = _build(ScenarioConfig, to_dict(config), "")
    return json.dumps(to_dict(canonical), indent=2, sort_keys=True)


def save(config: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps(config) + "\n", encoding="utf-8")


def load(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``key.sub=value`` overrides to raw config data (before validation).

    Values are parsed as JSON when possible, else kept as strings.  A numeric
    path segment indexes into a list (``ues.0.arrival_rate=7``); ``ues.*.x=...``
    sets the field on every UE.
    """
    data = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"--set {item!r}: expected key=value"])
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(data, key.split("."), value, key)
    return data


def _set_path(node: Any, parts: list[str], value: Any, full: str) -> None:
    head, rest = parts[0], parts[1:]
    if isinstance(node, list):
        targets = range(len(node)) if head == "*" else [int(head)] if head.isdigit() else None
        if targets is None:
            raise ConfigError([f"--set {full}: {head!r} is not a list index"])
        for i in targets:
            if not rest:
                node[i] = value
            else:
                _set_path(node[i], rest, value, full)
        return
    if not isinstance(node, dict):
        raise ConfigError([f"--set {full}: cannot descend into a scalar"])
    if not rest:
        node[head] = value
        return
    if head not in node:
        node[head] = {}
    _set_path(node[head], rest, value, full)


def config_hash(config: ScenarioConfig) -> str:
    return hashlib.sha256(dumps(config).encode()).hexdigest()[:12]
