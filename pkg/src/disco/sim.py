"""Slot loop, arrival generation, metrics and Monte Carlo orchestration."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .config import ScenarioConfig, config_hash
from .control import StrategyPreset, allocate_bandwidth, apply_strategy, stepsize, update_delta
from .energy import weighted_energy
from .phy import mean_gain
from .queueing import (QueueSnapshot, pressure_terms, serve_and_arrive_local, serve_compute_queue,
                       serve_result_queue, update_virtual_y, update_virtual_z)
from .solver import Tables, build_tables, slot_energies, solve_slot
from .state import Decision, SlotState, check_decision, threshold_in_slots

Seed = Union[int, np.random.SeedSequence, None]


def sample_arrivals(rate, rng: np.random.Generator, arrival_max=None):
    """Poisson arrivals with mean ``rate`` per slot, optionally truncated at ``arrival_max``."""
    a = rng.poisson(rate)
    if arrival_max is not None:
        a = np.minimum(a, arrival_max)
    return a


def episode_streams(seed: Seed) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (parameters, channel, arrivals) generators derived from one seed.

    An int seed ``s`` means ``SeedSequence(s)``; its first three children (the
    ones ``spawn(3)`` would give on a fresh sequence) feed the three streams.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # children built from the spawn key rather than ss.spawn(), which is stateful
    # and would hand out different streams on a second call with the same object
    return tuple(np.random.default_rng(np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,)))
                 for i in range(3))


# ---------------------------------------------------------------------------
# environment: channel gains and arrivals per slot


class SampledEnvironment:
    """Random block fading (one exponential draw per UE, slot and direction) and Poisson arrivals.

    Draws are generated in blocks; the stream consumed by each quantity is
    fixed, so the sequence does not depend on the controller's decisions.
    """

    block = 1024

    def __init__(self, config: ScenarioConfig, channel_rng: np.random.Generator,
                 arrival_rng: np.random.Generator):
        self.k = config.n_users
        self.mean_gain = mean_gain(config.arrays.positions, config.ap_position, config.phy)
        self.rate = config.arrays.arrival_rate
        caps = [u.arrival_max for u in config.ues]
        self.arrival_max = None if all(c is None for c in caps) else \
            np.array([np.iinfo(np.int64).max if c is None else c for c in caps])
        self._ch = channel_rng
        self._ar = arrival_rng
        self._i = self.block
        self._fade = self._arr = None

    def _refill(self):
        self._fade = self._ch.exponential(1.0, size=(self.block, 2, self.k))
        self._arr = sample_arrivals(np.broadcast_to(self.rate, (self.block, self.k)), self._ar, self.arrival_max)
        self._i = 0

    def draw(self, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._i >= self.block:
            self._refill()
        i = self._i
        self._i += 1
        fade = self._fade[i]
        return self.mean_gain * fade[0], self.mean_gain * fade[1], self._arr[i]


class ScriptedEnvironment:
    """Fixed gains and arrival sequences, for hand-checked traces.

    ``gain_ul``/``gain_dl`` are per-UE constants or (T, K) arrays; ``arrivals``
    is (T, K), and slots past its end see no arrivals.
    """

    def __init__(self, gain_ul, gain_dl, arrivals):
        self.gain_ul = np.asarray(gain_ul, dtype=float)
        self.gain_dl = np.asarray(gain_dl, dtype=float)
        self.arrivals = np.atleast_2d(np.asarray(arrivals, dtype=np.int64))

    def draw(self, t: int):
        gu = self.gain_ul[t] if self.gain_ul.ndim == 2 else self.gain_ul
        gd = self.gain_dl[t] if self.gain_dl.ndim == 2 else self.gain_dl
        a = self.arrivals[t] if t < len(self.arrivals) else np.zeros(self.arrivals.shape[1], dtype=np.int64)
        return gu, gd, a


# ---------------------------------------------------------------------------
# one slot


@dataclass
class SlotMetrics:
    e_u: np.ndarray  # per UE
    e_a: float
    e_m: float
    e_w: float
    e_tot: float
    arrivals: np.ndarray
    delays: list  # (ue, delay_slots, count)
    y_events: np.ndarray  # per UE: Q_tot(t+1) > delta * Q_avg


class SlotRunner:
    """Holds the per-run constants (tables, strategy) so each slot does only the per-slot work."""

    def __init__(self, config: ScenarioConfig, strategy="holistic", tables: Optional[Tables] = None):
        self.config, self.preset = apply_strategy(strategy, config)
        self.tables = tables or build_tables(self.config)
        self.policy = self.config.bandwidth_policy

    def step(self, state: SlotState, env) -> tuple[Decision, SlotMetrics]:
        cfg = self.config
        arr = cfg.arrays
        k = cfg.n_users
        gain_ul, gain_dl, arrivals = env.draw(state.t)
        state.gain_ul = gain_ul
        state.gain_dl = gain_dl

        snap = QueueSnapshot.of(state)
        _, q_ul, q_dl = pressure_terms(snap, arr.mu)
        bw_ul, bw_dl = allocate_bandwidth(q_ul, q_dl, self.policy, cfg.phy.total_bw_ul, cfg.phy.total_bw_dl)
        dec, _, _ = solve_slot(snap, gain_ul, gain_dl, bw_ul, bw_dl, cfg, self.preset, self.tables)

        delays = []
        for i in range(k):
            moved = serve_and_arrive_local(state, i, int(dec.n_ul[i]), int(arrivals[i]))
            done = serve_compute_queue(state, i, int(dec.n_comp[i]), moved)
            for d, c in serve_result_queue(state, i, int(dec.n_dl[i]), done):
                state.windows[i].add(d, c)
                delays.append((i, d, c))

        q_tot = sum(state.counts())
        y_events = q_tot > state.delta * cfg.q_avg
        state.z = update_virtual_z(state.z, q_tot, cfg.q_avg)
        state.y = update_virtual_y(state.y, q_tot, state.delta, cfg.q_avg, arr.mu, arr.epsilon)
        state.t += 1
        if cfg.lyapunov.adapt_delta:
            nu = stepsize(cfg.nu_init, cfg.lyapunov.beta, state.t)
            p_hat = np.array([w.oos_probability() for w in state.windows])
            state.delta = update_delta(state.delta, nu, p_hat, arr.epsilon)

        e_u, e_a, e_m = slot_energies(dec, cfg)
        e_w, e_tot = weighted_energy(e_u, e_a, e_m, cfg.lyapunov.alphas)
        t, ts = cfg.timing.tau, cfg.timing.tau_s
        on = dec.ue_active.astype(float)
        e_u_k = t * (on * (arr.p_on + arr.tx_consumed(dec.p_tx)) + (1 - on) * arr.p_sleep) + ts * arr.p_on
        return dec, SlotMetrics(e_u_k, e_a, e_m, e_w, e_tot, np.asarray(arrivals), delays, y_events)


def run_slot(state: SlotState, config: ScenarioConfig, strategy, rng_or_env):
    """Advance ``state`` by one slot in place; returns (decision, state, metrics).

    ``rng_or_env`` is a numpy Generator (used for both channel and arrivals) or
    an environment object with a ``draw(t)`` method.  Loops should prefer
    :class:`SlotRunner`, which builds the MCS tables once.
    """
    env = rng_or_env
    if isinstance(rng_or_env, np.random.Generator):
        env = SampledEnvironment(config, rng_or_env, rng_or_env)
        env.block = 1
    dec, m = SlotRunner(config, strategy).step(state, env)
    return dec, state, m


# ---------------------------------------------------------------------------
# metrics


PER_UE_FIELDS = ("q_l", "q_m", "q_a", "z", "y", "delta", "ue_active", "e_u_k")
SCALAR_FIELDS = ("e_u", "e_a", "e_m", "e_tot", "e_w", "ap_active", "es_active", "f_c",
                 "n_ul", "n_comp", "n_dl", "arrivals")


@dataclass
class MetricsLog:
    """Per-slot records of one episode plus helpers for the derived aggregates.

    Queue, Z, Y and delta columns hold end-of-slot (post-update) values.
    Delivered-unit delays are kept as per-UE histograms over whole slots.
    """

    config: ScenarioConfig
    strategy: str
    seed: Optional[int]
    series: dict = field(default_factory=dict)
    delay_hist: list = field(default_factory=list)  # per UE: counts indexed by delay in slots
    created: np.ndarray = None
    delivered: np.ndarray = None

    @property
    def horizon(self) -> int:
        return len(self.series["e_w"])

    @property
    def tau_l(self) -> float:
        return self.config.timing.tau_l

    def delay_counts(self) -> np.ndarray:
        width = max((len(h) for h in self.delay_hist), default=0)
        out = np.zeros((len(self.delay_hist), width), dtype=np.int64)
        for i, h in enumerate(self.delay_hist):
            out[i, :len(h)] = h
        return out

    def mean_delay_timestamp(self, ue: Optional[int] = None) -> float:
        """Mean end-to-end delay of delivered units, in seconds."""
        h = self.delay_counts()
        if ue is not None:
            h = h[ue:ue + 1]
        n = h.sum()
        if n == 0:
            return math.nan
        return float((h.sum(axis=0) * np.arange(h.shape[1])).sum() / n * self.tau_l)

    def mean_delay_little(self, ue: Optional[int] = None) -> float:
        """Mean delay from Little's law: average total backlog over the arrival rate, in seconds."""
        q = self.series["q_l"] + self.series["q_m"] + self.series["q_a"]
        rate = self.config.arrays.arrival_rate
        if ue is not None:
            return float(q[:, ue].mean() / rate[ue] * self.tau_l)
        return float(q.sum(axis=1).mean() / rate.sum() * self.tau_l)

    def survivor(self, ue: int, delays_s: Sequence[float]) -> np.ndarray:
        """P(D > d) for each d (seconds), estimated from delivered units of one UE."""
        h = self.delay_counts()[ue]
        n = h.sum()
        d = np.asarray(delays_s, dtype=float)
        if n == 0:
            return np.zeros_like(d)
        tail = np.concatenate((np.cumsum(h[::-1])[::-1], [0]))  # tail[i] = #delays >= i slots
        idx = np.floor(d / self.tau_l + 1e-9).astype(int) + 1  # strictly greater
        idx = np.clip(idx, 0, len(h))
        return tail[idx] / n

    def survivor_curve(self, ue: int) -> tuple[np.ndarray, np.ndarray]:
        """(delay grid in seconds, survivor values), starting at delay 0 with value 1."""
        h = self.delay_counts()[ue]
        grid = np.arange(len(h) + 1) * self.tau_l
        return grid, (self.survivor(ue, grid) if h.sum() else np.ones_like(grid))

    def oos_rate_delay(self) -> np.ndarray:
        """Per UE: fraction of delivered units whose delay exceeded D_max."""
        h = self.delay_counts()
        out = np.full(h.shape[0], math.nan)
        for i, u in enumerate(self.config.ues):
            n = h[i].sum()
            if n:
                out[i] = h[i, threshold_in_slots(u.constraint.d_max, self.tau_l) + 1:].sum() / n
        return out

    def oos_rate_queue(self) -> np.ndarray:
        """Per UE: fraction of slots with Q_tot(t+1) above delta * Q_avg (Y-queue events)."""
        return self.series["y_events"].mean(axis=0)

    def duty_cycles(self) -> dict:
        s = self.series
        return {"ap": float(s["ap_active"].mean()), "es": float(s["es_active"].mean()),
                "ue": float(s["ue_active"].mean()), "ue_k": s["ue_active"].mean(axis=0).tolist()}

    def aggregates(self) -> dict:
        s = self.series
        t = self.horizon
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "config_hash": config_hash(self.config),
            "slots": t,
            "mean_e_w": float(s["e_w"].mean()),
            "mean_e_tot": float(s["e_tot"].mean()),
            "mean_e_u": float(s["e_u"].mean()),
            "mean_e_a": float(s["e_a"].mean()),
            "mean_e_m": float(s["e_m"].mean()),
            "mean_delay": self.mean_delay_timestamp(),
            "mean_delay_little": self.mean_delay_little(),
            "mean_delay_k": [self.mean_delay_timestamp(i) for i in range(self.config.n_users)],
            "oos_rate_delay": _nan_to_none(self.oos_rate_delay()),
            "oos_rate_queue": self.oos_rate_queue().tolist(),
            "duty": self.duty_cycles(),
            "z_over_t": (s["z"][-1] / t).tolist(),
            "y_over_t": (s["y"][-1] / t).tolist(),
            "delta_final": s["delta"][-1].tolist(),
            "created": self.created.tolist(),
            "delivered": self.delivered.tolist(),
        }

    # persistence

    def stem(self) -> str:
        return f"{config_hash(self.config)}_{self.strategy}_s{self.seed}"

    def save(self, out_dir) -> tuple[Path, Path]:
        """Write ``<hash>_<strategy>_s<seed>.csv`` (per slot) and ``.json`` (aggregates)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / f"{self.stem()}.csv", out / f"{self.stem()}.json"
        k = self.config.n_users
        s = self.series
        header = ["slot", *SCALAR_FIELDS] + [f"{f}_{i}" for f in PER_UE_FIELDS for i in range(k)]
        cols = [np.arange(self.horizon)] + [s[f] for f in SCALAR_FIELDS] + [s[f][:, i] for f in PER_UE_FIELDS
                                                                           for i in range(k)]
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in zip(*(c.tolist() for c in cols)):
                w.writerow([_fmt(v) for v in row])
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.aggregates(), fh, indent=2, sort_keys=True)
        return csv_path, json_path


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float) and v.is_integer() and abs(v) < 1e15:
        return int(v)
    return repr(v) if isinstance(v, float) else v


def _nan_to_none(a):
    return [None if math.isnan(x) else float(x) for x in a]


# ---------------------------------------------------------------------------
# episodes


def run_episode(config: ScenarioConfig, strategy="holistic", horizon: int = 1000, seed: Seed = 0,
                env=None, check: bool = False) -> MetricsLog:
    """Simulate ``horizon`` slots and return the full log.

    ``env`` overrides the random environment (see :class:`ScriptedEnvironment`);
    ``check`` asserts the state and decision invariants after every slot.
    """
    if horizon <= 0:
        raise ValueError("horizon must be a positive number of slots")
    runner = SlotRunner(config, strategy)
    cfg = runner.config
    if env is None:
        _, ch, ar = episode_streams(seed)
        env = SampledEnvironment(cfg, ch, ar)
    state = SlotState.initial(cfg)
    k = cfg.n_users
    s = {f: np.zeros(horizon) for f in SCALAR_FIELDS}
    for f in PER_UE_FIELDS:
        s[f] = np.zeros((horizon, k))
    s["y_events"] = np.zeros((horizon, k), dtype=bool)
    hist = [[] for _ in range(k)]

    for t in range(horizon):
        q_m_before = np.array([len(q) for q in state.q_compute], dtype=float) if check else None
        dec, m = runner.step(state, env)
        if check:
            check_decision(dec, cfg, q_m_before)
            state.check()
        q_l, q_m, q_a = state.counts()
        s["q_l"][t], s["q_m"][t], s["q_a"][t] = q_l, q_m, q_a
        s["z"][t], s["y"][t], s["delta"][t] = state.z, state.y, state.delta
        s["ue_active"][t] = dec.ue_active
        s["e_u_k"][t] = m.e_u
        s["e_u"][t] = m.e_u.sum()
        s["e_a"][t], s["e_m"][t], s["e_tot"][t], s["e_w"][t] = m.e_a, m.e_m, m.e_tot, m.e_w
        s["ap_active"][t], s["es_active"][t], s["f_c"][t] = dec.ap_active, dec.es_active, dec.f_c
        s["n_ul"][t], s["n_comp"][t], s["n_dl"][t] = dec.n_ul.sum(), dec.n_comp.sum(), dec.n_dl.sum()
        s["arrivals"][t] = m.arrivals.sum()
        s["y_events"][t] = m.y_events
        for i, d, c in m.delays:
            hist[i].append((d, c))

    delay_hist = []
    for runs in hist:
        if runs:
            d, c = np.array(runs).T
            delay_hist.append(np.bincount(d, weights=c).astype(np.int64))
        else:
            delay_hist.append(np.zeros(0, dtype=np.int64))
    seed_tag = seed if isinstance(seed, (int, np.integer)) or seed is None else _seed_tag(seed)
    return MetricsLog(cfg, runner.preset.name, seed_tag, s, delay_hist, state.created.copy(),
                      state.delivered.copy())


def _seed_tag(ss: np.random.SeedSequence):
    tag = f"{ss.entropy}"
    if ss.spawn_key:
        tag += "-" + "-".join(map(str, ss.spawn_key))
    return tag


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class RandomizationSpec:
    """Which per-realization parameters are redrawn, and from what ranges.

    ``None`` keeps the template's value.  Bit and cycle parameters are drawn
    as powers of ten with uniformly distributed exponents.
    """

    square_side: Optional[float] = None  # UE positions uniform in a square centred on the AP
    input_bits_exp: Optional[tuple[float, float]] = None  # S_i = 10**x
    output_bits_exp: Optional[tuple[float, float]] = None  # S_o = 10**y
    cycles_exp: Optional[tuple[float, float]] = None  # J = 10**-z
    arrival_rate: Optional[tuple[float, float]] = None

    def apply(self, config: ScenarioConfig, rng: np.random.Generator) -> ScenarioConfig:
        k = config.n_users
        # fixed draw order, so adding a field never shifts the others
        pos = rng.uniform(-0.5, 0.5, size=(k, 2))
        x, y, z, a = (rng.uniform(size=k) for _ in range(4))
        ap = np.asarray(config.ap_position, dtype=float)

        def lerp(rng_, u):
            return rng_[0] + (rng_[1] - rng_[0]) * u

        ues = []
        for i, ue in enumerate(config.ues):
            ch = {}
            if self.square_side is not None:
                ch["position"] = tuple(float(v) for v in ap + self.square_side * pos[i])
            if self.input_bits_exp is not None:
                ch["input_unit_bits"] = float(10 ** lerp(self.input_bits_exp, x[i]))
            if self.output_bits_exp is not None:
                ch["output_unit_bits"] = float(10 ** lerp(self.output_bits_exp, y[i]))
            if self.cycles_exp is not None:
                ch["cycles_per_unit_inv"] = float(10 ** -lerp(self.cycles_exp, z[i]))
            if self.arrival_rate is not None:
                ch["arrival_rate"] = float(lerp(self.arrival_rate, a[i]))
            ues.append(dataclasses.replace(ue, **ch))
        return config.replace(ues=tuple(ues))


def realization_seeds(master: int, n: int) -> list[np.random.SeedSequence]:
    """Per-realization seed sequences: children of ``SeedSequence(master)``."""
    if n <= 0:
        raise ValueError("need at least one realization")
    return np.random.SeedSequence(master).spawn(n)


def run_realization(config: ScenarioConfig, randomization: Optional[RandomizationSpec], strategy,
                    horizon: int, seed: np.random.SeedSequence, keep_log: bool = False):
    """One realization: randomize the scenario from the parameter stream, then run it.

    Strategies sharing a seed see the same scenario, fading and arrivals.
    """
    params_rng, _, _ = episode_streams(seed)
    cfg = randomization.apply(config, params_rng) if randomization is not None else config
    log = run_episode(cfg, strategy, horizon, seed)
    return log if keep_log else log.aggregates()


def _realization_job(args):
    return run_realization(*args)


def run_monte_carlo(config: ScenarioConfig, randomization: Optional[RandomizationSpec] = None,
                    n_realizations: int = 1, strategy="holistic", horizon: int = 1000,
                    master_seed: int = 0, jobs: int = 1) -> "MonteCarloResult":
    seeds = realization_seeds(master_seed, n_realizations)
    args = [(config, randomization, strategy, horizon, s) for s in seeds]
    if jobs > 1 and n_realizations > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1, n_realizations)) as ex:
            runs = list(ex.map(_realization_job, args))
    else:
        runs = [_realization_job(a) for a in args]
    return MonteCarloResult(runs)


def mean_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Sample mean and half-width of the Student-t confidence interval (0 for one sample)."""
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    half = stats.t.ppf(0.5 + level / 2, v.size - 1) * v.std(ddof=1) / math.sqrt(v.size)
    return float(v.mean()), float(half)


@dataclass
class MonteCarloResult:
    runs: list  # aggregate dicts, one per realization, in seed order

    def values(self, key: str) -> np.ndarray:
        out = []
        for r in self.runs:
            v = r
            for part in key.split("."):
                v = v[part]
            out.append(np.nan if v is None else v)
        return np.asarray(out, dtype=float)

    def summary(self, key: str, level: float = 0.95) -> tuple[float, float]:
        return mean_ci(self.values(key), level)
