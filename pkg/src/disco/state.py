"""Mutable per-run state and the per-slot control action."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .config import ScenarioConfig


class DataUnit(NamedTuple):
    owner: int
    birth_slot: int


class UnitQueue:
    """FIFO of data units, stored as runs of units sharing a birth slot.

    Units born in the same slot are indistinguishable for delay purposes, so a
    run ``[birth, count]`` stands for ``count`` consecutive units.
    """

    __slots__ = ("owner", "_runs", "_n")

    def __init__(self, owner: int = 0):
        self.owner = owner
        self._runs: deque[list[int]] = deque()
        self._n = 0

    def __len__(self) -> int:
        return self._n

    def push(self, birth_slot: int, count: int) -> None:
        if count <= 0:
            return
        if self._runs and self._runs[-1][0] == birth_slot:
            self._runs[-1][1] += count
        else:
            self._runs.append([birth_slot, count])
        self._n += count

    def extend(self, runs) -> None:
        for birth, count in runs:
            self.push(birth, count)

    def pop(self, n: int) -> list[tuple[int, int]]:
        """Remove the ``min(n, len)`` oldest units; return them as (birth, count) runs."""
        out = []
        need = min(int(n), self._n)
        self._n -= need
        runs = self._runs
        while need > 0:
            head = runs[0]
            if head[1] <= need:
                runs.popleft()
                out.append((head[0], head[1]))
                need -= head[1]
            else:
                head[1] -= need
                out.append((head[0], need))
                need = 0
        return out

    def runs(self) -> list[tuple[int, int]]:
        return [(b, c) for b, c in self._runs]

    def units(self) -> Iterator[DataUnit]:
        for birth, count in self._runs:
            for _ in range(count):
                yield DataUnit(self.owner, birth)

    def check(self) -> None:
        assert self._n == sum(c for _, c in self._runs), "count does not match FIFO contents"
        births = [b for b, _ in self._runs]
        assert births == sorted(births), "FIFO order broken"
        assert all(c > 0 for _, c in self._runs)


class DelayWindow:
    """The most recent ``size`` delivered-unit delays of one UE (in slots).

    Keeps a running count of delays above ``threshold_slots`` so the
    out-of-service fraction is O(1) per query.
    """

    __slots__ = ("size", "threshold_slots", "_runs", "_n", "_exceed")

    def __init__(self, size: int, threshold_slots: int):
        self.size = int(size)
        self.threshold_slots = int(threshold_slots)
        self._runs: deque[list[int]] = deque()
        self._n = 0
        self._exceed = 0

    def __len__(self) -> int:
        return self._n

    def add(self, delay_slots: int, count: int = 1) -> None:
        if count <= 0:
            return
        count = min(count, self.size)
        self._runs.append([delay_slots, count])
        self._n += count
        if delay_slots > self.threshold_slots:
            self._exceed += count
        excess = self._n - self.size
        while excess > 0:
            head = self._runs[0]
            drop = min(head[1], excess)
            head[1] -= drop
            if head[0] > self.threshold_slots:
                self._exceed -= drop
            if head[1] == 0:
                self._runs.popleft()
            self._n -= drop
            excess -= drop

    def oos_probability(self) -> float:
        return self._exceed / self._n if self._n else 0.0

    def delays(self) -> list[int]:
        out = []
        for d, c in self._runs:
            out.extend([d] * c)
        return out


def threshold_in_slots(d_max: float, tau_l: float) -> int:
    """Largest whole number of slots not exceeding d_max."""
    return int(math.floor(d_max / tau_l + 1e-9))


@dataclass
class SlotState:
    t: int
    q_local: list[UnitQueue]
    q_compute: list[UnitQueue]
    q_result: list[UnitQueue]
    z: np.ndarray
    y: np.ndarray
    delta: np.ndarray
    gain_ul: np.ndarray
    gain_dl: np.ndarray
    windows: list[DelayWindow]
    created: np.ndarray = field(default=None)
    delivered: np.ndarray = field(default=None)

    @classmethod
    def initial(cls, config: ScenarioConfig) -> "SlotState":
        k = config.n_users
        tau_l = config.timing.tau_l
        windows = [DelayWindow(config.lyapunov.window_max, threshold_in_slots(u.constraint.d_max, tau_l))
                   for u in config.ues]
        return cls(
            t=0,
            q_local=[UnitQueue(i) for i in range(k)],
            q_compute=[UnitQueue(i) for i in range(k)],
            q_result=[UnitQueue(i) for i in range(k)],
            z=np.zeros(k),
            y=np.zeros(k),
            delta=config.delta_init.copy(),
            gain_ul=np.ones(k),
            gain_dl=np.ones(k),
            windows=windows,
            created=np.zeros(k, dtype=np.int64),
            delivered=np.zeros(k, dtype=np.int64),
        )

    @property
    def n_users(self) -> int:
        return len(self.q_local)

    def counts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.array([len(q) for q in self.q_local], dtype=float),
                np.array([len(q) for q in self.q_compute], dtype=float),
                np.array([len(q) for q in self.q_result], dtype=float))

    def check(self) -> None:
        for q in (*self.q_local, *self.q_compute, *self.q_result):
            q.check()
        assert np.all(self.z >= 0) and np.all(self.y >= 0)
        assert np.all(self.delta >= 1)
        ql, qm, qa = self.counts()
        assert np.array_equal(self.created, ql + qm + qa + self.delivered), "unit conservation violated"


@dataclass
class Decision:
    """One slot's control action.

    ``mcs_ul``/``mcs_dl`` are indices into the configured MCS sets, -1 when the
    UE does not transmit/receive in that direction.
    """

    ap_active: bool
    es_active: bool
    f_c: float
    ue_active: np.ndarray
    mcs_ul: np.ndarray
    p_tx: np.ndarray
    n_ul: np.ndarray
    mcs_dl: np.ndarray
    p_dl: np.ndarray
    n_dl: np.ndarray
    f_k: np.ndarray
    n_comp: np.ndarray

    @classmethod
    def idle(cls, k: int) -> "Decision":
        z = np.zeros(k)
        return cls(False, False, 0.0, np.zeros(k, dtype=bool), np.full(k, -1), z.copy(), z.copy(),
                   np.full(k, -1), z.copy(), z.copy(), z.copy(), z.copy())


def check_decision(dec: Decision, config: ScenarioConfig, q_compute: Optional[np.ndarray] = None) -> None:
    """Assert every structural invariant of a control action.

    With ``q_compute`` given, the per-UE CPU cap f_k <= (Q_m+1)/(tau J_k) is checked too.
    """
    arr = config.arrays
    k = config.n_users
    tol = 1e-9
    if not dec.ap_active:
        assert not np.any(dec.ue_active), "UE active while AP sleeps"
        assert np.all(dec.n_ul == 0) and np.all(dec.n_dl == 0), "traffic while AP sleeps"
        assert np.all(dec.p_tx == 0) and np.all(dec.p_dl == 0), "power while AP sleeps"
    off = ~dec.ue_active.astype(bool)
    assert np.all(dec.n_ul[off] == 0) and np.all(dec.n_dl[off] == 0), "traffic for a sleeping UE"
    assert np.all(dec.p_tx[off] == 0) and np.all(dec.p_dl[off] == 0), "power for a sleeping UE"
    assert np.all((dec.mcs_ul >= 0) | (dec.p_tx == 0)) and np.all((dec.mcs_dl >= 0) | (dec.p_dl == 0))
    assert dec.es_active == (dec.f_c > 0), "ES flag inconsistent with f_c"
    assert np.any(np.isclose(config.cpu.freq_set, dec.f_c, rtol=1e-12, atol=0)), "f_c not in F"
    assert np.all(dec.f_k >= 0) and dec.f_k.sum() <= dec.f_c * (1 + tol) + tol, "CPU over-allocated"
    assert np.all(dec.p_tx >= 0) and np.all(dec.p_tx <= arr.p_tx_max * (1 + tol)), "UE power budget"
    assert np.all(dec.p_dl >= 0) and np.all(dec.p_dl <= config.ap.p_dl_max / k * (1 + tol)), "per-UE DL budget"
    assert dec.p_dl.sum() <= config.ap.p_dl_max * (1 + tol), "AP power budget"
    if q_compute is not None:
        cap = (q_compute + 1) / (config.timing.tau * arr.j)
        assert np.all(dec.f_k <= cap * (1 + tol) + tol), "f_k above the queue-backlog cap"
