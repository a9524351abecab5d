"""Ready-made scenario templates for the reference experiments.

Each builder returns a ``ScenarioConfig`` template plus, where parameters are
drawn per realization, the matching ``RandomizationSpec``.
"""

from __future__ import annotations

import dataclasses

from .config import ConstraintSpec, LyapunovConfig, ScenarioConfig, UeProfile
from .sim import RandomizationSpec

SQUARE_SIDE = 150.0


def _ues(k, *, d_avg=0.1, d_max=0.25, epsilon=1e-2, mu=10.0, arrival_rate=5.0, **ue_fields):
    """K identical UEs; list-valued d_avg/d_max give per-UE values."""
    def pick(v, i):
        return v[i] if isinstance(v, (list, tuple)) else v

    return tuple(
        UeProfile(arrival_rate=pick(arrival_rate, i),
                  constraint=ConstraintSpec(d_avg=pick(d_avg, i), d_max=pick(d_max, i), epsilon=epsilon, mu=mu),
                  **{f: pick(v, i) for f, v in ue_fields.items()})
        for i in range(k)
    )


def tradeoff(v: float = 5e6, alphas=(1 / 3, 1 / 3, 1 / 3)) -> tuple[ScenarioConfig, RandomizationSpec]:
    """Five UEs, 100 ms average delay, fixed thresholds 1.5..1.9, equal bandwidth."""
    cfg = ScenarioConfig(
        ues=_ues(5, d_avg=0.1),
        lyapunov=LyapunovConfig(v=v, alphas=alphas, delta_init=(1.5, 1.6, 1.7, 1.8, 1.9)),
    )
    rnd = RandomizationSpec(square_side=SQUARE_SIDE, input_bits_exp=(2, 3), output_bits_exp=(1, 3),
                            cycles_exp=(2, 5), arrival_rate=(5, 15))
    return cfg, rnd


def reliability(v: float = 5e6) -> tuple[ScenarioConfig, RandomizationSpec]:
    """Four UEs with decreasing D_max and adaptive thresholds starting at 1.

    Only the UE positions are drawn per realization.
    """
    cfg = ScenarioConfig(
        ues=_ues(4, d_avg=0.1, d_max=(0.25, 0.2, 0.15, 0.12), epsilon=1e-3, mu=20.0, arrival_rate=5.0,
                 input_unit_bits=1000.0, output_unit_bits=100.0, cycles_per_unit_inv=1e-4),
        lyapunov=LyapunovConfig(v=v, delta_init=(1.0,), nu_init=(15.0, 5.0, 4.0, 3.0), beta=0.5,
                                window_max=10_000, adapt_delta=True),
    )
    return cfg, RandomizationSpec(square_side=SQUARE_SIDE)


def comparison(v: float = 5e7) -> tuple[ScenarioConfig, RandomizationSpec]:
    """Ten UEs with staggered delay targets and thresholds, for strategy comparisons."""
    d_avg = tuple(0.08 + 0.005 * i for i in range(10))
    cfg = ScenarioConfig(
        ues=_ues(10, d_avg=d_avg),
        lyapunov=LyapunovConfig(v=v, delta_init=tuple(1.5 + 0.1 * i for i in range(10))),
    )
    rnd = RandomizationSpec(square_side=SQUARE_SIDE, input_bits_exp=(1, 3), output_bits_exp=(1, 3),
                            cycles_exp=(2, 5), arrival_rate=(1, 20))
    return cfg, rnd


def arrival_load(arrival_rate: float, v: float = 5e7, n_users: int = 15) -> tuple[ScenarioConfig, RandomizationSpec]:
    """Fifteen UEs sharing one arrival rate; sizes, J and positions drawn per realization."""
    cfg = ScenarioConfig(
        ues=_ues(n_users, d_avg=0.1, arrival_rate=arrival_rate),
        lyapunov=LyapunovConfig(v=v, delta_init=(2.0,)),
    )
    rnd = RandomizationSpec(square_side=SQUARE_SIDE, input_bits_exp=(2, 3), output_bits_exp=(1, 3),
                            cycles_exp=(2, 5))
    return cfg, rnd


def with_v(config: ScenarioConfig, v: float) -> ScenarioConfig:
    return config.replace(lyapunov=dataclasses.replace(config.lyapunov, v=v))


def with_arrival_rate(config: ScenarioConfig, rate: float) -> ScenarioConfig:
    return config.replace(ues=tuple(dataclasses.replace(u, arrival_rate=rate) for u in config.ues))


TEMPLATES = {
    "tradeoff": tradeoff,
    "reliability": reliability,
    "comparison": comparison,
    "arrival_load": lambda: arrival_load(10.0),
}
