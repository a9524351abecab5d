"""Discontinuous computation offloading: a drift-plus-penalty controller and slot simulator.

UEs offload data units to an edge server through an access point; the
controller decides, slot by slot, which of UEs, AP and server sleep, the
uplink/downlink MCS and powers, and the server's CPU frequency and shares.
"""

from .config import (ConfigError, ConstraintSpec, CpuModel, LyapunovConfig, McsScheme, PhyConfig,
                     ScenarioConfig, SlotTiming, UeProfile, ApPowerModel, TxPowerCurve, load, save,
                     validate_config)
from .control import PRESETS, StrategyPreset, get_preset
from .sim import MetricsLog, RandomizationSpec, run_episode, run_monte_carlo, run_slot
from .solver import solve_cpu, solve_radio, solve_slot

__version__ = "0.1.0"
