import json

import numpy as np
import pytest

from disco.config import (ConfigError, ConstraintSpec, LyapunovConfig, ScenarioConfig, SlotTiming, UeProfile,
                          apply_overrides, config_hash, default_mcs_set, dumps, from_dict, load, save, to_dict,
                          validate_config)


def test_slot_timing_defaults():
    t = SlotTiming()
    assert t.tau_l == pytest.approx(0.010)
    assert t.tau_s == 0.001 and t.tau == 0.009


def test_holistic_weights_accepted():
    cfg = ScenarioConfig(lyapunov=LyapunovConfig(v=5e6, alphas=(1 / 3, 1 / 3, 1 / 3)))
    assert validate_config(cfg) is cfg


def test_weights_not_summing_to_one_rejected():
    cfg = ScenarioConfig(lyapunov=LyapunovConfig(alphas=(0.5, 0.6, 0.0)))
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert any(p.startswith("lyapunov.alphas") for p in err.value.problems)


def test_q_avg_in_units():
    cfg = ScenarioConfig(ues=(UeProfile(arrival_rate=5, constraint=ConstraintSpec(d_avg=0.1)),))
    assert cfg.q_avg[0] == pytest.approx(50.0)


def test_every_violation_reported_with_path():
    bad = ScenarioConfig(
        ues=(UeProfile(p_sleep=2.0, constraint=ConstraintSpec(epsilon=1.5)),),
        lyapunov=LyapunovConfig(v=-1, delta_init=(0.5,)),
        strategy="nope",
    )
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    paths = {p.split(":")[0] for p in err.value.problems}
    assert {"ues[0]", "ues[0].constraint.epsilon", "lyapunov.v", "lyapunov.delta_init", "strategy"} <= paths


def test_default_mcs_set_has_28_schemes():
    s = default_mcs_set()
    assert len(s) == 28
    assert {m.modulation_order for m in s} == {4, 16, 64, 256}


def test_round_trip_through_file(tmp_path):
    cfg = ScenarioConfig(ues=(UeProfile(arrival_rate=7, position=(10.0, -3.0), arrival_max=40),
                              UeProfile(constraint=ConstraintSpec(d_max=0.12))),
                         lyapunov=LyapunovConfig(delta_init=(1.5, 1.6), adapt_delta=True))
    path = tmp_path / "cfg.json"
    save(cfg, path)
    back = load(path)
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)
    save(back, path)
    assert dumps(load(path)) == dumps(back)


def test_unknown_keys_rejected():
    data = to_dict(ScenarioConfig())
    data["ues"][0]["colour"] = "red"
    with pytest.raises(Exception, match=r"ues\[0\]\.colour"):
        from_dict(data)


def test_overrides_by_dotted_path():
    data = to_dict(ScenarioConfig(ues=(UeProfile(), UeProfile())))
    data = apply_overrides(data, ["lyapunov.v=1e6", "ues.1.arrival_rate=12", "ues.*.constraint.mu=20"])
    cfg = from_dict(data)
    assert cfg.lyapunov.v == 1e6
    assert cfg.ues[1].arrival_rate == 12
    assert all(u.constraint.mu == 20 for u in cfg.ues)


def test_mcs_pairs_accepted_in_json():
    data = to_dict(ScenarioConfig())
    data["mcs_ul"] = [[4, 0.5], [16, 0.5]]
    cfg = from_dict(json.loads(json.dumps(data)))
    assert [m.modulation_order for m in cfg.mcs_ul] == [4, 16]


def test_hash_changes_with_content():
    a = ScenarioConfig()
    b = a.replace(lyapunov=LyapunovConfig(v=1.0))
    assert config_hash(a) != config_hash(b)


def test_arrays_columns():
    cfg = ScenarioConfig(ues=(UeProfile(input_unit_bits=300), UeProfile(input_unit_bits=700)))
    np.testing.assert_array_equal(cfg.arrays.s_in, [300, 700])
    # per-UE transmit curve, vectorised over rows
    p = np.array([[0.0, 0.01, 0.1], [0.0, 0.005, 0.07]])
    np.testing.assert_allclose(cfg.arrays.tx_consumed(p), [[0, 0.1, 1.45], [0, 0.05, 1.0]])
