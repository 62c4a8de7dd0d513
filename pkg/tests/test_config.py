import json

import pytest
from hypothesis import given, settings, strategies as st

from wavec.cli import config_from_args, make_parser
from wavec.config import BuildConfig, merge_config

DEFAULT = BuildConfig()

depths = st.integers(1, 12)
caps = st.integers(1, 8)
seeds = st.integers(0, 1000)
stalls = st.sampled_from(["none", "random", "scripted"])
cycles = st.integers(100, 10_000)
const_maps = st.dictionaries(st.sampled_from(["N", "SIZE", "L", "T"]), st.integers(1, 64), max_size=3)
latency_maps = st.dictionaries(st.sampled_from(["fadd", "fmul", "imul"]), st.integers(1, 8), max_size=2)


def layer():
    return st.fixed_dictionaries({}, optional={
        "logic_depth": depths, "fifo_capacity": caps, "seed": seeds, "stall": stalls, "max_cycles": cycles,
        "consts": const_maps, "latency": latency_maps,
    })


def argv_for(over: dict, config_path: str | None) -> list[str]:
    argv = ["sim", "ordering"]
    if config_path:
        argv += ["--config", config_path]
    flag = {"logic_depth": "-D", "fifo_capacity": "--fifo-cap", "seed": "--seed", "stall": "--stall",
            "max_cycles": "--max-cycles"}
    for k, f in flag.items():
        if k in over:
            argv += [f, str(over[k])]
    for k, v in over.get("consts", {}).items():
        argv += ["--const", f"{k}={v}"]
    for k, v in over.get("latency", {}).items():
        argv += ["--latency", f"{k}={v}"]
    return argv


@settings(max_examples=80, deadline=None)
@given(layer(), layer())
def test_flag_beats_file_beats_default(tmp_path_factory, file_layer, flag_layer):
    path = tmp_path_factory.mktemp("cfg") / "c.json"
    path.write_text(json.dumps({"schema": 1, **file_layer}))
    cfg = config_from_args(make_parser().parse_args(argv_for(flag_layer, str(path))))
    for k in ("logic_depth", "fifo_capacity", "seed", "stall", "max_cycles"):
        want = flag_layer.get(k, file_layer.get(k, getattr(DEFAULT, k)))
        assert getattr(cfg, k) == want, k
    for k in ("consts", "latency"):
        assert getattr(cfg, k) == {**file_layer.get(k, {}), **flag_layer.get(k, {})}


@settings(max_examples=40, deadline=None)
@given(layer(), layer())
def test_merge_is_layered(file_layer, over):
    cfg = merge_config(file_layer, over)
    assert cfg.logic_depth == over.get("logic_depth", file_layer.get("logic_depth", DEFAULT.logic_depth))
    assert cfg.consts == {**file_layer.get("consts", {}), **over.get("consts", {})}


def test_none_means_not_given():
    assert merge_config({"logic_depth": 3}, {"logic_depth": None}).logic_depth == 3


def test_json_round_trip():
    cfg = BuildConfig(logic_depth=4, latency={"fadd": 2}, consts={"N": 8}, stall="random", seed=5)
    d = cfg.to_json()
    assert d["schema"] == 1
    assert BuildConfig.from_json(json.loads(json.dumps(d))) == cfg


@pytest.mark.parametrize("bad", [
    {"stall": "sometimes"}, {"logic_depth": 0}, {"fifo_capacity": 0}, {"latency": {"fsqrt": 2}},
])
def test_invalid_values_are_rejected(bad):
    with pytest.raises(ValueError):
        merge_config(bad, None)


def test_unknown_keys_are_rejected():
    with pytest.raises(ValueError):
        merge_config({"colour": "blue"}, None)
    with pytest.raises(ValueError):
        BuildConfig.from_json({"schema": 1, "colour": "blue"})


def test_stall_policies():
    assert not BuildConfig().stall_policy().stalled(0, "BB0", 0)
    scripted = BuildConfig(stall="scripted", stall_script=[[3, "BB1"], [5, "BB2", 1]]).stall_policy()
    assert scripted.stalled(3, "BB1", 0) and scripted.stalled(5, "BB2", 1)
    assert not scripted.stalled(5, "BB2", 0)
    a = BuildConfig(stall="random", seed=9, stall_p=0.5).stall_policy()
    b = BuildConfig(stall="random", seed=9, stall_p=0.5).stall_policy()
    assert [a.stalled(c, "n", 0) for c in range(50)] == [b.stalled(c, "n", 0) for c in range(50)]
