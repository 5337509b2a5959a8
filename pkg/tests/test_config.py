import pytest

from ris_mimo.config import (
    ConfigError,
    FadingVariant,
    ScenarioConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    dump_config,
    load_config,
)


def test_defaults_are_desk_scale():
    cfg = ScenarioConfig()
    assert (cfg.M, cfg.N, cfg.L, cfg.K, cfg.R) == (32, 64, 2, 4, 4)
    assert cfg.tau_p == 9 * 4
    assert cfg.ris_grid == (8, 8)


def test_paper_scale_pilot_length():
    cfg = ScenarioConfig.paper_scale()
    assert cfg.tau_p == 330
    assert cfg.ris_grid == (16, 16)


def test_conventional_pilot_length():
    cfg = ScenarioConfig(K=10, fading_variant="conventional")
    assert cfg.tau_p == 200
    assert not cfg.uses_ris


def test_noise_power_from_bandwidth_and_figure():
    cfg = ScenarioConfig()
    dbm = -174 + 60 + 7
    assert cfg.noise_power == pytest.approx(10 ** ((dbm - 30) / 10))
    assert ScenarioConfig(sigma2=2.5).noise_power == 2.5


@pytest.mark.parametrize("bad", [
    dict(R=3),
    dict(R=128),
    dict(eta=0.0),
    dict(p_max=-1.0),
    dict(sigma2=0.0),
    dict(tau_c=36),
    dict(L=1),
    dict(correlation="exact"),
    dict(ris_shape=(4, 4)),
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig(**bad)


def test_yaml_round_trip(tmp_path):
    cfg = ScenarioConfig(K=3, seed=7, fading_variant=FadingVariant.ALWAYS_LOS_S3)
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    back = load_config(path)
    assert config_to_dict(back) == config_to_dict(cfg)
    assert back.fading_variant is FadingVariant.ALWAYS_LOS_S3


def test_overrides_parse_nested_values():
    data = apply_overrides({"trials": {"drops": 3}}, ["trials.blocks=12", "M=8", "estimator=ls"])
    cfg = config_from_dict(data)
    assert cfg.trials.drops == 3 and cfg.trials.blocks == 12
    assert cfg.M == 8 and cfg.estimator == "ls"


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"antennas": 4})
    with pytest.raises(ConfigError):
        config_from_dict({"trials": {"runs": 2}})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
