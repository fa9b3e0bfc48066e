"""Run-config parsing: defaults, typing, unknown keys."""

import pytest

from ucmnet.config import (ConfigError, RunConfig, default_config_text,
                           load_config, parse_config_text)


def test_defaults_match_recipe():
    cfg = RunConfig()
    assert cfg.lr == 1e-3
    assert cfg.weight_decay == 1e-2
    assert cfg.t_max == 50
    assert cfg.eta_min == 1e-5
    assert cfg.epochs == 300
    assert cfg.batch_size == 8
    assert cfg.eval_batch == 1
    assert cfg.input_size == (256, 256)
    assert cfg.channels == [8, 16, 24, 32, 48, 64]
    assert cfg.stage_weights == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert cfg.block_kind == "variant_c_ucm"
    assert cfg.base_loss == "bce_squared_dice"
    assert cfg.smooth == 1.0
    assert cfg.threshold == 0.5


def test_parse_overrides():
    cfg = parse_config_text("""
# comment line
lr = 0.01
epochs = 5
channels = 4, 8, 12, 16, 24, 32
input_size = 64
deep_supervision = false
stage_weights = 0.5,0.4,0.3,0.2,0.1
manifest = data/m.csv
""")
    assert cfg.lr == 0.01
    assert cfg.epochs == 5
    assert cfg.channels == [4, 8, 12, 16, 24, 32]
    assert cfg.input_size == (64, 64)
    assert cfg.deep_supervision is False
    assert cfg.stage_weights == [0.5, 0.4, 0.3, 0.2, 0.1]
    assert cfg.manifest == "data/m.csv"


def test_input_size_hxw():
    cfg = parse_config_text("input_size = 64x96\n")
    assert cfg.input_size == (64, 96)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("learning_rate = 0.1\n")


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("epochs = many\n")
    with pytest.raises(ConfigError):
        parse_config_text("augment = perhaps\n")
    with pytest.raises(ConfigError):
        parse_config_text("just a line\n")


def test_default_text_roundtrip():
    text = default_config_text()
    cfg = parse_config_text(text)
    assert cfg == RunConfig()


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.cfg"))


def test_sub_config_builders():
    cfg = parse_config_text("input_size = 64\n")
    net = cfg.network_config()
    assert net.input_size == (64, 64)
    assert net.stage_channels == [8, 16, 24, 32, 48, 64]
    loss = cfg.loss_config()
    assert loss.stage_weights == [0.1, 0.2, 0.3, 0.4, 0.5]
    tr = cfg.train_config()
    assert tr.epochs == 300 and tr.t_max == 50


def test_augmentation_knobs_propagate():
    cfg = parse_config_text("hflip_p = 0.25\nvflip_p = 0\nrotation_degrees = 90\n"
                            "eval_batch = 2\n")
    tr = cfg.train_config()
    assert tr.hflip_p == 0.25 and tr.vflip_p == 0.0
    assert tr.rotation_degrees == 90.0
    assert tr.eval_batch == 2
