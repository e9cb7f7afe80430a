"""Config parsing, validation, profiles, and precedence."""

import pytest

from stmc.config import (
    PROFILES,
    ConfigError,
    TrackerConfig,
    load_config,
    parse_config_text,
    save_config,
    serialize_config,
)


def test_defaults_are_valid():
    TrackerConfig().validate()


def test_gate_distance_defaults_to_theta_pos():
    assert TrackerConfig().gate_distance == 4.0
    assert TrackerConfig(theta_pos=2.5).gate_distance == 2.5
    assert TrackerConfig(delta_pos=7.0).gate_distance == 7.0


def test_mixing_weight_out_of_range_names_key_and_interval():
    with pytest.raises(ConfigError) as err:
        load_config(overrides=["lambda=1.5"])
    assert "lambda" in str(err.value)
    assert "[0, 1]" in str(err.value)


@pytest.mark.parametrize(
    "key,value",
    [
        ("lambda", "-0.1"),
        ("theta_feat", "1.0"),
        ("theta_feat", "-1.0"),
        ("theta_pos", "0"),
        ("delta_pos", "-2"),
        ("rho", "-1.0"),
        ("rho", "3"),
        ("alpha_proj", "1.5"),
        ("ema_gamma", "-0.1"),
        ("beta_decay", "1.0"),
        ("beta_decay", "0"),
        ("patience", "-1"),
        ("memory", "-1"),
        ("iou_bias", "-0.5"),
        ("min_confidence", "2"),
    ],
)
def test_each_out_of_range_value_is_rejected_naming_the_key(key, value):
    with pytest.raises(ConfigError) as err:
        load_config(overrides=[f"{key}={value}"])
    assert key in str(err.value)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config(overrides=["warp_speed=9"])


def test_unknown_profile_lists_available():
    with pytest.raises(ConfigError) as err:
        load_config(profile="nope")
    assert "cityflow" in str(err.value)
    assert "synthehicle" in str(err.value)


def test_parse_config_text_comments_blanks_and_types():
    text = """
    # tuning for the unit tests
    lambda = 0.4      # mixing
    theta_pos = 2.0
    memory = 20
    enable_decay = false
    delta_pos = none
    """
    values = parse_config_text(text)
    assert values == {
        "lambda_": 0.4,
        "theta_pos": 2.0,
        "memory": 20,
        "enable_decay": False,
        "delta_pos": None,
    }
    assert isinstance(values["memory"], int)


def test_parse_config_text_line_errors():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("lambda = 0.4\nthis is not an assignment\n")
    with pytest.raises(ConfigError, match="boolean"):
        parse_config_text("enable_decay = maybe")
    with pytest.raises(ConfigError, match="number"):
        parse_config_text("theta_pos = fast")


@pytest.mark.parametrize("raw,expected", [("true", True), ("1", True), ("yes", True),
                                          ("on", True), ("false", False), ("0", False),
                                          ("no", False), ("off", False)])
def test_boolean_spellings(raw, expected):
    assert parse_config_text(f"enable_prune = {raw}") == {"enable_prune": expected}


def test_profiles_pin_their_documented_values():
    synth = load_config(profile="synthehicle")
    assert (synth.lambda_, synth.theta_feat, synth.theta_pos, synth.memory) == (0.4, 0.8, 4.0, 15)
    city = load_config(profile="cityflow")
    assert (city.lambda_, city.theta_feat, city.theta_pos, city.memory) == (0.9, 0.7, 0.001, 160)
    assert set(PROFILES) == {"synthehicle", "cityflow"}


def test_precedence_defaults_profile_file_overrides(tmp_path):
    path = tmp_path / "tracker.cfg"
    path.write_text("theta_feat = 0.6\nmemory = 99\n", encoding="utf-8")
    config = load_config(path=path, overrides=["memory=7"], profile="synthehicle")
    assert config.lambda_ == 0.4        # from the profile
    assert config.theta_feat == 0.6     # file beats profile
    assert config.memory == 7           # override beats file
    assert config.theta_pos == 4.0      # profile beats defaults


def test_serialize_roundtrip(tmp_path):
    config = TrackerConfig(lambda_=0.25, theta_pos=1.5, memory=42,
                           enable_prune=True, min_confidence=0.0)
    path = tmp_path / "out.cfg"
    save_config(config, path)
    assert load_config(path=path) == config


def test_serialize_omits_unset_gate_and_keeps_set_gate():
    assert "delta_pos" not in serialize_config(TrackerConfig())
    text = serialize_config(TrackerConfig(delta_pos=3.0))
    assert "delta_pos = 3.0" in text
    assert "lambda = " in text  # the reserved-word field uses the plain key


def test_override_without_equals_sign():
    with pytest.raises(ConfigError, match="key=value"):
        load_config(overrides=["memory"])
