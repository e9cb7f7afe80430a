"""Tracker hyperparameters: typed defaults, named profiles, file loading, overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    """A config file, override string, or field value is invalid."""


# The dataclass field for the mixing weight is ``lambda_`` because ``lambda``
# is reserved in Python; config files and CLI overrides use the plain name.
_KEY_TO_FIELD = {"lambda": "lambda_"}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}

# Recommended parameter sets for the two deployment styles we ship with:
# "synthehicle" for well-calibrated metric ground planes, "cityflow" for
# GPS-calibrated, weakly synchronized camera networks.
PROFILES: dict[str, dict[str, object]] = {
    "synthehicle": {"lambda": 0.4, "theta_feat": 0.8, "theta_pos": 4.0, "memory": 15},
    "cityflow": {"lambda": 0.9, "theta_feat": 0.7, "theta_pos": 0.001, "memory": 160},
}


@dataclass
class TrackerConfig:
    """Every tunable knob of the tracking engine.

    Instances are immutable by convention once handed to a tracker and are
    safe to share across threads.
    """

    lambda_: float = 0.5          # appearance vs position mixing weight, in [0, 1]
    theta_feat: float = 0.5       # cosine similarity rescale threshold, in (-1, 1)
    theta_pos: float = 4.0        # distance-to-similarity threshold, world units > 0
    delta_pos: float | None = None  # infeasibility distance gate; None = theta_pos
    rho: float = -100.0           # penalty weight assigned to infeasible edges
    alpha_proj: float = 0.85      # bbox height fraction used for ground projection
    ema_gamma: float = 0.9        # retention factor for track aggregates
    beta_decay: float = 0.9       # per-frame similarity decay base for lost tracks
    patience: int = 1             # frames a track stays inactive before lost
    memory: int = 15              # frames a track stays lost before killed
    iou_bias: float = 1.0         # additive bonus for Hungarian-matched edges
    enable_decay: bool = True
    enable_prematch: bool = True
    enable_prune: bool = False
    min_confidence: float = 0.1   # detections below this are dropped
    lost_use_position: bool = True  # keep the positional term for lost tracks

    @property
    def gate_distance(self) -> float:
        """Distance gate for infeasible edges; equals theta_pos when unset."""
        return self.theta_pos if self.delta_pos is None else self.delta_pos

    def validate(self) -> None:
        """Raise ConfigError naming the first field whose value is out of range."""
        checks = [
            ("lambda", 0.0 <= self.lambda_ <= 1.0, "must be within [0, 1]"),
            ("theta_feat", -1.0 < self.theta_feat < 1.0, "must be within (-1, 1)"),
            ("theta_pos", self.theta_pos > 0.0, "must be > 0"),
            ("delta_pos", self.delta_pos is None or self.delta_pos >= 0.0, "must be >= 0"),
            ("rho", self.rho < -1.0, "must be < -1"),
            ("alpha_proj", 0.0 <= self.alpha_proj <= 1.0, "must be within [0, 1]"),
            ("ema_gamma", 0.0 <= self.ema_gamma <= 1.0, "must be within [0, 1]"),
            ("beta_decay", 0.0 < self.beta_decay < 1.0, "must be within (0, 1)"),
            ("patience", self.patience >= 0, "must be >= 0"),
            ("memory", self.memory >= 0, "must be >= 0"),
            ("iou_bias", self.iou_bias >= 0.0, "must be >= 0"),
            ("min_confidence", 0.0 <= self.min_confidence <= 1.0, "must be within [0, 1]"),
        ]
        for key, ok, msg in checks:
            if not ok:
                value = getattr(self, _KEY_TO_FIELD.get(key, key))
                raise ConfigError(f"{key} {msg}, got {value!r}")


def _field_for_key(key: str):
    name = _KEY_TO_FIELD.get(key, key)
    for f in fields(TrackerConfig):
        if f.name == name:
            return f
    raise ConfigError(f"unknown config key {key!r}")


def _parse_value(key: str, raw: str):
    f = _field_for_key(key)
    text = raw.strip()
    if f.name == "delta_pos" and text.lower() in ("none", ""):
        return None
    if f.type in ("bool",):
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"cannot parse {key!r} value {raw!r} as a boolean")
    try:
        if f.type == "int":
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse {key!r} value {raw!r} as a number") from None


def parse_config_text(text: str) -> dict[str, object]:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        values[_field_for_key(key).name] = _parse_value(key, raw)
    return values


def load_config(
    path: str | Path | None = None,
    overrides: list[str] | None = None,
    profile: str | None = None,
) -> TrackerConfig:
    """Build a validated config.

    Precedence, lowest to highest: built-in defaults, named profile, config
    file, ``key=value`` override strings.
    """
    values: dict[str, object] = {}
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(
                f"unknown profile {profile!r}; available: {', '.join(sorted(PROFILES))}"
            )
        for key, val in PROFILES[profile].items():
            values[_KEY_TO_FIELD.get(key, key)] = val
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        values[_field_for_key(key).name] = _parse_value(key, raw)
    config = TrackerConfig(**values)
    config.validate()
    return config


def serialize_config(config: TrackerConfig) -> str:
    """Render a config as the flat key = value format accepted by load_config."""
    lines = []
    for f in fields(TrackerConfig):
        value = getattr(config, f.name)
        if f.name == "delta_pos" and value is None:
            continue
        key = _FIELD_TO_KEY.get(f.name, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def save_config(config: TrackerConfig, path: str | Path) -> None:
    Path(path).write_text(serialize_config(config), encoding="utf-8")
