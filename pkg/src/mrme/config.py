"""Experiment config files: flat INI-style key=value text with sections.

Every knob has a default, and the full effective config is printable so
experiment records stay diff-able. Parse errors carry the section and
field that failed.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .experiment import ExperimentConfig


class ConfigError(Exception):
    """Invalid experiment config; message names the section/field."""


_DEFAULTS = {
    "experiment": {
        "env": "mountain_car",
        "seed": "0",
        "baseline_episodes": "10",
        "teacher_episodes": "5",
        "eval_episodes": "25",
    },
    "model": {
        "n": "3",
        "k": "4",
        "min_match_level": "0",
    },
    "env": {
        "max_steps": "",
    },
}


def default_config_text() -> str:
    lines = []
    for section, entries in _DEFAULTS.items():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in entries.items())
        lines.append("")
    return "\n".join(lines)


def _get(parser: configparser.ConfigParser, section: str, key: str) -> str:
    if parser.has_option(section, key):
        return parser.get(section, key)
    return _DEFAULTS[section][key]


def _get_int(parser, section, key, minimum=None) -> int:
    raw = _get(parser, section, key)
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"[{section}] {key}: must be >= {minimum}, got {value}")
    return value


def parse_config_text(text: str, origin: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None

    for section in parser.sections():
        if section not in _DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _DEFAULTS[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}")

    env_id = _get(parser, "experiment", "env").strip()
    if not env_id:
        raise ConfigError("[experiment] env: missing environment id")
    max_steps_raw = _get(parser, "env", "max_steps").strip()
    max_steps = None
    if max_steps_raw:
        try:
            max_steps = int(max_steps_raw)
        except ValueError:
            raise ConfigError(
                f"[env] max_steps: expected an integer, got {max_steps_raw!r}"
            ) from None
        if max_steps < 1:
            raise ConfigError(f"[env] max_steps: must be >= 1, got {max_steps}")

    try:
        return ExperimentConfig(
            env_id=env_id,
            seed=_get_int(parser, "experiment", "seed", minimum=0),
            baseline_episodes=_get_int(parser, "experiment", "baseline_episodes", minimum=0),
            teacher_episodes=_get_int(parser, "experiment", "teacher_episodes", minimum=0),
            eval_episodes=_get_int(parser, "experiment", "eval_episodes", minimum=0),
            n=_get_int(parser, "model", "n", minimum=0),
            k=_get_int(parser, "model", "k", minimum=0),
            min_match_level=_get_int(parser, "model", "min_match_level", minimum=0),
            max_steps=max_steps,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, origin=str(path))
