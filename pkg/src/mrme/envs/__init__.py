"""Bundled environments and their scripted teachers."""

from __future__ import annotations

from typing import Callable

from .base import DT, EnvSpec, RENDER_SCHEMA_VERSION, StepResult
from .lander import SimpleLander, pd_teacher
from .mountain_car import MountainCar, action_quality, energy_teacher

ENV_IDS = ("mountain_car", "lander")


def make_env(env_id: str, max_steps: int | None = None):
    """Instantiate a bundled environment by id."""
    if env_id == "mountain_car":
        return MountainCar(**({"max_steps": max_steps} if max_steps else {}))
    if env_id == "lander":
        return SimpleLander(**({"max_steps": max_steps} if max_steps else {}))
    raise ValueError(f"unknown env id {env_id!r}; known: {', '.join(ENV_IDS)}")


def teacher_for(env_id: str) -> Callable[[tuple], tuple]:
    if env_id == "mountain_car":
        return energy_teacher
    if env_id == "lander":
        return pd_teacher
    raise ValueError(f"no teacher for env {env_id!r}")


def action_quality_for(env_id: str) -> Callable[[tuple, tuple], str] | None:
    """Per-step action judge, or None when the env defines no quality notion."""
    if env_id == "mountain_car":
        return action_quality
    return None


__all__ = [
    "DT",
    "ENV_IDS",
    "EnvSpec",
    "MountainCar",
    "RENDER_SCHEMA_VERSION",
    "SimpleLander",
    "StepResult",
    "action_quality",
    "action_quality_for",
    "energy_teacher",
    "make_env",
    "pd_teacher",
    "teacher_for",
]
