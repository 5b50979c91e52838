"""Mountain Car with the standard classic-control dynamics.

    v' = v + 0.001*(action - 1) - 0.0025*cos(3*p)
    p' = p + v'

Position and velocity are clamped to their bounds after every step and
velocity zeroes at the left wall. Solved when position reaches 0.5.
Trivial for a human, and each action has a judgeable quality: pushing
along the current velocity adds mechanical energy to the car.
"""

from __future__ import annotations

import math

import numpy as np

from ..episode import Terminal
from ..spaces import Continuous, Discrete, SpaceSpec
from .base import EnvSpec, StepResult, circle, line, polygon, text

POSITION_MIN = -1.2
POSITION_MAX = 0.6
VELOCITY_MAX = 0.07
GOAL_POSITION = 0.5
FORCE = 0.001
GRAVITY = 0.0025
DEFAULT_MAX_STEPS = 200

ACTION_LEFT, ACTION_NONE, ACTION_RIGHT = 0, 1, 2

OBSERVATION_SPACE = SpaceSpec(
    (Continuous(POSITION_MIN, POSITION_MAX), Continuous(-VELOCITY_MAX, VELOCITY_MAX))
)
ACTION_SPACE = SpaceSpec((Discrete(3),))


class MountainCar:
    """Deterministic, seedable Mountain Car."""

    def __init__(self, max_steps: int = DEFAULT_MAX_STEPS) -> None:
        self.spec = EnvSpec(
            id="mountain_car",
            observation=OBSERVATION_SPACE,
            action=ACTION_SPACE,
            max_steps=max_steps,
            solve_predicate=f"position >= {GOAL_POSITION}",
        )
        self.idle_action = (ACTION_NONE,)
        self.position = 0.0
        self.velocity = 0.0
        self.steps = 0

    def reset(self, seed: int) -> tuple:
        rng = np.random.default_rng(seed)
        self.position = float(rng.uniform(-0.6, -0.4))
        self.velocity = 0.0
        self.steps = 0
        return self._obs()

    def _obs(self) -> tuple:
        return (self.position, self.velocity)

    @property
    def state(self) -> tuple:
        return self._obs()

    def step(self, action: tuple) -> StepResult:
        (a,) = action
        if a not in (ACTION_LEFT, ACTION_NONE, ACTION_RIGHT):
            raise ValueError(f"invalid action {action!r}")
        v = self.velocity + FORCE * (a - 1) - GRAVITY * math.cos(3.0 * self.position)
        v = min(max(v, -VELOCITY_MAX), VELOCITY_MAX)
        p = self.position + v
        p = min(max(p, POSITION_MIN), POSITION_MAX)
        if p == POSITION_MIN and v < 0.0:
            v = 0.0
        self.position, self.velocity = p, v
        self.steps += 1
        if p >= GOAL_POSITION:
            return StepResult(self._obs(), -1.0, True, Terminal.SOLVED)
        if self.steps >= self.spec.max_steps:
            return StepResult(self._obs(), -1.0, True, Terminal.TRUNCATED)
        return StepResult(self._obs(), -1.0, False, None)

    def render(self) -> list[dict]:
        shapes = [line(0.0, 0.78, 1.0, 0.78, "#20242c", 0.002)]
        pts = []
        for i in range(33):
            px = POSITION_MIN + (POSITION_MAX - POSITION_MIN) * i / 32
            pts.append((self._nx(px), self._ny(math.sin(3.0 * px))))
        for a, b in zip(pts, pts[1:]):
            shapes.append(line(a[0], a[1], b[0], b[1], "#5c6470"))
        gx = self._nx(GOAL_POSITION)
        gy = self._ny(math.sin(3.0 * GOAL_POSITION))
        shapes.append(line(gx, gy, gx, gy - 0.08, "#888888"))
        shapes.append(polygon([(gx, gy - 0.08), (gx + 0.03, gy - 0.065), (gx, gy - 0.05)], "#d8b400"))
        shapes.append(circle(self._nx(self.position), self._ny(math.sin(3.0 * self.position)) - 0.015, 0.015, "#4ea1ff"))
        shapes.append(text(0.02, 0.06, f"p={self.position:+.3f} v={self.velocity:+.4f}"))
        return shapes

    @staticmethod
    def _nx(p: float) -> float:
        return (p - POSITION_MIN) / (POSITION_MAX - POSITION_MIN)

    @staticmethod
    def _ny(h: float) -> float:
        # sin heights in [-1, 1] mapped into the upper play area, y down.
        return 0.72 - 0.28 * (h + 1.0) / 2.0


def energy_teacher(state: tuple) -> tuple:
    """Push along the current velocity; from rest, push right."""
    _, velocity = state
    return (ACTION_RIGHT,) if velocity >= 0.0 else (ACTION_LEFT,)


def action_quality(state: tuple, action: tuple) -> str:
    """good / bad / neutral by mechanical-energy change of the push."""
    (a,) = action
    _, velocity = state
    if a == ACTION_NONE or velocity == 0.0:
        return "neutral"
    push = a - 1
    return "good" if push * velocity > 0.0 else "bad"
