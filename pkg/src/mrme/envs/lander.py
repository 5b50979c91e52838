"""A 2D point-mass lander, harder for a human than the car.

Constant gravity pulls the craft down; a main engine accelerates it up
and weak lateral thrusters steer it sideways, all integrated at 30 Hz
with semi-implicit Euler. The episode ends on ground contact or when
fuel or the step budget runs out. Landing counts as solved when the
craft touches down on the pad (|x| <= 0.5) softly (|vy| <= 1.0).
"""

from __future__ import annotations

import numpy as np

from ..episode import Terminal
from ..spaces import Continuous, Discrete, SpaceSpec
from .base import DT, EnvSpec, StepResult, circle, line, polygon, text

GRAVITY = 1.6  # m/s^2
MAIN_ACCEL = 3.0  # m/s^2
LATERAL_ACCEL = 0.6  # m/s^2
PAD_HALF_WIDTH = 0.5  # m
SOFT_VY = 1.0  # m/s
FUEL_START = 6.0  # seconds of main burn
FUEL_MAIN_RATE = 1.0  # fuel/s while the main engine burns
FUEL_LATERAL_RATE = 0.25  # fuel/s while a lateral thruster burns
DEFAULT_MAX_STEPS = 300

X_MAX = 3.0
Y_MAX = 8.0
VX_MAX = 3.0
VY_MIN, VY_MAX = -6.0, 3.0

ACTION_NONE, ACTION_MAIN, ACTION_LEFT, ACTION_RIGHT = 0, 1, 2, 3

STEP_PENALTY = -0.1
BURN_PENALTY = -0.05
LAND_BONUS = 100.0
CRASH_PENALTY = -100.0

OBSERVATION_SPACE = SpaceSpec(
    (
        Continuous(-X_MAX, X_MAX),
        Continuous(0.0, Y_MAX),
        Continuous(-VX_MAX, VX_MAX),
        Continuous(VY_MIN, VY_MAX),
        Continuous(0.0, FUEL_START),
    )
)
ACTION_SPACE = SpaceSpec((Discrete(4),))


class SimpleLander:
    """Deterministic, seedable vertical-landing task."""

    def __init__(self, max_steps: int = DEFAULT_MAX_STEPS) -> None:
        self.spec = EnvSpec(
            id="lander",
            observation=OBSERVATION_SPACE,
            action=ACTION_SPACE,
            max_steps=max_steps,
            solve_predicate=f"touchdown with |x| <= {PAD_HALF_WIDTH} and |vy| <= {SOFT_VY}",
        )
        self.idle_action = (ACTION_NONE,)
        self.x = self.y = self.vx = self.vy = 0.0
        self.fuel = FUEL_START
        self.steps = 0
        self.last_action = ACTION_NONE

    def reset(self, seed: int) -> tuple:
        rng = np.random.default_rng(seed)
        self.x = float(rng.uniform(-1.5, 1.5))
        self.y = float(rng.uniform(4.0, 6.0))
        self.vx = float(rng.uniform(-0.3, 0.3))
        self.vy = 0.0
        self.fuel = FUEL_START
        self.steps = 0
        self.last_action = ACTION_NONE
        return self._obs()

    def _obs(self) -> tuple:
        return (self.x, self.y, self.vx, self.vy, self.fuel)

    @property
    def state(self) -> tuple:
        return self._obs()

    def step(self, action: tuple) -> StepResult:
        (a,) = action
        if a not in (ACTION_NONE, ACTION_MAIN, ACTION_LEFT, ACTION_RIGHT):
            raise ValueError(f"invalid action {action!r}")
        self.last_action = a
        ax = 0.0
        ay = -GRAVITY
        burn = 0.0
        if a == ACTION_MAIN and self.fuel > 0.0:
            ay += MAIN_ACCEL
            burn = FUEL_MAIN_RATE * DT
        elif a == ACTION_LEFT and self.fuel > 0.0:
            ax = -LATERAL_ACCEL
            burn = FUEL_LATERAL_RATE * DT
        elif a == ACTION_RIGHT and self.fuel > 0.0:
            ax = LATERAL_ACCEL
            burn = FUEL_LATERAL_RATE * DT

        self.vx = min(max(self.vx + ax * DT, -VX_MAX), VX_MAX)
        self.vy = min(max(self.vy + ay * DT, VY_MIN), VY_MAX)
        self.x = min(max(self.x + self.vx * DT, -X_MAX), X_MAX)
        self.y = min(self.y + self.vy * DT, Y_MAX)
        self.fuel = max(self.fuel - burn, 0.0)
        self.steps += 1

        reward = STEP_PENALTY + (BURN_PENALTY if burn > 0.0 else 0.0)
        if self.y <= 0.0:
            self.y = 0.0
            landed = abs(self.x) <= PAD_HALF_WIDTH and abs(self.vy) <= SOFT_VY
            reward += LAND_BONUS if landed else CRASH_PENALTY
            terminal = Terminal.SOLVED if landed else Terminal.FAILED
            return StepResult(self._obs(), reward, True, terminal)
        if self.fuel <= 0.0:
            return StepResult(self._obs(), reward + CRASH_PENALTY, True, Terminal.FAILED)
        if self.steps >= self.spec.max_steps:
            return StepResult(self._obs(), reward, True, Terminal.TRUNCATED)
        return StepResult(self._obs(), reward, False, None)

    def render(self) -> list[dict]:
        nx = lambda x: (x + X_MAX) / (2 * X_MAX)
        ny = lambda y: 0.92 - 0.84 * y / Y_MAX
        shapes = [
            line(0.0, ny(0.0), 1.0, ny(0.0), "#5c6470"),
            line(nx(-PAD_HALF_WIDTH), ny(0.0), nx(PAD_HALF_WIDTH), ny(0.0), "#d8b400", 0.008),
        ]
        cx, cy = nx(self.x), ny(self.y)
        shapes.append(
            polygon([(cx - 0.015, cy + 0.015), (cx + 0.015, cy + 0.015), (cx, cy - 0.02)], "#4ea1ff")
        )
        if self.last_action == ACTION_MAIN and self.fuel > 0.0:
            shapes.append(polygon([(cx - 0.008, cy + 0.016), (cx + 0.008, cy + 0.016), (cx, cy + 0.04)], "#ff7b39"))
        elif self.last_action == ACTION_LEFT and self.fuel > 0.0:
            shapes.append(line(cx + 0.016, cy, cx + 0.036, cy, "#ff7b39", 0.006))
        elif self.last_action == ACTION_RIGHT and self.fuel > 0.0:
            shapes.append(line(cx - 0.016, cy, cx - 0.036, cy, "#ff7b39", 0.006))
        shapes.append(circle(nx(0.0), ny(0.0), 0.006, "#d8b400"))
        shapes.append(text(0.02, 0.06, f"y={self.y:.2f} vy={self.vy:+.2f} fuel={self.fuel:.1f}"))
        return shapes


def pd_teacher(state: tuple) -> tuple:
    """Proportional-derivative landing controller on (x, vx, vy).

    Vertical safety first: brake whenever descent exceeds an
    altitude-scaled envelope, otherwise steer the drift toward the pad.
    """
    x, y, vx, vy, _fuel = state
    vy_floor = -(0.25 + 0.18 * y)
    if vy < vy_floor:
        return (ACTION_MAIN,)
    vx_target = min(max(-0.6 * x, -1.0), 1.0)
    if vx - vx_target > 0.08:
        return (ACTION_LEFT,)
    if vx_target - vx > 0.08:
        return (ACTION_RIGHT,)
    return (ACTION_NONE,)
