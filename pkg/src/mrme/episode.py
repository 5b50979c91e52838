"""Episode recording: steps, terminals, extended states, transitions.

Rewards are recorded for metrics only; the policy models never read them.
Histories always contain the actions actually executed in the episode,
no matter which controller (human, agent, teacher, random) chose them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .spaces import SpaceSpec


class ControlSource(Enum):
    """Who chose a step's action."""

    HUMAN = "human"
    AGENT = "agent"
    TEACHER = "teacher"
    RANDOM = "random"


class Terminal(Enum):
    SOLVED = "solved"
    FAILED = "failed"
    TRUNCATED = "truncated"


DEMO_SOURCES = frozenset({ControlSource.HUMAN, ControlSource.TEACHER})


@dataclass(frozen=True)
class StepRecord:
    """One timestep: observation seen, action executed, reward received."""

    t: int  # 1-based time index
    obs: tuple
    action: tuple
    reward: float
    source: ControlSource


@dataclass(frozen=True)
class Episode:
    """A complete episode with its terminal condition and reset seed."""

    steps: tuple[StepRecord, ...]
    terminal: Terminal
    seed: int

    def __init__(self, steps: Iterable[StepRecord], terminal: Terminal, seed: int) -> None:
        steps = tuple(steps)
        if not steps:
            raise ValueError("an episode needs at least one step")
        for i, step in enumerate(steps):
            if step.t != i + 1:
                raise ValueError(f"step times must run 1..T, got {step.t} at index {i}")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "terminal", terminal)
        object.__setattr__(self, "seed", seed)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def total_reward(self) -> float:
        return sum(s.reward for s in self.steps)

    def validate_against(self, obs_space: SpaceSpec, action_space: SpaceSpec) -> None:
        for step in self.steps:
            obs_space.validate(step.obs)
            action_space.validate(step.action)


@dataclass(frozen=True)
class ExtendedState:
    """Observation plus the n most recent executed actions (oldest first)."""

    obs: tuple
    history: tuple[tuple, ...]

    def __init__(self, obs: tuple, history: Sequence[tuple]) -> None:
        object.__setattr__(self, "obs", tuple(obs))
        object.__setattr__(self, "history", tuple(tuple(a) for a in history))

    @property
    def order(self) -> int:
        return len(self.history)


@dataclass(frozen=True)
class Transition:
    """A demonstrated step with the executed-action history preceding it.

    ``history`` holds at most N actions (oldest first), drawn from the full
    executed trace, so a takeover in mid-episode still sees the agent's own
    recent actions as context.
    """

    obs: tuple
    history: tuple[tuple, ...]
    action: tuple


def episode_transitions(
    episode: Episode,
    max_order: int,
    sources: frozenset[ControlSource] | None = None,
) -> list[Transition]:
    """Transitions for the steps whose source is in ``sources`` (default: all).

    Histories come from the complete executed trace regardless of the
    filter, truncated to the last ``max_order`` actions before each step.
    """
    actions = [s.action for s in episode.steps]
    out = []
    for idx, step in enumerate(episode.steps):
        if sources is not None and step.source not in sources:
            continue
        lo = max(0, idx - max_order)
        out.append(Transition(step.obs, tuple(actions[lo:idx]), step.action))
    return out
