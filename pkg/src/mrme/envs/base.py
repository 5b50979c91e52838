"""Environment plumbing: specs, step results, render primitives.

Environments are deterministic, seedable, single-threaded state machines
stepping at a fixed 30 Hz frame budget. Rendering returns a list of shape
dicts (line / circle / polygon / text) in normalized [0,1] coordinates so
clients never need environment-specific drawing code.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..episode import Terminal
from ..spaces import SpaceSpec

DT = 1.0 / 30.0
RENDER_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EnvSpec:
    """Fixed description of one environment instance."""

    id: str
    observation: SpaceSpec
    action: SpaceSpec
    max_steps: int
    solve_predicate: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "observation": self.observation.to_json(),
            "action": self.action.to_json(),
            "max_steps": self.max_steps,
            "solve_predicate": self.solve_predicate,
        }


@dataclass(frozen=True)
class StepResult:
    obs: tuple
    reward: float
    done: bool
    terminal: Terminal | None  # set iff done


def line(x1: float, y1: float, x2: float, y2: float, color: str, width: float = 0.004) -> dict:
    return {"kind": "line", "x1": x1, "y1": y1, "x2": x2, "y2": y2,
            "color": color, "width": width}


def circle(x: float, y: float, r: float, color: str) -> dict:
    return {"kind": "circle", "x": x, "y": y, "r": r, "color": color}


def polygon(points: list[tuple[float, float]], color: str) -> dict:
    return {"kind": "polygon", "points": [[px, py] for px, py in points], "color": color}


def text(x: float, y: float, value: str, color: str = "#e0e0e0", size: float = 0.03) -> dict:
    return {"kind": "text", "x": x, "y": y, "value": value, "color": color, "size": size}
