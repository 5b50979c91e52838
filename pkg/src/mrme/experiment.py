"""Headless experiment runner: baseline phase, teacher phase, evaluation.

The canonical schedule mirrors the bundled learning-curve studies: a block
of random-baseline episodes to establish the floor, a block of scripted
teacher demonstrations, then policy-only evaluation episodes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .envs import ENV_IDS
from .quantize import DEFAULT_LEVELS, DEFAULT_ORDER
from .session import ControlOwner, EpisodeMetrics, Session, SessionConfig


@dataclass(frozen=True)
class ExperimentConfig:
    env_id: str
    seed: int = 0
    baseline_episodes: int = 10
    teacher_episodes: int = 5
    eval_episodes: int = 25
    n: int = DEFAULT_ORDER
    k: int = DEFAULT_LEVELS
    min_match_level: int = 0
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if self.env_id not in ENV_IDS:
            raise ValueError(f"unknown env id {self.env_id!r}")
        for name in ("baseline_episodes", "teacher_episodes", "eval_episodes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total_episodes(self) -> int:
        return self.baseline_episodes + self.teacher_episodes + self.eval_episodes


def session_for(config: ExperimentConfig) -> Session:
    schedule = {
        config.baseline_episodes + i: ControlOwner.TEACHER
        for i in range(config.teacher_episodes)
    }
    session_config = SessionConfig(
        env_id=config.env_id,
        n=config.n,
        k=config.k,
        min_match_level=config.min_match_level,
        baseline_episodes=config.baseline_episodes,
        seed=config.seed,
        schedule=schedule,
        max_steps=config.max_steps,
    )
    return Session(session_config)


def run_experiment(config: ExperimentConfig) -> tuple[Session, list[EpisodeMetrics]]:
    """Run the full schedule; returns the session and its metrics timeline."""
    session = session_for(config)
    session.run(config.total_episodes)
    return session, session.metrics_timeline()
