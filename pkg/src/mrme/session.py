"""Interactive training sessions: control arbitration, capture, ingest.

A session steps one environment at tick granularity. Every tick exactly
one controller owns the action: the stacked policy, a human (takeover),
a scripted teacher, or the random-baseline agent. Human and teacher steps
are captured and, at episode end (or at takeover release when
``ingest_on_release`` is set), indexed into a new highest-precedence
ensemble. External commands land in an ordered queue and apply only at
tick boundaries, which keeps scripted runs bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, TextIO

import numpy as np

from .envs import action_quality_for, make_env, teacher_for
from .episode import (
    DEMO_SOURCES,
    ControlSource,
    Episode,
    StepRecord,
    Terminal,
    episode_transitions,
)
from .policy import (
    DemonstrationStack,
    FallbackPolicy,
    PolicyDecision,
    add_demonstration,
    demo_stack_policy,
)
from .quantize import DEFAULT_LEVELS, DEFAULT_ORDER, QuantizationSchema
from .serialize import save_stack


class ControlOwner(Enum):
    POLICY = "policy"
    HUMAN = "human"
    TEACHER = "teacher"
    RANDOM_BASELINE = "random_baseline"


_OWNER_SOURCE = {
    ControlOwner.POLICY: ControlSource.AGENT,
    ControlOwner.HUMAN: ControlSource.HUMAN,
    ControlOwner.TEACHER: ControlSource.TEACHER,
    ControlOwner.RANDOM_BASELINE: ControlSource.RANDOM,
}


@dataclass(frozen=True)
class SessionConfig:
    """Knobs of one training session."""

    env_id: str
    n: int = DEFAULT_ORDER
    k: int = DEFAULT_LEVELS
    min_match_level: int = 0
    baseline_episodes: int = 10
    seed: int = 0
    tick_rate: float = 30.0
    schedule: dict[int, ControlOwner] | None = None  # episode index -> default owner
    ingest_on_release: bool = False
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if self.baseline_episodes < 0:
            raise ValueError("baseline_episodes must be >= 0")
        if self.tick_rate <= 0:
            raise ValueError("tick_rate must be > 0")
        if self.n < 0 or self.k < 0 or self.min_match_level < 0:
            raise ValueError("n, k and min_match_level must be >= 0")


@dataclass(frozen=True)
class EpisodeMetrics:
    """Per-episode summary; competence is None when the policy never acted."""

    index: int
    reward: float
    solved: bool
    terminal: Terminal
    competence: float | None
    demo_steps: int
    good_actions: int
    bad_actions: int
    steps: int


@dataclass(frozen=True)
class TickSnapshot:
    """What one tick did; ``stepped`` is False for a reset interrupt."""

    tick: int
    episode: int
    t: int
    owner: ControlOwner | None
    action: tuple | None
    reward: float
    reward_so_far: float
    decision: PolicyDecision | None
    competence_so_far: float | None
    done: bool
    terminal: Terminal | None
    stepped: bool


@dataclass
class EpisodeTrace:
    """Full record of one episode for replay-style assertions."""

    episode: Episode
    owners: list[ControlOwner]
    decisions: list[PolicyDecision | None]
    competence_series: list[float | None]
    metrics: EpisodeMetrics


class Session:
    """One logical thread of interactive training."""

    def __init__(
        self,
        config: SessionConfig,
        env=None,
        stack: DemonstrationStack | None = None,
        human_input: Callable[[int, tuple], tuple | None] | None = None,
    ) -> None:
        self.config = config
        self.env = env if env is not None else make_env(config.env_id, config.max_steps)
        self.schema = QuantizationSchema.from_spaces(
            self.env.spec.observation, self.env.spec.action, k=config.k
        )
        if stack is None:
            stack = DemonstrationStack(
                FallbackPolicy.uniform(self.env.spec.action),
                min_match_level=config.min_match_level,
            )
        self.stack = stack
        self.teacher = teacher_for(config.env_id)
        self.quality = action_quality_for(config.env_id)
        self.human_input = human_input

        ss = np.random.SeedSequence(config.seed)
        kids = ss.spawn(4)
        self._reset_rng = np.random.default_rng(kids[0])
        self._baseline_rng = np.random.default_rng(kids[1])
        self._policy_rng = np.random.default_rng(kids[2])
        self._export_ss = kids[3]

        self.tick_count = 0  # global, never resets
        self.episode_index = 0
        self.timeline: list[EpisodeMetrics] = []
        self.traces: list[EpisodeTrace] = []

        self._commands: list[tuple[int | None, tuple]] = []
        self._takeover = False
        self._human_key: tuple | None = None
        self._reset_requested = False
        self._in_episode = False

        # Per-episode state.
        self._obs: tuple | None = None
        self._records: list[StepRecord] = []
        self._owners: list[ControlOwner] = []
        self._decisions: list[PolicyDecision | None] = []
        self._competence_series: list[float | None] = []
        self._history: list[tuple] = []
        self._episode_seed = 0
        self._reward_sum = 0.0
        self._policy_ticks = 0
        self._matched_ticks = 0
        self._good = 0
        self._bad = 0
        self._ingested_upto = 0
        self._terminal: Terminal | None = None

    # ------------------------------------------------------------------ commands

    def submit(self, command: tuple, at_tick: int | None = None) -> None:
        """Queue a command; it applies at the first boundary >= ``at_tick``."""
        self._commands.append((at_tick, command))

    def takeover(self, on: bool) -> None:
        """Seize (or return) control starting at the next tick boundary."""
        self.submit(("takeover", bool(on)))

    def set_human_key(self, action: tuple) -> None:
        self.submit(("key", tuple(action)))

    def _apply_commands(self) -> None:
        now = self.tick_count
        pending = self._commands
        self._commands = []
        deferred: list[tuple[int | None, tuple]] = []
        turned_on = False
        for at_tick, cmd in pending:
            if at_tick is not None and at_tick > now:
                deferred.append((at_tick, cmd))
                continue
            kind = cmd[0]
            if kind == "takeover":
                on = cmd[1]
                if on:
                    if not self._takeover:
                        self._takeover = True
                        self._human_key = None
                        turned_on = True
                elif turned_on:
                    # On->off inside one boundary: on wins this tick,
                    # release takes effect at the next one.
                    deferred.append((now + 1, cmd))
                elif self._takeover:
                    self._release_takeover()
            elif kind == "key":
                self._human_key = cmd[1]
            elif kind == "reset":
                self._reset_requested = True
            elif kind == "set_config":
                self._apply_config_subset(cmd[1])
            else:
                raise ValueError(f"unknown session command {cmd!r}")
        self._commands = deferred + self._commands

    def _release_takeover(self) -> None:
        self._takeover = False
        self._human_key = None
        if self.config.ingest_on_release and self._in_episode:
            self._ingest_pending_segment()

    def _apply_config_subset(self, subset: dict) -> None:
        for key, value in subset.items():
            if key == "min_match_level":
                value = int(value)
                if value < 0:
                    raise ValueError("min_match_level must be >= 0")
                self.stack.min_match_level = value
            elif key == "tick_rate":
                value = float(value)
                if value <= 0:
                    raise ValueError("tick_rate must be > 0")
                self.config = replace(self.config, tick_rate=value)
            else:
                raise ValueError(f"unknown config key {key!r}")

    # ------------------------------------------------------------------ episodes

    def begin_episode(self) -> None:
        if self._in_episode:
            raise RuntimeError("episode already running")
        self._episode_seed = int(self._reset_rng.integers(0, 2**63))
        self._obs = self.env.reset(self._episode_seed)
        self._records = []
        self._owners = []
        self._decisions = []
        self._competence_series = []
        self._history = []
        self._reward_sum = 0.0
        self._policy_ticks = 0
        self._matched_ticks = 0
        self._good = 0
        self._bad = 0
        self._ingested_upto = 0
        self._terminal = None
        self._reset_requested = False
        self._in_episode = True

    def _default_owner(self) -> ControlOwner:
        sched = self.config.schedule
        if sched is not None and self.episode_index in sched:
            return sched[self.episode_index]
        if self.episode_index < self.config.baseline_episodes:
            return ControlOwner.RANDOM_BASELINE
        return ControlOwner.POLICY

    def _resolve_owner(self) -> ControlOwner:
        # A human always wins, even over the baseline phase.
        if self._takeover:
            return ControlOwner.HUMAN
        return self._default_owner()

    def _human_action(self) -> tuple:
        if self.human_input is not None:
            provided = self.human_input(self.tick_count, self._obs)
            if provided is not None:
                self._human_key = tuple(provided)
        if self._human_key is not None:
            return self._human_key
        return tuple(self.env.idle_action)

    def tick(self) -> TickSnapshot:
        """Advance one tick: apply commands, resolve the owner, step."""
        if not self._in_episode:
            raise RuntimeError("no episode running; call begin_episode() first")
        self._apply_commands()
        if self._reset_requested and not self._records:
            self._reset_requested = False  # episode is already fresh
        if self._reset_requested:
            self._reset_requested = False
            self._terminal = Terminal.TRUNCATED
            return TickSnapshot(
                tick=self.tick_count,
                episode=self.episode_index,
                t=len(self._records),
                owner=None,
                action=None,
                reward=0.0,
                reward_so_far=self._reward_sum,
                decision=None,
                competence_so_far=self._competence(),
                done=True,
                terminal=Terminal.TRUNCATED,
                stepped=False,
            )

        owner = self._resolve_owner()
        decision: PolicyDecision | None = None
        if owner is ControlOwner.POLICY:
            decision = demo_stack_policy(
                self.stack, self._obs, self._history, self._policy_rng
            )
            action = decision.action
            self._policy_ticks += 1
            if decision.matched:
                self._matched_ticks += 1
        elif owner is ControlOwner.TEACHER:
            action = tuple(self.teacher(self.env.state))
        elif owner is ControlOwner.RANDOM_BASELINE:
            action = self.env.spec.action.sample(self._baseline_rng)
        else:
            action = self._human_action()

        obs_before = self._obs
        result = self.env.step(action)
        self._records.append(
            StepRecord(
                t=len(self._records) + 1,
                obs=obs_before,
                action=action,
                reward=result.reward,
                source=_OWNER_SOURCE[owner],
            )
        )
        self._owners.append(owner)
        self._decisions.append(decision)
        if self.quality is not None:
            q = self.quality(obs_before, action)
            if q == "good":
                self._good += 1
            elif q == "bad":
                self._bad += 1
        self._history.append(action)
        self._reward_sum += result.reward
        self._obs = result.obs
        self._competence_series.append(self._competence())
        self.tick_count += 1
        if result.done:
            self._terminal = result.terminal
        return TickSnapshot(
            tick=self.tick_count - 1,
            episode=self.episode_index,
            t=len(self._records),
            owner=owner,
            action=action,
            reward=result.reward,
            reward_so_far=self._reward_sum,
            decision=decision,
            competence_so_far=self._competence_series[-1],
            done=result.done,
            terminal=result.terminal,
            stepped=True,
        )

    def _competence(self) -> float | None:
        if self._policy_ticks == 0:
            return None
        return self._matched_ticks / self._policy_ticks

    def _ingest_pending_segment(self) -> None:
        """Ingest captured demo steps beyond the last consumed index."""
        if self._ingested_upto >= len(self._records):
            return
        new_from = self._ingested_upto
        self._ingested_upto = len(self._records)
        demo_idx = [i for i, s in enumerate(self._records) if s.source in DEMO_SOURCES]
        if not any(i >= new_from for i in demo_idx):
            return
        episode_so_far = Episode(self._records, Terminal.TRUNCATED, self._episode_seed)
        transitions = episode_transitions(episode_so_far, self.config.n, DEMO_SOURCES)
        fresh = [tr for tr, i in zip(transitions, demo_idx) if i >= new_from]
        add_demonstration(
            self.stack,
            fresh,
            self.config.n,
            self.schema,
            source_id=f"ep{self.episode_index}.t{new_from}",
        )

    def finish_episode(self) -> EpisodeMetrics:
        """Close the episode: build the record, ingest demos, log metrics."""
        if not self._in_episode:
            raise RuntimeError("no episode running")
        if not self._records:
            raise RuntimeError("cannot finish an episode with zero steps")
        terminal = self._terminal if self._terminal is not None else Terminal.TRUNCATED
        episode = Episode(self._records, terminal, self._episode_seed)
        self._ingest_pending_segment()
        demo_steps = sum(1 for s in episode.steps if s.source in DEMO_SOURCES)
        metrics = EpisodeMetrics(
            index=self.episode_index,
            reward=self._reward_sum,
            solved=terminal is Terminal.SOLVED,
            terminal=terminal,
            competence=self._competence(),
            demo_steps=demo_steps,
            good_actions=self._good,
            bad_actions=self._bad,
            steps=len(episode.steps),
        )
        self.timeline.append(metrics)
        self.traces.append(
            EpisodeTrace(
                episode=episode,
                owners=list(self._owners),
                decisions=list(self._decisions),
                competence_series=list(self._competence_series),
                metrics=metrics,
            )
        )
        self.episode_index += 1
        self._in_episode = False
        return metrics

    def run_episode(self) -> EpisodeMetrics:
        self.begin_episode()
        while True:
            snapshot = self.tick()
            if snapshot.done:
                break
        return self.finish_episode()

    def run(self, episodes: int) -> list[EpisodeMetrics]:
        return [self.run_episode() for _ in range(episodes)]

    # ------------------------------------------------------------------ outputs

    def metrics_timeline(self) -> list[EpisodeMetrics]:
        return list(self.timeline)

    def competence_series(self, episode: int = -1) -> list[float | None]:
        """Per-tick cumulative competence of one recorded episode."""
        return list(self.traces[episode].competence_series)

    def save_model(self, path) -> None:
        save_stack(self.stack, path)

    def bootstrap_export(self, episodes: int, sink: TextIO) -> int:
        """Roll out the current stack and write one record per step.

        Every record carries the raw observation, the executed-action
        history (up to N), the chosen action, and its provenance. Needs a
        nonempty stack; returns the number of records written.
        """
        if len(self.stack) == 0:
            raise ValueError("bootstrap export needs a nonempty demonstration stack")
        header = {
            "format": "mrme-bootstrap",
            "version": 1,
            "env": self.env.spec.id,
            "obs_space": self.env.spec.observation.to_json(),
            "action_space": self.env.spec.action.to_json(),
            "n": self.config.n,
        }
        sink.write(json.dumps(header, sort_keys=True) + "\n")
        rng = np.random.default_rng(self._export_ss.spawn(1)[0])
        env = make_env(self.config.env_id, self.config.max_steps)
        written = 0
        for _ in range(episodes):
            obs = env.reset(int(rng.integers(0, 2**63)))
            history: list[tuple] = []
            while True:
                decision = demo_stack_policy(self.stack, obs, history, rng)
                record = {
                    "obs": list(obs),
                    "history": [list(a) for a in history[-self.config.n :]],
                    "action": list(decision.action),
                    "provenance": (
                        {
                            "matched": True,
                            "demo_index": decision.provenance.demo_index,
                            "order": decision.provenance.order,
                            "level": decision.provenance.level,
                        }
                        if decision.matched
                        else {"matched": False}
                    ),
                }
                sink.write(json.dumps(record, sort_keys=True) + "\n")
                written += 1
                result = env.step(decision.action)
                history.append(decision.action)
                obs = result.obs
                if result.done:
                    break
        return written


def end_of_episode_ingest(
    stack: DemonstrationStack,
    episode: Episode,
    n: int,
    schema: QuantizationSchema,
    source_id: str = "",
) -> DemonstrationStack:
    """Ingest a finished episode's human/teacher steps as one new ensemble.

    Histories are drawn from the full executed trace. Episodes without
    demonstration steps leave the stack unchanged.
    """
    transitions = episode_transitions(episode, n, DEMO_SOURCES)
    if not transitions:
        return stack
    return add_demonstration(stack, transitions, n, schema, source_id)


CSV_HEADER = "episode,reward,solved,competence,demo_steps,good_actions,bad_actions"


def metrics_to_csv(timeline: Iterable[EpisodeMetrics]) -> str:
    """Render the timeline as the canonical metrics CSV (floats at 6 dp)."""
    lines = [CSV_HEADER]
    for m in timeline:
        competence = "" if m.competence is None else f"{m.competence:.6f}"
        lines.append(
            f"{m.index},{m.reward:.6f},{int(m.solved)},{competence},"
            f"{m.demo_steps},{m.good_actions},{m.bad_actions}"
        )
    return "\n".join(lines) + "\n"
