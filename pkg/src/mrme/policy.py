"""Behavior-cloning policies over Markov model grids and stacks of them.

Sweep order is what makes precedence work and is fixed everywhere:
levels from finest down to coarsest, orders from longest history down to
zero, ensembles from newest demonstration to oldest. The first populated
cell wins and its action bag is sampled; only if everything misses does
the fallback act.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .ensemble import ActionBag, MarkovEnsemble, MarkovModel, build_ensemble, sample_action
from .episode import Transition
from .quantize import QuantizationSchema
from .spaces import SpaceSpec


@dataclass(frozen=True)
class Matched:
    """Provenance of a model-produced action: which demo, order, and level."""

    demo_index: int
    order: int
    level: int


@dataclass(frozen=True)
class PolicyDecision:
    """An action plus where it came from; ``provenance`` None means fallback."""

    action: tuple
    provenance: Matched | None

    @property
    def matched(self) -> bool:
        return self.provenance is not None


class FallbackKind(Enum):
    UNIFORM_RANDOM = "uniform_random"
    IDLE = "idle"
    CUSTOM = "custom"


@dataclass(frozen=True)
class FallbackPolicy:
    """Total default policy used when no model recognizes the state."""

    kind: FallbackKind
    action_space: SpaceSpec | None = None
    idle_action: tuple | None = None
    fn: Callable[[tuple, np.random.Generator], tuple] | None = None

    @classmethod
    def uniform(cls, action_space: SpaceSpec) -> "FallbackPolicy":
        """Random action sampled from the action space (the default)."""
        return cls(FallbackKind.UNIFORM_RANDOM, action_space=action_space)

    @classmethod
    def idle(cls, action: tuple) -> "FallbackPolicy":
        return cls(FallbackKind.IDLE, idle_action=tuple(action))

    @classmethod
    def custom(cls, fn: Callable[[tuple, np.random.Generator], tuple]) -> "FallbackPolicy":
        return cls(FallbackKind.CUSTOM, fn=fn)

    def sample(self, obs: tuple, rng: np.random.Generator) -> tuple:
        if self.kind is FallbackKind.UNIFORM_RANDOM:
            return self.action_space.sample(rng)
        if self.kind is FallbackKind.IDLE:
            return self.idle_action
        return self.fn(obs, rng)


class LookupCounter:
    """Monotone count of hash-table probes, for complexity instrumentation."""

    __slots__ = ("lookups",)

    def __init__(self) -> None:
        self.lookups = 0


def stack_policy(
    models: Sequence[MarkovModel],
    obs: tuple,
    history: Sequence[tuple],
    schema: QuantizationSchema,
    fallback: FallbackPolicy,
    rng: np.random.Generator,
    counter: LookupCounter | None = None,
) -> PolicyDecision:
    """Fixed-level partial policy over a stack of models M_0..M_n.

    Tries orders n down to 0, skipping orders longer than the available
    history; the first model defined on the extended state is sampled.
    All models must share one level (and the given schema).
    """
    if not models:
        return PolicyDecision(fallback.sample(obs, rng), None)
    level = models[0].level
    if any(m.level != level for m in models):
        raise ValueError("stack_policy models must share one quantization level")
    n = len(models) - 1
    i_max = min(n, len(history))
    encs = schema.encoder.query_encodings(obs, history, i_max, level)
    for i in range(i_max, -1, -1):
        if counter is not None:
            counter.lookups += 1
        bag = models[i].lookup(encs.key(i, level))
        if bag is not None:
            return PolicyDecision(sample_action(bag, rng), Matched(0, i, level))
    return PolicyDecision(fallback.sample(obs, rng), None)


def _sweep(
    ensemble: MarkovEnsemble,
    encs,
    min_match_level: int,
    counter: LookupCounter | None,
) -> tuple[int, int, ActionBag] | None:
    """Full grid sweep (levels fine->coarse, orders high->low); first hit wins."""
    i_max = min(ensemble.n, encs.max_order)
    grid = ensemble.grid
    for j in range(ensemble.k, min_match_level - 1, -1):
        for i in range(i_max, -1, -1):
            if counter is not None:
                counter.lookups += 1
            bag = grid[i][j].table.get(encs.key(i, j))
            if bag is not None:
                return i, j, bag
    return None


def ensemble_policy(
    ensemble: MarkovEnsemble,
    obs: tuple,
    history: Sequence[tuple],
    fallback: FallbackPolicy,
    rng: np.random.Generator,
    min_match_level: int = 0,
    counter: LookupCounter | None = None,
) -> PolicyDecision:
    """Policy of one ensemble: finest level that recognizes the state wins.

    With the coarsest quantizer included (min_match_level=0) and a fully
    continuous observation space, a nonempty ensemble always matches, so
    the fallback only ever fires when coarse levels are excluded.
    """
    encs = ensemble.schema.encoder.query_encodings(
        obs, history, ensemble.n, min_match_level
    )
    hit = _sweep(ensemble, encs, min_match_level, counter)
    if hit is None:
        return PolicyDecision(fallback.sample(obs, rng), None)
    i, j, bag = hit
    return PolicyDecision(sample_action(bag, rng), Matched(0, i, j))


class DemonstrationStack:
    """Precedence-ordered ensembles, newest first, with a total fallback.

    Reads are lock-free: ``ensembles`` is an immutable tuple swapped
    atomically by the single writer. Counters are approximate under
    concurrent readers but exact for single-threaded use.
    """

    def __init__(
        self,
        fallback: FallbackPolicy,
        min_match_level: int = 0,
        ensembles: Sequence[MarkovEnsemble] = (),
    ) -> None:
        if min_match_level < 0:
            raise ValueError(f"min_match_level must be >= 0, got {min_match_level}")
        self.fallback = fallback
        self.min_match_level = min_match_level
        self.ensembles: tuple[MarkovEnsemble, ...] = tuple(ensembles)
        self.counter = LookupCounter()
        self.queries = 0
        self.matched_queries = 0

    def __len__(self) -> int:
        return len(self.ensembles)

    def push(self, ensemble: MarkovEnsemble) -> None:
        """Prepend a new highest-precedence ensemble (atomic swap)."""
        self.ensembles = (ensemble,) + self.ensembles


def demo_stack_policy(
    stack: DemonstrationStack,
    obs: tuple,
    history: Sequence[tuple],
    rng: np.random.Generator,
) -> PolicyDecision:
    """Consult ensembles newest to oldest; fall back only if all miss.

    Each ensemble gets its full fine-to-coarse sweep before the next
    (older) one is asked, so the latest demonstrations take precedence.
    """
    stack.queries += 1
    counter = stack.counter
    min_level = stack.min_match_level
    ensembles = stack.ensembles
    # Ensembles of one stack almost always share a schema instance; encode
    # the query once per distinct schema, at the deepest order any taker needs.
    encs_cache: dict[int, object] = {}
    for demo_index, ensemble in enumerate(ensembles):
        schema_id = id(ensemble.schema)
        encs = encs_cache.get(schema_id)
        if encs is None or encs.max_order < min(ensemble.n, len(history)):
            deepest = max(
                e.n for e in ensembles if id(e.schema) == schema_id
            )
            encs = ensemble.schema.encoder.query_encodings(
                obs, history, deepest, min_level
            )
            encs_cache[schema_id] = encs
        hit = _sweep(ensemble, encs, min_level, counter)
        if hit is not None:
            i, j, bag = hit
            stack.matched_queries += 1
            return PolicyDecision(sample_action(bag, rng), Matched(demo_index, i, j))
    return PolicyDecision(stack.fallback.sample(obs, rng), None)


def add_demonstration(
    stack: DemonstrationStack,
    demo: Sequence[Transition],
    n: int,
    schema: QuantizationSchema,
    source_id: str = "",
) -> DemonstrationStack:
    """Build an ensemble from ``demo`` and push it at highest precedence.

    Existing ensembles are untouched; per-query cost grows by one
    ensemble's sweep. Raises on an empty demonstration.
    """
    if not demo:
        raise ValueError("cannot add an empty demonstration")
    stack.push(build_ensemble(demo, n, schema, source_id))
    return stack


_BYTES_PER_ENTRY_OVERHEAD = 120  # rough dict + object bookkeeping per key


def stack_stats(stack: DemonstrationStack) -> dict:
    """Exact key/action counts, a memory estimate, and lookup counters."""
    per_ensemble = []
    total_keys = 0
    total_actions = 0
    approx_bytes = 0
    for ensemble in stack.ensembles:
        keys = ensemble.key_count
        actions = ensemble.action_count
        total_keys += keys
        total_actions += actions
        for row in ensemble.grid:
            for model in row:
                for key, bag in model.table.items():
                    approx_bytes += (
                        len(key)
                        + _BYTES_PER_ENTRY_OVERHEAD
                        + len(bag) * 8 * len(ensemble.schema.action_space.dims)
                    )
        per_ensemble.append(
            {
                "source_id": ensemble.source_id,
                "keys": keys,
                "actions": actions,
                "transitions": ensemble.transition_count,
            }
        )
    return {
        "ensembles": len(stack.ensembles),
        "total_keys": total_keys,
        "total_actions": total_actions,
        "approx_bytes": approx_bytes,
        "lookups": stack.counter.lookups,
        "queries": stack.queries,
        "matched_queries": stack.matched_queries,
        "per_ensemble": per_ensemble,
    }


def stats_text(stats: dict) -> str:
    """Line-oriented key=value rendering for machine diffing."""
    lines = []
    for key in sorted(stats):
        if key == "per_ensemble":
            continue
        lines.append(f"{key}={stats[key]}")
    for idx, entry in enumerate(stats.get("per_ensemble", [])):
        for key in sorted(entry):
            lines.append(f"ensemble.{idx}.{key}={entry[key]}")
    return "\n".join(lines) + "\n"
