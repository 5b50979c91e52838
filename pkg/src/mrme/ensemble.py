"""Markov models over quantized extended states, and their (N+1)x(K+1) grid.

Each model is a hash map from key bytes to the multiset of original,
unquantized actions observed after that quantized extended state. Sampling
uniformly from the multiset realizes the empirical next-action distribution;
duplicates carry weight. Grids are immutable once built.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .episode import Transition
from .keys import MAX_ORDER
from .quantize import QuantizationSchema


class ActionBag:
    """Multiset of original action vectors, insertion order preserved."""

    __slots__ = ("actions",)

    def __init__(self, actions: Iterable[tuple] = ()) -> None:
        self.actions: list[tuple] = list(actions)

    def add(self, action: tuple) -> None:
        self.actions.append(action)

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __repr__(self) -> str:
        return f"ActionBag({self.actions!r})"


def sample_action(bag: ActionBag, rng: np.random.Generator) -> tuple:
    """Uniform draw over the multiset; deterministic given the rng state."""
    n = len(bag)
    if n == 0:
        raise RuntimeError("sampling from an empty ActionBag (invariant violation)")
    if n == 1:
        return bag.actions[0]
    return bag.actions[int(rng.integers(n))]


class MarkovModel:
    """One (order, level) cell: key bytes -> ActionBag."""

    __slots__ = ("order", "level", "table")

    def __init__(self, order: int, level: int) -> None:
        self.order = order
        self.level = level
        self.table: dict[bytes, ActionBag] = {}

    def insert(self, key: bytes, action: tuple) -> None:
        bag = self.table.get(key)
        if bag is None:
            self.table[key] = ActionBag((action,))
        else:
            bag.add(action)

    def lookup(self, key: bytes) -> ActionBag | None:
        return self.table.get(key)

    @property
    def key_count(self) -> int:
        return len(self.table)

    @property
    def action_count(self) -> int:
        return sum(len(bag) for bag in self.table.values())


class MarkovEnsemble:
    """Complete grid of models M[i][j], i = 0..N orders, j = 0..K levels.

    Built from one demonstration; all cells index the same transitions at
    different history lengths and resolutions.
    """

    def __init__(self, n: int, schema: QuantizationSchema, source_id: str = "") -> None:
        if n < 0:
            raise ValueError(f"max order must be >= 0, got {n}")
        if n > MAX_ORDER:
            raise ValueError(f"max order {n} exceeds encodable {MAX_ORDER}")
        self.n = n
        self.schema = schema
        self.source_id = source_id
        self.grid: list[list[MarkovModel]] = [
            [MarkovModel(i, j) for j in range(schema.levels)] for i in range(n + 1)
        ]

    @property
    def k(self) -> int:
        return self.schema.k

    def model(self, order: int, level: int) -> MarkovModel:
        return self.grid[order][level]

    def column(self, level: int) -> list[MarkovModel]:
        """The fixed-level stack of models M_0..M_N (paper's script-M)."""
        return [row[level] for row in self.grid]

    @property
    def key_count(self) -> int:
        return sum(m.key_count for row in self.grid for m in row)

    @property
    def action_count(self) -> int:
        return sum(m.action_count for row in self.grid for m in row)

    @property
    def transition_count(self) -> int:
        """Number of demonstrated transitions this ensemble was built from."""
        return self.grid[0][0].action_count


def build_ensemble(
    transitions: Sequence[Transition],
    n: int,
    schema: QuantizationSchema,
    source_id: str = "",
) -> MarkovEnsemble:
    """Index a demonstration into a fresh ensemble.

    Every transition lands in model (i, j) for each order i up to
    min(N, available history) and every level j; stored actions are the
    unquantized originals. Raises on an empty demonstration.
    """
    if not transitions:
        raise ValueError("cannot build an ensemble from an empty demonstration")
    ensemble = MarkovEnsemble(n, schema, source_id)
    enc = schema.encoder
    levels = schema.levels
    for tr in transitions:
        hist = tr.history[-n:] if n else ()
        i_max = min(n, len(hist))
        action = tuple(tr.action)
        encs = enc.query_encodings(tr.obs, hist, i_max)
        for j in range(levels):
            for i in range(i_max + 1):
                ensemble.grid[i][j].insert(encs.key(i, j), action)
    return ensemble
