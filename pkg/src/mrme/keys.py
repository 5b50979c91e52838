"""Canonical byte keys for quantized extended states.

A key identifies (order, level, quantized observation, quantized action
history). The payload is the observation's bin indices followed by each
history action's bin indices, oldest action first, every index packed as
a little-endian signed 64-bit integer. A one-byte order and a one-byte
level prefix make keys injective across the whole model grid, and the
fixed-width layout makes them identical across runs and platforms.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

from .quantize import QuantizationSchema

MAX_ORDER = 255
MAX_LEVEL = 255

_PREFIX = struct.Struct("<BB")


@dataclass(frozen=True)
class StateKey:
    """Encoded quantized extended state; ``payload`` excludes the prefix."""

    order: int
    level: int
    payload: bytes

    def to_bytes(self) -> bytes:
        """Full canonical key: (order, level) prefix + payload."""
        return _PREFIX.pack(self.order, self.level) + self.payload


class KeyEncoder:
    """Packs observations and actions into key bytes for one schema.

    Policy lookups build many keys per query, so the per-vector pack
    structs are precompiled here and per-level encodings are meant to be
    computed once and reused across orders.
    """

    def __init__(self, schema: QuantizationSchema) -> None:
        self.schema = schema
        self._obs_struct = struct.Struct(f"<{schema.obs_space.ndims}q")
        self._act_struct = struct.Struct(f"<{schema.action_space.ndims}q")

    def obs_bytes(self, obs: tuple, level: int) -> bytes:
        return self._obs_struct.pack(*self.schema.obs_bins(obs, level))

    def action_bytes(self, action: tuple, level: int) -> bytes:
        return self._act_struct.pack(*self.schema.action_bins(action, level))

    def key_bytes(self, obs: tuple, history: Sequence[tuple], level: int) -> bytes:
        """Full key bytes for (obs, history) with order = len(history)."""
        order = len(history)
        if order > MAX_ORDER:
            raise ValueError(f"order {order} exceeds {MAX_ORDER}")
        if not 0 <= level <= self.schema.k:
            raise ValueError(f"level {level} outside 0..{self.schema.k}")
        parts = [_PREFIX.pack(order, level), self.obs_bytes(obs, level)]
        parts.extend(self.action_bytes(a, level) for a in history)
        return b"".join(parts)

    def query_encodings(self, obs: tuple, history: Sequence[tuple], max_order: int,
                        min_level: int = 0) -> "QueryEncodings":
        return QueryEncodings(self, obs, history, max_order, min_level)


class QueryEncodings:
    """Per-query cache of key bytes across (order, level) pairs.

    For each level the observation is encoded once and history-action
    suffixes are built incrementally, so a full ensemble sweep costs one
    quantization pass per level instead of one per grid cell. Reused
    across every ensemble in a stack that shares the same encoder.
    """

    __slots__ = ("max_order", "_keys")

    def __init__(self, enc: KeyEncoder, obs: tuple, history: Sequence[tuple],
                 max_order: int, min_level: int) -> None:
        n = min(max_order, len(history), MAX_ORDER)
        self.max_order = n
        keys: dict[tuple[int, int], bytes] = {}
        for level in range(min_level, enc.schema.k + 1):
            obs_part = enc.obs_bytes(obs, level)
            suffix = b""
            keys[(0, level)] = _PREFIX.pack(0, level) + obs_part
            for i in range(1, n + 1):
                # Order-i history is the last i actions, oldest first.
                suffix = enc.action_bytes(history[-i], level) + suffix
                keys[(i, level)] = _PREFIX.pack(i, level) + obs_part + suffix
        self._keys = keys

    def key(self, order: int, level: int) -> bytes:
        return self._keys[(order, level)]


def encode_key(
    obs: tuple,
    history: Sequence[tuple],
    schema: QuantizationSchema,
    level: int,
) -> StateKey:
    """Encode a quantized extended state at ``level``.

    ``history`` lists the most recent actions oldest first; the key's
    order is its length. Raises ValueError on dimension mismatches or a
    level outside the schema.
    """
    full = schema.encoder.key_bytes(obs, history, level)
    return StateKey(order=len(history), level=level, payload=full[_PREFIX.size:])
