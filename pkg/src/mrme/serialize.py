"""Versioned binary model file format ("MRME", version 1).

Layout, all integers little-endian:

    magic  b"MRME"
    u8     format version (1)
    u32    header length, then the header block:
             observation SpaceSpec, action SpaceSpec, quantization ladders,
             N, K, min_match_level, fallback policy, ensemble count
    per ensemble: source id, then (N+1)*(K+1) model sections, each a u32
             entry count followed by u32-length-prefixed keys and their
             action multisets (fixed-width values, f64/i64 per dim kind)
    u32    CRC32 of every preceding byte

Round-trips are bit-exact: a deserialized stack makes identical decisions
for any (obs, history, rng seed). All parse errors carry the byte offset.
"""

from __future__ import annotations

import struct
import zlib
from typing import BinaryIO

from .ensemble import ActionBag, MarkovEnsemble
from .policy import DemonstrationStack, FallbackKind, FallbackPolicy
from .quantize import QuantizationSchema, _DimLadder
from .spaces import Continuous, Discrete, SpaceSpec

MAGIC = b"MRME"
FORMAT_VERSION = 1

_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")
_I64 = struct.Struct("<q")

_DIM_CONTINUOUS = 0
_DIM_DISCRETE = 1
_FALLBACK_UNIFORM = 0
_FALLBACK_IDLE = 1


class ModelFormatError(Exception):
    """Malformed model bytes; ``offset`` points at the failing byte."""

    def __init__(self, offset: int, message: str) -> None:
        super().__init__(f"at byte {offset}: {message}")
        self.offset = offset


class _Writer:
    def __init__(self) -> None:
        self.buf = bytearray()

    def u8(self, v: int) -> None:
        self.buf += _U8.pack(v)

    def u32(self, v: int) -> None:
        self.buf += _U32.pack(v)

    def u64(self, v: int) -> None:
        self.buf += _U64.pack(v)

    def f64(self, v: float) -> None:
        self.buf += _F64.pack(v)

    def i64(self, v: int) -> None:
        self.buf += _I64.pack(v)

    def raw(self, b: bytes) -> None:
        self.buf += b

    def block(self, b: bytes) -> None:
        self.u32(len(b))
        self.raw(b)


class _Reader:
    def __init__(self, data: bytes, offset: int = 0) -> None:
        self.data = data
        self.offset = offset

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise ModelFormatError(self.offset, f"truncated while reading {what}")
        out = self.data[self.offset : self.offset + n]
        self.offset += n
        return out

    def u8(self, what: str) -> int:
        return _U8.unpack(self.take(1, what))[0]

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return _U64.unpack(self.take(8, what))[0]

    def f64(self, what: str) -> float:
        return _F64.unpack(self.take(8, what))[0]

    def i64(self, what: str) -> int:
        return _I64.unpack(self.take(8, what))[0]

    def block(self, what: str) -> bytes:
        n = self.u32(f"{what} length")
        return self.take(n, what)


def _write_space(w: _Writer, space: SpaceSpec) -> None:
    w.u32(space.ndims)
    for dim in space.dims:
        if isinstance(dim, Continuous):
            w.u8(_DIM_CONTINUOUS)
            w.f64(dim.min)
            w.f64(dim.max)
        else:
            w.u8(_DIM_DISCRETE)
            w.u64(dim.cardinality)


def _read_space(r: _Reader) -> SpaceSpec:
    ndims = r.u32("space dim count")
    dims = []
    for _ in range(ndims):
        kind = r.u8("dim kind")
        if kind == _DIM_CONTINUOUS:
            lo = r.f64("dim min")
            hi = r.f64("dim max")
            dims.append(Continuous(lo, hi))
        elif kind == _DIM_DISCRETE:
            dims.append(Discrete(r.u64("dim cardinality")))
        else:
            raise ModelFormatError(r.offset - 1, f"unknown dim kind {kind}")
    return SpaceSpec(dims)


def _write_ladders(w: _Writer, schema: QuantizationSchema, which: str) -> None:
    ladders = schema._obs_ladders if which == "obs" else schema._action_ladders
    for lad in ladders:
        if lad is None:
            w.u8(0)
        else:
            w.u8(1)
            w.f64(lad.offset)
            w.f64(lad.range)
            w.u32(len(lad.steps))
            for s in lad.steps:
                w.f64(s)


def _read_ladders(r: _Reader, space: SpaceSpec) -> list:
    steps_per_dim = []
    for dim in space.dims:
        present = r.u8("ladder flag")
        if not present:
            if isinstance(dim, Continuous):
                raise ModelFormatError(r.offset - 1, "continuous dim missing its ladder")
            steps_per_dim.append(None)
            continue
        if isinstance(dim, Discrete):
            raise ModelFormatError(r.offset - 1, "discrete dim carries a ladder")
        _offset = r.f64("ladder offset")
        _range = r.f64("ladder range")
        count = r.u32("ladder step count")
        steps_per_dim.append([r.f64("ladder step") for _ in range(count)])
    return steps_per_dim


def _action_codec(space: SpaceSpec):
    fmt = "<" + "".join("d" if isinstance(d, Continuous) else "q" for d in space.dims)
    st = struct.Struct(fmt)
    kinds = [isinstance(d, Continuous) for d in space.dims]

    def pack(action: tuple) -> bytes:
        return st.pack(*action)

    def unpack(data: bytes) -> tuple:
        vals = st.unpack(data)
        return tuple(float(v) if cont else int(v) for v, cont in zip(vals, kinds))

    return st.size, pack, unpack


def serialize_stack(stack: DemonstrationStack) -> bytes:
    """Encode a homogeneous stack (one schema and N across ensembles)."""
    if stack.fallback.kind is FallbackKind.CUSTOM:
        raise ValueError("custom fallback policies cannot be serialized")
    ensembles = stack.ensembles
    if ensembles:
        schema = ensembles[0].schema
        n = ensembles[0].n
        for e in ensembles:
            if e.schema != schema or e.n != n:
                raise ValueError("all ensembles must share one schema and max order")
    else:
        schema = None
        n = 0

    w = _Writer()
    w.raw(MAGIC)
    w.u8(FORMAT_VERSION)

    header = _Writer()
    if schema is None:
        # Fallback-only stacks still carry spaces when the fallback has them.
        obs_space = SpaceSpec(())
        action_space = (
            stack.fallback.action_space
            if stack.fallback.action_space is not None
            else SpaceSpec(())
        )
        header.u8(0)  # no schema
        _write_space(header, obs_space)
        _write_space(header, action_space)
        k = 0
    else:
        header.u8(1)
        _write_space(header, schema.obs_space)
        _write_space(header, schema.action_space)
        _write_ladders(header, schema, "obs")
        _write_ladders(header, schema, "action")
        k = schema.k
    header.u32(n)
    header.u32(k)
    header.u32(stack.min_match_level)
    if stack.fallback.kind is FallbackKind.UNIFORM_RANDOM:
        header.u8(_FALLBACK_UNIFORM)
    else:
        header.u8(_FALLBACK_IDLE)
        action_space = (
            schema.action_space if schema is not None else stack.fallback.action_space
        )
        if action_space is None or action_space.ndims != len(stack.fallback.idle_action):
            raise ValueError("idle fallback action does not match the action space")
        _, pack, _ = _action_codec(action_space)
        header.block(pack(stack.fallback.idle_action))
    header.u32(len(ensembles))
    w.block(bytes(header.buf))

    if schema is not None:
        _, pack, _ = _action_codec(schema.action_space)
        for ensemble in ensembles:
            sid = ensemble.source_id.encode("utf-8")
            w.block(sid)
            for i in range(n + 1):
                for j in range(k + 1):
                    table = ensemble.grid[i][j].table
                    w.u32(len(table))
                    for key, bag in table.items():
                        w.block(key)
                        w.u32(len(bag))
                        for action in bag:
                            w.raw(pack(action))

    w.u32(zlib.crc32(bytes(w.buf)))
    return bytes(w.buf)


def deserialize_stack(data: bytes) -> DemonstrationStack:
    """Parse model bytes back into a stack; raises ModelFormatError."""
    if len(data) < 4:
        raise ModelFormatError(0, "file shorter than magic")
    if data[:4] != MAGIC:
        raise ModelFormatError(0, f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 9:
        raise ModelFormatError(4, "truncated before version/header")
    version = data[4]
    if version != FORMAT_VERSION:
        raise ModelFormatError(4, f"unsupported format version {version}")
    if len(data) < 4 + 1 + 4:
        raise ModelFormatError(5, "truncated header length")
    stored_crc = _U32.unpack(data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4])
    if stored_crc != actual_crc:
        raise ModelFormatError(
            len(data) - 4, f"CRC mismatch: stored {stored_crc:#x}, computed {actual_crc:#x}"
        )

    r = _Reader(data[:-4], offset=5)
    header = _Reader(r.block("header"), offset=0)
    header_base = r.offset - len(header.data)

    def hdr_err(msg: str) -> ModelFormatError:
        return ModelFormatError(header_base + header.offset, msg)

    has_schema = header.u8("schema flag")
    obs_space = _read_space(header)
    action_space = _read_space(header)
    schema: QuantizationSchema | None = None
    if has_schema:
        obs_steps = _read_ladders(header, obs_space)
        act_steps = _read_ladders(header, action_space)
        try:
            schema = QuantizationSchema.from_steps(
                obs_space, action_space, obs_steps, act_steps
            )
        except ValueError as exc:
            raise hdr_err(f"invalid schema: {exc}") from exc
    n = header.u32("max order")
    k = header.u32("max level")
    if schema is not None and schema.k != k:
        raise hdr_err(f"header K {k} disagrees with ladder K {schema.k}")
    min_match_level = header.u32("min match level")
    fb_kind = header.u8("fallback kind")
    if fb_kind == _FALLBACK_UNIFORM:
        fallback = FallbackPolicy.uniform(action_space)
    elif fb_kind == _FALLBACK_IDLE:
        raw = header.block("idle action")
        size, _, unpack = _action_codec(action_space)
        if len(raw) != size:
            raise hdr_err(f"idle action is {len(raw)} bytes, expected {size}")
        fallback = FallbackPolicy.idle(unpack(raw))
    else:
        raise hdr_err(f"unknown fallback kind {fb_kind}")
    ensemble_count = header.u32("ensemble count")
    if ensemble_count and schema is None:
        raise hdr_err("ensembles present but schema flag is 0")

    ensembles = []
    if ensemble_count:
        size, _, unpack = _action_codec(action_space)
        for _ in range(ensemble_count):
            sid = r.block("source id").decode("utf-8", errors="replace")
            ensemble = MarkovEnsemble(n, schema, sid)
            for i in range(n + 1):
                for j in range(k + 1):
                    count = r.u32("entry count")
                    table = ensemble.grid[i][j].table
                    for _ in range(count):
                        key = r.block("key")
                        n_actions = r.u32("action count")
                        if n_actions == 0:
                            raise ModelFormatError(r.offset - 4, "empty action bag")
                        bag = ActionBag()
                        for _ in range(n_actions):
                            bag.add(unpack(r.take(size, "action")))
                        table[key] = bag
            ensembles.append(ensemble)
    if r.offset != len(r.data):
        raise ModelFormatError(r.offset, f"{len(r.data) - r.offset} trailing bytes")

    return DemonstrationStack(fallback, min_match_level, ensembles)


def save_stack(stack: DemonstrationStack, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_stack(stack))


def load_stack(path) -> DemonstrationStack:
    with open(path, "rb") as fh:
        return deserialize_stack(fh.read())
