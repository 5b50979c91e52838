from __future__ import annotations

import numpy as np
import pytest

from mrme import (
    Continuous,
    DemonstrationStack,
    Discrete,
    FallbackPolicy,
    ModelFormatError,
    QuantizationSchema,
    SpaceSpec,
    Transition,
    add_demonstration,
    demo_stack_policy,
    deserialize_stack,
    serialize_stack,
)


def build_random_stack(seed, demos=3, steps=12, min_match_level=0):
    obs_space = SpaceSpec((Continuous(-1.0, 2.0), Continuous(0.0, 0.1)))
    act_space = SpaceSpec((Continuous(-1.0, 1.0), Discrete(3)))
    schema = QuantizationSchema.from_spaces(obs_space, act_space, k=3)
    stack = DemonstrationStack(FallbackPolicy.uniform(act_space), min_match_level)
    r = np.random.default_rng(seed)
    for d in range(demos):
        transitions = []
        history: list[tuple] = []
        for _ in range(steps):
            obs = obs_space.sample(r)
            action = act_space.sample(r)
            transitions.append(Transition(obs, tuple(history[-2:]), action))
            history.append(action)
        add_demonstration(stack, transitions, 2, schema, f"demo{d}")
    return stack, obs_space, act_space


def decision_trace(stack, obs_space, act_space, seed, queries=1000):
    r = np.random.default_rng(seed)
    out = []
    for _ in range(queries):
        obs = obs_space.sample(r)
        hist = [act_space.sample(r) for _ in range(int(r.integers(0, 3)))]
        out.append(demo_stack_policy(stack, obs, hist, r))
    return out


class TestRoundTrip:
    def test_empty_stack(self):
        act_space = SpaceSpec((Discrete(3),))
        stack = DemonstrationStack(FallbackPolicy.uniform(act_space), min_match_level=1)
        restored = deserialize_stack(serialize_stack(stack))
        assert len(restored) == 0
        assert restored.min_match_level == 1
        assert restored.fallback.action_space == act_space

    def test_three_ensembles_identical_decision_trace(self):
        stack, obs_space, act_space = build_random_stack(1)
        restored = deserialize_stack(serialize_stack(stack))
        assert decision_trace(stack, obs_space, act_space, 5) == decision_trace(
            restored, obs_space, act_space, 5
        )

    def test_restored_ensembles_share_one_schema_instance(self):
        stack, _, _ = build_random_stack(2)
        restored = deserialize_stack(serialize_stack(stack))
        schemas = {id(e.schema) for e in restored.ensembles}
        assert len(schemas) == 1
        assert restored.ensembles[0].schema == stack.ensembles[0].schema

    def test_idle_fallback_round_trip(self):
        stack, obs_space, act_space = build_random_stack(3, demos=1)
        stack.fallback = FallbackPolicy.idle((0.5, 2))
        restored = deserialize_stack(serialize_stack(stack))
        assert restored.fallback.idle_action == (0.5, 2)

    def test_serialized_bytes_stable(self):
        stack, _, _ = build_random_stack(4)
        assert serialize_stack(stack) == serialize_stack(stack)

    def test_custom_fallback_rejected(self):
        stack, _, _ = build_random_stack(5, demos=1)
        stack.fallback = FallbackPolicy.custom(lambda obs, rng: (0.0, 0))
        with pytest.raises(ValueError, match="custom"):
            serialize_stack(stack)


class TestFormatErrors:
    def test_bad_magic(self):
        with pytest.raises(ModelFormatError) as err:
            deserialize_stack(b"NOPE" + b"\x00" * 20)
        assert err.value.offset == 0

    def test_bad_version(self):
        stack, _, _ = build_random_stack(6, demos=1)
        data = bytearray(serialize_stack(stack))
        data[4] = 99
        with pytest.raises(ModelFormatError, match="version"):
            deserialize_stack(bytes(data))

    def test_truncation(self):
        stack, _, _ = build_random_stack(7, demos=1)
        data = serialize_stack(stack)
        with pytest.raises(ModelFormatError):
            deserialize_stack(data[: len(data) // 2])

    def test_crc_detects_flipped_byte(self):
        stack, _, _ = build_random_stack(8, demos=1)
        data = bytearray(serialize_stack(stack))
        data[len(data) // 2] ^= 0xFF
        with pytest.raises(ModelFormatError, match="CRC"):
            deserialize_stack(bytes(data))

    def test_corrupted_length_field_is_an_error_not_a_crash(self):
        stack, _, _ = build_random_stack(9, demos=1)
        data = bytearray(serialize_stack(stack))
        # header length field lives right after magic+version
        data[5:9] = (0xFFFFFFFF).to_bytes(4, "little")
        # fix up the CRC so the parser reaches the length field
        import zlib

        body = bytes(data[:-4])
        data[-4:] = zlib.crc32(body).to_bytes(4, "little")
        with pytest.raises(ModelFormatError, match="truncated"):
            deserialize_stack(bytes(data))

    def test_error_carries_byte_offset(self):
        with pytest.raises(ModelFormatError) as err:
            deserialize_stack(b"MRM")
        assert err.value.offset == 0
        assert "byte" in str(err.value)

    def test_heterogeneous_stack_rejected(self):
        stack, _, _ = build_random_stack(10, demos=1)
        other_obs = SpaceSpec((Continuous(0.0, 1.0),))
        other_act = SpaceSpec((Discrete(2),))
        other_schema = QuantizationSchema.from_spaces(other_obs, other_act, k=1)
        foreign = DemonstrationStack(FallbackPolicy.uniform(other_act))
        add_demonstration(foreign, [Transition((0.5,), (), (1,))], 0, other_schema)
        stack.push(foreign.ensembles[0])
        with pytest.raises(ValueError, match="share"):
            serialize_stack(stack)
