from __future__ import annotations

import numpy as np
import pytest

from mrme import Continuous, Discrete, QuantizationSchema, SpaceSpec, encode_key

from .oracles import RefQuantizer


@pytest.fixture
def two_level_schema():
    obs = SpaceSpec((Continuous(0.0, 2.0),))
    act = SpaceSpec((Discrete(3),))
    return QuantizationSchema.from_steps(obs, act, [[2.0, 0.5]], [None])


class TestEncodeKey:
    def test_fine_level_bins(self, two_level_schema):
        key = encode_key((0.9,), [], two_level_schema, 1)
        assert key.order == 0
        assert key.level == 1
        assert np.frombuffer(key.payload, dtype="<i8").tolist() == [1]

    def test_coarse_level_bins(self, two_level_schema):
        key = encode_key((0.9,), [], two_level_schema, 0)
        assert np.frombuffer(key.payload, dtype="<i8").tolist() == [0]

    def test_history_appends_oldest_first(self, two_level_schema):
        key = encode_key((0.9,), [(2,), (0,)], two_level_schema, 1)
        assert key.order == 2
        assert np.frombuffer(key.payload, dtype="<i8").tolist() == [1, 2, 0]

    def test_prefix_in_full_bytes(self, two_level_schema):
        key = encode_key((0.9,), [(2,)], two_level_schema, 1)
        raw = key.to_bytes()
        assert raw[0] == 1  # order
        assert raw[1] == 1  # level
        assert raw[2:] == key.payload

    def test_dimension_mismatch(self, two_level_schema):
        with pytest.raises(ValueError):
            encode_key((0.9, 0.1), [], two_level_schema, 1)
        with pytest.raises(ValueError):
            encode_key((0.9,), [(2, 1)], two_level_schema, 1)

    def test_level_out_of_range(self, two_level_schema):
        with pytest.raises(ValueError):
            encode_key((0.9,), [], two_level_schema, 2)

    def test_matches_reference_encoder_on_random_inputs(self):
        """Byte-for-byte agreement with a naive concatenation encoder."""
        obs_space = SpaceSpec((Continuous(-1.5, 2.5), Continuous(0.0, 0.2), Discrete(5)))
        act_space = SpaceSpec((Continuous(-1.0, 1.0), Discrete(3)))
        k = 3
        schema = QuantizationSchema.from_spaces(obs_space, act_space, k=k)
        ref = RefQuantizer.from_spaces(obs_space, act_space, k=k)
        rng = np.random.default_rng(99)
        for _ in range(1000):
            obs = obs_space.sample(rng)
            history = [act_space.sample(rng) for _ in range(int(rng.integers(0, 4)))]
            level = int(rng.integers(0, k + 1))
            got = encode_key(obs, history, schema, level).to_bytes()
            want = ref.key_bytes(obs, history, level)
            assert got == want

    def test_injective_on_bins(self, two_level_schema, rng):
        """Equal keys exactly when (order, level, all bins) are equal."""
        seen = {}
        for _ in range(500):
            obs = (float(rng.uniform(0.0, 2.0)),)
            history = [(int(rng.integers(0, 3)),) for _ in range(int(rng.integers(0, 3)))]
            level = int(rng.integers(0, 2))
            ident = (
                len(history),
                level,
                two_level_schema.obs_bins(obs, level),
                tuple(two_level_schema.action_bins(a, level) for a in history),
            )
            raw = encode_key(obs, history, two_level_schema, level).to_bytes()
            if ident in seen:
                assert seen[ident] == raw
            else:
                assert raw not in seen.values()
                seen[ident] = raw

    def test_platform_stable_golden_bytes(self, two_level_schema):
        # frozen layout: u8 order, u8 level, little-endian i64 bins
        key = encode_key((1.9,), [(2,)], two_level_schema, 1).to_bytes()
        assert key.hex() == "0101" + "0300000000000000" + "0200000000000000"
