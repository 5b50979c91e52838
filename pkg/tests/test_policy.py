from __future__ import annotations

import numpy as np
import pytest

from mrme import (
    Continuous,
    DemonstrationStack,
    Discrete,
    FallbackPolicy,
    Matched,
    QuantizationSchema,
    SpaceSpec,
    Transition,
    add_demonstration,
    build_ensemble,
    demo_stack_policy,
    ensemble_policy,
    stack_policy,
    stack_stats,
)

from .oracles import RefQuantizer, brute_force_decide


def unit_setup(k=2):
    obs = SpaceSpec((Continuous(0.0, 1.0),))
    act = SpaceSpec((Discrete(4),))
    schema = QuantizationSchema.from_spaces(obs, act, k=k)
    return obs, act, schema


def transitions_from_rollout(obs_seq, action_seq, n):
    out = []
    for idx in range(len(obs_seq)):
        lo = max(0, idx - n)
        out.append(Transition(obs_seq[idx], tuple(action_seq[lo:idx]), action_seq[idx]))
    return out


class TestStackPolicy:
    """Fixed-level partial policy (the discrete-space algorithm)."""

    def test_exact_self_match_hits_highest_order(self, rng):
        _, act, schema = unit_setup()
        demo = transitions_from_rollout(
            [(0.1,), (0.2,), (0.3,)], [(1,), (2,), (3,)], n=2
        )
        ensemble = build_ensemble(demo, n=2, schema=schema)
        fallback = FallbackPolicy.uniform(act)
        decision = stack_policy(
            ensemble.column(2), (0.3,), [(1,), (2,)], schema, fallback, rng
        )
        assert decision.action == (3,)
        assert decision.provenance == Matched(0, 2, 2)

    def test_novel_history_falls_to_order_zero(self, rng):
        _, act, schema = unit_setup()
        demo = transitions_from_rollout(
            [(0.1,), (0.2,), (0.3,)], [(1,), (2,), (3,)], n=2
        )
        ensemble = build_ensemble(demo, n=2, schema=schema)
        fallback = FallbackPolicy.uniform(act)
        decision = stack_policy(
            ensemble.column(2), (0.3,), [(0,), (0,)], schema, fallback, rng
        )
        assert decision.action == (3,)
        assert decision.provenance == Matched(0, 0, 2)

    def test_unseen_bin_falls_back(self, rng):
        _, act, schema = unit_setup()
        demo = transitions_from_rollout([(0.1,)], [(1,)], n=0)
        ensemble = build_ensemble(demo, n=0, schema=schema)
        fallback = FallbackPolicy.idle((0,))
        decision = stack_policy(
            ensemble.column(2), (0.9,), [], schema, fallback, rng
        )
        assert decision.provenance is None
        assert decision.action == (0,)

    def test_mixed_levels_rejected(self, rng):
        _, act, schema = unit_setup()
        demo = transitions_from_rollout([(0.1,)], [(1,)], n=0)
        ensemble = build_ensemble(demo, n=0, schema=schema)
        models = [ensemble.model(0, 0), ensemble.model(0, 1)]
        with pytest.raises(ValueError, match="share one quantization level"):
            stack_policy(models, (0.1,), [], schema, FallbackPolicy.idle((0,)), np.random.default_rng(0))


class TestEnsemblePolicy:
    def test_level_zero_always_matches(self, rng):
        # single-step demo far from the query still answers via level 0
        _, act, schema = unit_setup(k=0)
        ensemble = build_ensemble([Transition((0.1,), (), (2,))], n=0, schema=schema)
        fallback = FallbackPolicy.uniform(act)
        decision = ensemble_policy(ensemble, (0.9,), [], fallback, rng)
        assert decision.action == (2,)
        assert decision.provenance == Matched(0, 0, 0)

    def test_exact_query_matches_finest_level(self, rng):
        _, act, schema = unit_setup(k=2)
        demo = transitions_from_rollout([(0.3,), (0.6,)], [(1,), (2,)], n=1)
        ensemble = build_ensemble(demo, n=1, schema=schema)
        decision = ensemble_policy(
            ensemble, (0.6,), [(1,)], FallbackPolicy.uniform(act), rng
        )
        assert decision.provenance.level == schema.k
        assert decision.action == (2,)

    def test_fine_discrimination_agrees_with_brute_force(self, rng):
        # two demos in one ensemble distinguishable only at the finest level
        obs_space, act, schema = unit_setup(k=2)
        # level 2 step = 0.25: 0.30 -> bin 1, 0.60 -> bin 2; level 1 step 0.5 merges
        demo = [Transition((0.30,), (), (1,)), Transition((0.60,), (), (3,))]
        ensemble = build_ensemble(demo, n=0, schema=schema)
        ref = RefQuantizer.from_spaces(obs_space, act, k=2)
        fallback = FallbackPolicy.uniform(act)
        for query, expected in [((0.26,), (1,)), ((0.55,), (3,))]:
            decision = ensemble_policy(ensemble, query, [], fallback, rng)
            assert decision.action == expected
            oracle = brute_force_decide(
                [[(t.obs, list(t.history), t.action) for t in demo]],
                query, [], n=0, quantizer=ref, k=2,
            )
            assert oracle is not None
            demo_idx, order, level, actions = oracle
            assert (demo_idx, order, level) == (0, decision.provenance.order, decision.provenance.level)
            assert decision.action in actions

    def test_min_match_level_excludes_coarse(self, rng):
        _, act, schema = unit_setup(k=2)
        ensemble = build_ensemble([Transition((0.1,), (), (2,))], n=0, schema=schema)
        fallback = FallbackPolicy.idle((0,))
        # query in another level-1 bin: only level 0 would match
        decision = ensemble_policy(ensemble, (0.9,), [], fallback, rng, min_match_level=1)
        assert decision.provenance is None


class TestDemoStackPolicy:
    def test_empty_stack_falls_back(self, rng):
        _, act, _ = unit_setup()
        stack = DemonstrationStack(FallbackPolicy.idle((3,)))
        decision = demo_stack_policy(stack, (0.5,), [], rng)
        assert decision.provenance is None
        assert decision.action == (3,)

    def test_newer_demo_corrects_older(self, rng):
        _, act, schema = unit_setup()
        stack = DemonstrationStack(FallbackPolicy.uniform(act))
        add_demonstration(stack, [Transition((0.5,), (), (1,))], 0, schema, "old")
        add_demonstration(stack, [Transition((0.5,), (), (2,))], 0, schema, "new")
        for _ in range(200):
            decision = demo_stack_policy(stack, (0.5,), [], rng)
            assert decision.action == (2,)
            assert decision.provenance.demo_index == 0

    def test_level_zero_totality_shadows_older_fine_match(self, rng):
        # documented consequence: the newer ensemble is total at level 0,
        # so an older, finer match never gets consulted at min level 0 ...
        _, act, schema = unit_setup()
        stack = DemonstrationStack(FallbackPolicy.uniform(act))
        add_demonstration(stack, [Transition((0.9,), (), (1,))], 0, schema, "older-fine")
        add_demonstration(stack, [Transition((0.1,), (), (2,))], 0, schema, "newer-coarse")
        decision = demo_stack_policy(stack, (0.9,), [], rng)
        assert decision.provenance == Matched(0, 0, 0)
        assert decision.action == (2,)

        # ... while min_match_level=1 keeps the older demonstration reachable
        stack.min_match_level = 1
        decision = demo_stack_policy(stack, (0.9,), [], rng)
        assert decision.provenance.demo_index == 1
        assert decision.action == (1,)

    def test_consultation_is_reverse_insertion_order(self, rng):
        _, act, schema = unit_setup()
        stack = DemonstrationStack(FallbackPolicy.uniform(act))
        for marker in range(4):
            add_demonstration(
                stack, [Transition((0.5,), (), (marker % 4,))], 0, schema, f"d{marker}"
            )
        assert [e.source_id for e in stack.ensembles] == ["d3", "d2", "d1", "d0"]

    def test_add_demonstration_immutability(self, rng):
        _, act, schema = unit_setup()
        stack = DemonstrationStack(FallbackPolicy.uniform(act))
        add_demonstration(stack, [Transition((0.5,), (), (1,))], 0, schema)
        first = stack.ensembles[0]
        keys_before = first.key_count
        add_demonstration(stack, [Transition((0.6,), (), (2,))], 0, schema)
        assert stack.ensembles[1] is first
        assert first.key_count == keys_before

    def test_empty_demo_rejected(self):
        _, act, schema = unit_setup()
        stack = DemonstrationStack(FallbackPolicy.uniform(act))
        with pytest.raises(ValueError, match="empty"):
            add_demonstration(stack, [], 0, schema)

    def test_lookup_cost_grows_at_most_linearly(self, rng):
        """Per-query lookups after d demos <= d x per-query lookups after 1."""
        _, act, schema = unit_setup(k=2)
        n = 2

        def fresh_stack(demos):
            stack = DemonstrationStack(FallbackPolicy.uniform(act), min_match_level=1)
            r = np.random.default_rng(5)
            for d in range(demos):
                obs_seq = [tuple(r.uniform(0, 1, 1)) for _ in range(5)]
                act_seq = [(int(r.integers(0, 4)),) for _ in range(5)]
                add_demonstration(
                    stack, transitions_from_rollout(obs_seq, act_seq, n), n, schema
                )
            return stack

        def per_query_lookups(stack):
            queries = 200
            r = np.random.default_rng(17)
            before = stack.counter.lookups
            for _ in range(queries):
                demo_stack_policy(stack, tuple(r.uniform(0, 1, 1)), [], r)
            return (stack.counter.lookups - before) / queries

        single = per_query_lookups(fresh_stack(1))
        fifty = per_query_lookups(fresh_stack(50))
        assert fifty <= 50 * single
        # and the hard bound: stack_size * (N+1) * (K+1)
        assert fifty <= 50 * (n + 1) * (2 + 1)


class TestMonotonicity:
    """Key-equality monotonicity across levels and orders."""

    def setup_method(self):
        self.obs_space = SpaceSpec((Continuous(-2.0, 3.0), Continuous(0.0, 0.5)))
        self.act_space = SpaceSpec((Continuous(-1.0, 1.0), Discrete(3)))
        self.schema = QuantizationSchema.from_spaces(self.obs_space, self.act_space, k=4)

    def random_pair(self, rng):
        obs = self.obs_space.sample(rng)
        hist = [self.act_space.sample(rng) for _ in range(int(rng.integers(0, 4)))]
        return obs, hist

    def test_level_monotonicity(self, rng):
        enc = self.schema.encoder
        for _ in range(2000):
            a_obs, a_hist = self.random_pair(rng)
            if rng.random() < 0.5:
                b_obs, b_hist = self.random_pair(rng)
                b_hist = b_hist[: len(a_hist)] + a_hist[len(b_hist):]
            else:
                # nearby pair, likely equal at some level
                b_obs = tuple(v + float(rng.normal(0, 0.02)) for v in a_obs)
                b_hist = list(a_hist)
            for j in range(self.schema.k, 0, -1):
                ka = enc.key_bytes(a_obs, a_hist, j)
                kb = enc.key_bytes(b_obs, b_hist, j)
                if ka == kb:
                    assert enc.key_bytes(a_obs, a_hist, j - 1) == enc.key_bytes(
                        b_obs, b_hist, j - 1
                    )

    def test_order_monotonicity(self, rng):
        enc = self.schema.encoder
        for _ in range(2000):
            a_obs, a_hist = self.random_pair(rng)
            b_obs, b_hist = self.random_pair(rng)
            i = min(len(a_hist), len(b_hist))
            if i == 0:
                continue
            level = int(rng.integers(0, self.schema.k + 1))
            ka = enc.key_bytes(a_obs, a_hist[-i:], level)
            kb = enc.key_bytes(b_obs, b_hist[-i:], level)
            if ka == kb:
                # dropping the oldest history entry keeps the keys equal
                for shorter in range(i - 1, -1, -1):
                    assert enc.key_bytes(a_obs, a_hist[len(a_hist) - shorter:], level) == \
                        enc.key_bytes(b_obs, b_hist[len(b_hist) - shorter:], level)


class TestProperties:
    def test_original_action_fidelity(self, rng):
        obs_space = SpaceSpec((Continuous(0.0, 1.0),))
        act_space = SpaceSpec((Continuous(-1.0, 1.0),))
        schema = QuantizationSchema.from_spaces(obs_space, act_space, k=3)
        stack = DemonstrationStack(FallbackPolicy.uniform(act_space))
        all_actions = set()
        r = np.random.default_rng(8)
        for _ in range(5):
            obs_seq = [tuple(r.uniform(0, 1, 1)) for _ in range(20)]
            act_seq = [tuple(r.uniform(-1, 1, 1)) for _ in range(20)]
            all_actions.update(act_seq)
            add_demonstration(stack, transitions_from_rollout(obs_seq, act_seq, 2), 2, schema)
        for _ in range(300):
            obs = obs_space.sample(rng)
            hist = [act_space.sample(rng) for _ in range(int(rng.integers(0, 3)))]
            decision = demo_stack_policy(stack, obs, hist, rng)
            assert decision.matched
            assert decision.action in all_actions

    def test_decision_determinism(self):
        _, act, schema = unit_setup()
        act_space = act

        def build():
            stack = DemonstrationStack(FallbackPolicy.uniform(act_space))
            r = np.random.default_rng(11)
            for _ in range(3):
                obs_seq = [tuple(r.uniform(0, 1, 1)) for _ in range(10)]
                act_seq = [(int(r.integers(0, 4)),) for _ in range(10)]
                add_demonstration(stack, transitions_from_rollout(obs_seq, act_seq, 2), 2, schema)
            return stack

        def trace(stack):
            r = np.random.default_rng(23)
            out = []
            for _ in range(200):
                obs = (float(r.uniform(0, 1)),)
                hist = [(int(r.integers(0, 4)),) for _ in range(int(r.integers(0, 3)))]
                out.append(demo_stack_policy(stack, obs, hist, r))
            return out

        assert trace(build()) == trace(build())


class TestStackStats:
    def test_empty_stack_zeros(self):
        _, act, _ = unit_setup()
        stack = DemonstrationStack(FallbackPolicy.uniform(act))
        stats = stack_stats(stack)
        assert stats["ensembles"] == 0
        assert stats["total_keys"] == 0
        assert stats["total_actions"] == 0
        assert stats["lookups"] == 0

    def test_three_step_demo_counts(self):
        _, act, schema1 = unit_setup()
        obs_space = SpaceSpec((Continuous(0.0, 1.0),))
        schema = QuantizationSchema.from_spaces(obs_space, act, k=1)
        stack = DemonstrationStack(FallbackPolicy.uniform(act))
        demo = transitions_from_rollout(
            [(0.1,), (0.5,), (0.9,)], [(0,), (1,), (2,)], n=1
        )
        add_demonstration(stack, demo, 1, schema)
        assert stack_stats(stack)["total_actions"] == 10

    def test_counters_monotone(self, rng):
        _, act, schema = unit_setup()
        stack = DemonstrationStack(FallbackPolicy.uniform(act))
        add_demonstration(stack, [Transition((0.5,), (), (1,))], 0, schema)
        seen = 0
        for _ in range(10):
            demo_stack_policy(stack, (0.5,), [], rng)
            now = stack_stats(stack)["lookups"]
            assert now >= seen
            seen = now
