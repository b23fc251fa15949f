import math
from itertools import combinations

import pytest

from gramattack.attack import (
    AttackConfig,
    beam_attack,
    budget,
    genetic_attack,
    greedy_attack,
    instance_rng,
    run_campaign,
    token_importance,
    write_campaign,
)
from gramattack.confusion import ConfusionSet, ErrorType, default_sets
from gramattack.errors import ValidationError
from gramattack.morphology import default_lexicon
from gramattack.oracle import CachingOracle, ToyClassifier
from gramattack.perturb import apply_ops, build_operation_sets
from gramattack.textmodel import TaggedSentence, TaskInstance

from helpers import toy_campaign_fixture

SETS = default_sets()
LEX = default_lexicon()


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def single(id_, text, label="1", frozen=()):
    return TaskInstance(
        id_,
        (TaggedSentence.from_surfaces(text.split(), frozen=frozen),),
        0,
        label,
        "single",
    )


def linear(weights):
    return ToyClassifier(["0", "1"], {"1": weights, "0": {}})


def flips(oracle, inst, ops):
    """Independent flip check: rebuild the text and re-query a fresh query."""
    sent = apply_ops(inst.mutable(), ops)
    probs = oracle.predict_texts([(sent.text(), None)])[0]
    return max(sorted(probs), key=lambda k: probs[k]) != inst.gold_label


class TestBudget:
    @pytest.mark.parametrize("n,expected", [(20, 3), (3, 1), (100, 15), (14, 2)])
    def test_fifteen_percent(self, n, expected):
        assert budget(n, 0.15) == expected

    def test_minimum_one(self):
        assert budget(1, 0.15) == 1

    def test_positive_length_required(self):
        with pytest.raises(ValidationError):
            budget(0, 0.15)


class TestTokenImportance:
    def test_deletion_drop_order(self):
        oracle = CachingOracle(linear({"the": 2.0}))
        inst = single("i", "the cat sleeps")
        order = token_importance(inst, oracle)
        assert order == [0, 1, 2]

    def test_tie_breaks_by_index(self):
        oracle = CachingOracle(linear({}))
        inst = single("i", "cat dog tree")
        assert token_importance(inst, oracle) == [0, 1, 2]

    def test_all_frozen_rejected(self):
        oracle = CachingOracle(linear({}))
        inst = single("i", "cat dog", frozen=[0, 1])
        with pytest.raises(ValidationError, match="nothing mutable"):
            token_importance(inst, oracle)

    def test_frozen_excluded(self):
        oracle = CachingOracle(linear({"the": 2.0}))
        inst = single("i", "the cat sleeps", frozen=[0])
        assert token_importance(inst, oracle) == [1, 2]

    def test_single_token_sentence(self):
        oracle = CachingOracle(linear({"cat": 1.0}))
        inst = single("i", "cat")
        assert token_importance(inst, oracle) == [0]


class TestGreedy:
    def test_article_substitution_flip(self):
        oracle = linear({"the": 2.0, "a": -1.0})
        inst = single("i", "the cat sleeps")
        res = greedy_attack(inst, oracle, SETS, LEX, AttackConfig())
        assert res.success
        assert res.adversarial.surfaces() == ["a", "cat", "sleeps"]
        assert abs(res.p_gold_before - sigmoid(2.0)) < 1e-9
        assert abs(res.final_gold_prob - sigmoid(-1.0)) < 1e-9
        assert len(res.applied_ops) == 1

    def test_empty_operation_sets(self):
        oracle = linear({"quopt": 1.0})
        inst = single("i", "quopt vexum")
        res = greedy_attack(inst, oracle, SETS, LEX, AttackConfig())
        assert not res.success
        assert res.applied_ops == ()
        assert res.adversarial == inst.mutable()

    def test_budget_one_no_flip_returns_original(self):
        oracle = linear({"on": 10.0, "zibber": 0.3})
        inst = single("i", "on zibber zibber zibber")
        opset = build_operation_sets(inst.mutable(), SETS, LEX)
        assert opset, "fixture needs candidate ops"
        assert not any(flips(oracle, inst, [op]) for op in opset)
        res = greedy_attack(inst, oracle, SETS, LEX, AttackConfig())
        assert not res.success
        assert res.adversarial == inst.mutable()
        assert res.final_gold_prob == res.p_gold_before

    def test_trace_strictly_decreasing(self):
        oracle = linear({"on": 4.0, "in": 2.0, "cat": 1.0, "cats": 0.5})
        inst = single("i", "on cat on cat on cat on cat")
        res = greedy_attack(inst, oracle, SETS, LEX, AttackConfig())
        trace = [res.p_gold_before] + list(res.trace)
        assert all(b < a for a, b in zip(trace, trace[1:]))

    def test_budget_respected(self):
        oracle = linear({"on": 3.0, "in": 2.9, "cat": 2.0})
        inst = single("i", " ".join(["on", "cat"] * 10))
        res = greedy_attack(inst, oracle, SETS, LEX, AttackConfig())
        assert len(res.applied_ops) <= budget(20, 0.15)

    def test_frozen_never_touched(self):
        oracle = linear({"the": 5.0, "a": -5.0})
        inst = single("i", "the cat sleeps", frozen=[0])
        res = greedy_attack(inst, oracle, SETS, LEX, AttackConfig())
        for op in res.applied_ops + res.explored_ops:
            assert 0 not in [r[1] for r in op.regions() if r[0] == "tok"]


def interacting_fixture():
    """A weak improvement on the top token burns budget that the only
    flipping pair needs; beam keeps the skipping stream alive."""
    fillers_zero = ["f1e", "f2e", "f3e", "f4e", "f5e", "f6e", "f7e", "f8e", "f9e"]
    tokens = ["on", "at", "to"] + fillers_zero + ["zorp", "dorp"]
    weights = {
        "on": 3.0, "at": 2.0, "to": 2.0,
        "in": 2.5, "by": -0.4, "up": -0.4,
        "zorp": -1.2, "dorp": -1.2,
    }
    prep = ConfusionSet(
        ErrorType.PREP,
        ("on", "in", "at", "by", "to", "up"),
        {"on": {"in": 1.0}, "at": {"by": 1.0}, "to": {"up": 1.0}},
    )
    sets = dict(default_sets())
    sets[ErrorType.PREP] = prep
    inst = single("ix", " ".join(tokens))
    return inst, linear(weights), sets


class TestBeam:
    def test_k1_equals_greedy_basic(self):
        oracle = linear({"the": 2.0, "a": -1.0})
        inst = single("i", "the cat sleeps on a mat")
        g = greedy_attack(inst, oracle, SETS, LEX, AttackConfig())
        b = beam_attack(inst, oracle, SETS, LEX, AttackConfig(beam_size=1))
        assert g.applied_ops == b.applied_ops
        assert g.final_gold_prob == b.final_gold_prob
        assert g.success == b.success

    def test_beam_beats_greedy_on_interacting_fixture(self):
        inst, oracle, sets = interacting_fixture()
        n = len(inst.mutable())
        b = budget(n, 0.15)
        assert b == 2

        opset = list(build_operation_sets(inst.mutable(), sets, LEX))
        assert len(opset) == 3
        flipping_singles = [op for op in opset if flips(oracle, inst, [op])]
        assert flipping_singles == []
        flipping_pairs = [
            pair
            for pair in combinations(opset, 2)
            if flips(oracle, inst, list(pair))
        ]
        assert len(flipping_pairs) == 1
        positions = sorted(op.position for op in flipping_pairs[0])
        assert positions == [1, 2]

        greedy_res = greedy_attack(inst, oracle, sets, LEX, AttackConfig())
        assert not greedy_res.success
        beam_res = beam_attack(
            inst, oracle, sets, LEX, AttackConfig(algorithm="beam", beam_size=5)
        )
        assert beam_res.success
        assert sorted(op.position for op in beam_res.applied_ops) == positions

    def test_empty_ops_fails(self):
        oracle = linear({"quopt": 1.0})
        inst = single("i", "quopt vexum")
        res = beam_attack(inst, oracle, SETS, LEX, AttackConfig(beam_size=3))
        assert not res.success

    def test_per_stream_budget(self):
        inst, oracle, sets = interacting_fixture()
        res = beam_attack(inst, oracle, sets, LEX, AttackConfig(beam_size=5))
        assert len(res.applied_ops) <= 2


class TestGenetic:
    def test_enumerates_trivial_flip_in_generation_zero(self):
        oracle = linear({"the": 2.0, "a": -1.0})
        inst = single("i", "the cat sleeps")
        opset = list(build_operation_sets(inst.mutable(), SETS, LEX))
        assert len(opset) <= 60
        assert any(flips(oracle, inst, [op]) for op in opset)
        for seed in (0, 1, 99):
            res = genetic_attack(
                inst, oracle, SETS, LEX, AttackConfig(algorithm="genetic", seed=seed)
            )
            assert res.success
            assert len(res.applied_ops) == 1
            assert len(res.trace) == 1

    def test_no_ops_immediate_failure(self):
        oracle = linear({"quopt": 1.0})
        inst = single("i", "quopt vexum")
        res = genetic_attack(inst, oracle, SETS, LEX, AttackConfig())
        assert not res.success
        assert res.oracle_queries <= 1

    def test_seed_determinism(self, tmp_path):
        inst, oracle, sets = interacting_fixture()
        cfg = AttackConfig(algorithm="genetic", seed=13)
        r1 = genetic_attack(inst, oracle, sets, LEX, cfg,
                            rng=instance_rng(13, inst.id))
        r2 = genetic_attack(inst, oracle, sets, LEX, cfg,
                            rng=instance_rng(13, inst.id))
        assert r1 == r2

    def test_elite_trace_non_increasing(self):
        inst, oracle, sets = interacting_fixture()
        res = genetic_attack(
            inst, oracle, sets, LEX,
            AttackConfig(algorithm="genetic", seed=3, population=8),
            rng=instance_rng(3, inst.id),
        )
        assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))

    def test_budget_respected(self):
        inst, oracle, sets = interacting_fixture()
        for seed in range(5):
            res = genetic_attack(
                inst, oracle, sets, LEX,
                AttackConfig(algorithm="genetic", seed=seed),
                rng=instance_rng(seed, inst.id),
            )
            assert len(res.applied_ops) <= 2
            for member in (res.applied_ops, res.explored_ops):
                assert len(member) <= 2


class TestRunCampaign:
    def make_mixed_dataset(self):
        flippable = [single(f"f{i}", "the cat sleeps") for i in range(4)]
        stubborn = [
            single(f"s{i}", "on zibber zibber zibber") for i in range(6)
        ]
        oracle = linear({"the": 2.0, "a": -1.0, "on": 10.0, "zibber": 0.3})
        return flippable + stubborn, oracle

    def test_success_rate(self):
        dataset, oracle = self.make_mixed_dataset()
        results, summary = run_campaign(dataset, oracle, SETS, LEX, AttackConfig())
        assert summary.attacked == 10
        assert summary.successes == 4
        assert summary.success_rate == 0.40

    def test_harm_counts(self):
        dataset, oracle = self.make_mixed_dataset()
        _, summary = run_campaign(dataset, oracle, SETS, LEX, AttackConfig())
        assert summary.harm_counts["ArtOrDet"] == 4
        assert summary.harm_counts["SVA"] == 0

    def test_wrong_predictions_skipped(self):
        dataset = [single("w", "the cat", label="0")]
        oracle = linear({"the": 2.0})
        results, summary = run_campaign(dataset, oracle, SETS, LEX, AttackConfig())
        assert summary.attacked == 0
        assert summary.skipped_incorrect == 1
        assert summary.success_rate is None

    def test_soundness_recheck(self):
        dataset, oracle = self.make_mixed_dataset()
        results, _ = run_campaign(dataset, oracle, SETS, LEX, AttackConfig())
        for res in results:
            if res.success:
                inst = next(d for d in dataset if d.id == res.instance_id)
                assert flips(oracle, inst, res.applied_ops)

    def test_parallel_matches_serial(self):
        dataset, oracle = self.make_mixed_dataset()
        serial, _ = run_campaign(dataset, oracle, SETS, LEX, AttackConfig(jobs=1))
        parallel, _ = run_campaign(dataset, oracle, SETS, LEX, AttackConfig(jobs=4))
        assert serial == parallel

    def test_modified_fraction(self):
        dataset, oracle = self.make_mixed_dataset()
        _, summary = run_campaign(dataset, oracle, SETS, LEX, AttackConfig())
        assert abs(summary.mean_modified_fraction - 1 / 3) < 1e-12

    def test_campaign_bytes_reproducible(self, tmp_path):
        instances, victim = toy_campaign_fixture(16)
        cfg = AttackConfig(algorithm="genetic", seed=5)
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            results, summary = run_campaign(instances, victim, SETS, LEX, cfg)
            path = tmp_path / name
            write_campaign(results, summary, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestTaggingAttack:
    def make_tagging(self):
        def tag_inst(i, tokens, labels, frozen=()):
            return TaskInstance(
                f"t{i}",
                (TaggedSentence.from_surfaces(tokens, frozen=frozen),),
                0,
                tuple(labels),
                "tagging",
            )

        weights = {
            "O": {"on": 2.0, "cat": 2.0, "at": 2.0},
            "ENT": {"paris": 4.0, "in": 1.0},
        }
        oracle = ToyClassifier(["ENT", "O"], weights)
        inst = tag_inst(0, ["paris", "on", "cat"], ["ENT", "O", "O"], frozen=[0])
        return inst, oracle

    def test_flip_by_substitution(self):
        inst, oracle = self.make_tagging()
        res = greedy_attack(inst, oracle, SETS, LEX, AttackConfig())
        assert res.success
        for op in res.applied_ops:
            assert 0 not in [r[1] for r in op.regions() if r[0] == "tok"]
        assert len(res.adversarial) == len(inst.mutable())
