"""Shared builders for deterministic toy fixtures.

The toy campaign pairs a seeded random sentence population with a
bag-of-tokens victim whose weights cover every replacement the default
confusion machinery can reach, so attacks change scores in a way that is
fully hand-computable.
"""

from __future__ import annotations

import numpy as np

from gramattack.confusion import default_sets
from gramattack.morphology import default_lexicon
from gramattack.oracle import ToyClassifier
from gramattack.perturb import build_operation_sets
from gramattack.textmodel import TaggedSentence, TaskInstance

NOUNS = [
    "cat", "dog", "group", "child", "city", "boy", "idea", "house",
    "car", "tree", "student", "friend", "market", "movie", "story",
]
VERBS = [
    "grows", "runs", "sleeps", "walks", "goes", "makes",
    "takes", "comes", "looks", "eats",
]
CLOSED = [
    "the", "a", "an", "on", "in", "at", "for", "with", "to", "by",
    "and", "but", "so", "because", "that", "if",
]
FILLERS = ["zibber", "quopt", "vexum", "dromle", "plizzok", "krunth"]


def build_toy_instances(
    n_instances: int = 200, seed: int = 7, min_len: int = 8, max_len: int = 24
) -> list[TaskInstance]:
    rng = np.random.default_rng(seed)
    instances = []
    for idx in range(n_instances):
        length = int(rng.integers(min_len, max_len + 1))
        tokens = []
        for _ in range(length):
            roll = rng.random()
            if roll < 0.35:
                pool = CLOSED
            elif roll < 0.55:
                pool = NOUNS
            elif roll < 0.70:
                pool = VERBS
            else:
                pool = FILLERS
            tokens.append(pool[int(rng.integers(len(pool)))])
        sent = TaggedSentence.from_surfaces(tokens)
        instances.append(
            TaskInstance(f"toy-{idx}", (sent,), 0, "?", "single")
        )
    return instances


def reachable_vocabulary(instances) -> set[str]:
    """Every surface an attack could place into these sentences."""
    sets = default_sets()
    lex = default_lexicon()
    vocab = set()
    for inst in instances:
        sent = inst.mutable()
        vocab.update(t.surface.lower() for t in sent.tokens)
        for op in build_operation_sets(sent, sets, lex):
            if op.replacement:
                vocab.add(op.replacement.lower())
    return vocab


def build_toy_oracle(instances, seed: int = 11) -> ToyClassifier:
    """Sentence tokens carry strong weights; attack-only replacements stay
    near zero so flips hinge on how much weight the budget can remove."""
    rng = np.random.default_rng(seed)
    seen = {
        t.surface.lower() for inst in instances for t in inst.mutable().tokens
    }
    weights = {}
    for tok in sorted(reachable_vocabulary(instances)):
        scale = 1.5 if tok in seen else 0.3
        weights[tok] = float(rng.normal(0.0, scale))
    return ToyClassifier(["0", "1"], {"1": weights, "0": {}})


def label_instances(instances, victim: ToyClassifier) -> list[TaskInstance]:
    """Set each gold label to the victim's original prediction."""
    from dataclasses import replace

    out = []
    for inst in instances:
        probs = victim.predict([inst])[0]
        gold = max(sorted(probs), key=lambda k: probs[k])
        out.append(replace(inst, gold_label=gold))
    return out


def toy_campaign_fixture(n_instances: int = 200):
    instances = build_toy_instances(n_instances)
    victim = build_toy_oracle(instances)
    return label_instances(instances, victim), victim
