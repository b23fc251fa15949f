"""Worst-case transformation: greedy, beam, and genetic black-box search.

All three algorithms walk the same operation space (built once on the
original sentence, positions in original coordinates, composed through
``apply_ops``) and observe the victim only through gold-label probability
queries. A result either carries the flipping op set or returns the
original instance untouched.
"""

from __future__ import annotations

import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .confusion import ConfusionSet, ErrorType
from .errors import OracleError, ValidationError
from .morphology import InflectionLexicon
from .oracle import CachingOracle, Oracle
from .perturb import (
    Operation,
    OperationSet,
    OpKind,
    apply_ops,
    build_operation_sets,
    remap_labels,
)
from .textmodel import TaggedSentence, TaskInstance

ALGORITHMS = ("greedy", "beam", "genetic")


@dataclass(frozen=True)
class AttackConfig:
    algorithm: str = "greedy"
    budget_fraction: float = 0.15
    beam_size: int = 5
    population: int = 60
    generation_fraction: float = 0.23
    seed: int = 0
    beam_allow_skip: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm: {self.algorithm}")
        if not 0 < self.budget_fraction <= 1:
            raise ValidationError("budget_fraction must be in (0, 1]")
        if self.beam_size < 1:
            raise ValidationError("beam_size must be at least 1")
        if self.population < 2:
            raise ValidationError("population must be at least 2")
        if self.generation_fraction <= 0:
            raise ValidationError("generation_fraction must be positive")


@dataclass(frozen=True)
class AttackResult:
    instance_id: str
    original: TaggedSentence
    adversarial: TaggedSentence
    success: bool
    applied_ops: tuple[Operation, ...]
    modified_fraction: float
    oracle_queries: int
    p_gold_before: float
    final_gold_prob: float
    trace: tuple[float, ...] = ()
    explored_ops: tuple[Operation, ...] = ()


def budget(n: int, fraction: float) -> int:
    """Maximum edit regions for an n-token sentence, never below one."""
    if n < 1:
        raise ValidationError("sentence length must be positive")
    return max(1, math.floor(fraction * n))


def _argmax(probs: dict[str, float]) -> str:
    return max(sorted(probs), key=lambda k: probs[k])


def instance_rng(seed: int, instance_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(instance_id.encode())])


class _Scorer:
    """Gold-label probability and flip test for candidate op sets."""

    def __init__(self, inst: TaskInstance, oracle):
        self.inst = inst
        self.oracle = oracle
        self.tagging = inst.task_kind == "tagging"

    def _texts(self, mutable_text: str):
        texts = [seg.text() for seg in self.inst.segments]
        texts[self.inst.mutable_segment] = mutable_text
        if len(texts) == 2:
            return texts[0], texts[1]
        return texts[0], None

    def _score_tagging(self, sent: TaggedSentence, labels: Sequence[str]):
        rows = self.oracle.predict_token_texts(sent.surfaces())
        live = [i for i in range(len(sent)) if i not in sent.frozen]
        if not live:
            raise ValidationError("nothing mutable")
        gold_probs = [rows[i].get(labels[i], 0.0) for i in live]
        flipped = any(_argmax(rows[i]) != labels[i] for i in live)
        return sum(gold_probs) / len(gold_probs), flipped

    def score_ops(self, ops: Sequence[Operation]):
        sent = apply_ops(self.inst.mutable(), ops) if ops else self.inst.mutable()
        if self.tagging:
            labels = remap_labels(self.inst.gold_label, ops)
            return self._score_tagging(sent, labels)
        probs = self.oracle.predict_texts([self._texts(sent.text())])[0]
        gold = self.inst.gold_label
        return probs.get(gold, 0.0), _argmax(probs) != gold

    def score_deletion_probe(self, index: int):
        """Gold probability with one token removed; None if unanswerable."""
        mutable = self.inst.mutable()
        surfaces = [t.surface for t in mutable.tokens if t.index != index]
        try:
            if self.tagging:
                labels = [
                    lab
                    for i, lab in enumerate(self.inst.gold_label)
                    if i != index
                ]
                if not surfaces:
                    raise ValidationError("empty segment")
                frozen = frozenset(
                    i - 1 if i > index else i for i in mutable.frozen if i != index
                )
                sent = TaggedSentence.from_surfaces(surfaces, frozen=frozen)
                return self._score_tagging(sent, labels)[0]
            probs = self.oracle.predict_texts([self._texts(" ".join(surfaces))])[0]
            return probs.get(self.inst.gold_label, 0.0)
        except (OracleError, ValidationError):
            return None


def _operation_space(
    inst: TaskInstance,
    sets: dict[ErrorType, ConfusionSet],
    lex: InflectionLexicon | None,
) -> OperationSet:
    opset = build_operation_sets(inst.mutable(), sets, lex)
    if inst.task_kind != "tagging":
        return opset
    # Tagging gold labels align by position, so only length-preserving
    # edits stay; swaps carry their labels along.
    kept = {
        op: opset.weights[op]
        for op in opset
        if op.kind in (OpKind.SUBSTITUTE, OpKind.SWAP)
    }
    return OperationSet(opset.sentence_len, kept)


def _compatible(op: Operation, chosen: Sequence[Operation]) -> bool:
    taken = {r for o in chosen for r in o.regions()}
    return not any(r in taken for r in op.regions())


def token_importance(
    inst: TaskInstance, oracle, scorer: _Scorer | None = None
) -> list[int]:
    """Mutable token indices, most damaging deletion first."""
    scorer = scorer or _Scorer(inst, oracle)
    mutable = inst.mutable()
    live = [i for i in range(len(mutable)) if i not in mutable.frozen]
    if not live:
        raise ValidationError("nothing mutable")
    base, _ = scorer.score_ops([])
    drops = {}
    for i in live:
        probe = scorer.score_deletion_probe(i)
        drops[i] = 0.0 if probe is None else base - probe
    return sorted(live, key=lambda i: (-drops[i], i))


def _result(
    inst: TaskInstance,
    scorer: _Scorer,
    wrapped: CachingOracle,
    p_before: float,
    success: bool,
    ops: Sequence[Operation],
    p_after: float,
    trace: Sequence[float],
    explored: Sequence[Operation],
) -> AttackResult:
    original = inst.mutable()
    if success:
        adversarial = apply_ops(original, ops)
        fraction = len(ops) / len(original)
    else:
        adversarial, ops, fraction, p_after = original, (), 0.0, p_before
    return AttackResult(
        instance_id=inst.id,
        original=original,
        adversarial=adversarial,
        success=success,
        applied_ops=tuple(ops),
        modified_fraction=fraction,
        oracle_queries=wrapped.queries,
        p_gold_before=p_before,
        final_gold_prob=p_after,
        trace=tuple(trace),
        explored_ops=tuple(explored),
    )


def greedy_attack(
    inst: TaskInstance,
    oracle: Oracle,
    sets: dict[ErrorType, ConfusionSet],
    lex: InflectionLexicon | None,
    cfg: AttackConfig,
    importance: Sequence[int] | None = None,
) -> AttackResult:
    """Walk tokens by importance, keeping the single best strict improvement."""
    wrapped = oracle if isinstance(oracle, CachingOracle) else CachingOracle(oracle)
    scorer = _Scorer(inst, wrapped)
    opset = _operation_space(inst, sets, lex)
    order = list(importance) if importance is not None else token_importance(
        inst, wrapped, scorer
    )
    b = budget(len(inst.mutable()), cfg.budget_fraction)
    p_before, _ = scorer.score_ops([])
    applied: list[Operation] = []
    current_p = p_before
    trace: list[float] = []
    for i in order:
        if len(applied) >= b:
            break
        best_op, best_p = None, current_p
        for op in opset.for_token(i):
            if not _compatible(op, applied):
                continue
            p, flipped = scorer.score_ops(applied + [op])
            if flipped:
                return _result(
                    inst, scorer, wrapped, p_before, True,
                    applied + [op], p, trace + [p], applied + [op],
                )
            if p < best_p:
                best_op, best_p = op, p
        if best_op is not None:
            applied.append(best_op)
            current_p = best_p
            trace.append(best_p)
            _, flipped = scorer.score_ops(applied)
            if flipped:
                return _result(
                    inst, scorer, wrapped, p_before, True,
                    applied, best_p, trace, applied,
                )
    return _result(
        inst, scorer, wrapped, p_before, False, [], p_before, trace, applied
    )


def beam_attack(
    inst: TaskInstance,
    oracle: Oracle,
    sets: dict[ErrorType, ConfusionSet],
    lex: InflectionLexicon | None,
    cfg: AttackConfig,
    importance: Sequence[int] | None = None,
) -> AttackResult:
    """Keep the k lowest-probability operation streams across the token walk."""
    wrapped = oracle if isinstance(oracle, CachingOracle) else CachingOracle(oracle)
    scorer = _Scorer(inst, wrapped)
    opset = _operation_space(inst, sets, lex)
    order = list(importance) if importance is not None else token_importance(
        inst, wrapped, scorer
    )
    b = budget(len(inst.mutable()), cfg.budget_fraction)
    p_before, _ = scorer.score_ops([])
    streams: list[tuple[tuple[Operation, ...], float]] = [((), p_before)]
    trace: list[float] = []

    def stream_key(entry):
        ops, p = entry
        return (p, len(ops), tuple(op.sort_key() for op in ops))

    for i in order:
        expanded: list[tuple[tuple[Operation, ...], float]] = []
        for ops, p in streams:
            extensions = []
            if len(ops) < b:
                for op in opset.for_token(i):
                    if not _compatible(op, ops):
                        continue
                    new_ops = ops + (op,)
                    new_p, flipped = scorer.score_ops(new_ops)
                    if flipped:
                        return _result(
                            inst, scorer, wrapped, p_before, True,
                            new_ops, new_p, trace + [new_p], new_ops,
                        )
                    extensions.append((new_ops, new_p))
            if cfg.beam_allow_skip or not extensions:
                expanded.append((ops, p))
            expanded.extend(extensions)
        streams = sorted(expanded, key=stream_key)[: cfg.beam_size]
        # log strict drops only, so a width-1 beam traces exactly as greedy
        if streams[0][1] < (trace[-1] if trace else p_before):
            trace.append(streams[0][1])
    return _result(
        inst, scorer, wrapped, p_before, False, [], p_before, trace,
        streams[0][0] if streams else (),
    )


def _crossover(
    a: tuple[Operation, ...],
    b_ops: tuple[Operation, ...],
    rng: np.random.Generator,
    cap: int,
) -> tuple[Operation, ...]:
    ra = {op.regions()[0]: op for op in a}
    rb = {op.regions()[0]: op for op in b_ops}
    child: list[Operation] = []
    for region in sorted(ra.keys() | rb.keys()):
        if region in ra and region in rb:
            op = ra[region]
        else:
            op = (ra.get(region) or rb.get(region)) if rng.random() < 0.5 else None
        if op is not None and len(child) < cap and _compatible(op, child):
            child.append(op)
    return tuple(child)


def _mutate(
    child: tuple[Operation, ...],
    pool: Sequence[Operation],
    rng: np.random.Generator,
    cap: int,
) -> tuple[Operation, ...]:
    ops = list(child)
    if len(ops) >= cap and ops:
        ops.pop(int(rng.integers(len(ops))))
    fresh = [op for op in pool if _compatible(op, ops)]
    if fresh:
        ops.append(fresh[int(rng.integers(len(fresh)))])
    return tuple(ops)


def genetic_attack(
    inst: TaskInstance,
    oracle: Oracle,
    sets: dict[ErrorType, ConfusionSet],
    lex: InflectionLexicon | None,
    cfg: AttackConfig,
    rng: np.random.Generator | None = None,
) -> AttackResult:
    """Population search with elite carry-over, crossover, and mutation.

    When the whole single-op space fits in one population, generation
    zero enumerates it before random sampling fills the rest, so a
    trivially findable flip is never missed by chance.
    """
    wrapped = oracle if isinstance(oracle, CachingOracle) else CachingOracle(oracle)
    scorer = _Scorer(inst, wrapped)
    opset = _operation_space(inst, sets, lex)
    rng = rng if rng is not None else instance_rng(cfg.seed, inst.id)
    b = budget(len(inst.mutable()), cfg.budget_fraction)
    p_before, _ = scorer.score_ops([])
    pool = list(opset)
    if not pool:
        return _result(inst, scorer, wrapped, p_before, False, [], p_before, [], [])

    members: list[tuple[Operation, ...]] = []
    if len(pool) <= cfg.population:
        members = [(op,) for op in pool]
    while len(members) < cfg.population:
        members.append((pool[int(rng.integers(len(pool)))],))

    generations = max(1, round(cfg.generation_fraction * len(inst.mutable())))
    trace: list[float] = []
    best_member: tuple[Operation, ...] = ()
    for gen in range(generations):
        scored = []
        for member in members:
            p, flipped = scorer.score_ops(member)
            if flipped:
                return _result(
                    inst, scorer, wrapped, p_before, True,
                    member, p, trace + [p], member,
                )
            scored.append(p)
        best_idx = min(range(len(members)), key=lambda j: (scored[j], j))
        trace.append(scored[best_idx])
        best_member = members[best_idx]
        if gen == generations - 1:
            break
        fitness = np.array([1.0 - p for p in scored], dtype=float)
        fitness = np.clip(fitness, 0.0, None)
        probs = (
            fitness / fitness.sum()
            if fitness.sum() > 0
            else np.full(len(members), 1.0 / len(members))
        )
        children = [members[best_idx]]
        while len(children) < cfg.population:
            p1 = members[int(rng.choice(len(members), p=probs))]
            p2 = members[int(rng.choice(len(members), p=probs))]
            child = _crossover(p1, p2, rng, b)
            children.append(_mutate(child, pool, rng, b))
        members = children
    return _result(
        inst, scorer, wrapped, p_before, False, [], p_before, trace, best_member
    )


_ALGORITHM_FNS: dict[str, Callable] = {
    "greedy": greedy_attack,
    "beam": beam_attack,
    "genetic": genetic_attack,
}


@dataclass
class CampaignSummary:
    algorithm: str
    budget_fraction: float
    seed: int
    total: int = 0
    skipped_incorrect: int = 0
    oracle_errors: int = 0
    attacked: int = 0
    successes: int = 0
    total_queries: int = 0
    success_rate: float | None = None
    mean_modified_fraction: float | None = None
    harm_counts: dict[str, int] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"summary": self.__dict__.copy()}


def harm_counts(results: Sequence[AttackResult]) -> dict[str, int]:
    """Times each error type appears among the ops of successful attacks."""
    counts = {t.value: 0 for t in ErrorType}
    for res in results:
        if res.success:
            for op in res.applied_ops:
                counts[op.error_type.value] += 1
    return counts


def summarize(
    results: Sequence[AttackResult],
    cfg: AttackConfig,
    total: int,
    skipped: int,
    errors: int,
) -> CampaignSummary:
    successes = [r for r in results if r.success]
    summary = CampaignSummary(
        algorithm=cfg.algorithm,
        budget_fraction=cfg.budget_fraction,
        seed=cfg.seed,
        total=total,
        skipped_incorrect=skipped,
        oracle_errors=errors,
        attacked=len(results),
        successes=len(successes),
        total_queries=sum(r.oracle_queries for r in results),
        harm_counts=harm_counts(results),
    )
    if results:
        summary.success_rate = len(successes) / len(results)
    if successes:
        summary.mean_modified_fraction = sum(
            r.modified_fraction for r in successes
        ) / len(successes)
    return summary


def run_campaign(
    dataset: Sequence[TaskInstance],
    oracle: Oracle,
    sets: dict[ErrorType, ConfusionSet],
    lex: InflectionLexicon | None,
    cfg: AttackConfig,
) -> tuple[list[AttackResult], CampaignSummary]:
    """Attack every correctly-classified instance; merge in input order."""
    attack_fn = _ALGORITHM_FNS[cfg.algorithm]

    def attack_one(inst: TaskInstance):
        wrapped = CachingOracle(oracle)
        scorer = _Scorer(inst, wrapped)
        try:
            _, already_wrong = scorer.score_ops([])
            if already_wrong:
                return ("skipped", None)
            if cfg.algorithm == "genetic":
                result = attack_fn(
                    inst, wrapped, sets, lex, cfg,
                    rng=instance_rng(cfg.seed, inst.id),
                )
            else:
                result = attack_fn(inst, wrapped, sets, lex, cfg)
            return ("ok", result)
        except OracleError:
            return ("error", None)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(attack_one, dataset))
    else:
        outcomes = [attack_one(inst) for inst in dataset]

    results = [r for status, r in outcomes if status == "ok"]
    skipped = sum(1 for status, _ in outcomes if status == "skipped")
    errors = sum(1 for status, _ in outcomes if status == "error")
    summary = summarize(results, cfg, len(dataset), skipped, errors)
    return results, summary


def result_to_record(res: AttackResult) -> dict:
    return {
        "id": res.instance_id,
        "success": res.success,
        "ops": [op.to_record() for op in res.applied_ops],
        "modified_fraction": res.modified_fraction,
        "queries": res.oracle_queries,
        "p_gold_before": res.p_gold_before,
        "p_gold_after": res.final_gold_prob,
        "trace": list(res.trace),
    }


def write_campaign(
    results: Sequence[AttackResult], summary: CampaignSummary, path: str | Path
) -> None:
    lines = [json.dumps(result_to_record(r), sort_keys=True) for r in results]
    lines.append(json.dumps(summary.to_record(), sort_keys=True))
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_campaign(path: str | Path) -> tuple[list[dict], dict | None]:
    records = []
    summary = None
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        if "summary" in doc:
            summary = doc["summary"]
        else:
            records.append(doc)
    return records, summary
