"""Robustness reporting: budget sweeps, cloze drop matrices, augmentation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .attack import (
    AttackConfig,
    AttackResult,
    CampaignSummary,
    _Scorer,
    greedy_attack,
    summarize,
    token_importance,
)
from .confusion import ERROR_TYPE_NAMES, ConfusionSet, ErrorType
from .errors import OracleError, ValidationError
from .morphology import InflectionLexicon
from .oracle import CachingOracle, Oracle
from .perturb import apply_ops
from .textmodel import MinimalEditPair, TaskInstance

log = logging.getLogger(__name__)

CLOZE_WINDOW = 6
CLOZE_OFFSETS = tuple(
    o for o in range(-CLOZE_WINDOW, CLOZE_WINDOW + 1) if o != 0
)


@dataclass(frozen=True)
class ClozeMatrix:
    """Mean masked-token likelihood drop by error type and relative offset.

    Cells that no pair contributed to are absent, not zero.
    """

    cells: dict[tuple[ErrorType, int], tuple[float, int]]

    def mean(self, etype: ErrorType, offset: int) -> float | None:
        cell = self.cells.get((etype, offset))
        return cell[0] if cell else None

    def count(self, etype: ErrorType, offset: int) -> int:
        cell = self.cells.get((etype, offset))
        return cell[1] if cell else 0

    def write_table(self, path: str | Path) -> None:
        header = ["error_type"] + [str(o) for o in CLOZE_OFFSETS]
        lines = ["\t".join(header)]
        for etype in ErrorType:
            row = [etype.value]
            for offset in CLOZE_OFFSETS:
                cell = self.cells.get((etype, offset))
                row.append("-" if cell is None else f"{cell[0]:.6f}:{cell[1]}")
            lines.append("\t".join(row))
        Path(path).write_text("".join(line + "\n" for line in lines))


def budget_sweep(
    dataset: Sequence[TaskInstance],
    oracle: Oracle,
    sets: dict[ErrorType, ConfusionSet],
    lex: InflectionLexicon | None,
    fractions: Sequence[float],
    cfg: AttackConfig | None = None,
) -> list[tuple[float, CampaignSummary, list[AttackResult]]]:
    """Greedy campaigns at increasing budgets, sharing token importance."""
    if not fractions:
        raise ValidationError("empty fraction list")
    if list(fractions) != sorted(fractions):
        raise ValidationError("fractions must be sorted ascending")
    cfg = cfg or AttackConfig()

    prepared = []
    skipped = errors = 0
    for inst in dataset:
        wrapped = CachingOracle(oracle)
        scorer = _Scorer(inst, wrapped)
        try:
            _, already_wrong = scorer.score_ops([])
            if already_wrong:
                skipped += 1
                continue
            prepared.append((inst, wrapped, token_importance(inst, wrapped, scorer)))
        except OracleError:
            errors += 1

    out = []
    for fraction in fractions:
        run_cfg = replace(cfg, algorithm="greedy", budget_fraction=fraction)
        results = [
            greedy_attack(inst, wrapped, sets, lex, run_cfg, importance=importance)
            for inst, wrapped, importance in prepared
        ]
        out.append(
            (fraction, summarize(results, run_cfg, len(dataset), skipped, errors),
             results)
        )
    return out


def _single_token_edit(pair: MinimalEditPair) -> tuple[ErrorType, int] | None:
    if len(pair.edits) != 1:
        return None
    edit = pair.edits[0]
    lo, hi = edit.bad_span
    glo, ghi = edit.good_span
    if hi - lo != 1 or ghi - glo != 1 or lo != glo:
        return None
    if len(pair.bad) != len(pair.good):
        return None
    etype = ERROR_TYPE_NAMES.get(edit.tag)
    if etype is None:
        return None
    return etype, lo


def cloze_drop(pairs: Sequence[MinimalEditPair], mlm) -> ClozeMatrix:
    """Average context-token likelihood drops within six tokens of the error.

    Usable pairs differ in exactly one token; for each context position j
    in the window the drop is the clean-context probability of token j
    minus its probability in the errorful sentence, both with j masked.
    """
    sums: dict[tuple[ErrorType, int], float] = {}
    counts: dict[tuple[ErrorType, int], int] = {}
    usable = 0
    for pair in pairs:
        parsed = _single_token_edit(pair)
        if parsed is None:
            log.warning("pair %s is not a single-token edit, skipped", pair.id)
            continue
        usable += 1
        etype, err_pos = parsed
        good = pair.good.surfaces()
        bad = pair.bad.surfaces()
        for j in range(
            max(0, err_pos - CLOZE_WINDOW),
            min(len(good), err_pos + CLOZE_WINDOW + 1),
        ):
            if j == err_pos:
                continue
            token = good[j]
            drop = mlm.mask_fill(good, j, token) - mlm.mask_fill(bad, j, token)
            key = (etype, j - err_pos)
            sums[key] = sums.get(key, 0.0) + drop
            counts[key] = counts.get(key, 0) + 1
    if usable == 0:
        raise ValidationError("no usable single-token pairs")
    cells = {key: (sums[key] / counts[key], counts[key]) for key in sums}
    return ClozeMatrix(cells)


def augment(
    train_dataset: Sequence[TaskInstance],
    oracle: Oracle,
    sets: dict[ErrorType, ConfusionSet],
    lex: InflectionLexicon | None,
    proportion: float,
    cfg: AttackConfig | None = None,
) -> list[TaskInstance]:
    """Greedy-attack a slice of the training set and append perturbed copies.

    Gold labels are preserved; instances the attack cannot flip still
    contribute their best-effort perturbed text. The originals come back
    verbatim, first.
    """
    if proportion <= 0:
        raise ValidationError("proportion must be positive")
    if not train_dataset:
        raise ValidationError("empty training set")
    cfg = cfg or AttackConfig()
    k = min(math.ceil(proportion * len(train_dataset)), len(train_dataset))
    extra = []
    for inst in train_dataset[:k]:
        result = greedy_attack(inst, oracle, sets, lex, cfg)
        ops = result.applied_ops if result.success else result.explored_ops
        perturbed = apply_ops(inst.mutable(), ops) if ops else inst.mutable()
        copy = inst.with_mutable(perturbed)
        if inst.task_kind == "tagging":
            from .perturb import remap_labels

            copy = replace(
                copy, gold_label=tuple(remap_labels(inst.gold_label, ops))
            )
        extra.append(replace(copy, id=f"{inst.id}-adv"))
    return list(train_dataset) + extra
