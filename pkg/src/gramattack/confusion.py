"""Error types, confusion sets, and corpus-estimated substitution weights.

Eight token-level grammatical error types are supported. The closed-class
types (ArtOrDet, Prep, Trans) carry explicit member lists with a special
``<eps>`` member standing for deletion (token -> eps) and insertion
(eps -> token). The open-class types (Nn, SVA, Vform, Wchoice, Worder)
derive their candidates from morphology at perturbation time and always
use uniform weights, so their sets here stay empty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .textmodel import MinimalEditPair

EPSILON = "<eps>"

_PROB_SUM_TOL = 1e-9


class ErrorType(Enum):
    ART_OR_DET = "ArtOrDet"
    PREP = "Prep"
    TRANS = "Trans"
    NN = "Nn"
    SVA = "SVA"
    VFORM = "Vform"
    WCHOICE = "Wchoice"
    WORDER = "Worder"

    def __str__(self) -> str:
        return self.value


ERROR_TYPE_NAMES = {t.value: t for t in ErrorType}

# Closed-class memberships; open-class types derive members from morphology.
_ART_OR_DET_MEMBERS = ["a", "an", "the", EPSILON]
_PREP_MEMBERS = [
    "on", "in", "at", "from", "for", "under", "over", "with", "into",
    "during", "until", "against", "among", "throughout", "to", "by",
    "about", "like", "before", "across", "behind", "but", "out", "up",
    "after", "since", "down", "off", "of", EPSILON,
]
_TRANS_MEMBERS = [
    "and", "but", "so", "however", "as", "that", "thus", "also",
    "because", "therefore", "if", "although", "which", "where",
    "moreover", "besides", "of", EPSILON,
]

EPSILON_TYPES = frozenset({ErrorType.ART_OR_DET, ErrorType.PREP, ErrorType.TRANS})
CLOSED_CLASS_TYPES = EPSILON_TYPES


@dataclass(frozen=True)
class ConfusionSet:
    error_type: ErrorType
    members: tuple[str, ...] = ()
    weights: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        if EPSILON in self.members and self.error_type not in EPSILON_TYPES:
            raise ValidationError(
                f"{self.error_type} may not contain the deletion symbol"
            )
        for src, outgoing in self.weights.items():
            if any(w < 0 for w in outgoing.values()):
                raise ValidationError(f"negative weight out of {src!r}")
            total = sum(outgoing.values())
            if abs(total - 1.0) > _PROB_SUM_TOL:
                raise ValidationError(
                    f"weights out of {src!r} sum to {total}, expected 1"
                )


@dataclass(frozen=True)
class ErrorDistribution:
    probs: dict[ErrorType, float]

    def __post_init__(self):
        missing = set(ErrorType) - set(self.probs)
        if missing:
            raise ValidationError(f"distribution missing types: {missing}")
        if any(p < 0 for p in self.probs.values()):
            raise ValidationError("negative probability")
        total = sum(self.probs.values())
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValidationError(f"distribution sums to {total}, expected 1")

    @classmethod
    def point_mass(cls, error_type: ErrorType) -> "ErrorDistribution":
        return cls({t: (1.0 if t is error_type else 0.0) for t in ErrorType})

    @classmethod
    def uniform(cls) -> "ErrorDistribution":
        return cls({t: 1.0 / len(ErrorType) for t in ErrorType})


def default_sets() -> dict[ErrorType, ConfusionSet]:
    """Closed-class memberships with uniform weights; no corpus needed."""
    sets = {}
    for etype, members in (
        (ErrorType.ART_OR_DET, _ART_OR_DET_MEMBERS),
        (ErrorType.PREP, _PREP_MEMBERS),
        (ErrorType.TRANS, _TRANS_MEMBERS),
    ):
        sets[etype] = ConfusionSet(etype, tuple(members))
    for etype in (
        ErrorType.NN, ErrorType.SVA, ErrorType.VFORM,
        ErrorType.WCHOICE, ErrorType.WORDER,
    ):
        sets[etype] = ConfusionSet(etype)
    return sets


def _edit_events(pair: MinimalEditPair) -> Iterable[tuple[ErrorType, str, str]]:
    """Substitution events (type, clean_token, error_token) from one pair.

    Events run in the error-injection direction: the corrected side holds
    the clean token and the errorful side what it gets replaced by.
    Deletion of a required token maps token -> eps; a spurious extra token
    maps eps -> token. Spans wider than one token on both sides carry no
    usable token-level event and only count toward the type distribution.
    """
    bad = pair.bad.surfaces()
    good = pair.good.surfaces()
    for edit in pair.edits:
        if edit.tag not in ERROR_TYPE_NAMES:
            continue
        etype = ERROR_TYPE_NAMES[edit.tag]
        lo, hi = edit.bad_span
        glo, ghi = edit.good_span
        bad_toks = [t.lower() for t in bad[lo:hi]]
        good_toks = [t.lower() for t in good[glo:ghi]]
        if len(good_toks) == 1 and len(bad_toks) == 1:
            yield etype, good_toks[0], bad_toks[0]
        elif len(good_toks) == 1 and not bad_toks:
            yield etype, good_toks[0], EPSILON
        elif not good_toks and len(bad_toks) == 1:
            yield etype, EPSILON, bad_toks[0]
        else:
            yield etype, "", ""


def estimate(
    pairs: Sequence[MinimalEditPair],
) -> tuple[dict[ErrorType, ConfusionSet], ErrorDistribution]:
    """Count substitution events and normalize into weights per from-token.

    Vform and Wchoice candidates are uniform by construction, so their
    edits contribute only to the error-type distribution. Learned sets
    keep the default memberships merged in so sparse corpora still cover
    the full closed-class rows.
    """
    type_counts: dict[ErrorType, int] = {t: 0 for t in ErrorType}
    sub_counts: dict[ErrorType, dict[str, dict[str, int]]] = {
        t: {} for t in ErrorType
    }
    usable = 0
    for pair in pairs:
        for etype, src, dst in _edit_events(pair):
            type_counts[etype] += 1
            usable += 1
            if not src and not dst:
                continue
            if etype in (ErrorType.VFORM, ErrorType.WCHOICE):
                continue
            outgoing = sub_counts[etype].setdefault(src, {})
            outgoing[dst] = outgoing.get(dst, 0) + 1
    if usable == 0:
        raise ValidationError("no supported edits in corpus")

    defaults = default_sets()
    sets = {}
    for etype in ErrorType:
        counts = sub_counts[etype]
        weights = {
            src: {dst: c / sum(out.values()) for dst, c in out.items()}
            for src, out in counts.items()
        }
        members = set(defaults[etype].members)
        for src, out in counts.items():
            members.add(src)
            members.update(out)
        members.discard("")
        ordered = tuple(
            list(defaults[etype].members)
            + sorted(members - set(defaults[etype].members))
        )
        sets[etype] = ConfusionSet(etype, ordered, weights)
    dist = ErrorDistribution(
        {t: type_counts[t] / usable for t in ErrorType}
    )
    return sets, dist


def candidates(cset: ConfusionSet, from_token: str) -> list[tuple[str, float]]:
    """Weighted replacement candidates for one token, never the token itself.

    Learned outgoing weights win; otherwise members other than the token
    share uniform weight. Matching is case-insensitive; callers restore
    the original capitalization pattern on the replacement.
    """
    key = from_token.lower()
    learned = cset.weights.get(key)
    if learned:
        return [(dst, w) for dst, w in learned.items() if dst != key and w > 0]
    if key in cset.members:
        others = [m for m in cset.members if m != key]
        if not others:
            return []
        w = 1.0 / len(others)
        return [(m, w) for m in others]
    return []


def sample_error_type(
    dist: ErrorDistribution, rng: np.random.Generator
) -> ErrorType:
    types = list(ErrorType)
    probs = np.array([dist.probs[t] for t in types], dtype=float)
    total = probs.sum()
    if total <= 0:
        raise ValidationError("cannot sample from an all-zero distribution")
    idx = rng.choice(len(types), p=probs / total)
    return types[int(idx)]


def match_case(original: str, replacement: str) -> str:
    """Carry the original token's capitalization pattern onto a replacement."""
    if replacement == EPSILON:
        return replacement
    if original.isupper() and len(original) > 1:
        return replacement.upper()
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def agree_article(article: str, following: str | None) -> str:
    """Pick a/an by the following word's initial letter; other tokens pass."""
    if article.lower() not in ("a", "an"):
        return article
    vowel = bool(following) and following[0].lower() in "aeiou"
    return "an" if vowel else "a"


def _fmt(p: float) -> float:
    return float(format(p, ".12g"))


def save_confusions(
    sets: dict[ErrorType, ConfusionSet],
    dist: ErrorDistribution,
    path: str | Path,
) -> None:
    doc = {
        "distribution": {t.value: _fmt(dist.probs[t]) for t in ErrorType},
        "sets": {
            t.value: {
                "members": list(sets[t].members),
                "weights": {
                    src: {dst: _fmt(w) for dst, w in out.items()}
                    for src, out in sets[t].weights.items()
                },
            }
            for t in ErrorType
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_confusions(
    path: str | Path,
) -> tuple[dict[ErrorType, ConfusionSet], ErrorDistribution]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad confusion file: {exc}") from exc
    try:
        dist = ErrorDistribution(
            {ERROR_TYPE_NAMES[name]: float(p)
             for name, p in doc["distribution"].items()}
        )
        sets = {}
        for name, entry in doc["sets"].items():
            etype = ERROR_TYPE_NAMES[name]
            weights = {
                src: {
                    dst: float(w) for dst, w in out.items()
                }
                for src, out in entry.get("weights", {}).items()
            }
            sets[etype] = ConfusionSet(
                etype, tuple(entry.get("members", [])), weights
            )
    except KeyError as exc:
        raise ValidationError(f"bad confusion file: missing {exc}") from exc
    for etype in ErrorType:
        sets.setdefault(etype, ConfusionSet(etype))
    return sets, dist
