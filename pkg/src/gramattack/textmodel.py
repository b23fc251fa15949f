"""Text representations, corpus loaders, and the fallback POS tagger.

Everything downstream operates on :class:`TaggedSentence` objects: plain
whitespace tokens, each carrying a coarse POS tag and an optional frozen
mask marking indices that must never be edited (e.g. named entities).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ValidationError

POS_TAGS = frozenset(
    {"NOUN", "VERB", "ADJ", "ADV", "DET", "PREP", "CONJ", "MODAL", "PART", "OTHER"}
)

_DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = "OTHER"
    index: int = 0

    def __post_init__(self):
        if not self.surface or any(c.isspace() for c in self.surface):
            raise ValidationError(f"bad token surface: {self.surface!r}")
        if self.pos not in POS_TAGS:
            raise ValidationError(f"unknown POS tag: {self.pos}")


@dataclass(frozen=True)
class TaggedSentence:
    tokens: tuple[Token, ...]
    frozen: frozenset[int] = frozenset()

    def __post_init__(self):
        if not self.tokens:
            raise ValidationError("sentence must have at least one token")
        for i, tok in enumerate(self.tokens):
            if tok.index != i:
                raise ValidationError(f"token index {tok.index} at position {i}")
        bad = [i for i in self.frozen if not 0 <= i < len(self.tokens)]
        if bad:
            raise ValidationError(f"frozen indices out of range: {bad}")

    def __len__(self) -> int:
        return len(self.tokens)

    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def text(self) -> str:
        return " ".join(t.surface for t in self.tokens)

    @classmethod
    def from_surfaces(
        cls,
        surfaces: Sequence[str],
        pos: Sequence[str] | None = None,
        frozen: Iterable[int] = (),
        lexicon: "PosLexicon | None" = None,
    ) -> "TaggedSentence":
        if pos is None:
            pos = naive_pos_tag(surfaces, lexicon or default_pos_lexicon())
        if len(pos) != len(surfaces):
            raise ValidationError("pos tags do not align with tokens")
        toks = tuple(Token(s, p, i) for i, (s, p) in enumerate(zip(surfaces, pos)))
        return cls(toks, frozenset(frozen))


@dataclass(frozen=True)
class TaskInstance:
    id: str
    segments: tuple[TaggedSentence, ...]
    mutable_segment: int
    gold_label: str | tuple[str, ...]
    task_kind: str  # single | pair | tagging

    def __post_init__(self):
        if self.task_kind not in ("single", "pair", "tagging"):
            raise ValidationError(f"unknown task kind: {self.task_kind}")
        if not 1 <= len(self.segments) <= 2:
            raise ValidationError("instance needs 1 or 2 segments")
        if not 0 <= self.mutable_segment < len(self.segments):
            raise ValidationError("mutable_segment out of range")
        if self.task_kind == "tagging":
            if not isinstance(self.gold_label, tuple):
                raise ValidationError("tagging instance needs a label sequence")
            if len(self.gold_label) != len(self.mutable()):
                raise ValidationError("tagging labels do not align with tokens")

    def mutable(self) -> TaggedSentence:
        return self.segments[self.mutable_segment]

    def with_mutable(self, sent: TaggedSentence) -> "TaskInstance":
        segs = list(self.segments)
        segs[self.mutable_segment] = sent
        return replace(self, segments=tuple(segs))


@dataclass(frozen=True)
class Edit:
    bad_span: tuple[int, int]
    good_span: tuple[int, int]
    tag: str


@dataclass(frozen=True)
class MinimalEditPair:
    id: str
    bad: TaggedSentence
    good: TaggedSentence
    edits: tuple[Edit, ...]


class PosLexicon:
    """Word list plus ordered suffix rules backing :func:`naive_pos_tag`."""

    def __init__(self, words: dict[str, str], suffixes: list[tuple[str, str]]):
        self.words = words
        self.suffixes = suffixes

    @classmethod
    def load(cls, word_path: Path, suffix_path: Path) -> "PosLexicon":
        words = {}
        for line in word_path.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            word, tag = line.split("\t")
            words[word] = tag
        suffixes = []
        for line in suffix_path.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            suffix, tag = line.split("\t")
            suffixes.append((suffix, tag))
        return cls(words, suffixes)


_default_pos_lexicon: PosLexicon | None = None


def default_pos_lexicon() -> PosLexicon:
    global _default_pos_lexicon
    if _default_pos_lexicon is None:
        _default_pos_lexicon = PosLexicon.load(
            _DATA_DIR / "pos_lexicon.tsv", _DATA_DIR / "suffix_rules.tsv"
        )
    return _default_pos_lexicon


def _strip_inflection(word: str, lexicon: PosLexicon) -> str | None:
    """Tag of a known stem reached by undoing a regular inflection, if any."""
    candidates = []
    if word.endswith("ies") and len(word) > 4:
        candidates.append(word[:-3] + "y")
    if word.endswith("es") and len(word) > 3:
        candidates.append(word[:-2])
    if word.endswith("s") and len(word) > 2:
        candidates.append(word[:-1])
    if word.endswith("ing") and len(word) > 4:
        stem = word[:-3]
        candidates.extend([stem, stem + "e"])
        if len(stem) > 2 and stem[-1] == stem[-2]:
            candidates.append(stem[:-1])
    if word.endswith("ed") and len(word) > 3:
        stem = word[:-2]
        candidates.extend([stem, stem + "e"])
        if len(stem) > 2 and stem[-1] == stem[-2]:
            candidates.append(stem[:-1])
    for cand in candidates:
        tag = lexicon.words.get(cand)
        if tag in ("VERB", "NOUN"):
            return tag
    return None


def naive_pos_tag(
    tokens: Sequence[str], lexicon: PosLexicon | None = None
) -> list[str]:
    """Lexicon-first tagging with inflection analysis and suffix fallback.

    Closed-class words always come from the lexicon; unknown words fall
    back to stem analysis, then suffix rules, then OTHER. Pure punctuation
    tags as OTHER.
    """
    lexicon = lexicon or default_pos_lexicon()
    tags = []
    for surface in tokens:
        word = surface.lower()
        tag = lexicon.words.get(word)
        if tag is None and any(c.isalpha() for c in word):
            tag = _strip_inflection(word, lexicon)
            if tag is None:
                for suffix, stag in lexicon.suffixes:
                    if word.endswith(suffix) and len(word) > len(suffix) + 1:
                        tag = stag
                        break
        tags.append(tag or "OTHER")
    return tags


def assert_respects_frozen(sent: TaggedSentence, indices: Iterable[int]) -> None:
    """Guard used by every module that emits edit targets."""
    hit = sorted(set(indices) & sent.frozen)
    if hit:
        raise ValidationError(f"edit targets frozen indices {hit}")


def _instance_from_record(rec: dict, line_no: int, lexicon: PosLexicon) -> TaskInstance:
    for key in ("id", "label"):
        if key not in rec:
            raise ValidationError(f"missing field: {key} @ line {line_no}")
    frozen = rec.get("frozen", [])
    pos = rec.get("pos")

    def build(text: str, tagged: bool) -> TaggedSentence:
        surfaces = text.split()
        if not surfaces:
            raise ValidationError(f"empty text @ line {line_no}")
        return TaggedSentence.from_surfaces(
            surfaces,
            pos=pos if tagged else None,
            frozen=frozen if tagged else (),
            lexicon=lexicon,
        )

    label = rec["label"]
    if "textA" in rec or "textB" in rec:
        if "textA" not in rec or "textB" not in rec:
            raise ValidationError(f"missing field: textA/textB @ line {line_no}")
        mutable = int(rec.get("mutable", 1))
        if mutable not in (0, 1):
            raise ValidationError(f"bad mutable flag @ line {line_no}")
        segments = tuple(
            build(rec[k], tagged=(i == mutable))
            for i, k in enumerate(("textA", "textB"))
        )
        return TaskInstance(
            str(rec["id"]), segments, mutable, str(label), "pair"
        )
    if "text" not in rec:
        raise ValidationError(f"missing field: text @ line {line_no}")
    segment = build(rec["text"], tagged=True)
    if isinstance(label, list):
        labels = tuple(str(x) for x in label)
        return TaskInstance(str(rec["id"]), (segment,), 0, labels, "tagging")
    return TaskInstance(str(rec["id"]), (segment,), 0, str(label), "single")


def load_dataset(
    path: str | Path, format: str = "jsonl", lexicon: PosLexicon | None = None
) -> list[TaskInstance]:
    """Load task instances, one record per line.

    jsonl records: ``{"id", "text" | "textA"/"textB", "label", "pos"?,
    "frozen"?, "mutable"?}``. tsv rows: ``id<TAB>text<TAB>label``.
    """
    lexicon = lexicon or default_pos_lexicon()
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    instances = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if format == "jsonl":
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"bad json @ line {line_no}: {exc}") from exc
        elif format == "tsv":
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValidationError(f"expected 3 tsv fields @ line {line_no}")
            rec = {"id": parts[0], "text": parts[1], "label": parts[2]}
        else:
            raise ValidationError(f"unknown dataset format: {format}")
        instances.append(_instance_from_record(rec, line_no, lexicon))
    return instances


def instance_to_record(inst: TaskInstance) -> dict:
    rec: dict = {"id": inst.id}
    if inst.task_kind == "pair":
        rec["textA"] = inst.segments[0].text()
        rec["textB"] = inst.segments[1].text()
        rec["mutable"] = inst.mutable_segment
    else:
        rec["text"] = inst.segments[0].text()
    if inst.task_kind == "tagging":
        rec["label"] = list(inst.gold_label)
    else:
        rec["label"] = inst.gold_label
    mutable = inst.mutable()
    rec["pos"] = [t.pos for t in mutable.tokens]
    if mutable.frozen:
        rec["frozen"] = sorted(mutable.frozen)
    return rec


def save_dataset(instances: Iterable[TaskInstance], path: str | Path) -> None:
    lines = [json.dumps(instance_to_record(i), sort_keys=True) for i in instances]
    Path(path).write_text("".join(line + "\n" for line in lines))


def apply_edits_to_bad(
    bad: Sequence[str], good: Sequence[str], edits: Sequence[Edit]
) -> list[str]:
    """Rebuild the corrected token sequence from the errorful one."""
    out = list(bad)
    for edit in sorted(edits, key=lambda e: e.bad_span[0], reverse=True):
        lo, hi = edit.bad_span
        glo, ghi = edit.good_span
        out[lo:hi] = list(good[glo:ghi])
    return out


def load_minimal_pairs(
    path: str | Path,
    lexicon: PosLexicon | None = None,
    warn: "callable | None" = None,
) -> list[MinimalEditPair]:
    """Load minimal edited pairs and verify each pair's declared edits.

    Records: ``{"id", "bad": [str], "good": [str], "edits": [{"bad_span",
    "good_span", "tag"}]}``. Unknown error tags are kept with tag OTHER
    (warning); edits that do not transform bad into good are errors.
    """
    from .confusion import ERROR_TYPE_NAMES  # local import; no cycle at runtime

    lexicon = lexicon or default_pos_lexicon()
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    pairs = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad json @ line {line_no}: {exc}") from exc
        pid = str(rec.get("id", line_no))
        bad, good = rec.get("bad"), rec.get("good")
        if not bad or not good:
            raise ValidationError(f"pair {pid}: missing bad/good tokens")
        edits = []
        for e in rec.get("edits", []):
            tag = e["tag"]
            if tag not in ERROR_TYPE_NAMES:
                if warn:
                    warn(f"pair {pid}: unknown error tag {tag!r}, kept as OTHER")
                tag = "OTHER"
            edit = Edit(tuple(e["bad_span"]), tuple(e["good_span"]), tag)
            lo, hi = edit.bad_span
            glo, ghi = edit.good_span
            if not (0 <= lo <= hi <= len(bad)) or not (0 <= glo <= ghi <= len(good)):
                raise ValidationError(f"pair {pid}: edit span out of range")
            if list(bad[lo:hi]) == list(good[glo:ghi]):
                raise ValidationError(f"pair {pid}: edit does not change text")
            edits.append(edit)
        if apply_edits_to_bad(bad, good, edits) != list(good):
            raise ValidationError(f"pair {pid}: edits do not map bad onto good")
        pairs.append(
            MinimalEditPair(
                pid,
                TaggedSentence.from_surfaces(bad, lexicon=lexicon),
                TaggedSentence.from_surfaces(good, lexicon=lexicon),
                tuple(edits),
            )
        )
    return pairs
