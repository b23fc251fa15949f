"""Rule-plus-lexicon English inflection for the open-class error types.

Covers noun number, subject-verb agreement, verb tense forms, synonym
lookup, and adverb-swap applicability. Regular suffix rules handle the
long tail; irregular forms and the synonym bank come from bundled TSV
files. All outputs are lowercase; callers restore capitalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .textmodel import TaggedSentence, Token

_DATA_DIR = Path(__file__).parent / "data"

_VOWELS = "aeiou"

# Finite copula forms do not reduce to the base the way other verbs do.
_COPULA_SVA = {
    "is": ("is", "are"),
    "are": ("is", "are"),
    "am": ("is", "am"),
    "has": ("has", "have"),
    "have": ("has", "have"),
}


@dataclass(frozen=True)
class VerbEntry:
    base: str
    past: str
    perfect: str
    third_sg: str


class InflectionLexicon:
    def __init__(
        self,
        irregular_nouns: dict[str, str],
        irregular_verbs: dict[str, VerbEntry],
        synonym_bank: dict[str, list[str]],
    ):
        self.sg_to_pl = dict(irregular_nouns)
        self.pl_to_sg = {pl: sg for sg, pl in irregular_nouns.items()}
        self.verbs = dict(irregular_verbs)
        self.third_to_base = {
            e.third_sg: e.base for e in irregular_verbs.values()
        }
        self.verb_form_to_base: dict[str, str] = {}
        for entry in irregular_verbs.values():
            for form in (entry.past, entry.perfect, entry.third_sg):
                self.verb_form_to_base.setdefault(form, entry.base)
        self.past_forms = {
            f for e in irregular_verbs.values() for f in (e.past, e.perfect)
        } - set(irregular_verbs)
        self.synonym_bank = {
            lemma: syns[:10] for lemma, syns in synonym_bank.items()
        }

    @classmethod
    def load(
        cls, nouns_path: Path, verbs_path: Path, synonyms_path: Path
    ) -> "InflectionLexicon":
        nouns = {}
        for line in _data_lines(nouns_path):
            sg, pl = line.split("\t")
            nouns[sg] = pl
        verbs = {}
        for line in _data_lines(verbs_path):
            base, past, perfect, third = line.split("\t")
            verbs[base] = VerbEntry(base, past, perfect, third)
        bank = {}
        for line in _data_lines(synonyms_path):
            lemma, syns = line.split("\t")
            bank[lemma] = [s for s in syns.split(",") if s and s != lemma]
        return cls(nouns, verbs, bank)


def _data_lines(path: Path) -> list[str]:
    lines = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


_default_lexicon: InflectionLexicon | None = None


def default_lexicon() -> InflectionLexicon:
    global _default_lexicon
    if _default_lexicon is None:
        _default_lexicon = InflectionLexicon.load(
            _DATA_DIR / "irregular_nouns.tsv",
            _DATA_DIR / "irregular_verbs.tsv",
            _DATA_DIR / "synonyms.tsv",
        )
    return _default_lexicon


def _vowel_groups(word: str) -> int:
    groups = 0
    in_group = False
    for i, c in enumerate(word):
        is_vowel = c in _VOWELS or (c == "y" and i > 0)
        if is_vowel and not in_group:
            groups += 1
        in_group = is_vowel
    return groups


def _should_double(base: str) -> bool:
    # Final consonant doubles for stressed CVC endings; monosyllables only.
    if len(base) < 3:
        return False
    a, b, c = base[-3], base[-2], base[-1]
    return (
        c not in _VOWELS + "wxy"
        and b in _VOWELS
        and a not in _VOWELS
        and _vowel_groups(base) == 1
    )


def pluralize(word: str, lex: InflectionLexicon | None = None) -> str:
    lex = lex or default_lexicon()
    if word in lex.sg_to_pl:
        return lex.sg_to_pl[word]
    if word.endswith("y") and len(word) > 1 and word[-2] not in _VOWELS:
        return word[:-1] + "ies"
    if word.endswith(("s", "x", "z", "ch", "sh")):
        return word + "es"
    return word + "s"


def singularize(word: str, lex: InflectionLexicon | None = None) -> str:
    lex = lex or default_lexicon()
    if word in lex.pl_to_sg:
        return lex.pl_to_sg[word]
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    # single-s stems (house, case) keep their -e; only true sibilant
    # clusters took -es
    if word.endswith("es") and word[:-2].endswith(("ss", "x", "z", "ch", "sh")):
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss") and len(word) > 2:
        return word[:-1]
    return word


def third_singular(base: str, lex: InflectionLexicon | None = None) -> str:
    lex = lex or default_lexicon()
    if base in lex.verbs:
        return lex.verbs[base].third_sg
    if base.endswith("y") and len(base) > 1 and base[-2] not in _VOWELS:
        return base[:-1] + "ies"
    if base.endswith(("s", "x", "z", "ch", "sh", "o")):
        return base + "es"
    return base + "s"


def _base_from_third(word: str) -> str | None:
    if not word.endswith("s") or word.endswith("ss") or len(word) < 3:
        return None
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("es") and word[:-2].endswith(("ss", "x", "z", "ch", "sh", "o")):
        return word[:-2]
    return word[:-1]


def past_tense(base: str, lex: InflectionLexicon | None = None) -> str:
    lex = lex or default_lexicon()
    if base in lex.verbs:
        return lex.verbs[base].past
    return _regular_past(base)


def _regular_past(base: str) -> str:
    if base.endswith("e"):
        return base + "d"
    if base.endswith("y") and len(base) > 1 and base[-2] not in _VOWELS:
        return base[:-1] + "ied"
    if _should_double(base):
        return base + base[-1] + "ed"
    return base + "ed"


def progressive(base: str) -> str:
    if base.endswith("ie"):
        return base[:-2] + "ying"
    if base.endswith("e") and not base.endswith("ee") and len(base) > 2:
        return base[:-1] + "ing"
    if _should_double(base):
        return base + base[-1] + "ing"
    return base + "ing"


def verb_base(word: str, lex: InflectionLexicon | None = None) -> str:
    """Best-effort lemma for a verb surface form."""
    lex = lex or default_lexicon()
    if word in ("am", "is", "are", "was", "were", "been", "being"):
        return "be"
    if word in lex.verbs:
        return word
    if word in lex.verb_form_to_base:
        return lex.verb_form_to_base[word]
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) > len(suffix) + 2:
            stem = word[: -len(suffix)]
            if len(stem) > 2 and stem[-1] == stem[-2] and _should_double(stem[:-1]):
                return stem[:-1]
            if stem in lex.verbs:
                return stem
            if stem + "e" in lex.verbs:
                return stem + "e"
            # CVC stems usually lost a silent e (hoping -> hope)
            if (
                stem[-1] not in _VOWELS + "wxy"
                and stem[-2] in _VOWELS
                and len(stem) > 2
                and stem[-3] not in _VOWELS
            ):
                return stem + "e"
            if suffix == "ed" and word.endswith("ied"):
                return word[:-3] + "y"
            return stem
    base = _base_from_third(word)
    if base:
        return base
    return word


def noun_number_forms(
    token: Token, lex: InflectionLexicon | None = None
) -> dict[str, str] | None:
    """Singular and plural counterparts, for nouns with a derivable change."""
    lex = lex or default_lexicon()
    if token.pos != "NOUN":
        return None
    w = token.surface.lower()
    if w in lex.sg_to_pl:
        sg, pl = w, lex.sg_to_pl[w]
    elif w in lex.pl_to_sg:
        sg, pl = lex.pl_to_sg[w], w
    elif w.endswith("s") and not w.endswith(("ss", "us", "is")) and len(w) > 2:
        sg, pl = singularize(w, lex), w
        if sg == w:
            sg, pl = w, pluralize(w, lex)
    else:
        sg, pl = w, pluralize(w, lex)
    if sg == pl or not sg or not pl:
        return None
    return {"SG": sg, "PL": pl}


def sva_forms(
    token: Token, lex: InflectionLexicon | None = None
) -> dict[str, str] | None:
    """Third-singular and non-third forms; present-tense verbs only."""
    lex = lex or default_lexicon()
    if token.pos != "VERB":
        return None
    w = token.surface.lower()
    if w in _COPULA_SVA:
        third, other = _COPULA_SVA[w]
        return {"THIRD_SG": third, "NOT_THIRD": other}
    if w in ("was", "were", "been", "being", "be"):
        return None
    if w in lex.past_forms:
        return None
    if w.endswith(("ing", "ed")) and w not in lex.verbs:
        return None
    if w in lex.third_to_base:
        return {"THIRD_SG": w, "NOT_THIRD": lex.third_to_base[w]}
    if w in lex.verbs:
        return {"THIRD_SG": lex.verbs[w].third_sg, "NOT_THIRD": w}
    base = _base_from_third(w)
    if base:
        return {"THIRD_SG": w, "NOT_THIRD": base}
    return {"THIRD_SG": third_singular(w, lex), "NOT_THIRD": w}


def vform_forms(
    token: Token, lex: InflectionLexicon | None = None
) -> dict[str, str] | None:
    """Present, past, progressive, and perfect forms of a verb's lemma."""
    lex = lex or default_lexicon()
    if token.pos != "VERB":
        return None
    base = verb_base(token.surface.lower(), lex)
    if base in lex.verbs:
        entry = lex.verbs[base]
        past, perfect = entry.past, entry.perfect
    else:
        past = perfect = _regular_past(base)
    return {
        "Present": base,
        "Past": past,
        "Progressive": progressive(base),
        "Perfect": perfect,
    }


def synonyms(token: Token, lex: InflectionLexicon | None = None) -> list[str]:
    """Up to ten bank synonyms for the token's lemma, bank order preserved."""
    lex = lex or default_lexicon()
    w = token.surface.lower()
    lemmas = [w]
    if token.pos == "NOUN":
        lemmas.append(singularize(w, lex))
    if token.pos == "VERB":
        lemmas.append(verb_base(w, lex))
    for lemma in lemmas:
        bank = lex.synonym_bank.get(lemma)
        if bank:
            return [s for s in bank if s != w][:10]
    return []


_SWAP_NEIGHBOR_POS = ("ADJ", "PART", "MODAL")


def worder_swap_target(sent: TaggedSentence, i: int) -> int | None:
    """Index of the adjacent token an adverb may trade places with."""
    if sent.tokens[i].pos != "ADV":
        return None
    if i + 1 < len(sent) and sent.tokens[i + 1].pos in _SWAP_NEIGHBOR_POS:
        return i + 1
    if i - 1 >= 0 and sent.tokens[i - 1].pos in _SWAP_NEIGHBOR_POS:
        return i - 1
    return None
