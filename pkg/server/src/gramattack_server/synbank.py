"""Build a synonym bank TSV from WordNet database files.

Reads the standard WNDB ``index.<pos>`` / ``data.<pos>`` pairs. For each
lemma, the first ten distinct single-word synonyms across its synsets in
file order are kept, headword excluded; multiword collocations (with
underscores) are dropped since the engine substitutes single tokens.
"""

from __future__ import annotations

from pathlib import Path

POS_PARTS = ("noun", "verb", "adj", "adv")


def _parse_data_file(path: Path) -> dict[str, list[str]]:
    synsets: dict[str, list[str]] = {}
    for line in path.read_text().splitlines():
        if not line or line.startswith(" "):
            continue
        parts = line.split()
        if len(parts) < 5:
            continue
        offset = parts[0]
        w_cnt = int(parts[3], 16)
        words = [parts[4 + 2 * i].lower() for i in range(w_cnt)]
        synsets[offset] = words
    return synsets


def _parse_index_file(path: Path) -> list[tuple[str, list[str]]]:
    entries = []
    for line in path.read_text().splitlines():
        if not line or line.startswith(" "):
            continue
        parts = line.split()
        if len(parts) < 5:
            continue
        lemma = parts[0].lower()
        synset_cnt = int(parts[2])
        offsets = parts[-synset_cnt:]
        entries.append((lemma, offsets))
    return entries


def build_synonym_bank(
    wordnet_dir: str | Path, out_path: str | Path, limit: int = 10
) -> int:
    """Write ``lemma<TAB>syn1,...`` rows; returns how many lemmas got rows."""
    wordnet_dir = Path(wordnet_dir)
    if not wordnet_dir.is_dir():
        raise FileNotFoundError(f"no such directory: {wordnet_dir}")
    found = []
    for part in POS_PARTS:
        index_path = wordnet_dir / f"index.{part}"
        data_path = wordnet_dir / f"data.{part}"
        if index_path.exists() and data_path.exists():
            found.append((index_path, data_path))
    if not found:
        raise FileNotFoundError(
            f"no index/data file pairs found under {wordnet_dir}"
        )

    bank: dict[str, list[str]] = {}
    for index_path, data_path in found:
        synsets = _parse_data_file(data_path)
        for lemma, offsets in _parse_index_file(index_path):
            if "_" in lemma:
                continue
            row = bank.setdefault(lemma, [])
            for offset in offsets:
                for word in synsets.get(offset, []):
                    if word == lemma or "_" in word or word in row:
                        continue
                    if len(row) >= limit:
                        break
                    row.append(word)

    lines = [
        f"{lemma}\t{','.join(syns)}"
        for lemma, syns in bank.items()
        if syns
    ]
    Path(out_path).write_text("".join(line + "\n" for line in lines))
    return len(lines)
