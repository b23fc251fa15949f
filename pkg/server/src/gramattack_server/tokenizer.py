"""Word-level tokenizer with character fallback subpieces.

Known words map to a single piece. Unknown words split into character
pieces, the first bare and the rest prefixed ``##``; characters outside
the vocabulary become ``[UNK]``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)


class Tokenizer:
    def __init__(self, pieces: Sequence[str]):
        self.pieces = list(pieces)
        self.piece_to_id = {p: i for i, p in enumerate(self.pieces)}
        for i, special in enumerate(SPECIALS):
            if self.pieces[i] != special:
                raise ValueError("vocabulary must start with the special pieces")

    @classmethod
    def build(cls, corpus: Iterable[Sequence[str]]) -> "Tokenizer":
        words = set()
        chars = set()
        for tokens in corpus:
            for tok in tokens:
                word = tok.lower()
                words.add(word)
                chars.update(word)
        pieces = list(SPECIALS)
        pieces.extend(sorted(words))
        pieces.extend(sorted(c for c in chars))
        pieces.extend(sorted("##" + c for c in chars))
        return cls(pieces)

    @property
    def vocab_size(self) -> int:
        return len(self.pieces)

    def word_pieces(self, word: str) -> list[str]:
        word = word.lower()
        if word in self.piece_to_id:
            return [word]
        out = []
        for i, ch in enumerate(word):
            piece = ch if i == 0 else "##" + ch
            out.append(piece if piece in self.piece_to_id else UNK)
        return out or [UNK]

    def encode_words(self, words: Sequence[str]) -> tuple[list[int], list[list[int]]]:
        """Piece ids plus, per word, the positions its pieces occupy."""
        ids = []
        spans: list[list[int]] = []
        for word in words:
            span = []
            for piece in self.word_pieces(word):
                span.append(len(ids))
                ids.append(self.piece_to_id.get(piece, self.piece_to_id[UNK]))
            spans.append(span)
        return ids, spans

    def encode_pair(
        self, text_a: Sequence[str], text_b: Sequence[str] | None, max_len: int
    ) -> list[int]:
        ids_a, _ = self.encode_words(text_a)
        ids = [self.piece_to_id[CLS]] + ids_a + [self.piece_to_id[SEP]]
        if text_b is not None:
            ids_b, _ = self.encode_words(text_b)
            ids += ids_b + [self.piece_to_id[SEP]]
        return ids[:max_len]

    def id_of(self, piece: str) -> int:
        return self.piece_to_id.get(piece, self.piece_to_id[UNK])
