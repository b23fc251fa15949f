"""Victim-model access: label-probability and mask-fill oracles.

The search attacks only ever talk to these interfaces. Two desk-scale
implementations ship for offline work (a bag-of-tokens linear classifier
and an add-1 smoothed bigram mask-filler); ``RemoteOracle`` speaks the
HTTP wire protocol to an external model server.
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path
from typing import Sequence

import requests

from .errors import OracleError, ValidationError
from .textmodel import TaggedSentence, TaskInstance

DEFAULT_MAX_BATCH = 32

PROB_SUM_TOL = 1e-6

TextPair = tuple[str, "str | None"]


def instance_texts(inst: TaskInstance) -> TextPair:
    if len(inst.segments) == 2:
        return inst.segments[0].text(), inst.segments[1].text()
    return inst.segments[0].text(), None


def validate_probs(
    probs: dict[str, float], labels: Sequence[str] | None = None
) -> None:
    if any(p < 0 for p in probs.values()):
        raise OracleError(f"negative probability in {probs}", retriable=False)
    total = sum(probs.values())
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise OracleError(
            f"probabilities sum to {total}, expected 1", retriable=False
        )
    if labels is not None and set(probs) != set(labels):
        raise OracleError(
            f"labels {sorted(probs)} do not match task labels {sorted(labels)}",
            retriable=False,
        )


def _check_batch(batch: Sequence, max_batch: int) -> None:
    if not batch:
        raise ValidationError("empty batch")
    if len(batch) > max_batch:
        raise ValidationError(f"batch of {len(batch)} exceeds max {max_batch}")


class Oracle:
    """Query-only victim interface; implementations must be deterministic."""

    labels: tuple[str, ...] = ()
    max_batch: int = DEFAULT_MAX_BATCH

    def predict_texts(self, batch: Sequence[TextPair]) -> list[dict[str, float]]:
        raise NotImplementedError

    def predict(self, instances: Sequence[TaskInstance]) -> list[dict[str, float]]:
        return self.predict_texts([instance_texts(i) for i in instances])

    def mask_fill(self, tokens: Sequence[str], mask_index: int, target: str) -> float:
        raise OracleError("oracle has no mask-fill endpoint", retriable=False)


def _softmax(scores: list[float]) -> list[float]:
    m = max(scores)
    exps = [math.exp(s - m) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


class ToyClassifier(Oracle):
    """Bag-of-tokens linear model over per-label token weights and biases.

    Scores sum token weights over all segments (lowercased; unseen tokens
    contribute nothing) and softmax over labels. Weights may be trained
    from counts or loaded from a JSON file.
    """

    def __init__(
        self,
        labels: Sequence[str],
        weights: dict[str, dict[str, float]],
        bias: dict[str, float] | None = None,
    ):
        if len(labels) < 2:
            raise ValidationError("classifier needs at least 2 labels")
        self.labels = tuple(labels)
        self.weights = {lab: dict(weights.get(lab, {})) for lab in self.labels}
        self.bias = {lab: (bias or {}).get(lab, 0.0) for lab in self.labels}

    def _score(self, tokens: Sequence[str]) -> list[float]:
        scores = []
        for lab in self.labels:
            w = self.weights[lab]
            scores.append(
                self.bias[lab] + sum(w.get(tok.lower(), 0.0) for tok in tokens)
            )
        return scores

    def predict_texts(self, batch: Sequence[TextPair]) -> list[dict[str, float]]:
        _check_batch(batch, self.max_batch)
        out = []
        for text_a, text_b in batch:
            tokens = text_a.split()
            if text_b:
                tokens += text_b.split()
            probs = _softmax(self._score(tokens))
            out.append(dict(zip(self.labels, probs)))
        return out

    def predict_token_texts(self, tokens: Sequence[str]) -> list[dict[str, float]]:
        """Per-token label distributions for tagging tasks."""
        if not tokens:
            raise ValidationError("empty token sequence")
        return [
            dict(zip(self.labels, _softmax(self._score([tok])))) for tok in tokens
        ]

    def save(self, path: str | Path) -> None:
        doc = {"labels": list(self.labels), "weights": self.weights, "bias": self.bias}
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "ToyClassifier":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"no such file: {path}")
        doc = json.loads(path.read_text())
        return cls(doc["labels"], doc.get("weights", {}), doc.get("bias"))


def train_toy_classifier(
    train: Sequence[TaskInstance], alpha: float = 1.0
) -> ToyClassifier:
    """Fit naive-Bayes-style log-odds weights from token counts."""
    if not train:
        raise ValidationError("empty training set")
    tagging = train[0].task_kind == "tagging"
    token_counts: dict[str, dict[str, int]] = {}
    label_counts: dict[str, int] = {}
    vocab: set[str] = set()
    for inst in train:
        if tagging:
            for tok, lab in zip(inst.mutable().surfaces(), inst.gold_label):
                token_counts.setdefault(lab, {})
                token_counts[lab][tok.lower()] = (
                    token_counts[lab].get(tok.lower(), 0) + 1
                )
                label_counts[lab] = label_counts.get(lab, 0) + 1
                vocab.add(tok.lower())
        else:
            lab = inst.gold_label
            token_counts.setdefault(lab, {})
            label_counts[lab] = label_counts.get(lab, 0) + 1
            for seg in inst.segments:
                for tok in seg.surfaces():
                    token_counts[lab][tok.lower()] = (
                        token_counts[lab].get(tok.lower(), 0) + 1
                    )
                    vocab.add(tok.lower())
    labels = sorted(label_counts)
    if len(labels) < 2:
        raise ValidationError("training data covers a single class")
    total = sum(label_counts.values())
    weights = {}
    bias = {}
    for lab in labels:
        counts = token_counts[lab]
        denom = sum(counts.values()) + alpha * len(vocab)
        weights[lab] = {
            tok: math.log((counts.get(tok, 0) + alpha) / denom) for tok in vocab
        }
        bias[lab] = math.log(label_counts[lab] / total)
    return ToyClassifier(labels, weights, bias)


class BigramMaskFiller:
    """Add-1 smoothed bigram model scoring a token in a masked slot.

    P(w at i) is proportional to (c(left, w)+1) * (c(w, right)+1) with
    sentence-boundary symbols at the edges, normalized over the corpus
    vocabulary (plus the target when out of vocabulary).
    """

    BOS = "<s>"
    EOS = "</s>"

    def __init__(self, corpus: Sequence[TaggedSentence | Sequence[str]]):
        if not corpus:
            raise ValidationError("empty mask-fill corpus")
        self.counts: dict[tuple[str, str], int] = {}
        self.vocab: set[str] = set()
        for sent in corpus:
            tokens = (
                sent.surfaces() if isinstance(sent, TaggedSentence) else list(sent)
            )
            self.vocab.update(tokens)
            seq = [self.BOS] + tokens + [self.EOS]
            for left, right in zip(seq, seq[1:]):
                self.counts[(left, right)] = self.counts.get((left, right), 0) + 1

    def mask_fill(self, tokens: Sequence[str], mask_index: int, target: str) -> float:
        if not 0 <= mask_index < len(tokens):
            raise ValidationError("mask index out of range")
        left = tokens[mask_index - 1] if mask_index > 0 else self.BOS
        right = tokens[mask_index + 1] if mask_index + 1 < len(tokens) else self.EOS

        def score(w: str) -> int:
            return (self.counts.get((left, w), 0) + 1) * (
                self.counts.get((w, right), 0) + 1
            )

        words = sorted(self.vocab | {target})
        total = sum(score(w) for w in words)
        return score(target) / total


class RemoteOracle(Oracle):
    """HTTP client for the wire protocol, with retries and a response cache.

    Transport faults and malformed payloads retry with exponential
    backoff; schema violations do not. ``queries`` counts requests that
    actually left the process (cache hits excluded).
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 10.0,
        retries: int = 3,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
        max_batch: int = DEFAULT_MAX_BATCH,
        use_cache: bool = True,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff_base = backoff_base
        self.session = session or requests.Session()
        self.max_batch = max_batch
        self.use_cache = use_cache
        self.queries = 0
        self._predict_cache: dict[TextPair, dict[str, float]] = {}
        self._mask_cache: dict[tuple, float] = {}
        self.labels = ()

    def _post(self, path: str, payload: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    self.endpoint + path, json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last = OracleError(f"transport failure: {exc}", retriable=True)
                continue
            self.queries += 1
            if 200 <= resp.status_code < 300:
                try:
                    return resp.json()
                except ValueError as exc:
                    last = OracleError(f"malformed response: {exc}", retriable=True)
                    continue
            if 400 <= resp.status_code < 500:
                raise OracleError(
                    f"server rejected request ({resp.status_code}): {resp.text}",
                    retriable=False,
                )
            last = OracleError(
                f"server error ({resp.status_code})", retriable=True
            )
        raise last if last is not None else OracleError("retries exhausted")

    def health(self) -> dict:
        resp = self.session.get(self.endpoint + "/health", timeout=self.timeout)
        doc = resp.json()
        self.labels = tuple(doc.get("labels", ()))
        return doc

    def predict_texts(self, batch: Sequence[TextPair]) -> list[dict[str, float]]:
        _check_batch(batch, self.max_batch)
        results: dict[TextPair, dict[str, float]] = {}
        missing = []
        for pair in batch:
            if self.use_cache and pair in self._predict_cache:
                results[pair] = self._predict_cache[pair]
            elif pair not in results:
                missing.append(pair)
        missing = list(dict.fromkeys(missing))
        if missing:
            payload = {
                "instances": [
                    {"textA": a} if b is None else {"textA": a, "textB": b}
                    for a, b in missing
                ]
            }
            doc = self._post("/predict", payload)
            rows = doc.get("probs")
            if not isinstance(rows, list) or len(rows) != len(missing):
                raise OracleError(
                    "response rows do not match request instances", retriable=False
                )
            for pair, row in zip(missing, rows):
                probs = {str(k): float(v) for k, v in row.items()}
                validate_probs(probs, self.labels or None)
                results[pair] = probs
                if self.use_cache:
                    self._predict_cache[pair] = probs
        return [dict(results[pair]) for pair in batch]

    def mask_fill(self, tokens: Sequence[str], mask_index: int, target: str) -> float:
        key = (tuple(tokens), mask_index, target)
        if self.use_cache and key in self._mask_cache:
            return self._mask_cache[key]
        doc = self._post(
            "/mask_fill",
            {"tokens": list(tokens), "mask_index": mask_index, "target": target},
        )
        if "prob" not in doc:
            raise OracleError("response missing prob", retriable=False)
        prob = float(doc["prob"])
        if not 0.0 <= prob <= 1.0:
            raise OracleError(f"probability {prob} outside [0,1]", retriable=False)
        if self.use_cache:
            self._mask_cache[key] = prob
        return prob


class CachingOracle(Oracle):
    """Per-run memo for any oracle; ``queries`` counts cache misses."""

    def __init__(self, inner: Oracle):
        self.inner = inner
        self.queries = 0
        self._cache: dict[TextPair, dict[str, float]] = {}
        self._token_cache: dict[tuple[str, ...], list[dict[str, float]]] = {}

    @property
    def labels(self):
        return self.inner.labels

    @property
    def max_batch(self):
        return self.inner.max_batch

    def predict_texts(self, batch: Sequence[TextPair]) -> list[dict[str, float]]:
        missing = [p for p in dict.fromkeys(batch) if p not in self._cache]
        for pair in missing:
            self._cache[pair] = self.inner.predict_texts([pair])[0]
            self.queries += 1
        return [dict(self._cache[p]) for p in batch]

    def predict_token_texts(self, tokens: Sequence[str]) -> list[dict[str, float]]:
        key = tuple(tokens)
        if key not in self._token_cache:
            self._token_cache[key] = self.inner.predict_token_texts(tokens)
            self.queries += 1
        return [dict(d) for d in self._token_cache[key]]

    def mask_fill(self, tokens: Sequence[str], mask_index: int, target: str) -> float:
        return self.inner.mask_fill(tokens, mask_index, target)
