"""Acceptability probing: self-attention pooling over a frozen encoder layer.

The head scores each position with v_b^T tanh(W_a h_j), softmaxes into
attention weights, pools the layer's hidden states, and classifies the
pooled vector. Error locating reads the two heaviest-attention words.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .encoder import VictimModel, pad_batch


class ProbeHead(nn.Module):
    def __init__(self, hidden_size: int, num_classes: int = 2,
                 attn_dim: int = 100, dropout: float = 0.1):
        super().__init__()
        self.w_a = nn.Linear(hidden_size, attn_dim)
        self.v_b = nn.Linear(attn_dim, 1, bias=False)
        self.attn_dropout = nn.Dropout(dropout)
        self.cls_dropout = nn.Dropout(dropout)
        self.classifier = nn.Linear(hidden_size, num_classes)

    def forward(self, hidden: torch.Tensor, pad_mask: torch.Tensor):
        scores = self.v_b(torch.tanh(self.w_a(self.attn_dropout(hidden))))
        scores = scores.squeeze(-1).masked_fill(pad_mask, float("-inf"))
        alphas = torch.softmax(scores, dim=-1)
        pooled = torch.einsum("bt,btd->bd", alphas, hidden)
        return self.classifier(self.cls_dropout(pooled)), alphas


@dataclass
class ProbeReport:
    layer_index: int
    sentence_accuracy: float
    location_strict: float
    location_any: float
    test_size: int
    located_size: int


def _split(n: int) -> tuple[range, range, range]:
    train_end = int(n * 0.8)
    dev_end = int(n * 0.9)
    return range(0, train_end), range(train_end, dev_end), range(dev_end, n)


def _word_attention(alphas: torch.Tensor, spans: list[list[int]]) -> list[float]:
    return [float(sum(alphas[p] for p in span)) for span in spans]


def train_probe(
    rows: list[tuple[list[str], str, list[int]]],
    model: VictimModel,
    layer_index: int,
    epochs: int = 10,
    batch_size: int = 8,
    lr: float = 1e-3,
    weight_decay: float = 1e-3,
    patience: int = 2,
    seed: int = 0,
) -> ProbeReport:
    """Train the probing head on a half-corrupted acceptability dataset.

    The encoder never updates; its chosen layer's activations are
    computed once up front. Early stopping watches dev accuracy.
    """
    encoder = model.encoder
    if not 0 <= layer_index <= encoder.num_layers:
        raise ValueError(
            f"layer index {layer_index} outside 0..{encoder.num_layers}"
        )
    if len(rows) < 10:
        raise ValueError("probe dataset too small")
    torch.manual_seed(seed)
    labels = sorted({label for _, label, _ in rows})
    label_ids = torch.tensor([labels.index(label) for _, label, _ in rows])

    encoder.eval()
    for param in encoder.parameters():
        param.requires_grad_(False)

    states = []
    spans_per_row = []
    with torch.no_grad():
        for tokens, _, _ in rows:
            ids, spans = model.tokenizer.encode_words(tokens)
            batch, pad_mask = pad_batch([ids])
            layer_out = encoder.hidden_states(batch, pad_mask)[layer_index]
            states.append(layer_out[0])
            spans_per_row.append(spans)

    head = ProbeHead(encoder.config["d_model"], num_classes=len(labels))
    opt = torch.optim.Adam(head.parameters(), lr=lr, weight_decay=weight_decay)
    loss_fn = nn.CrossEntropyLoss()
    generator = torch.Generator().manual_seed(seed)
    train_idx, dev_idx, test_idx = _split(len(rows))

    def run_batch(indices, train: bool):
        hidden = [states[i] for i in indices]
        width = max(h.size(0) for h in hidden)
        batch = torch.zeros(len(hidden), width, hidden[0].size(1))
        pad_mask = torch.ones(len(hidden), width, dtype=torch.bool)
        for j, h in enumerate(hidden):
            batch[j, : h.size(0)] = h
            pad_mask[j, : h.size(0)] = False
        logits, alphas = head(batch, pad_mask)
        target = label_ids[list(indices)]
        if train:
            loss = loss_fn(logits, target)
            opt.zero_grad()
            loss.backward()
            opt.step()
        return logits, alphas, target

    def accuracy(indices) -> float:
        head.eval()
        hits = 0
        with torch.no_grad():
            for start in range(0, len(indices), 64):
                chunk = indices[start : start + 64]
                logits, _, target = run_batch(chunk, train=False)
                hits += int((logits.argmax(-1) == target).sum())
        return hits / len(indices)

    best_dev, best_state, stale = -1.0, None, 0
    for _ in range(epochs):
        head.train()
        order = torch.randperm(len(train_idx), generator=generator)
        shuffled = [list(train_idx)[i] for i in order]
        for start in range(0, len(shuffled), batch_size):
            run_batch(shuffled[start : start + batch_size], train=True)
        dev_acc = accuracy(list(dev_idx)) if len(dev_idx) else 1.0
        if dev_acc > best_dev:
            best_dev, stale = dev_acc, 0
            best_state = {k: v.clone() for k, v in head.state_dict().items()}
        else:
            stale += 1
            if stale > patience:
                break
    if best_state is not None:
        head.load_state_dict(best_state)

    head.eval()
    test = list(test_idx)
    sent_acc = accuracy(test) if test else 0.0
    strict = any_hit = located = 0
    with torch.no_grad():
        for i in test:
            if not rows[i][2]:
                continue
            located += 1
            _, alphas, _ = run_batch([i], train=False)
            word_attn = _word_attention(alphas[0], spans_per_row[i])
            order = sorted(
                range(len(word_attn)), key=lambda j: (-word_attn[j], j)
            )
            top2 = set(order[:2])
            wanted = set(rows[i][2])
            if wanted <= top2:
                strict += 1
            if wanted & top2:
                any_hit += 1
    return ProbeReport(
        layer_index=layer_index,
        sentence_accuracy=sent_acc,
        location_strict=strict / located if located else 0.0,
        location_any=any_hit / located if located else 0.0,
        test_size=len(test),
        located_size=located,
    )
