"""A small transformer encoder with classification and mask-fill heads.

Deliberately desk-scale: it trains from scratch on a task's training
split in seconds on CPU and stands in for a fine-tuned encoder behind
the wire protocol. Layer outputs are exposed individually so probing
classifiers can attach anywhere.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .tokenizer import MASK, Tokenizer


class TinyEncoder(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        num_labels: int,
        d_model: int = 64,
        nhead: int = 4,
        num_layers: int = 2,
        dim_feedforward: int = 128,
        max_len: int = 128,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.config = {
            "vocab_size": vocab_size,
            "num_labels": num_labels,
            "d_model": d_model,
            "nhead": nhead,
            "num_layers": num_layers,
            "dim_feedforward": dim_feedforward,
            "max_len": max_len,
            "dropout": dropout,
        }
        self.token_emb = nn.Embedding(vocab_size, d_model, padding_idx=0)
        self.pos_emb = nn.Embedding(max_len, d_model)
        self.layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model,
                nhead,
                dim_feedforward=dim_feedforward,
                dropout=dropout,
                batch_first=True,
            )
            for _ in range(num_layers)
        )
        self.classifier = nn.Linear(d_model, num_labels)
        self.mlm_head = nn.Linear(d_model, vocab_size)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def hidden_states(
        self, ids: torch.Tensor, pad_mask: torch.Tensor
    ) -> list[torch.Tensor]:
        """Per-layer activations: index 0 is the embedding layer."""
        positions = torch.arange(ids.size(1), device=ids.device)
        h = self.token_emb(ids) + self.pos_emb(positions)[None, :, :]
        states = [h]
        for layer in self.layers:
            h = layer(h, src_key_padding_mask=pad_mask)
            states.append(h)
        return states

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor):
        h = self.hidden_states(ids, pad_mask)[-1]
        return self.classifier(h[:, 0, :]), self.mlm_head(h)


def pad_batch(batches: Sequence[Sequence[int]]):
    width = max(len(b) for b in batches)
    ids = torch.zeros(len(batches), width, dtype=torch.long)
    pad_mask = torch.ones(len(batches), width, dtype=torch.bool)
    for i, b in enumerate(batches):
        ids[i, : len(b)] = torch.tensor(b, dtype=torch.long)
        pad_mask[i, : len(b)] = False
    return ids, pad_mask


class VictimModel:
    """Tokenizer + encoder + label set, with save/load and inference."""

    def __init__(self, tokenizer: Tokenizer, encoder: TinyEncoder,
                 labels: Sequence[str]):
        self.tokenizer = tokenizer
        self.encoder = encoder
        self.labels = list(labels)
        self.max_len = encoder.config["max_len"]

    @torch.no_grad()
    def predict_probs(
        self, pairs: Sequence[tuple[Sequence[str], "Sequence[str] | None"]]
    ) -> list[dict[str, float]]:
        self.encoder.eval()
        encoded = [
            self.tokenizer.encode_pair(a, b, self.max_len) for a, b in pairs
        ]
        ids, pad_mask = pad_batch(encoded)
        logits, _ = self.encoder(ids, pad_mask)
        probs = torch.softmax(logits, dim=-1)
        out = []
        for row in probs:
            out.append(
                {lab: float(row[i]) for i, lab in enumerate(self.labels)}
            )
        return out

    @torch.no_grad()
    def mask_fill_prob(
        self, tokens: Sequence[str], mask_index: int, target: str
    ) -> float:
        """Probability of the target word in the masked slot.

        The full word is masked: the slot holds one mask per target
        subpiece. A target the tokenizer knows is a single piece and
        scores directly; a target that is OOV for the tokenizer falls
        back to the probability of its first subpiece.
        """
        self.encoder.eval()
        if not 0 <= mask_index < len(tokens):
            raise ValueError("mask index out of range")
        target_pieces = self.tokenizer.word_pieces(target)
        ids = [self.tokenizer.id_of("[CLS]")]
        masked_positions = []
        for i, word in enumerate(tokens):
            if i == mask_index:
                for _ in target_pieces:
                    masked_positions.append(len(ids))
                    ids.append(self.tokenizer.id_of(MASK))
            else:
                for piece in self.tokenizer.word_pieces(word):
                    ids.append(self.tokenizer.id_of(piece))
        ids.append(self.tokenizer.id_of("[SEP]"))
        ids = ids[: self.max_len]
        batch, pad_mask = pad_batch([ids])
        _, mlm_logits = self.encoder(batch, pad_mask)
        probs = torch.softmax(mlm_logits[0], dim=-1)
        first_pos, first_piece = masked_positions[0], target_pieces[0]
        if first_pos >= len(ids):
            return 0.0
        return float(probs[first_pos, self.tokenizer.id_of(first_piece)])

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "config": self.encoder.config,
                "pieces": self.tokenizer.pieces,
                "labels": self.labels,
                "state": self.encoder.state_dict(),
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "VictimModel":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no such checkpoint: {path}")
        blob = torch.load(path, map_location="cpu", weights_only=False)
        encoder = TinyEncoder(**blob["config"])
        encoder.load_state_dict(blob["state"])
        encoder.eval()
        return cls(Tokenizer(blob["pieces"]), encoder, blob["labels"])


def train_classifier(
    instances,
    epochs: int = 12,
    lr: float = 1e-3,
    batch_size: int = 16,
    seed: int = 0,
    mlm_weight: float = 0.5,
    **encoder_kwargs,
) -> VictimModel:
    """Fit the tiny encoder on task instances (primary dataset objects).

    Joint objective: cross-entropy on the label plus a masked-token loss
    so the mask-fill head learns something useful from the same pass.
    """
    torch.manual_seed(seed)
    labels = sorted({inst.gold_label for inst in instances})
    texts = []
    for inst in instances:
        segs = [seg.surfaces() for seg in inst.segments]
        texts.append((segs[0], segs[1] if len(segs) == 2 else None))
    corpus = [a + (b or []) for a, b in texts]
    tokenizer = Tokenizer.build(corpus)
    encoder = TinyEncoder(tokenizer.vocab_size, len(labels), **encoder_kwargs)
    label_ids = torch.tensor(
        [labels.index(inst.gold_label) for inst in instances]
    )
    encoded = [
        tokenizer.encode_pair(a, b, encoder.config["max_len"]) for a, b in texts
    ]
    opt = torch.optim.Adam(encoder.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    generator = torch.Generator().manual_seed(seed)
    mask_id = tokenizer.id_of(MASK)
    encoder.train()
    for _ in range(epochs):
        order = torch.randperm(len(encoded), generator=generator)
        for start in range(0, len(order), batch_size):
            chunk = order[start : start + batch_size]
            ids, pad_mask = pad_batch([encoded[i] for i in chunk])
            target = label_ids[chunk]
            corrupt = ids.clone()
            mask_roll = (
                (torch.rand(ids.shape, generator=generator) < 0.15)
                & ~pad_mask
                & (ids > 4)
            )
            corrupt[mask_roll] = mask_id
            logits, mlm_logits = encoder(corrupt, pad_mask)
            loss = loss_fn(logits, target)
            if mask_roll.any():
                loss = loss + mlm_weight * loss_fn(
                    mlm_logits[mask_roll], ids[mask_roll]
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
    encoder.eval()
    return VictimModel(tokenizer, encoder, labels)


def evaluate_accuracy(model: VictimModel, instances) -> float:
    pairs = []
    for inst in instances:
        segs = [seg.surfaces() for seg in inst.segments]
        pairs.append((segs[0], segs[1] if len(segs) == 2 else None))
    rows = model.predict_probs(pairs)
    hits = sum(
        1
        for inst, row in zip(instances, rows)
        if max(sorted(row), key=lambda k: row[k]) == inst.gold_label
    )
    return hits / len(instances)
