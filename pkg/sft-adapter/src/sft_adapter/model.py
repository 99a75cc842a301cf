"""A tiny CPU causal language model used to test mask semantics for real.

Two transformer blocks, narrow widths: big enough to produce a genuine
cross-entropy over next-token predictions, small enough that a forward pass
over a full trace takes milliseconds on CPU.
"""

from __future__ import annotations

import torch
from torch import nn

from .align import TokenizedRecord
from .errors import ModelLoadError


class TinyCausalLM(nn.Module):
    def __init__(
        self,
        vocab_size: int = 8192,
        d_model: int = 32,
        n_heads: int = 2,
        n_layers: int = 2,
        max_len: int = 4096,
        seed: int = 0,
    ):
        super().__init__()
        try:
            torch.manual_seed(seed)
            self.max_len = max_len
            self.embed = nn.Embedding(vocab_size, d_model)
            self.pos = nn.Embedding(max_len, d_model)
            layer = nn.TransformerEncoderLayer(
                d_model=d_model,
                nhead=n_heads,
                dim_feedforward=4 * d_model,
                dropout=0.0,
                batch_first=True,
            )
            self.blocks = nn.TransformerEncoder(layer, num_layers=n_layers)
            self.lm_head = nn.Linear(d_model, vocab_size)
        except (RuntimeError, ValueError) as exc:
            raise ModelLoadError(str(exc)) from exc

    def forward(self, input_ids: torch.Tensor) -> torch.Tensor:
        _, seq = input_ids.shape
        if seq > self.max_len:
            raise ModelLoadError(f"sequence of {seq} exceeds max length {self.max_len}")
        positions = torch.arange(seq, device=input_ids.device).unsqueeze(0)
        hidden = self.embed(input_ids) + self.pos(positions)
        causal = nn.Transformer.generate_square_subsequent_mask(seq)
        hidden = self.blocks(hidden, mask=causal, is_causal=True)
        return self.lm_head(hidden)


def masked_loss(
    model: TinyCausalLM,
    input_ids: torch.Tensor,
    labels: torch.Tensor,
    supervised: torch.Tensor,
) -> torch.Tensor | None:
    """Causal cross-entropy over supervised label positions only.

    Position i's label is predicted from positions < i (standard shift).
    Unsupervised label values are never read, which is exactly the property
    verify_masking checks. Returns None when nothing is supervised.
    """
    logits = model(input_ids)
    # Predict labels[1:] from logits[:-1].
    shifted_logits = logits[:, :-1, :]
    shifted_labels = labels[:, 1:]
    shifted_mask = supervised[:, 1:]
    if not bool(shifted_mask.any()):
        return None
    losses = nn.functional.cross_entropy(
        shifted_logits.reshape(-1, shifted_logits.size(-1)),
        shifted_labels.reshape(-1),
        reduction="none",
    )
    mask = shifted_mask.reshape(-1).float()
    return (losses * mask).sum() / mask.sum()


def batch_tensors(records: list[TokenizedRecord], max_seq_len: int = 3000):
    """Pad a batch of tokenized records into (input_ids, labels, supervised)."""
    width = min(max(len(r.input_ids) for r in records), max_seq_len)
    input_ids = torch.zeros((len(records), width), dtype=torch.long)
    labels = torch.zeros((len(records), width), dtype=torch.long)
    supervised = torch.zeros((len(records), width), dtype=torch.bool)
    for row, record in enumerate(records):
        ids = record.input_ids[:width]
        input_ids[row, : len(ids)] = torch.tensor(ids)
        labels[row, : len(ids)] = torch.tensor(record.labels[:width])
        supervised[row, : len(ids)] = torch.tensor(record.supervised[:width])
    return input_ids, labels, supervised
