"""Toy-scale training smoke test over a masked dataset.

This is a plumbing check, not a reproduction of any full fine-tune: it runs a
handful of optimizer steps on the tiny model and asserts the loss stays
finite. REFERENCE_DEFAULTS records the full-scale hyperparameters for
documentation; only max_seq_len is enforced here.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import torch

from .align import align_spans
from .errors import EmptyDataset
from .model import TinyCausalLM, batch_tensors, masked_loss
from .records import load_records
from .tokenizer import ChunkTokenizer

REFERENCE_DEFAULTS = {
    "learning_rate": 5e-7,
    "schedule": "cosine",
    "warmup_ratio": 0.1,
    "epochs": 2,
    "max_seq_len": 3000,
}


def smoke_train(
    dataset_path: Union[str, Path],
    steps: int = 5,
    seed: int = 0,
    learning_rate: float = 1e-3,
    batch_size: int = 4,
    out_path: Union[str, Path, None] = None,
) -> list[float]:
    """Run a few optimizer steps and return the per-step loss trajectory."""
    records = load_records(dataset_path)
    if not records:
        raise EmptyDataset(dataset_path)

    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)
    tokenizer = ChunkTokenizer()
    tokenized = [align_spans(r, tokenizer) for r in records]
    tokenized = [t for t in tokenized if t.tokens_supervised > 0]
    if not tokenized:
        raise EmptyDataset(dataset_path)

    model = TinyCausalLM(vocab_size=tokenizer.vocab_size, seed=seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=learning_rate)

    losses: list[float] = []
    for step in range(steps):
        start = (step * batch_size) % len(tokenized)
        batch = tokenized[start : start + batch_size] or tokenized[:batch_size]
        input_ids, labels, supervised = batch_tensors(
            batch, max_seq_len=REFERENCE_DEFAULTS["max_seq_len"]
        )
        optimizer.zero_grad()
        loss = masked_loss(model, input_ids, labels, supervised)
        assert loss is not None
        loss.backward()
        optimizer.step()
        value = float(loss.detach())
        if not torch.isfinite(loss):
            raise RuntimeError(f"non-finite loss at step {step}: {value}")
        losses.append(value)

    if out_path is not None:
        Path(out_path).write_text(
            json.dumps({"seed": seed, "losses": losses}, indent=2) + "\n",
            encoding="utf-8",
        )
    return losses
