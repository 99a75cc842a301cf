"""Executable check that ignored positions contribute nothing to the loss.

For each record the loss is computed twice: once as aligned, and once with
the label values at every unsupervised position replaced by random valid
token ids. If the masking is implemented correctly the two losses agree to
numerical noise; any dependence on an ignored label is a failure. As a
contrapositive control, perturbing one supervised label must move the loss.
"""

from __future__ import annotations

import random

import torch

from .align import TokenizedRecord
from .model import TinyCausalLM, batch_tensors, masked_loss


def _relative_delta(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), 1e-12)


def verify_masking(
    records: list[TokenizedRecord],
    model: TinyCausalLM,
    tolerance: float = 1e-6,
    seed: int = 0,
) -> dict:
    """Returns a report with per-record results and an overall verdict."""
    rng = random.Random(seed)
    vocab_size = model.lm_head.out_features
    results = []
    overall = True

    model.eval()
    with torch.no_grad():
        for record in records:
            input_ids, labels, supervised = batch_tensors([record])
            baseline = masked_loss(model, input_ids, labels, supervised)
            if baseline is None:
                results.append(
                    {"question_id": record.question_id, "status": "skip",
                     "reason": "no supervised tokens"}
                )
                continue

            perturbed = labels.clone()
            for pos in range(labels.shape[1]):
                if not bool(supervised[0, pos]):
                    perturbed[0, pos] = rng.randrange(vocab_size)
            invariant = masked_loss(model, input_ids, perturbed, supervised)
            invariance_delta = _relative_delta(float(baseline), float(invariant))

            # Contrapositive: flip one supervised label and expect movement.
            sup_positions = [
                pos for pos in range(1, labels.shape[1]) if bool(supervised[0, pos])
            ]
            control = labels.clone()
            pos = sup_positions[len(sup_positions) // 2]
            control[0, pos] = (int(control[0, pos]) + 1) % vocab_size
            moved = masked_loss(model, input_ids, control, supervised)
            sensitivity_delta = _relative_delta(float(baseline), float(moved))

            passed = invariance_delta < tolerance and sensitivity_delta > tolerance
            overall = overall and passed
            results.append(
                {
                    "question_id": record.question_id,
                    "status": "pass" if passed else "fail",
                    "loss": float(baseline),
                    "invariance_delta": invariance_delta,
                    "sensitivity_delta": sensitivity_delta,
                }
            )

    checked = [r for r in results if r["status"] != "skip"]
    return {
        "passed": overall,
        "tolerance": tolerance,
        "records_checked": len(checked),
        "records_skipped": len(results) - len(checked),
        "results": results,
    }
