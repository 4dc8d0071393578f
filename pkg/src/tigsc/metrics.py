"""Corpus BLEU with clipped n-gram precision, and normalized MSE.

BLEU pools clipped n-gram matches over the whole corpus, weighs the K orders
uniformly (1/K each), and applies a brevity penalty clamped at 1 so the score
never exceeds 1. If any order has zero matches the score is 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import torch


@dataclass
class BleuReport:
    precisions: list[float]
    brevity_penalty: float
    score: float
    ref_len: int
    hyp_len: int
    max_order: int
    empty_hypotheses: bool = field(default=False)


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def bleu(
    references: Sequence[Sequence[str]],
    hypotheses: Sequence[Sequence[str]],
    max_order: int = 4,
) -> BleuReport:
    """Corpus-level BLEU of hypothesis sentences against aligned references."""
    if len(references) != len(hypotheses):
        raise ValueError(f"{len(references)} references vs {len(hypotheses)} hypotheses")
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    matches = [0] * max_order
    totals = [0] * max_order
    ref_len = hyp_len = 0
    for ref, hyp in zip(references, hypotheses):
        ref_len += len(ref)
        hyp_len += len(hyp)
        for k in range(1, max_order + 1):
            hyp_counts = _ngram_counts(hyp, k)
            ref_counts = _ngram_counts(ref, k)
            matches[k - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            totals[k - 1] += max(len(hyp) - k + 1, 0)

    if hyp_len == 0:
        return BleuReport([0.0] * max_order, 1.0, 0.0, ref_len, 0, max_order,
                          empty_hypotheses=True)

    precisions = [m / t if t else 0.0 for m, t in zip(matches, totals)]
    bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / max_order)
    return BleuReport(precisions, bp, score, ref_len, hyp_len, max_order)


def nmse(x, y_bar) -> float:
    """Squared error between x and y_bar normalized by the energy of x."""
    x = torch.as_tensor(x).detach().to(torch.float64)
    y_bar = torch.as_tensor(y_bar).detach().to(torch.float64)
    if x.shape != y_bar.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y_bar.shape)}")
    denom = float(x.pow(2).sum())
    if denom == 0.0:
        raise ZeroDivisionError("nmse undefined for an all-zero reference signal")
    return float((x - y_bar).pow(2).sum()) / denom
