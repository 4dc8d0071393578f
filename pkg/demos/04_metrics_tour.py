"""BLEU and nMSE semantics by worked example.

Run:  python3 demos/04_metrics_tour.py
Instant; every number here is asserted by the test suite too.
"""

import torch

from tigsc.metrics import bleu, nmse

# ---------------------------------------------------------------------------
# Clipped n-gram precision: repeating a matching word does not inflate the
# score. "the the the" vs "the cat" earns 1 of 3 unigrams, not 3 of 3.
# ---------------------------------------------------------------------------
rep = bleu([["the", "cat"]], [["the", "the", "the"]], max_order=1)
print(f"clipping:       P1 = {rep.precisions[0]:.4f} (1/3)")

# ---------------------------------------------------------------------------
# Brevity penalty: a short but precise hypothesis is discounted by
# exp(1 - ref_len/hyp_len).
# ---------------------------------------------------------------------------
rep = bleu([["the", "cat", "sat"]], [["the", "cat"]], max_order=1)
print(f"brevity:        P1 = {rep.precisions[0]:.4f}, BP = {rep.brevity_penalty:.4f}, "
      f"score = {rep.score:.4f}")

# ---------------------------------------------------------------------------
# Higher orders multiply in; uniform 1/K weights over orders 1..K.
# ---------------------------------------------------------------------------
refs = [["a", "quick", "brown", "fox", "jumps"]]
hyps = [["a", "quick", "red", "fox", "jumps"]]
for k in (1, 2, 3, 4):
    print(f"order K={k}:      score = {bleu(refs, hyps, max_order=k).score:.4f}")

# ---------------------------------------------------------------------------
# Corpus pooling: totals are pooled over sentences, not averaged per sentence.
# ---------------------------------------------------------------------------
refs = [["a", "b"], ["c", "d", "e", "f"]]
hyps = [["a", "b"], ["c", "x", "y", "z"]]
print(f"pooled corpus:  score = {bleu(refs, hyps, max_order=1).score:.4f} "
      "(5 matches of 6 unigrams)")

# ---------------------------------------------------------------------------
# nMSE: reconstruction error normalized by the reference energy. Zero for a
# perfect match, one for an all-zero reconstruction, scale-invariant.
# ---------------------------------------------------------------------------
x = torch.randn(4, 16, 8, 2, dtype=torch.float64)
noisy = x + 0.3 * torch.randn_like(x)
print(f"\nnmse(x, x)       = {nmse(x, x):.4f}")
print(f"nmse(x, 0)       = {nmse(x, torch.zeros_like(x)):.4f}")
print(f"nmse(x, noisy)   = {nmse(x, noisy):.4f}")
print(f"nmse(3x, 3noisy) = {nmse(3 * x, 3 * noisy):.4f} (scale invariant)")
