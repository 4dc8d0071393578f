import math
import random

import pytest
import torch

from tigsc.metrics import bleu, nmse


class TestBleu:
    def test_identity_is_one(self):
        sents = [["the", "cat", "sat"], ["a", "b", "c", "d"]]
        for k in (1, 2, 3):
            assert bleu(sents, sents, max_order=k).score == pytest.approx(1.0, abs=1e-12)

    def test_brevity_penalty_example(self):
        # ref "the cat sat" vs hyp "the cat": P1 = 1, BP = exp(1 - 3/2)
        rep = bleu([["the", "cat", "sat"]], [["the", "cat"]], max_order=1)
        assert rep.precisions[0] == pytest.approx(1.0)
        assert rep.brevity_penalty == pytest.approx(math.exp(-0.5), abs=1e-12)
        assert rep.score == pytest.approx(0.6065306597, abs=1e-6)

    def test_clipped_precision(self):
        # "the the the" vs "the cat": clipped count 1 of 3
        rep = bleu([["the", "cat"]], [["the", "the", "the"]], max_order=1)
        assert rep.precisions[0] == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_zero_match_scores_zero(self):
        assert bleu([["a", "b", "c", "d"]], [["x", "y", "z", "q"]], max_order=1).score == 0.0

    def test_empty_hypotheses_flagged(self):
        rep = bleu([["a", "b"]], [[]], max_order=1)
        assert rep.score == 0.0
        assert rep.empty_hypotheses

    def test_score_never_exceeds_one(self):
        # Longer hypothesis than reference: BP clamps at 1.
        rep = bleu([["a", "b"]], [["a", "b", "a", "b"]], max_order=1)
        assert rep.brevity_penalty == 1.0
        assert rep.score <= 1.0

    def test_corpus_permutation_invariance(self):
        refs = [["a", "b", "c", "d"], ["e", "f", "g"], ["h", "i", "j", "k"]]
        hyps = [["a", "b", "x"], ["e", "f"], ["h", "i", "j", "k"]]
        base = bleu(refs, hyps, max_order=2).score
        order = [2, 0, 1]
        shuffled = bleu([refs[i] for i in order], [hyps[i] for i in order], max_order=2).score
        assert shuffled == pytest.approx(base, abs=1e-15)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            bleu([["a"]], [["a"], ["b"]])


class TestNmse:
    def test_equal_signals(self):
        x = torch.randn(3, 4)
        assert nmse(x, x) == 0.0

    def test_zero_reconstruction_is_one(self):
        x = torch.randn(5, 2)
        assert nmse(x, torch.zeros_like(x)) == pytest.approx(1.0, abs=1e-12)

    def test_hand_example(self):
        assert nmse(torch.tensor([1.0, 1.0]), torch.tensor([0.0, 1.0])) == pytest.approx(0.5)

    def test_scale_invariance(self):
        x = torch.randn(4, 4, dtype=torch.float64)
        y = torch.randn(4, 4, dtype=torch.float64)
        base = nmse(x, y)
        for c in (0.1, 3.0, -7.0):
            assert nmse(c * x, c * y) == pytest.approx(base, rel=1e-10)

    def test_all_zero_reference_rejected(self):
        with pytest.raises(ZeroDivisionError):
            nmse(torch.zeros(3), torch.randn(3))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            nmse(torch.zeros(3), torch.zeros(4))
