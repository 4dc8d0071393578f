"""Conventional digital chains: source codes, channel code, 16-QAM, full path.

Run:  python3 demos/02_digital_baselines.py
About a minute; prints compression/robustness numbers and a small BLEU table.
"""

import numpy as np

from tigsc.baselines import (
    HuffmanCodebook,
    conv_encode,
    fixed5_encode,
    run_conventional,
    viterbi_decode,
)
from tigsc.channel import ChannelConfig
from tigsc.metrics import bleu

SENTENCES = [
    "the committee approved the proposal after a long debate",
    "members raised several questions about the budget",
    "the session closed with a vote on the amendment",
    "delegates discussed the report in great detail",
] * 25

# ---------------------------------------------------------------------------
# 1. Source coding. Huffman adapts to character frequencies and beats the
#    fixed 5-bit code on English-like text.
# ---------------------------------------------------------------------------
text = " ".join(SENTENCES)
codebook = HuffmanCodebook.from_text(text)
n_fixed = fixed5_encode(text).size
n_huff = codebook.encode(text).size
print(f"fixed-5: {n_fixed} bits, huffman: {n_huff} bits "
      f"({100 * (1 - n_huff / n_fixed):.1f}% smaller)")

# ---------------------------------------------------------------------------
# 2. Channel coding. The rate-1/2 code corrects scattered hard errors.
# ---------------------------------------------------------------------------
rng = np.random.default_rng(0)
info = rng.integers(0, 2, 2000).astype(np.uint8)
coded = conv_encode(info)
for flip_rate in (0.00, 0.02, 0.05):
    noisy = coded.copy()
    flips = rng.random(coded.size) < flip_rate
    noisy[flips] ^= 1
    ber = float(np.mean(viterbi_decode(noisy) != info))
    print(f"channel bit flips {flip_rate:.0%} -> decoded BER {ber:.4f}")

# ---------------------------------------------------------------------------
# 3. The full chain against fading, with and without CSI equalization.
# ---------------------------------------------------------------------------
refs = [s.split() for s in SENTENCES]
print(f"\n{'snr_db':>6} {'fixed5+csi':>11} {'fixed5-nocsi':>13} {'huffman+csi':>12}")
for snr in (6, 12, 18, 24):
    cfg = ChannelConfig(kind="rayleigh", snr_db=float(snr))
    row = []
    for source, use_csi in (("fixed5", True), ("fixed5", False), ("huffman", True)):
        result = run_conventional(SENTENCES, source, use_csi, cfg, seed=snr)
        score = bleu(refs, [t.split() for t in result.decoded], max_order=1).score
        row.append(score)
    print(f"{snr:>6} {row[0]:>11.3f} {row[1]:>13.3f} {row[2]:>12.3f}")
print("\nCSI equalization dominates in Rayleigh fading; Huffman matches fixed-5 "
      "in robustness while sending fewer symbols.")
