"""Text semantic communication over simulated fading channels, with a
GAN-based distortion suppressor that removes the need for receiver CSI.

Submodules map onto the system's stages: `textcorpus` (tokenization and
batching), `aedm` (transformer encoder/decoder), `channel` (fading and
noise), `gsdsm` (U-Net suppressor plus critic and losses), `training`
(joint and alternating schemes), `baselines` (digital chains), `metrics`
(BLEU and nMSE), `evaluation` (sweeps, ablations, embedding export), and
`cli` (command-line front end).
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    aedm,
    baselines,
    channel,
    evaluation,
    gsdsm,
    metrics,
    textcorpus,
    training,
    tsne,
)
