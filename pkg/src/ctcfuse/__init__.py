"""Audiovisual sequence recognizer built from scratch: blank-marginalized
sequence loss with forward-backward training, stacked bidirectional LSTMs,
WFST/beam decoding, SNR-calibrated augmentation, synthetic audiovisual
corpora with known alignments, and output-peak timing analysis.

Submodules:
    features   audio/visual/fused feature recipes and noising
    ctc        sequence loss, gradient, and enumeration oracle
    model      bidirectional LSTM stack, training loop, checkpoints
    decode     greedy/beam search, transducers, ARPA models, metrics
    avcorpus   synthetic corpus generation and corpus files
    alignment  output-peak extraction and cross-modal lag reports
    kernels    numba-accelerated hot loops (CTCFUSE_NUMBA=0 for pure NumPy)
    cli        the `ctcfuse` command-line tool
"""

from . import alignment, avcorpus, ctc, decode, experiment, features, fileio, kernels, model

__version__ = "0.1.0"

__all__ = [
    "alignment",
    "avcorpus",
    "ctc",
    "decode",
    "experiment",
    "features",
    "fileio",
    "kernels",
    "model",
    "__version__",
]
