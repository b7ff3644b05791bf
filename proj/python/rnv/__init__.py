"""Python access to the rnv engine.

The compiled core covers the conversion operations. ``rnv.rnvf`` and
``rnv.hypotheses`` are pure-Python readers and writers for the two file
formats shared with model-side tooling.
"""

from ._core import (
    decode_rnvf,
    fit_gamma,
    gamma_cdf,
    gamma_ppf,
    global_output_length,
    knn_convert,
    normalize_words,
    read_rnvf,
    score_wer,
    segment,
    time_stretch,
    train_segmenter,
    convert_rhythm,
    write_rnvf,
)
from . import hypotheses, rnvf

__all__ = [
    "convert_rhythm",
    "decode_rnvf",
    "fit_gamma",
    "gamma_cdf",
    "gamma_ppf",
    "global_output_length",
    "hypotheses",
    "knn_convert",
    "normalize_words",
    "read_rnvf",
    "rnvf",
    "score_wer",
    "segment",
    "time_stretch",
    "train_segmenter",
    "write_rnvf",
]
