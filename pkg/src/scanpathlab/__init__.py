"""Scanpath prediction and scanpath-guided multi-label classification.

A desk-scale, fully deterministic stack: a from-scratch reverse-mode
tensor core, an LSTM scanpath predictor over a 16x16 patch dictionary, a
fixation-guided classifier with attention pooling, scanpath similarity
metrics (alignment-based and saccade-vector-based), AUROC/AUPRC, and a
reproducible experiment harness with a CLI.
"""

__version__ = "0.1.0"
