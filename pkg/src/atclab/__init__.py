"""Desk-scale lab for ATC transcript curation, WER scoring, and LoRA
fine-tuning experiments on a miniature encoder-decoder model."""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend

__all__ = ["kernel_backend", "__version__"]
