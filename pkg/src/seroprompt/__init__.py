"""Serological risk prediction with prompt-serialized samples and a small
autoregressive severity/outcome model, plus classical baselines."""

__version__ = "0.1.0"
