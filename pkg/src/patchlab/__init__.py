"""Attention mask extraction via saliency segmentation and crowdsourced patch labeling."""

__version__ = "0.1.0"
