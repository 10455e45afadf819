"""Disfluency synthesis, adversarial semi-supervised tagging and evaluation."""

from ._errors import DisflError
from ._disfl import Model, filter_fluent, gradcheck, normalize, score, synthesize, train

__all__ = ["DisflError", "Model", "filter_fluent", "gradcheck", "normalize", "score", "synthesize", "train"]
