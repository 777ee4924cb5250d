"""One-parameter isospectral potential families from composed superpotentials."""

from .expr import Expression, differentiate, evaluate, parse, render

__version__ = "0.1.0"
