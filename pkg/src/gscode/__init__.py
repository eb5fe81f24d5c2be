"""Graph neural networks over augmented ASTs with a graph-structured vocabulary cache."""

__version__ = "0.1.0"
