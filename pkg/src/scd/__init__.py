"""Faithful API-call generation: constrained decoding over documentation
constraints plus candidate reranking."""

__version__ = "0.1.0"
