"""Answer-aware question generation from a sentence plus an answer-relevant relation."""

__version__ = "0.1.0"
