"""Tokenization rules shared by lexical scoring, the mock backends and the token budget."""
from __future__ import annotations

import re

_ALNUM_RUN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs; every other character separates tokens.

    Unicode-aware, no stemming, no stopword removal.
    """
    return _ALNUM_RUN.findall(text.lower())


def count_tokens(text: str) -> int:
    """Number of maximal non-whitespace runs in *text*."""
    return len(text.split())
