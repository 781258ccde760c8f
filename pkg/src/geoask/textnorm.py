"""Text normalization shared by keyword matching and retrieval."""

from __future__ import annotations

import re
from typing import List

_TOKEN = re.compile(r"[a-z0-9]+")

# Words whose surface form must not be trimmed by the suffix rules, plus a
# few common irregular plurals.
IRREGULARS = {
    "grass": "grass",
    "glass": "glass",
    "bus": "bus",
    "gas": "gas",
    "lens": "lens",
    "atlas": "atlas",
    "campus": "campus",
    "alias": "alias",
    "series": "series",
    "species": "species",
    "news": "news",
    "analysis": "analysis",
    "children": "child",
    "men": "man",
    "women": "woman",
    "feet": "foot",
    "geese": "goose",
    "mice": "mouse",
    "people": "person",
    # Function words that end in s and must survive untrimmed.
    "is": "is",
    "as": "as",
    "was": "was",
    "has": "has",
    "its": "its",
    "this": "this",
    "his": "his",
    "hers": "hers",
    "ours": "ours",
    "yours": "yours",
    "theirs": "theirs",
    "us": "us",
    "plus": "plus",
    "versus": "versus",
    "thus": "thus",
    "always": "always",
    "perhaps": "perhaps",
}


def normalize(text: str) -> str:
    """Lowercase and collapse all whitespace runs to single spaces."""
    return re.sub(r"\s+", " ", str(text).lower()).strip()


def tokenize(text: str) -> List[str]:
    """Lowercase alphanumeric tokens; underscores and hyphens split."""
    return _TOKEN.findall(str(text).lower().replace("_", " ").replace("-", " "))


def singularize(word: str) -> str:
    """Rule-based singular form of one lowercase word.

    Rules, in order: irregulars list, ies->y, the es-dropping suffixes
    (ses/xes/zes/ches/shes), then a plain trailing s.
    """
    w = word.lower()
    if w in IRREGULARS:
        return IRREGULARS[w]
    if len(w) > 3 and w.endswith("ies"):
        return w[:-3] + "y"
    for suffix in ("ches", "shes", "ses", "xes", "zes"):
        if len(w) > len(suffix) and w.endswith(suffix):
            return w[:-2]
    if len(w) > 1 and w.endswith("s") and not w.endswith("ss"):
        return w[:-1]
    return w


def singular_phrase(text: str) -> str:
    """Tokenize and singularize every token, joined by single spaces."""
    return " ".join(singularize(t) for t in tokenize(text))
