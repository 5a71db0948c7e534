"""Fuzzy text matching utilities shared across the pipeline stages."""

import re
import unicodedata
from collections import Counter
from difflib import SequenceMatcher
from typing import List

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:[./:-][a-z0-9]+)*")

# Words carrying no signal for relevance ranking
_STOPWORDS = frozenset(
    "a an and are as at be by for from in is it of on or that the this to with".split()
)


def normalize_for_search(text: str) -> str:
    """Lowercase, strip diacritics and everything that is not a letter or digit."""
    text = text.lower()
    text = unicodedata.normalize("NFD", text)
    text = "".join(c for c in text if unicodedata.category(c) != "Mn")
    return re.sub(r"[^a-z0-9]", "", text)


def tokenize(text: str, drop_stopwords: bool = False) -> List[str]:
    """Split text into lowercase tokens; dotted/colon-joined tokens stay whole."""
    text = unicodedata.normalize("NFD", text.lower())
    text = "".join(c for c in text if unicodedata.category(c) != "Mn")
    tokens = _TOKEN_RE.findall(text)
    if drop_stopwords:
        tokens = [t for t in tokens if t not in _STOPWORDS]
    return tokens


def _is_abbreviation(short: str, word: str) -> bool:
    """``frmt`` abbreviates ``format``: same first letter, letters in order."""
    if len(short) >= len(word) or short[0] != word[0]:
        return False
    rest = iter(word[1:])
    return all(c in rest for c in short[1:])


def _word_score(token: str, candidates: List[str]) -> float:
    if token in candidates:
        return 1.0
    # Numbers, versions and addresses count only when identical
    if any(c.isdigit() for c in token):
        return 0.0
    best = 0.0
    for word in candidates:
        if _is_abbreviation(token, word):
            best = max(best, 0.8)
        elif len(token) >= 4:
            ratio = SequenceMatcher(None, token, word).ratio()
            if ratio >= 0.75:
                best = max(best, ratio)
    return best


def heading_match_score(expected: str, heading: str) -> float:
    """How well a body heading matches the title a table of contents gave for it.

    1.0 when one normalized title contains the other. Otherwise the weighted
    mean over the expected title's words: exact words score 1, abbreviations
    0.8 and near-misses their similarity ratio. Words with digits weigh double
    and must match exactly.
    """
    a, b = normalize_for_search(expected), normalize_for_search(heading)
    if not a:
        return 1.0
    if a in b or (b and b in a):
        return 1.0
    words = tokenize(expected, drop_stopwords=True) or tokenize(expected)
    candidates = tokenize(heading)
    if not words or not candidates:
        return 0.0
    weights = [2.0 if any(c.isdigit() for c in w) else 1.0 for w in words]
    total = sum(w * _word_score(t, candidates) for t, w in zip(words, weights))
    return total / sum(weights)


def token_overlap(a: str, b: str) -> float:
    """Multiset token overlap |A & B| / max(|A|, |B|); 1.0 for two empty strings."""
    ta, tb = Counter(tokenize(a)), Counter(tokenize(b))
    longest = max(sum(ta.values()), sum(tb.values()))
    if longest == 0:
        return 1.0
    return sum((ta & tb).values()) / longest


def relevance(query: str, text: str) -> float:
    """Fraction of the query's content words that occur in text (prefix matches count half)."""
    query_tokens = set(tokenize(query, drop_stopwords=True))
    if not query_tokens:
        return 0.0
    text_tokens = set(tokenize(text, drop_stopwords=True))
    score = 0.0
    for token in query_tokens:
        if token in text_tokens:
            score += 1.0
        elif len(token) >= 4 and any(t.startswith(token) or token.startswith(t) for t in text_tokens if len(t) >= 4):
            score += 0.5
    return score / len(query_tokens)
