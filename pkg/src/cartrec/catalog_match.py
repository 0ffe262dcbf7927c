"""String-level fallback for unknown dish ids: nearest catalog dish by
normalized Levenshtein distance.

Fires when a recommendation target id must be resolved against a stale
serving catalog; semantic OOV handling lives in the embedder.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import Catalog
from .text import normalize

__all__ = [
    "MatchResult",
    "levenshtein",
    "normalized_levenshtein",
    "nearest_dish",
    "BothEmpty",
    "EmptyCatalog",
]


class BothEmpty(ValueError):
    """normalized_levenshtein is undefined when both strings are empty."""


class EmptyCatalog(ValueError):
    """nearest_dish needs at least one catalog dish."""


@dataclass(frozen=True)
class MatchResult:
    dish_id: str
    distance: float


def levenshtein(a: str, b: str) -> int:
    """Minimum single-character edits (insert/delete/substitute) a -> b.

    Counted over Unicode scalar values.  Two-row dynamic programming,
    O(len(a) * len(b)).
    """
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def normalized_levenshtein(a: str, b: str) -> float:
    """Edit distance scaled into [0, 1] by the longer string's length."""
    if not a and not b:
        raise BothEmpty("both strings are empty")
    return levenshtein(a, b) / max(len(a), len(b))


def nearest_dish(name: str, catalog: Catalog) -> MatchResult:
    """Catalog dish minimizing normalized Levenshtein over normalized names.

    Distances are computed on lowercased token lists joined with single
    spaces; ties break toward the lexicographically lower dish id.
    """
    if len(catalog) == 0:
        raise EmptyCatalog("catalog has no dishes")
    query = " ".join(normalize(name))
    if not query:
        raise ValueError("name empty after normalization")
    best: MatchResult | None = None
    for dish in sorted(catalog, key=lambda d: d.id):
        candidate = " ".join(normalize(dish.name))
        distance = normalized_levenshtein(query, candidate)
        if best is None or distance < best.distance:
            best = MatchResult(dish_id=dish.id, distance=distance)
    assert best is not None
    return best
