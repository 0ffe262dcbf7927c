import random
from functools import lru_cache

import pytest

from cartrec.catalog_match import (
    BothEmpty,
    EmptyCatalog,
    levenshtein,
    nearest_dish,
    normalized_levenshtein,
)
from cartrec.domain import Catalog
from conftest import make_dish


def lev_oracle(a: str, b: str) -> int:
    """Recursive-definition edit distance; reference for short strings."""

    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        cost = 0 if a[i - 1] == b[j - 1] else 1
        return min(rec(i - 1, j) + 1, rec(i, j - 1) + 1, rec(i - 1, j - 1) + cost)

    return rec(len(a), len(b))


def random_pairs(n: int, seed: int, max_len: int = 8) -> list[tuple[str, str]]:
    rng = random.Random(seed)
    alphabet = "abcdк"
    out = []
    for _ in range(n):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, max_len)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, max_len)))
        out.append((a, b))
    return out


class TestLevenshtein:
    def test_identity(self):
        assert levenshtein("burger", "burger") == 0

    def test_pure_insertions(self):
        assert levenshtein("", "abc") == 3

    def test_kitten_sitting(self):
        assert lev_oracle("kitten", "sitting") == 3  # oracle first
        assert levenshtein("kitten", "sitting") == 3

    def test_matches_recursive_oracle(self):
        for a, b in random_pairs(500, seed=21):
            assert levenshtein(a, b) == lev_oracle(a, b)

    def test_metric_axioms(self):
        """Symmetry, identity of indiscernibles, triangle inequality."""
        rng = random.Random(33)
        strings = [
            "".join(rng.choice("abcd") for _ in range(rng.randint(0, 6)))
            for _ in range(60)
        ]
        for a, b in random_pairs(300, seed=34, max_len=6):
            assert levenshtein(a, b) == levenshtein(b, a)
            assert (levenshtein(a, b) == 0) == (a == b)
        for _ in range(400):
            a, b, c = (rng.choice(strings) for _ in range(3))
            assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


class TestNormalizedLevenshtein:
    def test_identical(self):
        assert normalized_levenshtein("cola", "cola") == 0.0

    def test_full_substitution(self):
        assert normalized_levenshtein("a", "b") == 1.0

    def test_kitten_sitting_fraction(self):
        assert normalized_levenshtein("kitten", "sitting") == pytest.approx(3 / 7)

    def test_always_in_unit_interval(self):
        for a, b in random_pairs(400, seed=55):
            if not a and not b:
                continue
            assert 0.0 <= normalized_levenshtein(a, b) <= 1.0

    def test_both_empty(self):
        with pytest.raises(BothEmpty):
            normalized_levenshtein("", "")


class TestNearestDish:
    def test_exact_match_distance_zero(self, small_catalog):
        result = nearest_dish("cheeseburger", small_catalog)
        assert result.dish_id == "cheeseburger"
        assert result.distance == 0.0

    def test_typo_resolution(self):
        catalog = Catalog.from_dishes(
            [make_dish("cheeseburger", "cheeseburger"), make_dish("cola", "cola")]
        )
        # exhaustive check over the 2-element catalog
        d_cheese = normalized_levenshtein("cheesburger", "cheeseburger")
        d_cola = normalized_levenshtein("cheesburger", "cola")
        assert d_cheese < d_cola
        result = nearest_dish("cheesburger", catalog)
        assert result.dish_id == "cheeseburger"
        assert result.distance == pytest.approx(d_cheese)

    def test_tie_breaks_to_lower_id(self):
        catalog = Catalog.from_dishes([make_dish("b", "xxa"), make_dish("a", "xxb")])
        assert nearest_dish("xxc", catalog).dish_id == "a"

    def test_distance_zero_iff_name_present(self, small_catalog):
        assert nearest_dish("Cherry  Pie!", small_catalog).distance == 0.0
        assert nearest_dish("cherry pies", small_catalog).distance > 0.0

    def test_empty_catalog(self):
        with pytest.raises(EmptyCatalog):
            nearest_dish("cola", Catalog.from_dishes([]))

    def test_normalization_applied(self, small_catalog):
        assert nearest_dish("FRENCH-FRIES", small_catalog).dish_id == "fries"
