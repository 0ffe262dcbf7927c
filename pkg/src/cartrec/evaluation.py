"""Offline metrics: MAP@1..4, rec percent, and gross-margin percent, plus the
rule-based baseline recommender for side-by-side comparison.

Evaluation cases are built from orders that actually contain a
recommendation-flagged line: the flagged dish is held out and the recommender
must place it back into the top-4 slate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, Sequence

from .corpus import OrderLog, top_k_dishes
from .domain import Catalog, gross_margin as dish_margin
from .recommender import CartLine, Slate, SlateItem

__all__ = [
    "EvalCase",
    "EvalReport",
    "BaselineRule",
    "RuleBaseline",
    "ZeroTotalMargin",
    "build_eval_cases",
    "average_precision_at_k",
    "evaluate",
    "gross_margin_percent",
    "baseline_recommend",
    "default_baseline",
    "report_to_json",
    "write_report",
]

SLATE_K = 4


class ZeroTotalMargin(ZeroDivisionError):
    """The log's total gross margin is zero; the percentage is undefined."""


@dataclass(frozen=True)
class EvalCase:
    """One held-out recommendation purchase.

    input_cart is the order minus one unit of the truth dish (the line
    disappears entirely when its qty was 1).
    """

    input_cart: tuple[tuple[str, str, int], ...]  # (dish_id, name, qty)
    truth: str
    order_ref: str


@dataclass(frozen=True)
class EvalReport:
    n_cases: int
    map_at: dict[int, float] | None
    o_g: int
    o_a: int
    rec_percent: float | None
    gross_margin_percent: float | None
    window: tuple[datetime, datetime] | None
    model_version: str = ""


@dataclass(frozen=True)
class BaselineRule:
    """All listed level-1 categories in the cart => recommend the dish."""

    require_categories: tuple[str, ...]
    recommend: str


@dataclass(frozen=True)
class RuleBaseline:
    """First-match-wins business rules with popularity backfill to 4 slots."""

    rules: tuple[BaselineRule, ...]
    popularity: tuple[str, ...]


def build_eval_cases(log: OrderLog) -> list[EvalCase]:
    """One case per from_recommendation line in orders with >= 2 units."""
    cases: list[EvalCase] = []
    for order in log.orders:
        if sum(line.qty for line in order.lines) < 2:
            continue
        for line in order.lines:
            if not line.from_recommendation:
                continue
            remainder = [
                (other.dish_id, other.name, other.qty - (1 if other is line else 0))
                for other in order.lines
            ]
            remainder = [(d, n, q) for d, n, q in remainder if q > 0]
            if not remainder:
                continue
            cases.append(
                EvalCase(
                    input_cart=tuple(remainder),
                    truth=line.dish_id,
                    order_ref=order.order_id,
                )
            )
    return cases


def average_precision_at_k(slate_ids: Sequence[str], truth: str, k: int) -> float:
    """1/rank of the truth if it appears in the first k slots, else 0.

    With exactly one relevant item per case, average precision collapses to
    truncated reciprocal rank.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    for rank, dish_id in enumerate(slate_ids[:k], start=1):
        if dish_id == truth:
            return 1.0 / rank
    return 0.0


def gross_margin_percent(log: OrderLog, catalog: Catalog) -> float:
    """100 * (margin of recommendation-flagged units) / (margin of all units).

    Margins resolve through the catalog and accumulate in exact integer
    minor units; only the final percentage is floating point.
    """
    flagged = 0
    total = 0
    for order in log.orders:
        for line in order.lines:
            dish = catalog[line.dish_id]
            margin = line.qty * dish_margin(
                dish.unit_price, dish.unit_cost, dish.unit_tax
            )
            total += margin.amount
            if line.from_recommendation:
                flagged += margin.amount
    if total == 0:
        raise ZeroTotalMargin("total gross margin is zero")
    return 100.0 * flagged / total


def evaluate(
    recommend_fn: Callable[[Sequence[CartLine]], Slate],
    cases: Sequence[EvalCase],
    full_log: OrderLog,
    catalog: Catalog,
    model_version: str = "",
) -> EvalReport:
    """Score a recommender over held-out cases.

    MAP@k averages truncated reciprocal rank over cases; O_g counts cases
    whose truth lands in the top-4; O_a counts every order in the log.  With
    no cases the metric fields are None rather than fabricated zeros.
    """
    o_a = len(full_log.orders)
    window = None
    margin_pct: float | None = None
    if full_log.orders:
        window = full_log.span()
        try:
            margin_pct = gross_margin_percent(full_log, catalog)
        except ZeroTotalMargin:
            margin_pct = None
    if not cases:
        return EvalReport(
            n_cases=0,
            map_at=None,
            o_g=0,
            o_a=o_a,
            rec_percent=None,
            gross_margin_percent=margin_pct,
            window=window,
            model_version=model_version,
        )

    ap_sums = {k: 0.0 for k in range(1, SLATE_K + 1)}
    o_g = 0
    for case in cases:
        slate = recommend_fn(case.input_cart)
        slate_ids = slate.dish_ids()
        for k in ap_sums:
            ap_sums[k] += average_precision_at_k(slate_ids, case.truth, k)
        if case.truth in slate_ids[:SLATE_K]:
            o_g += 1
    n = len(cases)
    return EvalReport(
        n_cases=n,
        map_at={k: ap_sums[k] / n for k in ap_sums},
        o_g=o_g,
        o_a=o_a,
        rec_percent=(o_g / o_a) if o_a > 0 else None,
        gross_margin_percent=margin_pct,
        window=window,
        model_version=model_version,
    )


def baseline_recommend(
    baseline: RuleBaseline, cart: Sequence[CartLine], catalog: Catalog
) -> Slate:
    """Fire matching rules in order, then backfill with popularity to 4.

    A rule matches when every required level-1 category appears among the
    cart's resolvable dishes.  True to the naive house baseline, dishes
    already in the cart are NOT excluded; only duplicate picks are.
    """
    cart_ids = {dish_id for dish_id, _, _ in cart if dish_id}
    cart_categories = {
        catalog[d].category[0] for d in cart_ids if d in catalog
    }
    picks: list[str] = []

    def consider(dish_id: str) -> None:
        if len(picks) >= SLATE_K:
            return
        if dish_id in picks or dish_id not in catalog:
            return
        picks.append(dish_id)

    for rule in baseline.rules:
        if all(cat in cart_categories for cat in rule.require_categories):
            consider(rule.recommend)
    for dish_id in baseline.popularity:
        consider(dish_id)
    items = tuple(
        SlateItem(d, catalog[d].name, 1.0 / (i + 1)) for i, d in enumerate(picks)
    )
    return Slate(items=items)


def default_baseline(catalog: Catalog, log: OrderLog) -> RuleBaseline:
    """Burger-chain house rules: burger => top drink, burger plus drink =>
    top side; popularity order comes from the log."""
    popularity = tuple(top_k_dishes(log, len(catalog) or 1))

    def top_in_category(category: str) -> str | None:
        for dish_id in popularity:
            dish = catalog.get(dish_id)
            if dish is not None and dish.category[0] == category:
                return dish_id
        return None

    rules: list[BaselineRule] = []
    top_side = top_in_category("sides")
    top_drink = top_in_category("drinks")
    if top_side is not None:
        rules.append(BaselineRule(("burgers", "drinks"), top_side))
    if top_drink is not None:
        rules.append(BaselineRule(("burgers",), top_drink))
    return RuleBaseline(rules=tuple(rules), popularity=popularity)


def report_to_json(report: EvalReport) -> dict:
    from .domain import format_ts

    return {
        "n_cases": report.n_cases,
        "map": None
        if report.map_at is None
        else {str(k): report.map_at[k] for k in sorted(report.map_at)},
        "o_g": report.o_g,
        "o_a": report.o_a,
        "rec_percent": report.rec_percent,
        "gross_margin_percent": report.gross_margin_percent,
        "window": None
        if report.window is None
        else [format_ts(t) for t in report.window],
        "model_version": report.model_version,
    }


def write_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_json(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
