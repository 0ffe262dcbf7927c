"""Core data types: money, dishes, orders, and the menu catalog.

All money lives in integer minor units (cents); margin arithmetic is exact,
never floating point.  Types are immutable values and safe to share across
threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

from .text import normalize

__all__ = [
    "Money",
    "Dish",
    "OrderLine",
    "Order",
    "Catalog",
    "UnknownDish",
    "OrderValidationError",
    "Violation",
    "gross_margin",
    "order_gross_margin",
    "validate_order",
    "parse_money",
    "format_money",
    "parse_ts",
    "format_ts",
    "load_catalog",
    "save_catalog",
]

_MONEY_RE = re.compile(r"^(\d+)(?:\.(\d{1,2}))?$")
_TS_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True, order=True)
class Money:
    """An amount in minor currency units.  May be negative (margins)."""

    amount: int

    def __add__(self, other: "Money") -> "Money":
        return Money(self.amount + other.amount)

    def __sub__(self, other: "Money") -> "Money":
        return Money(self.amount - other.amount)

    def __mul__(self, qty: int) -> "Money":
        return Money(self.amount * qty)

    __rmul__ = __mul__


def parse_money(text: str) -> Money:
    """Parse a non-negative decimal string ("3.00", "3.5", "3") exactly."""
    m = _MONEY_RE.match(text)
    if m is None:
        raise ValueError(f"not a money amount: {text!r}")
    whole, frac = m.group(1), m.group(2) or ""
    return Money(int(whole) * 100 + int(frac.ljust(2, "0") or "0"))


def format_money(money: Money) -> str:
    sign = "-" if money.amount < 0 else ""
    units, cents = divmod(abs(money.amount), 100)
    return f"{sign}{units}.{cents:02d}"


def parse_ts(text: str) -> datetime:
    """Parse a UTC timestamp of second precision ("2026-01-01T12:00:00Z")."""
    return datetime.strptime(text, _TS_FORMAT).replace(tzinfo=timezone.utc)


def format_ts(ts: datetime) -> str:
    if ts.tzinfo is None or ts.utcoffset() != timezone.utc.utcoffset(None):
        ts = ts.astimezone(timezone.utc)
    return ts.strftime(_TS_FORMAT)


class UnknownDish(KeyError):
    """A line references a dish id absent from the catalog."""

    def __init__(self, dish_id: str):
        super().__init__(dish_id)
        self.dish_id = dish_id

    def __str__(self) -> str:
        return f"unknown dish id: {self.dish_id!r}"


@dataclass(frozen=True)
class Dish:
    """A menu item with a three-level category path, coarse to fine."""

    id: str
    name: str
    category: tuple[str, str, str]
    unit_price: Money
    unit_cost: Money
    unit_tax: Money

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("dish id must be non-empty")
        if not normalize(self.name):
            raise ValueError(f"dish {self.id!r}: name empty after normalization")
        if len(self.category) != 3:
            raise ValueError(f"dish {self.id!r}: category must have exactly 3 levels")
        for label, money in (
            ("unit_price", self.unit_price),
            ("unit_cost", self.unit_cost),
            ("unit_tax", self.unit_tax),
        ):
            if money.amount < 0:
                raise ValueError(f"dish {self.id!r}: {label} must be >= 0")


@dataclass(frozen=True)
class OrderLine:
    """One purchased dish: quantity plus the recommendation-origin flag."""

    dish_id: str
    name: str
    qty: int
    from_recommendation: bool = False


@dataclass(frozen=True)
class Order:
    """A completed kiosk order; lines carry no ordering semantics."""

    order_id: str
    session_id: str
    restaurant_id: str
    ts: datetime
    lines: tuple[OrderLine, ...]


@dataclass(frozen=True)
class Catalog:
    """Id-indexed dish collection; ids are unique, names need not be."""

    dishes: dict[str, Dish]

    @classmethod
    def from_dishes(cls, dishes: list[Dish]) -> "Catalog":
        by_id: dict[str, Dish] = {}
        for dish in dishes:
            if dish.id in by_id:
                raise ValueError(f"duplicate dish id: {dish.id!r}")
            by_id[dish.id] = dish
        return cls(dishes=by_id)

    def __getitem__(self, dish_id: str) -> Dish:
        try:
            return self.dishes[dish_id]
        except KeyError:
            raise UnknownDish(dish_id) from None

    def get(self, dish_id: str) -> Dish | None:
        return self.dishes.get(dish_id)

    def __contains__(self, dish_id: str) -> bool:
        return dish_id in self.dishes

    def __len__(self) -> int:
        return len(self.dishes)

    def __iter__(self) -> Iterator[Dish]:
        return iter(self.dishes.values())


def gross_margin(revenue: Money, cost: Money, tax: Money) -> Money:
    """Gross margin: revenue minus cost of goods sold minus tax."""
    return revenue - cost - tax


def order_gross_margin(order: Order, catalog: Catalog) -> Money:
    """Sum of per-line margins, each weighted by quantity.

    Raises UnknownDish if any line's id is not in the catalog.
    """
    total = Money(0)
    for line in order.lines:
        dish = catalog[line.dish_id]
        total = total + line.qty * gross_margin(
            dish.unit_price, dish.unit_cost, dish.unit_tax
        )
    return total


@dataclass(frozen=True)
class Violation:
    """A single validation failure; ``line`` is None for order-level issues."""

    code: str
    line: int | None = None


class OrderValidationError(ValueError):
    """Carries the full list of violations found in one order."""

    def __init__(self, order_id: str, violations: list[Violation]):
        self.order_id = order_id
        self.violations = violations
        detail = ", ".join(
            v.code if v.line is None else f"{v.code}[line {v.line}]"
            for v in violations
        )
        super().__init__(f"order {order_id!r}: {detail}")


def validate_order(order: Order) -> Order:
    """Validate an order and merge duplicate-dish lines.

    Quantities for the same dish id are summed and from_recommendation flags
    OR-ed; first-seen line order and names are kept.  All violations are
    collected before raising.  Idempotent on valid orders.
    """
    violations: list[Violation] = []
    if not order.lines:
        violations.append(Violation("empty_order"))
    for i, line in enumerate(order.lines):
        if line.qty < 1:
            violations.append(Violation("non_positive_qty", i))
        if not normalize(line.name):
            violations.append(Violation("empty_name", i))
    if violations:
        raise OrderValidationError(order.order_id, violations)

    merged: dict[str, OrderLine] = {}
    for line in order.lines:
        seen = merged.get(line.dish_id)
        if seen is None:
            merged[line.dish_id] = line
        else:
            merged[line.dish_id] = replace(
                seen,
                qty=seen.qty + line.qty,
                from_recommendation=seen.from_recommendation
                or line.from_recommendation,
            )
    return replace(order, lines=tuple(merged.values()))


def _dish_to_json(dish: Dish) -> dict:
    return {
        "id": dish.id,
        "name": dish.name,
        "category": list(dish.category),
        "unit_price": format_money(dish.unit_price),
        "unit_cost": format_money(dish.unit_cost),
        "unit_tax": format_money(dish.unit_tax),
    }


def _dish_from_json(obj: dict) -> Dish:
    category = obj["category"]
    if not isinstance(category, list) or len(category) != 3:
        raise ValueError(f"dish {obj.get('id')!r}: category must be a 3-element list")
    return Dish(
        id=obj["id"],
        name=obj["name"],
        category=tuple(category),
        unit_price=parse_money(obj["unit_price"]),
        unit_cost=parse_money(obj["unit_cost"]),
        unit_tax=parse_money(obj["unit_tax"]),
    )


def catalog_to_json(catalog: Catalog) -> dict:
    return {"dishes": [_dish_to_json(d) for d in catalog]}


def catalog_from_json(obj: dict) -> Catalog:
    return Catalog.from_dishes([_dish_from_json(d) for d in obj["dishes"]])


def load_catalog(path: str | Path) -> Catalog:
    with open(path, encoding="utf-8") as fh:
        return catalog_from_json(json.load(fh))


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(catalog_to_json(catalog), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
