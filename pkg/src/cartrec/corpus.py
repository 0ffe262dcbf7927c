"""Order-log ingestion and the seeded synthetic order generator.

Logs are JSON-Lines (optionally gzipped, detected by a ".gz" extension), one
order per line, timestamps UTC.  The generator plants known
trigger->consequent correlations into otherwise popularity-driven carts so
model quality is verifiable without production data.
"""

from __future__ import annotations

import gzip
import json
import logging
import random
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO

from .domain import (
    Catalog,
    Dish,
    Money,
    Order,
    OrderLine,
    format_money,
    format_ts,
    parse_money,
    parse_ts,
    validate_order,
)

__all__ = [
    "OrderLog",
    "LogLine",
    "GeneratorSpec",
    "Rule",
    "ParseError",
    "InvalidSpec",
    "load_orders",
    "save_orders",
    "append_order",
    "generate_orders",
    "top_k_dishes",
    "order_to_json",
    "order_from_json",
    "demo_catalog",
    "demo_rules",
]

logger = logging.getLogger(__name__)

MAX_CART_SIZE = 6
_QTY_TWO_RATE = 0.15  # occasional qty-2 base lines exercise unit-level merging


class ParseError(ValueError):
    """A malformed order-log line; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class InvalidSpec(ValueError):
    """Generator spec violates its own invariants."""


@dataclass(frozen=True)
class LogLine(OrderLine):
    """An order line as recorded in the log: includes sale-time money.

    Margin metrics resolve money through the catalog; these fields preserve
    what the till recorded so log files round-trip exactly.
    """

    unit_price: Money = Money(0)
    unit_cost: Money = Money(0)
    unit_tax: Money = Money(0)


@dataclass(frozen=True)
class OrderLog:
    """Validated orders sorted non-decreasing by timestamp."""

    orders: tuple[Order, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.orders)

    def window(self, start: datetime, end: datetime) -> "OrderLog":
        """Orders with start <= ts < end; preserves sort order."""
        return OrderLog(
            orders=tuple(o for o in self.orders if start <= o.ts < end),
            source=self.source,
        )

    def span(self) -> tuple[datetime, datetime]:
        if not self.orders:
            raise ValueError("empty log has no time span")
        return self.orders[0].ts, self.orders[-1].ts


@dataclass(frozen=True)
class Rule:
    """When every trigger dish is in the cart, add the consequent."""

    trigger: frozenset[str]
    consequent: str
    probability: float


@dataclass(frozen=True)
class GeneratorSpec:
    menu: Catalog
    n_orders: int
    seed: int
    popularity: dict[str, float]
    rules: tuple[Rule, ...] = ()
    rec_flag_rate: float = 0.7
    date_range: tuple[datetime, datetime] = ()  # type: ignore[assignment]

    def validate(self) -> None:
        if self.n_orders < 1:
            raise InvalidSpec("n_orders must be >= 1")
        if not (0.0 <= self.rec_flag_rate <= 1.0):
            raise InvalidSpec("rec_flag_rate must be in [0, 1]")
        if len(self.date_range) != 2 or self.date_range[0] >= self.date_range[1]:
            raise InvalidSpec("date_range must be [start, end) with start < end")
        weights = [self.popularity.get(d.id, 0.0) for d in self.menu]
        if any(w < 0 for w in weights):
            raise InvalidSpec("popularity weights must be >= 0")
        if not any(w > 0 for w in weights):
            raise InvalidSpec("at least one popularity weight must be positive")
        for rule in self.rules:
            if not (0.0 <= rule.probability <= 1.0):
                raise InvalidSpec(f"rule probability out of [0, 1]: {rule}")
            for dish_id in set(rule.trigger) | {rule.consequent}:
                if dish_id not in self.menu:
                    raise InvalidSpec(f"rule references unknown dish: {dish_id!r}")


def order_to_json(order: Order) -> dict:
    def money(line: OrderLine, attr: str) -> str:
        return format_money(getattr(line, attr, Money(0)))

    return {
        "order_id": order.order_id,
        "session_id": order.session_id,
        "restaurant_id": order.restaurant_id,
        "ts": format_ts(order.ts),
        "lines": [
            {
                "dish_id": line.dish_id,
                "name": line.name,
                "qty": line.qty,
                "unit_price": money(line, "unit_price"),
                "unit_cost": money(line, "unit_cost"),
                "unit_tax": money(line, "unit_tax"),
                "from_recommendation": line.from_recommendation,
            }
            for line in order.lines
        ],
    }


def order_from_json(obj: dict) -> Order:
    lines = tuple(
        LogLine(
            dish_id=entry["dish_id"],
            name=entry["name"],
            qty=entry["qty"],
            from_recommendation=bool(entry["from_recommendation"]),
            unit_price=parse_money(entry["unit_price"]),
            unit_cost=parse_money(entry["unit_cost"]),
            unit_tax=parse_money(entry["unit_tax"]),
        )
        for entry in obj["lines"]
    )
    return Order(
        order_id=obj["order_id"],
        session_id=obj["session_id"],
        restaurant_id=obj["restaurant_id"],
        ts=parse_ts(obj["ts"]),
        lines=lines,
    )


def _open_log(path: Path, mode: str) -> IO:
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def load_orders(
    path: str | Path,
    window: tuple[datetime, datetime] | None = None,
    tolerate_torn_tail: bool = False,
) -> OrderLog:
    """Load, validate, and sort all orders with window start <= ts < end.

    An empty result is not an error.  Any unparseable line raises
    ParseError(line_no) unless it is the final line of the file and
    ``tolerate_torn_tail`` is set, in which case it is skipped with a warning
    (an append interrupted mid-line must not poison the next reload).
    """
    path = Path(path)
    if window is not None and window[0] >= window[1]:
        raise ValueError("window must satisfy start < end")
    raw: list[tuple[int, str]] = []
    with _open_log(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                raw.append((line_no, line))
    orders: list[Order] = []
    for pos, (line_no, line) in enumerate(raw):
        is_last = pos == len(raw) - 1
        try:
            order = validate_order(order_from_json(json.loads(line)))
        except Exception as exc:
            if tolerate_torn_tail and is_last:
                logger.warning("skipping torn final line %d of %s: %s", line_no, path, exc)
                continue
            raise ParseError(line_no, str(exc)) from exc
        if window is None or window[0] <= order.ts < window[1]:
            orders.append(order)
    orders.sort(key=lambda o: o.ts)
    return OrderLog(orders=tuple(orders), source=str(path))


def save_orders(log: OrderLog, path: str | Path) -> None:
    """Write one canonical JSON line per order; round-trips bit-exactly."""
    path = Path(path)
    with _open_log(path, "w") as fh:
        for order in log.orders:
            fh.write(json.dumps(order_to_json(order), ensure_ascii=False))
            fh.write("\n")


def append_order(order: Order, path: str | Path) -> None:
    """Append one order durably (flushed and fsynced before returning)."""
    import os

    path = Path(path)
    line = json.dumps(order_to_json(order), ensure_ascii=False) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


def _weighted_sample(
    rng: random.Random, ids: list[str], weights: list[float], size: int
) -> list[str]:
    """Weighted sampling without replacement via sequential draws."""
    pool = list(zip(ids, weights))
    chosen: list[str] = []
    for _ in range(min(size, len(pool))):
        total = sum(w for _, w in pool)
        if total <= 0:
            break
        x = rng.random() * total
        acc = 0.0
        for i, (dish_id, w) in enumerate(pool):
            acc += w
            if x < acc:
                chosen.append(dish_id)
                pool.pop(i)
                break
        else:  # floating-point edge: x == total
            chosen.append(pool[-1][0])
            pool.pop()
    return chosen


def generate_orders(spec: GeneratorSpec) -> OrderLog:
    """Deterministically synthesize an order log from a GeneratorSpec.

    Cart sizes are uniform on 1..6; base dishes are drawn by popularity
    weight without replacement.  Rules are then evaluated in spec order
    against the growing cart: when a rule's trigger set is contained in the
    cart and the consequent absent, the consequent is added with the rule's
    probability and flagged from_recommendation with rec_flag_rate.  A
    consequent added by one rule can satisfy a later rule's trigger.
    """
    spec.validate()
    rng = random.Random(spec.seed)
    dish_ids = sorted(d.id for d in spec.menu if spec.popularity.get(d.id, 0.0) > 0)
    weights = [spec.popularity[d] for d in dish_ids]

    start, end = spec.date_range
    span = int((end - start).total_seconds())
    offsets = sorted(rng.randrange(span) for _ in range(spec.n_orders))

    orders: list[Order] = []
    for i, offset in enumerate(offsets):
        size = rng.randint(1, MAX_CART_SIZE)
        base = _weighted_sample(rng, dish_ids, weights, size)
        lines: list[OrderLine] = []
        in_cart: set[str] = set()
        for dish_id in base:
            qty = 2 if rng.random() < _QTY_TWO_RATE else 1
            lines.append(_priced_line(spec.menu[dish_id], qty, False))
            in_cart.add(dish_id)
        for rule in spec.rules:
            if rule.trigger <= in_cart and rule.consequent not in in_cart:
                if rng.random() < rule.probability:
                    flagged = rng.random() < spec.rec_flag_rate
                    lines.append(_priced_line(spec.menu[rule.consequent], 1, flagged))
                    in_cart.add(rule.consequent)
        order = Order(
            order_id=f"o{i:07d}",
            session_id=f"s{i:07d}",
            restaurant_id=f"r{rng.randint(1, 20):03d}",
            ts=start + timedelta(seconds=offset),
            lines=tuple(lines),
        )
        orders.append(validate_order(order))
    return OrderLog(orders=tuple(orders), source=f"generated:seed={spec.seed}")


def _priced_line(dish: Dish, qty: int, flagged: bool) -> LogLine:
    return LogLine(
        dish_id=dish.id,
        name=dish.name,
        qty=qty,
        from_recommendation=flagged,
        unit_price=dish.unit_price,
        unit_cost=dish.unit_cost,
        unit_tax=dish.unit_tax,
    )


def top_k_dishes(log: OrderLog, k: int) -> list[str]:
    """The k dish ids with highest total purchased quantity.

    Ties break toward the lexicographically lower id; fewer than k are
    returned if the log has fewer distinct dishes.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts: dict[str, int] = {}
    for order in log.orders:
        for line in order.lines:
            counts[line.dish_id] = counts.get(line.dish_id, 0) + line.qty
    ranked = sorted(counts, key=lambda d: (-counts[d], d))
    return ranked[:k]


# Demo menu used by the CLI, tests, and the kiosk UI.  Forty dishes across
# five level-1 categories; popularity ranks give the Zipf-like skew where a
# handful of driver items dominate purchases.
_DEMO_MENU: list[tuple[str, str, tuple[str, str, str], str, str, str]] = [
    ("burger", "hamburger", ("burgers", "beef", "classic"), "3.50", "1.20", "0.35"),
    ("cola", "cola", ("drinks", "cold", "soda"), "1.80", "0.30", "0.18"),
    ("fries", "french fries", ("sides", "fried", "potato"), "2.20", "0.50", "0.22"),
    ("cheeseburger", "cheeseburger", ("burgers", "beef", "cheese"), "4.20", "1.50", "0.42"),
    ("nuggets", "chicken nuggets", ("sides", "fried", "chicken"), "3.80", "1.30", "0.38"),
    ("diet-cola", "diet cola", ("drinks", "cold", "soda"), "1.80", "0.30", "0.18"),
    ("chicken-burger", "chicken burger", ("burgers", "chicken", "classic"), "3.90", "1.40", "0.39"),
    ("large-fries", "large french fries", ("sides", "fried", "potato"), "2.90", "0.70", "0.29"),
    ("pie", "cherry pie", ("desserts", "baked", "pie"), "2.50", "0.80", "0.25"),
    ("orange-soda", "orange soda", ("drinks", "cold", "soda"), "1.80", "0.30", "0.18"),
    ("double-cheeseburger", "double cheeseburger", ("burgers", "beef", "cheese"), "5.60", "2.10", "0.56"),
    ("milkshake-vanilla", "vanilla milkshake", ("drinks", "cold", "shake"), "3.20", "0.90", "0.32"),
    ("coffee", "coffee", ("drinks", "hot", "coffee"), "2.00", "0.35", "0.20"),
    ("onion-rings", "onion rings", ("sides", "fried", "onion"), "2.60", "0.70", "0.26"),
    ("bacon-burger", "bacon burger", ("burgers", "beef", "bacon"), "4.80", "1.80", "0.48"),
    ("ice-cream", "vanilla ice cream", ("desserts", "frozen", "cone"), "1.50", "0.40", "0.15"),
    ("lemonade", "lemonade", ("drinks", "cold", "juice"), "2.10", "0.45", "0.21"),
    ("apple-pie", "apple pie", ("desserts", "baked", "pie"), "2.50", "0.80", "0.25"),
    ("hot-dog", "hot dog", ("wraps", "grilled", "classic"), "2.80", "0.90", "0.28"),
    ("milkshake-chocolate", "chocolate milkshake", ("drinks", "cold", "shake"), "3.20", "0.90", "0.32"),
    ("iced-tea", "iced tea", ("drinks", "cold", "tea"), "1.90", "0.30", "0.19"),
    ("cheese-sticks", "cheese sticks", ("sides", "fried", "cheese"), "3.10", "1.00", "0.31"),
    ("fish-burger", "fish burger", ("burgers", "fish", "classic"), "4.10", "1.60", "0.41"),
    ("cappuccino", "cappuccino", ("drinks", "hot", "coffee"), "2.60", "0.50", "0.26"),
    ("caesar-salad", "caesar salad", ("sides", "fresh", "salad"), "4.50", "1.70", "0.45"),
    ("brownie", "brownie", ("desserts", "baked", "chocolate"), "2.20", "0.60", "0.22"),
    ("chicken-wrap", "chicken wrap", ("wraps", "grilled", "chicken"), "4.30", "1.60", "0.43"),
    ("veggie-burger", "veggie burger", ("burgers", "veggie", "classic"), "3.70", "1.30", "0.37"),
    ("sundae", "chocolate sundae", ("desserts", "frozen", "sundae"), "2.40", "0.70", "0.24"),
    ("tea", "black tea", ("drinks", "hot", "tea"), "1.50", "0.20", "0.15"),
    ("water", "sparkling water", ("drinks", "cold", "water"), "1.20", "0.15", "0.12"),
    ("garden-salad", "garden salad", ("sides", "fresh", "salad"), "3.90", "1.40", "0.39"),
    ("coleslaw", "coleslaw", ("sides", "fresh", "cabbage"), "1.90", "0.50", "0.19"),
    ("donut", "glazed donut", ("desserts", "baked", "donut"), "1.60", "0.40", "0.16"),
    ("latte", "latte", ("drinks", "hot", "coffee"), "2.80", "0.55", "0.28"),
    ("cookie", "chocolate cookie", ("desserts", "baked", "cookie"), "1.40", "0.35", "0.14"),
    ("spicy-burger", "spicy burger", ("burgers", "beef", "spicy"), "4.40", "1.60", "0.44"),
    ("veggie-wrap", "veggie wrap", ("wraps", "grilled", "veggie"), "3.80", "1.30", "0.38"),
    ("muffin", "blueberry muffin", ("desserts", "baked", "muffin"), "1.80", "0.50", "0.18"),
    ("bbq-wings", "bbq chicken wings", ("sides", "fried", "chicken"), "4.60", "1.90", "0.46"),
]


def demo_catalog() -> Catalog:
    """The built-in 40-dish demo menu."""
    dishes = [
        Dish(
            id=dish_id,
            name=name,
            category=category,
            unit_price=parse_money(price),
            unit_cost=parse_money(cost),
            unit_tax=parse_money(tax),
        )
        for dish_id, name, category, price, cost, tax in _DEMO_MENU
    ]
    return Catalog.from_dishes(dishes)


def demo_popularity() -> dict[str, float]:
    """Zipf weights over the demo menu in its listed popularity order."""
    return {
        entry[0]: 1.0 / rank for rank, entry in enumerate(_DEMO_MENU, start=1)
    }


def demo_rules() -> tuple[Rule, ...]:
    """Planted correlations for demos and acceptance runs."""
    return (
        Rule(frozenset({"burger"}), "cola", 0.8),
        Rule(frozenset({"burger", "cola"}), "fries", 0.7),
        Rule(frozenset({"pie"}), "coffee", 0.9),
    )
