from datetime import timedelta

import pytest

from cartrec.classifier import FitConfig
from cartrec.corpus import (
    GeneratorSpec,
    demo_catalog,
    demo_popularity,
    demo_rules,
    generate_orders,
)
from cartrec.domain import Catalog, Dish, parse_money, parse_ts
from cartrec.embedder import TrainConfig
from cartrec.recommender import BundleConfig, train_bundle
from cartrec.text import NgramConfig

GEN_END = parse_ts("2026-01-01T00:00:00Z")

TINY_BUNDLE_CFG = BundleConfig(
    dim=12,
    k=6,
    hidden=(16, 8),
    seed=5,
    ngram=NgramConfig(3, 4, 2048),
    embedder=TrainConfig(epochs=1),
    classifier=FitConfig(epochs=3),
)


def tiny_log(n_orders: int = 400, seed: int = 3, days: int = 30):
    """Small planted-rule order log ending at the fixed generation anchor."""
    return generate_orders(
        GeneratorSpec(
            menu=demo_catalog(),
            n_orders=n_orders,
            seed=seed,
            popularity=demo_popularity(),
            rules=demo_rules(),
            rec_flag_rate=0.7,
            date_range=(GEN_END - timedelta(days=days), GEN_END),
        )
    )


def tiny_bundle(log=None, config: BundleConfig = TINY_BUNDLE_CFG):
    """Fast functional bundle for service/CLI plumbing tests."""
    log = log if log is not None else tiny_log()
    anchor = log.orders[-1].ts + timedelta(seconds=1)
    embed_window = (anchor - timedelta(days=90), anchor)
    clf_window = (anchor - timedelta(days=14), anchor)
    return train_bundle(
        log.window(*embed_window), log.window(*clf_window), config,
        embed_window, clf_window,
    )


def make_dish(
    dish_id: str,
    name: str | None = None,
    category: tuple[str, str, str] = ("food", "misc", "plain"),
    price: str = "3.00",
    cost: str = "1.00",
    tax: str = "0.30",
) -> Dish:
    return Dish(
        id=dish_id,
        name=name if name is not None else dish_id,
        category=category,
        unit_price=parse_money(price),
        unit_cost=parse_money(cost),
        unit_tax=parse_money(tax),
    )


@pytest.fixture
def small_catalog() -> Catalog:
    return Catalog.from_dishes(
        [
            make_dish("burger", "hamburger", ("burgers", "beef", "classic"), "3.50", "1.20", "0.35"),
            make_dish("cola", "cola", ("drinks", "cold", "soda"), "1.80", "0.30", "0.18"),
            make_dish("fries", "french fries", ("sides", "fried", "potato"), "2.20", "0.50", "0.22"),
            make_dish("cheeseburger", "cheeseburger", ("burgers", "beef", "cheese"), "4.20", "1.50", "0.42"),
            make_dish("pie", "cherry pie", ("desserts", "baked", "pie"), "2.50", "0.80", "0.25"),
            make_dish("coffee", "coffee", ("drinks", "hot", "coffee"), "2.00", "0.35", "0.20"),
        ]
    )
