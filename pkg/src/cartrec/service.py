"""HTTP recommendation service: slate serving, order intake, and nightly
sliding-window retraining with atomic model swap.

The served bundle lives in a single slot holding an immutable
(bundle, version) pair; a swap replaces the pair in one reference assignment,
so every request is answered by exactly one complete model and versions only
ever grow.  Retraining failures are logged and swallowed: a kiosk must keep
its slate, freshness comes second.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, replace
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import anyio.to_thread
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import corpus as corpus_mod
from .classifier import FitConfig
from .domain import Catalog, catalog_to_json, load_catalog, validate_order
from .embedder import TrainConfig
from .recommender import (
    BundleConfig,
    ModelBundle,
    load_bundle,
    recommend,
    save_bundle,
    train_bundle,
)

__all__ = [
    "ServiceConfig",
    "ModelSlot",
    "ServiceState",
    "DuplicateOrder",
    "create_app",
    "retrain_tick",
    "run_server",
]

logger = logging.getLogger(__name__)


class DuplicateOrder(ValueError):
    def __init__(self, order_id: str):
        self.order_id = order_id
        super().__init__(f"duplicate order_id: {order_id!r}")


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8080"
    model_dir: str | None = None
    bundles_dir: str = "bundles"
    catalog_path: str = "catalog.json"
    orders_log_path: str = "orders.jsonl"
    retrain_at: str = "03:00"
    embedding_window_days: int = 90
    classifier_window_days: int = 14
    dim: int = 100
    k: int = 20
    epochs: int = 10
    slate_size: int = 4
    exclude_in_cart: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.embedding_window_days < 1 or self.classifier_window_days < 1:
            raise ValueError("window days must be >= 1")
        if self.classifier_window_days > self.embedding_window_days:
            raise ValueError("classifier window must not exceed embedding window")
        _parse_clock(self.retrain_at)

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        cfg = cls(**raw)
        if overrides:
            cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
        cfg.validate()
        return cfg

    def bundle_config(self) -> BundleConfig:
        return BundleConfig(
            dim=self.dim,
            k=self.k,
            slate_size=self.slate_size,
            exclude_in_cart=self.exclude_in_cart,
            seed=self.seed,
            embedder=TrainConfig(),
            classifier=FitConfig(epochs=self.epochs),
        )


def _parse_clock(text: str) -> time:
    hh, mm = text.split(":")
    return time(hour=int(hh), minute=int(mm))


class ModelSlot:
    """Atomically swappable reference to the served bundle."""

    def __init__(self) -> None:
        self._current: tuple[ModelBundle | None, int] = (None, 0)
        self._lock = threading.Lock()

    def get(self) -> tuple[ModelBundle | None, int]:
        return self._current

    def swap(self, bundle: ModelBundle) -> int:
        with self._lock:
            version = self._current[1] + 1
            self._current = (bundle, version)
        return version


class ServiceState:
    """Everything one running service shares across requests."""

    def __init__(self, config: ServiceConfig, catalog: Catalog):
        self.config = config
        self.catalog = catalog
        self.slot = ModelSlot()
        self.counters: dict[str, int] = {}
        self._counter_lock = threading.Lock()
        self._log_lock = threading.Lock()
        self._known_order_ids: set[str] = set()
        self.last_retrain_attempt: date | None = None
        self._scan_existing_orders()

    def _scan_existing_orders(self) -> None:
        path = Path(self.config.orders_log_path)
        if not path.exists():
            return
        log = corpus_mod.load_orders(path, tolerate_torn_tail=True)
        self._known_order_ids.update(o.order_id for o in log.orders)

    def bump(self, counter: str) -> None:
        with self._counter_lock:
            self.counters[counter] = self.counters.get(counter, 0) + 1

    def snapshot_counters(self) -> list[tuple[str, int]]:
        with self._counter_lock:
            return sorted(self.counters.items())

    def record_order(self, order) -> None:
        """Append one valid order durably; duplicates are rejected."""
        with self._log_lock:
            if order.order_id in self._known_order_ids:
                raise DuplicateOrder(order.order_id)
            corpus_mod.append_order(order, self.config.orders_log_path)
            self._known_order_ids.add(order.order_id)


def retrain_tick(now: datetime, state: ServiceState) -> ModelBundle | None:
    """Run the nightly retrain when ``now`` has crossed retrain_at.

    Trains the vectorizer on the trailing embedding window and the classifier
    on the trailing fortnight-style window, writes a fresh versioned bundle
    directory, and swaps it in.  One attempt per day; on any failure the
    previous bundle keeps serving.
    """
    cfg = state.config
    due_time = _parse_clock(cfg.retrain_at)
    if now.time() < due_time:
        return None
    if state.last_retrain_attempt == now.date():
        return None
    state.last_retrain_attempt = now.date()
    try:
        now_utc = (
            now.astimezone(timezone.utc)
            if now.tzinfo is not None
            else now.replace(tzinfo=timezone.utc)
        )
        log = corpus_mod.load_orders(cfg.orders_log_path, tolerate_torn_tail=True)
        embed_window = (now_utc - timedelta(days=cfg.embedding_window_days), now_utc)
        clf_window = (now_utc - timedelta(days=cfg.classifier_window_days), now_utc)
        bundle = train_bundle(
            log.window(*embed_window),
            log.window(*clf_window),
            config=cfg.bundle_config(),
            embedding_window=embed_window,
            classifier_window=clf_window,
            created_at=now_utc,
        )
        _, current_version = state.slot.get()
        target = Path(cfg.bundles_dir) / f"v{current_version + 1:04d}-{now_utc:%Y%m%dT%H%M%SZ}"
        save_bundle(bundle, target)
        loaded = load_bundle(target)  # serve exactly what landed on disk
        state.slot.swap(loaded)
        state.bump("retrains_succeeded")
        logger.info("retrained and swapped in %s", target)
        return loaded
    except Exception:
        state.bump("retrains_failed")
        logger.exception("retrain failed; previous bundle keeps serving")
        return None


def _parse_cart_payload(body: object) -> list[tuple[str | None, str, int]]:
    if not isinstance(body, dict) or "cart" not in body:
        raise ValueError('payload must be an object with a "cart" list')
    raw = body["cart"]
    if not isinstance(raw, list):
        raise ValueError('"cart" must be a list')
    cart: list[tuple[str | None, str, int]] = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ValueError(f"cart[{i}] must be an object")
        name = entry.get("name")
        qty = entry.get("qty")
        dish_id = entry.get("dish_id")
        if not isinstance(name, str) or not name:
            raise ValueError(f"cart[{i}].name must be a non-empty string")
        if not isinstance(qty, int) or isinstance(qty, bool) or qty < 1:
            raise ValueError(f"cart[{i}].qty must be a positive integer")
        if dish_id is not None and not isinstance(dish_id, str):
            raise ValueError(f"cart[{i}].dish_id must be a string when present")
        cart.append((dish_id, name, qty))
    return cart


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="cartrec", docs_url=None, redoc_url=None)

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status)

    @app.post("/v1/recommend")
    async def handle_recommend(request: Request):
        state.bump("recommend_requests")
        try:
            body = await request.json()
        except Exception:
            return error(400, "body is not valid JSON")
        try:
            cart = _parse_cart_payload(body)
        except ValueError as exc:
            return error(400, str(exc))
        bundle, version = state.slot.get()
        if bundle is None:
            return error(503, "no model loaded")
        # model math runs in the worker pool so slow bursts cannot
        # head-of-line-block the event loop
        slate = await anyio.to_thread.run_sync(recommend, bundle, cart, state.catalog)
        return {
            "model_version": version,
            "items": [
                {"dish_id": item.dish_id, "name": item.name, "score": item.score}
                for item in slate.items
            ],
        }

    @app.post("/v1/orders")
    async def handle_order_submit(request: Request):
        state.bump("order_submissions")
        try:
            body = await request.json()
        except Exception:
            return error(400, "body is not valid JSON")
        try:
            order = validate_order(corpus_mod.order_from_json(body))
        except Exception as exc:
            return error(400, f"invalid order: {exc}")
        try:
            # the fsynced append serializes on a lock; keep it off the loop
            await anyio.to_thread.run_sync(state.record_order, order)
        except DuplicateOrder as exc:
            return error(409, str(exc))
        return JSONResponse({"status": "accepted"}, status_code=201)

    @app.get("/v1/menu")
    async def handle_menu():
        return catalog_to_json(state.catalog)

    @app.get("/v1/health")
    async def handle_health():
        return {"status": "ok"}

    @app.get("/v1/model/info")
    async def handle_model_info():
        bundle, version = state.slot.get()
        if bundle is None:
            return error(503, "no model loaded")
        from .recommender import _manifest_to_json

        info = _manifest_to_json(bundle.manifest)
        info["slot_version"] = version
        return info

    @app.get("/v1/metrics")
    async def handle_metrics():
        lines = [f"{name} {value}" for name, value in state.snapshot_counters()]
        return PlainTextResponse("\n".join(lines) + "\n")

    return app


def _scheduler_loop(state: ServiceState, stop: threading.Event, interval: float) -> None:
    while not stop.wait(interval):
        retrain_tick(datetime.now(), state)


def run_server(config: ServiceConfig) -> None:
    """Blocking entry point: load state, start the retrain scheduler, serve."""
    import uvicorn

    config.validate()
    catalog = load_catalog(config.catalog_path)
    state = ServiceState(config, catalog)
    if config.model_dir:
        state.slot.swap(load_bundle(config.model_dir))
        logger.info("serving initial bundle from %s", config.model_dir)
    else:
        logger.warning("no initial bundle; /v1/recommend returns 503 until a retrain")

    stop = threading.Event()
    scheduler = threading.Thread(
        target=_scheduler_loop, args=(state, stop, 30.0), daemon=True
    )
    scheduler.start()

    host, _, port = config.listen.partition(":")
    try:
        uvicorn.run(create_app(state), host=host, port=int(port or "8080"), log_level="warning")
    finally:
        stop.set()
