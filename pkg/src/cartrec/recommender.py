"""End-to-end pipeline: label-set selection, leave-one-out training samples,
bundle training, and cart -> top-4 slate inference.

A bundle pairs the vectorizer with the classifier plus a manifest; bundles
are written to a directory (manifest.json + embeddings.bin + classifier.bin)
atomically via a temp-dir rename so a crashed writer never leaves a loadable
half-model behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classifier as clf_mod
from . import embedder as emb_mod
from .catalog_match import nearest_dish
from .classifier import ClassifierModel, FitConfig, TrainSample
from .corpus import OrderLog, top_k_dishes
from .domain import Catalog, format_ts, parse_ts
from .embedder import EmbeddingModel, EmptyCart, TrainConfig
from .text import NgramConfig, normalize

__all__ = [
    "BundleConfig",
    "Manifest",
    "ModelBundle",
    "Slate",
    "SlateItem",
    "CartLine",
    "build_training_samples",
    "train_bundle",
    "recommend",
    "save_bundle",
    "load_bundle",
    "validate_bundle",
]

MANIFEST_FORMAT_VERSION = 1

# (dish_id or None, display name, qty)
CartLine = tuple[str | None, str, int]


@dataclass(frozen=True)
class BundleConfig:
    dim: int = 100
    k: int = 20
    hidden: tuple[int, int] = (128, 64)
    slate_size: int = 4
    exclude_in_cart: bool = True
    seed: int = 0
    min_count: int = 1
    ngram: NgramConfig = NgramConfig()
    embedder: TrainConfig = TrainConfig()
    classifier: FitConfig = FitConfig()


@dataclass(frozen=True)
class Manifest:
    format_version: int
    version: str
    created_at: datetime
    embedding_window: tuple[datetime, datetime]
    classifier_window: tuple[datetime, datetime]
    k: int
    slate_size: int
    exclude_in_cart: bool
    seed: int
    config: dict
    label_names: dict[str, str]


@dataclass(frozen=True)
class SlateItem:
    dish_id: str
    name: str
    score: float


@dataclass(frozen=True)
class Slate:
    items: tuple[SlateItem, ...]

    def dish_ids(self) -> list[str]:
        return [item.dish_id for item in self.items]


@dataclass(frozen=True, eq=False)
class ModelBundle:
    embedding: EmbeddingModel
    classifier: ClassifierModel
    manifest: Manifest
    training_curves: dict | None = None  # in-memory only, not serialized


def build_training_samples(
    log: OrderLog, label_set: Sequence[str], embedding: EmbeddingModel
) -> list[TrainSample]:
    """Leave-one-out samples: for every label-set dish in an order, the cart
    minus one unit of it predicts that dish.

    Orders whose remainder would be empty (a single purchased unit)
    contribute nothing; a single line of qty 2 yields one sample whose input
    is the same dish at qty 1.
    """
    if not label_set:
        raise ValueError("label_set must be non-empty")
    class_of = {dish_id: i for i, dish_id in enumerate(label_set)}
    samples: list[TrainSample] = []
    for order in log.orders:
        if sum(line.qty for line in order.lines) < 2:
            continue
        for line in order.lines:
            target = class_of.get(line.dish_id)
            if target is None:
                continue
            remainder = [
                (other.name, other.qty - (1 if other is line else 0))
                for other in order.lines
            ]
            remainder = [(name, qty) for name, qty in remainder if qty > 0]
            if not remainder:
                continue
            try:
                vec = emb_mod.cart_vector(embedding, remainder)
            except EmptyCart:
                continue
            samples.append(TrainSample(input=vec, target=target))
    return samples


def _label_display_names(log: OrderLog, label_set: Sequence[str]) -> dict[str, str]:
    """Most frequent recorded name per label dish (ties alphabetic)."""
    counts: dict[str, dict[str, int]] = {d: {} for d in label_set}
    for order in log.orders:
        for line in order.lines:
            if line.dish_id in counts:
                per = counts[line.dish_id]
                per[line.name] = per.get(line.name, 0) + 1
    names: dict[str, str] = {}
    for dish_id in label_set:
        per = counts[dish_id]
        if per:
            names[dish_id] = min(per, key=lambda n: (-per[n], n))
        else:
            names[dish_id] = dish_id
    return names


def train_bundle(
    log_vectorizer_window: OrderLog,
    log_classifier_window: OrderLog,
    config: BundleConfig | None = None,
    embedding_window: tuple[datetime, datetime] | None = None,
    classifier_window: tuple[datetime, datetime] | None = None,
    created_at: datetime | None = None,
) -> ModelBundle:
    """Train vectorizer and classifier and assemble the validated bundle.

    The vectorizer trains unsupervised on the long window; the label set is
    the short window's top-K dishes and the classifier fits its leave-one-out
    samples.  ``created_at`` defaults to the short window's last order
    timestamp so identical inputs produce identical bundle bytes.
    """
    cfg = config or BundleConfig()
    if not log_vectorizer_window.orders:
        raise emb_mod.EmptyCorpus("vectorizer window contains no orders")
    if not log_classifier_window.orders:
        raise clf_mod.TooFewSamples("classifier window contains no orders")

    corpus = emb_mod.build_corpus(log_vectorizer_window)
    embedding = emb_mod.train_embedder(
        corpus,
        ngram_config=cfg.ngram,
        train_config=replace(cfg.embedder, seed=cfg.seed),
        dim=cfg.dim,
        min_count=cfg.min_count,
    )

    label_set = top_k_dishes(log_classifier_window, cfg.k)
    samples = build_training_samples(log_classifier_window, label_set, embedding)
    k = len(label_set)
    model, curves = clf_mod.fit(
        samples,
        dims=[cfg.dim, cfg.hidden[0], cfg.hidden[1], k],
        config=replace(cfg.classifier, seed=cfg.seed + 1),
        label_map=label_set,
    )

    if embedding_window is None:
        embedding_window = _span_window(log_vectorizer_window)
    if classifier_window is None:
        classifier_window = _span_window(log_classifier_window)
    if created_at is None:
        created_at = log_classifier_window.orders[-1].ts

    manifest = Manifest(
        format_version=MANIFEST_FORMAT_VERSION,
        version=f"{created_at:%Y%m%dT%H%M%SZ}-k{k}-s{cfg.seed}",
        created_at=created_at,
        embedding_window=embedding_window,
        classifier_window=classifier_window,
        k=k,
        slate_size=cfg.slate_size,
        exclude_in_cart=cfg.exclude_in_cart,
        seed=cfg.seed,
        config=_config_snapshot(cfg),
        label_names=_label_display_names(log_classifier_window, label_set),
    )
    bundle = ModelBundle(
        embedding=emb_mod.with_metadata(embedding, created_at, embedding_window),
        classifier=replace(model, trained_at=created_at, train_window=classifier_window),
        manifest=manifest,
        training_curves=curves,
    )
    validate_bundle(bundle)
    return bundle


def _span_window(log: OrderLog) -> tuple[datetime, datetime]:
    first, last = log.span()
    return first, last + timedelta(seconds=1)


def _config_snapshot(cfg: BundleConfig) -> dict:
    snapshot = asdict(cfg)
    snapshot["hidden"] = list(cfg.hidden)
    return snapshot


def validate_bundle(bundle: ModelBundle) -> None:
    """Reject structurally broken bundles before they can serve."""
    emb, clf, manifest = bundle.embedding, bundle.classifier, bundle.manifest
    if emb.dim < 2:
        raise ValueError(f"embedding dim must be >= 2, got {emb.dim}")
    if clf.dims[0] != emb.dim:
        raise ValueError(f"classifier d_in {clf.dims[0]} != embedding dim {emb.dim}")
    if len(clf.label_map) != manifest.k:
        raise ValueError(f"label map size {len(clf.label_map)} != manifest k {manifest.k}")
    if len(set(clf.label_map)) != len(clf.label_map):
        raise ValueError("label map contains duplicate dish ids")
    if not np.all(np.isfinite(emb.input_matrix)):
        raise ValueError("embedding matrix contains non-finite values")
    for arr in (*clf.weights, *clf.biases):
        if not np.all(np.isfinite(arr)):
            raise ValueError("classifier parameters contain non-finite values")


def recommend(bundle: ModelBundle, cart: Sequence[CartLine], catalog: Catalog) -> Slate:
    """Slate of up to slate_size dishes for the cart.

    OOV names vectorize through subwords so lookup never fails; dishes
    already in the cart are skipped when exclusion is on, backfilling from
    the next-ranked classes; label ids missing from the serving catalog are
    resolved to their nearest catalog dish by name.  An empty cart degrades
    to the most popular label dishes instead of failing.
    """
    try:
        vec = emb_mod.cart_vector(bundle.embedding, [(name, qty) for _, name, qty in cart])
    except EmptyCart:
        return _popularity_slate(bundle, cart, catalog)
    ranked = clf_mod.top_k(bundle.classifier, vec, bundle.classifier.n_classes)
    ordered = [bundle.classifier.label_map[idx] for idx, _ in ranked]
    label_score = {bundle.classifier.label_map[idx]: score for idx, score in ranked}
    return _assemble_slate(bundle, ordered, label_score, cart, catalog)


def _popularity_slate(
    bundle: ModelBundle, cart: Sequence[CartLine], catalog: Catalog
) -> Slate:
    """Cold-start slate: label dishes in popularity (label-map) order."""
    ordered = list(bundle.classifier.label_map)
    scores = {d: 1.0 / (i + 1) for i, d in enumerate(ordered)}
    return _assemble_slate(bundle, ordered, scores, cart, catalog)


def _assemble_slate(
    bundle: ModelBundle,
    ordered_dish_ids: list[str],
    scores: dict[str, float],
    cart: Sequence[CartLine],
    catalog: Catalog,
) -> Slate:
    manifest = bundle.manifest
    cart_ids = {dish_id for dish_id, _, _ in cart if dish_id}
    cart_names = {" ".join(normalize(name)) for _, name, _ in cart}
    items: list[SlateItem] = []
    taken: set[str] = set()
    for dish_id in ordered_dish_ids:
        if len(items) >= manifest.slate_size:
            break
        display = catalog.get(dish_id)
        if display is None:
            query = manifest.label_names.get(dish_id, dish_id)
            try:
                display = catalog[nearest_dish(query, catalog).dish_id]
            except Exception:
                continue
        if display.id in taken:
            continue
        if manifest.exclude_in_cart and (
            display.id in cart_ids
            or dish_id in cart_ids
            or " ".join(normalize(display.name)) in cart_names
        ):
            continue
        items.append(SlateItem(display.id, display.name, scores.get(dish_id, 0.0)))
        taken.add(display.id)
    return Slate(items=tuple(items))


def _manifest_to_json(manifest: Manifest) -> dict:
    return {
        "format_version": manifest.format_version,
        "version": manifest.version,
        "created_at": format_ts(manifest.created_at),
        "embedding_window": [format_ts(t) for t in manifest.embedding_window],
        "classifier_window": [format_ts(t) for t in manifest.classifier_window],
        "k": manifest.k,
        "slate_size": manifest.slate_size,
        "exclude_in_cart": manifest.exclude_in_cart,
        "seed": manifest.seed,
        "config": manifest.config,
        "label_names": manifest.label_names,
    }


def _manifest_from_json(obj: dict) -> Manifest:
    return Manifest(
        format_version=obj["format_version"],
        version=obj["version"],
        created_at=parse_ts(obj["created_at"]),
        embedding_window=tuple(parse_ts(t) for t in obj["embedding_window"]),
        classifier_window=tuple(parse_ts(t) for t in obj["classifier_window"]),
        k=obj["k"],
        slate_size=obj["slate_size"],
        exclude_in_cart=obj["exclude_in_cart"],
        seed=obj["seed"],
        config=obj["config"],
        label_names=obj["label_names"],
    )


def save_bundle(bundle: ModelBundle, directory: str | Path) -> None:
    """Write manifest.json, embeddings.bin, classifier.bin atomically.

    Content goes to a temp sibling directory first and is renamed into
    place; the target must not already exist.
    """
    directory = Path(directory)
    if directory.exists():
        raise FileExistsError(f"bundle directory already exists: {directory}")
    directory.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(
        tempfile.mkdtemp(prefix=f".{directory.name}.tmp-", dir=directory.parent)
    )
    try:
        emb_mod.save_embeddings(bundle.embedding, tmp / "embeddings.bin")
        clf_mod.save_classifier(bundle.classifier, tmp / "classifier.bin")
        with open(tmp / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(_manifest_to_json(bundle.manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.rename(tmp, directory)
    except BaseException:
        import shutil

        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_bundle(directory: str | Path) -> ModelBundle:
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = _manifest_from_json(json.load(fh))
    embedding = emb_mod.load_embeddings(directory / "embeddings.bin")
    embedding = emb_mod.with_metadata(
        embedding, manifest.created_at, manifest.embedding_window
    )
    classifier = clf_mod.load_classifier(directory / "classifier.bin")
    classifier = replace(
        classifier,
        trained_at=manifest.created_at,
        train_window=manifest.classifier_window,
    )
    bundle = ModelBundle(embedding=embedding, classifier=classifier, manifest=manifest)
    validate_bundle(bundle)
    return bundle
