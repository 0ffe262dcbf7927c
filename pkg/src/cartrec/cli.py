"""One binary for the full lifecycle: gen, train, eval, compare, serve,
recommend.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Every subcommand is
reproducible under a fixed --seed.
"""

from __future__ import annotations

import argparse
import functools
import json
import sys
from datetime import timedelta
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from . import recommender as rec_mod
from .classifier import FitConfig
from .domain import Catalog, load_catalog, parse_ts, save_catalog
from .embedder import TrainConfig
from .service import ServiceConfig, run_server

__all__ = ["main", "build_parser"]

# Fixed generation anchor: generated logs must not depend on the wall clock,
# otherwise identical seeds could not produce identical files.
DEFAULT_GEN_END = "2026-01-01T00:00:00Z"


class _UsageExit(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cartrec",
        description="Shopping-cart recommender: data generation, training, "
        "evaluation, serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    gen = sub.add_parser("gen", help="generate a synthetic order log", formatter_class=fmt)
    gen.add_argument("--catalog", required=True, help="catalog JSON; written with the built-in demo menu if missing")
    gen.add_argument("--orders", type=int, default=10000, help="number of orders")
    gen.add_argument("--seed", type=int, default=0, help="generator seed")
    gen.add_argument("--days", type=int, default=120, help=f"span of days ending at {DEFAULT_GEN_END}")
    gen.add_argument("--out", required=True, help="output JSONL order log (.gz supported)")
    gen.add_argument(
        "--rules",
        default="demo",
        help="planted rules: 'demo' for the built-in set, 'none', or a JSON file path",
    )

    train = sub.add_parser("train", help="train a model bundle", formatter_class=fmt)
    train.add_argument("--orders", required=True, help="order log JSONL")
    train.add_argument("--catalog", required=True, help="catalog JSON")
    train.add_argument("--out", required=True, help="bundle output directory (must not exist)")
    train.add_argument("--embed-days", type=int, default=90, help="vectorizer window, days")
    train.add_argument("--clf-days", type=int, default=14, help="classifier window, days")
    train.add_argument("--dim", type=int, default=100, help="embedding dimension")
    train.add_argument("--k", type=int, default=20, help="label-set size (classifier classes)")
    train.add_argument("--epochs", type=int, default=10, help="classifier epochs")
    train.add_argument("--seed", type=int, default=0, help="training seed")

    ev = sub.add_parser("eval", help="evaluate a bundle offline", formatter_class=fmt)
    ev.add_argument("--model", required=True, help="bundle directory")
    ev.add_argument("--orders", required=True, help="evaluation order log JSONL")
    ev.add_argument("--catalog", required=True, help="catalog JSON")
    ev.add_argument("--report", required=True, help="output report JSON path")

    comp = sub.add_parser(
        "compare", help="evaluate model vs rule baseline side by side", formatter_class=fmt
    )
    comp.add_argument("--model", required=True, help="bundle directory")
    comp.add_argument("--orders", required=True, help="evaluation order log JSONL")
    comp.add_argument("--catalog", required=True, help="catalog JSON")
    comp.add_argument("--report", default=None, help="optional output report JSON (model side)")
    comp.add_argument(
        "--rules",
        default="default",
        help="baseline rules JSON file, or 'default' for burger-chain house rules",
    )

    serve = sub.add_parser("serve", help="run the HTTP service", formatter_class=fmt)
    serve.add_argument("--config", default=None, help="service config JSON file")
    serve.add_argument("--listen", default=None, help="host:port")
    serve.add_argument("--model", dest="model_dir", default=None, help="initial bundle directory")
    serve.add_argument("--catalog", dest="catalog_path", default=None, help="catalog JSON")
    serve.add_argument("--orders-log", dest="orders_log_path", default=None, help="order intake JSONL path")
    serve.add_argument("--bundles-dir", dest="bundles_dir", default=None, help="directory for retrained bundles")
    serve.add_argument("--retrain-at", dest="retrain_at", default=None, help="daily retrain wall-clock time HH:MM")
    serve.add_argument("--embed-days", dest="embedding_window_days", type=int, default=None, help="vectorizer window, days")
    serve.add_argument("--clf-days", dest="classifier_window_days", type=int, default=None, help="classifier window, days")
    serve.add_argument("--k", type=int, default=None, help="label-set size")
    serve.add_argument("--seed", type=int, default=None, help="retraining seed")

    rec = sub.add_parser("recommend", help="one-shot slate for an inline cart", formatter_class=fmt)
    rec.add_argument("--model", required=True, help="bundle directory")
    rec.add_argument("--catalog", required=True, help="catalog JSON")
    rec.add_argument(
        "--cart",
        required=True,
        help='inline JSON: [{"dish_id"?, "name", "qty"}, ...]',
    )

    return parser


class RuntimeFailure(Exception):
    """Raised by subcommands for expected runtime failures (exit code 2)."""


def _load_catalog_or_demo(path: str) -> Catalog:
    p = Path(path)
    if p.exists():
        return load_catalog(p)
    catalog = corpus_mod.demo_catalog()
    p.parent.mkdir(parents=True, exist_ok=True)
    save_catalog(catalog, p)
    print(f"catalog {path} not found; wrote the built-in demo menu there")
    return catalog


def _parse_gen_rules(arg: str, catalog: Catalog) -> tuple[tuple[corpus_mod.Rule, ...], float]:
    if arg == "none":
        return (), 0.7
    if arg == "demo":
        return corpus_mod.demo_rules(), 0.7
    with open(arg, encoding="utf-8") as fh:
        raw = json.load(fh)
    rules = tuple(
        corpus_mod.Rule(
            trigger=frozenset(entry["trigger"]),
            consequent=entry["consequent"],
            probability=float(entry["probability"]),
        )
        for entry in raw.get("rules", [])
    )
    return rules, float(raw.get("rec_flag_rate", 0.7))


def _cmd_gen(args: argparse.Namespace) -> int:
    catalog = _load_catalog_or_demo(args.catalog)
    rules, rec_flag_rate = _parse_gen_rules(args.rules, catalog)
    # Zipf weights over the catalog's listed order; the demo menu is listed
    # most-popular first, so this reproduces its designed skew.
    popularity = {d.id: 1.0 / rank for rank, d in enumerate(catalog, start=1)}
    end = parse_ts(DEFAULT_GEN_END)
    spec = corpus_mod.GeneratorSpec(
        menu=catalog,
        n_orders=args.orders,
        seed=args.seed,
        popularity=popularity,
        rules=rules,
        rec_flag_rate=rec_flag_rate,
        date_range=(end - timedelta(days=args.days), end),
    )
    log = corpus_mod.generate_orders(spec)
    corpus_mod.save_orders(log, args.out)
    print(f"wrote {len(log)} orders to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    log = corpus_mod.load_orders(args.orders)
    if not log.orders:
        raise RuntimeFailure(f"no orders in {args.orders}")
    load_catalog(args.catalog)  # fail fast on a broken catalog path
    anchor = log.orders[-1].ts + timedelta(seconds=1)
    embed_window = (anchor - timedelta(days=args.embed_days), anchor)
    clf_window = (anchor - timedelta(days=args.clf_days), anchor)
    config = rec_mod.BundleConfig(
        dim=args.dim,
        k=args.k,
        seed=args.seed,
        embedder=TrainConfig(),
        classifier=FitConfig(epochs=args.epochs),
    )
    bundle = rec_mod.train_bundle(
        log.window(*embed_window),
        log.window(*clf_window),
        config=config,
        embedding_window=embed_window,
        classifier_window=clf_window,
    )
    rec_mod.save_bundle(bundle, args.out)
    curves = bundle.training_curves or {}
    final = curves.get("train", [None])[-1]
    summary = f"trained bundle {bundle.manifest.version}: K={bundle.manifest.k}, dim={bundle.embedding.dim}"
    if final is not None:
        summary += f", final train loss={final:.4f}"
    print(summary)
    print(f"saved to {args.out}")
    return 0


def _evaluate_bundle(args: argparse.Namespace):
    bundle = rec_mod.load_bundle(args.model)
    catalog = load_catalog(args.catalog)
    log = corpus_mod.load_orders(args.orders)
    cases = eval_mod.build_eval_cases(log)
    recommend_fn = functools.partial(rec_mod.recommend, bundle, catalog=catalog)
    report = eval_mod.evaluate(
        recommend_fn, cases, log, catalog, model_version=bundle.manifest.version
    )
    return bundle, catalog, log, cases, report


def _format_metric(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _cmd_eval(args: argparse.Namespace) -> int:
    _, _, _, _, report = _evaluate_bundle(args)
    eval_mod.write_report(report, args.report)
    maps = report.map_at or {}
    print(f"cases: {report.n_cases}   orders: {report.o_a}")
    for k in (1, 2, 3, 4):
        print(f"MAP@{k}: {_format_metric(maps.get(k))}")
    print(f"rec_percent: {_format_metric(report.rec_percent)}")
    print(f"gross_margin_percent: {_format_metric(report.gross_margin_percent)}")
    print(f"report written to {args.report}")
    return 0


def _load_baseline(arg: str, catalog: Catalog, log) -> eval_mod.RuleBaseline:
    if arg == "default":
        return eval_mod.default_baseline(catalog, log)
    with open(arg, encoding="utf-8") as fh:
        raw = json.load(fh)
    rules = tuple(
        eval_mod.BaselineRule(
            require_categories=tuple(entry["require_categories"]),
            recommend=entry["recommend"],
        )
        for entry in raw.get("rules", [])
    )
    popularity = tuple(corpus_mod.top_k_dishes(log, len(catalog) or 1))
    return eval_mod.RuleBaseline(rules=rules, popularity=popularity)


def _cmd_compare(args: argparse.Namespace) -> int:
    bundle, catalog, log, cases, model_report = _evaluate_bundle(args)
    baseline = _load_baseline(args.rules, catalog, log)
    baseline_fn = functools.partial(eval_mod.baseline_recommend, baseline, catalog=catalog)
    baseline_report = eval_mod.evaluate(
        baseline_fn, cases, log, catalog, model_version="rule-baseline"
    )
    if args.report:
        eval_mod.write_report(model_report, args.report)

    rows = [("model", model_report), ("baseline", baseline_report)]
    header = f"{'name':<10}{'MAP@1':>8}{'MAP@2':>8}{'MAP@3':>8}{'MAP@4':>8}{'rec%':>8}"
    print(header)
    print("-" * len(header))
    for name, report in rows:
        maps = report.map_at or {}
        cells = "".join(f"{_format_metric(maps.get(k)):>8}" for k in (1, 2, 3, 4))
        print(f"{name:<10}{cells}{_format_metric(report.rec_percent):>8}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    overrides = {
        key: getattr(args, key)
        for key in (
            "listen",
            "model_dir",
            "catalog_path",
            "orders_log_path",
            "bundles_dir",
            "retrain_at",
            "embedding_window_days",
            "classifier_window_days",
            "k",
            "seed",
        )
    }
    if args.config:
        config = ServiceConfig.from_file(args.config, overrides)
    else:
        config = ServiceConfig(**{k: v for k, v in overrides.items() if v is not None})
        config.validate()
    run_server(config)
    return 0


def _cmd_recommend(args: argparse.Namespace) -> int:
    bundle = rec_mod.load_bundle(args.model)
    catalog = load_catalog(args.catalog)
    try:
        raw = json.loads(args.cart)
    except json.JSONDecodeError as exc:
        raise RuntimeFailure(f"--cart is not valid JSON: {exc}") from exc
    if isinstance(raw, dict):
        raw = raw.get("cart", [])
    cart = [
        (entry.get("dish_id"), entry["name"], int(entry.get("qty", 1))) for entry in raw
    ]
    slate = rec_mod.recommend(bundle, cart, catalog)
    print(
        json.dumps(
            {
                "model_version": bundle.manifest.version,
                "items": [
                    {"dish_id": i.dish_id, "name": i.name, "score": i.score}
                    for i in slate.items
                ],
            },
            indent=2,
        )
    )
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "serve": _cmd_serve,
    "recommend": _cmd_recommend,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit:
        return 1
    try:
        return _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return 130
    except (RuntimeFailure, OSError, ValueError, KeyError) as exc:
        print(f"cartrec {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
