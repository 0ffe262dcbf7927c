"""Shopping-cart recommender for fast-food kiosks.

A subword embedding vectorizer turns the cart into a fixed-dimension vector,
a three-layer classifier ranks the menu's top dishes, and the serving layer
answers cart -> top-4 slate requests with nightly sliding-window retraining.
"""

from .catalog_match import MatchResult, levenshtein, nearest_dish, normalized_levenshtein
from .classifier import ClassifierModel, FitConfig, TrainSample, fit, forward, top_k
from .corpus import (
    GeneratorSpec,
    OrderLog,
    Rule,
    generate_orders,
    load_orders,
    save_orders,
    top_k_dishes,
)
from .domain import (
    Catalog,
    Dish,
    Money,
    Order,
    OrderLine,
    gross_margin,
    order_gross_margin,
    validate_order,
)
from .embedder import (
    EmbeddingModel,
    TrainConfig,
    build_corpus,
    cart_vector,
    name_vector,
    train_embedder,
    word_vector,
)
from .evaluation import (
    EvalCase,
    EvalReport,
    RuleBaseline,
    average_precision_at_k,
    baseline_recommend,
    build_eval_cases,
    evaluate,
    gross_margin_percent,
)
from .recommender import (
    BundleConfig,
    ModelBundle,
    Slate,
    build_training_samples,
    load_bundle,
    recommend,
    save_bundle,
    train_bundle,
)

__version__ = "0.1.0"
