"""Reranking of beam candidates with a lightweight trained scorer."""

from .features import FEATURE_NAMES, extract_features
from .metrics import match_score
from .softrank import group_loss, soft_rank, soft_spearman
from .train import (
    DegenerateData,
    LinearScorer,
    OracleScorer,
    Scorer,
    TrainConfig,
    TrainingExample,
    featurize,
    fit_linear,
    generate_training_data,
    load_examples,
    rerank,
    save_examples,
    train_scorer,
)

__all__ = [name for name in dir() if not name.startswith("_")]
