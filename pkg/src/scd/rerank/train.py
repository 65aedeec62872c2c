"""Training data generation, scorer training and reranking."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from ..context import PromptContext
from ..engine.decoder import CandidateSet, DecodeConfig, Decoder, Strategy
from ..engine.lm import LMProvider
from .features import FEATURE_NAMES, extract_features
from .metrics import match_score
from .softrank import group_loss

log = logging.getLogger(__name__)


class DegenerateData(ValueError):
    pass


class Scorer(Protocol):
    def score(self, context: PromptContext, candidate: str, norm_logprob: float = 0.0) -> float:
        ...


@dataclass(frozen=True)
class TrainingExample:
    group_id: str
    context: PromptContext
    candidate: str
    target: float
    norm_logprob: float = 0.0

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "context": self.context.to_dict(),
            "candidate": self.candidate,
            "target": self.target,
            "norm_logprob": self.norm_logprob,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingExample":
        return cls(
            group_id=str(d["group_id"]),
            context=PromptContext.from_dict(d["context"]),
            candidate=d["candidate"],
            target=float(d["target"]),
            norm_logprob=float(d.get("norm_logprob", 0.0)),
        )


def save_examples(examples: Iterable[TrainingExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_dict(), ensure_ascii=False) + "\n")


def load_examples(path: str | Path) -> list[TrainingExample]:
    with open(path, encoding="utf-8") as fh:
        return [TrainingExample.from_dict(json.loads(line)) for line in fh if line.strip()]


def norm_logprob(hyp) -> float:
    return hyp.logprob / max(1, len(hyp.tokens))


def generate_training_data(
    samples: Sequence,
    lm: LMProvider,
    decoder: Decoder,
    cfg: DecodeConfig,
    with_doc: bool = True,
) -> tuple[list[TrainingExample], dict[str, str]]:
    """Beam-search each sample and pair every candidate with its match score.

    Returns the examples and a ``{sample id: error}`` map of skipped samples.
    The scorer context always carries the documentation.
    """
    if cfg.strategy is not Strategy.BEAM:
        raise ValueError("training data comes from beam search")
    examples: list[TrainingExample] = []
    skipped: dict[str, str] = {}
    for sample in samples:
        try:
            cands = decoder.decode(sample.context(with_doc), lm, sample.table(), cfg)
        except Exception as exc:  # noqa: BLE001 - recorded per sample
            log.warning("sample %s skipped: %s", sample.id, exc)
            skipped[sample.id] = f"{type(exc).__name__}: {exc}"
            continue
        ctx = sample.context(True)
        for h in cands:
            examples.append(
                TrainingExample(
                    sample.id, ctx, h.text, match_score(h.text, sample.gold_call), norm_logprob(h)
                )
            )
    return examples, skipped


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 0.05
    spearman_weight: float = 1.0
    sharpness: float = 10.0
    val_fraction: float = 0.2
    seed: int = 0
    init_scale: float = 0.01
    # cosine decay to ``lr * min_lr_ratio``; per-group steps stay noisy otherwise
    min_lr_ratio: float = 0.01


@dataclass
class LinearScorer:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    history: list[dict] = field(default_factory=list, repr=False)

    def score_features(self, X: np.ndarray) -> np.ndarray:
        return ((np.asarray(X) - self.mean) / self.scale) @ self.weights + self.bias

    def score(self, context: PromptContext, candidate: str, norm_logprob: float = 0.0) -> float:
        return float(self.score_features(extract_features(context, candidate, norm_logprob)[None])[0])

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearScorer":
        return cls(
            np.asarray(d["weights"], dtype=float),
            float(d["bias"]),
            np.asarray(d["mean"], dtype=float),
            np.asarray(d["scale"], dtype=float),
            tuple(d["feature_names"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LinearScorer":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class OracleScorer:
    """Scores candidates by their match against a known gold call."""

    def __init__(self, gold: str):
        self.gold = gold

    def score(self, context, candidate: str, norm_logprob: float = 0.0) -> float:
        return match_score(candidate, self.gold)


def _objective(w, b, groups, cfg: TrainConfig):
    total = 0.0
    gw = np.zeros_like(w)
    gb = 0.0
    for X, y in groups:
        loss, gs = group_loss(X @ w + b, y, cfg.spearman_weight, cfg.sharpness)
        total += loss
        gw += X.T @ gs
        gb += gs.sum()
    n = max(1, len(groups))
    return total / n, gw / n, gb / n


def fit_linear(
    X: np.ndarray,
    y: np.ndarray,
    groups: Sequence[str],
    cfg: TrainConfig = TrainConfig(),
    feature_names: Sequence[str] | None = None,
) -> LinearScorer:
    """Adam on ``MSE + spearman_weight * (1 - soft Spearman)``, one group per step.

    A seeded ``val_fraction`` of groups is held out; the parameters with the
    lowest validation loss (initialization included) are returned.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.unique(y).size < 2:
        raise DegenerateData("all targets are identical")
    groups = np.asarray([str(g) for g in groups])
    names = list(dict.fromkeys(groups))
    by_group = {g: np.flatnonzero(groups == g) for g in names}
    if not any(np.unique(y[idx]).size > 1 for idx in by_group.values()):
        raise DegenerateData("no group has two distinct targets")

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(names))
    n_val = int(round(cfg.val_fraction * len(names)))
    if len(names) - n_val < 1:
        n_val = 0
    val_names = [names[i] for i in order[:n_val]]
    train_names = [names[i] for i in order[n_val:]]

    train_rows = np.concatenate([by_group[g] for g in train_names])
    mean = X[train_rows].mean(axis=0)
    scale = X[train_rows].std(axis=0)
    scale[scale < 1e-12] = 1.0
    Z = (X - mean) / scale
    train = [(Z[by_group[g]], y[by_group[g]]) for g in train_names]
    val = [(Z[by_group[g]], y[by_group[g]]) for g in val_names] or train

    w = rng.normal(0.0, cfg.init_scale, X.shape[1])
    b = float(y[train_rows].mean())
    m_w, v_w = np.zeros_like(w), np.zeros_like(w)
    m_b = v_b = 0.0
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    val_loss = _objective(w, b, val, cfg)[0]
    train_loss = _objective(w, b, train, cfg)[0]
    best = (val_loss, w.copy(), b)
    history = [{"epoch": 0, "train_loss": train_loss, "val_loss": val_loss}]
    for epoch in range(1, cfg.epochs + 1):
        frac = (epoch - 1) / max(1, cfg.epochs - 1)
        lr = cfg.lr * (cfg.min_lr_ratio + (1 - cfg.min_lr_ratio) * 0.5 * (1 + math.cos(math.pi * frac)))
        for gi in rng.permutation(len(train)):
            Xg, yg = train[gi]
            _, gs = group_loss(Xg @ w + b, yg, cfg.spearman_weight, cfg.sharpness)
            gw, gb = Xg.T @ gs, float(gs.sum())
            step += 1
            m_w = beta1 * m_w + (1 - beta1) * gw
            v_w = beta2 * v_w + (1 - beta2) * gw * gw
            m_b = beta1 * m_b + (1 - beta1) * gb
            v_b = beta2 * v_b + (1 - beta2) * gb * gb
            c1, c2 = 1 - beta1**step, 1 - beta2**step
            w = w - lr * (m_w / c1) / (np.sqrt(v_w / c2) + eps)
            b = b - lr * (m_b / c1) / (np.sqrt(v_b / c2) + eps)
        val_loss = _objective(w, b, val, cfg)[0]
        train_loss = _objective(w, b, train, cfg)[0]
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best[0]:
            best = (val_loss, w.copy(), b)

    names_out = tuple(feature_names) if feature_names is not None else FEATURE_NAMES
    return LinearScorer(best[1], float(best[2]), mean, scale, names_out, history)


def featurize(examples: Sequence[TrainingExample]) -> tuple[np.ndarray, np.ndarray, list[str]]:
    X = np.stack([extract_features(e.context, e.candidate, e.norm_logprob) for e in examples])
    y = np.array([e.target for e in examples])
    return X, y, [e.group_id for e in examples]


def train_scorer(examples: Sequence[TrainingExample], cfg: TrainConfig = TrainConfig()) -> LinearScorer:
    if not examples:
        raise DegenerateData("no training examples")
    X, y, groups = featurize(examples)
    return fit_linear(X, y, groups, cfg)


def rerank(candidates: CandidateSet, scorer: Scorer, context: PromptContext) -> CandidateSet:
    """Stable sort by descending scorer score; equal scores keep beam order."""
    scores = [scorer.score(context, h.text, norm_logprob(h)) for h in candidates]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return CandidateSet(
        [candidates.hypotheses[i] for i in order], candidates.forward_passes, candidates.dropped
    )
