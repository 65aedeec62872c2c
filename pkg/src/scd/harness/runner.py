"""End-to-end experiment runs over a dataset."""

from __future__ import annotations

import enum
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

from ..calls import validate_call
from ..engine.decoder import DecodeConfig, Decoder
from ..engine.lm import LMProvider
from ..rerank.train import OracleScorer, Scorer, rerank
from ..tokenizer import Vocab
from .dataset import Sample
from .metrics import exact_match

ORACLE = "oracle"


class ContextMode(str, enum.Enum):
    WITH_DOC = "with_doc"
    WITHOUT_DOC = "without_doc"


@dataclass
class SampleRecord:
    id: str
    predicted: str | None
    correct: bool
    faithful: bool
    forward_passes: int
    candidates: int
    gold_rank: int | None
    table_fingerprint: str
    error: str | None = None
    wall_time: float = 0.0


@dataclass
class RunReport:
    mode: str
    config: dict
    records: list[SampleRecord]
    baseline_mean_passes: float | None = None
    wall_time: float = 0.0

    @property
    def accuracy(self) -> float:
        return _mean([r.correct for r in self.records])

    @property
    def mean_forward_passes(self) -> float:
        return _mean([r.forward_passes for r in self.records if r.error is None])

    @property
    def faithfulness_rate(self) -> float:
        return _mean([r.faithful for r in self.records if r.error is None])

    @property
    def in_beam_rate(self) -> float:
        return _mean([r.gold_rank is not None for r in self.records])

    @property
    def errors(self) -> int:
        return sum(r.error is not None for r in self.records)

    @property
    def speedup(self) -> float | None:
        if self.baseline_mean_passes is None or not self.mean_forward_passes:
            return None
        return self.baseline_mean_passes / self.mean_forward_passes

    @property
    def samples_per_sec(self) -> float | None:
        return len(self.records) / self.wall_time if self.wall_time > 0 else None

    def aggregates(self, include_timing: bool = False) -> dict:
        agg = {
            "samples": len(self.records),
            "accuracy": self.accuracy,
            "mean_forward_passes": self.mean_forward_passes,
            "faithfulness_rate": self.faithfulness_rate,
            "in_beam_rate": self.in_beam_rate,
            "errors": self.errors,
            "speedup": self.speedup,
        }
        if include_timing:
            agg["wall_time"] = self.wall_time
            agg["samples_per_sec"] = self.samples_per_sec
        return agg

    def to_dict(self, include_timing: bool = False) -> dict:
        records = []
        for r in self.records:
            d = asdict(r)
            if not include_timing:
                del d["wall_time"]
            records.append(d)
        return {
            "mode": self.mode,
            "config": self.config,
            "aggregates": self.aggregates(include_timing),
            "records": records,
        }

    def to_json(self, include_timing: bool = False) -> str:
        """Stable JSON; timing is left out by default so reports are reproducible."""
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        lines = [
            f"mode: {self.mode}  samples: {len(self.records)}  errors: {self.errors}",
            f"accuracy: {self.accuracy:.4f}",
            f"faithfulness: {self.faithfulness_rate:.4f}",
            f"gold in candidates: {self.in_beam_rate:.4f}",
            f"mean forward passes: {self.mean_forward_passes:.2f}",
        ]
        if self.speedup is not None:
            lines.append(f"speedup vs baseline: {self.speedup:.3f}x")
        return "\n".join(lines)


def _mean(xs) -> float:
    xs = list(xs)
    return float(sum(xs)) / len(xs) if xs else 0.0


def config_dict(cfg: DecodeConfig) -> dict:
    d = asdict(cfg)
    d["strategy"] = cfg.strategy.value
    return d


def run_sample(
    sample: Sample,
    decoder: Decoder,
    lm: LMProvider,
    cfg: DecodeConfig,
    mode: ContextMode = ContextMode.WITH_DOC,
    scorer: Scorer | str | None = None,
) -> SampleRecord:
    start = time.perf_counter()
    fingerprint = ""
    try:
        # the table always comes from the doc, whatever the prompt shows
        table = sample.table()
        fingerprint = table.fingerprint
        context = sample.context(mode is ContextMode.WITH_DOC)
        cands = decoder.decode(context, lm, table, cfg)
        gold_rank = next(
            (i for i, h in enumerate(cands) if exact_match(h.text, sample.gold_call)), None
        )
        if scorer is not None:
            active = OracleScorer(sample.gold_call) if isinstance(scorer, str) else scorer
            # the scorer reads the documentation even when the LM prompt did not
            cands = rerank(cands, active, sample.context(True))
        predicted = cands.top.text
        return SampleRecord(
            id=sample.id,
            predicted=predicted,
            correct=exact_match(predicted, sample.gold_call),
            faithful=not validate_call(predicted, table),
            forward_passes=cands.forward_passes,
            candidates=len(cands),
            gold_rank=gold_rank,
            table_fingerprint=fingerprint,
            wall_time=time.perf_counter() - start,
        )
    except Exception as exc:  # noqa: BLE001 - a failed sample never aborts the run
        return SampleRecord(
            id=sample.id,
            predicted=None,
            correct=False,
            faithful=False,
            forward_passes=0,
            candidates=0,
            gold_rank=None,
            table_fingerprint=fingerprint,
            error=f"{type(exc).__name__}: {exc}",
            wall_time=time.perf_counter() - start,
        )


def run_experiment(
    dataset: Sequence[Sample],
    lm: LMProvider,
    cfg: DecodeConfig,
    mode: ContextMode = ContextMode.WITH_DOC,
    scorer: Scorer | str | None = None,
    vocab: Vocab | None = None,
    workers: int = 1,
    baseline: RunReport | None = None,
    decoder: Decoder | None = None,
) -> RunReport:
    """Decode every sample, optionally rerank, and aggregate.

    ``scorer`` may be the string ``"oracle"`` to rerank by match score
    against each sample's gold call. Records keep dataset order for any
    ``workers`` count.
    """
    if decoder is None:
        if vocab is None:
            raise ValueError("need a vocab or a decoder")
        decoder = Decoder(vocab)
    mode = ContextMode(mode)
    start = time.perf_counter()

    def one(sample: Sample) -> SampleRecord:
        return run_sample(sample, decoder, lm, cfg, mode, scorer)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, dataset))
    else:
        records = [one(s) for s in dataset]
    config = config_dict(cfg)
    config["reranked"] = None if scorer is None else (ORACLE if isinstance(scorer, str) else "scorer")
    return RunReport(
        mode=mode.value,
        config=config,
        records=records,
        baseline_mean_passes=baseline.mean_forward_passes if baseline else None,
        wall_time=time.perf_counter() - start,
    )
