"""Dataset summary statistics: median and mean per row."""

from __future__ import annotations

import statistics
from typing import Callable, Sequence

from ..calls import parse_call
from ..tokenizer import Vocab
from .dataset import Sample

ROWS = (
    "input_length",
    "doc_length",
    "exemplar_length",
    "conversation_length",
    "turns",
    "gold_call_length",
    "gold_call_args",
)


def _counter(vocab: Vocab | None) -> Callable[[str], int]:
    if vocab is None:
        return lambda text: len(text.split())
    return lambda text: len(vocab.encode(text))


def sample_row_values(sample: Sample, vocab: Vocab | None = None) -> dict[str, int]:
    """Per-sample counts; lengths are in vocab tokens, or whitespace words without a vocab."""
    count = _counter(vocab)
    conv = "\n".join(f"{who}: {what}" for who, what in sample.conversation)
    return {
        "input_length": count(sample.context(True).render()),
        "doc_length": count(sample.api_doc),
        "exemplar_length": sum(count(e) for e in sample.exemplars),
        "conversation_length": count(conv),
        "turns": len(sample.conversation),
        "gold_call_length": count(sample.gold_call),
        "gold_call_args": len(parse_call(sample.gold_call).args),
    }


def stats(dataset: Sequence[Sample], vocab: Vocab | None = None) -> list[tuple[str, float, float]]:
    """``(row, median, mean)`` for each row in :data:`ROWS`."""
    per_sample = [sample_row_values(s, vocab) for s in dataset]
    out = []
    for row in ROWS:
        vals = [v[row] for v in per_sample]
        if vals:
            out.append((row, float(statistics.median(vals)), float(statistics.fmean(vals))))
        else:
            out.append((row, 0.0, 0.0))
    return out


def format_stats(rows: Sequence[tuple[str, float, float]]) -> str:
    width = max(len(r[0]) for r in rows)
    lines = [f"{'':{width}}  {'median':>10}  {'mean':>10}"]
    for name, med, mean in rows:
        lines.append(f"{name:{width}}  {med:>10.1f}  {mean:>10.2f}")
    return "\n".join(lines)
