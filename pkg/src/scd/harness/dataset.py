"""Dataset samples and their JSONL form.

One sample per line::

    {"id": "...", "conversation": [["Human", "..."], ["Assistant", "..."]],
     "api_doc": "...", "exemplars": ["..."], "gold_call": "..."}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..constraints import ConstraintTable, extract_constraints
from ..context import DEFAULT_INSTRUCTION, PromptContext


@dataclass(frozen=True)
class Sample:
    id: str
    conversation: tuple[tuple[str, str], ...]
    api_doc: str
    gold_call: str
    exemplars: tuple[str, ...] = ()
    instruction: str = DEFAULT_INSTRUCTION

    def context(self, with_doc: bool = True) -> PromptContext:
        return PromptContext(
            instruction=self.instruction,
            api_doc=self.api_doc if with_doc else None,
            exemplars=self.exemplars,
            conversation=self.conversation,
        )

    def table(self) -> ConstraintTable:
        return extract_constraints(self.api_doc)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "conversation": [list(t) for t in self.conversation],
            "api_doc": self.api_doc,
            "exemplars": list(self.exemplars),
            "gold_call": self.gold_call,
        }
        if self.instruction != DEFAULT_INSTRUCTION:
            d["instruction"] = self.instruction
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Sample":
        return cls(
            id=str(d["id"]),
            conversation=tuple((str(a), str(b)) for a, b in d.get("conversation", ())),
            api_doc=d.get("api_doc", ""),
            gold_call=d["gold_call"],
            exemplars=tuple(d.get("exemplars") or ()),
            instruction=d.get("instruction", DEFAULT_INSTRUCTION),
        )


def load_dataset(path: str | Path) -> list[Sample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                samples.append(Sample.from_dict(json.loads(line)))
    return samples


def save_dataset(samples: Iterable[Sample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False) + "\n")
