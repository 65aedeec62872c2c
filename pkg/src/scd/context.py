"""Prompt context handed to the LM alongside the generated prefix."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

DEFAULT_INSTRUCTION = (
    "Generate the API call that fulfils the user's request in the conversation."
)


@dataclass(frozen=True)
class PromptContext:
    instruction: str = DEFAULT_INSTRUCTION
    api_doc: str | None = None
    exemplars: tuple[str, ...] = ()
    conversation: tuple[tuple[str, str], ...] = ()

    def render(self) -> str:
        parts = [self.instruction]
        if self.api_doc:
            parts.append("API documentation:\n" + self.api_doc)
        for ex in self.exemplars:
            parts.append("Example:\n" + ex)
        parts.append("\n".join(f"{who}: {what}" for who, what in self.conversation))
        parts.append("API call:")
        return "\n\n".join(parts)

    @property
    def context_id(self) -> str:
        return hashlib.sha256(self.render().encode("utf-8")).hexdigest()[:16]

    @property
    def conversation_text(self) -> str:
        return "\n".join(what for _, what in self.conversation)

    def without_doc(self) -> "PromptContext":
        return replace(self, api_doc=None)

    def to_dict(self) -> dict:
        return {
            "instruction": self.instruction,
            "api_doc": self.api_doc,
            "exemplars": list(self.exemplars),
            "conversation": [list(t) for t in self.conversation],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PromptContext":
        return cls(
            instruction=d.get("instruction", DEFAULT_INSTRUCTION),
            api_doc=d.get("api_doc"),
            exemplars=tuple(d.get("exemplars") or ()),
            conversation=tuple((str(a), str(b)) for a, b in d.get("conversation") or ()),
        )


def conversation_key(context: PromptContext) -> str:
    """Stable key of the conversation alone, independent of doc presence."""
    blob = json.dumps([list(t) for t in context.conversation], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
