"""State-tracked constrained decoding over a next-token LM interface."""

from .decoder import (
    CandidateSet,
    DecodeConfig,
    Decoder,
    Hypothesis,
    MaxTokensExceeded,
    RawState,
    Strategy,
    decode,
    masked_step,
    restricted_logprobs,
)
from .lm import LMProvider, LMUnavailable, ProtocolError, RemoteLM, make_server, remote_lm, serve_in_thread
from .mock import ContextualMixtureLM, MixtureLM, RandomLM, UniformLM, build_mock_lm, load_mock_spec
from .state import (
    QUOTE,
    ConstraintMachine,
    EmptyMask,
    EngineError,
    GenerationState,
    IllegalToken,
    IllegalTransition,
    Phase,
    StructuralToken,
    StructuralTokenError,
    Verdict,
    finalize_or_continue,
    transition,
)

__all__ = [name for name in dir() if not name.startswith("_")]
