from .base import (
    NullProposer,
    ProposalBatch,
    ProposalContext,
    ProposalItem,
    Proposer,
    record_observation,
)
from .prompt import batch_to_raw, build_prompt, parse_response
from .remote import (
    API_KEY_ENV,
    RecordingProposer,
    RemoteConfig,
    RemoteProposer,
    ReplayProposer,
    read_transcript,
)
from .template import TemplateProposer

__all__ = [
    "API_KEY_ENV",
    "NullProposer",
    "ProposalBatch",
    "ProposalContext",
    "ProposalItem",
    "Proposer",
    "RecordingProposer",
    "RemoteConfig",
    "RemoteProposer",
    "ReplayProposer",
    "TemplateProposer",
    "batch_to_raw",
    "build_prompt",
    "parse_response",
    "read_transcript",
    "record_observation",
]
