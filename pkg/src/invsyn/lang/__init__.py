from .check import Action, ProtocolSpec, parse_clause, parse_spec
from .ground import GroundInstance, InstanceConfig, ground
from .normalize import (
    QuantifierTemplate,
    canonical_text,
    extract_quantifier_templates,
    normalize_clause,
)
from .printer import to_text

__all__ = [
    "Action",
    "GroundInstance",
    "InstanceConfig",
    "ProtocolSpec",
    "QuantifierTemplate",
    "canonical_text",
    "extract_quantifier_templates",
    "ground",
    "normalize_clause",
    "parse_clause",
    "parse_spec",
    "to_text",
]
