"""Complex ontology alignment via staged LLM prompting over ontology modules."""

from .rdf import (
    EntityInventory,
    EntityRecord,
    Iri,
    OntologyGraph,
    TurtleParseError,
    build_inventory,
    parse_turtle,
    serialize_full,
    serialize_snippet,
)
from .rules import (
    AlignmentRule,
    Atom,
    ReferenceAlignment,
    load_reference,
    parse_rule,
    serialize_rule,
    target_pieces,
)
from .registry import ModuleDescriptor, ModuleRegistry, description_block, load_registry, rank_modules
from .extractor import AliasConfig, DetectionSet, Matcher, build_matcher, extract
from .scoring import AggregateReport, RuleScore, aggregate, emit_report, score_rule
from .assembler import AssemblyResult, assemble, compose_rule
from .orchestrator import Policy, Stage, Transcript, run_chain, run_zero_shot

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "AliasConfig",
    "AlignmentRule",
    "AssemblyResult",
    "Atom",
    "DetectionSet",
    "EntityInventory",
    "EntityRecord",
    "Iri",
    "Matcher",
    "ModuleDescriptor",
    "ModuleRegistry",
    "OntologyGraph",
    "Policy",
    "ReferenceAlignment",
    "RuleScore",
    "Stage",
    "Transcript",
    "TurtleParseError",
    "aggregate",
    "assemble",
    "build_inventory",
    "build_matcher",
    "compose_rule",
    "description_block",
    "emit_report",
    "extract",
    "load_reference",
    "load_registry",
    "parse_rule",
    "parse_turtle",
    "rank_modules",
    "run_chain",
    "run_zero_shot",
    "score_rule",
    "serialize_full",
    "serialize_rule",
    "serialize_snippet",
    "target_pieces",
]
