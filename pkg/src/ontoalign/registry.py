"""Ontology module descriptors: loading, prompt blocks, and lexical ranking.

A registry file is a sequence of records separated by ``---`` lines::

    name: FundingAward
    description:
    A funding award pays for research activities...
    ObjectProperty: providesAgentRole
    Class: FundingAward
    axioms:
    FundingAward SubClassOf provides some AgentRole

The typed listing lines double as the prompt-ready description block, so
``description_block`` output re-parses to the same descriptor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .rdf import EntityRecord

_LISTING_KINDS = ("ObjectProperty", "DataProperty", "Class")
_LISTING_RE = re.compile(r"^(ObjectProperty|DataProperty|Class):\s*(\S+)\s*$")
_NAME_TOKEN_RE = re.compile(r"[A-Za-z]+|\d+")


class RegistryError(Exception):
    pass


@dataclass(frozen=True)
class ModuleDescriptor:
    name: str
    description: str
    listed_properties: tuple[str, ...] = ()
    listed_classes: tuple[str, ...] = ()
    listed_data_properties: tuple[str, ...] = ()
    core_axioms: str | None = None


@dataclass(frozen=True)
class ModuleRegistry:
    modules: tuple[ModuleDescriptor, ...]
    ontology_name: str = ""

    def find(self, name: str) -> ModuleDescriptor | None:
        for module in self.modules:
            if module.name == name:
                return module
        return None

    def names(self) -> list[str]:
        return [m.name for m in self.modules]


def _parse_record(lines: list[str], where: str) -> ModuleDescriptor:
    name = ""
    description_lines: list[str] = []
    listings: dict[str, list[str]] = {k: [] for k in _LISTING_KINDS}
    axiom_lines: list[str] = []
    state = "start"
    for line in lines:
        stripped = line.strip()
        if state == "start":
            if not stripped:
                continue
            if not stripped.startswith("name:"):
                raise RegistryError(f"{where}: record must begin with a 'name:' line")
            name = stripped[len("name:"):].strip()
            if not name:
                raise RegistryError(f"{where}: empty module name")
            state = "before-description"
            continue
        if state == "before-description":
            if not stripped:
                continue
            if stripped.startswith("description:"):
                head = stripped[len("description:"):].strip()
                if head:
                    description_lines.append(head)
                state = "description"
                continue
            raise RegistryError(f"{where}: module {name!r} is missing a description block")
        if state == "description":
            m = _LISTING_RE.match(stripped)
            if m:
                listings[m.group(1)].append(m.group(2))
                state = "listings"
                continue
            description_lines.append(line.rstrip())
            continue
        if state == "listings":
            if not stripped:
                continue
            m = _LISTING_RE.match(stripped)
            if m:
                listings[m.group(1)].append(m.group(2))
                continue
            if stripped.startswith("axioms:"):
                head = stripped[len("axioms:"):].strip()
                if head:
                    axiom_lines.append(head)
                state = "axioms"
                continue
            raise RegistryError(
                f"{where}: module {name!r}: unexpected line {stripped!r} in listings"
            )
        if state == "axioms":
            axiom_lines.append(line.rstrip())
    description = "\n".join(description_lines).strip()
    if not description:
        raise RegistryError(f"{where}: module {name!r} has an empty description")
    for kind, names in listings.items():
        for entry in names:
            if not entry:
                raise RegistryError(f"{where}: module {name!r}: empty {kind} name")
    axioms = "\n".join(axiom_lines).strip() or None
    return ModuleDescriptor(
        name=name,
        description=description,
        listed_properties=tuple(listings["ObjectProperty"]),
        listed_classes=tuple(listings["Class"]),
        listed_data_properties=tuple(listings["DataProperty"]),
        core_axioms=axioms,
    )


def parse_registry(text: str, ontology_name: str = "", where: str = "<string>") -> ModuleRegistry:
    chunks: list[list[str]] = [[]]
    for line in text.splitlines():
        if line.strip() == "---":
            chunks.append([])
        else:
            chunks[-1].append(line)
    records = [c for c in chunks if any(line.strip() for line in c)]
    if not records:
        raise RegistryError(f"{where}: registry contains no modules")
    modules = []
    seen = set()
    for idx, chunk in enumerate(records, start=1):
        descriptor = _parse_record(chunk, f"{where} (record {idx})")
        if descriptor.name in seen:
            raise RegistryError(f"{where}: duplicate module name {descriptor.name!r}")
        seen.add(descriptor.name)
        modules.append(descriptor)
    return ModuleRegistry(modules=tuple(modules), ontology_name=ontology_name)


def load_registry(path: str | Path, ontology_name: str = "") -> ModuleRegistry:
    path = Path(path)
    return parse_registry(
        path.read_text(encoding="utf-8"), ontology_name=ontology_name, where=str(path)
    )


def description_block(module: ModuleDescriptor) -> str:
    """Prompt-ready block: prose description, then one typed line per entry."""
    lines = [module.description, ""]
    for entry in module.listed_properties:
        lines.append(f"ObjectProperty: {entry}")
    for entry in module.listed_data_properties:
        lines.append(f"DataProperty: {entry}")
    for entry in module.listed_classes:
        lines.append(f"Class: {entry}")
    if module.core_axioms:
        lines.append("axioms:")
        lines.append(module.core_axioms)
    return "\n".join(lines) + "\n"


def tokenize_name(text: str) -> set[str]:
    """Lowercased tokens after camel-case and separator splitting."""
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])", " ", text)
    return {t.lower() for t in _NAME_TOKEN_RE.findall(spaced)}


def _entity_tokens(record: EntityRecord) -> set[str]:
    tokens = tokenize_name(record.name)
    if record.label:
        tokens |= tokenize_name(record.label)
    if record.comment:
        tokens |= tokenize_name(record.comment)
    return tokens


def module_tokens(module: ModuleDescriptor) -> tuple[set[str], set[str]]:
    """(listing tokens, other tokens) for scoring; listings count double."""
    listing: set[str] = set()
    for entry in (
        module.listed_properties + module.listed_classes + module.listed_data_properties
    ):
        listing |= tokenize_name(entry)
    other = tokenize_name(module.name) | tokenize_name(module.description)
    if module.core_axioms:
        other |= tokenize_name(module.core_axioms)
    return listing, other


def rank_modules(
    query_entities: list[EntityRecord],
    registry: ModuleRegistry,
    k: int,
) -> list[tuple[str, float]]:
    """Top-k modules by weighted token overlap with the query entities.

    Listing-name tokens weigh double; the score is normalized by the
    maximum attainable weight so it stays in [0, 1].  Ties break on the
    module name.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not registry.modules:
        raise RegistryError("cannot rank over an empty registry")
    query: set[str] = set()
    for record in query_entities:
        query |= _entity_tokens(record)
    scored = []
    for module in registry.modules:
        listing, other = module_tokens(module)
        if query:
            raw = sum(2 if t in listing else (1 if t in other else 0) for t in query)
            score = raw / (2 * len(query))
        else:
            score = 0.0
        scored.append((module.name, score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]
