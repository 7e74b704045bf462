"""Gazetteer extraction of target-ontology entities from free-text responses.

Surface forms per entity: its local name, rdfs:label, short ``ns#Local``
form, full IRI, camel-case-split phrase, plural (trailing ``s``), plus
alias expansions for property-name drift (``isPerformedBy`` vs
``performedBy``).  Matching is longest-first and respects word
boundaries; labels and phrases match case-insensitively, identifier-like
forms case-sensitively.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .rdf import (
    CLASS_KIND,
    EntityInventory,
    Iri,
    local_name,
    short_form,
)

# '#' counts as an identifier character so prefixed forms match whole
_BOUNDARY = r"[A-Za-z0-9_#]"

LOCAL_NAME = "local-name"
LABEL = "label"
PREFIXED = "prefixed"
ALIAS = "alias"

_CASE_SENSITIVE_KINDS = {LOCAL_NAME, PREFIXED, ALIAS}


class AliasCollisionError(Exception):
    pass


@dataclass(frozen=True)
class AliasConfig:
    """Extra surface forms plus switches for the built-in expansion rules."""

    entries: tuple[tuple[str, str], ...] = ()
    is_has_prefixes: bool = True
    plurals: bool = True
    camel_phrases: bool = True

    @classmethod
    def load(cls, path: str | Path, **flags) -> "AliasConfig":
        entries = []
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=>" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'surface => EntityLocalName'")
            surface, _, target = line.partition("=>")
            surface, target = surface.strip(), target.strip()
            if not surface or not target:
                raise ValueError(f"{path}:{lineno}: empty surface or entity name")
            entries.append((surface, target))
        return cls(entries=tuple(entries), **flags)


@dataclass(frozen=True)
class SurfaceForm:
    text: str
    entity: Iri
    kind: str

    @property
    def case_sensitive(self) -> bool:
        return self.kind in _CASE_SENSITIVE_KINDS


@dataclass(frozen=True)
class Detection:
    entity: Iri
    start: int
    end: int
    surface: str

    @property
    def name(self) -> str:
        return local_name(self.entity)


@dataclass(frozen=True)
class DetectionSet:
    rule_id: str
    stage: str
    detections: frozenset[Detection]

    def names(self) -> set[str]:
        return {d.name for d in self.detections}

    def entities(self) -> set[Iri]:
        return {d.entity for d in self.detections}

    def sorted(self) -> list[Detection]:
        return sorted(self.detections, key=lambda d: (d.start, d.entity.value))


def camel_phrase(name: str) -> str:
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])", " ", name)
    return spaced.strip()


def is_has_variants(name: str) -> set[str]:
    """Alias names for a property with/without a leading ``is``/``has``."""
    base = name
    for prefix in ("is", "has"):
        if name.startswith(prefix) and len(name) > len(prefix) and name[len(prefix)].isupper():
            base = name[len(prefix)].lower() + name[len(prefix) + 1:]
            break
    capped = base[0].upper() + base[1:]
    variants = {base, f"is{capped}", f"has{capped}"}
    variants.discard(name)
    return variants


class Matcher:
    """Immutable gazetteer over one inventory; ``extract`` is pure."""

    def __init__(self, forms: list[SurfaceForm]):
        self.forms = tuple(forms)
        self._by_text: dict[tuple[str, bool], SurfaceForm] = {}
        for form in forms:
            key = (form.text if form.case_sensitive else form.text.lower(), form.case_sensitive)
            existing = self._by_text.get(key)
            if existing and existing.entity != form.entity:
                raise AliasCollisionError(
                    f"surface form {form.text!r} maps to both "
                    f"{existing.entity.value} and {form.entity.value}"
                )
            self._by_text.setdefault(key, form)
        ordered = sorted(
            self._by_text.values(), key=lambda f: (-len(f.text), f.text, not f.case_sensitive)
        )
        if ordered:
            alternatives = []
            for form in ordered:
                escaped = re.escape(form.text)
                alternatives.append(escaped if form.case_sensitive else f"(?i:{escaped})")
            body = "|".join(alternatives)
            self._pattern = re.compile(
                rf"(?<!{_BOUNDARY})(?:{body})(?!{_BOUNDARY})"
            )
        else:
            self._pattern = None

    def lookup(self, matched: str) -> SurfaceForm | None:
        form = self._by_text.get((matched, True))
        if form:
            return form
        return self._by_text.get((matched.lower(), False))

    def extract(self, text: str, rule_id: str = "", stage: str = "") -> DetectionSet:
        detections: dict[Iri, Detection] = {}
        if self._pattern:
            for m in self._pattern.finditer(text):
                form = self.lookup(m.group(0))
                if form is None:
                    continue
                if form.entity not in detections:
                    detections[form.entity] = Detection(
                        entity=form.entity, start=m.start(), end=m.end(), surface=m.group(0)
                    )
        return DetectionSet(
            rule_id=rule_id, stage=stage, detections=frozenset(detections.values())
        )


def build_matcher(inventory: EntityInventory, alias_rules: AliasConfig | None = None) -> Matcher:
    alias_rules = alias_rules or AliasConfig()
    forms: list[SurfaceForm] = []

    def add(text: str, entity: Iri, kind: str):
        if text:
            forms.append(SurfaceForm(text=text, entity=entity, kind=kind))

    by_name = {}
    for record in inventory.entities:
        by_name.setdefault(record.name, record.iri)

    for record in inventory.entities:
        name = record.name
        add(name, record.iri, LOCAL_NAME)
        add(record.iri.value, record.iri, PREFIXED)
        short = short_form(record.iri)
        if short != record.iri.value:
            add(short, record.iri, PREFIXED)
        if record.label:
            add(record.label, record.iri, LABEL)
        if alias_rules.camel_phrases:
            phrase = camel_phrase(name)
            if phrase != name:
                add(phrase, record.iri, LABEL)
        if alias_rules.plurals:
            add(name + "s", record.iri, LOCAL_NAME)
            if record.label:
                add(record.label + "s", record.iri, LABEL)
            if alias_rules.camel_phrases:
                phrase = camel_phrase(name)
                if phrase != name:
                    add(phrase + "s", record.iri, LABEL)
        if alias_rules.is_has_prefixes and record.kind != CLASS_KIND:
            for variant in sorted(is_has_variants(name)):
                # never shadow a real entity that owns this exact name
                if variant in by_name and by_name[variant] != record.iri:
                    continue
                add(variant, record.iri, ALIAS)

    for surface, target in alias_rules.entries:
        iri = by_name.get(target)
        if iri is None:
            raise ValueError(f"alias target {target!r} is not in the inventory")
        forms.append(SurfaceForm(text=surface, entity=iri, kind=ALIAS))

    return Matcher(forms)


def extract(matcher: Matcher, text: str, rule_id: str = "", stage: str = "") -> DetectionSet:
    return matcher.extract(text, rule_id=rule_id, stage=stage)


def homonyms(source: EntityInventory, target: EntityInventory) -> set[str]:
    """Local names occurring in both inventories; matched and counted anyway,
    but worth a diagnostic because a detection may echo the source term."""
    return source.names() & target.names()
