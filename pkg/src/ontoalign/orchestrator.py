"""Staged conversation driver for the alignment pipeline.

The chain strategy walks five stages: upload the target ontology, ask
about the source-entity snippets, answer "Yes" when the assistant offers
a manual examination, ask for related module names, then re-ask with the
suggested modules' description blocks.  The last two stages are skipped
when the pre-module responses already cover enough expected pieces.  The
zero-shot strategy packs ontology, snippets, and question into a single
turn.  Everything is recordable and byte-exactly replayable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .backends import BackendRequest
from .extractor import AliasConfig, DetectionSet, Matcher, build_matcher
from .rdf import (
    EntityInventory,
    EntityRecord,
    OntologyGraph,
    build_inventory,
    find_by_local_name,
    parse_turtle,
    serialize_snippet,
)
from .registry import ModuleRegistry, description_block, rank_modules
from .rules import AlignmentRule, source_pieces, target_pieces

CHAIN_OF_THOUGHT = "chain-of-thought"
ZERO_SHOT = "zero-shot"

FLAG_TRUNCATED_PROMPT = "truncated-prompt"
FLAG_FALLBACK_RANKING = "fallback-ranking"
FLAG_USED_MODULE_INFO = "used-module-info"


class Stage(str, Enum):
    UPLOAD_ONTOLOGY = "upload-ontology"
    QUERY_ENTITIES = "query-entities"
    CONFIRM_MANUAL_EXAMINATION = "confirm-manual-examination"
    SUGGEST_MODULES = "suggest-modules"
    MODULE_INFO_REQUERY = "module-info-requery"


STAGE_ORDER = {stage: index for index, stage in enumerate(Stage)}
PRE_MODULE_STAGES = (Stage.QUERY_ENTITIES, Stage.CONFIRM_MANUAL_EXAMINATION)

_TEMPLATE_NAMES = (
    "upload_ontology",
    "query_entities",
    "confirm",
    "suggest_modules",
    "module_info_requery",
    "zero_shot",
)
_PLACEHOLDER_RE = re.compile(r"\{\{([a-z_]+)\}\}")


class PipelineError(Exception):
    pass


@dataclass(frozen=True)
class Turn:
    stage: Stage
    role: str
    content: str
    timestamp: float | None = None


@dataclass
class Transcript:
    rule_id: str
    strategy: str
    backend_descriptor: str
    turns: list[Turn] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, stage: Stage, role: str, content: str):
        if not content:
            raise PipelineError(f"empty {role} turn at stage {stage.value}")
        if self.turns and STAGE_ORDER[stage] < STAGE_ORDER[self.turns[-1].stage]:
            raise PipelineError(f"stage {stage.value} would regress the pipeline order")
        self.turns.append(Turn(stage=stage, role=role, content=content))

    def messages(self) -> tuple[tuple[str, str], ...]:
        return tuple((t.role, t.content) for t in self.turns)


@dataclass(frozen=True)
class Policy:
    satisfaction_threshold: float = 1.0
    char_budget: int = 120_000
    retries: int = 2
    top_k_modules: int = 3
    offer_patterns: tuple[str, ...] = ("Would you like me to",)
    model: str = "gpt-4"
    temperature: float = 0.0


@dataclass
class PipelineResult:
    transcript: Transcript
    stage_responses: dict[Stage, str]
    stage_detections: dict[Stage, DetectionSet]
    final_detections: DetectionSet
    flags: set[str]
    suggested_modules: tuple[str, ...] = ()

    def pre_module_detections(self) -> set[str]:
        names: set[str] = set()
        for stage in PRE_MODULE_STAGES:
            if stage in self.stage_detections:
                names |= self.stage_detections[stage].names()
        return names

    def to_json(self) -> str:
        obj = {
            "transcript": json.loads(transcript_to_json(self.transcript)),
            "detections": json.loads(detections_to_json(self.final_detections, self.flags)),
            "stage_detections": {
                stage.value: json.loads(detections_to_json(dset, set()))
                for stage, dset in sorted(
                    self.stage_detections.items(), key=lambda kv: STAGE_ORDER[kv[0]]
                )
            },
            "suggested_modules": list(self.suggested_modules),
        }
        return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def load_templates(template_dir: str | Path | None = None) -> dict[str, str]:
    templates = {}
    if template_dir is not None:
        base = Path(template_dir)
        for name in _TEMPLATE_NAMES:
            templates[name] = (base / f"{name}.txt").read_text(encoding="utf-8")
        return templates
    package_files = resources.files("ontoalign") / "templates"
    for name in _TEMPLATE_NAMES:
        templates[name] = (package_files / f"{name}.txt").read_text(encoding="utf-8")
    return templates


def render_template(template: str, **values: str) -> str:
    def substitute(match: re.Match) -> str:
        key = match.group(1)
        if key not in values:
            raise PipelineError(f"template placeholder {{{{{key}}}}} has no value")
        return values[key]

    return _PLACEHOLDER_RE.sub(substitute, template).strip("\n") + "\n"


def truncate_ontology(text: str, budget: int) -> tuple[str, bool]:
    """Head-preserving truncation: prefix directives survive, then whole
    entity blocks in document order until the budget runs out."""
    if budget <= 0 or len(text) <= budget:
        return text, False
    lines = text.splitlines()
    header = [l for l in lines if l.startswith("@prefix") or l.startswith("@base")]
    rest = "\n".join(l for l in lines if l not in header)
    blocks = [b for b in rest.split("\n\n") if b.strip()]
    out = list(header)
    used = sum(len(l) + 1 for l in header)
    for block in blocks:
        cost = len(block) + 2
        if used + cost > budget:
            break
        out.append("")
        out.append(block)
        used += cost
    return "\n".join(out) + "\n", True


def offers_manual_examination(text: str, patterns: tuple[str, ...]) -> bool:
    lowered = text.lower()
    return any(p.lower() in lowered for p in patterns)


def resolve_suggested_modules(text: str, registry: ModuleRegistry) -> list[str]:
    """Module names the response mentions, under lowercase/strip-spaces
    normalization of both sides."""

    def norm(s: str) -> str:
        return re.sub(r"[^a-z0-9]", "", s.lower())

    normalized_text = norm(text)
    return [m.name for m in registry.modules if norm(m.name) in normalized_text]


def _snippets_for_rule(
    rule: AlignmentRule, source_graph: OntologyGraph
) -> tuple[str, list[str]]:
    names = []
    for atom in rule.lhs:
        pieces = [atom.args[1]] if atom.builtin else [atom.predicate]
        for name in pieces:
            if name not in names:
                names.append(name)
    blocks = []
    for name in names:
        iri = find_by_local_name(source_graph, name)
        if iri is None:
            raise PipelineError(
                f"rule {rule.id or '<unnamed>'}: source entity {name!r} not found in "
                f"{source_graph.source_name}"
            )
        blocks.append(serialize_snippet(source_graph, iri))
    return "\n".join(blocks), names


def _source_records(names: list[str], inventory: EntityInventory) -> list[EntityRecord]:
    records = []
    for name in names:
        record = inventory.find(name)
        if record is not None:
            records.append(record)
    return records


class _Conversation:
    def __init__(self, transcript: Transcript, backend, policy: Policy):
        self.transcript = transcript
        self.backend = backend
        self.policy = policy
        self.extra_attempts = 0

    def exchange(self, stage: Stage, user_content: str) -> str:
        self.transcript.add(stage, "user", user_content)
        request = BackendRequest(
            stage=stage.value,
            model=self.policy.model,
            temperature=self.policy.temperature,
            messages=self.transcript.messages(),
        )
        response = self.backend.complete(request)
        self.extra_attempts += max(0, response.attempts - 1)
        self.transcript.add(stage, "assistant", response.text)
        return response.text


def _target_matcher(target_text: str, matcher: Matcher | None) -> Matcher:
    if matcher is not None:
        return matcher
    inventory = build_inventory(parse_turtle(target_text, "target"))
    return build_matcher(inventory, AliasConfig())


def run_chain(
    rule: AlignmentRule,
    source_graph: OntologyGraph,
    target_text: str,
    registry: ModuleRegistry,
    backend,
    policy: Policy | None = None,
    *,
    templates: dict[str, str] | None = None,
    matcher: Matcher | None = None,
    source_inventory: EntityInventory | None = None,
) -> PipelineResult:
    policy = policy or Policy()
    templates = templates or load_templates()
    matcher = _target_matcher(target_text, matcher)
    if source_inventory is None:
        source_inventory = build_inventory(source_graph)

    transcript = Transcript(
        rule_id=rule.id,
        strategy=CHAIN_OF_THOUGHT,
        backend_descriptor=getattr(backend, "descriptor", "backend"),
    )
    conversation = _Conversation(transcript, backend, policy)
    flags: set[str] = set()
    stage_responses: dict[Stage, str] = {}
    stage_detections: dict[Stage, DetectionSet] = {}

    ontology_text, truncated = truncate_ontology(target_text, policy.char_budget)
    if truncated:
        flags.add(FLAG_TRUNCATED_PROMPT)

    def ask(stage: Stage, content: str) -> str:
        text = conversation.exchange(stage, content)
        stage_responses[stage] = text
        stage_detections[stage] = matcher.extract(text, rule_id=rule.id, stage=stage.value)
        return text

    ask(Stage.UPLOAD_ONTOLOGY, render_template(
        templates["upload_ontology"], ontology_text=ontology_text
    ))

    snippets, lhs_names = _snippets_for_rule(rule, source_graph)
    query_response = ask(Stage.QUERY_ENTITIES, render_template(
        templates["query_entities"], snippets=snippets
    ))

    if offers_manual_examination(query_response, policy.offer_patterns):
        ask(Stage.CONFIRM_MANUAL_EXAMINATION, render_template(templates["confirm"]))

    expected = target_pieces(rule)
    pre_module = set()
    for stage in PRE_MODULE_STAGES:
        if stage in stage_detections:
            pre_module |= stage_detections[stage].names()
    coverage = len(expected & pre_module) / len(expected) if expected else 0.0
    satisfied = (
        policy.satisfaction_threshold > 0
        and bool(expected)
        and coverage >= policy.satisfaction_threshold
    )

    suggested: tuple[str, ...] = ()
    if not satisfied:
        module_names = "\n".join(registry.names())
        suggest_response = ask(Stage.SUGGEST_MODULES, render_template(
            templates["suggest_modules"], module_names=module_names
        ))
        resolved = resolve_suggested_modules(suggest_response, registry)
        if not resolved:
            ranked = rank_modules(
                _source_records(lhs_names, source_inventory),
                registry,
                policy.top_k_modules,
            )
            resolved = [name for name, _ in ranked]
            flags.add(FLAG_FALLBACK_RANKING)
        suggested = tuple(resolved)
        blocks = "\n".join(
            description_block(registry.find(name)) for name in suggested
        )
        ask(Stage.MODULE_INFO_REQUERY, render_template(
            templates["module_info_requery"], module_blocks=blocks
        ))
        flags.add(FLAG_USED_MODULE_INFO)

    transcript.meta["retries"] = conversation.extra_attempts
    final_stage = max(stage_detections, key=lambda s: STAGE_ORDER[s])
    return PipelineResult(
        transcript=transcript,
        stage_responses=stage_responses,
        stage_detections=stage_detections,
        final_detections=stage_detections[final_stage],
        flags=flags,
        suggested_modules=suggested,
    )


def run_zero_shot(
    rule: AlignmentRule,
    source_graph: OntologyGraph,
    target_text: str,
    backend,
    policy: Policy | None = None,
    *,
    templates: dict[str, str] | None = None,
    matcher: Matcher | None = None,
) -> PipelineResult:
    policy = policy or Policy()
    templates = templates or load_templates()
    matcher = _target_matcher(target_text, matcher)

    transcript = Transcript(
        rule_id=rule.id,
        strategy=ZERO_SHOT,
        backend_descriptor=getattr(backend, "descriptor", "backend"),
    )
    conversation = _Conversation(transcript, backend, policy)
    flags: set[str] = set()

    ontology_text, truncated = truncate_ontology(target_text, policy.char_budget)
    if truncated:
        flags.add(FLAG_TRUNCATED_PROMPT)
    snippets, _ = _snippets_for_rule(rule, source_graph)
    response = conversation.exchange(Stage.QUERY_ENTITIES, render_template(
        templates["zero_shot"], ontology_text=ontology_text, snippets=snippets
    ))
    detections = matcher.extract(response, rule_id=rule.id, stage=Stage.QUERY_ENTITIES.value)
    transcript.meta["retries"] = conversation.extra_attempts
    return PipelineResult(
        transcript=transcript,
        stage_responses={Stage.QUERY_ENTITIES: response},
        stage_detections={Stage.QUERY_ENTITIES: detections},
        final_detections=detections,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# Canonical JSON forms (sorted keys, trailing newline: byte-stable)
# ---------------------------------------------------------------------------


def transcript_to_json(transcript: Transcript) -> str:
    obj = {
        "rule_id": transcript.rule_id,
        "strategy": transcript.strategy,
        "backend": transcript.backend_descriptor,
        "meta": transcript.meta,
        "turns": [
            {
                "stage": t.stage.value,
                "role": t.role,
                "content": t.content,
                **({"timestamp": t.timestamp} if t.timestamp is not None else {}),
            }
            for t in transcript.turns
        ],
    }
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def transcript_from_json(text: str) -> Transcript:
    obj = json.loads(text)
    transcript = Transcript(
        rule_id=obj["rule_id"],
        strategy=obj["strategy"],
        backend_descriptor=obj["backend"],
        meta=obj.get("meta", {}),
    )
    for turn in obj["turns"]:
        transcript.turns.append(
            Turn(
                stage=Stage(turn["stage"]),
                role=turn["role"],
                content=turn["content"],
                timestamp=turn.get("timestamp"),
            )
        )
    return transcript


def detections_to_json(detections: DetectionSet, flags: set[str]) -> str:
    obj = {
        "rule_id": detections.rule_id,
        "stage": detections.stage,
        "flags": sorted(flags),
        "detections": [
            {
                "iri": d.entity.value,
                "name": d.name,
                "surface": d.surface,
                "start": d.start,
                "end": d.end,
            }
            for d in detections.sorted()
        ],
    }
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def store_from_transcript(transcript: Transcript, policy: Policy | None = None):
    """Rebuild a replay store from a recorded conversation.

    Each assistant turn is keyed by the digest of the conversation up to
    and including the user turn that prompted it, which is exactly the
    request a re-run will issue when the prompts are reproduced.
    """
    from .backends import BackendResponse, ReplayStore

    policy = policy or Policy()
    store = ReplayStore(backend=transcript.backend_descriptor)
    history: list[tuple[str, str]] = []
    for turn in transcript.turns:
        if turn.role == "user":
            history.append(("user", turn.content))
            continue
        request = BackendRequest(
            stage=turn.stage.value,
            model=policy.model,
            temperature=policy.temperature,
            messages=tuple(history),
        )
        store.put(request, BackendResponse(text=turn.content))
        history.append(("assistant", turn.content))
    return store
