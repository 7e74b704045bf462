"""Command-line surface for batch alignment experiments.

Exit codes: 0 success, 1 partial per-rule failures, 2 configuration or
parse errors.  ``align`` is resumable: rules whose transcript and
detection files already exist are skipped unless ``--force`` is given.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import re
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import click

from . import assembler, backends, extractor, orchestrator, rdf, registry as registry_mod
from . import rules as rules_mod
from . import scoring

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    source: str = ""
    target: str = ""
    reference: str = ""
    registry: str = ""
    templates: str = ""
    out_dir: str = "out"
    strategy: str = "chain"
    endpoint: str = ""
    model: str = "gpt-4"
    key_env: str = ""
    replay: str = ""
    record: str = ""
    satisfaction_threshold: float = 1.0
    char_budget: int = 120_000
    retries: int = 2
    top_k: int = 3
    jobs: int = 1
    report_format: str = "markdown"

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        config = cls()
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = _ENV_RE.sub(lambda m: os.environ.get(m.group(1), ""), value.strip())
            if not hasattr(config, key):
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            current = getattr(config, key)
            if isinstance(current, bool):
                setattr(config, key, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(config, key, int(value))
            elif isinstance(current, float):
                setattr(config, key, float(value))
            else:
                setattr(config, key, value)
        return config


def _fail_config(message: str):
    click.echo(message, err=True)
    sys.exit(EXIT_CONFIG)


def _load_graph(path: str) -> rdf.OntologyGraph:
    try:
        text = Path(path).read_text(encoding="utf-8")
        return rdf.parse_turtle(text, source_name=str(path))
    except FileNotFoundError:
        _fail_config(f"{path}: no such file")
    except rdf.TurtleParseError as exc:
        _fail_config(str(exc))


@click.group()
def main():
    """Complex ontology alignment pipeline: parse, prompt, extract, score."""


@main.command()
@click.argument("ontology", type=click.Path())
def inspect(ontology):
    """Summarize the entity inventory of a Turtle ontology."""
    graph = _load_graph(ontology)
    inventory = rdf.build_inventory(graph)
    classes = inventory.by_kind(rdf.CLASS_KIND)
    obj_props = inventory.by_kind(rdf.OBJECT_PROPERTY_KIND)
    data_props = inventory.by_kind(rdf.DATA_PROPERTY_KIND)
    click.echo(f"classes: {len(classes)}")
    click.echo(f"object-properties: {len(obj_props)}")
    click.echo(f"data-properties: {len(data_props)}")
    for record in inventory.entities:
        extras = []
        if record.label:
            extras.append(f"label={record.label!r}")
        if record.domains:
            extras.append("domains=" + ",".join(sorted(rdf.local_name(d) for d in record.domains)))
        if record.ranges:
            extras.append("ranges=" + ",".join(sorted(rdf.local_name(r) for r in record.ranges)))
        suffix = (" " + " ".join(extras)) if extras else ""
        click.echo(f"{record.kind} {record.name} <{record.iri.value}>{suffix}")
    for diagnostic in inventory.diagnostics:
        click.echo(f"note: {diagnostic}", err=True)


@main.command()
@click.argument("ontology", type=click.Path())
@click.argument("entity")
@click.option("--with-prefixes", is_flag=True, help="Prepend @prefix directives.")
def snippet(ontology, entity, with_prefixes):
    """Print the Turtle fragment for one entity (by local name or IRI)."""
    graph = _load_graph(ontology)
    iri = rdf.Iri(entity) if ":" in entity else rdf.find_by_local_name(graph, entity)
    if iri is None or not graph.has_subject(iri):
        _fail_config(f"{ontology}: entity {entity!r} not found as a subject")
    click.echo(rdf.serialize_snippet(graph, iri, with_prefixes=with_prefixes), nl=False)


@main.command()
@click.option("--registry", "registry_path", required=True, type=click.Path())
@click.option("--ontology", "ontology_path", required=True, type=click.Path())
@click.option("-k", "top_k", default=3, show_default=True)
@click.argument("entities", nargs=-1, required=True)
def suggest(registry_path, ontology_path, top_k, entities):
    """Rank registry modules against source entities (deterministic baseline)."""
    graph = _load_graph(ontology_path)
    inventory = rdf.build_inventory(graph)
    try:
        registry = registry_mod.load_registry(registry_path)
    except registry_mod.RegistryError as exc:
        _fail_config(str(exc))
    records = []
    for name in entities:
        record = inventory.find(name)
        if record is None:
            _fail_config(f"{ontology_path}: entity {name!r} not in inventory")
        records.append(record)
    for name, score in registry_mod.rank_modules(records, registry, top_k):
        click.echo(f"{name}\t{score:.4f}")


def _config_from_options(config_path, **overrides) -> RunConfig:
    try:
        config = RunConfig.from_file(config_path) if config_path else RunConfig()
    except (ConfigError, FileNotFoundError) as exc:
        _fail_config(str(exc))
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    return config


def _build_backend(config: RunConfig, policy: orchestrator.Policy):
    if config.replay:
        try:
            store = backends.ReplayStore.load(config.replay)
        except (FileNotFoundError, json.JSONDecodeError) as exc:
            _fail_config(f"replay store {config.replay}: {exc}")
        return backends.ReplayBackend(store)
    if not config.endpoint:
        _fail_config("no backend: provide --endpoint for live runs or --replay STORE")
    backend = backends.HttpBackend(
        endpoint=config.endpoint,
        model=config.model,
        key_env=config.key_env or None,
        retries=config.retries,
    )
    if config.record:
        store = backends.ReplayStore(path=config.record)
        if Path(config.record).exists():
            store = backends.ReplayStore.load(config.record)
            store.path = Path(config.record)
        return backends.RecordingBackend(backend, store)
    return backend


def _load_alignment_inputs(config: RunConfig):
    for key in ("source", "target", "reference", "registry"):
        if not getattr(config, key):
            _fail_config(f"missing required setting {key!r}")
    source_graph = _load_graph(config.source)
    target_text = Path(config.target).read_text(encoding="utf-8")
    try:
        rdf.parse_turtle(target_text, source_name=config.target)
    except rdf.TurtleParseError as exc:
        _fail_config(str(exc))
    try:
        reference = rules_mod.load_reference(config.reference)
    except (rules_mod.RuleParseError, FileNotFoundError) as exc:
        _fail_config(f"{config.reference}: {exc}")
    try:
        registry = registry_mod.load_registry(config.registry)
    except (registry_mod.RegistryError, FileNotFoundError) as exc:
        _fail_config(str(exc))
    return source_graph, target_text, reference, registry


_ALIGN_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(), default=None),
    click.option("--source", default=None, type=click.Path()),
    click.option("--target", default=None, type=click.Path()),
    click.option("--reference", default=None, type=click.Path()),
    click.option("--registry", default=None, type=click.Path()),
    click.option("--templates", default=None, type=click.Path()),
    click.option("--out-dir", default=None, type=click.Path()),
    click.option("--strategy", default=None, type=click.Choice(["chain", "zero-shot"])),
    click.option("--endpoint", default=None),
    click.option("--model", default=None),
    click.option("--key-env", default=None),
    click.option("--replay", default=None, type=click.Path()),
    click.option("--record", default=None, type=click.Path()),
    click.option("--satisfaction-threshold", default=None, type=float),
    click.option("--char-budget", default=None, type=int),
    click.option("--retries", default=None, type=int),
    click.option("--top-k", default=None, type=int),
    click.option("--jobs", default=None, type=int),
]


def _with_align_options(func):
    for option in reversed(_ALIGN_OPTIONS):
        func = option(func)
    return func


def _policy_from_config(config: RunConfig) -> orchestrator.Policy:
    return orchestrator.Policy(
        satisfaction_threshold=config.satisfaction_threshold,
        char_budget=config.char_budget,
        retries=config.retries,
        top_k_modules=config.top_k,
        model=config.model,
        temperature=0.0,
    )


def _run_one_rule(rule, source_graph, target_text, registry, backend, policy,
                  templates, matcher, source_inventory, strategy):
    if strategy == "zero-shot":
        return orchestrator.run_zero_shot(
            rule, source_graph, target_text, backend, policy,
            templates=templates, matcher=matcher,
        )
    return orchestrator.run_chain(
        rule, source_graph, target_text, registry, backend, policy,
        templates=templates, matcher=matcher, source_inventory=source_inventory,
    )


@main.command()
@_with_align_options
@click.option("--force", is_flag=True, help="Re-run rules whose outputs already exist.")
def align(config_path, force, **overrides):
    """Run the prompting pipeline for every reference rule."""
    config = _config_from_options(config_path, **overrides)
    source_graph, target_text, reference, registry = _load_alignment_inputs(config)
    policy = _policy_from_config(config)
    backend = _build_backend(config, policy)
    templates = orchestrator.load_templates(config.templates or None)
    target_graph = rdf.parse_turtle(target_text, source_name=config.target)
    target_inventory = rdf.build_inventory(target_graph)
    matcher = extractor.build_matcher(target_inventory, extractor.AliasConfig())
    source_inventory = rdf.build_inventory(source_graph)

    shared = extractor.homonyms(source_inventory, target_inventory)
    if shared:
        click.echo(
            "note: names present in both ontologies (matched and counted): "
            + ", ".join(sorted(shared)),
            err=True,
        )

    out_dir = Path(config.out_dir)
    transcripts_dir = out_dir / "transcripts"
    detections_dir = out_dir / "detections"
    transcripts_dir.mkdir(parents=True, exist_ok=True)
    detections_dir.mkdir(parents=True, exist_ok=True)

    skipped, completed, failed = [], [], {}

    def process(rule):
        transcript_path = transcripts_dir / f"{rule.id}.json"
        detection_path = detections_dir / f"{rule.id}.json"
        if not force and transcript_path.exists() and detection_path.exists():
            return ("skipped", rule.id, None)
        try:
            result = _run_one_rule(
                rule, source_graph, target_text, registry, backend, policy,
                templates, matcher, source_inventory, config.strategy,
            )
        except Exception as exc:
            return ("failed", rule.id, f"{type(exc).__name__}: {exc}")
        transcript_path.write_text(
            orchestrator.transcript_to_json(result.transcript), encoding="utf-8"
        )
        detection_path.write_text(
            orchestrator.detections_to_json(result.final_detections, result.flags),
            encoding="utf-8",
        )
        return ("completed", rule.id, None)

    if config.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(process, reference.rules))
    else:
        outcomes = [process(rule) for rule in reference.rules]

    for status, rule_id, error in outcomes:
        if status == "skipped":
            skipped.append(rule_id)
            click.echo(f"{rule_id}: skipped (outputs exist)")
        elif status == "completed":
            completed.append(rule_id)
            click.echo(f"{rule_id}: ok")
        else:
            failed[rule_id] = error
            click.echo(f"{rule_id}: FAILED: {error}", err=True)

    summary = {
        "completed": sorted(completed),
        "skipped": sorted(skipped),
        "failed": {k: failed[k] for k in sorted(failed)},
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    sys.exit(EXIT_PARTIAL if failed else EXIT_OK)


def _read_detection_files(detections_dir: Path) -> dict[str, dict]:
    out = {}
    for path in sorted(detections_dir.glob("*.json")):
        obj = json.loads(path.read_text(encoding="utf-8"))
        out[obj["rule_id"]] = obj
    return out


@main.command()
@click.option("--detections", "detections_dir", required=True, type=click.Path())
@click.option("--reference", "reference_path", required=True, type=click.Path())
@click.option("--format", "report_format", default="markdown",
              type=click.Choice(["markdown", "csv", "json"]), show_default=True)
@click.option("--out-dir", default=None, type=click.Path())
def score(detections_dir, reference_path, report_format, out_dir):
    """Score detection files against the reference alignment."""
    try:
        reference = rules_mod.load_reference(reference_path)
    except (rules_mod.RuleParseError, FileNotFoundError) as exc:
        _fail_config(f"{reference_path}: {exc}")
    detections = _read_detection_files(Path(detections_dir))
    reference_ids = {r.id for r in reference.rules}
    missing = sorted(reference_ids - set(detections))
    extra = sorted(set(detections) - reference_ids)
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing detections for: " + ", ".join(missing))
        if extra:
            parts.append("detections for unknown rules: " + ", ".join(extra))
        _fail_config("; ".join(parts))

    scores = []
    for rule in reference.rules:
        obj = detections[rule.id]
        detected = {d["name"] for d in obj["detections"]}
        scores.append(
            scoring.score_rule(
                rules_mod.target_pieces(rule),
                detected,
                rule_id=rule.id,
                flags=set(obj.get("flags", [])),
            )
        )
    report = scoring.aggregate(scores)
    rendered = scoring.emit_report(report, report_format)
    click.echo(rendered, nl=False)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "per_rule.csv").write_text(scoring.scores_to_csv(scores), encoding="utf-8")
        extension = {"markdown": "md", "csv": "csv", "json": "json"}[report_format]
        (out / f"aggregate.{extension}").write_text(rendered, encoding="utf-8")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--detections", "detections_dir", required=True, type=click.Path())
@click.option("--target", "target_path", required=True, type=click.Path())
@click.option("--reference", "reference_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def assemble(detections_dir, target_path, reference_path, out_path):
    """Assemble each detection set into a candidate rule."""
    graph = _load_graph(target_path)
    inventory = rdf.build_inventory(graph)
    try:
        reference = rules_mod.load_reference(reference_path)
    except (rules_mod.RuleParseError, FileNotFoundError) as exc:
        _fail_config(f"{reference_path}: {exc}")
    detections = _read_detection_files(Path(detections_dir))

    lines = []
    failures = {}
    for rule in reference.rules:
        obj = detections.get(rule.id)
        if obj is None:
            failures[rule.id] = "no detection file"
            continue
        detected = {d["name"] for d in obj["detections"]}
        if not detected:
            lines.append(f"# {rule.id}: no detections, nothing to assemble")
            continue
        try:
            assembly = assembler.assemble(detected, inventory)
        except assembler.AssemblyError as exc:
            failures[rule.id] = str(exc)
            lines.append(f"# {rule.id}: {exc}")
            continue
        composed = assembler.compose_rule(rule.lhs, assembly, rule_id=rule.id)
        if composed.rule.rhs:
            text = rules_mod.serialize_rule(composed.rule)
        else:
            text = " & ".join(a.render() for a in rule.lhs) + " <-> "
        suffix = ""
        if composed.incomplete:
            unplaced = ", ".join(sorted(composed.unplaced)) or "none"
            suffix = f"  # incomplete; unplaced: {unplaced}"
        lines.append(f"id:{rule.id} {text}{suffix}")
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {out_path} ({len(lines)} lines)")
    for rule_id in sorted(failures):
        click.echo(f"{rule_id}: {failures[rule_id]}", err=True)
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


@main.command()
@click.option("--scores", "scores_path", required=True, type=click.Path())
@click.option("--format", "report_format", default="markdown",
              type=click.Choice(["markdown", "csv", "json"]), show_default=True)
def report(scores_path, report_format):
    """Re-render the aggregate report from a per-rule CSV."""
    try:
        scores = scoring.scores_from_csv(Path(scores_path).read_text(encoding="utf-8"))
    except (FileNotFoundError, KeyError, ValueError) as exc:
        _fail_config(f"{scores_path}: {exc}")
    if not scores:
        _fail_config(f"{scores_path}: no rows")
    click.echo(scoring.emit_report(scoring.aggregate(scores), report_format), nl=False)


@main.command(name="replay-verify")
@_with_align_options
@click.option("--transcripts", "transcripts_dir", required=True, type=click.Path())
def replay_verify(config_path, transcripts_dir, **overrides):
    """Re-run each recorded transcript under replay and byte-compare."""
    config = _config_from_options(config_path, **overrides)
    source_graph, target_text, reference, registry = _load_alignment_inputs(config)
    policy = _policy_from_config(config)
    templates = orchestrator.load_templates(config.templates or None)
    target_graph = rdf.parse_turtle(target_text, source_name=config.target)
    matcher = extractor.build_matcher(rdf.build_inventory(target_graph), extractor.AliasConfig())
    source_inventory = rdf.build_inventory(source_graph)

    mismatches = []
    for path in sorted(Path(transcripts_dir).glob("*.json")):
        original = path.read_text(encoding="utf-8")
        transcript = orchestrator.transcript_from_json(original)
        rule = reference.by_id(transcript.rule_id)
        if rule is None:
            mismatches.append((path.name, "rule not in reference"))
            continue
        store = orchestrator.store_from_transcript(transcript, policy)
        backend = backends.ReplayBackend(store)
        try:
            result = _run_one_rule(
                rule, source_graph, target_text, registry, backend, policy,
                templates, matcher, source_inventory,
                "zero-shot" if transcript.strategy == orchestrator.ZERO_SHOT else "chain",
            )
        except Exception as exc:
            mismatches.append((path.name, f"{type(exc).__name__}: {exc}"))
            continue
        rerun = orchestrator.transcript_to_json(result.transcript)
        if rerun != original:
            mismatches.append((path.name, "transcript bytes differ"))
        else:
            click.echo(f"{transcript.rule_id}: ok")
    for name, why in mismatches:
        click.echo(f"{name}: FAILED: {why}", err=True)
    sys.exit(EXIT_PARTIAL if mismatches else EXIT_OK)


if __name__ == "__main__":
    main()
