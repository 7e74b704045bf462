from __future__ import annotations

import json
from pathlib import Path

import pytest

from ontoalign import backends, extractor, orchestrator, rdf, registry, rules

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def gbo_graph() -> rdf.OntologyGraph:
    return rdf.parse_turtle((FIXTURES / "gbo.ttl").read_text(), "gbo.ttl")


@pytest.fixture(scope="session")
def gbo_inventory(gbo_graph) -> rdf.EntityInventory:
    return rdf.build_inventory(gbo_graph)


@pytest.fixture(scope="session")
def gmo_text() -> str:
    return (FIXTURES / "gmo.ttl").read_text()


@pytest.fixture(scope="session")
def gmo_graph(gmo_text) -> rdf.OntologyGraph:
    return rdf.parse_turtle(gmo_text, "gmo.ttl")


@pytest.fixture(scope="session")
def gmo_inventory(gmo_graph) -> rdf.EntityInventory:
    return rdf.build_inventory(gmo_graph)


@pytest.fixture(scope="session")
def module_inventory() -> rdf.EntityInventory:
    graph = rdf.parse_turtle(
        (FIXTURES / "gmo_funding_award.ttl").read_text(), "gmo_funding_award.ttl"
    )
    return rdf.build_inventory(graph)


@pytest.fixture(scope="session")
def gmo_matcher(gmo_inventory) -> extractor.Matcher:
    return extractor.build_matcher(gmo_inventory, extractor.AliasConfig())


@pytest.fixture(scope="session")
def gmo_registry() -> registry.ModuleRegistry:
    return registry.load_registry(FIXTURES / "gmo_modules.txt", ontology_name="gmo")


@pytest.fixture(scope="session")
def reference() -> rules.ReferenceAlignment:
    return rules.load_reference(FIXTURES / "reference_rules.txt")


@pytest.fixture(scope="session")
def replay_responses() -> dict[str, dict[str, str]]:
    return json.loads((FIXTURES / "replay_responses.json").read_text())


def build_replay_store(
    reference: rules.ReferenceAlignment,
    gbo_graph: rdf.OntologyGraph,
    gmo_text: str,
    gmo_registry: registry.ModuleRegistry,
    responses: dict[str, dict[str, str]],
    policy: orchestrator.Policy | None = None,
) -> backends.ReplayStore:
    """Author a replay store by recording scripted runs of every rule."""
    policy = policy or orchestrator.Policy()
    store = backends.ReplayStore()
    templates = orchestrator.load_templates()
    for rule in reference.rules:
        scripted = backends.ScriptedBackend(responses[rule.id])
        recorder = backends.RecordingBackend(scripted, store)
        orchestrator.run_chain(
            rule, gbo_graph, gmo_text, gmo_registry, recorder, policy,
            templates=templates,
        )
    return store


@pytest.fixture(scope="session")
def replay_store(reference, gbo_graph, gmo_text, gmo_registry, replay_responses):
    return build_replay_store(
        reference, gbo_graph, gmo_text, gmo_registry, replay_responses
    )


@pytest.fixture()
def replay_store_file(tmp_path, replay_store) -> Path:
    path = tmp_path / "replay_store.json"
    replay_store.save(path)
    return path
