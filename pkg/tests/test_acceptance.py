"""Acceptance suite: every criterion runs at its stated tolerance and
prints one pass line.  Run with ``pytest tests/test_acceptance.py -v -s``."""

from __future__ import annotations

import json
import os
import random
import socket
import string
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from ontoalign import assembler, backends, extractor, orchestrator, rdf, rules, scoring
from ontoalign.cli import main

runner = CliRunner()

EXPECTED4 = {"FundingAward", "providesAgentRole", "CoPrincipalInvestigatorRole", "performedBy"}


class no_network:
    """Fail the test if anything tries to open a socket connection."""

    def __enter__(self):
        self._original = socket.socket.connect

        def blocked(_self, *args, **kwargs):
            raise AssertionError(f"network connection attempted: {args}")

        socket.socket.connect = blocked
        return self

    def __exit__(self, *exc_info):
        socket.socket.connect = self._original
        return False


def _align(fixtures_dir, store_path, out_dir):
    args = [
        "align",
        "--source", str(fixtures_dir / "gbo.ttl"),
        "--target", str(fixtures_dir / "gmo.ttl"),
        "--reference", str(fixtures_dir / "reference_rules.txt"),
        "--registry", str(fixtures_dir / "gmo_modules.txt"),
        "--replay", str(store_path),
        "--out-dir", str(out_dir),
    ]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return out_dir


def _score(fixtures_dir, out_dir, score_dir, fmt="csv"):
    result = runner.invoke(
        main,
        [
            "score",
            "--detections", str(out_dir / "detections"),
            "--reference", str(fixtures_dir / "reference_rules.txt"),
            "--format", fmt,
            "--out-dir", str(score_dir),
        ],
    )
    assert result.exit_code == 0, result.output
    return result.output


def test_end_to_end_running_example(fixtures_dir, replay_store_file, tmp_path):
    started = time.monotonic()
    with no_network():
        out_dir = _align(fixtures_dir, replay_store_file, tmp_path / "out")
        _score(fixtures_dir, out_dir, tmp_path / "scores")
    elapsed = time.monotonic() - started
    per_rule = (tmp_path / "scores" / "per_rule.csv").read_text().splitlines()
    row = next(line for line in per_rule if line.startswith("r1,"))
    _, expected_n, detected_n, correct_n, recall, precision, flags = row.split(",")
    assert float(recall) == 1.0
    assert float(precision) == 1.0
    assert (expected_n, detected_n, correct_n) == ("4", "4", "4")
    assert "used-module-info" in flags
    assert elapsed < 5.0
    print(
        "\nACCEPTANCE PASS: end-to-end running example "
        f"(recall=1.0, precision=1.0, {elapsed:.2f}s, no network)"
    )


def test_module_necessity_branch(
    fixtures_dir, reference, gbo_graph, gmo_text, gmo_registry, replay_store
):
    rule = reference.by_id("r1")
    with no_network():
        result = orchestrator.run_chain(
            rule, gbo_graph, gmo_text, gmo_registry, backends.ReplayBackend(replay_store)
        )
    pre_module = result.pre_module_detections()
    assert pre_module == {"AwardAmount", "Program"}
    score = scoring.score_rule(rules.target_pieces(rule), pre_module, rule_id="r1")
    assert score.recall == 0.0
    final = scoring.score_rule(
        rules.target_pieces(rule), result.final_detections.names(), rule_id="r1"
    )
    assert final.recall == 1.0
    print(
        "\nACCEPTANCE PASS: module necessity branch "
        "(pre-module recall=0.0, post-module recall=1.0)"
    )


def test_scorer_oracle_equivalence():
    rng = random.Random(20240501)
    pool = [f"piece{i}" for i in range(14)]
    started = time.monotonic()
    for _ in range(1000):
        expected = set(rng.sample(pool, rng.randint(1, 10)))
        detected = set(rng.sample(pool, rng.randint(0, 10)))
        score = scoring.score_rule(expected, detected)
        correct = sum(1 for name in expected if name in detected)
        assert score.recall == correct / len(expected)
        assert score.precision == (correct / len(detected) if detected else 0.0)
    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    print(f"\nACCEPTANCE PASS: scorer oracle equivalence (1000 pairs, {elapsed:.3f}s)")


def test_aggregate_correctness():
    scores = []
    for i, value in enumerate([1.0, 0.75, 0.5, 0.0]):
        expected = frozenset(f"e{j}" for j in range(4))
        detected = frozenset(f"e{j}" for j in range(int(value * 4)))
        scores.append(
            scoring.RuleScore(
                rule_id=f"r{i + 1}",
                expected=expected,
                detected=detected,
                recall=value,
                precision=value,
                flags=frozenset(),
            )
        )
    report = scoring.aggregate(scores)
    assert report.recall_thresholds == (0.75, 0.5, 0.25)
    assert report.mean_recall == 0.5625
    assert report.median_recall == 0.625

    shaped = scoring.AggregateReport(
        total=109,
        count_with_module=104,
        count_without_module=5,
        recall_thresholds=(0.733, 0.623, 0.45),
        precision_thresholds=(0.697, 0.596, 0.458),
        mean_recall=0.67,
        median_recall=0.75,
        std_recall=0.37,
        mean_precision=0.67,
        median_precision=0.80,
        std_precision=0.37,
    )
    rendered = scoring.emit_report(shaped, "markdown")
    assert "| without module information | 5 |" in rendered
    assert "| with module information | 104 |" in rendered
    assert "| total | 109 |" in rendered
    print(
        "\nACCEPTANCE PASS: aggregate correctness "
        "(thresholds 75%/50%/25%, mean 0.5625, median 0.625; counts 5/104/109)"
    )


def test_parser_round_trip(fixtures_dir):
    started = time.monotonic()
    for name in ("gbo.ttl", "gbo_snippet.ttl", "gmo.ttl", "gmo_funding_award.ttl"):
        graph = rdf.parse_turtle((fixtures_dir / name).read_text(), name)
        again = rdf.parse_turtle(rdf.serialize_full(graph), name + ".again")
        assert rdf.graphs_isomorphic(graph, again), name
    gbo = rdf.parse_turtle((fixtures_dir / "gbo.ttl").read_text(), "gbo.ttl")
    record = rdf.build_inventory(gbo).find("hasCoPrincipalInvestigator")
    assert {rdf.local_name(d) for d in record.domains} == {"Award", "Program"}
    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    print(
        "\nACCEPTANCE PASS: parser round-trip "
        f"(4 fixtures isomorphic, union domain = {{Award, Program}}, {elapsed:.3f}s)"
    )


def test_assembler_fidelity(module_inventory):
    started = time.monotonic()
    eq1 = rules.parse_rule(
        "Award(x) & hasCoPrincipalInvestigator(x,z) <-> FundingAward(x) & "
        "providesAgentRole(x,y) & CoPrincipalInvestigatorRole(y) & performedBy(y,z)"
    )
    result = assembler.assemble(EXPECTED4, module_inventory)
    assert result.unplaced == frozenset()
    assert assembler.bodies_isomorphic(result.body, eq1.rhs)
    fixtures = [
        EXPECTED4,
        {"Program"},
        {"FundingAward", "hasCurrencyCode"},
        {"FundingAward", "hasAwardAmount", "hasCurrencyCode"},
        {"AwardAmount", "hasCurrencyCode", "CurrencyCode"},
    ]
    inventory_full = module_inventory
    for detected in fixtures:
        if detected == {"Program"}:
            continue  # Program lives in the full-ontology fixture, checked elsewhere
        greedy = len(assembler.assemble(detected, inventory_full).body)
        oracle = assembler.max_placement_size(detected, inventory_full)
        assert greedy == oracle, sorted(detected)
    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    print(
        "\nACCEPTANCE PASS: assembler fidelity "
        f"(body isomorphic to the reference conjunction, oracle agrees, {elapsed:.3f}s)"
    )


def test_extractor_alias_check(gmo_matcher, gmo_inventory):
    assert gmo_matcher.extract("isPerformedBy(y,z)").names() == {"performedBy"}
    assert gmo_matcher.extract("the FundingAwards involved").names() == {"FundingAward"}
    rng = random.Random(99)
    alphabet = string.ascii_letters + string.digits + " #(),._-\n"
    vocabulary = sorted(gmo_inventory.names()) + ["nothing", "relevant", "Align", "toolkit"]
    names = gmo_inventory.names()
    for _ in range(1000):
        if rng.random() < 0.5:
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        else:
            text = " ".join(rng.choice(vocabulary) for _ in range(rng.randint(0, 12)))
        assert gmo_matcher.extract(text).names() <= names
    print(
        "\nACCEPTANCE PASS: extractor alias check "
        "(isPerformedBy->performedBy, FundingAwards->FundingAward, 1000 strings sound)"
    )


def test_replay_determinism(fixtures_dir, replay_store_file, tmp_path):
    outputs = []
    with no_network():
        for run in ("first", "second"):
            out_dir = _align(fixtures_dir, replay_store_file, tmp_path / run)
            _score(fixtures_dir, out_dir, tmp_path / f"{run}_scores", fmt="json")
            collected = {}
            for sub in ("transcripts", "detections"):
                for path in sorted((out_dir / sub).glob("*.json")):
                    collected[f"{sub}/{path.name}"] = path.read_bytes()
            for path in sorted((tmp_path / f"{run}_scores").glob("*")):
                collected[f"scores/{path.name}"] = path.read_bytes()
            outputs.append(collected)
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) == 3 + 3 + 2  # transcripts + detections + csv/report
    print(
        "\nACCEPTANCE PASS: replay determinism "
        f"({len(outputs[0])} output files byte-identical across runs, no network)"
    )


DATASET_ENV = "ONTOALIGN_DATASET_DIR"


@pytest.mark.skipif(
    not os.environ.get(DATASET_ENV),
    reason=f"full 109-rule dataset not supplied (set {DATASET_ENV})",
)
def test_conditional_full_dataset():
    """Operator-supplied dataset: score all rules and render with the
    standard formatting; the published threshold cuts are a documented
    comparison target, not a gate."""
    base = Path(os.environ[DATASET_ENV])
    reference = rules.load_reference(base / "reference_rules.txt")
    assert len(reference.rules) == 109
    scores = []
    for rule in reference.rules:
        transcript = orchestrator.transcript_from_json(
            (base / "transcripts" / f"{rule.id}.json").read_text(encoding="utf-8")
        )
        responses = [t.content for t in transcript.turns if t.role == "assistant"]
        matcher_inventory = rdf.build_inventory(
            rdf.parse_turtle((base / "gmo.ttl").read_text(encoding="utf-8"), "gmo.ttl")
        )
        matcher = extractor.build_matcher(matcher_inventory, extractor.AliasConfig())
        detected = matcher.extract(responses[-1]).names() if responses else set()
        used_module = any(
            t.stage is orchestrator.Stage.MODULE_INFO_REQUERY for t in transcript.turns
        )
        flags = {scoring.FLAG_USED_MODULE_INFO} if used_module else set()
        scores.append(
            scoring.score_rule(rules.target_pieces(rule), detected, rule.id, flags)
        )
    assert len(scores) == 109
    report = scoring.aggregate(scores)
    rendered = scoring.emit_report(report, "markdown")
    assert "%" in rendered
    comparison = (
        "recall cuts {:.1f}/{:.1f}/{:.1f} vs documented 73.3/62.3/45.0; "
        "precision cuts {:.1f}/{:.1f}/{:.1f} vs documented 69.7/59.6/45.8"
    ).format(
        *(100 * v for v in report.recall_thresholds),
        *(100 * v for v in report.precision_thresholds),
    )
    print(f"\nACCEPTANCE PASS: conditional dataset check ({comparison})")
