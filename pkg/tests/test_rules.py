from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ontoalign import rules

EQ1_TEXT = (
    "Award(x) & hasCoPrincipalInvestigator(x,z) <-> FundingAward(x) & "
    "providesAgentRole(x,y) & CoPrincipalInvestigatorRole(y) & performedBy(y,z)"
)


def test_parse_running_example():
    rule = rules.parse_rule(EQ1_TEXT)
    assert rule.direction == rules.BIDIRECTIONAL
    assert len(rule.lhs) == 2
    assert len(rule.rhs) == 4
    assert rule.lhs[0] == rules.Atom("Award", ("x",))
    assert rule.rhs[3] == rules.Atom("performedBy", ("y", "z"))


def test_parse_identity_mapping():
    rule = rules.parse_rule("Program(x) <-> Program(x)")
    assert len(rule.lhs) == 1 and len(rule.rhs) == 1
    assert rule.lhs == rule.rhs


def test_parse_builtin_subclass_atom():
    rule = rules.parse_rule("GeoFeatureType(x) <-> subClassOf(x, Place)")
    atom = rule.rhs[0]
    assert atom.builtin
    assert atom.predicate == "subClassOf"
    assert atom.args == ("x", "Place")


def test_directed_arrow():
    rule = rules.parse_rule("A(x) -> B(x)")
    assert rule.direction == rules.LEFT_TO_RIGHT


def test_constant_outside_subclass_rejected():
    with pytest.raises(rules.RuleParseError):
        rules.parse_rule("A(x) <-> B(x, Place)")


def test_arity_three_rejected():
    with pytest.raises(rules.RuleParseError):
        rules.parse_rule("A(x,y,z) <-> B(x)")


def test_empty_side_rejected():
    with pytest.raises(rules.RuleParseError):
        rules.parse_rule("A(x) <-> ")
    with pytest.raises(rules.RuleParseError):
        rules.parse_rule(" <-> B(x)")


def test_trailing_garbage_rejected():
    with pytest.raises(rules.RuleParseError):
        rules.parse_rule("A(x) <-> B(x) C(x)")


def test_error_carries_position():
    with pytest.raises(rules.RuleParseError) as exc:
        rules.parse_rule("A(x) <-> B(x,)")
    assert exc.value.position == 13


def test_serialize_round_trip_eq1():
    rule = rules.parse_rule(EQ1_TEXT, rule_id="r1")
    again = rules.parse_rule(rules.serialize_rule(rule), rule_id="r1")
    assert again == rule


def test_serialize_single_atom_rule():
    rule = rules.parse_rule("A(x) <-> B(x)")
    assert rules.serialize_rule(rule) == "A(x) <-> B(x)"


def test_serialize_builtin_atom():
    rule = rules.parse_rule("GeoFeatureType(x) <-> subClassOf(x, Place)")
    assert rules.serialize_rule(rule) == "GeoFeatureType(x) <-> subClassOf(x, Place)"


def test_load_reference_positional_ids(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text(
        "# fixture\n"
        "A(x) <-> B(x)\n"
        "C(x) & p(x,y) <-> D(y)\n"
        "E(x) -> F(x)\n"
    )
    reference = rules.load_reference(path)
    assert [r.id for r in reference.rules] == ["r1", "r2", "r3"]


def test_load_reference_duplicate_id(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text("id:dup A(x) <-> B(x)\nid:dup C(x) <-> D(x)\n")
    with pytest.raises(rules.RuleParseError) as exc:
        rules.load_reference(path)
    assert "dup" in str(exc.value)


def test_load_reference_rhs_predicate_multiset(tmp_path):
    # hand count oracle: the two rules together expose 5 distinct rhs names
    path = tmp_path / "rules.txt"
    path.write_text(EQ1_TEXT + "\nProgram(x) <-> Program(x)\n")
    reference = rules.load_reference(path)
    rhs_names = set()
    for rule in reference.rules:
        rhs_names |= {a.predicate for a in rule.rhs}
    assert rhs_names == {
        "FundingAward",
        "providesAgentRole",
        "CoPrincipalInvestigatorRole",
        "performedBy",
        "Program",
    }


def test_load_reference_malformed_line_reports_lineno(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text("A(x) <-> B(x)\nnot a rule\n")
    with pytest.raises(rules.RuleParseError) as exc:
        rules.load_reference(path)
    assert exc.value.line == 2


def test_load_reference_connectivity_diagnostic(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text("A(x) & B(y) <-> C(x)\n")
    reference = rules.load_reference(path)
    assert any("not variable-connected" in d for d in reference.diagnostics)
    assert len(reference.rules) == 1


def test_target_pieces_running_example():
    rule = rules.parse_rule(EQ1_TEXT)
    assert rules.target_pieces(rule) == {
        "FundingAward",
        "providesAgentRole",
        "CoPrincipalInvestigatorRole",
        "performedBy",
    }


def test_target_pieces_identity():
    assert rules.target_pieces(rules.parse_rule("Program(x) <-> Program(x)")) == {"Program"}


def test_target_pieces_repeated_predicate():
    rule = rules.parse_rule("A(x) <-> P(x,y) & P(y,z)")
    assert rules.target_pieces(rule) == {"P"}


def test_target_pieces_builtin_contributes_class_constant():
    rule = rules.parse_rule("GeoFeatureType(x) <-> subClassOf(x, Place)")
    assert rules.target_pieces(rule) == {"Place"}


_var = st.sampled_from(["x", "y", "z", "u", "v"])
_name = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,8}", fullmatch=True)
_const = st.from_regex(r"[A-Z][A-Za-z0-9_]{0,8}", fullmatch=True)

_plain_atom = st.builds(
    lambda name, args: rules.Atom(name, tuple(args)),
    _name,
    st.lists(_var, min_size=1, max_size=2),
)
_builtin_atom = st.builds(
    lambda var, const: rules.Atom(rules.SUBCLASS_MARKER, (var, const), builtin=True),
    _var,
    _const,
)
_atom = st.one_of(_plain_atom, _builtin_atom)
_rule = st.builds(
    lambda lhs, rhs, direction: rules.AlignmentRule("", direction, tuple(lhs), tuple(rhs)),
    st.lists(_atom, min_size=1, max_size=4),
    st.lists(_atom, min_size=1, max_size=4),
    st.sampled_from([rules.BIDIRECTIONAL, rules.LEFT_TO_RIGHT]),
)


@given(_rule)
@settings(max_examples=200)
def test_parse_serialize_identity(rule):
    assert rules.parse_rule(rules.serialize_rule(rule)) == rule


@given(_rule)
@settings(max_examples=100)
def test_direction_preserved_and_pieces_bounded(rule):
    again = rules.parse_rule(rules.serialize_rule(rule))
    assert again.direction == rule.direction
    pieces = rules.target_pieces(rule)
    assert len(pieces) <= len(rule.rhs)
    predicates = [a.args[1] if a.builtin else a.predicate for a in rule.rhs]
    if len(set(predicates)) == len(predicates):
        assert len(pieces) == len(rule.rhs)
