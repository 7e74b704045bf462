"""First-order alignment rules: atoms, the rule grammar, and reference files.

A rule relates a conjunction of source-ontology predicates to a
conjunction of target-ontology predicates::

    Award(x) & hasCoPrincipalInvestigator(x,z) <-> FundingAward(x) &
        providesAgentRole(x,y) & CoPrincipalInvestigatorRole(y) & performedBy(y,z)

``subClassOf(v, ClassName)`` is the one builtin atom form: its second
argument is a class constant (uppercase initial) instead of a variable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

BIDIRECTIONAL = "bidirectional"
LEFT_TO_RIGHT = "left-to-right"

SUBCLASS_MARKER = "subClassOf"

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_VAR_RE = re.compile(r"[a-z][a-zA-Z0-9_]*$")


class RuleParseError(Exception):
    def __init__(self, message: str, position: int, line: int | None = None):
        self.position = position
        self.line = line
        where = f"line {line}, col {position + 1}" if line else f"col {position + 1}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...]
    builtin: bool = False

    def __post_init__(self):
        if len(self.args) not in (1, 2):
            raise ValueError(f"atom {self.predicate} must have arity 1 or 2")
        if self.builtin and len(self.args) != 2:
            raise ValueError("builtin atoms require arity 2")

    @property
    def variables(self) -> tuple[str, ...]:
        if self.builtin:
            return self.args[:1]
        return self.args

    def render(self) -> str:
        return f"{self.predicate}({', '.join(self.args)})"


@dataclass(frozen=True)
class AlignmentRule:
    id: str
    direction: str
    lhs: tuple[Atom, ...]
    rhs: tuple[Atom, ...]

    def with_id(self, rule_id: str) -> "AlignmentRule":
        return AlignmentRule(rule_id, self.direction, self.lhs, self.rhs)


@dataclass(frozen=True)
class ReferenceAlignment:
    rules: tuple[AlignmentRule, ...]
    source_ontology: str = ""
    target_ontology: str = ""
    diagnostics: tuple[str, ...] = ()

    def by_id(self, rule_id: str) -> AlignmentRule | None:
        for rule in self.rules:
            if rule.id == rule_id:
                return rule
        return None


def _tokenize(text: str, line: int | None = None):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in " \t":
            i += 1
            continue
        if text.startswith("<->", i):
            tokens.append(("ARROW", "<->", i))
            i += 3
            continue
        if text.startswith("->", i):
            tokens.append(("ARROW", "->", i))
            i += 2
            continue
        if ch in "(),&":
            tokens.append((ch, ch, i))
            i += 1
            continue
        m = _NAME_RE.match(text, i)
        if m:
            tokens.append(("NAME", m.group(0), i))
            i = m.end()
            continue
        raise RuleParseError(f"unexpected character {ch!r}", i, line)
    tokens.append(("EOF", "", len(text)))
    return tokens


def parse_rule(text: str, rule_id: str = "", line: int | None = None) -> AlignmentRule:
    """Parse one rule expression; ``<->`` is bidirectional, ``->`` directed."""
    tokens = _tokenize(text, line)
    pos = 0

    def peek():
        return tokens[pos]

    def advance():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    def expect(kind):
        tok = advance()
        if tok[0] != kind:
            raise RuleParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2], line)
        return tok

    def parse_atom() -> Atom:
        name_tok = expect("NAME")
        name = name_tok[1]
        expect("(")
        args = []
        first = expect("NAME")
        args.append(first)
        if peek()[0] == ",":
            advance()
            args.append(expect("NAME"))
        expect(")")
        builtin = False
        arg_names = []
        for idx, (kind, value, at) in enumerate(args):
            if _VAR_RE.match(value):
                arg_names.append(value)
                continue
            # uppercase initial: a class constant, legal only as the
            # second argument of the subClassOf builtin
            if name == SUBCLASS_MARKER and idx == 1:
                builtin = True
                arg_names.append(value)
                continue
            raise RuleParseError(
                f"constant {value!r} only allowed as second argument of "
                f"{SUBCLASS_MARKER}", at, line,
            )
        return Atom(name, tuple(arg_names), builtin=builtin)

    def parse_conj() -> tuple[Atom, ...]:
        atoms = [parse_atom()]
        while peek()[0] == "&":
            advance()
            atoms.append(parse_atom())
        return tuple(atoms)

    lhs = parse_conj()
    arrow = advance()
    if arrow[0] != "ARROW":
        raise RuleParseError(f"expected '<->' or '->', found {arrow[1]!r}", arrow[2], line)
    rhs = parse_conj()
    end = advance()
    if end[0] != "EOF":
        raise RuleParseError(f"trailing input {end[1]!r}", end[2], line)
    direction = BIDIRECTIONAL if arrow[1] == "<->" else LEFT_TO_RIGHT
    return AlignmentRule(rule_id, direction, lhs, rhs)


def serialize_rule(rule: AlignmentRule) -> str:
    arrow = "<->" if rule.direction == BIDIRECTIONAL else "->"
    lhs = " & ".join(a.render() for a in rule.lhs)
    rhs = " & ".join(a.render() for a in rule.rhs)
    return f"{lhs} {arrow} {rhs}"


def side_connected(atoms: tuple[Atom, ...]) -> bool:
    """Whether the atoms form one component under shared variables."""
    if len(atoms) <= 1:
        return True
    groups = [set(a.variables) for a in atoms]
    merged = [groups[0]]
    pending = groups[1:]
    progress = True
    while pending and progress:
        progress = False
        for grp in list(pending):
            if any(grp & m for m in merged):
                merged[0] |= grp
                # collapse everything reachable via the first component
                merged = [set().union(*merged)]
                pending.remove(grp)
                progress = True
    return not pending


def load_reference(
    path: str | Path,
    source_ontology: str = "",
    target_ontology: str = "",
) -> ReferenceAlignment:
    """Load a line-oriented rule file.

    One rule per line, ``#`` comments, blank lines ignored.  A leading
    ``id:<name>`` token names the rule; otherwise ids are positional
    ``r1..rN``.
    """
    path = Path(path)
    rules: list[AlignmentRule] = []
    diagnostics: list[str] = []
    seen_ids: set[str] = set()
    counter = 0
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        counter += 1
        rule_id = f"r{counter}"
        if text.startswith("id:"):
            head, _, rest = text.partition(" ")
            rule_id = head[3:]
            text = rest.strip()
            if not rule_id:
                raise RuleParseError("empty rule id", 0, lineno)
        if rule_id in seen_ids:
            raise RuleParseError(f"duplicate rule id {rule_id!r}", 0, lineno)
        seen_ids.add(rule_id)
        rule = parse_rule(text, rule_id=rule_id, line=lineno)
        for side_name, side in (("lhs", rule.lhs), ("rhs", rule.rhs)):
            if not side_connected(side):
                diagnostics.append(
                    f"rule {rule_id}: {side_name} atoms are not variable-connected"
                )
        rules.append(rule)
    return ReferenceAlignment(
        rules=tuple(rules),
        source_ontology=source_ontology,
        target_ontology=target_ontology,
        diagnostics=tuple(diagnostics),
    )


def target_pieces(rule: AlignmentRule) -> set[str]:
    """Distinct target-side predicate names, the unit recall/precision counts.

    A ``subClassOf(v, C)`` builtin contributes the class constant ``C``;
    the marker itself is not a detectable piece.
    """
    pieces: set[str] = set()
    for atom in rule.rhs:
        if atom.builtin:
            pieces.add(atom.args[1])
        else:
            pieces.add(atom.predicate)
    return pieces


def source_pieces(rule: AlignmentRule) -> set[str]:
    """Distinct source-side predicate names (class constants included)."""
    pieces: set[str] = set()
    for atom in rule.lhs:
        if atom.builtin:
            pieces.add(atom.args[1])
        else:
            pieces.add(atom.predicate)
    return pieces
