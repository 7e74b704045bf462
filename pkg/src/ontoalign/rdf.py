"""Turtle parsing, immutable triple graphs, entity inventories, and snippet serialization.

The parser covers the Turtle subset found in typical OWL schema files:
prefix/base directives, IRIs and prefixed names, labeled and anonymous
blank nodes, predicate-object lists (`;`), object lists (`,`),
collections, literals with language tags or datatypes, and the `a`
keyword.  Named graphs and quoted triples are rejected as unsupported
rather than skipped, so downstream entity counts stay trustworthy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"


@dataclass(frozen=True, order=True)
class Iri:
    value: str


@dataclass(frozen=True, order=True)
class BlankNode:
    label: str


@dataclass(frozen=True)
class Literal:
    lexical: str
    lang: str | None = None
    datatype: Iri | None = None


Term = Iri | BlankNode | Literal
Triple = tuple[Term, Iri, Term]

RDF_TYPE = Iri(RDF_NS + "type")
RDF_FIRST = Iri(RDF_NS + "first")
RDF_REST = Iri(RDF_NS + "rest")
RDF_NIL = Iri(RDF_NS + "nil")
RDFS_LABEL = Iri(RDFS_NS + "label")
RDFS_COMMENT = Iri(RDFS_NS + "comment")
RDFS_DOMAIN = Iri(RDFS_NS + "domain")
RDFS_RANGE = Iri(RDFS_NS + "range")
RDFS_SUBCLASSOF = Iri(RDFS_NS + "subClassOf")
OWL_CLASS = Iri(OWL_NS + "Class")
OWL_OBJECT_PROPERTY = Iri(OWL_NS + "ObjectProperty")
OWL_DATATYPE_PROPERTY = Iri(OWL_NS + "DatatypeProperty")
OWL_UNION_OF = Iri(OWL_NS + "unionOf")
OWL_INVERSE_OF = Iri(OWL_NS + "inverseOf")

CLASS_KIND = "ontology-class"
OBJECT_PROPERTY_KIND = "object-property"
DATA_PROPERTY_KIND = "data-property"

_TYPE_KINDS = {
    OWL_CLASS: CLASS_KIND,
    OWL_OBJECT_PROPERTY: OBJECT_PROPERTY_KIND,
    OWL_DATATYPE_PROPERTY: DATA_PROPERTY_KIND,
}


class TurtleParseError(Exception):
    """Parse failure with a source location and a diagnostic category.

    Categories: ``syntax``, ``unresolved-prefix``, ``unsupported``.
    """

    def __init__(self, source: str, line: int, col: int, category: str, message: str):
        self.source = source
        self.line = line
        self.col = col
        self.category = category
        self.message = message
        super().__init__(f"{source}:{line}:{col}: {category}: {message}")


def local_name(iri: Iri | str) -> str:
    value = iri.value if isinstance(iri, Iri) else iri
    if "#" in value:
        return value.rsplit("#", 1)[1]
    return value.rstrip("/").rsplit("/", 1)[-1]


def short_form(iri: Iri | str) -> str:
    """Compact ``ns#Local`` rendering of a hash IRI, e.g. ``gbo#Award``."""
    value = iri.value if isinstance(iri, Iri) else iri
    if "#" not in value:
        return value
    ns, local = value.rsplit("#", 1)
    ns = ns.rstrip("/").rsplit("/", 1)[-1]
    return f"{ns}#{local}" if ns else value


@dataclass(frozen=True)
class OntologyGraph:
    """Immutable triple set with the prefix map of its source document."""

    triples: frozenset[Triple]
    prefixes: dict[str, str]
    source_name: str
    base: str | None = None
    anon_labels: frozenset[str] = frozenset()

    def subject_triples(self, subject: Term) -> list[Triple]:
        return sorted((t for t in self.triples if t[0] == subject), key=_triple_key)

    def objects(self, subject: Term, predicate: Iri) -> list[Term]:
        return sorted(
            (o for s, p, o in self.triples if s == subject and p == predicate),
            key=_term_key,
        )

    def value(self, subject: Term, predicate: Iri) -> Term | None:
        objs = self.objects(subject, predicate)
        return objs[0] if objs else None

    def subjects_of_type(self, type_iri: Iri) -> list[Iri]:
        found = {
            s
            for s, p, o in self.triples
            if p == RDF_TYPE and o == type_iri and isinstance(s, Iri)
        }
        return sorted(found)

    def subject_iris(self) -> list[Iri]:
        return sorted({s for s, _, _ in self.triples if isinstance(s, Iri)})

    def has_subject(self, term: Term) -> bool:
        return any(s == term for s, _, _ in self.triples)


def _term_key(term: Term) -> tuple:
    if isinstance(term, Iri):
        return (0, term.value, "", "")
    if isinstance(term, BlankNode):
        return (1, term.label, "", "")
    return (2, term.lexical, term.lang or "", term.datatype.value if term.datatype else "")


def _triple_key(t: Triple) -> tuple:
    return (_term_key(t[0]), t[1].value, _term_key(t[2]))


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_PN_LOCAL = r"[A-Za-z0-9_][A-Za-z0-9_.\-]*"
_TOKEN_SPECS = [
    ("IRIREF", re.compile(r"<([^<>\"{}|^`\\\s]*)>")),
    ("PREFIX_DIRECTIVE", re.compile(r"@prefix\b")),
    ("BASE_DIRECTIVE", re.compile(r"@base\b")),
    ("BLANK", re.compile(r"_:(" + _PN_LOCAL + r")")),
    ("PNAME", re.compile(r"([A-Za-z][A-Za-z0-9_\-]*)?:(" + _PN_LOCAL + r")?")),
    ("LONG_STRING", re.compile(r'"""((?:[^"\\]|\\.|"(?!""))*)"""', re.S)),
    ("STRING", re.compile(r'"((?:[^"\\\n]|\\.)*)"')),
    ("LANGTAG", re.compile(r"@([A-Za-z]+(?:-[A-Za-z0-9]+)*)")),
    ("NUMBER", re.compile(r"[+-]?(?:\d+\.\d+(?:[eE][+-]?\d+)?|\.\d+|\d+(?:[eE][+-]?\d+)?)")),
    ("DTYPE", re.compile(r"\^\^")),
    ("PUNCT", re.compile(r"[.;,()\[\]]")),
    ("KEYWORD", re.compile(r"\b(a|true|false)\b")),
]
_UNSUPPORTED_STARTS = {
    "{": "named graphs / embedded formulas are not supported",
    "}": "named graphs / embedded formulas are not supported",
    "<<": "quoted triples are not supported",
}

_ESCAPES = {
    "t": "\t",
    "n": "\n",
    "r": "\r",
    "b": "\b",
    "f": "\f",
    '"': '"',
    "'": "'",
    "\\": "\\",
}


@dataclass
class _Token:
    kind: str
    value: str
    line: int
    col: int
    extra: str | None = None


class _Lexer:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, category: str, message: str, line: int | None = None, col: int | None = None):
        raise TurtleParseError(
            self.source, line or self.line, col or self.col, category, message
        )

    def _advance(self, consumed: str):
        newlines = consumed.count("\n")
        if newlines:
            self.line += newlines
            self.col = len(consumed) - consumed.rfind("\n")
        else:
            self.col += len(consumed)
        self.pos += len(consumed)

    def _skip_ws_and_comments(self):
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self._advance(ch)
            elif ch == "#":
                end = self.text.find("\n", self.pos)
                end = len(self.text) if end == -1 else end
                self._advance(self.text[self.pos : end])
            else:
                return

    def tokens(self) -> list[_Token]:
        out = []
        while True:
            self._skip_ws_and_comments()
            if self.pos >= len(self.text):
                out.append(_Token("EOF", "", self.line, self.col))
                return out
            if self.text.startswith("<<", self.pos):
                self.error("unsupported", _UNSUPPORTED_STARTS["<<"])
            ch = self.text[self.pos]
            if ch in _UNSUPPORTED_STARTS:
                self.error("unsupported", _UNSUPPORTED_STARTS[ch])
            tok = self._match_one()
            if tok is None:
                self.error("syntax", f"unexpected character {ch!r}")
            out.append(tok)

    def _match_one(self) -> _Token | None:
        line, col = self.line, self.col
        for kind, pattern in _TOKEN_SPECS:
            m = pattern.match(self.text, self.pos)
            if not m:
                continue
            raw = m.group(0)
            if kind == "IRIREF":
                self._advance(raw)
                return _Token("IRIREF", m.group(1), line, col)
            if kind in ("PREFIX_DIRECTIVE", "BASE_DIRECTIVE", "DTYPE", "PUNCT"):
                self._advance(raw)
                return _Token(kind, raw, line, col)
            if kind == "BLANK":
                self._advance(raw)
                return _Token("BLANK", m.group(1), line, col)
            if kind == "PNAME":
                self._advance(raw)
                return _Token("PNAME", m.group(1) or "", line, col, extra=m.group(2) or "")
            if kind in ("LONG_STRING", "STRING"):
                self._advance(raw)
                return _Token("STRING", self._unescape(m.group(1), line, col), line, col)
            if kind == "LANGTAG":
                self._advance(raw)
                return _Token("LANGTAG", m.group(1), line, col)
            if kind == "NUMBER":
                self._advance(raw)
                return _Token("NUMBER", raw, line, col)
            if kind == "KEYWORD":
                self._advance(raw)
                return _Token("KEYWORD", raw, line, col)
        # '@' that is not @prefix/@base/@lang: some other directive
        if self.text[self.pos] == "@":
            self.error("unsupported", "unsupported directive")
        return None

    def _unescape(self, body: str, line: int, col: int) -> str:
        if "\\" not in body:
            return body
        out = []
        i = 0
        while i < len(body):
            ch = body[i]
            if ch != "\\":
                out.append(ch)
                i += 1
                continue
            if i + 1 >= len(body):
                self.error("syntax", "dangling escape in string", line, col)
            esc = body[i + 1]
            if esc in _ESCAPES:
                out.append(_ESCAPES[esc])
                i += 2
            elif esc == "u" and i + 6 <= len(body):
                out.append(chr(int(body[i + 2 : i + 6], 16)))
                i += 6
            elif esc == "U" and i + 10 <= len(body):
                out.append(chr(int(body[i + 2 : i + 10], 16)))
                i += 10
            else:
                self.error("syntax", f"bad string escape \\{esc}", line, col)
        return "".join(out)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token], source: str, reserved_labels: set[str]):
        self.tokens = tokens
        self.source = source
        self.pos = 0
        self.prefixes: dict[str, str] = {}
        self.base: str | None = None
        self.base_seen = False
        self.triples: list[Triple] = []
        self.reserved = reserved_labels
        self.anon_counter = 0
        self.anon_labels: set[str] = set()

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, tok: _Token, category: str, message: str):
        raise TurtleParseError(self.source, tok.line, tok.col, category, message)

    def expect_punct(self, value: str):
        tok = self.next()
        if tok.kind != "PUNCT" or tok.value != value:
            self.error(tok, "syntax", f"expected {value!r}, found {tok.value!r}")

    def fresh_blank(self) -> BlankNode:
        while True:
            label = f"b{self.anon_counter}"
            self.anon_counter += 1
            if label not in self.reserved:
                self.anon_labels.add(label)
                return BlankNode(label)

    def resolve_iriref(self, tok: _Token) -> Iri:
        value = tok.value
        if re.match(r"^[A-Za-z][A-Za-z0-9+.\-]*:", value):
            return Iri(value)
        if self.base is None:
            self.error(tok, "syntax", f"relative IRI <{value}> without @base")
        from urllib.parse import urljoin

        return Iri(urljoin(self.base, value))

    def resolve_pname(self, tok: _Token) -> Iri:
        prefix = tok.value
        if prefix not in self.prefixes:
            self.error(tok, "unresolved-prefix", f"prefix {prefix!r} is not declared")
        return Iri(self.prefixes[prefix] + (tok.extra or ""))

    def parse(self) -> None:
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                return
            if tok.kind == "PREFIX_DIRECTIVE":
                self.parse_prefix()
            elif tok.kind == "BASE_DIRECTIVE":
                self.parse_base()
            else:
                self.parse_triples()

    def parse_prefix(self):
        self.next()
        tok = self.next()
        if tok.kind != "PNAME" or tok.extra:
            self.error(tok, "syntax", "expected prefix name ending in ':'")
        ns = self.next()
        if ns.kind != "IRIREF":
            self.error(ns, "syntax", "expected namespace IRI")
        self.prefixes[tok.value] = self.resolve_iriref(ns).value
        self.expect_punct(".")

    def parse_base(self):
        tok = self.next()
        if self.base_seen:
            self.error(tok, "unsupported", "multiple @base directives")
        self.base_seen = True
        ns = self.next()
        if ns.kind != "IRIREF":
            self.error(ns, "syntax", "expected base IRI")
        self.base = ns.value
        self.expect_punct(".")

    def parse_triples(self):
        subject = self.parse_subject()
        self.parse_predicate_object_list(subject)
        self.expect_punct(".")

    def parse_subject(self) -> Term:
        tok = self.peek()
        if tok.kind == "IRIREF":
            return self.resolve_iriref(self.next())
        if tok.kind == "PNAME":
            return self.resolve_pname(self.next())
        if tok.kind == "BLANK":
            return BlankNode(self.next().value)
        if tok.kind == "PUNCT" and tok.value == "[":
            return self.parse_blank_node_property_list()
        if tok.kind == "PUNCT" and tok.value == "(":
            return self.parse_collection()
        if tok.kind in ("STRING", "NUMBER") or (
            tok.kind == "KEYWORD" and tok.value in ("true", "false")
        ):
            self.error(tok, "syntax", "a literal cannot be a subject")
        self.error(tok, "syntax", f"expected subject, found {tok.value!r}")

    def parse_predicate_object_list(self, subject: Term):
        while True:
            predicate = self.parse_predicate()
            self.parse_object_list(subject, predicate)
            tok = self.peek()
            if tok.kind == "PUNCT" and tok.value == ";":
                self.next()
                nxt = self.peek()
                # trailing ';' before '.' or ']'
                if nxt.kind == "PUNCT" and nxt.value in (".", "]"):
                    return
                continue
            return

    def parse_predicate(self) -> Iri:
        tok = self.next()
        if tok.kind == "KEYWORD" and tok.value == "a":
            return RDF_TYPE
        if tok.kind == "IRIREF":
            return self.resolve_iriref(tok)
        if tok.kind == "PNAME":
            return self.resolve_pname(tok)
        self.error(tok, "syntax", f"expected predicate, found {tok.value!r}")

    def parse_object_list(self, subject: Term, predicate: Iri):
        while True:
            obj = self.parse_object()
            self.triples.append((subject, predicate, obj))
            tok = self.peek()
            if tok.kind == "PUNCT" and tok.value == ",":
                self.next()
                continue
            return

    def parse_object(self) -> Term:
        tok = self.peek()
        if tok.kind == "IRIREF":
            return self.resolve_iriref(self.next())
        if tok.kind == "PNAME":
            return self.resolve_pname(self.next())
        if tok.kind == "BLANK":
            return BlankNode(self.next().value)
        if tok.kind == "PUNCT" and tok.value == "[":
            return self.parse_blank_node_property_list()
        if tok.kind == "PUNCT" and tok.value == "(":
            return self.parse_collection()
        if tok.kind == "STRING":
            return self.parse_literal()
        if tok.kind == "NUMBER":
            self.next()
            dtype = "decimal" if "." in tok.value or "e" in tok.value.lower() else "integer"
            if "e" in tok.value.lower():
                dtype = "double"
            return Literal(tok.value, datatype=Iri(XSD_NS + dtype))
        if tok.kind == "KEYWORD" and tok.value in ("true", "false"):
            self.next()
            return Literal(tok.value, datatype=Iri(XSD_NS + "boolean"))
        self.error(tok, "syntax", f"expected object, found {tok.value!r}")

    def parse_literal(self) -> Literal:
        tok = self.next()
        nxt = self.peek()
        if nxt.kind == "LANGTAG":
            self.next()
            return Literal(tok.value, lang=nxt.value)
        if nxt.kind == "DTYPE":
            self.next()
            dt = self.next()
            if dt.kind == "IRIREF":
                return Literal(tok.value, datatype=self.resolve_iriref(dt))
            if dt.kind == "PNAME":
                return Literal(tok.value, datatype=self.resolve_pname(dt))
            self.error(dt, "syntax", "expected datatype IRI after ^^")
        return Literal(tok.value)

    def parse_blank_node_property_list(self) -> BlankNode:
        self.expect_punct("[")
        node = self.fresh_blank()
        tok = self.peek()
        if not (tok.kind == "PUNCT" and tok.value == "]"):
            self.parse_predicate_object_list(node)
        self.expect_punct("]")
        return node

    def parse_collection(self) -> Term:
        self.expect_punct("(")
        items = []
        while True:
            tok = self.peek()
            if tok.kind == "PUNCT" and tok.value == ")":
                self.next()
                break
            if tok.kind == "EOF":
                self.error(tok, "syntax", "unterminated collection")
            items.append(self.parse_object())
        if not items:
            return RDF_NIL
        head = self.fresh_blank()
        node = head
        for i, item in enumerate(items):
            self.triples.append((node, RDF_FIRST, item))
            if i + 1 < len(items):
                nxt = self.fresh_blank()
                self.triples.append((node, RDF_REST, nxt))
                node = nxt
            else:
                self.triples.append((node, RDF_REST, RDF_NIL))
        return head


def parse_turtle(text: str, source_name: str = "<string>") -> OntologyGraph:
    """Parse a Turtle document into an immutable ``OntologyGraph``.

    Anonymous blank nodes receive deterministic ``b0, b1, ...`` labels in
    document order (skipping any label written in the document), so the
    same bytes always parse to the identical graph.
    """
    reserved = set(re.findall(r"_:(" + _PN_LOCAL + r")", text))
    lexer = _Lexer(text, source_name)
    parser = _Parser(lexer.tokens(), source_name, reserved)
    parser.parse()
    return OntologyGraph(
        triples=frozenset(parser.triples),
        prefixes=dict(parser.prefixes),
        source_name=source_name,
        base=parser.base,
        anon_labels=frozenset(parser.anon_labels),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _escape_literal(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def _format_iri(iri: Iri, prefixes: dict[str, str]) -> str:
    if iri == RDF_TYPE:
        for prefix, ns in prefixes.items():
            if ns == RDF_NS:
                return f"{prefix}:type"
    best = None
    for prefix, ns in sorted(prefixes.items()):
        if iri.value.startswith(ns) and ns:
            local = iri.value[len(ns):]
            if re.fullmatch(_PN_LOCAL, local) and (best is None or len(ns) > len(best[1])):
                best = (prefix, ns, local)
    if best:
        return f"{best[0]}:{best[2]}"
    return f"<{iri.value}>"


def _format_literal(lit: Literal, prefixes: dict[str, str]) -> str:
    body = f'"{_escape_literal(lit.lexical)}"'
    if lit.lang:
        return f"{body}@{lit.lang}"
    if lit.datatype:
        return f"{body}^^{_format_iri(lit.datatype, prefixes)}"
    return body


def _format_term(term: Term, prefixes: dict[str, str]) -> str:
    if isinstance(term, Iri):
        return _format_iri(term, prefixes)
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    return _format_literal(term, prefixes)


def serialize_full(graph: OntologyGraph) -> str:
    """Deterministic whole-graph Turtle rendering, round-trippable by ``parse_turtle``.

    Blank nodes are written with explicit ``_:label`` syntax; collections
    stay in their expanded first/rest form.
    """
    lines = []
    for prefix, ns in sorted(graph.prefixes.items()):
        lines.append(f"@prefix {prefix}: <{ns}> .")
    if lines:
        lines.append("")
    by_subject: dict[Term, list[Triple]] = {}
    for t in graph.triples:
        by_subject.setdefault(t[0], []).append(t)
    for subject in sorted(by_subject, key=_term_key):
        rows = sorted(by_subject[subject], key=_triple_key)
        subj_text = _format_term(subject, graph.prefixes)
        parts = [
            f"{_format_iri(p, graph.prefixes)} {_format_term(o, graph.prefixes)}"
            for _, p, o in rows
        ]
        lines.append(f"{subj_text} " + " ;\n    ".join(parts) + " .")
    return "\n".join(lines) + "\n"


def _is_list_node(graph: OntologyGraph, node: BlankNode) -> bool:
    preds = {p for s, p, _ in graph.triples if s == node}
    return bool(preds) and preds <= {RDF_FIRST, RDF_REST, RDF_TYPE}


def _list_items(graph: OntologyGraph, node: Term) -> list[Term] | None:
    items = []
    seen = set()
    while node != RDF_NIL:
        if not isinstance(node, BlankNode) or node in seen:
            return None
        seen.add(node)
        firsts = graph.objects(node, RDF_FIRST)
        rests = graph.objects(node, RDF_REST)
        if len(firsts) != 1 or len(rests) != 1:
            return None
        items.append(firsts[0])
        node = rests[0]
    return items


def _blank_closure(graph: OntologyGraph, entity: Term) -> set[BlankNode]:
    closure: set[BlankNode] = set()
    stack = [o for _, _, o in graph.subject_triples(entity) if isinstance(o, BlankNode)]
    while stack:
        node = stack.pop()
        if node in closure:
            continue
        closure.add(node)
        for _, _, o in graph.subject_triples(node):
            if isinstance(o, BlankNode):
                stack.append(o)
    return closure


def subject_closure(graph: OntologyGraph, entity: Term) -> frozenset[Triple]:
    """All triples of ``entity`` plus those of blank nodes reachable from it."""
    nodes: list[Term] = [entity] + sorted(_blank_closure(graph, entity), key=_term_key)
    out = []
    for node in nodes:
        out.extend(graph.subject_triples(node))
    return frozenset(out)


def serialize_snippet(graph: OntologyGraph, entity: Iri, with_prefixes: bool = False) -> str:
    """Render the Turtle fragment for one subject, blank-node closure included.

    Anonymous blank nodes referenced once are inlined with ``[ ... ]`` /
    ``( ... )`` syntax; predicates are sorted by IRI so output is stable.
    """
    if not graph.has_subject(entity):
        raise KeyError(f"unknown entity {entity.value!r} in {graph.source_name}")
    closure = _blank_closure(graph, entity)
    refs: dict[BlankNode, int] = {n: 0 for n in closure}
    for s, _, o in graph.triples:
        if isinstance(o, BlankNode) and o in refs:
            refs[o] += 1

    inlined: set[BlankNode] = set()

    def render_object(o: Term, indent: str, stack: tuple[BlankNode, ...]) -> str:
        if isinstance(o, BlankNode) and o in closure and o not in stack:
            single_ref = refs.get(o, 0) <= 1 and o.label in graph.anon_labels
            if single_ref:
                items = _list_items(graph, o) if _is_list_node(graph, o) else None
                if items is not None:
                    inlined.add(o)
                    rest = o
                    while isinstance(rest, BlankNode) and rest in closure:
                        inlined.add(rest)
                        nxt = graph.value(rest, RDF_REST)
                        if not isinstance(nxt, BlankNode):
                            break
                        rest = nxt
                    body = " ".join(
                        render_object(i, indent, stack + (o,)) for i in items
                    )
                    return f"( {body} )"
                inlined.add(o)
                return render_block(o, indent + "    ", stack + (o,))
        return _format_term(o, graph.prefixes)

    def render_block(node: BlankNode, indent: str, stack: tuple[BlankNode, ...]) -> str:
        rows = graph.subject_triples(node)
        parts = [
            f"{_format_iri(p, graph.prefixes)} {render_object(o, indent, stack)}"
            for _, p, o in rows
        ]
        sep = f" ;\n{indent}  "
        return "[ " + sep.join(parts) + " ]"

    rows = graph.subject_triples(entity)
    subj_text = _format_term(entity, graph.prefixes)
    indent = " " * (len(subj_text) + 1)
    parts = [
        f"{_format_iri(p, graph.prefixes)} {render_object(o, indent, ())}"
        for _, p, o in rows
    ]
    lines = [f"###  {entity.value}"]
    lines.append(f"{subj_text} " + f" ;\n{indent}".join(parts) + " .")
    for node in sorted(closure - inlined, key=_term_key):
        rows = graph.subject_triples(node)
        parts = [
            f"{_format_iri(p, graph.prefixes)} "
            f"{_format_term(o, graph.prefixes)}"
            for _, p, o in rows
        ]
        lines.append("_:%s " % node.label + " ;\n    ".join(parts) + " .")
    body = "\n".join(lines) + "\n"
    if with_prefixes:
        header = "".join(
            f"@prefix {prefix}: <{ns}> .\n" for prefix, ns in sorted(graph.prefixes.items())
        )
        return header + "\n" + body
    return body


# ---------------------------------------------------------------------------
# Graph isomorphism (desk-scale, blank-node renaming only)
# ---------------------------------------------------------------------------


def graphs_isomorphic(a: OntologyGraph, b: OntologyGraph) -> bool:
    """True when the triple sets are equal up to a blank-node bijection."""
    if len(a.triples) != len(b.triples):
        return False
    ground_a = {t for t in a.triples if _is_ground(t)}
    ground_b = {t for t in b.triples if _is_ground(t)}
    if ground_a != ground_b:
        return False
    rest_a = sorted(a.triples - ground_a, key=_triple_key)
    rest_b = b.triples - ground_b
    nodes_a = sorted({n.label for t in rest_a for n in t if isinstance(n, BlankNode)})
    nodes_b = sorted({n.label for t in rest_b for n in t if isinstance(n, BlankNode)})
    if len(nodes_a) != len(nodes_b):
        return False

    def compatible(mapping: dict[str, str]) -> bool:
        used = set(mapping.values())
        remaining = set(nodes_b) - used
        return _extend(mapping, 0, remaining)

    def _map_term(term: Term, mapping: dict[str, str]) -> Term | None:
        if isinstance(term, BlankNode):
            label = mapping.get(term.label)
            return BlankNode(label) if label else None
        return term

    def _extend(mapping: dict[str, str], idx: int, remaining: set[str]) -> bool:
        if idx == len(nodes_a):
            mapped = {
                (_map_term(s, mapping), p, _map_term(o, mapping)) for s, p, o in rest_a
            }
            return mapped == rest_b
        label = nodes_a[idx]
        for candidate in sorted(remaining):
            mapping[label] = candidate
            if _partial_ok(mapping):
                if _extend(mapping, idx + 1, remaining - {candidate}):
                    return True
            del mapping[label]
        return False

    def _partial_ok(mapping: dict[str, str]) -> bool:
        for s, p, o in rest_a:
            ms = _map_term(s, mapping)
            mo = _map_term(o, mapping)
            if ms is None or mo is None:
                continue
            if (ms, p, mo) not in rest_b:
                return False
        return True

    return compatible({})


def _is_ground(t: Triple) -> bool:
    return not any(isinstance(x, BlankNode) for x in t)


# ---------------------------------------------------------------------------
# Entity inventory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntityRecord:
    iri: Iri
    kind: str
    label: str | None = None
    comment: str | None = None
    domains: frozenset[Iri] = frozenset()
    ranges: frozenset[Iri] = frozenset()
    inverse_of: Iri | None = None
    super_classes: frozenset[Iri] = frozenset()

    @property
    def name(self) -> str:
        return local_name(self.iri)


@dataclass(frozen=True)
class EntityInventory:
    entities: tuple[EntityRecord, ...]
    diagnostics: tuple[str, ...] = ()

    def find(self, name: str) -> EntityRecord | None:
        for record in self.entities:
            if record.name == name:
                return record
        return None

    def by_kind(self, kind: str) -> list[EntityRecord]:
        return [r for r in self.entities if r.kind == kind]

    def names(self) -> set[str]:
        return {r.name for r in self.entities}


def _literal_text(term: Term | None) -> str | None:
    return term.lexical if isinstance(term, Literal) else None


def _flatten_domain(graph: OntologyGraph, obj: Term, diagnostics: list[str]) -> list[Iri]:
    if isinstance(obj, Iri):
        return [obj]
    if isinstance(obj, BlankNode):
        union_head = graph.value(obj, OWL_UNION_OF)
        if union_head is not None:
            items = _list_items(graph, union_head)
            if items is not None:
                out = []
                for item in items:
                    if isinstance(item, Iri):
                        out.append(item)
                    else:
                        diagnostics.append(
                            f"non-IRI member in union for blank node _:{obj.label}; skipped"
                        )
                return out
        diagnostics.append(
            f"blank-node domain/range without owl:unionOf on _:{obj.label}; skipped"
        )
    return []


def build_inventory(graph: OntologyGraph) -> EntityInventory:
    """One record per typed entity; union domains/ranges flattened to members."""
    diagnostics: list[str] = []
    records: list[EntityRecord] = []
    kinds_by_iri: dict[Iri, list[str]] = {}
    for type_iri, kind in _TYPE_KINDS.items():
        for subject in graph.subjects_of_type(type_iri):
            kinds_by_iri.setdefault(subject, []).append(kind)

    for iri in sorted(kinds_by_iri):
        kinds = sorted(set(kinds_by_iri[iri]))
        if len(kinds) > 1:
            diagnostics.append(
                f"punning: {iri.value} is typed as {' and '.join(kinds)}; keeping both roles"
            )
        for kind in kinds:
            label = _literal_text(graph.value(iri, RDFS_LABEL))
            comment = _literal_text(graph.value(iri, RDFS_COMMENT))
            domains: list[Iri] = []
            ranges: list[Iri] = []
            supers: list[Iri] = []
            inverse = None
            if kind == CLASS_KIND:
                supers = [o for o in graph.objects(iri, RDFS_SUBCLASSOF) if isinstance(o, Iri)]
            else:
                for obj in graph.objects(iri, RDFS_DOMAIN):
                    domains.extend(_flatten_domain(graph, obj, diagnostics))
                for obj in graph.objects(iri, RDFS_RANGE):
                    ranges.extend(_flatten_domain(graph, obj, diagnostics))
                inv = graph.value(iri, OWL_INVERSE_OF)
                inverse = inv if isinstance(inv, Iri) else None
            records.append(
                EntityRecord(
                    iri=iri,
                    kind=kind,
                    label=label,
                    comment=comment,
                    domains=frozenset(domains),
                    ranges=frozenset(ranges),
                    inverse_of=inverse,
                    super_classes=frozenset(supers),
                )
            )
    records.sort(key=lambda r: (r.iri.value, r.kind))
    return EntityInventory(entities=tuple(records), diagnostics=tuple(diagnostics))


def find_by_local_name(graph: OntologyGraph, name: str) -> Iri | None:
    """Subject IRI whose local name matches, preferring typed entities."""
    candidates = [iri for iri in graph.subject_iris() if local_name(iri) == name]
    if not candidates:
        return None
    typed = [
        iri
        for iri in candidates
        if any(graph.objects(iri, RDF_TYPE))
    ]
    return (typed or candidates)[0]
