"""Symbolic assembly of detected predicates into a connected rule body.

Detected classes and properties are wired into a conjunction using the
inventory's domain/range/subclass axioms: pick a root class, greedily
attach properties whose domain fits an already-typed variable (falling
back to the declared inverse with swapped arguments), then attach the
remaining classes as unary atoms.  Whatever cannot be connected ends up
in ``unplaced`` instead of being forced in.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .rdf import (
    CLASS_KIND,
    EntityInventory,
    EntityRecord,
    Iri,
    local_name,
)
from .rules import AlignmentRule, Atom, BIDIRECTIONAL

_VARIABLE_NAMES = ("x", "y", "z", "u", "v", "w")


class AssemblyError(Exception):
    pass


@dataclass(frozen=True)
class AssemblyResult:
    body: tuple[Atom, ...]
    unplaced: frozenset[str]
    root_variable: str
    variable_classes: dict[str, Iri]


@dataclass(frozen=True)
class ComposedRule:
    rule: AlignmentRule
    incomplete: bool
    unplaced: frozenset[str]


def _variable_name(index: int) -> str:
    if index < len(_VARIABLE_NAMES):
        return _VARIABLE_NAMES[index]
    return f"v{index}"


def _superclass_closure(inventory: EntityInventory) -> dict[Iri, set[Iri]]:
    direct: dict[Iri, set[Iri]] = {}
    for record in inventory.entities:
        if record.kind == CLASS_KIND:
            direct.setdefault(record.iri, set()).update(record.super_classes)
    closure: dict[Iri, set[Iri]] = {}
    for iri in direct:
        seen: set[Iri] = set()
        stack = list(direct[iri])
        while stack:
            parent = stack.pop()
            if parent in seen:
                continue
            seen.add(parent)
            stack.extend(direct.get(parent, ()))
        closure[iri] = seen
    return closure


def _compatible(a: Iri | None, b: Iri | None, closure: dict[Iri, set[Iri]]) -> bool:
    """Equal classes, or connected by subclass edges in either direction."""
    if a is None or b is None:
        return False
    if a == b:
        return True
    return b in closure.get(a, set()) or a in closure.get(b, set())


def _resolve(detected: set[str], inventory: EntityInventory) -> dict[str, EntityRecord]:
    records = {}
    missing = []
    for name in sorted(detected):
        record = inventory.find(name)
        if record is None:
            missing.append(name)
        else:
            records[name] = record
    if missing:
        raise AssemblyError(f"unresolvable predicate names: {', '.join(missing)}")
    return records


def assemble(detected: set[str], inventory: EntityInventory) -> AssemblyResult:
    if not detected:
        raise AssemblyError("nothing to assemble: empty detection set")
    records = _resolve(detected, inventory)
    closure = _superclass_closure(inventory)
    classes = {n: r for n, r in records.items() if r.kind == CLASS_KIND}
    properties = {n: r for n, r in records.items() if r.kind != CLASS_KIND}

    body: list[Atom] = []
    var_classes: dict[str, Iri] = {}
    placed_classes: set[str] = set()
    next_var = 0

    def new_var(cls: Iri | None) -> str:
        nonlocal next_var
        name = _variable_name(next_var)
        next_var += 1
        if cls is not None:
            var_classes[name] = cls
        return name

    # Root: the detected class serving as domain of the most detected
    # properties (lexicographic tie-break).  With no detected classes the
    # root variable takes the first property's domain class instead.
    root_var = None
    if classes:
        def domain_count(name: str) -> int:
            iri = classes[name].iri
            return sum(1 for p in properties.values() if iri in p.domains)

        root_name = sorted(classes, key=lambda n: (-domain_count(n), n))[0]
        root_var = new_var(classes[root_name].iri)
        body.append(Atom(root_name, (root_var,)))
        placed_classes.add(root_name)
    else:
        for name in sorted(properties):
            domains = sorted(properties[name].domains)
            if domains:
                root_var = new_var(domains[0])
                break
        if root_var is None:
            return AssemblyResult(
                body=(), unplaced=frozenset(detected), root_variable="",
                variable_classes={},
            )

    def pick_range(ranges: frozenset[Iri]) -> Iri | None:
        return sorted(ranges)[0] if ranges else None

    def try_attach(record: EntityRecord) -> Atom | None:
        # forward: domain fits an existing variable, range types a new one
        for var in sorted(var_classes, key=_var_order):
            for domain in sorted(record.domains):
                if _compatible(domain, var_classes[var], closure):
                    fresh = new_var(pick_range(record.ranges))
                    return Atom(record.name, (var, fresh))
        # inverse: the declared inverse fits forward; keep the original
        # predicate name with swapped argument order
        if record.inverse_of is not None:
            inverse = inventory.find(local_name(record.inverse_of))
            if inverse is not None:
                for var in sorted(var_classes, key=_var_order):
                    for domain in sorted(inverse.domains):
                        if _compatible(domain, var_classes[var], closure):
                            fresh = new_var(pick_range(inverse.ranges))
                            return Atom(record.name, (fresh, var))
        return None

    def _var_order(var: str) -> int:
        for i, name in enumerate(_VARIABLE_NAMES):
            if var == name:
                return i
        return int(var[1:]) + len(_VARIABLE_NAMES)

    pending = sorted(properties)
    while True:
        attached = None
        for name in pending:
            atom = try_attach(properties[name])
            if atom is not None:
                body.append(atom)
                attached = name
                break
        if attached is None:
            break
        pending.remove(attached)

    for name in sorted(classes):
        if name in placed_classes:
            continue
        target = None
        for var in sorted(var_classes, key=_var_order):
            if _compatible(classes[name].iri, var_classes[var], closure):
                target = var
                break
        if target is not None:
            body.append(Atom(name, (target,)))
            placed_classes.add(name)

    unplaced = set(pending) | (set(classes) - placed_classes)
    # a lone root variable with nothing attached means the detection set
    # never actually connected to anything
    if not body and root_var is not None:
        unplaced = set(detected)
    return AssemblyResult(
        body=tuple(body),
        unplaced=frozenset(unplaced),
        root_variable=root_var or "",
        variable_classes=dict(var_classes),
    )


def compose_rule(
    lhs_atoms: tuple[Atom, ...],
    assembly: AssemblyResult,
    rule_id: str = "",
) -> ComposedRule:
    rule = AlignmentRule(
        id=rule_id,
        direction=BIDIRECTIONAL,
        lhs=tuple(lhs_atoms),
        rhs=assembly.body,
    )
    incomplete = bool(assembly.unplaced) or not assembly.body
    return ComposedRule(rule=rule, incomplete=incomplete, unplaced=assembly.unplaced)


# ---------------------------------------------------------------------------
# Isomorphism and the brute-force placement oracle used by the tests
# ---------------------------------------------------------------------------


def bodies_isomorphic(a: tuple[Atom, ...], b: tuple[Atom, ...]) -> bool:
    """Equal atom multisets under some variable renaming (order-insensitive)."""
    if len(a) != len(b):
        return False
    vars_a = sorted({v for atom in a for v in atom.variables})
    vars_b = sorted({v for atom in b for v in atom.variables})
    if len(vars_a) != len(vars_b):
        return False

    def normalized(atoms: tuple[Atom, ...], mapping: dict[str, str]):
        out = []
        for atom in atoms:
            if atom.builtin:
                out.append((atom.predicate, (mapping[atom.args[0]], atom.args[1]), True))
            else:
                out.append((atom.predicate, tuple(mapping[v] for v in atom.args), False))
        return sorted(out)

    identity = {v: v for v in vars_b}
    target = normalized(b, identity)
    from itertools import permutations

    for perm in permutations(vars_b):
        mapping = dict(zip(vars_a, perm))
        if normalized(a, mapping) == target:
            return True
    return False


def rules_isomorphic(a: AlignmentRule, b: AlignmentRule) -> bool:
    return (
        a.direction == b.direction
        and bodies_isomorphic(a.lhs, b.lhs)
        and bodies_isomorphic(a.rhs, b.rhs)
    )


def max_placement_size(
    detected: set[str], inventory: EntityInventory, max_variables: int = 4
) -> int:
    """Exhaustive search for the largest placeable subset (test oracle).

    Enumerates variable typings over inventory classes plus property
    ranges and checks every subset for a connected, compatible placement.
    Exponential; intended for <= 4 detected predicates.
    """
    records = _resolve(detected, inventory)
    closure = _superclass_closure(inventory)
    class_pool: set[Iri] = {r.iri for r in inventory.entities if r.kind == CLASS_KIND}
    for record in records.values():
        class_pool |= record.domains | record.ranges
        if record.inverse_of is not None:
            inverse = inventory.find(local_name(record.inverse_of))
            if inverse is not None:
                class_pool |= inverse.domains | inverse.ranges
    pool = sorted(class_pool)

    names = sorted(records)
    best = 0
    n_vars = min(max_variables, len(names) + 1)

    def placements_ok(subset: list[str], typing: tuple[Iri, ...]) -> bool:
        variables = [f"v{i}" for i in range(len(typing))]
        var_class = dict(zip(variables, typing))

        def atom_options(name: str) -> list[tuple[str, ...]]:
            record = records[name]
            options = []
            if record.kind == CLASS_KIND:
                for var in variables:
                    if _compatible(record.iri, var_class[var], closure):
                        options.append((var,))
                return options
            for a, b in product(variables, repeat=2):
                forward = any(
                    _compatible(d, var_class[a], closure) for d in record.domains
                ) and (
                    not record.ranges
                    or any(_compatible(r, var_class[b], closure) for r in record.ranges)
                )
                if forward:
                    options.append((a, b))
                    continue
                if record.inverse_of is not None:
                    inverse = inventory.find(local_name(record.inverse_of))
                    if inverse is not None:
                        backward = any(
                            _compatible(d, var_class[b], closure) for d in inverse.domains
                        ) and (
                            not inverse.ranges
                            or any(
                                _compatible(r, var_class[a], closure)
                                for r in inverse.ranges
                            )
                        )
                        if backward:
                            options.append((a, b))
            return options

        def connected(assignment: list[tuple[str, ...]]) -> bool:
            if not assignment:
                return False
            groups = [set(args) for args in assignment]
            component = set(groups[0])
            rest = groups[1:]
            changed = True
            while changed:
                changed = False
                for grp in list(rest):
                    if grp & component:
                        component |= grp
                        rest.remove(grp)
                        changed = True
            return not rest

        all_options = [atom_options(name) for name in subset]
        if any(not opts for opts in all_options):
            return False
        for combo in product(*all_options):
            if connected(list(combo)):
                return True
        return False

    from itertools import combinations

    for size in range(len(names), 0, -1):
        if size <= best:
            break
        for subset in combinations(names, size):
            found = False
            for var_count in range(1, n_vars + 1):
                for typing in product(pool, repeat=var_count):
                    if placements_ok(list(subset), typing):
                        best = max(best, size)
                        found = True
                        break
                if found:
                    break
            if found:
                break
    return best
