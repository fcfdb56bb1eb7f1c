# SPDX-License-Identifier: GPL-2.0+
"""The rule library: admissible graph transformation actions.

Logical rules only extend the fact set (and intern the edges they conclude),
constructors only extend the graph. Every rule has a check() that either
accepts an operand tuple or raises RuleError, and a candidates() generator that
yields a superset of the accepted tuples, so legal_actions() and
apply_action() always agree.
"""
import dataclasses
from typing import (Callable, Dict, FrozenSet, Iterable, Iterator, List,
                    Optional, Sequence, Tuple)

from .hypergraph import (EDGE, NODE, OPERATORS, E, EdgeType, EntityRef,
                         Hyperedge, MathState, N, NodeType, RuleError,
                         StateBuilder, TypingError, commutes)

ANY = "*"


@dataclasses.dataclass(frozen=True)
class Action:
    op: str
    operands: Tuple[EntityRef, ...]

    def __str__(self):
        return f"{self.op}({','.join(str(I) for I in self.operands)})"

    @classmethod
    def parse(cls, text: str) -> "Action":
        text = text.strip()
        if not text.endswith(")") or "(" not in text:
            raise ValueError(f"Invalid action {text!r}")
        op, _, rest = text[:-1].partition("(")
        if not op.isidentifier():
            raise ValueError(f"Invalid action {text!r}")
        operands = tuple(
            EntityRef.parse(I.strip()) for I in rest.split(",") if I.strip())
        return cls(op, operands)


def _fact(state: MathState, ref: EntityRef, op: Optional[str] = None,
          what: str = "operand") -> Hyperedge:
    if ref.kind != EDGE or ref.id not in state.edges:
        raise RuleError(f"{what} {ref} is not an edge")
    if ref.id not in state.facts:
        raise RuleError(f"{what} {ref} is not a fact")
    e = state.edge(ref.id)
    if op is not None and e.operator != op:
        raise RuleError(f"{what} {ref} is not an {op} fact")
    return e


def _not_fact(state: MathState, edge_type: EdgeType, op: str,
              args: Sequence[EntityRef]):
    eid = state.find_edge(edge_type, op, args)
    if eid is not None and eid in state.facts:
        raise RuleError(f"{op}({','.join(map(str, args))}) is already a fact")


_NEW = EntityRef("?", -1)

Maker = Callable[[EdgeType, str, Sequence[EntityRef], FrozenSet[int]],
                 EntityRef]


def _lookup_maker(state: MathState) -> Maker:
    """Only finds existing entities, _NEW for anything that would be added"""
    def make(edge_type, op, args, bound_vars):
        if _NEW in args:
            return _NEW
        eid = state.find_edge(edge_type, op, args, bound_vars)
        if eid is None:
            return _NEW
        if edge_type == EdgeType.Constructor:
            return N(state.edge(eid).output)
        return E(eid)

    return make


def _builder_maker(b: StateBuilder) -> Maker:
    def make(edge_type, op, args, bound_vars):
        if edge_type == EdgeType.Constructor:
            return N(b.term(op, args))
        return E(b.intern_edge(edge_type, op, args, bound_vars))

    return make


def _rebuild(state: MathState, ref: EntityRef,
             rewrite: Callable[[EntityRef], Optional[EntityRef]],
             make: Maker, memo: Dict[EntityRef, EntityRef]) -> EntityRef:
    """Reconstruct the tree under ref. rewrite() may return a replacement for
    an entity, otherwise its children are rebuilt and the entity is interned
    again only if some child changed."""
    res = memo.get(ref)
    if res is not None:
        return res
    res = rewrite(ref)
    if res is None:
        if ref.kind == NODE:
            prod = state.producer(ref.id)
            if prod is None:
                res = ref
            else:
                args = tuple(
                    _rebuild(state, I, rewrite, make, memo) for I in prod.args)
                res = ref if args == prod.args else make(
                    EdgeType.Constructor, prod.operator, args, frozenset())
        else:
            e = state.edge(ref.id)
            args = tuple(
                _rebuild(state, I, rewrite, make, memo) for I in e.args)
            res = ref if args == e.args else make(e.edge_type, e.operator,
                                                  args, e.bound_vars)
    memo[ref] = res
    return res


def direct_args(state: MathState, ref: EntityRef) -> Tuple[EntityRef, ...]:
    """Arguments of an edge, or of the constructor producing a node"""
    if ref.kind == EDGE:
        return state.edge(ref.id).args
    prod = state.producer(ref.id)
    return () if prod is None else prod.args


def formula_tree(state: MathState, root: EntityRef) -> List[EntityRef]:
    """Entities reachable from root without entering quantifier bodies"""
    seen = {root}
    todo = [root]
    while todo:
        cur = todo.pop()
        if cur.kind == EDGE and state.edge(cur.id).edge_type == EdgeType.Quantifier:
            continue
        for I in direct_args(state, cur):
            if I not in seen:
                seen.add(I)
                todo.append(I)
    return sorted(seen)


def subterm_nodes(state: MathState, ref: EntityRef) -> FrozenSet[int]:
    res = set()
    todo = [ref]
    while todo:
        cur = todo.pop()
        if cur.kind == NODE:
            if cur.id in res:
                continue
            res.add(cur.id)
        todo.extend(direct_args(state, cur))
    return frozenset(res)


class Rule(object):
    name: str
    slot_kinds: Tuple[str, ...]
    constructor = False

    def __repr__(self):
        return f"<Rule {self.name}>"

    def check(self, state: MathState, operands: Tuple[EntityRef, ...],
              library: "RuleLibrary"):
        """Raise RuleError unless the operands form a legal application"""
        if len(operands) != len(self.slot_kinds):
            raise RuleError(f"{self.name} takes {len(self.slot_kinds)} "
                            f"operands, got {len(operands)}")
        for kind, ref in zip(self.slot_kinds, operands):
            if not isinstance(ref, EntityRef) or not state.has(ref):
                raise RuleError(f"{self.name} operand {ref} does not resolve")
            if kind != ANY and ref.kind != kind:
                raise RuleError(
                    f"{self.name} operand {ref} has the wrong kind")
        self._check(state, operands, library)

    def _check(self, state, operands, library):
        raise NotImplementedError()

    def fire(self, b: StateBuilder, state: MathState,
             operands: Tuple[EntityRef, ...]):
        raise NotImplementedError()

    def candidates(self, state: MathState,
                   library: "RuleLibrary") -> Iterable[Tuple[EntityRef, ...]]:
        raise NotImplementedError()


def _facts_with(state: MathState, op: str) -> List[Hyperedge]:
    return [
        state.edge(I) for I in sorted(state.facts)
        if state.edge(I).operator == op
    ]


class ModusPonens(Rule):
    """From facts A and Implies(A,B) derive B"""
    name = "ModusPonens"
    slot_kinds = (EDGE, EDGE)

    def _check(self, state, operands, library):
        a, imp = operands
        _fact(state, a, what="premise")
        e = _fact(state, imp, "Implies", what="implication")
        if e.args[0] != a:
            raise RuleError(f"{imp} does not have {a} as antecedent")
        if e.args[1].id in state.facts:
            raise RuleError(f"{e.args[1]} is already a fact")

    def fire(self, b, state, operands):
        b.assert_fact(state.edge(operands[1].id).args[1].id)

    def candidates(self, state, library):
        for e in _facts_with(state, "Implies"):
            yield (e.args[0], E(e.id))


class AndIntro(Rule):
    name = "AndIntro"
    slot_kinds = (EDGE, EDGE)

    def _check(self, state, operands, library):
        a, c = operands
        _fact(state, a)
        _fact(state, c)
        if a.id >= c.id:
            raise RuleError("AndIntro operands must be in ascending id order")
        _not_fact(state, EdgeType.Connective, "And", operands)

    def fire(self, b, state, operands):
        b.assert_fact(b.intern_edge(EdgeType.Connective, "And", operands))

    def candidates(self, state, library):
        facts = sorted(state.facts)
        for i, a in enumerate(facts):
            for c in facts[i + 1:]:
                yield (E(a), E(c))


class AndElim(Rule):
    name = "AndElim"
    slot_kinds = (EDGE, EDGE)

    def _check(self, state, operands, library):
        conj, part = operands
        e = _fact(state, conj, "And", what="conjunction")
        if part not in e.args:
            raise RuleError(f"{part} is not a conjunct of {conj}")
        if part.id in state.facts:
            raise RuleError(f"{part} is already a fact")

    def fire(self, b, state, operands):
        b.assert_fact(operands[1].id)

    def candidates(self, state, library):
        for e in _facts_with(state, "And"):
            for I in sorted(set(e.args)):
                yield (E(e.id), I)


class EqualitySymmetry(Rule):
    name = "EqualitySymmetry"
    slot_kinds = (EDGE, )

    def _check(self, state, operands, library):
        e = _fact(state, operands[0], "Equals")
        if e.args[0] == e.args[1]:
            raise RuleError("Symmetry of a reflexive equality is a no-op")
        _not_fact(state, EdgeType.Predicate, "Equals", e.args[::-1])

    def fire(self, b, state, operands):
        e = state.edge(operands[0].id)
        b.assert_fact(
            b.intern_edge(EdgeType.Predicate, "Equals", e.args[::-1]))

    def candidates(self, state, library):
        for e in _facts_with(state, "Equals"):
            yield (E(e.id), )


class EqualityTransitivity(Rule):
    """From a=b and b=c derive a=c"""
    name = "EqualityTransitivity"
    slot_kinds = (EDGE, EDGE)

    def _check(self, state, operands, library):
        e1 = _fact(state, operands[0], "Equals")
        e2 = _fact(state, operands[1], "Equals")
        if e1.id == e2.id:
            raise RuleError("Transitivity needs two distinct equalities")
        if e1.args[1] != e2.args[0]:
            raise RuleError(f"{operands[0]} and {operands[1]} do not chain")
        if e1.args[0] == e2.args[1]:
            raise RuleError("Transitivity would only conclude a reflexive "
                            "equality")
        _not_fact(state, EdgeType.Predicate, "Equals",
                  (e1.args[0], e2.args[1]))

    def fire(self, b, state, operands):
        e1 = state.edge(operands[0].id)
        e2 = state.edge(operands[1].id)
        b.assert_fact(
            b.intern_edge(EdgeType.Predicate, "Equals",
                          (e1.args[0], e2.args[1])))

    def candidates(self, state, library):
        eqs = _facts_with(state, "Equals")
        for e1 in eqs:
            for e2 in eqs:
                if e1.args[1] == e2.args[0]:
                    yield (E(e1.id), E(e2.id))


class Substitution(Rule):
    """Rewrite one occurrence of l by r under the fact Equals(l, r).

    Operands are the equality, the target fact and the parent entity (an edge
    or a compound node inside the target) having l as a direct argument. The
    leftmost such argument of the parent is replaced and the target is
    rebuilt. Quantifier bodies are not entered."""
    name = "Substitution"
    slot_kinds = (EDGE, EDGE, ANY)

    def _rewrite(self, state, operands, make):
        eq = state.edge(operands[0].id)
        l, r = eq.args
        parent = operands[2]

        def rewrite(ref):
            if ref.kind == EDGE and ref != parent and state.edge(
                    ref.id).edge_type == EdgeType.Quantifier:
                return ref
            if ref != parent:
                return None
            args = list(direct_args(state, ref))
            args[args.index(l)] = r
            if ref.kind == NODE:
                return make(EdgeType.Constructor,
                            state.producer(ref.id).operator, args, frozenset())
            e = state.edge(ref.id)
            return make(e.edge_type, e.operator, args, e.bound_vars)

        return _rebuild(state, operands[1], rewrite, make, {})

    def _check(self, state, operands, library):
        eq = _fact(state, operands[0], "Equals", what="equality")
        target = _fact(state, operands[1], what="target")
        l, r = eq.args
        if l == r:
            raise RuleError("Rewriting by a reflexive equality is a no-op")
        if target.edge_type == EdgeType.Quantifier:
            raise RuleError("Substitution does not enter quantifier bodies")
        parent = operands[2]
        if parent.kind == NODE and state.producer(parent.id) is None:
            raise RuleError(f"{parent} is not a compound term")
        if parent not in formula_tree(state, operands[1]):
            raise RuleError(f"{parent} does not occur in {operands[1]}")
        if l not in direct_args(state, parent):
            raise RuleError(f"{parent} does not have {l} as an argument")
        try:
            res = self._rewrite(state, operands, _lookup_maker(state))
        except TypingError as e:
            raise RuleError(f"Substitution is ill-typed: {e}") from None
        if res != _NEW and res.id in state.facts:
            raise RuleError("Substitution result is already a fact")
        if res == _NEW:
            # New entities must still be well typed once built
            sorts = state.node(l.id).sort, state.node(r.id).sort
            if sorts[0] != sorts[1]:
                raise RuleError(f"Cannot substitute a {sorts[1]} for a "
                                f"{sorts[0]}")

    def fire(self, b, state, operands):
        res = self._rewrite(state, operands, _builder_maker(b))
        b.assert_fact(res.id)

    def candidates(self, state, library):
        eqs = [e for e in _facts_with(state, "Equals") if e.args[0] != e.args[1]]
        for eq in eqs:
            l = eq.args[0]
            for t in sorted(state.facts):
                if state.edge(t).edge_type == EdgeType.Quantifier:
                    continue
                for p in formula_tree(state, E(t)):
                    if l in direct_args(state, p):
                        yield (E(eq.id), E(t), p)


class UniversalInstantiation(Rule):
    """Strip one bound variable of a ForAll fact, substituting a term for it
    everywhere in the body"""
    name = "UniversalInstantiation"
    slot_kinds = (EDGE, NODE, NODE)

    def _instantiate(self, state, operands, make):
        q = state.edge(operands[0].id)
        v, t = operands[1], operands[2]

        def rewrite(ref):
            if ref == v:
                return t
            if ref.kind == EDGE:
                e = state.edge(ref.id)
                if e.edge_type == EdgeType.Quantifier and v.id in e.bound_vars:
                    return ref
            return None

        body = _rebuild(state, q.args[0], rewrite, make, {})
        rest = q.bound_vars - {v.id}
        if rest:
            return make(EdgeType.Quantifier, q.operator, (body, ), rest)
        return body

    def _check(self, state, operands, library):
        q = _fact(state, operands[0], "ForAll", what="quantifier")
        v, t = operands[1], operands[2]
        if v.id not in q.bound_vars:
            raise RuleError(f"{v} is not bound by {operands[0]}")
        if t.id in q.bound_vars:
            raise RuleError(f"{t} is itself bound by {operands[0]}")
        if state.node(t.id).sort != state.node(v.id).sort:
            raise RuleError(f"{t} and {v} have different sorts")
        if subterm_nodes(state, t) & q.bound_vars:
            raise RuleError(f"{t} mentions a variable bound by {operands[0]}")
        res = self._instantiate(state, operands, _lookup_maker(state))
        if res != _NEW and res.id in state.facts:
            raise RuleError("Instantiation result is already a fact")

    def fire(self, b, state, operands):
        res = self._instantiate(state, operands, _builder_maker(b))
        b.assert_fact(res.id)

    def candidates(self, state, library):
        for q in _facts_with(state, "ForAll"):
            for v in sorted(q.bound_vars):
                for t in sorted(state.nodes):
                    yield (E(q.id), N(v), N(t))


class Constructor(Rule):
    """Build the term op(args) over existing nodes"""
    constructor = True

    def __init__(self, name: str):
        self.name = name
        self.spec = OPERATORS[name]
        self.slot_kinds = (NODE, ) * self.spec.arities[0]

    def _check(self, state, operands, library):
        if len(state.nodes) > library.term_budget:
            raise RuleError(
                f"Term budget of {library.term_budget} nodes exceeded")
        sorts = [state.node(I.id).sort for I in operands]
        try:
            self.spec.check_sorts(sorts)
        except TypingError as e:
            raise RuleError(str(e)) from None
        if (len(operands) == 2 and commutes(self.name, sorts)
                and operands[0].id > operands[1].id):
            raise RuleError(f"{self.name} operands must be in ascending id "
                            "order")
        if state.find_term(self.name, operands) is not None:
            raise RuleError(f"{self.name}({','.join(map(str, operands))}) "
                            "already exists")

    def fire(self, b, state, operands):
        b.term(self.name, operands)

    def candidates(self, state, library):
        if len(state.nodes) > library.term_budget:
            return
        nodes = sorted(state.nodes)
        if len(self.slot_kinds) == 1:
            for I in nodes:
                yield (N(I), )
            return
        for i, a in enumerate(nodes):
            for c in (nodes[i:] if self.spec.commutative else nodes):
                yield (N(a), N(c))
                if (self.name == "Product" and c != a
                        and state.node(a).sort == "matrix"):
                    yield (N(c), N(a))


LOGICAL_RULES = (ModusPonens, AndIntro, AndElim, Substitution,
                 UniversalInstantiation, EqualityTransitivity,
                 EqualitySymmetry)
CONSTRUCTORS = ("Sum", "Product", "Sub", "Inverse", "Transpose", "Midpoint",
                "Line")
RULE_NAMES = tuple(I.name for I in LOGICAL_RULES) + CONSTRUCTORS


class RuleLibrary(object):
    """An ordered set of rules plus the term budget for constructors"""
    def __init__(self,
                 names: Optional[Iterable[str]] = None,
                 term_budget: int = 256):
        if names is None:
            names = RULE_NAMES
        by_name: Dict[str, Rule] = {I.name: I() for I in LOGICAL_RULES}
        for I in CONSTRUCTORS:
            by_name[I] = Constructor(I)
        self.rules: List[Rule] = []
        for I in names:
            if I not in by_name:
                raise KeyError(f"Unknown rule {I!r}")
            if all(I != J.name for J in self.rules):
                self.rules.append(by_name[I])
        self._by_name = {I.name: I for I in self.rules}
        self.term_budget = term_budget
        self.commutative = frozenset(k for k, v in OPERATORS.items()
                                     if v.commutative)

    @classmethod
    def from_config(cls, cfg) -> "RuleLibrary":
        return cls(cfg.rules, cfg.graph.term_budget)

    def subset(self, names: Iterable[str]) -> "RuleLibrary":
        names = list(names)
        for I in names:
            if I not in self._by_name:
                raise KeyError(f"Rule {I!r} is not in this library")
        return RuleLibrary(names, self.term_budget)

    @property
    def names(self) -> List[str]:
        return [I.name for I in self.rules]

    def __contains__(self, name):
        return name in self._by_name

    def __len__(self):
        return len(self.rules)

    def get(self, name: str) -> Rule:
        rule = self._by_name.get(name)
        if rule is None:
            raise RuleError(f"{name!r} is not a rule of this library")
        return rule

    def legal_actions(self, state: MathState) -> List[Action]:
        res = []
        for rule in self.rules:
            for ops in sorted(set(rule.candidates(state, self))):
                try:
                    rule.check(state, ops, self)
                except RuleError:
                    continue
                res.append(Action(rule.name, ops))
        return res

    def apply(self, state: MathState, action: Action) -> MathState:
        rule = self.get(action.op)
        operands = tuple(action.operands)
        rule.check(state, operands, self)
        b = state.edit()
        rule.fire(b, state, operands)
        return b.build()


def legal_actions(state: MathState,
                  rule_library: Optional[RuleLibrary] = None) -> List[Action]:
    if rule_library is None:
        rule_library = RuleLibrary()
    return rule_library.legal_actions(state)


def apply_action(state: MathState,
                 action: Action,
                 rule_library: Optional[RuleLibrary] = None) -> MathState:
    """Return the successor state, or raise RuleError leaving state as is"""
    if rule_library is None:
        rule_library = RuleLibrary()
    return rule_library.apply(state, action)


def iter_actions(state: MathState,
                 rule_library: RuleLibrary) -> Iterator[Tuple[Action, MathState]]:
    for a in rule_library.legal_actions(state):
        yield a, rule_library.apply(state, a)
