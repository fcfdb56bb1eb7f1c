# SPDX-License-Identifier: GPL-2.0+
"""Mathematical states as typed higher-order hypergraphs.

A state is the pair (graph, facts). Nodes are terms, hyperedges are ordered
relations whose arguments may be nodes or other hyperedges. States are
immutable values; StateBuilder is the single-owner way to make new ones.
"""
import dataclasses
import enum
import hashlib
import types
from typing import (Dict, FrozenSet, Iterable, List, Mapping, NamedTuple,
                    Optional, Sequence, Set, Tuple, Union)


class MathesisError(Exception):
    pass


class TypingError(MathesisError):
    pass


class DuplicateSymbolError(MathesisError):
    pass


class FactError(MathesisError):
    pass


class RuleError(MathesisError):
    pass


class NodeType(enum.Enum):
    Variable = "Variable"
    Constant = "Constant"
    CompoundTerm = "CompoundTerm"


class EdgeType(enum.Enum):
    Constructor = "Constructor"
    Predicate = "Predicate"
    Connective = "Connective"
    Quantifier = "Quantifier"


NODE = "N"
EDGE = "E"

SORTS = ("scalar", "matrix", "point", "line")


class EntityRef(NamedTuple):
    kind: str
    id: int

    def __str__(self):
        return f"{self.kind}{self.id}"

    @classmethod
    def parse(cls, text: str) -> "EntityRef":
        if len(text) < 2 or text[0] not in (NODE, EDGE) or not text[1:].isdigit():
            raise ValueError(f"Invalid entity reference {text!r}")
        return cls(text[0], int(text[1:]))


def N(id: int) -> EntityRef:
    return EntityRef(NODE, id)


def E(id: int) -> EntityRef:
    return EntityRef(EDGE, id)


@dataclasses.dataclass(frozen=True)
class Node:
    id: int
    node_type: NodeType
    label: str
    sort: str = "scalar"
    # Binding section holding this node's value, None for compound terms
    binding_slot: Optional[str] = None


@dataclasses.dataclass(frozen=True)
class Hyperedge:
    id: int
    edge_type: EdgeType
    operator: str
    args: Tuple[EntityRef, ...]
    output: Optional[int] = None
    bound_vars: FrozenSet[int] = frozenset()

    @property
    def assertable(self) -> bool:
        return self.edge_type != EdgeType.Constructor


@dataclasses.dataclass(frozen=True)
class OperatorSpec:
    """Signature of one operator symbol. arities lists the accepted argument
    counts, arg_sorts maps an arity to the node sorts required per slot (None
    for edge arguments or unchecked sorts)."""
    name: str
    edge_type: EdgeType
    arities: Tuple[int, ...]
    arg_sorts: Mapping[int, Tuple[Optional[str], ...]] = dataclasses.field(
        default_factory=dict)
    commutative: bool = False
    result_sort: Optional[str] = None

    def check_sorts(self, sorts: Sequence[str]) -> Optional[str]:
        """Return the result sort for a Constructor, raise on a mismatch"""
        want = self.arg_sorts.get(len(sorts))
        if want is not None:
            for i, (w, s) in enumerate(zip(want, sorts)):
                if w is not None and w != s:
                    raise TypingError(
                        f"{self.name} argument {i} must be a {w}, got {s}")
        if self.name in ("Sum", "Product", "Sub"):
            if sorts[0] != sorts[1] or sorts[0] not in ("scalar", "matrix"):
                raise TypingError(
                    f"{self.name} needs two scalar or two matrix terms, got {sorts}")
            return sorts[0]
        return self.result_sort


def _ops(*specs: OperatorSpec) -> Dict[str, OperatorSpec]:
    return {I.name: I for I in specs}


_SEG4 = {4: ("point",) * 4, 2: ("line",) * 2}
_SEG8 = {8: ("point",) * 8, 4: ("line",) * 4}

OPERATORS: Dict[str, OperatorSpec] = _ops(
    OperatorSpec("Sum", EdgeType.Constructor, (2, ), commutative=True),
    OperatorSpec("Product", EdgeType.Constructor, (2, ), commutative=True),
    OperatorSpec("Sub", EdgeType.Constructor, (2, )),
    OperatorSpec("Inverse", EdgeType.Constructor, (1, ), {1: ("matrix", )},
                 result_sort="matrix"),
    OperatorSpec("Transpose", EdgeType.Constructor, (1, ), {1: ("matrix", )},
                 result_sort="matrix"),
    OperatorSpec("Midpoint", EdgeType.Constructor, (2, ),
                 {2: ("point", "point")}, commutative=True,
                 result_sort="point"),
    OperatorSpec("Line", EdgeType.Constructor, (2, ), {2: ("point", "point")},
                 commutative=True, result_sort="line"),
    OperatorSpec("Equals", EdgeType.Predicate, (2, ), commutative=True),
    OperatorSpec("Symmetric", EdgeType.Predicate, (1, ), {1: ("matrix", )}),
    OperatorSpec("Orthogonal", EdgeType.Predicate, (1, ), {1: ("matrix", )}),
    OperatorSpec("InverseOf", EdgeType.Predicate, (2, ),
                 {2: ("matrix", "matrix")}),
    OperatorSpec("Collinear", EdgeType.Predicate, (3, ), {3: ("point", ) * 3}),
    OperatorSpec("Parallel", EdgeType.Predicate, (4, 2), _SEG4),
    OperatorSpec("Perpendicular", EdgeType.Predicate, (4, 2), _SEG4),
    OperatorSpec("Congruent", EdgeType.Predicate, (4, 2), _SEG4),
    OperatorSpec("EqualRatio", EdgeType.Predicate, (8, 4), _SEG8),
    OperatorSpec("Implies", EdgeType.Connective, (2, )),
    OperatorSpec("And", EdgeType.Connective, (2, ), commutative=True),
    OperatorSpec("ForAll", EdgeType.Quantifier, (1, )),
)

DEFAULT_COMMUTATIVE = frozenset(k for k, v in OPERATORS.items() if v.commutative)


def commutes(operator: str, sorts: Sequence[str],
             commutative: FrozenSet[str] = DEFAULT_COMMUTATIVE) -> bool:
    """Matrix products never commute"""
    if operator == "Product" and "matrix" in sorts:
        return False
    return operator in commutative


def operator_spec(name: str) -> OperatorSpec:
    spec = OPERATORS.get(name)
    if spec is None:
        raise TypingError(f"Unknown operator {name!r}")
    return spec


class MathState(object):
    """An immutable mathematical state S = (G, F). Read-only views are handed
    out; build new states with edit()."""
    def __init__(self, nodes: Dict[int, Node], edges: Dict[int, Hyperedge],
                 facts: FrozenSet[int], premises: FrozenSet[int],
                 next_id: int):
        self._nodes = nodes
        self._edges = edges
        self.nodes: Mapping[int, Node] = types.MappingProxyType(nodes)
        self.edges: Mapping[int, Hyperedge] = types.MappingProxyType(edges)
        self.facts = frozenset(facts)
        self.premises = frozenset(premises)
        self.next_id = next_id
        self._producers: Optional[Dict[int, int]] = None
        self._parents: Optional[Dict[EntityRef, List[int]]] = None
        self._hashes: Dict[Tuple[EntityRef, FrozenSet[str]], int] = {}
        self._terms: Optional[Dict[tuple, int]] = None

    @classmethod
    def empty(cls) -> "MathState":
        return cls({}, {}, frozenset(), frozenset(), 0)

    def edit(self) -> "StateBuilder":
        return StateBuilder(self)

    def __len__(self):
        return len(self._nodes) + len(self._edges)

    def __repr__(self):
        return (f"<MathState {len(self._nodes)} nodes, {len(self._edges)} "
                f"edges, {len(self.facts)} facts>")

    def has(self, ref: EntityRef) -> bool:
        if ref.kind == NODE:
            return ref.id in self._nodes
        return ref.id in self._edges

    def resolve(self, ref: EntityRef) -> Union[Node, Hyperedge]:
        try:
            if ref.kind == NODE:
                return self._nodes[ref.id]
            return self._edges[ref.id]
        except KeyError:
            raise TypingError(f"Dangling reference {ref}") from None

    def node(self, id: int) -> Node:
        return self._nodes[id]

    def edge(self, id: int) -> Hyperedge:
        return self._edges[id]

    def entities(self) -> List[EntityRef]:
        """All entities ordered by id"""
        res = [N(I) for I in self._nodes] + [E(I) for I in self._edges]
        res.sort(key=lambda r: r.id)
        return res

    def producer(self, node_id: int) -> Optional[Hyperedge]:
        """The Constructor edge whose output is node_id"""
        if self._producers is None:
            self._producers = {
                e.output: e.id
                for e in self._edges.values() if e.output is not None
            }
        eid = self._producers.get(node_id)
        return None if eid is None else self._edges[eid]

    def parents(self, ref: EntityRef) -> List[int]:
        """Edge ids that have ref among their args, ascending"""
        if self._parents is None:
            parents: Dict[EntityRef, List[int]] = {}
            for eid in sorted(self._edges):
                for a in set(self._edges[eid].args):
                    parents.setdefault(a, []).append(eid)
            self._parents = parents
        return self._parents.get(ref, [])

    def find_node(self, node_type: NodeType, label: str) -> Optional[int]:
        for n in self._nodes.values():
            if n.node_type == node_type and n.label == label:
                return n.id
        return None

    def find_symbol(self, label: str) -> Optional[int]:
        for n in self._nodes.values():
            if n.node_type != NodeType.CompoundTerm and n.label == label:
                return n.id
        return None

    def _term_index(self) -> Dict[tuple, int]:
        if self._terms is None:
            self._terms = {_edge_key(e): e.id for e in self._edges.values()}
        return self._terms

    def find_edge(self, edge_type: EdgeType, operator: str,
                  args: Sequence[EntityRef],
                  bound_vars: Iterable[int] = ()) -> Optional[int]:
        key = (edge_type, operator, tuple(args), frozenset(bound_vars))
        return self._term_index().get(key)

    def find_term(self, operator: str,
                  args: Sequence[EntityRef]) -> Optional[int]:
        """Output node of an existing Constructor, if there is one"""
        eid = self.find_edge(EdgeType.Constructor, operator, args)
        return None if eid is None else self._edges[eid].output

    def is_fact(self, ref: EntityRef) -> bool:
        return ref.kind == EDGE and ref.id in self.facts

    def describe(self, ref: EntityRef) -> str:
        """Human readable rendering of an entity, ie Equals(Sum(x,y),z)"""
        if ref.kind == NODE:
            n = self._nodes[ref.id]
            if n.node_type != NodeType.CompoundTerm:
                return n.label
            prod = self.producer(n.id)
            return self.describe(E(prod.id))
        e = self._edges[ref.id]
        inner = ",".join(self.describe(a) for a in e.args)
        if e.edge_type == EdgeType.Quantifier:
            bound = " ".join(
                sorted(self._nodes[I].label for I in e.bound_vars))
            return f"{e.operator}[{bound}]({inner})"
        return f"{e.operator}({inner})"


def _edge_key(e: Hyperedge) -> tuple:
    return (e.edge_type, e.operator, e.args, e.bound_vars)


class StateBuilder(object):
    """Single-owner mutable builder for MathState values"""
    def __init__(self, state: Optional[MathState] = None):
        if state is None:
            state = MathState.empty()
        self._nodes: Dict[int, Node] = dict(state.nodes)
        self._edges: Dict[int, Hyperedge] = dict(state.edges)
        self._facts: Set[int] = set(state.facts)
        self._premises: Set[int] = set(state.premises)
        self._next_id = state.next_id
        self._symbols = {(n.node_type, n.label): n.id
                         for n in self._nodes.values()
                         if n.node_type != NodeType.CompoundTerm}
        self._index = {_edge_key(e): e.id for e in self._edges.values()}

    def _fresh(self) -> int:
        res = self._next_id
        self._next_id += 1
        return res

    def has(self, ref: EntityRef) -> bool:
        if ref.kind == NODE:
            return ref.id in self._nodes
        return ref.id in self._edges

    def node(self, id: int) -> Node:
        return self._nodes[id]

    def edge(self, id: int) -> Hyperedge:
        return self._edges[id]

    def symbol(self, label: str) -> Optional[int]:
        for t in (NodeType.Variable, NodeType.Constant):
            if (t, label) in self._symbols:
                return self._symbols[t, label]
        return None

    def add_node(self,
                 node_type: NodeType,
                 label: str,
                 sort: str = "scalar",
                 binding_slot: Optional[str] = None) -> int:
        if not isinstance(node_type, NodeType):
            raise TypingError(f"Invalid node type {node_type!r}")
        if not label:
            raise TypingError("Node labels must be nonempty")
        if node_type == NodeType.CompoundTerm:
            raise TypingError(
                "CompoundTerm nodes are created by Constructor edges")
        if sort not in SORTS:
            raise TypingError(f"Invalid sort {sort!r}")
        if (node_type, label) in self._symbols:
            raise DuplicateSymbolError(
                f"{node_type.value} {label!r} already exists")
        nid = self._fresh()
        self._nodes[nid] = Node(nid, node_type, label, sort, binding_slot)
        self._symbols[node_type, label] = nid
        return nid

    def _arg_sort(self, ref: EntityRef) -> str:
        return self._nodes[ref.id].sort

    def _check_edge(self, edge_type: EdgeType, operator: str,
                    args: Tuple[EntityRef, ...],
                    bound_vars: FrozenSet[int]) -> OperatorSpec:
        spec = operator_spec(operator)
        if spec.edge_type != edge_type:
            raise TypingError(
                f"{operator} is a {spec.edge_type.value}, not a {edge_type.value}")
        if len(args) not in spec.arities:
            raise TypingError(
                f"{operator} takes {'/'.join(map(str, spec.arities))} args, got {len(args)}")
        for a in args:
            if not isinstance(a, EntityRef) or not self.has(a):
                raise TypingError(f"{operator} argument {a} does not resolve")

        if edge_type in (EdgeType.Constructor, EdgeType.Predicate):
            for a in args:
                if a.kind != NODE:
                    raise TypingError(
                        f"{operator} takes node arguments, got edge {a}")
            spec.check_sorts([self._arg_sort(a) for a in args])
        else:
            for a in args:
                if a.kind != EDGE:
                    raise TypingError(
                        f"{operator} takes edge arguments, got node {a}")
                if not self._edges[a.id].assertable:
                    raise TypingError(
                        f"{operator} cannot take the Constructor edge {a}")

        if edge_type == EdgeType.Quantifier:
            if not bound_vars:
                raise TypingError(f"{operator} needs a nonempty bound_vars set")
            for I in bound_vars:
                n = self._nodes.get(I)
                if n is None or n.node_type != NodeType.Variable:
                    raise TypingError(f"{operator} can only bind Variables")
        elif bound_vars:
            raise TypingError("Only quantifiers carry bound_vars")
        return spec

    def add_edge(self,
                 edge_type: EdgeType,
                 operator: str,
                 args: Sequence[EntityRef],
                 bound_vars: Iterable[int] = ()) -> int:
        """Add a new hyperedge. A Constructor also creates its output
        CompoundTerm node. The new edge is not a fact."""
        args = tuple(args)
        bound_vars = frozenset(bound_vars)
        spec = self._check_edge(edge_type, operator, args, bound_vars)

        # Every argument already exists and nothing refers to the new edge or
        # its new output node, so acyclicity is preserved.
        output = None
        if edge_type == EdgeType.Constructor:
            sort = spec.check_sorts([self._arg_sort(a) for a in args])
            output = self._fresh()
            self._nodes[output] = Node(output, NodeType.CompoundTerm, operator,
                                       sort or "scalar", None)
        eid = self._fresh()
        edge = Hyperedge(eid, edge_type, operator, args, output, bound_vars)
        self._edges[eid] = edge
        self._index.setdefault(_edge_key(edge), eid)
        return eid

    def intern_edge(self,
                    edge_type: EdgeType,
                    operator: str,
                    args: Sequence[EntityRef],
                    bound_vars: Iterable[int] = ()) -> int:
        """Return the existing structurally identical edge or add a new one"""
        key = (edge_type, operator, tuple(args), frozenset(bound_vars))
        eid = self._index.get(key)
        if eid is not None:
            return eid
        return self.add_edge(edge_type, operator, args, bound_vars)

    def term(self, operator: str, args: Sequence[EntityRef]) -> int:
        """Output node of Constructor(operator, args), interned"""
        eid = self.intern_edge(EdgeType.Constructor, operator, args)
        return self._edges[eid].output

    def assert_fact(self, edge_id: int, premise: bool = False) -> None:
        e = self._edges.get(edge_id)
        if e is None:
            raise FactError(f"No edge E{edge_id}")
        if not e.assertable:
            raise FactError(
                f"Constructor edge E{edge_id} ({e.operator}) cannot be a fact")
        self._facts.add(edge_id)
        if premise:
            self._premises.add(edge_id)

    def build(self) -> MathState:
        return MathState(dict(self._nodes), dict(self._edges),
                         frozenset(self._facts), frozenset(self._premises),
                         self._next_id)


# Functional spellings of the builder operations


def add_node(builder: StateBuilder, node_type: NodeType, label: str,
             sort: str = "scalar") -> int:
    return builder.add_node(node_type, label, sort)


def add_edge(builder: StateBuilder,
             edge_type: EdgeType,
             operator: str,
             args: Sequence[EntityRef],
             bound_vars: Iterable[int] = ()) -> int:
    return builder.add_edge(edge_type, operator, args, bound_vars)


def assert_fact(state: MathState, edge_id: int,
                premise: bool = False) -> MathState:
    """Return a new state with edge_id among the facts"""
    if edge_id in state.facts and (not premise or edge_id in state.premises):
        e = state.edges.get(edge_id)
        if e is not None and e.assertable:
            return state
    b = state.edit()
    b.assert_fact(edge_id, premise)
    return b.build()


def _digest(*parts) -> int:
    m = hashlib.sha1()
    for I in parts:
        m.update(str(I).encode())
        m.update(b"\0")
    return int.from_bytes(m.digest()[:8], "little")


def canonical_hash(state: MathState,
                   ref: EntityRef,
                   commutative: Optional[FrozenSet[str]] = None) -> int:
    """Structural 64 bit hash of an entity. Labels and shapes matter, ids do
    not. Children of commutative operators are combined order-insensitively."""
    if commutative is None:
        commutative = DEFAULT_COMMUTATIVE
    return _canonical(state, ref, commutative)


def _arg_sort(state: MathState, ref: EntityRef) -> str:
    return state.resolve(ref).sort if ref.kind == NODE else "edge"


def _canonical(state: MathState, ref: EntityRef,
               commutative: FrozenSet[str]) -> int:
    key = (ref, commutative)
    res = state._hashes.get(key)
    if res is not None:
        return res

    if ref.kind == NODE:
        n = state.resolve(ref)
        if n.node_type == NodeType.CompoundTerm:
            prod = state.producer(n.id)
            res = _digest("term", _canonical(state, E(prod.id), commutative))
        else:
            res = _digest("node", n.node_type.value, n.sort, n.label)
    else:
        e = state.resolve(ref)
        children = [_canonical(state, a, commutative) for a in e.args]
        if commutes(e.operator, [_arg_sort(state, a) for a in e.args],
                    commutative):
            children.sort()
        bound = sorted(
            _canonical(state, N(I), commutative) for I in e.bound_vars)
        res = _digest("edge", e.edge_type.value, e.operator, len(children),
                      *children, "bound", *bound)
    state._hashes[key] = res
    return res


def topological_order(state: MathState) -> List[EntityRef]:
    """Entities ordered so every entity follows everything it references.
    Raises TypingError if the references graph has a cycle."""
    deps: Dict[EntityRef, List[EntityRef]] = {}
    for n in state.nodes.values():
        prod = state.producer(n.id)
        deps[N(n.id)] = [E(prod.id)] if prod is not None else []
    for e in state.edges.values():
        deps[E(e.id)] = list(e.args) + [N(I) for I in sorted(e.bound_vars)]

    order: List[EntityRef] = []
    mark: Dict[EntityRef, int] = {}
    for root in sorted(deps, key=lambda r: (r.id, r.kind)):
        if root in mark:
            continue
        stack = [(root, iter(deps[root]))]
        mark[root] = 1
        while stack:
            cur, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                mark[cur] = 2
                order.append(cur)
                continue
            st = mark.get(nxt)
            if st == 1:
                raise TypingError(f"Reference cycle through {nxt}")
            if st is None:
                if nxt not in deps:
                    raise TypingError(f"Dangling reference {nxt}")
                mark[nxt] = 1
                stack.append((nxt, iter(deps[nxt])))
    return order


def validate(state: MathState) -> None:
    """Check every typing invariant of a state, raising TypingError"""
    b = StateBuilder()
    b._nodes = dict(state.nodes)
    b._edges = dict(state.edges)
    outputs: Dict[int, int] = {}
    for e in state.edges.values():
        b._check_edge(e.edge_type, e.operator, e.args, e.bound_vars)
        if e.edge_type == EdgeType.Constructor:
            if e.output is None or e.output not in state.nodes:
                raise TypingError(f"Constructor E{e.id} has no output node")
            if e.output in outputs:
                raise TypingError(
                    f"Node N{e.output} is the output of two constructors")
            outputs[e.output] = e.id
        elif e.output is not None:
            raise TypingError(f"Only constructors have outputs (E{e.id})")
    for n in state.nodes.values():
        compound = n.node_type == NodeType.CompoundTerm
        if compound != (n.id in outputs):
            raise TypingError(
                f"Node N{n.id} ({n.node_type.value}) has a wrong producer count")
    for I in state.facts:
        if I not in state.edges or not state.edges[I].assertable:
            raise TypingError(f"Fact E{I} is not an assertable edge")
    if not state.premises <= state.facts:
        raise TypingError("Premises must be facts")
    topological_order(state)


# Goal patterns


@dataclasses.dataclass(frozen=True)
class PVar:
    """Pattern variable, matches any entity consistently"""
    name: str


@dataclasses.dataclass(frozen=True)
class PSym:
    """A declared symbol, matches the node carrying that label"""
    label: str


@dataclasses.dataclass(frozen=True)
class PApp:
    operator: str
    args: Tuple["PTerm", ...]


@dataclasses.dataclass(frozen=True)
class PForAll:
    bound: Tuple[str, ...]
    body: "PTerm"


PTerm = Union[PVar, PSym, PApp, PForAll]


@dataclasses.dataclass(frozen=True)
class GoalMatch:
    root: int
    assignment: Mapping[str, EntityRef]


@dataclasses.dataclass(frozen=True)
class GoalPattern:
    root: PTerm

    def __post_init__(self):
        self.validate()

    def validate(self):
        if isinstance(self.root, PForAll):
            pass
        elif not isinstance(self.root, PApp) or operator_spec(
                self.root.operator).edge_type == EdgeType.Constructor:
            raise TypingError("A goal must be a predicate, connective or "
                              "quantifier")
        _check_pattern(self.root, want_edge=True)

    def pattern_vars(self) -> List[str]:
        res: List[str] = []
        _collect_vars(self.root, res)
        return res

    def __str__(self):
        return _pattern_str(self.root)


def _check_pattern(p: PTerm, want_edge: bool):
    if isinstance(p, PVar):
        return
    if isinstance(p, PSym):
        if want_edge:
            raise TypingError(f"Symbol {p.label} used where a formula is expected")
        return
    if isinstance(p, PForAll):
        if not want_edge or not p.bound:
            raise TypingError("Misplaced or empty forall")
        _check_pattern(p.body, want_edge=True)
        return
    spec = operator_spec(p.operator)
    if len(p.args) not in spec.arities:
        raise TypingError(f"{p.operator} takes "
                          f"{'/'.join(map(str, spec.arities))} args")
    is_edge = spec.edge_type != EdgeType.Constructor
    if is_edge != want_edge:
        raise TypingError(f"{p.operator} is misplaced in the goal pattern")
    for a in p.args:
        _check_pattern(a, want_edge=spec.edge_type in (EdgeType.Connective,
                                                        EdgeType.Quantifier))


def _collect_vars(p: PTerm, res: List[str]):
    if isinstance(p, PVar):
        if p.name not in res:
            res.append(p.name)
    elif isinstance(p, PApp):
        for a in p.args:
            _collect_vars(a, res)
    elif isinstance(p, PForAll):
        _collect_vars(p.body, res)


def _pattern_str(p: PTerm) -> str:
    if isinstance(p, PVar):
        return "?" + p.name
    if isinstance(p, PSym):
        return p.label
    if isinstance(p, PForAll):
        return f"ForAll[{' '.join(p.bound)}]({_pattern_str(p.body)})"
    return f"{p.operator}({','.join(_pattern_str(a) for a in p.args)})"


def _match(state: MathState, p: PTerm, ref: EntityRef,
           asg: Dict[str, EntityRef]) -> bool:
    if isinstance(p, PVar):
        cur = asg.get(p.name)
        if cur is None:
            asg[p.name] = ref
            return True
        return cur == ref
    if isinstance(p, PSym):
        if ref.kind != NODE:
            return False
        n = state.node(ref.id)
        return n.node_type != NodeType.CompoundTerm and n.label == p.label
    if isinstance(p, PForAll):
        if ref.kind != EDGE:
            return False
        e = state.edge(ref.id)
        if e.operator != "ForAll":
            return False
        labels = sorted(state.node(I).label for I in e.bound_vars)
        if labels != sorted(p.bound):
            return False
        return _match(state, p.body, e.args[0], asg)

    spec = OPERATORS[p.operator]
    if spec.edge_type == EdgeType.Constructor:
        if ref.kind != NODE:
            return False
        e = state.producer(ref.id)
        if e is None:
            return False
    else:
        if ref.kind != EDGE:
            return False
        e = state.edge(ref.id)
    if e.operator != p.operator or len(e.args) != len(p.args):
        return False
    return all(_match(state, sp, a, asg) for sp, a in zip(p.args, e.args))


def match_goal(state: MathState, pattern: GoalPattern) -> List[GoalMatch]:
    """Exact structural matches of the pattern, ordered by root edge id"""
    res = []
    for eid in sorted(state.edges):
        asg: Dict[str, EntityRef] = {}
        if _match(state, pattern.root, E(eid), asg):
            res.append(GoalMatch(eid, types.MappingProxyType(asg)))
    return res


def goal_proven(state: MathState, pattern: GoalPattern) -> bool:
    return any(m.root in state.facts for m in match_goal(state, pattern))


def premise_hashes(state: MathState) -> FrozenSet[int]:
    """The assumption set: canonical hashes of the premise facts"""
    return frozenset(canonical_hash(state, E(I)) for I in state.premises)
