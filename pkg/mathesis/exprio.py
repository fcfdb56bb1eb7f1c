# SPDX-License-Identifier: GPL-2.0+
"""Problem files, state and trace serialization.

Problems are parenthesized prefix expressions:

    (problem
      (name transitivity)
      (decl a var) (decl b var) (decl c var)
      (premise (Equals a b))
      (premise (Equals b c))
      (goal (Equals a c))
      (bind a 1.0))

Every failure is reported as a ParseError carrying a line and column.
"""
import dataclasses
import json
import re
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__, util
from .energy import Binding
from .hypergraph import (OPERATORS, EdgeType, GoalPattern, MathesisError,
                         MathState, Node, NodeType, Hyperedge, PApp, PForAll,
                         PSym, PTerm, PVar, StateBuilder, TypingError,
                         EntityRef, E, N, validate)
from .rules import Action

Loc = Tuple[int, int]


class ParseError(MathesisError):
    def __init__(self, msg: str, line: int = 1, col: int = 1):
        self.msg = msg
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {msg}")


class BindingError(ParseError):
    pass


class Atom(object):
    def __init__(self, name: str, loc: Loc):
        self.name = name
        self.loc = loc

    def __repr__(self):
        return self.name


class SList(object):
    def __init__(self, children: List[Union["SList", Atom]], loc: Loc):
        self.children = children
        self.loc = loc

    def __repr__(self):
        return "({})".format(" ".join(map(repr, self.children)))

    def __len__(self):
        return len(self.children)

    def __getitem__(self, i):
        return self.children[i]


SExpr = Union[SList, Atom]

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def parse_sexprs(text: str) -> List[SExpr]:
    """Tokenize and group into nested lists, tracking line/column"""
    stack: List[SList] = [SList([], (1, 1))]
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"Unexpected character {text[pos]!r}", line, col)
        tok = m.group()
        if tok == "(":
            stack.append(SList([], (line, col)))
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("Unbalanced ')'", line, col)
            done = stack.pop()
            stack[-1].children.append(done)
        elif not tok[0].isspace() and tok[0] != ";":
            stack[-1].children.append(Atom(tok, (line, col)))
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    if len(stack) > 1:
        raise ParseError("Unclosed '('", *stack[-1].loc)
    return stack[0].children


DECL_KINDS = {
    "var": (NodeType.Variable, "scalar"),
    "polyvar": (NodeType.Variable, "scalar"),
    "const": (NodeType.Constant, "scalar"),
    "matrix": (NodeType.Variable, "matrix"),
    "point": (NodeType.Variable, "point"),
}

_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9']*\Z")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


@dataclasses.dataclass
class Decl:
    name: str
    kind: str
    dims: Optional[int] = None
    implicit: bool = False
    loc: Loc = (1, 1)

    @property
    def sort(self) -> str:
        return DECL_KINDS[self.kind][1]


@dataclasses.dataclass
class Bind:
    name: str
    values: List[float]
    free: bool = False
    loc: Loc = (1, 1)


@dataclasses.dataclass
class ProblemDoc:
    decls: List[Decl]
    premises: List[PTerm]
    goal: PTerm
    bindings: List[Bind] = dataclasses.field(default_factory=list)
    name: Optional[str] = None

    def decl(self, name: str) -> Optional[Decl]:
        for I in self.decls:
            if I.name == name:
                return I
        return None


class _DocParser(object):
    def __init__(self):
        self.decls: Dict[str, Decl] = {}
        self.order: List[Decl] = []

    def _atom(self, x: SExpr, what: str) -> Atom:
        if not isinstance(x, Atom):
            raise ParseError(f"Expected {what}", *x.loc)
        return x

    def decl(self, form: SList):
        if len(form) not in (3, 4, 5):
            raise ParseError("decl takes a name, a kind and optional dims",
                             *form.loc)
        name = self._atom(form[1], "a symbol name")
        kind = self._atom(form[2], "a declaration kind")
        if kind.name not in DECL_KINDS:
            raise ParseError(
                f"Unknown kind {kind.name!r}, expected one of "
                f"{', '.join(sorted(DECL_KINDS))}", *kind.loc)
        if not (_IDENT.match(name.name) or
                (kind.name == "const" and _is_number(name.name))):
            raise ParseError(f"Invalid symbol name {name.name!r}", *name.loc)
        if name.name in self.decls:
            raise ParseError(f"{name.name} is declared twice", *name.loc)
        dims = None
        if len(form) > 3:
            if kind.name != "matrix":
                raise ParseError("Only matrices take dimensions", *form[3].loc)
            vals = []
            for I in form.children[3:]:
                a = self._atom(I, "a dimension")
                if not a.name.isdigit() or int(a.name) < 1:
                    raise ParseError(f"Invalid dimension {a.name!r}", *a.loc)
                vals.append(int(a.name))
            if len(set(vals)) != 1:
                raise ParseError("Matrices must be square", *form[3].loc)
            dims = vals[0]
            for I in self.order:
                if I.dims is not None and I.dims != dims:
                    raise ParseError(
                        f"All matrices share one dimension, {I.name} is "
                        f"{I.dims}x{I.dims}", *form[3].loc)
        d = Decl(name.name, kind.name, dims, False, name.loc)
        self.decls[d.name] = d
        self.order.append(d)

    def bind(self, form: SList) -> Bind:
        if len(form) < 3:
            raise ParseError("bind takes a symbol and numbers", *form.loc)
        name = self._atom(form[1], "a symbol name")
        rest = [self._atom(I, "a number") for I in form.children[2:]]
        free = False
        if rest and rest[-1].name == "free":
            free = True
            rest = rest[:-1]
        values = []
        for I in rest:
            try:
                v = float(I.name)
            except ValueError:
                raise BindingError(f"Invalid number {I.name!r}",
                                   *I.loc) from None
            if not np.isfinite(v):
                raise BindingError(f"{name.name} needs finite values, got "
                                   f"{I.name!r}", *I.loc)
            values.append(v)
        if not values:
            raise BindingError("bind needs at least one number", *form.loc)
        return Bind(name.name, values, free, name.loc)

    def _sort_of(self, name: str, scope: Dict[str, str]) -> str:
        if name in scope:
            return scope[name]
        return self.decls[name].sort

    def expr(self, x: SExpr, formula: bool, scope: Dict[str, str],
             pattern: bool) -> Tuple[PTerm, Optional[str]]:
        """Validated pattern term and its sort (None for formulas)"""
        if isinstance(x, Atom):
            if formula:
                raise ParseError(f"Expected a formula, got {x.name!r}", *x.loc)
            if x.name.startswith("?"):
                if not pattern:
                    raise ParseError("Pattern variables are only allowed in "
                                     "the goal", *x.loc)
                if not _IDENT.match(x.name[1:]):
                    raise ParseError(f"Invalid pattern variable {x.name!r}",
                                     *x.loc)
                return PVar(x.name[1:]), None
            if x.name not in scope and x.name not in self.decls:
                raise ParseError(f"Undeclared symbol {x.name!r}", *x.loc)
            return PSym(x.name), self._sort_of(x.name, scope)

        if not x.children:
            raise ParseError("Empty expression", *x.loc)
        head = x[0]
        if not isinstance(head, Atom):
            raise ParseError("Expected an operator", *head.loc)
        if head.name == "forall":
            return self.forall(x, formula, scope, pattern)
        spec = OPERATORS.get(head.name)
        if spec is None:
            raise ParseError(f"Unknown operator {head.name!r}", *head.loc)
        args = x.children[1:]
        if len(args) not in spec.arities:
            raise ParseError(
                f"{head.name} takes {'/'.join(map(str, spec.arities))} "
                f"arguments, got {len(args)}", *head.loc)
        is_formula = spec.edge_type != EdgeType.Constructor
        if is_formula != formula:
            raise ParseError(
                f"{head.name} builds a {'formula' if is_formula else 'term'} "
                f"where a {'formula' if formula else 'term'} is expected",
                *head.loc)
        sub_formula = spec.edge_type in (EdgeType.Connective,
                                         EdgeType.Quantifier)
        terms = []
        sorts = []
        for I in args:
            t, s = self.expr(I, sub_formula, scope, pattern)
            terms.append(t)
            sorts.append(s)
        sort = None
        if not sub_formula and None not in sorts:
            try:
                sort = spec.check_sorts(sorts)
            except TypingError as e:
                raise ParseError(str(e), *head.loc) from None
        elif not sub_formula and spec.edge_type == EdgeType.Constructor:
            # Pattern variables hide sorts, use the first known one
            sort = spec.result_sort or next(
                (I for I in sorts if I is not None), None)
        return PApp(head.name, tuple(terms)), sort

    def forall(self, x: SList, formula: bool, scope: Dict[str, str],
               pattern: bool):
        if not formula:
            raise ParseError("forall builds a formula", *x.loc)
        if len(x) != 3 or not isinstance(x[1], SList) or not x[1].children:
            raise ParseError("Expected (forall (x ...) formula)", *x.loc)
        bound = []
        for I in x[1].children:
            a = self._atom(I, "a bound variable")
            if not _IDENT.match(a.name):
                raise ParseError(f"Invalid variable name {a.name!r}", *a.loc)
            d = self.decls.get(a.name)
            if d is None:
                d = Decl(a.name, "var", None, True, a.loc)
                self.decls[a.name] = d
                self.order.append(d)
            elif DECL_KINDS[d.kind][0] != NodeType.Variable:
                raise ParseError(f"{a.name} is not a variable", *a.loc)
            if a.name in bound:
                raise ParseError(f"{a.name} is bound twice", *a.loc)
            bound.append(a.name)
        body, _ = self.expr(x[2], True, scope, pattern)
        return PForAll(tuple(bound), body), None

    def problem(self, forms: List[SExpr]) -> ProblemDoc:
        if len(forms) != 1 or not isinstance(forms[0], SList):
            loc = forms[1].loc if len(forms) > 1 else (1, 1)
            raise ParseError("Expected a single (problem ...) form", *loc)
        top = forms[0]
        if not top.children or not isinstance(
                top[0], Atom) or top[0].name != "problem":
            raise ParseError("Expected (problem ...)", *top.loc)

        name = None
        premises: List[SList] = []
        goal: Optional[SList] = None
        binds: List[Bind] = []
        for form in top.children[1:]:
            if not isinstance(form, SList) or not form.children or not isinstance(
                    form[0], Atom):
                raise ParseError("Expected a (keyword ...) clause", *form.loc)
            kw = form[0].name
            if kw == "decl":
                self.decl(form)
            elif kw == "premise":
                if len(form) != 2:
                    raise ParseError("premise takes one expression", *form.loc)
                premises.append(form)
            elif kw == "goal":
                if goal is not None:
                    raise ParseError("Only one goal is allowed", *form.loc)
                if len(form) != 2:
                    raise ParseError("goal takes one expression", *form.loc)
                goal = form
            elif kw == "bind":
                binds.append(self.bind(form))
            elif kw == "name":
                if len(form) != 2:
                    raise ParseError("name takes one atom", *form.loc)
                name = self._atom(form[1], "a problem name").name
            else:
                raise ParseError(f"Unknown clause {kw!r}", *form[0].loc)
        if goal is None:
            raise ParseError("The problem has no goal", *top.loc)

        prem_terms = [self.expr(I[1], True, {}, False)[0] for I in premises]
        goal_term = self.expr(goal[1], True, {}, True)[0]
        for b in binds:
            if b.name not in self.decls:
                raise BindingError(f"Undeclared symbol {b.name!r}", *b.loc)
        return ProblemDoc(list(self.order), prem_terms, goal_term, binds, name)


def parse_problem(text: Union[str, bytes]) -> ProblemDoc:
    """Parse and validate a problem document"""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            head = text[:e.start]
            line = head.count(b"\n") + 1
            col = e.start - (head.rfind(b"\n") + 1) + 1
            raise ParseError("Invalid UTF-8", line, col) from None
    try:
        return _DocParser().problem(parse_sexprs(text))
    except RecursionError:
        raise ParseError("Expression nested too deeply") from None


def _build_term(b: StateBuilder, p: PTerm) -> EntityRef:
    """Hash-consed construction of a closed term or formula"""
    if isinstance(p, PSym):
        return N(b.symbol(p.label))
    if isinstance(p, PForAll):
        body = _build_term(b, p.body)
        bound = [b.symbol(I) for I in p.bound]
        return E(b.intern_edge(EdgeType.Quantifier, "ForAll", [body], bound))
    spec = OPERATORS[p.operator]
    args = [_build_term(b, I) for I in p.args]
    if spec.edge_type == EdgeType.Constructor:
        return N(b.term(p.operator, args))
    return E(b.intern_edge(spec.edge_type, p.operator, args))


def matrix_dim(doc: ProblemDoc, default: int) -> int:
    for I in doc.decls:
        if I.dims is not None:
            return I.dims
    return default


def build_state(doc: ProblemDoc,
                cfg=None,
                seed: Optional[int] = None
                ) -> Tuple[MathState, GoalPattern, Binding]:
    """Premises become premise facts, the goal a GoalPattern. Seeds fill the
    binding, anything unseeded is random and free."""
    dim_d = matrix_dim(doc, cfg.energy.dim_d if cfg is not None else 4)
    if seed is None:
        seed = cfg.seed if cfg is not None else 0

    b = StateBuilder()
    for d in doc.decls:
        node_type, sort = DECL_KINDS[d.kind]
        b.add_node(node_type, d.name, sort, binding_slot=sort)
    for I in doc.premises:
        ref = _build_term(b, I)
        b.assert_fact(ref.id, premise=True)
    state = b.build()
    goal = GoalPattern(doc.goal)

    binding = Binding(dim_d)
    for d in doc.decls:
        if d.kind == "const" and _is_number(d.name):
            binding.set_scalar(state.find_symbol(d.name), float(d.name))
    for bind in doc.bindings:
        d = doc.decl(bind.name)
        nid = state.find_symbol(bind.name)
        frozen = not bind.free
        if d.sort == "scalar":
            if len(bind.values) != 1:
                raise BindingError(
                    f"{bind.name} is a scalar, got {len(bind.values)} numbers",
                    *bind.loc)
            binding.set_scalar(nid, bind.values[0], frozen)
        elif d.sort == "point":
            if len(bind.values) != 2:
                raise BindingError(
                    f"{bind.name} is a point, got {len(bind.values)} numbers",
                    *bind.loc)
            binding.set_point(nid, bind.values, frozen)
        else:
            if len(bind.values) != dim_d * dim_d:
                raise BindingError(
                    f"{bind.name} is a {dim_d}x{dim_d} matrix, got "
                    f"{len(bind.values)} numbers", *bind.loc)
            binding.set_matrix(nid,
                               np.array(bind.values).reshape(dim_d, dim_d),
                               frozen)
    binding.fill_random(state, np.random.default_rng(seed))
    return state, goal, binding


def parse_action(text: str) -> Action:
    return Action.parse(text)


# Canonical JSON for states


def _ref_list(refs: Sequence[EntityRef]) -> List[str]:
    return [str(I) for I in refs]


def state_to_dict(state: MathState) -> dict:
    nodes = []
    for I in sorted(state.nodes):
        n = state.node(I)
        nodes.append({
            "id": n.id,
            "type": n.node_type.value,
            "label": n.label,
            "sort": n.sort,
            "slot": n.binding_slot,
        })
    edges = []
    for I in sorted(state.edges):
        e = state.edge(I)
        edges.append({
            "id": e.id,
            "type": e.edge_type.value,
            "op": e.operator,
            "args": _ref_list(e.args),
            "output": e.output,
            "bound": sorted(e.bound_vars),
        })
    return {
        "nodes": nodes,
        "edges": edges,
        "facts": sorted(state.facts),
        "premises": sorted(state.premises),
        "next_id": state.next_id,
    }


def emit_state(state: MathState) -> bytes:
    return (util.stable_json(state_to_dict(state)) + "\n").encode()


def parse_state(data: Union[str, bytes]) -> MathState:
    try:
        d = json.loads(data)
        nodes = {}
        for I in d["nodes"]:
            nodes[I["id"]] = Node(I["id"], NodeType(I["type"]), I["label"],
                                  I["sort"], I["slot"])
        edges = {}
        for I in d["edges"]:
            edges[I["id"]] = Hyperedge(
                I["id"], EdgeType(I["type"]), I["op"],
                tuple(EntityRef.parse(J) for J in I["args"]), I["output"],
                frozenset(I["bound"]))
        state = MathState(nodes, edges, frozenset(d["facts"]),
                          frozenset(d["premises"]), d["next_id"])
    except (ValueError, KeyError, TypeError) as e:
        raise ParseError(f"Invalid state document: {e}") from None
    validate(state)
    return state


# Proof traces


@dataclasses.dataclass
class TraceStep:
    t: int
    action: str
    e: float
    r: float


@dataclasses.dataclass
class ProofTrace:
    problem: str
    seed: int
    method: str
    initial_energy: float
    steps: List[TraceStep] = dataclasses.field(default_factory=list)
    final_energy: Optional[float] = None
    solved: bool = False
    config_hash: str = ""
    version: str = __version__

    @property
    def actions(self) -> List[Action]:
        return [Action.parse(I.action) for I in self.steps]

    def total_reward(self) -> float:
        return sum(I.r for I in self.steps)

    def close(self, solved: bool):
        self.solved = solved
        self.final_energy = (self.steps[-1].e
                             if self.steps else self.initial_energy)


def emit_trace(trace: ProofTrace, format: str = "jsonl") -> bytes:
    """Header record, one record per step and a closing summary record"""
    if format != "jsonl":
        raise ValueError(f"Unsupported trace format {format!r}")
    final = trace.final_energy
    if final is None:
        final = trace.steps[-1].e if trace.steps else trace.initial_energy
    lines = [
        util.stable_json({
            "problem": trace.problem,
            "seed": trace.seed,
            "method": trace.method,
            "e0": trace.initial_energy,
            "config_hash": trace.config_hash,
            "version": trace.version,
        })
    ]
    for I in trace.steps:
        lines.append(
            util.stable_json({
                "t": I.t,
                "action": I.action,
                "e": I.e,
                "r": I.r
            }))
    lines.append(util.stable_json({"final": final, "solved": trace.solved}))
    return ("\n".join(lines) + "\n").encode()


def parse_trace(data: Union[str, bytes]) -> ProofTrace:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    records = []
    for lineno, line in enumerate(data.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append((lineno, json.loads(line)))
        except ValueError as e:
            raise ParseError(f"Invalid JSON record: {e}", lineno) from None
    if len(records) < 2:
        raise ParseError("A trace needs a header and a summary record")
    lineno = records[0][0]
    try:
        _, head = records[0]
        trace = ProofTrace(head["problem"], head["seed"], head["method"],
                           head["e0"],
                           config_hash=head.get("config_hash", ""),
                           version=head.get("version", __version__))
        for lineno, rec in records[1:-1]:
            trace.steps.append(
                TraceStep(rec["t"], rec["action"], rec["e"], rec["r"]))
        lineno, tail = records[-1]
        trace.final_energy = tail["final"]
        trace.solved = tail["solved"]
    except (KeyError, TypeError) as e:
        raise ParseError(f"Missing trace field {e}", lineno) from None
    return trace
