# SPDX-License-Identifier: GPL-2.0+
"""Algebraic lifting of hypergraph terms and facts to polynomials.

Scalar symbols become ring variables and every leaf point contributes an x
and a y coordinate variable. A lifted fact is a list of polynomials that all
vanish exactly when the fact holds.
"""
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .hypergraph import (EdgeType, GoalPattern, MathesisError,
                         MathState, NodeType, PApp, PForAll, PSym, PTerm, PVar)
from .ideal_engine import Polynomial


class LiftError(MathesisError):
    def __init__(self, msg: str, edges: Iterable[int] = ()):
        self.edges = sorted(edges)
        if self.edges:
            msg = f"{msg}: {', '.join(f'E{I}' for I in self.edges)}"
        super().__init__(msg)


GEOMETRY = frozenset(
    ("Collinear", "Parallel", "Perpendicular", "Congruent", "EqualRatio"))
MATRIX = frozenset(("Symmetric", "Orthogonal", "InverseOf"))


def numeric_label(label: str) -> Optional[float]:
    try:
        return float(label)
    except ValueError:
        return None


class Ring(object):
    """Ring variables of a state: scalar symbols and point coordinates, in
    ascending node id order"""
    def __init__(self, state: MathState):
        self.names: List[str] = []
        self.scalars: Dict[int, int] = {}
        self.points: Dict[int, Tuple[int, int]] = {}
        for nid in sorted(state.nodes):
            n = state.node(nid)
            if n.node_type == NodeType.CompoundTerm:
                continue
            if n.sort == "scalar":
                if n.node_type == NodeType.Constant and numeric_label(
                        n.label) is not None:
                    continue
                self.scalars[nid] = len(self.names)
                self.names.append(n.label)
            elif n.sort == "point":
                self.points[nid] = (len(self.names), len(self.names) + 1)
                self.names.extend((f"x_{n.label}", f"y_{n.label}"))

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def var(self, idx: int) -> Polynomial:
        return Polynomial.variable(self.n_vars, idx)

    def const(self, value: float) -> Polynomial:
        return Polynomial.constant(self.n_vars, value)

    def format(self, p: Polynomial) -> str:
        return p.format(self.names)


PointPoly = Tuple[Polynomial, Polynomial]


def _sub(a: PointPoly, b: PointPoly) -> PointPoly:
    return (a[0] - b[0], a[1] - b[1])


def _cross(u: PointPoly, v: PointPoly) -> Polynomial:
    return u[0] * v[1] - u[1] * v[0]


def _dot(u: PointPoly, v: PointPoly) -> Polynomial:
    return u[0] * v[0] + u[1] * v[1]


def geometry_residual(operator: str, pts: Sequence[PointPoly]) -> Polynomial:
    """The inner (unsquared) residual polynomial of a geometry predicate"""
    if operator == "Collinear":
        A, B, C = pts
        return _cross(_sub(B, A), _sub(C, A))
    segs = [_sub(pts[I + 1], pts[I]) for I in range(0, len(pts), 2)]
    if operator == "Parallel":
        return _cross(segs[0], segs[1])
    if operator == "Perpendicular":
        return _dot(segs[0], segs[1])
    if operator == "Congruent":
        return _dot(segs[0], segs[0]) - _dot(segs[1], segs[1])
    if operator == "EqualRatio":
        s = [_dot(I, I) for I in segs]
        return s[0] * s[3] - s[2] * s[1]
    raise LiftError(f"{operator} is not a geometry predicate")


class Lifter(object):
    """Translates terms, facts and goal patterns of one state to polynomials"""
    def __init__(self, state: MathState, ring: Optional[Ring] = None):
        self.state = state
        self.ring = ring if ring is not None else Ring(state)
        self._scalar: Dict[int, Polynomial] = {}
        self._point: Dict[int, PointPoly] = {}

    def scalar(self, node_id: int) -> Polynomial:
        res = self._scalar.get(node_id)
        if res is not None:
            return res
        n = self.state.node(node_id)
        if n.sort != "scalar":
            raise LiftError(f"{n.label} (N{node_id}) is a {n.sort}, not a "
                            "scalar term")
        prod = self.state.producer(node_id)
        if prod is None:
            if node_id in self.ring.scalars:
                res = self.ring.var(self.ring.scalars[node_id])
            else:
                value = numeric_label(n.label)
                if value is None:
                    raise LiftError(f"Symbol {n.label} is not in the ring")
                res = self.ring.const(value)
        else:
            res = self._apply(prod.operator,
                              [self.scalar(I.id) for I in prod.args])
        self._scalar[node_id] = res
        return res

    def _apply(self, op: str, args: List[Polynomial]) -> Polynomial:
        if op == "Sum":
            return args[0] + args[1]
        if op == "Sub":
            return args[0] - args[1]
        if op == "Product":
            return args[0] * args[1]
        raise LiftError(f"{op} has no polynomial form")

    def point(self, node_id: int) -> PointPoly:
        res = self._point.get(node_id)
        if res is not None:
            return res
        prod = self.state.producer(node_id)
        if prod is None:
            if node_id not in self.ring.points:
                raise LiftError(f"N{node_id} is not a point")
            ix, iy = self.ring.points[node_id]
            res = (self.ring.var(ix), self.ring.var(iy))
        elif prod.operator == "Midpoint":
            a = self.point(prod.args[0].id)
            b = self.point(prod.args[1].id)
            res = ((a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5)
        else:
            raise LiftError(f"{prod.operator} is not a point term")
        self._point[node_id] = res
        return res

    def _points(self, args: Sequence[int]) -> List[PointPoly]:
        res = []
        for I in args:
            n = self.state.node(I)
            if n.sort == "line":
                prod = self.state.producer(I)
                res.extend(self.point(J.id) for J in prod.args)
            else:
                res.append(self.point(I))
        return res

    def fact(self, edge_id: int) -> Optional[List[Polynomial]]:
        """Polynomials of an energetic edge, None for structural edges"""
        e = self.state.edge(edge_id)
        if e.edge_type != EdgeType.Predicate:
            return None
        sorts = {self.state.node(I.id).sort for I in e.args}
        try:
            if e.operator in MATRIX or "matrix" in sorts:
                raise LiftError("Matrix facts have no polynomial form")
            if e.operator in GEOMETRY:
                return [
                    geometry_residual(e.operator,
                                      self._points([I.id for I in e.args]))
                ]
            if e.operator == "Equals":
                a, b = (I.id for I in e.args)
                if sorts == {"point"}:
                    return list(_sub(self.point(a), self.point(b)))
                if sorts == {"scalar"}:
                    return [self.scalar(a) - self.scalar(b)]
        except LiftError as ex:
            raise LiftError(str(ex), [edge_id]) from None
        raise LiftError(f"{e.operator} over {sorted(sorts)} is not liftable",
                        [edge_id])

    def facts(self, edge_ids: Iterable[int]) -> List[Polynomial]:
        """Lift many facts, reporting every unliftable edge at once"""
        res: List[Polynomial] = []
        bad = []
        for I in sorted(edge_ids):
            try:
                polys = self.fact(I)
            except LiftError:
                bad.append(I)
                continue
            if polys:
                res.extend(polys)
        if bad:
            raise LiftError("Unliftable facts", bad)
        return res

    def pattern_term(self, p: PTerm, want: str):
        """Lift a closed goal pattern term. want is 'scalar' or 'point'"""
        if isinstance(p, PVar):
            raise LiftError(f"Pattern variable ?{p.name} cannot be lifted")
        if isinstance(p, PSym):
            nid = self.state.find_symbol(p.label)
            if nid is None:
                raise LiftError(f"Unknown symbol {p.label}")
            return self.point(nid) if want == "point" else self.scalar(nid)
        if isinstance(p, PApp):
            if want == "point":
                if p.operator != "Midpoint":
                    raise LiftError(f"{p.operator} is not a point term")
                a = self.pattern_term(p.args[0], "point")
                b = self.pattern_term(p.args[1], "point")
                return ((a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5)
            return self._apply(p.operator,
                               [self.pattern_term(I, want) for I in p.args])
        raise LiftError("Quantified subterms cannot be lifted")

    def _pattern_sort(self, p: PTerm) -> str:
        if isinstance(p, PSym):
            nid = self.state.find_symbol(p.label)
            if nid is None:
                raise LiftError(f"Unknown symbol {p.label}")
            return self.state.node(nid).sort
        if isinstance(p, PApp):
            if p.operator == "Midpoint":
                return "point"
            if p.operator == "Line":
                return "line"
            return self._pattern_sort(p.args[0])
        raise LiftError("Goal terms must be closed")

    def _pattern_points(self, args: Sequence[PTerm]) -> List[PointPoly]:
        res = []
        for I in args:
            if isinstance(I, PApp) and I.operator == "Line":
                res.extend(self.pattern_term(J, "point") for J in I.args)
            else:
                res.append(self.pattern_term(I, "point"))
        return res

    def goal(self, pattern: GoalPattern) -> Polynomial:
        """The polynomial h whose vanishing is the goal"""
        root = pattern.root
        if isinstance(root, PForAll) or root.operator in ("Implies", "And"):
            raise LiftError(f"Goal {pattern} is not a liftable predicate")
        if root.operator in MATRIX:
            raise LiftError(f"Goal {pattern} is a matrix predicate")
        if root.operator in GEOMETRY:
            return geometry_residual(root.operator,
                                     self._pattern_points(root.args))
        sort = self._pattern_sort(root.args[0])
        if sort == "scalar":
            return (self.pattern_term(root.args[0], "scalar") -
                    self.pattern_term(root.args[1], "scalar"))
        if sort == "point":
            # Collapse the two coordinate differences into one polynomial
            a = self.pattern_term(root.args[0], "point")
            b = self.pattern_term(root.args[1], "point")
            d = _sub(a, b)
            return d[0] * d[0] + d[1] * d[1]
        raise LiftError(f"Goal {pattern} is over {sort} terms")


def energetic_facts(state: MathState) -> List[int]:
    return [
        I for I in sorted(state.facts)
        if state.edge(I).edge_type == EdgeType.Predicate
    ]


def algebraic_lift(state: MathState, goal: GoalPattern,
                   ring: Optional[Ring] = None
                   ) -> Tuple[List[Polynomial], Polynomial]:
    """(F, h): lifted energetic facts in ascending edge id order and the goal
    polynomial. Raises LiftError listing every unliftable edge."""
    lifter = Lifter(state, ring)
    F = lifter.facts(energetic_facts(state))
    return F, lifter.goal(goal)


def is_liftable(state: MathState, goal: GoalPattern) -> bool:
    try:
        algebraic_lift(state, goal)
    except LiftError:
        return False
    return True
