# SPDX-License-Identifier: GPL-2.0+
"""Planar Euclidean predicate energies over point coordinates.

Every energy is the square of a polynomial residual (a cross product, a dot
product or a difference of squared distances) so it is smooth everywhere and
vanishes exactly when the predicate holds.
"""
import dataclasses
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .hypergraph import MathesisError, MathState

# Squared lengths below this are treated as degenerate segments
ATOM = 1e-12


class UnboundPointError(MathesisError):
    pass


@dataclasses.dataclass
class GeometryEnergyTerm:
    value: float
    grads: Dict[Hashable, np.ndarray]


def _pt(P) -> np.ndarray:
    if P is None:
        raise UnboundPointError("Point has no coordinates")
    P = np.asarray(P, dtype=np.float64)
    if P.shape != (2, ):
        raise UnboundPointError(f"Points have two coordinates, got {P.shape}")
    return P


def _term(value: float, ids: Sequence[Hashable],
          grads: Sequence[np.ndarray]) -> GeometryEnergyTerm:
    res: Dict[Hashable, np.ndarray] = {}
    for k, g in zip(ids, grads):
        res[k] = res[k] + g if k in res else g
    return GeometryEnergyTerm(float(value), res)


def _cross(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def _degenerate(name: str, *segs: np.ndarray):
    for I in segs:
        if float(I @ I) < ATOM:
            config.logger.warning(
                f"{name}: zero-length segment, the predicate holds vacuously")
            return


def d_sq(P, Q) -> float:
    P, Q = _pt(P), _pt(Q)
    u = Q - P
    return float(u[0] * u[0] + u[1] * u[1])


def e_point_eq(P, Q, ids=(0, 1)) -> GeometryEnergyTerm:
    P, Q = _pt(P), _pt(Q)
    R = P - Q
    return _term(d_sq(P, Q), ids, (2 * R, -2 * R))


def e_coll(A, B, C, ids=(0, 1, 2)) -> GeometryEnergyTerm:
    """Squared cross product of AB and AC"""
    A, B, C = _pt(A), _pt(B), _pt(C)
    u, v = B - A, C - A
    c = _cross(u, v)
    gB = np.array([v[1], -v[0]])
    gC = np.array([-u[1], u[0]])
    return _term(c * c, ids, (-2 * c * (gB + gC), 2 * c * gB, 2 * c * gC))


def _seg_pair(A, B, C, D) -> Tuple[np.ndarray, np.ndarray]:
    A, B, C, D = _pt(A), _pt(B), _pt(C), _pt(D)
    return B - A, D - C


def e_para(A, B, C, D, ids=(0, 1, 2, 3)) -> GeometryEnergyTerm:
    """Squared cross product of the directions AB and CD"""
    u, v = _seg_pair(A, B, C, D)
    _degenerate("Parallel", u, v)
    c = _cross(u, v)
    gu = 2 * c * np.array([v[1], -v[0]])
    gv = 2 * c * np.array([-u[1], u[0]])
    return _term(c * c, ids, (-gu, gu, -gv, gv))


def e_perp(A, B, C, D, ids=(0, 1, 2, 3)) -> GeometryEnergyTerm:
    """Squared dot product of the directions AB and CD"""
    u, v = _seg_pair(A, B, C, D)
    _degenerate("Perpendicular", u, v)
    d = float(u @ v)
    gu = 2 * d * v
    gv = 2 * d * u
    return _term(d * d, ids, (-gu, gu, -gv, gv))


def e_cong(A, B, C, D, ids=(0, 1, 2, 3)) -> GeometryEnergyTerm:
    """(|AB|^2 - |CD|^2)^2"""
    u, v = _seg_pair(A, B, C, D)
    delta = float(u @ u - v @ v)
    gu = 4 * delta * u
    gv = -4 * delta * v
    return _term(delta * delta, ids, (-gu, gu, -gv, gv))


def e_ratio(A, B, C, D, E, F, G, H,
            ids=(0, 1, 2, 3, 4, 5, 6, 7)) -> GeometryEnergyTerm:
    """AB/CD = EF/GH by cross multiplication of squared lengths:
    (|AB|^2 |GH|^2 - |EF|^2 |CD|^2)^2"""
    u1, u2 = _seg_pair(A, B, C, D)
    u3, u4 = _seg_pair(E, F, G, H)
    s1, s2, s3, s4 = (float(I @ I) for I in (u1, u2, u3, u4))
    delta = s1 * s4 - s3 * s2
    g1 = 2 * delta * s4 * 2 * u1
    g2 = 2 * delta * -s3 * 2 * u2
    g3 = 2 * delta * -s2 * 2 * u3
    g4 = 2 * delta * s1 * 2 * u4
    return _term(delta * delta, ids, (-g1, g1, -g2, g2, -g3, g3, -g4, g4))


PREDICATES: Dict[str, Tuple[int, Callable[..., GeometryEnergyTerm]]] = {
    "Collinear": (3, e_coll),
    "Parallel": (4, e_para),
    "Perpendicular": (4, e_perp),
    "Congruent": (4, e_cong),
    "EqualRatio": (8, e_ratio),
}


class PointTermEvaluator(object):
    """Resolves point-valued terms (Midpoint) to coordinates and lines to
    their defining point pairs, routing gradients back to bound points"""
    def __init__(self, state: MathState,
                 lookup: Callable[[int], Optional[np.ndarray]]):
        self.state = state
        self.lookup = lookup

    def value(self, node_id: int) -> np.ndarray:
        prod = self.state.producer(node_id)
        if prod is None:
            res = self.lookup(node_id)
            if res is None:
                raise UnboundPointError(
                    f"Point {self.state.node(node_id).label} (N{node_id}) has "
                    "no coordinates")
            return _pt(res)
        if prod.operator != "Midpoint":
            raise UnboundPointError(f"{prod.operator} is not a point term")
        return (self.value(prod.args[0].id) + self.value(prod.args[1].id)) / 2

    def backprop(self, node_id: int, grad: np.ndarray,
                 out: Dict[int, np.ndarray]):
        prod = self.state.producer(node_id)
        if prod is None:
            out[node_id] = out[node_id] + grad if node_id in out else grad
            return
        for I in prod.args:
            self.backprop(I.id, grad / 2, out)

    def points(self, args: Sequence[int]) -> List[int]:
        """Expand line arguments into their two defining point nodes"""
        res = []
        for I in args:
            n = self.state.node(I)
            if n.sort == "line":
                prod = self.state.producer(I)
                if prod is None or prod.operator != "Line":
                    raise UnboundPointError(f"Line N{I} has no defining points")
                res.extend(J.id for J in prod.args)
            else:
                res.append(I)
        return res

    def evaluate(self, operator: str,
                 args: Sequence[int]) -> GeometryEnergyTerm:
        """Energy of a geometry predicate, grads keyed by bound point ids"""
        pts = self.points(args)
        if operator == "Equals":
            fn, want = e_point_eq, 2
        else:
            want, fn = PREDICATES[operator]
        if len(pts) != want:
            raise UnboundPointError(
                f"{operator} needs {want} points, got {len(pts)}")
        term = fn(*(self.value(I) for I in pts), ids=tuple(range(want)))
        out: Dict[int, np.ndarray] = {}
        for k in sorted(term.grads):
            self.backprop(pts[k], term.grads[k], out)
        return GeometryEnergyTerm(term.value, out)
