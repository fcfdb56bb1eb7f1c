# SPDX-License-Identifier: GPL-2.0+
"""Total logical energy of a state under a binding.

Only fact edges contribute. Each energetic fact is dispatched to the matrix,
ideal or geometry engine and the weighted terms are summed in ascending edge
id order together with their gradient over the free binding slots.
"""
import dataclasses
import enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from . import config, matrix_engine, util
from .algebra import GEOMETRY, MATRIX, LiftError, Lifter, Ring
from .geometry_engine import PointTermEvaluator, UnboundPointError
from .hypergraph import E, EdgeType, MathesisError, MathState, NodeType
from .matrix_engine import MatrixTermEvaluator, ShapeError, UnboundMatrixError


class EnergyError(MathesisError):
    pass


def _finite(node_id: int, v: np.ndarray):
    if not np.all(np.isfinite(v)):
        raise EnergyError(f"N{node_id} is bound to a non-finite value")


class Domain(enum.Enum):
    Matrix = "Matrix"
    Ideal = "Ideal"
    Geometry = "Geometry"
    NonEnergetic = "NonEnergetic"


class Binding(object):
    """Concrete values for the leaf symbols of a state, keyed by node id.

    Each slot is frozen (a fixed model instance) or free (an optimisation
    variable). The flat vector of free slots is ordered by ascending node id
    with matrices in row-major order."""
    def __init__(self, dim_d: int = 4):
        self.dim_d = dim_d
        self.scalars: Dict[int, float] = {}
        self.points: Dict[int, np.ndarray] = {}
        self.matrices: Dict[int, np.ndarray] = {}
        self.frozen: Set[int] = set()

    def copy(self) -> "Binding":
        res = Binding(self.dim_d)
        res.scalars = dict(self.scalars)
        res.points = {k: v.copy() for k, v in self.points.items()}
        res.matrices = {k: v.copy() for k, v in self.matrices.items()}
        res.frozen = set(self.frozen)
        return res

    def __contains__(self, node_id: int):
        return (node_id in self.scalars or node_id in self.points
                or node_id in self.matrices)

    def set_scalar(self, node_id: int, value: float, frozen: bool = True):
        value = float(value)
        _finite(node_id, np.array([value]))
        self.scalars[node_id] = value
        self._freeze(node_id, frozen)

    def set_point(self, node_id: int, xy, frozen: bool = True):
        P = np.array(xy, dtype=np.float64)
        if P.shape != (2, ):
            raise EnergyError(f"A point needs two coordinates, got {P.shape}")
        _finite(node_id, P)
        self.points[node_id] = P
        self._freeze(node_id, frozen)

    def set_matrix(self, node_id: int, M, frozen: bool = True):
        M = np.array(M, dtype=np.float64)
        if M.shape != (self.dim_d, self.dim_d):
            raise EnergyError(f"Matrices are {self.dim_d}x{self.dim_d}, got "
                              f"{M.shape}")
        _finite(node_id, M)
        self.matrices[node_id] = M
        self._freeze(node_id, frozen)

    def _freeze(self, node_id: int, frozen: bool):
        if frozen:
            self.frozen.add(node_id)
        else:
            self.frozen.discard(node_id)

    def _slot(self, node_id: int) -> Tuple[str, np.ndarray]:
        if node_id in self.scalars:
            return "scalar", np.array([self.scalars[node_id]])
        if node_id in self.points:
            return "point", self.points[node_id]
        return "matrix", self.matrices[node_id]

    def slot_ids(self) -> List[int]:
        return sorted(
            set(self.scalars) | set(self.points) | set(self.matrices))

    def free_ids(self) -> List[int]:
        return [I for I in self.slot_ids() if I not in self.frozen]

    def layout(self) -> List[Tuple[int, int, int]]:
        """(node id, offset, size) of every free slot in the flat vector"""
        res = []
        off = 0
        for I in self.free_ids():
            size = self._slot(I)[1].size
            res.append((I, off, size))
            off += size
        return res

    def flatten(self) -> np.ndarray:
        parts = [self._slot(I)[1].ravel(order="C") for I in self.free_ids()]
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts).astype(np.float64)

    def with_flat(self, vec: np.ndarray) -> "Binding":
        res = self.copy()
        for I, off, size in self.layout():
            chunk = np.asarray(vec[off:off + size], dtype=np.float64)
            if I in res.scalars:
                res.scalars[I] = float(chunk[0])
            elif I in res.points:
                res.points[I] = chunk.copy()
            else:
                res.matrices[I] = chunk.reshape(self.dim_d, self.dim_d).copy()
        return res

    def scatter(self, grads: Dict[int, np.ndarray]) -> np.ndarray:
        """Gradient map keyed by node id to a flat free-slot vector"""
        layout = self.layout()
        vec = np.zeros(sum(I[2] for I in layout))
        for I, off, size in layout:
            g = grads.get(I)
            if g is not None:
                vec[off:off + size] += np.ravel(g, order="C")
        return vec

    def fill_random(self, state: MathState, rng: np.random.Generator):
        """Give every unbound leaf symbol a free random value"""
        for nid in sorted(state.nodes):
            n = state.node(nid)
            if n.node_type == NodeType.CompoundTerm or nid in self:
                continue
            if n.sort == "scalar":
                self.set_scalar(nid, rng.standard_normal(), frozen=False)
            elif n.sort == "point":
                self.set_point(nid, rng.standard_normal(2), frozen=False)
            elif n.sort == "matrix":
                self.set_matrix(nid,
                                rng.standard_normal((self.dim_d, self.dim_d)),
                                frozen=False)

    def as_dict(self) -> dict:
        return {
            "dim_d": self.dim_d,
            "scalars": {str(k): v
                        for k, v in sorted(self.scalars.items())},
            "points": {str(k): v.tolist()
                       for k, v in sorted(self.points.items())},
            "matrices": {str(k): v.tolist()
                         for k, v in sorted(self.matrices.items())},
            "frozen": sorted(self.frozen),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Binding":
        res = cls(d["dim_d"])
        frozen = set(d.get("frozen", []))
        for k, v in d.get("scalars", {}).items():
            res.set_scalar(int(k), v, int(k) in frozen)
        for k, v in d.get("points", {}).items():
            res.set_point(int(k), v, int(k) in frozen)
        for k, v in d.get("matrices", {}).items():
            res.set_matrix(int(k), v, int(k) in frozen)
        return res

    def __eq__(self, other):
        if not isinstance(other, Binding):
            return NotImplemented
        return util.stable_json(self.as_dict()) == util.stable_json(
            other.as_dict())


@dataclasses.dataclass(frozen=True)
class DomainWeights:
    matrix: float = 1.0
    ideal: float = 1.0
    geometry: float = 1.0

    def __post_init__(self):
        if min(self.matrix, self.ideal, self.geometry) < 0:
            raise EnergyError("Domain weights must be non-negative")

    @classmethod
    def from_config(cls, cfg) -> "DomainWeights":
        w = cfg.energy.weights
        return cls(w.matrix, w.ideal, w.geometry)

    def of(self, domain: Domain) -> float:
        if domain == Domain.Matrix:
            return self.matrix
        if domain == Domain.Ideal:
            return self.ideal
        if domain == Domain.Geometry:
            return self.geometry
        return 0.0


@dataclasses.dataclass
class EnergyReport:
    total: float
    per_edge: Dict[int, Tuple[Domain, float]]
    gradient: np.ndarray
    history: List[float] = dataclasses.field(default_factory=list)
    converged: bool = True

    def violations(self, tol: float) -> List[int]:
        return [k for k, v in sorted(self.per_edge.items()) if v[1] >= tol]

    def as_dict(self, state: Optional[MathState] = None) -> dict:
        edges = []
        for k, (dom, v) in sorted(self.per_edge.items()):
            rec = {"edge": f"E{k}", "domain": dom.value, "value": v}
            if state is not None:
                rec["expr"] = state.describe(E(k))
            edges.append(rec)
        return {
            "total": self.total,
            "per_edge": edges,
            "gradient_norm": float(np.linalg.norm(self.gradient)),
            "converged": self.converged,
        }


def classify_edge(state: MathState, edge_id: int) -> Domain:
    e = state.edge(edge_id)
    if e.edge_type != EdgeType.Predicate:
        return Domain.NonEnergetic
    if e.operator in GEOMETRY:
        return Domain.Geometry
    if e.operator in MATRIX:
        return Domain.Matrix
    sorts = sorted({state.node(I.id).sort for I in e.args})
    if len(sorts) != 1:
        raise EnergyError(f"E{edge_id} {e.operator} mixes {' and '.join(sorts)} "
                          "operands")
    sort = sorts[0]
    if sort == "matrix":
        return Domain.Matrix
    if sort == "point":
        return Domain.Geometry
    if sort == "scalar":
        return Domain.Ideal
    raise EnergyError(f"E{edge_id} {e.operator} over {sort} terms has no "
                      "energy")


class EnergyKernel(object):
    """Per-edge energy evaluation for one (state, binding) pair"""
    def __init__(self, state: MathState, binding: Binding):
        self.state = state
        self.binding = binding
        self.matrices = MatrixTermEvaluator(state, binding.matrices.get)
        self.points = PointTermEvaluator(state, binding.points.get)
        self._lifter: Optional[Lifter] = None
        self._x: Optional[np.ndarray] = None

    def _ring_point(self) -> Tuple[Lifter, np.ndarray]:
        if self._lifter is None:
            ring = Ring(self.state)
            x = np.zeros(ring.n_vars)
            for nid, I in ring.scalars.items():
                if nid not in self.binding.scalars:
                    raise EnergyError(f"Scalar {self.state.node(nid).label} "
                                      f"(N{nid}) has no binding")
                x[I] = self.binding.scalars[nid]
            for nid, (ix, iy) in ring.points.items():
                P = self.binding.points.get(nid)
                if P is not None:
                    x[ix], x[iy] = P
            self._lifter = Lifter(self.state, ring)
            self._x = x
        return self._lifter, self._x

    def _matrix(self, op: str, args: List[int]):
        m = self.matrices
        prods = [self.state.producer(I) for I in args]
        if op == "Symmetric":
            term = matrix_engine.e_sym(m.value(args[0]), ids=args)
        elif op == "Orthogonal":
            term = matrix_engine.e_orth(m.value(args[0]), ids=args)
        elif op == "InverseOf":
            term = matrix_engine.e_inv(m.value(args[0]), m.value(args[1]),
                                       ids=args)
        else:
            term = self._matrix_equals(args, prods)
        term = m.scatter(term)
        return term.value, term.grads

    def _matrix_equals(self, args: List[int], prods):
        m = self.matrices
        # X = Inverse A scores ||A X - I||^2, finite for a singular A
        for i in (0, 1):
            p, other = prods[i], args[1 - i]
            if p is not None and p.operator == "Inverse":
                a = p.args[0].id
                return matrix_engine.e_inv(m.value(a), m.value(other),
                                           ids=(a, other))
        for i in (0, 1):
            p, other = prods[i], args[1 - i]
            if p is not None and p.operator == "Product":
                a, b = (I.id for I in p.args)
                return matrix_engine.e_mult(m.value(a), m.value(b),
                                            m.value(other),
                                            ids=(a, b, other))
        return matrix_engine.e_eq(m.value(args[0]), m.value(args[1]),
                                  ids=args)

    def _ideal(self, args: List[int]):
        lifter, x = self._ring_point()
        p = lifter.scalar(args[0]) - lifter.scalar(args[1])
        pv = p.evaluate(x)
        grads: Dict[int, np.ndarray] = {}
        for nid, I in lifter.ring.scalars.items():
            d = p.derivative(I)
            if d:
                grads[nid] = np.array([2 * pv * d.evaluate(x)])
        return pv * pv, grads

    def edge_energy(self, edge_id: int, domain: Optional[Domain] = None):
        """(domain, unweighted value, grads keyed by leaf node id)"""
        if domain is None:
            domain = classify_edge(self.state, edge_id)
        if domain == Domain.NonEnergetic:
            return domain, 0.0, {}
        e = self.state.edge(edge_id)
        args = [I.id for I in e.args]
        try:
            if domain == Domain.Matrix:
                value, grads = self._matrix(e.operator, args)
            elif domain == Domain.Geometry:
                term = self.points.evaluate(e.operator, args)
                value, grads = term.value, term.grads
            else:
                value, grads = self._ideal(args)
        except (UnboundMatrixError, UnboundPointError, ShapeError,
                LiftError) as ex:
            raise EnergyError(f"E{edge_id} {e.operator}: {ex}") from None
        return domain, float(value), grads


def total_energy(state: MathState,
                 binding: Binding,
                 weights: Optional[DomainWeights] = None,
                 edges: Optional[Iterable[int]] = None) -> EnergyReport:
    """Weighted sum of the energies of the fact edges, ascending edge id"""
    if weights is None:
        weights = DomainWeights()
    kernel = EnergyKernel(state, binding)
    total = 0.0
    per_edge: Dict[int, Tuple[Domain, float]] = {}
    grads: Dict[int, np.ndarray] = {}
    for eid in sorted(state.facts if edges is None else edges):
        domain = classify_edge(state, eid)
        if domain == Domain.NonEnergetic:
            continue
        _, value, g = kernel.edge_energy(eid, domain)
        w = weights.of(domain)
        per_edge[eid] = (domain, w * value)
        total += w * value
        for k in sorted(g):
            grads[k] = grads[k] + w * g[k] if k in grads else w * g[k]
    return EnergyReport(total, per_edge, binding.scatter(grads), [total])


def is_consistent(state: MathState,
                  binding: Binding,
                  tol: float = 1e-8,
                  weights: Optional[DomainWeights] = None) -> bool:
    return total_energy(state, binding, weights).total < tol


def minimize_binding(state: MathState,
                     binding: Binding,
                     weights: Optional[DomainWeights] = None,
                     steps: int = 1000,
                     lr: float = 0.1,
                     armijo_c: float = 1e-4,
                     shrink: float = 0.5,
                     tol: float = 1e-12) -> Tuple[Binding, EnergyReport]:
    """Gradient descent on the free slots with Armijo backtracking. The
    recorded energy history never increases."""
    best = binding.copy()
    rep = total_energy(state, best, weights)
    history = [rep.total]
    x = best.flatten()
    converged = True
    if x.size == 0 or rep.total <= tol:
        rep.history = history
        return best, rep

    converged = False
    for _ in range(steps):
        g = rep.gradient
        gg = float(g @ g)
        if rep.total <= tol or gg <= tol * tol:
            converged = True
            break
        t = lr
        while True:
            cand = best.with_flat(x - t * g)
            crep = total_energy(state, cand, weights)
            if crep.total <= rep.total - armijo_c * t * gg:
                break
            t *= shrink
            if t < 1e-20:
                crep = None
                break
        if crep is None:
            break
        best, rep, x = cand, crep, x - t * g
        history.append(rep.total)
    else:
        converged = rep.total <= tol
    if rep.total <= tol:
        converged = True
    if not converged:
        config.logger.warning(
            f"Energy minimisation stopped at {rep.total:.3e} after "
            f"{len(history) - 1} steps")
    rep.history = history
    rep.converged = converged
    return best, rep
