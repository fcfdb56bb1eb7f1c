# SPDX-License-Identifier: GPL-2.0+
"""Finite difference and faithfulness checks of the energy engines.

The same harness backs the test suite and the 'selftest' subcommand. Every
fixture is a single predicate over freshly drawn values, either satisfied
exactly or falsified by a fixed offset."""
import dataclasses
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .brain import BrainParams, grad_log_policy, grad_value_loss
from .energy import Binding, DomainWeights, total_energy
from .hypergraph import EdgeType, MathState, N, NodeType, StateBuilder
from .ideal_engine import Polynomial, effective_degree_bound, solve_witness
from .problem import problem_from_text


@dataclasses.dataclass
class GradCheck:
    error: float
    analytic: np.ndarray
    numeric: np.ndarray

    def ok(self, tol: float = 1e-5) -> bool:
        return self.error <= tol


def check_gradient(f: Callable[[np.ndarray], Tuple[float, np.ndarray]],
                   x: np.ndarray,
                   h: float = 1e-5,
                   indices: Optional[Sequence[int]] = None) -> GradCheck:
    """Compare f's analytic gradient against central differences, on the
    given coordinates or all of them. The error is the max abs difference
    scaled by max(1, |analytic|, |numeric|)."""
    x = np.asarray(x, dtype=np.float64)
    _, g = f(x)
    g = np.asarray(g, dtype=np.float64).ravel()
    if indices is None:
        indices = range(x.size)
    g = g[list(indices)]
    num = np.zeros_like(g)
    for j, i in enumerate(indices):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        num[j] = (f(xp)[0] - f(xm)[0]) / (2 * h)
    if g.size == 0:
        return GradCheck(0.0, g, num)
    scale = max(1.0, float(np.abs(g).max()), float(np.abs(num).max()))
    return GradCheck(float(np.abs(g - num).max()) / scale, g, num)


class FixtureBuilder(object):
    """Build small states together with their bindings"""
    def __init__(self, dim_d: int = 2, frozen: bool = False):
        self.b = StateBuilder()
        self.binding = Binding(dim_d)
        self.frozen = frozen

    def scalar(self, label: str, v: float):
        nid = self.b.add_node(NodeType.Variable, label, "scalar", "scalar")
        self.binding.set_scalar(nid, v, self.frozen)
        return N(nid)

    def point(self, label: str, xy):
        nid = self.b.add_node(NodeType.Variable, label, "point", "point")
        self.binding.set_point(nid, xy, self.frozen)
        return N(nid)

    def matrix(self, label: str, M):
        nid = self.b.add_node(NodeType.Variable, label, "matrix", "matrix")
        self.binding.set_matrix(nid, M, self.frozen)
        return N(nid)

    def term(self, op: str, *args):
        return N(self.b.term(op, args))

    def fact(self, op: str, *args) -> int:
        eid = self.b.intern_edge(EdgeType.Predicate, op, args)
        self.b.assert_fact(eid, premise=True)
        return eid

    def build(self) -> Tuple[MathState, Binding]:
        return self.b.build(), self.binding


def _rot(u: np.ndarray, theta: float = math.pi / 2) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])


def _seg(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """A random point and a direction of length in [0.5, 1.5]"""
    A = rng.uniform(-2, 2, 2)
    u = _rot(np.array([1.0, 0.0]), rng.uniform(0, 2 * math.pi))
    return A, u * rng.uniform(0.5, 1.5)


def _unit(u: np.ndarray) -> np.ndarray:
    return u / np.linalg.norm(u)


def fx_collinear(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    A, u = _seg(rng)
    C = A + rng.uniform(-2, 2) * u
    if false:
        C = C + _rot(_unit(u))
    return fb.fact("Collinear", fb.point(p + "A", A), fb.point(p + "B", A + u),
                   fb.point(p + "C", C))


def fx_parallel(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    A, u = _seg(rng)
    C = rng.uniform(-2, 2, 2)
    D = C + rng.uniform(0.5, 1.5) * u
    if false:
        D = D + _rot(_unit(u))
    return fb.fact("Parallel", fb.point(p + "A", A), fb.point(p + "B", A + u),
                   fb.point(p + "C", C), fb.point(p + "D", D))


def fx_perpendicular(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    A, u = _seg(rng)
    C = rng.uniform(-2, 2, 2)
    D = C + rng.uniform(0.5, 1.5) * _rot(u)
    if false:
        D = D + _unit(u)
    return fb.fact("Perpendicular", fb.point(p + "A", A),
                   fb.point(p + "B", A + u), fb.point(p + "C", C),
                   fb.point(p + "D", D))


def fx_congruent(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    A, u = _seg(rng)
    C = rng.uniform(-2, 2, 2)
    v = _rot(u, rng.uniform(0, 2 * math.pi))
    if false:
        v = 1.5 * v
    return fb.fact("Congruent", fb.point(p + "A", A), fb.point(p + "B", A + u),
                   fb.point(p + "C", C), fb.point(p + "D", C + v))


def fx_ratio(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    A, u = _seg(rng)
    C, v = _seg(rng)
    k = rng.uniform(0.5, 1.5)
    E = rng.uniform(-2, 2, 2)
    G = rng.uniform(-2, 2, 2)
    w1 = k * _rot(u, rng.uniform(0, 2 * math.pi))
    w2 = k * _rot(v, rng.uniform(0, 2 * math.pi))
    if false:
        w1 = 2 * w1
    pts = (A, A + u, C, C + v, E, E + w1, G, G + w2)
    return fb.fact("EqualRatio",
                   *(fb.point(f"{p}P{i}", I) for i, I in enumerate(pts)))


def fx_midpoint(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    A = rng.uniform(-2, 2, 2)
    B = rng.uniform(-2, 2, 2)
    M = (A + B) / 2
    if false:
        M = M + np.array([1.0, 0.0])
    mid = fb.term("Midpoint", fb.point(p + "A", A), fb.point(p + "B", B))
    return fb.fact("Equals", mid, fb.point(p + "M", M))


def fx_symmetric(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    d = fb.binding.dim_d
    M = rng.standard_normal((d, d))
    S = M + M.T
    if false:
        S[0, d - 1] += 1.0
    return fb.fact("Symmetric", fb.matrix(p + "S", S))


def fx_orthogonal(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    d = fb.binding.dim_d
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    if false:
        Q = 1.5 * Q
    return fb.fact("Orthogonal", fb.matrix(p + "Q", Q))


def fx_inverse(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    d = fb.binding.dim_d
    A = rng.standard_normal((d, d)) + 3 * np.eye(d)
    B = np.linalg.inv(A)
    if false:
        B = B + 0.5 * np.eye(d)
    return fb.fact("InverseOf", fb.matrix(p + "A", A), fb.matrix(p + "B", B))


def fx_product(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    d = fb.binding.dim_d
    A = rng.standard_normal((d, d))
    B = rng.standard_normal((d, d))
    C = A @ B
    if false:
        C[0, 0] += 1.0
    prod = fb.term("Product", fb.matrix(p + "A", A), fb.matrix(p + "B", B))
    return fb.fact("Equals", prod, fb.matrix(p + "C", C))


def fx_scalar_sum(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    x, y = rng.standard_normal(2)
    z = x + y + (1.0 if false else 0.0)
    s = fb.term("Sum", fb.scalar(p + "x", x), fb.scalar(p + "y", y))
    return fb.fact("Equals", s, fb.scalar(p + "z", z))


def fx_scalar_product(fb: FixtureBuilder, p: str, rng, false: bool) -> int:
    x, y = rng.standard_normal(2)
    z = x * y + (1.0 if false else 0.0)
    s = fb.term("Product", fb.scalar(p + "x", x), fb.scalar(p + "y", y))
    return fb.fact("Equals", s, fb.scalar(p + "z", z))


FIXTURES: Dict[str, Callable] = {
    "collinear": fx_collinear,
    "parallel": fx_parallel,
    "perpendicular": fx_perpendicular,
    "congruent": fx_congruent,
    "equal_ratio": fx_ratio,
    "midpoint": fx_midpoint,
    "symmetric": fx_symmetric,
    "orthogonal": fx_orthogonal,
    "inverse": fx_inverse,
    "matrix_product": fx_product,
    "scalar_sum": fx_scalar_sum,
    "scalar_product": fx_scalar_product,
}


def fixture(name: str, seed: int, false: bool = False,
            dim_d: int = 2) -> Tuple[MathState, Binding, int]:
    fb = FixtureBuilder(dim_d)
    eid = FIXTURES[name](fb, "", np.random.default_rng(seed), false)
    state, binding = fb.build()
    return state, binding, eid


def energy_function(state: MathState, binding: Binding,
                    weights: Optional[DomainWeights] = None):
    def f(x):
        rep = total_energy(state, binding.with_flat(x), weights)
        return rep.total, rep.gradient

    return f


@dataclasses.dataclass
class Outcome:
    name: str
    passed: bool
    detail: str


def gradient_suite(seeds: int = 5, tol: float = 1e-5) -> List[Outcome]:
    res = []
    for name in FIXTURES:
        worst = 0.0
        for seed in range(seeds):
            for false in (False, True):
                state, binding, _ = fixture(name, seed, false)
                chk = check_gradient(energy_function(state, binding),
                                     binding.flatten())
                worst = max(worst, chk.error)
        res.append(Outcome(f"gradient {name}", worst <= tol,
                           f"max error {worst:.2e}"))
    return res


def faithfulness_suite(seeds: int = 5) -> List[Outcome]:
    res = []
    for name in FIXTURES:
        bad = []
        for seed in range(seeds):
            state, binding, _ = fixture(name, seed)
            rep = total_energy(state, binding)
            if rep.total >= 1e-8:
                bad.append(f"true seed {seed}: {rep.total:.2e}")
            state, binding, eid = fixture(name, seed, True)
            rep = total_energy(state, binding)
            if rep.total <= 1e-4 or rep.violations(1e-4) != [eid]:
                bad.append(f"false seed {seed}: {rep.total:.2e}")
        res.append(Outcome(f"faithful {name}", not bad,
                           "; ".join(bad) if bad else "ok"))
    return res


def localization_suite(cases: int = 100, tol: float = 1e-8) -> List[Outcome]:
    """total < tol exactly when every per edge term is below tol"""
    rng = np.random.default_rng(0)
    names = sorted(FIXTURES)
    violations = 0
    for case in range(cases):
        fb = FixtureBuilder()
        for i in range(int(rng.integers(1, 4))):
            name = names[int(rng.integers(len(names)))]
            FIXTURES[name](fb, f"f{i}", rng, bool(rng.random() < 0.3))
        state, binding = fb.build()
        rep = total_energy(state, binding)
        every = all(v < tol for _, v in rep.per_edge.values())
        if (rep.total < tol) != every:
            violations += 1
    return [
        Outcome("localization", violations == 0,
                f"{violations} violations in {cases} cases")
    ]


CHAIN = ("(problem (decl a var) (decl b var) (decl c var) (decl d var) "
         "(premise (Equals a b)) (premise (Equals b c)) (premise (Equals c d)) "
         "(goal (Equals a d)))")


def brain_gradient_suite(samples: int = 40, tol: float = 1e-5) -> List[Outcome]:
    """Log policy and value loss gradients on sampled coordinates of a small
    network"""
    cfg = config.Config()
    cfg.brain.d_model = 8
    cfg.brain.layers = 1
    problem = problem_from_text(CHAIN, "chain", cfg)
    state = problem.state
    legal = problem.library.legal_actions(state)
    params = BrainParams.initial(problem.library, cfg.brain, 0)
    # Move the heads off their flat initial values
    rng = np.random.default_rng(1)
    params = params.with_flat(params.flat() +
                              0.1 * rng.standard_normal(params.size))
    idx = sorted(rng.choice(params.size, min(samples, params.size),
                            replace=False))
    action = legal[len(legal) // 2]

    def logp(theta):
        return grad_log_policy(state, params.with_flat(theta), action, legal)

    def vloss(theta):
        return grad_value_loss(state, params.with_flat(theta), 0.7)

    res = []
    for name, f in (("log policy", logp), ("value loss", vloss)):
        chk = check_gradient(f, params.flat(), indices=idx)
        res.append(Outcome(f"gradient brain {name}", chk.ok(tol),
                           f"max error {chk.error:.2e}"))
    return res


def _random_poly(rng, n_vars: int, degree: int, terms: int) -> Polynomial:
    res = Polynomial.zero(n_vars)
    for _ in range(terms):
        e = [0] * n_vars
        for _ in range(int(rng.integers(0, degree + 1))):
            e[int(rng.integers(n_vars))] += 1
        res = res + Polynomial.monomial(tuple(e), float(rng.uniform(-2, 2)))
    return res


def ideal_suite(cases: int = 10) -> List[Outcome]:
    """Constructed members are recovered and x is never in <x^2>"""
    ic = config.IdealConfig()
    rng = np.random.default_rng(0)
    bad = 0
    for _ in range(cases):
        F = [_random_poly(rng, 3, 2, 3) for _ in range(2)]
        if any(I.is_zero() for I in F):
            continue
        h = Polynomial.zero(3)
        for f in F:
            h = h + _random_poly(rng, 3, 2, 3) * f
        bound = effective_degree_bound(h, F, ic.slack, ic.cap)
        if solve_witness(h, F, bound).energy >= 1e-8:
            bad += 1
    res = [Outcome("ideal members", bad == 0, f"{bad} unrecovered")]
    bad = 0
    for n in range(1, 4):
        for i in range(n):
            x = Polynomial.variable(n, i)
            F = [x * x]
            bound = effective_degree_bound(x, F, ic.slack, ic.cap)
            if solve_witness(x, F, bound).energy <= 1e-3:
                bad += 1
    res.append(Outcome("ideal non-members", bad == 0, f"{bad} accepted"))
    return res


def run_all(quick: bool = True) -> List[Outcome]:
    seeds = 3 if quick else 100
    res = gradient_suite(seeds)
    res += faithfulness_suite(seeds)
    res += localization_suite(100 if quick else 1000)
    res += brain_gradient_suite(40 if quick else 200)
    res += ideal_suite(10 if quick else 100)
    return res


def format_table(outcomes: List[Outcome]) -> str:
    width = max(len(I.name) for I in outcomes)
    lines = [
        f"{I.name:<{width}}  {'PASS' if I.passed else 'FAIL'}  {I.detail}"
        for I in outcomes
    ]
    return "\n".join(lines)
