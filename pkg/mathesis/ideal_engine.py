# SPDX-License-Identifier: GPL-2.0+
"""Sparse multivariate polynomials and ideal membership by least squares.

A Polynomial maps exponent tuples (one entry per variable) to float
coefficients. Membership h in <f_1..f_s> is scored by the squared coefficient
norm of the residual h - sum g_i f_i, minimised over witnesses g_i from a
bounded degree monomial basis.
"""
import dataclasses
import math
import re
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .hypergraph import MathesisError

Exponent = Tuple[int, ...]

PRUNE = 1e-15


class ArityError(MathesisError):
    pass


class BasisSizeError(MathesisError):
    pass


def grlex_key(e: Exponent):
    """Ascending graded lexicographic order, ie 1 < x < y < x^2 < xy < y^2"""
    return (sum(e), tuple(-I for I in e))


class Polynomial(object):
    """An immutable sparse polynomial over n_vars variables"""
    __slots__ = ("n_vars", "terms")

    def __init__(self, n_vars: int, terms: Optional[Dict[Exponent, float]] = None):
        self.n_vars = n_vars
        res = {}
        for e, c in (terms or {}).items():
            if len(e) != n_vars:
                raise ArityError(
                    f"Monomial {e} does not have {n_vars} exponents")
            c = float(c)
            if abs(c) >= PRUNE:
                res[tuple(e)] = c
        self.terms: Dict[Exponent, float] = res

    @classmethod
    def zero(cls, n_vars: int) -> "Polynomial":
        return cls(n_vars)

    @classmethod
    def constant(cls, n_vars: int, value: float) -> "Polynomial":
        return cls(n_vars, {(0, ) * n_vars: value})

    @classmethod
    def variable(cls, n_vars: int, idx: int) -> "Polynomial":
        if not 0 <= idx < n_vars:
            raise ArityError(f"Invalid variable index {idx} for {n_vars} vars")
        e = [0] * n_vars
        e[idx] = 1
        return cls(n_vars, {tuple(e): 1.0})

    @classmethod
    def monomial(cls, e: Exponent, coeff: float = 1.0) -> "Polynomial":
        return cls(len(e), {tuple(e): coeff})

    def _same(self, other: "Polynomial"):
        if self.n_vars != other.n_vars:
            raise ArityError(f"Polynomials over {self.n_vars} and "
                             f"{other.n_vars} variables do not mix")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._same(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.n_vars, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        res = dict(self.terms)
        for e, c in other.terms.items():
            res[e] = res.get(e, 0.0) + c
        return Polynomial(self.n_vars, res)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n_vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial(self.n_vars,
                              {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        res: Dict[Exponent, float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                res[e] = res.get(e, 0.0) + c1 * c2
        return Polynomial(self.n_vars, res)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("Polynomial powers must be non-negative integers")
        res = Polynomial.constant(self.n_vars, 1.0)
        base = self
        while k:
            if k & 1:
                res = res * base
            base = base * base
            k >>= 1
        return res

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n_vars == other.n_vars and self.terms == other.terms

    def __hash__(self):
        return hash((self.n_vars, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"Polynomial({self.format()!r})"

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree, -1 for the zero polynomial"""
        return max((sum(e) for e in self.terms), default=-1)

    def sorted_terms(self) -> List[Tuple[Exponent, float]]:
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0]))

    def norm_sq(self) -> float:
        return float(sum(c * c for _, c in self.sorted_terms()))

    def is_close(self, other: "Polynomial", tol: float = 1e-9) -> bool:
        return (self - other).norm_sq() <= tol * tol

    def evaluate(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_vars, ):
            raise ArityError(f"Need {self.n_vars} values, got {x.shape}")
        res = 0.0
        for e, c in self.sorted_terms():
            res += c * float(np.prod(x**np.asarray(e, dtype=np.float64)))
        return res

    def derivative(self, idx: int) -> "Polynomial":
        res: Dict[Exponent, float] = {}
        for e, c in self.terms.items():
            if e[idx] == 0:
                continue
            d = list(e)
            d[idx] -= 1
            res[tuple(d)] = res.get(tuple(d), 0.0) + c * e[idx]
        return Polynomial(self.n_vars, res)

    def gradient(self, x: Sequence[float]) -> np.ndarray:
        return np.array(
            [self.derivative(I).evaluate(x) for I in range(self.n_vars)],
            dtype=np.float64)

    def variables(self) -> List[int]:
        return [
            I for I in range(self.n_vars) if any(e[I] for e in self.terms)
        ]

    def format(self, names: Optional[Sequence[str]] = None) -> str:
        """Render as text, ie '3*x^2*y - 1.5*y + 2', highest degree first and
        lexicographic within a degree"""
        if names is None:
            names = [f"x{I}" for I in range(self.n_vars)]
        if not self.terms:
            return "0"
        out = []
        for e, c in sorted(self.terms.items(),
                           key=lambda t: (-sum(t[0]), [-I for I in t[0]])):
            factors = []
            for n, k in zip(names, e):
                if k == 1:
                    factors.append(n)
                elif k > 1:
                    factors.append(f"{n}^{k}")
            mag = abs(c)
            if not factors:
                body = _num(mag)
            elif mag == 1.0:
                body = "*".join(factors)
            else:
                body = "*".join([_num(mag)] + factors)
            if not out:
                out.append(f"-{body}" if c < 0 else body)
            else:
                out.append(f"- {body}" if c < 0 else f"+ {body}")
        return " ".join(out)


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^()]))")


class _PolyParser(object):
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.names = {n: I for I, n in enumerate(names)}
        self.n_vars = len(names)
        self.toks: List[Tuple[str, str, int]] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                raise ValueError(f"Unexpected character at {pos}: "
                                 f"{text[pos:pos + 1]!r}")
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self) -> Optional[Tuple[str, str, int]]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, value: Optional[str] = None) -> Tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ValueError("Unexpected end of polynomial")
        if value is not None and tok[1] != value:
            raise ValueError(f"Expected {value!r} at {tok[2]}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        res = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ValueError(f"Unexpected {tok[1]!r} at {tok[2]}")
        return res

    def expr(self) -> Polynomial:
        res = self.term()
        while self.peek() is not None and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            res = res + rhs if op == "+" else res - rhs
        return res

    def term(self) -> Polynomial:
        res = self.unary()
        while self.peek() is not None and self.peek()[1] == "*":
            self.take()
            res = res * self.unary()
        return res

    def unary(self) -> Polynomial:
        tok = self.peek()
        if tok is not None and tok[1] == "-":
            self.take()
            return -self.unary()
        return self.power()

    def power(self) -> Polynomial:
        res = self.atom()
        tok = self.peek()
        if tok is not None and tok[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ValueError(f"Exponent at {pos} must be an integer")
            res = res**int(val)
        return res

    def atom(self) -> Polynomial:
        kind, val, pos = self.take()
        if kind == "num":
            return Polynomial.constant(self.n_vars, float(val))
        if kind == "ident":
            if val not in self.names:
                raise ValueError(f"Unknown variable {val!r} at {pos}")
            return Polynomial.variable(self.n_vars, self.names[val])
        if val == "(":
            res = self.expr()
            self.take(")")
            return res
        raise ValueError(f"Unexpected {val!r} at {pos}")


def parse_polynomial(text: str, names: Sequence[str]) -> Polynomial:
    """Parse '3*x^2*y - 1.5*y + 2' over the given variable names"""
    return _PolyParser(text, names).parse()


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    p._same(q)
    return p + q


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    p._same(q)
    return p * q


def poly_norm_sq(p: Polynomial) -> float:
    return p.norm_sq()


def _monomials_of_degree(n_vars: int, deg: int) -> Iterator[Exponent]:
    if n_vars == 0:
        if deg == 0:
            yield ()
        return
    if n_vars == 1:
        yield (deg, )
        return
    for first in range(deg, -1, -1):
        for rest in _monomials_of_degree(n_vars - 1, deg - first):
            yield (first, ) + rest


def monomial_basis(n_vars: int, max_degree: int,
                   cap: int = 20000) -> List[Exponent]:
    """All monomials of total degree <= max_degree, graded lex ascending"""
    if max_degree < 0:
        raise ValueError("max_degree must be non-negative")
    count = math.comb(n_vars + max_degree, max_degree)
    if count > cap:
        raise BasisSizeError(
            f"A degree {max_degree} basis over {n_vars} variables has {count} "
            f"monomials, over the cap of {cap}; lower ideal.cap or raise "
            "ideal.basis_cap")
    res = []
    for d in range(max_degree + 1):
        res.extend(_monomials_of_degree(n_vars, d))
    return res


def effective_degree_bound(h: Polynomial, F: Sequence[Polynomial],
                           slack: int = 1, cap: int = 8) -> int:
    """min(cap, deg h + max deg f_i + slack)"""
    if not F:
        raise ValueError("The generator list must be nonempty")
    deg_f = max(I.degree() for I in F)
    return max(0, min(cap, max(h.degree(), 0) + max(deg_f, 0) + slack))


@dataclasses.dataclass
class WitnessSolution:
    witnesses: List[Polynomial]
    residual: Polynomial
    energy: float
    degree_bound_used: int
    tol: float = 1e-10

    @property
    def is_member(self) -> bool:
        return self.energy < self.tol

    @property
    def status(self) -> str:
        if self.is_member:
            return "member"
        return f"unresolved at bound {self.degree_bound_used}"


def solve_witness(h: Polynomial,
                  F: Sequence[Polynomial],
                  degree_bound: int,
                  basis_cap: int = 20000,
                  damping: float = 1e-12,
                  tol: float = 1e-10) -> WitnessSolution:
    """Minimise ||h - sum g_i f_i||^2 over deg g_i <= degree_bound.

    The stacked witness coefficients solve the damped normal equations
    followed by one step of iterative refinement. The energy is computed from
    the explicit residual."""
    for I in F:
        h._same(I)
    if degree_bound < 0:
        raise ValueError("degree_bound must be non-negative")
    if h.is_zero() or all(I.is_zero() for I in F):
        return WitnessSolution([Polynomial.zero(h.n_vars) for _ in F], h,
                               h.norm_sq(), degree_bound, tol)

    basis = monomial_basis(h.n_vars, degree_bound, basis_cap)
    rows: Dict[Exponent, int] = {}
    for e, _ in h.sorted_terms():
        rows.setdefault(e, len(rows))
    columns: List[Dict[Exponent, float]] = []
    for f in F:
        for m in basis:
            col = {}
            for e, c in f.sorted_terms():
                prod = tuple(a + b for a, b in zip(m, e))
                col[prod] = c
                rows.setdefault(prod, len(rows))
            columns.append(col)

    A = np.zeros((len(rows), len(columns)), dtype=np.float64)
    for j, col in enumerate(columns):
        for e, c in col.items():
            A[rows[e], j] = c
    b = np.zeros(len(rows), dtype=np.float64)
    for e, c in h.terms.items():
        b[rows[e]] = c

    M = A.T @ A + damping * np.eye(A.shape[1])
    coef = np.linalg.solve(M, A.T @ b)
    coef = coef + np.linalg.solve(M, A.T @ (b - A @ coef))
    r = b - A @ coef
    energy = float(np.dot(r, r))

    inv_rows = {v: k for k, v in rows.items()}
    residual = Polynomial(h.n_vars, {inv_rows[I]: r[I] for I in range(len(r))})
    witnesses = []
    for i in range(len(F)):
        chunk = coef[i * len(basis):(i + 1) * len(basis)]
        witnesses.append(
            Polynomial(h.n_vars, {m: c for m, c in zip(basis, chunk)}))
    return WitnessSolution(witnesses, residual, energy, degree_bound, tol)


def radical_check(h: Polynomial,
                  F: Sequence[Polynomial],
                  k_max: int,
                  degree_bound: int,
                  tol: float = 1e-10,
                  basis_cap: int = 20000
                  ) -> Optional[Tuple[int, WitnessSolution]]:
    """Smallest k <= k_max with h^k in <F> at the bound, or None"""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    hk = Polynomial.constant(h.n_vars, 1.0)
    for k in range(1, k_max + 1):
        hk = hk * h
        sol = solve_witness(hk, F, degree_bound, basis_cap, tol=tol)
        if sol.energy < tol:
            return k, sol
    return None


def witness_energy_step(h: Polynomial, F_t: Sequence[Polynomial],
                        f_new: Polynomial, bound: int,
                        **kwargs) -> Tuple[float, float]:
    """Residual energies before and after adding f_new to the basis"""
    e_t = solve_witness(h, F_t, bound, **kwargs).energy
    e_next = solve_witness(h, list(F_t) + [f_new], bound, **kwargs).energy
    return e_t, e_next
