# SPDX-License-Identifier: GPL-2.0+
"""Linear algebra energies over d x d real matrices with closed form
gradients. Every energy is a squared Frobenius norm of a residual."""
import dataclasses
from typing import Callable, Dict, Hashable, Optional, Sequence

import numpy as np

from .hypergraph import MathesisError, MathState


class ShapeError(MathesisError):
    pass


class UnboundMatrixError(MathesisError):
    pass


@dataclasses.dataclass
class MatrixEnergyTerm:
    value: float
    grads: Dict[Hashable, np.ndarray]


def frobenius_sq(R: np.ndarray) -> float:
    """Squared Frobenius norm accumulated in row-major order"""
    sq = np.ravel(R, order="C")**2
    if sq.size == 0:
        return 0.0
    return float(np.cumsum(sq)[-1])


def _square(*mats: np.ndarray) -> int:
    d = None
    for M in mats:
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ShapeError(f"Expected a square matrix, got shape {M.shape}")
        if d is None:
            d = M.shape[0]
        elif M.shape[0] != d:
            raise ShapeError(
                f"Dimension mismatch: {d}x{d} against {M.shape[0]}x{M.shape[0]}")
    return d


def _term(value: float, ids: Sequence[Hashable],
          grads: Sequence[np.ndarray]) -> MatrixEnergyTerm:
    res: Dict[Hashable, np.ndarray] = {}
    for k, g in zip(ids, grads):
        if k in res:
            res[k] = res[k] + g
        else:
            res[k] = g
    return MatrixEnergyTerm(value, res)


def e_eq(A: np.ndarray, B: np.ndarray, ids=(0, 1)) -> MatrixEnergyTerm:
    """||A - B||_F^2"""
    _square(A, B)
    R = A - B
    return _term(frobenius_sq(R), ids, (2 * R, -2 * R))


def e_sym(A: np.ndarray, ids=(0, )) -> MatrixEnergyTerm:
    """||A - A^T||_F^2"""
    _square(A)
    R = A - A.T
    return _term(frobenius_sq(R), ids, (2 * R - 2 * R.T, ))


def e_mult(A: np.ndarray, B: np.ndarray, C: np.ndarray,
           ids=(0, 1, 2)) -> MatrixEnergyTerm:
    """||AB - C||_F^2"""
    _square(A, B, C)
    R = A @ B - C
    return _term(frobenius_sq(R), ids, (2 * R @ B.T, 2 * A.T @ R, -2 * R))


def e_orth(A: np.ndarray, ids=(0, )) -> MatrixEnergyTerm:
    """||A^T A - I||_F^2"""
    d = _square(A)
    R = A.T @ A - np.eye(d)
    return _term(frobenius_sq(R), ids, (4 * A @ R, ))


def e_inv(A: np.ndarray, A_inv: np.ndarray, ids=(0, 1)) -> MatrixEnergyTerm:
    """||A A_inv - I||_F^2, a singular A only yields positive energy"""
    d = _square(A, A_inv)
    R = A @ A_inv - np.eye(d)
    return _term(frobenius_sq(R), ids, (2 * R @ A_inv.T, 2 * A.T @ R))


class MatrixTermEvaluator(object):
    """Evaluates Sum/Sub/Product/Transpose/Inverse term trees over leaf
    matrices and back-propagates gradients to the leaves. Inverse is the
    pseudo-inverse, its gradient is exact where the operand is invertible."""
    def __init__(self, state: MathState,
                 lookup: Callable[[int], Optional[np.ndarray]]):
        self.state = state
        self.lookup = lookup
        self._values: Dict[int, np.ndarray] = {}

    def value(self, node_id: int) -> np.ndarray:
        res = self._values.get(node_id)
        if res is not None:
            return res
        prod = self.state.producer(node_id)
        if prod is None:
            res = self.lookup(node_id)
            if res is None:
                raise UnboundMatrixError(
                    f"Matrix {self.state.node(node_id).label} (N{node_id}) "
                    "has no binding")
        else:
            args = [self.value(I.id) for I in prod.args]
            if prod.operator == "Sum":
                res = args[0] + args[1]
            elif prod.operator == "Sub":
                res = args[0] - args[1]
            elif prod.operator == "Product":
                res = args[0] @ args[1]
            elif prod.operator == "Transpose":
                res = args[0].T
            elif prod.operator == "Inverse":
                _square(args[0])
                res = np.linalg.pinv(args[0])
            else:
                raise ShapeError(
                    f"{prod.operator} terms cannot be evaluated as matrices")
        self._values[node_id] = res
        return res

    def backprop(self, node_id: int, grad: np.ndarray,
                 out: Dict[int, np.ndarray]):
        """Accumulate d(energy)/d(leaf) given d(energy)/d(node)"""
        prod = self.state.producer(node_id)
        if prod is None:
            if node_id in out:
                out[node_id] = out[node_id] + grad
            else:
                out[node_id] = grad
            return
        a = [I.id for I in prod.args]
        if prod.operator == "Sum":
            self.backprop(a[0], grad, out)
            self.backprop(a[1], grad, out)
        elif prod.operator == "Sub":
            self.backprop(a[0], grad, out)
            self.backprop(a[1], -grad, out)
        elif prod.operator == "Product":
            self.backprop(a[0], grad @ self.value(a[1]).T, out)
            self.backprop(a[1], self.value(a[0]).T @ grad, out)
        elif prod.operator == "Transpose":
            self.backprop(a[0], grad.T, out)
        elif prod.operator == "Inverse":
            Ainv = self.value(node_id)
            self.backprop(a[0], -Ainv.T @ grad @ Ainv.T, out)
        else:
            raise ShapeError(f"Cannot differentiate through {prod.operator}")

    def scatter(self, term: MatrixEnergyTerm) -> MatrixEnergyTerm:
        """Rewrite a term whose grads are keyed by (possibly compound) node
        ids into one keyed by leaf node ids"""
        out: Dict[int, np.ndarray] = {}
        for k in sorted(term.grads):
            self.backprop(k, term.grads[k], out)
        return MatrixEnergyTerm(term.value, out)
