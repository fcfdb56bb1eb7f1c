# SPDX-License-Identifier: GPL-2.0+
import pytest

from mathesis import config
from mathesis.algebra import (LiftError, Lifter, Ring, algebraic_lift,
                              is_liftable)
from mathesis.exprio import build_state, parse_problem
from mathesis.ideal_engine import solve_witness


def lift(text):
    state, goal, _ = build_state(parse_problem(text), config.Config(), 0)
    return state, goal


def test_chain(chain):
    F, h = algebraic_lift(chain.state, chain.goal)
    ring = Ring(chain.state)
    assert ring.names == ["a", "b", "c", "d"]
    assert [ring.format(I) for I in F] == ["a - b", "b - c", "c - d"]
    assert ring.format(h) == "a - d"
    assert solve_witness(h, F, 1).is_member


def test_numeric_constants_are_coefficients():
    state, goal = lift("""(problem (decl x var) (decl y var) (decl 2 const)
      (decl k const)
      (premise (Equals (Product x y) 2)) (goal (Equals (Sum x k) y)))""")
    ring = Ring(state)
    assert ring.names == ["x", "y", "k"]
    F, h = algebraic_lift(state, goal)
    assert [ring.format(I) for I in F] == ["x*y - 2"]
    assert ring.format(h) == "x - y + k"


def test_geometry():
    state, goal = lift("""(problem (decl P point) (decl Q point) (decl R point)
      (premise (Collinear P Q R)) (goal (Collinear Q P R)))""")
    ring = Ring(state)
    assert ring.names == ["x_P", "y_P", "x_Q", "y_Q", "x_R", "y_R"]
    F, h = algebraic_lift(state, goal)
    assert len(F) == 1
    assert (F[0] + h).is_zero()
    assert solve_witness(h, F, 0).is_member


def test_midpoint_goal():
    state, goal = lift("""(problem (decl P point) (decl Q point)
      (premise (Equals P Q)) (goal (Equals (Midpoint P Q) P)))""")
    F, h = algebraic_lift(state, goal)
    # Equality of points lifts to one polynomial per coordinate
    assert len(F) == 2
    assert h.degree() == 2
    assert solve_witness(h, F, 1).is_member


def test_matrix_facts_are_reported():
    state, goal = lift("""(problem (decl x var) (decl y var)
      (decl M matrix 2 2)
      (premise (Symmetric M)) (premise (Equals x y)) (goal (Equals x y)))""")
    with pytest.raises(LiftError) as e:
        algebraic_lift(state, goal)
    sym = [I for I in state.facts if state.edge(I).operator == "Symmetric"]
    assert e.value.edges == sym
    assert f"E{sym[0]}" in str(e.value)
    assert not is_liftable(state, goal)


def test_unliftable_goals():
    state, goal = lift("""(problem (decl x var) (decl M matrix 2 2)
      (premise (Equals x x)) (goal (Symmetric M)))""")
    with pytest.raises(LiftError):
        algebraic_lift(state, goal)
    state, goal = lift("""(problem (decl x var) (decl y var)
      (premise (Equals x y)) (goal (Implies (Equals x y) (Equals y x))))""")
    with pytest.raises(LiftError):
        algebraic_lift(state, goal)


def test_structural_facts_are_skipped():
    state, goal = lift("""(problem (decl x var) (decl y var)
      (premise (Equals x y)) (premise (Implies (Equals x y) (Equals y x)))
      (goal (Equals y x)))""")
    F, h = algebraic_lift(state, goal)
    assert len(F) == 1
    lifter = Lifter(state)
    imp = [I for I in state.facts if state.edge(I).operator == "Implies"][0]
    assert lifter.fact(imp) is None
