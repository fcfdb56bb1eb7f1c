# SPDX-License-Identifier: GPL-2.0+
import numpy as np
import pytest

from mathesis import config
from mathesis.exprio import build_state, parse_problem
from mathesis.hypergraph import E, N, RuleError, goal_proven, validate
from mathesis.rules import (Action, RuleLibrary, apply_action, legal_actions)


def state_of(text):
    state, goal, _ = build_state(parse_problem(text), config.Config(), 0)
    return state, goal


def find(state, text):
    for I in state.entities():
        if state.describe(I) == text:
            return I
    raise KeyError(text)


MP = """(problem (decl p var) (decl q var) (decl r var)
  (premise (Equals p q))
  (premise (Implies (Equals p q) (Equals q r)))
  (goal (Equals q r)))"""


def test_action_text():
    a = Action("ModusPonens", (E(3), E(5)))
    assert str(a) == "ModusPonens(E3,E5)"
    assert Action.parse(" ModusPonens(E3, E5) ") == a
    assert Action.parse("Sum(N0,N1)").operands == (N(0), N(1))
    for bad in ("ModusPonens", "(E1)", "Mp(X1)", "Mp(E1"):
        with pytest.raises(ValueError):
            Action.parse(bad)


def test_modus_ponens():
    state, goal = state_of(MP)
    lib = RuleLibrary(["ModusPonens"])
    legal = lib.legal_actions(state)
    a = Action("ModusPonens", (find(state, "Equals(p,q)"),
                               find(state, "Implies(Equals(p,q),Equals(q,r))")))
    assert legal == [a]
    nxt = lib.apply(state, a)
    assert goal_proven(nxt, goal)
    assert not goal_proven(state, goal)
    # Nothing left to do and the old state is untouched
    assert lib.legal_actions(nxt) == []
    assert len(state.facts) == 2
    validate(nxt)


def test_modus_ponens_errors():
    state, _ = state_of(MP)
    lib = RuleLibrary(["ModusPonens"])
    imp = find(state, "Implies(Equals(p,q),Equals(q,r))")
    concl = find(state, "Equals(q,r)")
    for operands in ((concl, imp), (imp, imp), (find(state, "Equals(p,q)"),
                                                 concl), (N(0), imp)):
        with pytest.raises(RuleError):
            lib.apply(state, Action("ModusPonens", operands))
    with pytest.raises(RuleError):
        lib.apply(state, Action("ModusPonens", (imp, )))


def test_unknown_rule():
    with pytest.raises(KeyError):
        RuleLibrary(["Resolution"])
    state, _ = state_of(MP)
    with pytest.raises(RuleError):
        RuleLibrary(["ModusPonens"]).apply(state, Action("AndIntro",
                                                         (E(4), E(5))))


def test_and_intro_elim():
    state, _ = state_of("""(problem (decl x var) (decl y var) (decl z var)
      (premise (Equals x y)) (premise (Equals y z))
      (goal (And (Equals x y) (Equals y z))))""")
    lib = RuleLibrary(["AndIntro", "AndElim"])
    e1, e2 = find(state, "Equals(x,y)"), find(state, "Equals(y,z)")
    assert lib.legal_actions(state) == [Action("AndIntro", (e1, e2))]
    with pytest.raises(RuleError):
        lib.apply(state, Action("AndIntro", (e2, e1)))
    nxt = lib.apply(state, Action("AndIntro", (e1, e2)))
    conj = find(nxt, "And(Equals(x,y),Equals(y,z))")
    assert conj.id in nxt.facts
    # Both conjuncts are already facts
    assert not [I for I in lib.legal_actions(nxt) if I.op == "AndElim"]


def test_and_elim():
    state, _ = state_of("""(problem (decl x var) (decl y var)
      (premise (And (Equals x y) (Equals y x)))
      (goal (Equals y x)))""")
    lib = RuleLibrary(["AndElim"])
    legal = lib.legal_actions(state)
    assert [str(I.operands[1]) for I in legal] == [
        str(find(state, "Equals(x,y)")),
        str(find(state, "Equals(y,x)"))
    ]
    nxt = lib.apply(state, legal[1])
    assert find(nxt, "Equals(y,x)").id in nxt.facts


def test_equality_rules():
    state, goal = state_of("""(problem (decl a var) (decl b var) (decl c var)
      (premise (Equals a b)) (premise (Equals b c)) (goal (Equals c a)))""")
    lib = RuleLibrary(["EqualityTransitivity", "EqualitySymmetry"])
    ab, bc = find(state, "Equals(a,b)"), find(state, "Equals(b,c)")
    with pytest.raises(RuleError):
        lib.apply(state, Action("EqualityTransitivity", (bc, ab)))
    with pytest.raises(RuleError):
        lib.apply(state, Action("EqualityTransitivity", (ab, ab)))
    s1 = lib.apply(state, Action("EqualityTransitivity", (ab, bc)))
    ac = find(s1, "Equals(a,c)")
    s2 = lib.apply(s1, Action("EqualitySymmetry", (ac, )))
    assert goal_proven(s2, goal)
    with pytest.raises(RuleError):
        lib.apply(s2, Action("EqualitySymmetry", (ac, )))


def test_substitution():
    state, goal = state_of("""(problem (decl x var) (decl y var) (decl z var)
      (premise (Equals x y)) (premise (Equals (Sum x z) z))
      (goal (Equals (Sum y z) z)))""")
    lib = RuleLibrary(["Substitution"])
    eq = find(state, "Equals(x,y)")
    target = find(state, "Equals(Sum(x,z),z)")
    parent = find(state, "Sum(x,z)")
    a = Action("Substitution", (eq, target, parent))
    assert a in lib.legal_actions(state)
    nxt = lib.apply(state, a)
    assert goal_proven(nxt, goal)
    validate(nxt)
    # Wrong parent: z is not rewritten by x=y
    with pytest.raises(RuleError):
        lib.apply(state, Action("Substitution", (eq, target, N(2))))


def test_substitution_skips_quantifier_bodies():
    state, _ = state_of("""(problem (decl x var) (decl y var)
      (premise (Equals x y)) (premise (forall (v) (Equals (Sum v x) v)))
      (goal (Equals y y)))""")
    lib = RuleLibrary(["Substitution"])
    q = find(state, "ForAll[v](Equals(Sum(v,x),v))")
    legal = lib.legal_actions(state)
    # Only x=y itself can be rewritten
    assert legal
    assert all(I.operands[1] != q for I in legal)
    eq = find(state, "Equals(x,y)")
    with pytest.raises(RuleError):
        lib.apply(state, Action("Substitution", (eq, q, q)))


def test_universal_instantiation():
    state, goal = state_of("""(problem (decl a var) (decl c var)
      (premise (forall (v) (Equals (Sum v a) a)))
      (goal (Equals (Sum c a) a)))""")
    lib = RuleLibrary(["UniversalInstantiation"])
    q = find(state, "ForAll[v](Equals(Sum(v,a),a))")
    v = N(state.find_symbol("v"))
    c = N(state.find_symbol("c"))
    nxt = lib.apply(state, Action("UniversalInstantiation", (q, v, c)))
    assert goal_proven(nxt, goal)
    with pytest.raises(RuleError):
        lib.apply(state, Action("UniversalInstantiation", (q, v, v)))
    with pytest.raises(RuleError):
        lib.apply(state, Action("UniversalInstantiation", (q, c, v)))


def test_constructors_and_budget():
    state, _ = state_of("""(problem (decl x var) (decl y var)
      (goal (Equals x y)))""")
    lib = RuleLibrary(["Sum"])
    legal = lib.legal_actions(state)
    # Commutative, so ordered pairs only
    assert [str(I) for I in legal] == ["Sum(N0,N0)", "Sum(N0,N1)", "Sum(N1,N1)"]
    with pytest.raises(RuleError):
        lib.apply(state, Action("Sum", (N(1), N(0))))
    nxt = lib.apply(state, legal[1])
    assert nxt.find_term("Sum", (N(0), N(1))) is not None
    with pytest.raises(RuleError):
        lib.apply(nxt, legal[1])
    # Two nodes: at the cap constructors stay legal, past it they do not
    assert RuleLibrary(["Sum"], term_budget=2).legal_actions(state) == legal
    tight = RuleLibrary(["Sum"], term_budget=1)
    assert tight.legal_actions(state) == []
    with pytest.raises(RuleError):
        tight.apply(state, legal[1])


def test_matrix_products_in_both_orders():
    state, _ = state_of("""(problem (decl A matrix 2 2) (decl B matrix 2 2)
      (goal (Symmetric A)))""")
    lib = RuleLibrary(["Product"])
    legal = [str(I) for I in lib.legal_actions(state)]
    assert "Product(N0,N1)" in legal
    assert "Product(N1,N0)" in legal


def test_functional_spellings():
    state, _ = state_of(MP)
    lib = RuleLibrary(["ModusPonens"])
    legal = legal_actions(state, lib)
    assert apply_action(state, legal[0], lib).facts > state.facts


WALKS = [
    MP,
    """(problem (decl a var) (decl b var) (decl c var)
      (premise (And (Equals a b) (Equals b c)))
      (premise (forall (v) (Implies (Equals v a) (Equals a v))))
      (goal (Equals a c)))""",
    """(problem (decl A matrix 2 2) (decl B matrix 2 2) (decl C matrix 2 2)
      (premise (Equals B (Inverse A))) (premise (Symmetric A))
      (premise (Equals (Product B C) A))
      (goal (Symmetric B)))""",
    """(problem (decl A point) (decl B point) (decl C point) (decl D point)
      (premise (Collinear A B C)) (premise (Equals (Midpoint A B) D))
      (premise (Parallel A B C D))
      (goal (Collinear B A C)))""",
]


@pytest.mark.parametrize("text", WALKS)
def test_random_walks_stay_well_typed(text):
    start, _ = state_of(text)
    lib = RuleLibrary(term_budget=len(start.nodes) + 12)
    for seed in range(8):
        rng = np.random.default_rng(seed)
        state = start
        for _ in range(15):
            legal = lib.legal_actions(state)
            if not legal:
                break
            nxt = lib.apply(state, legal[int(rng.integers(len(legal)))])
            validate(nxt)
            assert nxt.facts >= state.facts
            assert set(nxt.entities()) >= set(state.entities())
            state = nxt
