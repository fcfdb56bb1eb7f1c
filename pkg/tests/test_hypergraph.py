# SPDX-License-Identifier: GPL-2.0+
import numpy as np
import pytest

from mathesis.hypergraph import (E, N, DuplicateSymbolError, EdgeType,
                                 FactError, GoalPattern, MathState, NodeType,
                                 PApp, PSym, PVar, StateBuilder, TypingError,
                                 assert_fact, canonical_hash, goal_proven,
                                 match_goal, premise_hashes,
                                 topological_order, validate)


def scalars(b, *names):
    return [N(b.add_node(NodeType.Variable, I)) for I in names]


def test_add_node_and_term():
    b = StateBuilder()
    x, y = scalars(b, "x", "y")
    s = b.term("Sum", (x, y))
    state = b.build()
    n = state.node(s)
    assert n.node_type == NodeType.CompoundTerm
    assert state.producer(s).operator == "Sum"
    assert state.describe(N(s)) == "Sum(x,y)"
    # Interning returns the existing output
    b2 = state.edit()
    assert b2.term("Sum", (x, y)) == s


def test_duplicate_symbol():
    b = StateBuilder()
    b.add_node(NodeType.Variable, "x")
    with pytest.raises(DuplicateSymbolError):
        b.add_node(NodeType.Variable, "x")
    # A constant may share a variable's label
    b.add_node(NodeType.Constant, "x")


@pytest.mark.parametrize("edge_type,op,nargs", [
    (EdgeType.Predicate, "Sum", 2),
    (EdgeType.Constructor, "Equals", 2),
    (EdgeType.Predicate, "Equals", 3),
    (EdgeType.Predicate, "Collinear", 2),
])
def test_edge_typing(edge_type, op, nargs):
    b = StateBuilder()
    args = scalars(b, *"pqr"[:nargs])
    with pytest.raises(TypingError):
        b.add_edge(edge_type, op, args)


def test_sort_checks():
    b = StateBuilder()
    x = N(b.add_node(NodeType.Variable, "x"))
    M = N(b.add_node(NodeType.Variable, "M", "matrix"))
    with pytest.raises(TypingError):
        b.term("Sum", (x, M))
    with pytest.raises(TypingError):
        b.add_edge(EdgeType.Predicate, "Symmetric", (x, ))
    with pytest.raises(TypingError):
        b.add_node(NodeType.Variable, "y", "vector")


def test_connectives_take_formulas():
    b = StateBuilder()
    x, y = scalars(b, "x", "y")
    eq = b.add_edge(EdgeType.Predicate, "Equals", (x, y))
    with pytest.raises(TypingError):
        b.add_edge(EdgeType.Connective, "Implies", (x, E(eq)))
    s = b.term("Sum", (x, y))
    prod = b.build().producer(s).id
    with pytest.raises(TypingError):
        b.add_edge(EdgeType.Connective, "And", (E(eq), E(prod)))


def test_quantifier_binding():
    b = StateBuilder()
    v, a = scalars(b, "v", "a")
    c = b.add_node(NodeType.Constant, "k")
    eq = b.add_edge(EdgeType.Predicate, "Equals", (v, a))
    with pytest.raises(TypingError):
        b.add_edge(EdgeType.Quantifier, "ForAll", (E(eq), ))
    with pytest.raises(TypingError):
        b.add_edge(EdgeType.Quantifier, "ForAll", (E(eq), ), {c})
    q = b.add_edge(EdgeType.Quantifier, "ForAll", (E(eq), ), {v.id})
    assert b.build().describe(E(q)) == "ForAll[v](Equals(v,a))"


def test_facts():
    b = StateBuilder()
    x, y = scalars(b, "x", "y")
    s = b.term("Sum", (x, y))
    eq = b.add_edge(EdgeType.Predicate, "Equals", (x, y))
    with pytest.raises(FactError):
        b.assert_fact(b.build().producer(s).id)
    with pytest.raises(FactError):
        b.assert_fact(999)
    state = b.build()
    assert not state.facts
    s2 = assert_fact(state, eq, premise=True)
    assert s2.facts == {eq}
    assert s2.premises == {eq}
    # States are values
    assert not state.facts
    assert assert_fact(s2, eq, premise=True) is s2


def test_canonical_hash_ignores_ids_and_order():
    b1 = StateBuilder()
    x, y = scalars(b1, "x", "y")
    e1 = b1.add_edge(EdgeType.Predicate, "Equals",
                     (N(b1.term("Sum", (x, y))), x))
    b2 = StateBuilder()
    y2, x2 = scalars(b2, "y", "x")
    b2.add_node(NodeType.Variable, "unused")
    e2 = b2.add_edge(EdgeType.Predicate, "Equals",
                     (x2, N(b2.term("Sum", (y2, x2)))))
    assert canonical_hash(b1.build(), E(e1)) == canonical_hash(
        b2.build(), E(e2))


def test_canonical_hash_labels_matter():
    b = StateBuilder()
    x, y, z = scalars(b, "x", "y", "z")
    e1 = b.add_edge(EdgeType.Predicate, "Equals", (x, y))
    e2 = b.add_edge(EdgeType.Predicate, "Equals", (x, z))
    state = b.build()
    assert canonical_hash(state, E(e1)) != canonical_hash(state, E(e2))


def test_matrix_product_is_ordered():
    b = StateBuilder()
    A = N(b.add_node(NodeType.Variable, "A", "matrix"))
    B = N(b.add_node(NodeType.Variable, "B", "matrix"))
    x, y = scalars(b, "x", "y")
    ab = b.term("Product", (A, B))
    ba = b.term("Product", (B, A))
    xy = b.term("Product", (x, y))
    yx = b.term("Product", (y, x))
    state = b.build()
    assert canonical_hash(state, N(ab)) != canonical_hash(state, N(ba))
    assert canonical_hash(state, N(xy)) == canonical_hash(state, N(yx))


def test_topological_order_and_validate():
    b = StateBuilder()
    x, y = scalars(b, "x", "y")
    s = N(b.term("Sum", (x, y)))
    eq = b.add_edge(EdgeType.Predicate, "Equals", (s, x))
    b.assert_fact(eq)
    state = b.build()
    order = topological_order(state)
    assert order.index(x) < order.index(s) < order.index(E(eq))
    validate(state)


def test_validate_rejects_dangling():
    b = StateBuilder()
    x, y = scalars(b, "x", "y")
    eq = b.add_edge(EdgeType.Predicate, "Equals", (x, y))
    state = b.build()
    nodes = dict(state.nodes)
    del nodes[y.id]
    bad = MathState(nodes, dict(state.edges), frozenset([eq]), frozenset(),
                    state.next_id)
    with pytest.raises(TypingError):
        validate(bad)


def test_goal_matching():
    b = StateBuilder()
    x, y = scalars(b, "x", "y")
    eq = b.add_edge(EdgeType.Predicate, "Equals", (x, y))
    state = b.build()
    exact = GoalPattern(PApp("Equals", (PSym("x"), PSym("y"))))
    assert [I.root for I in match_goal(state, exact)] == [eq]
    assert not goal_proven(state, exact)
    state = assert_fact(state, eq)
    assert goal_proven(state, exact)
    # Structural matching only, Equals(y, x) is a different edge
    assert not goal_proven(state,
                           GoalPattern(PApp("Equals", (PSym("y"), PSym("x")))))
    pat = GoalPattern(PApp("Equals", (PVar("u"), PVar("u"))))
    assert not match_goal(state, pat)
    assert pat.pattern_vars() == ["u"]


def test_goal_must_be_a_formula():
    with pytest.raises(TypingError):
        GoalPattern(PApp("Sum", (PSym("x"), PSym("y"))))
    with pytest.raises(TypingError):
        GoalPattern(PSym("x"))


def test_premise_hashes_ignore_ids():
    def build(names):
        b = StateBuilder()
        refs = dict(zip(names, scalars(b, *names)))
        b.assert_fact(b.add_edge(EdgeType.Predicate, "Equals",
                                 (refs["a"], refs["b"])),
                      premise=True)
        return b.build()

    assert premise_hashes(build("ab")) == premise_hashes(build("ba"))


LEAVES = ("x", "y", "z", "w")
TERM_OPS = ("Sum", "Product", "Sub")


def random_term(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        return LEAVES[int(rng.integers(len(LEAVES)))]
    op = TERM_OPS[int(rng.integers(len(TERM_OPS)))]
    return (op, random_term(rng, depth - 1), random_term(rng, depth - 1))


def normal_form(t):
    """Structural key with commutative children in a fixed order"""
    if isinstance(t, str):
        return t
    args = [normal_form(I) for I in t[1:]]
    if t[0] != "Sub":
        args.sort(key=repr)
    return (t[0], *args)


def build_term(b, t):
    if isinstance(t, str):
        return N(b.symbol(t))
    return N(b.term(t[0], (build_term(b, t[1]), build_term(b, t[2]))))


@pytest.mark.parametrize("count", [
    500, pytest.param(10000, marks=pytest.mark.slow)])
def test_canonical_hash_separates_terms(count):
    rng = np.random.default_rng(7)
    b = StateBuilder()
    scalars(b, *LEAVES)
    terms = {}
    while len(terms) < count:
        t = random_term(rng, 6)
        terms.setdefault(normal_form(t), build_term(b, t))
    state = b.build()
    hashes = {}
    for form, ref in terms.items():
        h = canonical_hash(state, ref)
        assert hashes.setdefault(h, form) == form
    # Swapping the operands of a commutative operator keeps the hash
    sx = b.term("Sum", (N(b.symbol("x")), N(b.symbol("y"))))
    sy = b.term("Sum", (N(b.symbol("y")), N(b.symbol("x"))))
    state = b.build()
    assert canonical_hash(state, N(sx)) == canonical_hash(state, N(sy))
