# SPDX-License-Identifier: GPL-2.0+
import numpy as np
import pytest

from mathesis.brain import BrainParams
from mathesis.energy import total_energy
from mathesis.hypergraph import E, N, EdgeType, canonical_hash, validate
from mathesis.problem import problem_from_text
from mathesis.rules import RuleLibrary
from mathesis.search import (MCTS, bfs_minimal_proof, disjoint_union,
                             eps_search, greedy_search, mcts_search, prove,
                             unify)


def test_bfs_minimal_proof(chain, transitivity):
    assert [str(I) for I in bfs_minimal_proof(transitivity, 3)] == [
        "EqualityTransitivity(E3,E4)"
    ]
    proof = bfs_minimal_proof(chain, 4)
    assert len(proof) == 2
    state = chain.state
    for I in proof:
        state = chain.library.apply(state, I)
    assert chain.is_solved(state)
    assert bfs_minimal_proof(chain, 4, start=state) == []
    assert bfs_minimal_proof(chain, 1) is None


def test_mcts_uniform(transitivity, cfg):
    res = mcts_search(transitivity, None, cfg)
    assert res.solved
    assert [str(I) for I in res.actions] == ["EqualityTransitivity(E3,E4)"]
    assert res.stats["solutions"] >= 1
    assert res.records[0] == {"sim": 0, "depth": 0, "value": 0.0}


def test_mcts_chain(chain, params, cfg):
    cfg.search.n_sims = 200
    res = mcts_search(chain, params, cfg)
    assert res.solved
    assert len(res.actions) == 2
    assert res.stats["simulations"] <= 200


def test_mcts_stuck(chain, cfg, caplog):
    stuck = chain.with_library(RuleLibrary(["ModusPonens"]))
    res = mcts_search(stuck, None, cfg)
    assert res.stuck and not res.solved
    assert "no legal action at the root" in caplog.text


def test_greedy_search(transitivity, cfg):
    params = BrainParams.initial(transitivity.library, cfg.brain, 0)
    res = greedy_search(transitivity, params, 5)
    assert len(res.actions) <= 5
    assert res.solved == transitivity.is_solved(
        _replay(transitivity, res.actions))


def _replay(problem, actions):
    state = problem.state
    for I in actions:
        state = problem.library.apply(state, I)
    return state


def test_prove(chain, params, cfg):
    cfg.search.n_sims = 200
    trace, records = prove(chain, params, "mcts", 3)
    assert trace.solved
    assert trace.method == "mcts"
    assert trace.seed == 3
    assert len(trace.steps) == 2
    assert trace.final_energy < 1e-6
    assert records
    again, _ = prove(chain, params, "mcts", 3)
    assert again == trace
    with pytest.raises(ValueError):
        prove(chain, params, "astar")
    with pytest.raises(ValueError):
        prove(chain, None, "greedy")


SPLIT = """(problem (name split)
  (decl a var) (decl b var) (decl c var) (decl d var)
  (decl x var) (decl y var) (decl z var)
  (premise (Equals a b))
  (goal (Equals c d)))"""


def split_halves(cfg):
    """Two derivation fragments sharing the premise a=b. The first knows
    a=b implies x+y=z, the second that y+x=z implies c=d. Only their
    unification connects the premise to the goal."""
    problem = problem_from_text(SPLIT, cfg=cfg,
                                library=RuleLibrary(["ModusPonens"]))
    state = problem.state
    A = E(next(iter(state.premises)))
    x, y, z, c, d = (N(state.find_symbol(I)) for I in "xyzcd")

    b = state.edit()
    eq = b.add_edge(EdgeType.Predicate, "Equals",
                    (N(b.term("Sum", (x, y))), z))
    b.assert_fact(b.add_edge(EdgeType.Connective, "Implies", (A, E(eq))))
    g1 = b.build()

    b = state.edit()
    eq = b.add_edge(EdgeType.Predicate, "Equals",
                    (N(b.term("Sum", (y, x))), z))
    cd = b.add_edge(EdgeType.Predicate, "Equals", (c, d))
    b.assert_fact(b.add_edge(EdgeType.Connective, "Implies", (E(eq), E(cd))))
    g2 = b.build()
    return problem, g1, g2


def test_disjoint_union(cfg):
    _, g1, g2 = split_halves(cfg)
    u = disjoint_union(g1, g2)
    assert len(u.nodes) == len(g1.nodes) + len(g2.nodes)
    assert len(u.facts) == len(g1.facts) + len(g2.facts)
    assert u.next_id == g1.next_id + g2.next_id
    validate(u)


def test_unify_merges_commuted_terms(cfg):
    problem, g1, g2 = split_halves(cfg)
    u = unify(g1, g2)
    sums = [I for I in u.edges.values() if I.operator == "Sum"]
    assert len(sums) == 1
    assert len(u.premises) == 1
    assert len([I for I in u.nodes.values() if I.label == "a"]) == 1
    # The fragments now chain: two modus ponens steps reach the goal
    lib = problem.library
    s1 = lib.apply(u, lib.legal_actions(u)[0])
    s2 = lib.apply(s1, lib.legal_actions(s1)[0])
    assert problem.is_solved(s2)
    # Unifying a state with itself changes nothing but the ids
    assert len(unify(g1, g1).facts) == len(g1.facts)


def test_eps_needs_crossover(cfg):
    problem, g1, g2 = split_halves(cfg)
    assert bfs_minimal_proof(problem, 4, start=g1) is None
    cfg.search.pop_size = 8
    cfg.search.generations = 10
    res = eps_search(problem, None, cfg, population=[g1, g2] * 4, seed=0)
    assert res.solved
    assert problem.is_solved(res.best.state)
    assert res.records[0]["groups"] == 1
    with pytest.raises(ValueError):
        eps_search(problem, None, cfg, population=[])


def test_eps_prove_replays_a_shortest_derivation(transitivity):
    trace, records = prove(transitivity, None, "eps", 0)
    assert trace.solved
    assert [I.action for I in trace.steps] == ["EqualityTransitivity(E3,E4)"]
    assert records[0]["generation"] == 1


INVERSE_CHAIN = """(problem (name inverse_chain)
  (decl A matrix 2 2) (decl B matrix 2 2) (decl C matrix 2 2)
  (decl D matrix 2 2)
  (premise (Equals B (Inverse A)))
  (premise (Equals (Product B C) D))
  (goal (Equals (Product (Inverse A) C) D)))"""


def test_eps_over_rewritten_inverses(cfg):
    problem = problem_from_text(
        INVERSE_CHAIN, cfg=cfg, seed=0,
        library=RuleLibrary(["Substitution", "EqualitySymmetry"]))
    assert not problem.liftable
    lib = problem.library
    legal = lib.legal_actions(problem.state)
    assert any(I.op == "Substitution" for I in legal)
    for a in legal:
        nxt = lib.apply(problem.state, a)
        assert np.isfinite(total_energy(nxt, problem.binding).total)
    cfg.search.pop_size = 4
    cfg.search.generations = 3
    trace, records = prove(problem, None, "eps", 0)
    assert records
    assert all(np.isfinite(I["best"]) for I in records)
    assert np.isfinite(trace.initial_energy)


def tree(node):
    yield node
    for I in node.children.values():
        yield from tree(I)


@pytest.mark.parametrize("with_params", [False, True])
def test_mcts_visit_conservation(chain, params, cfg, with_params):
    cfg.search.n_sims = 120
    mcts = MCTS(chain, params if with_params else None, cfg)
    mcts.run(chain.state)
    root = mcts.root
    assert root.visits == cfg.search.n_sims
    for node in tree(root):
        assert node.visits == int(node.N.sum()) + node.evals
        for i, child in node.children.items():
            assert node.N[i] == child.visits


def entity_hashes(state):
    return sorted(canonical_hash(state, I) for I in state.entities())


def fact_hashes(state):
    return sorted(canonical_hash(state, E(I)) for I in state.facts)


def test_unify_is_idempotent(cfg):
    _, g1, g2 = split_halves(cfg)
    u = unify(g1, g2)
    # A fixpoint: no two entities share a hash
    assert len(set(entity_hashes(u))) == len(u.entities())
    for again in (unify(u, g2), unify(u, g1), unify(u, u)):
        assert entity_hashes(again) == entity_hashes(u)
        assert fact_hashes(again) == fact_hashes(u)
        assert len(again.premises) == len(u.premises)
