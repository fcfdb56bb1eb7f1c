# SPDX-License-Identifier: GPL-2.0+
import numpy as np
import pytest

from mathesis import config
from mathesis.energy import (Binding, Domain, DomainWeights, EnergyError,
                             classify_edge, is_consistent, minimize_binding,
                             total_energy)
from mathesis.exprio import build_state, parse_problem
from mathesis.selftest import (FIXTURES, FixtureBuilder, check_gradient,
                               energy_function, fixture)


def test_binding_layout():
    b = Binding(2)
    b.set_matrix(5, np.eye(2), frozen=False)
    b.set_scalar(1, 3.0, frozen=False)
    b.set_point(3, (1.0, 2.0))
    assert b.slot_ids() == [1, 3, 5]
    assert b.free_ids() == [1, 5]
    assert b.layout() == [(1, 0, 1), (5, 1, 4)]
    np.testing.assert_array_equal(b.flatten(), [3.0, 1.0, 0.0, 0.0, 1.0])
    b2 = b.with_flat(np.arange(5.0))
    assert b2.scalars[1] == 0.0
    np.testing.assert_array_equal(b2.matrices[5], [[1.0, 2.0], [3.0, 4.0]])
    # Frozen slots and the original are untouched
    np.testing.assert_array_equal(b2.points[3], [1.0, 2.0])
    assert b.scalars[1] == 3.0
    assert Binding.from_dict(b.as_dict()) == b
    with pytest.raises(EnergyError):
        b.set_matrix(6, np.eye(3))
    with pytest.raises(EnergyError):
        b.set_point(7, (1.0, ))


def test_domain_weights():
    with pytest.raises(EnergyError):
        DomainWeights(matrix=-1.0)
    w = DomainWeights.from_config(config.Config())
    assert w.of(Domain.NonEnergetic) == 0.0


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_faithfulness(name):
    state, binding, eid = fixture(name, 1)
    rep = total_energy(state, binding)
    assert rep.total < 1e-8
    assert rep.violations(1e-8) == []
    state, binding, eid = fixture(name, 1, false=True)
    rep = total_energy(state, binding)
    assert rep.total > 1e-4
    assert rep.violations(1e-4) == [eid]


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_gradients(name):
    state, binding, _ = fixture(name, 2, false=True)
    f = energy_function(state, binding)
    assert check_gradient(f, binding.flatten()).ok(1e-5)


def test_classify():
    state, binding, eid = fixture("midpoint", 0)
    assert classify_edge(state, eid) == Domain.Geometry
    state, binding, eid = fixture("scalar_sum", 0)
    assert classify_edge(state, eid) == Domain.Ideal
    state, binding, eid = fixture("inverse", 0)
    assert classify_edge(state, eid) == Domain.Matrix


def test_only_facts_count(chain):
    b = Binding(chain.binding.dim_d)
    for I, v in zip("abcd", (1.0, 1.0, 1.0, 5.0)):
        b.set_scalar(chain.state.find_symbol(I), v)
    rep = total_energy(chain.state, b)
    assert rep.total == 16.0
    assert len(rep.violations(1e-8)) == 1
    d = rep.as_dict(chain.state)
    assert d["per_edge"][-1]["expr"] == "Equals(c,d)"
    assert d["per_edge"][-1]["domain"] == "Ideal"


def test_weights_scale_domains():
    state, binding, _ = fixture("symmetric", 3, false=True)
    base = total_energy(state, binding).total
    half = total_energy(state, binding, DomainWeights(matrix=0.5)).total
    assert half == pytest.approx(base / 2)
    assert total_energy(state, binding, DomainWeights(ideal=0.0)).total == base


def test_unbound_slot():
    state, _, _ = build_state(
        parse_problem("(problem (decl x var) (decl y var) "
                      "(premise (Equals x y)) (goal (Equals y x)))"),
        config.Config(), 0)
    with pytest.raises(EnergyError):
        total_energy(state, Binding(2))


def test_minimize_is_monotone():
    fb = FixtureBuilder(2)
    s = fb.term("Sum", fb.scalar("x", 0.3), fb.scalar("y", -1.2))
    fb.fact("Equals", s, fb.scalar("z", 2.0))
    S = fb.matrix("S", [[1.0, 2.0], [0.0, 1.0]])
    fb.fact("Symmetric", S)
    state, binding = fb.build()
    assert not is_consistent(state, binding)
    best, rep = minimize_binding(state, binding, steps=500)
    assert rep.converged
    assert rep.total < 1e-8
    assert all(b <= a for a, b in zip(rep.history, rep.history[1:]))
    assert is_consistent(state, best)
    # Nothing free, nothing to do
    frozen = FixtureBuilder(2, frozen=True)
    frozen.fact("Symmetric", frozen.matrix("S", [[0.0, 1.0], [0.0, 0.0]]))
    state, binding = frozen.build()
    best, rep = minimize_binding(state, binding)
    assert rep.history == [rep.total]
    assert best == binding


def test_non_finite_bindings():
    b = Binding(2)
    for bad in (float("nan"), float("inf")):
        with pytest.raises(EnergyError):
            b.set_scalar(1, bad)
        with pytest.raises(EnergyError):
            b.set_point(2, (bad, 0.0))
        with pytest.raises(EnergyError):
            b.set_matrix(3, [[1.0, 0.0], [0.0, bad]])
    assert b.slot_ids() == []
    with pytest.raises(EnergyError):
        Binding.from_dict({"dim_d": 2, "points": {"0": [0.0, float("-inf")]}})


def inverse_under_product(rng):
    fb = FixtureBuilder(2)
    A = fb.matrix("A", rng.standard_normal((2, 2)))
    B = fb.matrix("B", rng.standard_normal((2, 2)) + 3 * np.eye(2))
    C = fb.matrix("C", rng.standard_normal((2, 2)) + 3 * np.eye(2))
    D = fb.matrix("D", rng.standard_normal((2, 2)))
    # Inverse opposite a Product, and an Inverse nested under a Product
    fb.fact("Equals", fb.term("Product", A, B), fb.term("Inverse", C))
    fb.fact("Equals", fb.term("Product", fb.term("Inverse", C), A), D)
    fb.fact("Equals", fb.term("Sum", fb.term("Inverse", B), D), A)
    return fb.build()


def test_nested_inverse(rng):
    state, binding = inverse_under_product(rng)
    rep = total_energy(state, binding)
    assert np.isfinite(rep.total) and rep.total > 0
    assert sorted(rep.per_edge) == sorted(state.facts)
    assert check_gradient(energy_function(state, binding),
                          binding.flatten()).ok(1e-5)
    best, rep = minimize_binding(state, binding, steps=300)
    assert all(b <= a for a, b in zip(rep.history, rep.history[1:]))
    assert rep.total < rep.history[0]


def test_nested_inverse_is_consistent_on_a_model():
    fb = FixtureBuilder(2, frozen=True)
    Cv = np.array([[2.0, 1.0], [0.0, 1.0]])
    Av = np.array([[1.0, 0.0], [1.0, 1.0]])
    A = fb.matrix("A", Av)
    C = fb.matrix("C", Cv)
    D = fb.matrix("D", np.linalg.inv(Cv) @ Av)
    fb.fact("Equals", fb.term("Product", fb.term("Inverse", C), A), D)
    state, binding = fb.build()
    assert is_consistent(state, binding)
