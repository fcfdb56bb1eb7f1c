# SPDX-License-Identifier: GPL-2.0+
import pytest

from mathesis import synthetic
from mathesis.exprio import state_to_dict
from mathesis.rules import RuleLibrary


@pytest.mark.parametrize("template", sorted(synthetic.TEMPLATES))
def test_scripts_prove_their_goals(template, cfg, rng):
    trace = synthetic.make_problem(template, rng, cfg)
    problem = trace.problem
    assert not problem.is_solved(problem.state)
    for state, legal, a in trace.replay():
        assert a in legal
    state = problem.state
    for I in trace.actions:
        state = problem.library.apply(state, I)
    assert problem.is_solved(state)


def test_generate_is_seeded(cfg):
    traces = synthetic.generate(6, 3, cfg)
    templates = list(synthetic.TEMPLATES)
    assert [I.problem.name for I in traces] == [
        f"{templates[I % len(templates)]}-{I}" for I in range(6)
    ]
    again = synthetic.generate(6, 3, cfg)
    assert [I.actions for I in again] == [I.actions for I in traces]
    assert [state_to_dict(I.problem.state) for I in again
            ] == [state_to_dict(I.problem.state) for I in traces]
    other = synthetic.generate(6, 4, cfg)
    assert [state_to_dict(I.problem.state) for I in other
            ] != [state_to_dict(I.problem.state) for I in traces]


def test_restricted_library(cfg):
    lib = RuleLibrary(["ModusPonens"])
    traces = synthetic.generate(2, 0, cfg, templates=["modus_ponens"],
                                library=lib)
    assert all(I.problem.library is lib for I in traces)
    assert all(len(I.actions) == 1 for I in traces)
    with pytest.raises(KeyError):
        synthetic.generate(1, 0, cfg, templates=["nope"])
