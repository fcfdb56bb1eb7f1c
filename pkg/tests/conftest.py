# SPDX-License-Identifier: GPL-2.0+
import numpy as np
import pytest

from mathesis import config
from mathesis.brain import BrainParams
from mathesis.problem import problem_from_text
from mathesis.rules import RuleLibrary

CHAIN = """
(problem
  (name chain)
  (decl a var) (decl b var) (decl c var) (decl d var)
  (premise (Equals a b))
  (premise (Equals b c))
  (premise (Equals c d))
  (goal (Equals a d)))
"""

TRANSITIVITY = """
(problem
  (name transitivity)
  (decl a var) (decl b var) (decl c var)
  (premise (Equals a b))
  (premise (Equals b c))
  (goal (Equals a c)))
"""


def pytest_configure(config):
    config.addinivalue_line("markers",
                            "slow: large sized checks, deselect with "
                            "-m 'not slow'")


@pytest.fixture
def cfg():
    res = config.Config()
    res.brain.d_model = 8
    res.brain.layers = 1
    res.search.n_sims = 50
    res.search.max_depth = 4
    res.train.t_max = 6
    return res


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def chain(cfg):
    lib = RuleLibrary(["EqualityTransitivity", "EqualitySymmetry"])
    return problem_from_text(CHAIN, cfg=cfg, library=lib)


@pytest.fixture
def transitivity(cfg):
    lib = RuleLibrary(["EqualityTransitivity", "EqualitySymmetry"])
    return problem_from_text(TRANSITIVITY, cfg=cfg, library=lib)


@pytest.fixture
def params(chain, cfg):
    return BrainParams.initial(chain.library, cfg.brain, 0)


@pytest.fixture
def chain_text():
    return CHAIN
