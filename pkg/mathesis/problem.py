# SPDX-License-Identifier: GPL-2.0+
"""A proof problem: initial state, goal, binding and the rules to use"""
import os
import weakref
from typing import List, Optional

from . import config
from .algebra import LiftError, Lifter, algebraic_lift, energetic_facts
from .energy import Binding, DomainWeights, total_energy
from .exprio import build_state, parse_problem
from .hypergraph import GoalPattern, MathState, goal_proven
from .ideal_engine import (Polynomial, WitnessSolution,
                           effective_degree_bound, solve_witness)
from .rules import RuleLibrary


class Problem(object):
    def __init__(self,
                 name: str,
                 state: MathState,
                 goal: GoalPattern,
                 binding: Binding,
                 library: RuleLibrary,
                 cfg: Optional[config.Config] = None):
        self.name = name
        self.state = state
        self.goal = goal
        self.binding = binding
        self.library = library
        self.cfg = cfg if cfg is not None else config.Config()
        self.eps = self.cfg.train.eps_tol
        self._residuals = weakref.WeakKeyDictionary()
        try:
            algebraic_lift(state, goal)
            self.liftable = True
        except LiftError as e:
            config.logger.debug(f"{name} is not liftable: {e}")
            self.liftable = False

    def __repr__(self):
        return f"<Problem {self.name}>"

    def with_library(self, library: RuleLibrary) -> "Problem":
        return Problem(self.name, self.state, self.goal, self.binding,
                       library, self.cfg)

    def goal_poly(self, state: MathState) -> Polynomial:
        return Lifter(state).goal(self.goal)

    def basis(self, state: MathState) -> List[Polynomial]:
        """Polynomials of every liftable energetic fact, unliftable facts
        are skipped"""
        lifter = Lifter(state)
        res = []
        for I in energetic_facts(state):
            try:
                polys = lifter.fact(I)
            except LiftError as e:
                config.logger.debug(f"Skipping E{I}: {e}")
                continue
            if polys:
                res.extend(polys)
        return res

    def witness(self, h: Polynomial,
                F: List[Polynomial]) -> Optional[WitnessSolution]:
        if not F:
            return None
        ic = self.cfg.ideal
        bound = effective_degree_bound(h, F, ic.slack, ic.cap)
        return solve_witness(h, F, bound, ic.basis_cap, ic.damping, ic.tol)

    def witness_energy(self, h: Polynomial, F: List[Polynomial]) -> float:
        """||h - sum g_i f_i||^2 minimised, ||h||^2 for an empty basis"""
        sol = self.witness(h, F)
        return h.norm_sq() if sol is None else sol.energy

    def goal_residual(self, state: MathState) -> float:
        """Residual energy of the goal against the state's liftable facts"""
        res = self._residuals.get(state)
        if res is None:
            h = self.goal_poly(state)
            res = self.witness_energy(h, self.basis(state))
            self._residuals[state] = res
        return res

    def is_solved(self, state: MathState) -> bool:
        if not goal_proven(state, self.goal):
            return False
        if not self.liftable:
            return True
        return self.goal_residual(state) < self.eps

    def fitness(self, state: MathState,
                binding: Optional[Binding] = None) -> float:
        if self.liftable:
            return -self.goal_residual(state)
        if binding is None:
            binding = self.binding
        e = total_energy(state, binding,
                         DomainWeights.from_config(self.cfg)).total
        if not goal_proven(state, self.goal):
            e += 1.0
        return -e


def problem_from_text(text, name: str = "problem",
                      cfg: Optional[config.Config] = None,
                      seed: Optional[int] = None,
                      library: Optional[RuleLibrary] = None) -> Problem:
    if cfg is None:
        cfg = config.Config()
    doc = parse_problem(text)
    if doc.name:
        name = doc.name
    state, goal, binding = build_state(doc, cfg, seed)
    if library is None:
        library = RuleLibrary.from_config(cfg)
    return Problem(name, state, goal, binding, library, cfg)


def load_problem(fn: str,
                 cfg: Optional[config.Config] = None,
                 seed: Optional[int] = None,
                 library: Optional[RuleLibrary] = None) -> Problem:
    with open(fn, "rb") as F:
        data = F.read()
    name = os.path.splitext(os.path.basename(fn))[0]
    return problem_from_text(data, name, cfg, seed, library)
