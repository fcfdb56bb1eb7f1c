# SPDX-License-Identifier: GPL-2.0+
"""Proof search: PUCT tree search, evolutionary proof search with semantic
unification, greedy rollouts and an exhaustive breadth first oracle."""
import collections
import dataclasses
import math
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, config, util
from .brain import (BrainParams, encode, greedy_action, policy, sample_action,
                    value)
from .exprio import ProofTrace, TraceStep
from .hypergraph import (NODE, E, EntityRef, MathState, N, canonical_hash,
                         premise_hashes, validate)
from .problem import Problem
from .rules import Action


class SearchNode(object):
    """One state in the search tree with per-action statistics"""
    def __init__(self, state: MathState, parent: Optional["SearchNode"] = None,
                 action_index: Optional[int] = None, depth: int = 0):
        self.state = state
        self.parent = parent
        self.action_index = action_index
        self.depth = depth
        self.legal: Optional[List[Action]] = None
        self.priors = np.zeros(0)
        self.N = np.zeros(0, dtype=np.int64)
        self.W = np.zeros(0)
        self.children: Dict[int, "SearchNode"] = {}
        # Simulations through this node and leaf evaluations made at it
        self.visits = 0
        self.evals = 0
        self.terminal = False
        self.solved = False

    @property
    def expanded(self) -> bool:
        return self.legal is not None

    @property
    def Q(self) -> np.ndarray:
        return np.where(self.N > 0, self.W / np.maximum(self.N, 1), 0.0)

    def puct(self, c_puct: float) -> np.ndarray:
        return self.Q + c_puct * self.priors * math.sqrt(
            self.visits) / (1 + self.N)


@dataclasses.dataclass
class SearchResult:
    actions: List[Action]
    solved: bool
    value: float
    stuck: bool = False
    records: List[Dict] = dataclasses.field(default_factory=list)
    stats: Dict = dataclasses.field(default_factory=dict)


class MCTS(object):
    def __init__(self, problem: Problem, params: Optional[BrainParams],
                 cfg: config.Config):
        self.problem = problem
        self.params = params
        self.cfg = cfg
        self.sc = cfg.search
        self.records: List[Dict] = []
        self.solved_nodes: List[SearchNode] = []
        self.n_nodes = 0
        self.root: Optional[SearchNode] = None

    def evaluate(self, node: SearchNode) -> float:
        """Expand a fresh leaf and return its value"""
        self.n_nodes += 1
        if self.problem.is_solved(node.state):
            node.terminal = node.solved = True
            self.solved_nodes.append(node)
            return 1.0
        legal = self.problem.library.legal_actions(node.state)
        if not legal:
            node.terminal = True
            return 0.0
        node.legal = legal
        node.N = np.zeros(len(legal), dtype=np.int64)
        node.W = np.zeros(len(legal))
        if self.params is None or self.sc.uniform_priors:
            node.priors = np.full(len(legal), 1.0 / len(legal))
            v = 0.0 if self.params is None else value(node.state,
                                                      self.params)
        else:
            enc = encode(node.state, self.params)
            node.priors = policy(node.state, self.params, legal, enc).probs()
            v = value(node.state, self.params, enc)
        return v

    def select(self, node: SearchNode) -> int:
        """argmax of the PUCT score, np.argmax breaks ties to the lowest
        action index"""
        return int(np.argmax(node.puct(self.sc.c_puct)))

    def child(self, node: SearchNode, i: int) -> SearchNode:
        res = node.children.get(i)
        if res is None:
            res = SearchNode(
                self.problem.library.apply(node.state, node.legal[i]), node, i,
                node.depth + 1)
            node.children[i] = res
        return res

    def backpropagate(self, path: List[SearchNode], v: float):
        for I in path:
            I.visits += 1
            if I.parent is not None:
                I.parent.N[I.action_index] += 1
                I.parent.W[I.action_index] += v

    def simulate(self, root: SearchNode, sim: int):
        node = root
        path = [root]
        while node.expanded and node.depth < self.sc.max_depth:
            node = self.child(node, self.select(node))
            path.append(node)
            if not node.expanded:
                break
        if node.terminal:
            v = 1.0 if node.solved else 0.0
        elif not node.expanded:
            v = self.evaluate(node)
        else:
            # Depth cap, re-use the value estimate of the capped node
            v = 0.0 if self.params is None else value(node.state, self.params)
        node.evals += 1
        self.backpropagate(path, v)
        self.records.append({"sim": sim, "depth": node.depth, "value": v})

    def best_path(self, root: SearchNode) -> Tuple[List[Action], bool]:
        if self.solved_nodes:
            node = min(self.solved_nodes, key=lambda I: I.depth)
            res = []
            while node.parent is not None:
                res.append(node.parent.legal[node.action_index])
                node = node.parent
            return res[::-1], True
        res = []
        node = root
        while node.expanded and node.children:
            i = int(np.argmax(node.N))
            if node.N[i] == 0 or i not in node.children:
                break
            res.append(node.legal[i])
            node = node.children[i]
        return res, False

    def run(self, root_state: MathState) -> SearchResult:
        root = self.root = SearchNode(root_state)
        for sim in range(self.sc.n_sims):
            if root.terminal:
                break
            self.simulate(root, sim)
        if root.solved:
            return SearchResult([], True, 1.0, records=self.records,
                                stats=self.stats(root))
        if root.terminal:
            config.logger.warning(
                f"{self.problem.name}: no legal action at the root")
            return SearchResult([], False, 0.0, stuck=True,
                                records=self.records, stats=self.stats(root))
        actions, solved = self.best_path(root)
        v = float(root.W.sum() / max(root.N.sum(), 1))
        return SearchResult(actions, solved, v, records=self.records,
                            stats=self.stats(root))

    def stats(self, root: SearchNode) -> Dict:
        return {
            "simulations": root.visits,
            "nodes": self.n_nodes,
            "solutions": len(self.solved_nodes),
        }


def mcts_search(problem: Problem,
                params: Optional[BrainParams],
                cfg: config.Config,
                root: Optional[MathState] = None) -> SearchResult:
    """PUCT search from root (default the problem's initial state). With no
    params the priors are uniform and leaves evaluate to 0."""
    if root is None:
        root = problem.state
    return MCTS(problem, params, cfg).run(root)


# Semantic unification


def _merge_groups(state: MathState) -> Tuple[Dict[EntityRef, EntityRef], int]:
    """Map every entity to the lowest id entity with the same canonical
    hash. Pairs whose hashes agree but whose kinds or sorts do not are
    reported and left apart."""
    groups: Dict[int, List[EntityRef]] = collections.defaultdict(list)
    for ref in state.entities():
        groups[canonical_hash(state, ref)].append(ref)
    mapping: Dict[EntityRef, EntityRef] = {}
    collisions = 0
    for h in sorted(groups):
        refs = groups[h]
        rep = refs[0]
        for I in refs[1:]:
            if I.kind != rep.kind or (I.kind == NODE and (
                    state.node(I.id).sort != state.node(rep.id).sort)):
                config.logger.warning(
                    f"Canonical hash collision between {rep} and {I}, not "
                    "merging")
                collisions += 1
                continue
            mapping[I] = rep
    return mapping, collisions


def _redirect(state: MathState,
              mapping: Dict[EntityRef, EntityRef]) -> MathState:
    def m(ref: EntityRef) -> EntityRef:
        return mapping.get(ref, ref)

    nodes = {
        k: v
        for k, v in state.nodes.items() if N(k) not in mapping
    }
    edges = {}
    for k, e in state.edges.items():
        if E(k) in mapping:
            continue
        edges[k] = dataclasses.replace(
            e,
            args=tuple(m(I) for I in e.args),
            output=None if e.output is None else m(N(e.output)).id,
            bound_vars=frozenset(m(N(I)).id for I in e.bound_vars))
    facts = frozenset(m(E(I)).id for I in state.facts)
    premises = frozenset(m(E(I)).id for I in state.premises)
    return MathState(nodes, edges, facts, premises, state.next_id)


def disjoint_union(g1: MathState, g2: MathState) -> MathState:
    """g2's entities shifted past g1's id range"""
    off = g1.next_id
    nodes = dict(g1.nodes)
    edges = dict(g1.edges)

    def shift(ref: EntityRef) -> EntityRef:
        return EntityRef(ref.kind, ref.id + off)

    for k, n in g2.nodes.items():
        nodes[k + off] = dataclasses.replace(n, id=k + off)
    for k, e in g2.edges.items():
        edges[k + off] = dataclasses.replace(
            e,
            id=k + off,
            args=tuple(shift(I) for I in e.args),
            output=None if e.output is None else e.output + off,
            bound_vars=frozenset(I + off for I in e.bound_vars))
    return MathState(nodes, edges,
                     g1.facts | {I + off for I in g2.facts},
                     g1.premises | {I + off for I in g2.premises},
                     off + g2.next_id)


def unify(g1: MathState, g2: MathState, max_passes: int = 10) -> MathState:
    """Merge two states, identifying entities with equal canonical hashes.
    Merging is repeated until nothing changes or max_passes is reached."""
    state = disjoint_union(g1, g2)
    for _ in range(max_passes):
        mapping, _ = _merge_groups(state)
        if not mapping:
            break
        state = _redirect(state, mapping)
    else:
        if _merge_groups(state)[0]:
            config.logger.warning(
                f"Unification did not reach a fixpoint in {max_passes} passes")
    validate(state)
    return state


# Evolutionary proof search


@dataclasses.dataclass
class Individual:
    state: MathState
    assumptions: FrozenSet[int]
    fitness: float


@dataclasses.dataclass
class EvolutionResult:
    best: Individual
    generations: int
    solved: bool
    singleton_groups: bool
    records: List[Dict] = dataclasses.field(default_factory=list)


def _proportional(fitness: Sequence[float], rng: np.random.Generator) -> int:
    """Fitness proportional choice after shifting the minimum to zero"""
    f = np.asarray(fitness, dtype=np.float64)
    w = f - f.min() + 1e-9
    cum = np.cumsum(w / w.sum())
    return min(int(np.searchsorted(cum, rng.random(), side="right")),
               len(f) - 1)


class Evolution(object):
    def __init__(self, problem: Problem, params: Optional[BrainParams],
                 cfg: config.Config, seed: int = 0):
        self.problem = problem
        self.params = params
        self.cfg = cfg
        self.sc = cfg.search
        self.seed = seed
        self.singleton = False

    def individual(self, state: MathState) -> Individual:
        return Individual(state, premise_hashes(state),
                          self.problem.fitness(state))

    def mutate(self, state: MathState, rng: np.random.Generator) -> MathState:
        """Apply one policy sampled action, uniform without parameters"""
        legal = self.problem.library.legal_actions(state)
        if not legal:
            return state
        if self.params is None or self.sc.uniform_priors:
            a = legal[int(rng.integers(len(legal)))]
        else:
            dist = policy(state, self.params, legal)
            a = sample_action(dist, rng, self.sc.temperature)
        return self.problem.library.apply(state, a)

    def breed(self, pop: List[Individual],
              rng: np.random.Generator) -> MathState:
        groups: Dict[FrozenSet[int], List[int]] = collections.defaultdict(list)
        for i, I in enumerate(pop):
            groups[I.assumptions].append(i)
        i = _proportional([I.fitness for I in pop], rng)
        mates = [J for J in groups[pop[i].assumptions] if J != i]
        if not mates:
            self.singleton = True
            child = pop[i].state
        else:
            j = mates[_proportional([pop[J].fitness for J in mates], rng)]
            child = unify(pop[i].state, pop[j].state, self.sc.unify_passes)
        return self.mutate(child, rng)

    def solved(self, pop: List[Individual]) -> Optional[Individual]:
        for I in pop:
            if self.problem.is_solved(I.state):
                return I
        return None

    @staticmethod
    def ranked(pop: List[Individual]) -> List[Individual]:
        order = sorted(range(len(pop)), key=lambda i: (-pop[i].fitness, i))
        return [pop[I] for I in order]

    def run(self, population: Sequence[MathState]) -> EvolutionResult:
        if not population:
            raise ValueError("The initial population is empty")
        pop = [self.individual(I) for I in population]
        records: List[Dict] = []
        win = self.solved(pop)
        if win is not None:
            return EvolutionResult(win, 0, True, False, records)
        gen = 0
        for gen in range(1, self.sc.generations + 1):
            rng = util.component_rng(self.seed, "mutation", gen)
            children = [I.state for I in self.ranked(pop)[:self.sc.elitism]]
            while len(children) < self.sc.pop_size:
                children.append(self.breed(pop, rng))
            pop = util.run_pure_parallel(self.individual, children,
                                         self.cfg.train.workers)
            fit = [I.fitness for I in pop]
            records.append({
                "generation": gen,
                "best": max(fit),
                "mean": sum(fit) / len(fit),
                "groups": len({I.assumptions for I in pop}),
                "singleton": self.singleton,
            })
            win = self.solved(pop)
            if win is not None:
                return EvolutionResult(win, gen, True, self.singleton, records)
        if self.singleton:
            config.logger.warning(
                "Every assumption group was a singleton at some point, "
                "crossover fell back to cloning")
        return EvolutionResult(self.ranked(pop)[0], gen, False, self.singleton,
                               records)


def eps_search(problem: Problem,
               params: Optional[BrainParams],
               cfg: config.Config,
               population: Optional[Sequence[MathState]] = None,
               seed: int = 0) -> EvolutionResult:
    """Evolutionary proof search. The default population is pop_size copies
    of the problem's initial state."""
    if population is None:
        population = [problem.state] * cfg.search.pop_size
    return Evolution(problem, params, cfg, seed).run(population)


# Oracles and simple methods


def bfs_minimal_proof(problem: Problem,
                      max_depth: int,
                      start: Optional[MathState] = None
                      ) -> Optional[List[Action]]:
    """Exhaustive breadth first search for a shortest proof. States with
    the same fact hashes are visited once."""
    if start is None:
        start = problem.state
    if problem.is_solved(start):
        return []

    def key(state):
        return frozenset(canonical_hash(state, E(I)) for I in state.facts)

    seen = {key(start)}
    frontier: List[Tuple[MathState, List[Action]]] = [(start, [])]
    for _ in range(max_depth):
        nxt = []
        for state, path in frontier:
            for a in problem.library.legal_actions(state):
                child = problem.library.apply(state, a)
                if problem.is_solved(child):
                    return path + [a]
                k = key(child)
                if k in seen:
                    continue
                seen.add(k)
                nxt.append((child, path + [a]))
        frontier = nxt
        if not frontier:
            break
    return None


def greedy_search(problem: Problem, params: BrainParams,
                  max_steps: int) -> SearchResult:
    """Repeatedly apply the policy's most probable action"""
    state = problem.state
    actions: List[Action] = []
    for _ in range(max_steps):
        if problem.is_solved(state):
            break
        legal = problem.library.legal_actions(state)
        if not legal:
            return SearchResult(actions, False, 0.0, stuck=True)
        a = greedy_action(policy(state, params, legal))
        actions.append(a)
        state = problem.library.apply(state, a)
    solved = problem.is_solved(state)
    return SearchResult(actions, solved, 1.0 if solved else 0.0)


def state_energy(problem: Problem, state: MathState) -> float:
    return -problem.fitness(state)


def replay_trace(problem: Problem, actions: Sequence[Action], method: str,
                 seed: int) -> ProofTrace:
    """Replay actions from the initial state recording energies and rewards"""
    tc = problem.cfg.train
    state = problem.state
    e = state_energy(problem, state)
    trace = ProofTrace(problem.name, seed, method, e,
                       config_hash=problem.cfg.config_hash(),
                       version=__version__)
    for t, a in enumerate(actions):
        state = problem.library.apply(state, a)
        e_next = state_energy(problem, state)
        r = (e - e_next) - tc.lambda_cost
        if problem.is_solved(state):
            r += tc.r_success
        trace.steps.append(TraceStep(t, str(a), e_next, r))
        e = e_next
    trace.close(problem.is_solved(state))
    return trace


METHODS = ("mcts", "eps", "greedy")


def prove(problem: Problem,
          params: Optional[BrainParams],
          method: str = "mcts",
          seed: int = 0) -> Tuple[ProofTrace, List[Dict]]:
    """Run one search method and return the replayed proof trace plus the
    search records"""
    cfg = problem.cfg
    if method == "mcts":
        res = mcts_search(problem, params, cfg)
        return replay_trace(problem, res.actions, method, seed), res.records
    if method == "greedy":
        if params is None:
            raise ValueError("The greedy method needs policy parameters")
        res = greedy_search(problem, params, cfg.train.t_max)
        return replay_trace(problem, res.actions, method, seed), []
    if method == "eps":
        evo = eps_search(problem, params, cfg, seed=seed)
        actions: List[Action] = []
        if evo.solved:
            # Evolved states mix lineages, replay a shortest derivation
            actions = bfs_minimal_proof(problem, cfg.search.max_depth) or []
        return replay_trace(problem, actions, method, seed), evo.records
    raise ValueError(f"Unknown method {method!r}, expected one of "
                     f"{', '.join(METHODS)}")
