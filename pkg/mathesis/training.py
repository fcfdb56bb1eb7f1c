# SPDX-License-Identifier: GPL-2.0+
"""Energy guided episodes, the clipped policy update and behavior cloning.

During an episode the witness basis starts empty, so the initial energy is
||h||^2 for the lifted goal h. Every executed action re-lifts the facts of the
successor state and the reward is the drop of the witness residual energy
minus a step cost, plus a bonus once the residual falls below eps_tol.
"""
import dataclasses
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, config, util
from .brain import (BrainParams, encode, grad_log_policy, grad_op_entropy,
                    grad_value_loss, greedy_action, policy, sample_action,
                    value)
from .exprio import ProofTrace, TraceStep
from .hypergraph import MathesisError, MathState
from .problem import Problem
from .rules import Action, RuleError


class ReplayError(MathesisError):
    def __init__(self, msg: str, index: int, step: Optional[int] = None):
        self.index = index
        self.step = step
        where = f"trace {index}" if step is None else f"trace {index} step {step}"
        super().__init__(f"{where}: {msg}")


@dataclasses.dataclass
class Transition:
    state: MathState
    legal: List[Action]
    action: Action
    reward: float
    next_state: MathState
    e_t: float
    e_next: float
    # Last transition of its episode, for success, T_max or no legal action
    done: bool
    log_prob: float
    value: float
    success: bool = False


@dataclasses.dataclass
class Episode:
    trace: ProofTrace
    transitions: List[Transition]

    @property
    def solved(self) -> bool:
        return self.trace.solved

    @property
    def total_reward(self) -> float:
        return sum(I.reward for I in self.transitions)


@dataclasses.dataclass
class ExpertTrace:
    problem: Problem
    actions: List[Action]

    def replay(self, index: int = 0
               ) -> List[Tuple[MathState, List[Action], Action]]:
        """(state, legal actions, expert action) for every step"""
        res = []
        state = self.problem.state
        lib = self.problem.library
        for step, a in enumerate(self.actions):
            legal = lib.legal_actions(state)
            if a not in legal:
                raise ReplayError(f"{a} is not legal", index, step)
            res.append((state, legal, a))
            try:
                state = lib.apply(state, a)
            except RuleError as e:
                raise ReplayError(str(e), index, step) from None
        return res


def run_episode(problem: Problem,
                params: BrainParams,
                cfg: config.Config,
                rng: np.random.Generator,
                mode: str = "sample",
                seed: int = 0) -> Episode:
    """Roll out one episode. mode is 'sample' (policy sampling), 'greedy'
    or 'random' (uniform over legal actions)."""
    tc = cfg.train
    lib = problem.library
    state = problem.state
    h = problem.goal_poly(state)
    e = h.norm_sq()
    trace = ProofTrace(problem.name, seed, mode, e,
                       config_hash=cfg.config_hash(), version=__version__)
    transitions: List[Transition] = []
    success = False
    for t in range(tc.t_max):
        legal = lib.legal_actions(state)
        if not legal:
            config.logger.debug(f"{problem.name}: no legal action at t={t}")
            break
        enc = encode(state, params)
        dist = policy(state, params, legal, enc)
        if mode == "greedy":
            a = greedy_action(dist)
        elif mode == "random":
            a = legal[int(rng.integers(len(legal)))]
        else:
            a = sample_action(dist, rng)
        nxt = lib.apply(state, a)
        e_next = problem.witness_energy(h, problem.basis(nxt))
        if e_next > e + 1e-10:
            config.logger.warning(
                f"{problem.name}: witness energy rose from {e:.3e} to "
                f"{e_next:.3e} after {a}")
        success = e_next < tc.eps_tol
        r = (e - e_next) - tc.lambda_cost
        if success:
            r += tc.r_success
        transitions.append(
            Transition(state, legal, a, r, nxt, e, e_next, False,
                       dist.log_prob(a), value(state, params, enc), success))
        trace.steps.append(TraceStep(t, str(a), e_next, r))
        state, e = nxt, e_next
        if success:
            break
    if transitions:
        transitions[-1].done = True
    trace.close(success)
    return Episode(trace, transitions)


def discounted_returns(transitions: Sequence[Transition],
                       gamma: float) -> np.ndarray:
    res = np.zeros(len(transitions))
    G = 0.0
    for i in reversed(range(len(transitions))):
        if transitions[i].done:
            G = 0.0
        G = transitions[i].reward + gamma * G
        res[i] = G
    return res


def policy_update(transitions: Sequence[Transition], params: BrainParams,
                  cfg: config.Config) -> Tuple[BrainParams, Dict[str, float]]:
    """Gradient ascent on the clipped surrogate minus the value loss"""
    if not transitions:
        raise ValueError("policy_update needs a nonempty batch")
    tc = cfg.train
    returns = discounted_returns(transitions, tc.gamma)
    adv = returns - np.array([I.value for I in transitions])
    # The value head estimates a probability, regress it onto [0, 1]
    targets = np.clip(returns, 0.0, 1.0)
    n = len(transitions)
    theta = params.flat()
    stats: Dict[str, float] = {}
    for epoch in range(tc.epochs):
        grad = np.zeros_like(theta)
        clipped = 0
        vloss = 0.0
        ent = 0.0
        for T, A, target in zip(transitions, adv, targets):
            logp, g = grad_log_policy(T.state, params, T.action, T.legal)
            ratio = math.exp(logp - T.log_prob)
            if ((A > 0 and ratio > 1 + tc.clip) or
                    (A < 0 and ratio < 1 - tc.clip)):
                clipped += 1
            else:
                grad += A * ratio * g
            if tc.value_coef:
                loss, gv = grad_value_loss(T.state, params, target)
                grad -= tc.value_coef * gv
                vloss += loss
            if tc.entropy_coef:
                h, ge = grad_op_entropy(T.state, params, T.legal)
                grad += tc.entropy_coef * ge
                ent += h
        theta = theta + tc.lr * grad / n
        params = params.with_flat(theta)
        stats = {
            "epoch": epoch,
            "clipped": clipped / n,
            "value_loss": vloss / n,
            "entropy": ent / n,
        }
    stats["mean_advantage"] = float(adv.mean())
    return params, stats


def _bc_samples(dataset: Sequence[ExpertTrace]):
    res = []
    for i, trace in enumerate(dataset):
        res.extend(trace.replay(i))
    return res


def bc_loss(samples, params: BrainParams) -> float:
    return -sum(
        policy(s, params, legal).log_prob(a)
        for s, legal, a in samples) / len(samples)


def behavior_clone(dataset: Sequence[ExpertTrace],
                   params: BrainParams,
                   cfg: config.Config,
                   steps: Optional[int] = None
                   ) -> Tuple[BrainParams, List[float]]:
    """Minimise the mean cross entropy of the expert actions with
    backtracking gradient descent. Returns the parameters and the loss curve,
    which never increases."""
    samples = _bc_samples(dataset)
    if not samples:
        return params.copy(), []
    tc = cfg.train
    if steps is None:
        steps = tc.bc_steps
    n = len(samples)

    def loss_and_grad(p):
        loss = 0.0
        grad = np.zeros(p.size)
        for s, legal, a in samples:
            logp, g = grad_log_policy(s, p, a, legal)
            loss -= logp
            grad -= g
        return loss / n, grad / n

    loss, grad = loss_and_grad(params)
    curve = [loss]
    lr = tc.bc_lr
    for _ in range(steps):
        gg = float(grad @ grad)
        if gg < 1e-18:
            break
        theta = params.flat()
        while lr > 1e-12:
            cand = params.with_flat(theta - lr * grad)
            closs = bc_loss(samples, cand)
            if closs <= loss - 1e-4 * lr * gg:
                break
            lr *= 0.5
        else:
            break
        params = cand
        loss, grad = loss_and_grad(params)
        curve.append(loss)
        lr = min(lr * 1.5, tc.bc_lr)
    config.logger.info(f"Behavior cloning: {n} samples, cross entropy "
                       f"{curve[0]:.4f} -> {curve[-1]:.4f}")
    return params, curve


def evaluate_policy(problems: Sequence[Problem],
                    params: BrainParams,
                    cfg: config.Config,
                    mode: str = "greedy",
                    seed: int = 0) -> float:
    """Fraction of problems solved within T_max by one rollout each"""
    if not problems:
        return 0.0
    wins = 0
    for i, p in enumerate(problems):
        ep = run_episode(p, params, cfg, util.component_rng(seed, "eval", i),
                         mode, seed)
        wins += ep.solved
    return wins / len(problems)


class Trainer(object):
    """The policy training loop. Episodes are rolled out in batches of
    train.workers with frozen parameters, then one update runs on the merged
    batch. Every episode draws from its own generator keyed by its index so a
    resumed run continues the same streams."""
    def __init__(self, problems: Sequence[Problem], params: BrainParams,
                 cfg: config.Config, seed: int = 0, start_episode: int = 0):
        self.problems = list(problems)
        self.params = params
        self.cfg = cfg
        self.seed = seed
        self.episode = start_episode
        self.metrics: List[Dict] = []
        self._window: List[Episode] = []
        cfg.train.validate()

    def _rollout(self, ep: int) -> Episode:
        problem = self.problems[ep % len(self.problems)]
        return run_episode(problem, self.params, self.cfg,
                           util.component_rng(self.seed, "rollout", ep),
                           "sample", self.seed)

    def _window_done(self):
        n = len(self._window)
        rec = {
            "episode": self.episode,
            "success_rate": sum(I.solved for I in self._window) / n,
            "mean_return": sum(I.total_reward for I in self._window) / n,
        }
        self.metrics.append(rec)
        config.logger.info(
            f"Episode {self.episode}: success rate {rec['success_rate']:.2f}, "
            f"mean return {rec['mean_return']:.4f} over the last {n}")
        self._window = []
        return rec

    @util.log_progress(lambda self: f"Training on {len(self.problems)} problems")
    def train(self, episodes: int,
              on_metrics: Optional[Callable[[Dict], None]] = None
              ) -> BrainParams:
        if not self.problems:
            raise ValueError("No training problems")
        tc = self.cfg.train
        batch = max(1, tc.workers)
        end = self.episode + episodes
        while self.episode < end:
            ids = list(range(self.episode, min(end, self.episode + batch)))
            eps = util.run_pure_parallel(self._rollout, ids, tc.workers)
            transitions = [T for I in eps for T in I.transitions]
            if transitions:
                self.params, _ = policy_update(transitions, self.params,
                                               self.cfg)
            for I in eps:
                self.episode += 1
                self._window.append(I)
                if len(self._window) >= tc.eval_window:
                    rec = self._window_done()
                    if on_metrics is not None:
                        on_metrics(rec)
        if self._window:
            rec = self._window_done()
            if on_metrics is not None:
                on_metrics(rec)
        return self.params
