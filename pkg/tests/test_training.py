# SPDX-License-Identifier: GPL-2.0+
import types

import numpy as np
import pytest

from mathesis import synthetic
from mathesis.brain import BrainParams, greedy_action, policy
from mathesis.hypergraph import E
from mathesis.problem import problem_from_text
from mathesis.rules import LOGICAL_RULES, Action, RuleLibrary
from mathesis.training import (ExpertTrace, ReplayError, Trainer,
                               behavior_clone, discounted_returns,
                               evaluate_policy, policy_update, run_episode)

MP = """(problem (name mp) (decl p var) (decl q var) (decl r var)
  (premise (Equals p q))
  (premise (Implies (Equals p q) (Equals q r)))
  (goal (Equals q r)))"""


@pytest.fixture
def mp(cfg):
    return problem_from_text(MP, cfg=cfg, library=RuleLibrary(["ModusPonens"]))


@pytest.fixture
def mp_params(mp, cfg):
    return BrainParams.initial(mp.library, cfg.brain, 0)


def test_discounted_returns():
    T = [types.SimpleNamespace(reward=1.0, done=I) for I in (False, True,
                                                             True)]
    np.testing.assert_allclose(discounted_returns(T, 0.5), [1.5, 1.0, 1.0])


def test_run_episode(mp, mp_params, cfg, rng):
    ep = run_episode(mp, mp_params, cfg, rng, "greedy")
    assert ep.solved
    assert len(ep.transitions) == 1
    T = ep.transitions[0]
    assert T.done and T.success
    assert T.e_t == pytest.approx(2.0)
    assert T.e_next < cfg.train.eps_tol
    tc = cfg.train
    assert T.reward == pytest.approx(T.e_t - T.e_next - tc.lambda_cost +
                                     tc.r_success)
    assert ep.trace.steps[0].action == str(T.action)
    assert ep.total_reward == pytest.approx(T.reward)


def test_episode_limits(mp, mp_params, cfg, rng):
    cfg.train.t_max = 0
    ep = run_episode(mp, mp_params, cfg, rng)
    assert not ep.solved
    assert ep.transitions == []
    assert ep.trace.final_energy == ep.trace.initial_energy


def test_random_rollouts_are_seeded(chain, params, cfg):
    a = run_episode(chain, params, cfg, np.random.default_rng(4), "random")
    b = run_episode(chain, params, cfg, np.random.default_rng(4), "random")
    assert a.trace == b.trace


def test_policy_update(mp, mp_params, cfg, rng):
    with pytest.raises(ValueError):
        policy_update([], mp_params, cfg)
    ep = run_episode(mp, mp_params, cfg, rng)
    new, stats = policy_update(ep.transitions, mp_params, cfg)
    assert stats["epoch"] == cfg.train.epochs - 1
    assert stats["mean_advantage"] > 0
    assert not np.array_equal(new.flat(), mp_params.flat())


def test_policy_update_clips(mp, mp_params, cfg, rng):
    cfg.train.value_coef = 0.0
    cfg.train.entropy_coef = 0.0
    ep = run_episode(mp, mp_params, cfg, rng)
    # Pretend the behaviour policy was far less likely to act this way
    ep.transitions[0].log_prob -= 10.0
    new, stats = policy_update(ep.transitions, mp_params, cfg)
    assert stats["clipped"] == 1.0
    np.testing.assert_array_equal(new.flat(), mp_params.flat())


def test_behavior_clone(cfg):
    dataset = synthetic.generate(4, 0, cfg)
    params = BrainParams.initial(dataset[0].problem.library, cfg.brain, 0)
    new, curve = behavior_clone(dataset, params, cfg, steps=5)
    assert len(curve) >= 2
    assert all(b <= a for a, b in zip(curve, curve[1:]))
    assert curve[-1] < curve[0]
    assert behavior_clone([], params, cfg)[1] == []


def test_replay_errors(mp):
    bogus = Action("ModusPonens", (E(99), E(98)))
    with pytest.raises(ReplayError) as e:
        ExpertTrace(mp, [bogus]).replay(3)
    assert (e.value.index, e.value.step) == (3, 0)
    assert str(e.value).startswith("trace 3 step 0: ")


def test_trainer_metrics(mp, mp_params, cfg):
    cfg.train.eval_window = 2
    seen = []
    trainer = Trainer([mp], mp_params, cfg, seed=1)
    trainer.train(3, seen.append)
    assert [I["episode"] for I in seen] == [2, 3]
    assert trainer.metrics == seen
    assert all(I["success_rate"] == 1.0 for I in seen)
    assert evaluate_policy([mp], trainer.params, cfg) == 1.0
    assert evaluate_policy([], trainer.params, cfg) == 0.0


def test_trainer_resume_is_exact(mp, mp_params, cfg):
    whole = Trainer([mp], mp_params, cfg, seed=1).train(4)
    first = Trainer([mp], mp_params, cfg, seed=1)
    half = first.train(2)
    assert first.episode == 2
    resumed = Trainer([mp], half, cfg, seed=1, start_episode=2).train(2)
    np.testing.assert_array_equal(whole.flat(), resumed.flat())


def logical_library():
    return RuleLibrary([I.name for I in LOGICAL_RULES])


@pytest.mark.parametrize("n", [8, pytest.param(200, marks=pytest.mark.slow)])
def test_dense_reward_identities(cfg, n):
    dataset = synthetic.generate(n, 5, cfg)
    params = BrainParams.initial(dataset[0].problem.library, cfg.brain, 0)
    tc = cfg.train
    count = 0
    for i, I in enumerate(dataset):
        for mode in ("random", "sample"):
            ep = run_episode(I.problem, params, cfg,
                             np.random.default_rng(i), mode)
            trace = ep.trace
            # No witness exists before the first action
            assert trace.initial_energy > 0.01
            for T in ep.transitions:
                assert T.e_next <= T.e_t + 1e-10
                assert T.reward >= -tc.lambda_cost - 1e-10
            bonus = tc.r_success if ep.solved else 0.0
            assert ep.total_reward == pytest.approx(
                trace.initial_energy - trace.final_energy -
                len(ep.transitions) * tc.lambda_cost + bonus, abs=1e-8)
            count += len(ep.transitions)
    if n >= 200:
        assert count >= 1000


@pytest.mark.slow
def test_behavior_clone_memorizes_scripts(cfg):
    dataset = synthetic.generate(10, 0, cfg, library=logical_library())
    params = BrainParams.initial(dataset[0].problem.library, cfg.brain, 0)
    new, curve = behavior_clone(dataset, params, cfg, steps=2000)
    assert curve[-1] < 0.1
    for i, I in enumerate(dataset):
        for state, legal, a in I.replay(i):
            assert greedy_action(policy(state, new, legal)) == a


@pytest.mark.slow
def test_trained_policy_beats_random(cfg):
    cfg.train.t_max = 8
    cfg.train.eval_window = 50
    gaps = []
    for seed in range(5):
        train = [I.problem for I in synthetic.generate(40, seed, cfg)]
        held_out = [I.problem for I in synthetic.generate(20, 100 + seed, cfg)]
        params = BrainParams.initial(train[0].library, cfg.brain, seed)
        trained = Trainer(train, params, cfg, seed=seed).train(500)
        greedy = evaluate_policy(held_out, trained, cfg, "greedy", seed)
        uniform = evaluate_policy(held_out, trained, cfg, "random", seed)
        gaps.append(greedy - uniform)
    assert float(np.median(gaps)) >= 0.2
