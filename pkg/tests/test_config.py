# SPDX-License-Identifier: GPL-2.0+
import logging

import numpy as np
import pytest

from mathesis import config, util


def test_set_coerces():
    cfg = config.Config()
    cfg.set("energy.weights.matrix", "2.5")
    cfg.set("search.n_sims", "17")
    cfg.set("search.uniform_priors", "yes")
    cfg.set("seed", "9")
    assert cfg.energy.weights.matrix == 2.5
    assert cfg.search.n_sims == 17
    assert cfg.search.uniform_priors is True
    assert cfg.seed == 9
    for bad in ("nope.n_sims", "search.nope", "search"):
        with pytest.raises(KeyError):
            cfg.set(bad, "1")


def test_config_hash_tracks_settings():
    a = config.Config()
    b = config.Config()
    assert a.config_hash() == b.config_hash()
    b.set("train.lr", "0.5")
    assert a.config_hash() != b.config_hash()
    assert a.as_dict()["train"]["lr"] == 0.05


def test_load_config(tmp_path):
    fn = tmp_path / "mathesis.cfg"
    fn.write_text("""
Energy(dim_d=3, matrix=0.5)
Search(n_sims=12, c_puct=2.0)
Rules("ModusPonens", "EqualityTransitivity")
cfg.seed = 4
""")
    cfg = config.Config()
    cfg.load_config(str(fn))
    assert cfg.energy.dim_d == 3
    assert cfg.energy.weights.matrix == 0.5
    assert cfg.search.n_sims == 12
    assert cfg.rules == ["ModusPonens", "EqualityTransitivity"]
    assert cfg.seed == 4


def test_load_config_rejects_unknown(tmp_path):
    fn = tmp_path / "mathesis.cfg"
    fn.write_text("Train(warp=9)\n")
    with pytest.raises(KeyError):
        config.Config().load_config(str(fn))


def test_load_default(tmp_path, monkeypatch):
    fn = tmp_path / "mathesis.cfg"
    fn.write_text("Brain(d_model=16)\n")
    monkeypatch.setenv(config.CONFIG_ENV, str(fn))
    cfg = config.Config()
    cfg.load_default()
    assert cfg.brain.d_model == 16


def test_train_validate():
    cfg = config.Config()
    cfg.train.validate()
    cfg.train.clip = 1.5
    with pytest.raises(ValueError):
        cfg.train.validate()


def test_component_rng():
    a = util.component_rng(1, "rollout", 5).random(3)
    np.testing.assert_array_equal(a,
                                  util.component_rng(1, "rollout", 5).random(3))
    assert not np.array_equal(a, util.component_rng(1, "rollout", 6).random(3))
    assert not np.array_equal(a, util.component_rng(1, "eval", 5).random(3))


def test_stable_json():
    assert util.stable_json({"b": 1, "a": [1.5, None]}) == \
        '{"a":[1.5,null],"b":1}'


def test_run_pure_parallel_keeps_order():
    items = list(range(12))
    assert util.run_pure_parallel(lambda x: x * x, items, 4) == [
        I * I for I in items
    ]
    assert util.run_pure_parallel(lambda x: -x, items) == [-I for I in items]


def test_log_progress(caplog):
    class Job(object):
        name = "job"

        @util.log_progress(lambda self: f"running {self.name}")
        def run(self):
            return 3

    with caplog.at_level(logging.INFO, logger="mathesis"):
        assert Job().run() == 3
    assert "Starting running job" in caplog.text
    assert "Completed running job" in caplog.text
    with caplog.at_level(logging.INFO, logger="mathesis"):
        with pytest.raises(RuntimeError):
            with util.log_progress_ctx(logging.INFO, "boom", None):
                raise RuntimeError("x")
    assert "FAILED(RuntimeError('x')): boom" in caplog.text
