# SPDX-License-Identifier: GPL-2.0+
import dataclasses
import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Optional

logger = logging.getLogger("mathesis")

CONFIG_ENV = "MATHESIS_CONFIG"


@dataclasses.dataclass
class DomainWeightsConfig:
    matrix: float = 1.0
    ideal: float = 1.0
    geometry: float = 1.0


@dataclasses.dataclass
class EnergyConfig:
    dim_d: int = 4
    tol: float = 1e-8
    weights: DomainWeightsConfig = dataclasses.field(
        default_factory=DomainWeightsConfig)


@dataclasses.dataclass
class OptConfig:
    steps: int = 1000
    lr: float = 0.1
    armijo_c: float = 1e-4
    shrink: float = 0.5


@dataclasses.dataclass
class IdealConfig:
    slack: int = 1
    cap: int = 8
    basis_cap: int = 20000
    k_max: int = 4
    tol: float = 1e-10
    damping: float = 1e-12


@dataclasses.dataclass
class HypergraphConfig:
    term_budget: int = 256


@dataclasses.dataclass
class BrainConfig:
    d_model: int = 32
    layers: int = 2
    max_arity: int = 8
    value_prior: float = 0.02
    init_scale: float = 0.3


@dataclasses.dataclass
class TrainConfig:
    gamma: float = 0.99
    lambda_cost: float = 0.01
    r_success: float = 1.0
    eps_tol: float = 1e-6
    t_max: int = 30
    clip: float = 0.2
    lr: float = 0.05
    epochs: int = 4
    seed: int = 0
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    workers: int = 1
    eval_window: int = 20
    bc_steps: int = 2000
    bc_lr: float = 0.5

    def validate(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"train.gamma must lie in (0,1], got {self.gamma}")
        if not 0.0 < self.clip < 1.0:
            raise ValueError(f"train.clip must lie in (0,1), got {self.clip}")
        for name in ("lambda_cost", "r_success", "eps_tol", "lr"):
            if getattr(self, name) < 0:
                raise ValueError(f"train.{name} must be non-negative")
        if self.t_max < 0 or self.epochs < 1:
            raise ValueError("train.t_max must be >= 0 and train.epochs >= 1")


@dataclasses.dataclass
class SearchConfig:
    n_sims: int = 1000
    c_puct: float = 1.5
    max_depth: int = 8
    generations: int = 10
    pop_size: int = 8
    elitism: int = 2
    unify_passes: int = 10
    temperature: float = 1.0
    uniform_priors: bool = False


class Config(object):
    """Program configuration and general global state"""
    seed = 0
    rules: Optional[List[str]] = None
    logger: logging.Logger

    def _create_logger(self):
        if not logger.handlers:
            ch = logging.StreamHandler()
            ch.setFormatter(
                logging.Formatter(fmt='%(asctime)s %(levelname)-8s %(message)s',
                                  datefmt='%m-%d %H:%M:%S'))
            logger.addHandler(ch)
        logger.setLevel(logging.INFO)
        self.logger = logger

    def __init__(self):
        self._create_logger()
        self.energy = EnergyConfig()
        self.opt = OptConfig()
        self.ideal = IdealConfig()
        self.graph = HypergraphConfig()
        self.brain = BrainConfig()
        self.train = TrainConfig()
        self.search = SearchConfig()

    def load_config(self, fn):
        """The configuration file is a python script that we execute with
        capitalized functions of this class injected into it"""
        fn = os.path.expanduser(fn)
        with open(fn, "r") as F:
            pyc = compile(source=F.read(), filename=fn, mode="exec")

        g = {"cfg": self}
        for k in dir(self):
            if k[0].isupper():
                g[k] = getattr(self, k)
        eval(pyc, g)

    def load_default(self):
        """Load the file named by $MATHESIS_CONFIG, if any"""
        fn = os.environ.get(CONFIG_ENV)
        if fn:
            self.load_config(fn)

    def _section(self, name: str):
        sections = ("energy", "opt", "ideal", "graph", "brain", "train",
                    "search")
        if name not in sections:
            raise KeyError(f"Unknown configuration section {name!r}")
        return getattr(self, name)

    def set(self, key: str, value: Any):
        """Set a dotted configuration key, ie 'energy.weights.matrix'. String
        values are coerced to the type of the current value."""
        if key == "seed":
            self.seed = int(value)
            return
        parts = key.split(".")
        obj = self._section(parts[0])
        for I in parts[1:-1]:
            obj = getattr(obj, I)
        if not parts[1:] or not hasattr(obj, parts[-1]):
            raise KeyError(f"Unknown configuration key {key!r}")
        cur = getattr(obj, parts[-1])
        if isinstance(value, str):
            if isinstance(cur, bool):
                value = value.lower() in ("1", "true", "yes", "on")
            elif isinstance(cur, int):
                value = int(value)
            elif isinstance(cur, float):
                value = float(value)
        setattr(obj, parts[-1], value)

    def as_dict(self) -> Dict[str, Any]:
        res = {
            "seed": self.seed,
            "rules": list(self.rules) if self.rules is not None else None
        }
        for I in ("energy", "opt", "ideal", "graph", "brain", "train",
                  "search"):
            res[I] = dataclasses.asdict(getattr(self, I))
        return res

    def config_hash(self) -> str:
        data = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha1(data).hexdigest()

    def Energy(self, dim_d=None, tol=None, matrix=None, ideal=None,
               geometry=None):
        """Matrix dimension, consistency tolerance and per-domain weights used
        by the energy kernel"""
        for k, v in (("dim_d", dim_d), ("tol", tol)):
            if v is not None:
                setattr(self.energy, k, v)
        for k, v in (("matrix", matrix), ("ideal", ideal),
                     ("geometry", geometry)):
            if v is not None:
                setattr(self.energy.weights, k, float(v))
        return self.energy

    def Optimizer(self, **kwargs):
        """Gradient descent settings for minimize_binding"""
        return self._update(self.opt, kwargs)

    def Ideal(self, **kwargs):
        """Degree bound slack/cap and least squares settings"""
        return self._update(self.ideal, kwargs)

    def Graph(self, **kwargs):
        """Hypergraph limits, ie term_budget"""
        return self._update(self.graph, kwargs)

    def Brain(self, **kwargs):
        """Policy/value network sizes"""
        return self._update(self.brain, kwargs)

    def Train(self, **kwargs):
        """Episode, reward and PPO/BC settings"""
        return self._update(self.train, kwargs)

    def Search(self, **kwargs):
        """MCTS and evolutionary search settings"""
        return self._update(self.search, kwargs)

    def Rules(self, *names):
        """Restrict the rule library to the named rules"""
        self.rules = list(names)
        return self.rules

    def _update(self, section, kwargs):
        for k, v in kwargs.items():
            if not hasattr(section, k):
                raise KeyError(
                    f"Unknown setting {k!r} for {type(section).__name__}")
            setattr(section, k, v)
        return section
