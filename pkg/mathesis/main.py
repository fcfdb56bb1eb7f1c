# SPDX-License-Identifier: GPL-2.0+
import argparse
import json
import logging
import os
import sys
from typing import Dict, Iterable, List, Optional

from . import __version__, config, selftest, synthetic, util
from .brain import BrainParams
from .energy import Binding, DomainWeights, minimize_binding, total_energy
from .exprio import emit_trace, parse_trace
from .hypergraph import MathesisError
from .problem import Problem, load_problem
from .rules import RuleLibrary
from .search import METHODS, prove
from .training import ExpertTrace, Trainer, behavior_clone

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def artifact_header(cfg: config.Config, seed: int, **kw) -> Dict:
    """Every artifact starts with the run identity"""
    res = {
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "version": __version__
    }
    res.update(kw)
    return res


def write_jsonl(fn: str, header: Dict, records: Iterable[Dict]):
    with open(fn, "w") as F:
        F.write(util.stable_json(header) + "\n")
        for I in records:
            F.write(util.stable_json(I) + "\n")


def _out(args, fn: str) -> str:
    os.makedirs(args.OUTPUT, exist_ok=True)
    return os.path.join(args.OUTPUT, fn)


def load_params(fn: str, library: RuleLibrary) -> BrainParams:
    params, meta = BrainParams.load(fn)
    if list(params.ops) != library.names:
        raise MathesisError(
            f"{fn} was trained on rules {', '.join(params.ops)}, the library "
            f"has {', '.join(library.names)}")
    config.logger.info(f"Loaded {fn} (episode {meta.get('episode', 0)})")
    return params


def cmd_verify(cfg: config.Config, args) -> int:
    problem = load_problem(args.PROBLEM, cfg, args.SEED)
    binding = problem.binding
    if args.BINDING:
        with open(args.BINDING) as F:
            binding = Binding.from_dict(json.load(F))
    weights = DomainWeights.from_config(cfg)
    if args.MINIMIZE:
        oc = cfg.opt
        binding, rep = minimize_binding(problem.state, binding, weights,
                                        oc.steps, oc.lr, oc.armijo_c,
                                        oc.shrink)
    else:
        rep = total_energy(problem.state, binding, weights)
    tol = cfg.energy.tol
    res = rep.as_dict(problem.state)
    res["consistent"] = rep.total < tol
    res["violations"] = [f"E{I}" for I in rep.violations(tol)]
    util.pj(res)
    return EXIT_OK if res["consistent"] else EXIT_FAILED


def cmd_prove(cfg: config.Config, args) -> int:
    problem = load_problem(args.PROBLEM, cfg, args.SEED)
    params = None
    if args.CHECKPOINT:
        params = load_params(args.CHECKPOINT, problem.library)
    elif args.METHOD == "greedy":
        params = BrainParams.initial(problem.library, cfg.brain, args.SEED)
    with util.log_progress_ctx(logging.INFO,
                               f"{args.METHOD} on {problem.name}", None):
        trace, records = prove(problem, params, args.METHOD, args.SEED)
    base = f"{problem.name}.{args.METHOD}"
    with open(_out(args, base + ".trace.jsonl"), "wb") as F:
        F.write(emit_trace(trace))
    write_jsonl(_out(args, base + ".stats.jsonl"),
                artifact_header(cfg, args.SEED, problem=problem.name,
                                method=args.METHOD), records)
    if trace.solved:
        config.logger.info(f"{problem.name}: proved in {len(trace.steps)} "
                           f"steps, residual {trace.final_energy:.3e}")
        return EXIT_OK
    config.logger.info(f"{problem.name}: no proof found")
    return EXIT_FAILED


def _training_problems(cfg: config.Config, args) -> List[Problem]:
    res = [load_problem(I, cfg, args.SEED) for I in args.PROBLEMS]
    if args.SYNTHETIC:
        res.extend(I.problem
                   for I in synthetic.generate(args.SYNTHETIC, args.SEED, cfg))
    return res


def _start_params(cfg: config.Config, args, library: RuleLibrary):
    if args.RESUME:
        params, meta = BrainParams.load(args.RESUME)
        if list(params.ops) != library.names:
            raise MathesisError(f"{args.RESUME} does not match the library")
        return params, int(meta.get("episode", 0))
    return BrainParams.initial(library, cfg.brain, args.SEED), 0


def cmd_train(cfg: config.Config, args) -> int:
    problems = _training_problems(cfg, args)
    if not problems:
        raise ValueError("train needs problem files or --synthetic N")
    library = problems[0].library
    params, start = _start_params(cfg, args, library)
    trainer = Trainer(problems, params, cfg, args.SEED, start)

    metrics_fn = _out(args, "metrics.jsonl")
    mode = "a" if args.RESUME and os.path.exists(metrics_fn) else "w"
    with open(metrics_fn, mode) as F:
        if mode == "w":
            F.write(util.stable_json(artifact_header(cfg, args.SEED)) + "\n")

        def on_metrics(rec):
            F.write(util.stable_json(rec) + "\n")
            F.flush()

        params = trainer.train(args.EPISODES, on_metrics)

    ckpt = args.CHECKPOINT or _out(args, "brain.ckpt")
    params.save(ckpt, artifact_header(cfg, args.SEED,
                                      episode=trainer.episode))
    config.logger.info(f"Wrote {ckpt} at episode {trainer.episode}")
    return EXIT_OK


def _expert_traces(cfg: config.Config, args) -> List[ExpertTrace]:
    res = []
    for pfn, tfn in args.EXPERT or []:
        problem = load_problem(pfn, cfg, args.SEED)
        with open(tfn, "rb") as F:
            trace = parse_trace(F.read())
        res.append(ExpertTrace(problem, trace.actions))
    if args.SYNTHETIC:
        res.extend(synthetic.generate(args.SYNTHETIC, args.SEED, cfg))
    return res


def cmd_bc(cfg: config.Config, args) -> int:
    dataset = _expert_traces(cfg, args)
    if not dataset:
        raise ValueError("bc needs --expert PROBLEM TRACE or --synthetic N")
    library = dataset[0].problem.library
    params, start = _start_params(cfg, args, library)
    params, curve = behavior_clone(dataset, params, cfg)
    write_jsonl(_out(args, "bc.jsonl"), artifact_header(cfg, args.SEED),
                ({"step": i, "cross_entropy": v} for i, v in enumerate(curve)))
    ckpt = args.CHECKPOINT or _out(args, "brain.ckpt")
    params.save(ckpt, artifact_header(cfg, args.SEED, episode=start))
    if curve:
        print(f"final cross entropy {curve[-1]:.6f}")
    return EXIT_OK


def cmd_selftest(cfg: config.Config, args) -> int:
    outcomes = selftest.run_all(quick=not args.FULL)
    print(selftest.format_table(outcomes))
    return EXIT_OK if all(I.passed for I in outcomes) else EXIT_FAILED


def _key_value(text: str):
    k, sep, v = text.partition("=")
    if not sep or not k:
        raise argparse.ArgumentTypeError(f"Expected key=value, got {text!r}")
    return k, v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mathesis",
        description=
        """Mathesis represents mathematical states as typed hypergraphs,
        scores their consistency with a differentiable energy over matrix,
        polynomial ideal and geometry engines and searches for proofs with an
        energy guided policy, Monte Carlo tree search or evolutionary search
        with unification.""")
    parser.add_argument("-c",
                        dest="CFG",
                        help="Configuration file to use, default "
                        f"${config.CONFIG_ENV}")
    parser.add_argument("--set",
                        dest="SET",
                        action="append",
                        default=[],
                        type=_key_value,
                        metavar="KEY=VALUE",
                        help="Override a dotted configuration key")
    parser.add_argument("--seed", dest="SEED", type=int, default=None)
    parser.add_argument("-j",
                        "--workers",
                        dest="WORKERS",
                        type=int,
                        default=None,
                        help="Rollout workers, 1 for bit exact baselines")
    parser.add_argument("-o",
                        "--output",
                        dest="OUTPUT",
                        default=".",
                        help="Directory for the written artifacts")
    parser.add_argument("-v",
                        "--verbose",
                        dest="VERBOSE",
                        action="store_true",
                        default=False)
    sub = parser.add_subparsers(dest="COMMAND")
    sub.required = True

    p = sub.add_parser("verify", help="Report the energy of a problem")
    p.add_argument("PROBLEM")
    p.add_argument("--binding",
                   dest="BINDING",
                   help="JSON binding replacing the one in the problem")
    p.add_argument("--minimize",
                   dest="MINIMIZE",
                   action="store_true",
                   default=False,
                   help="Minimise the free slots before reporting")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("prove", help="Search for a proof")
    p.add_argument("PROBLEM")
    p.add_argument("--method", dest="METHOD", choices=METHODS, default="mcts")
    p.add_argument("--checkpoint", dest="CHECKPOINT")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("train", help="Energy guided policy training")
    p.add_argument("PROBLEMS", nargs="*")
    p.add_argument("--episodes", dest="EPISODES", type=int, default=200)
    p.add_argument("--synthetic", dest="SYNTHETIC", type=int, default=0)
    p.add_argument("--checkpoint",
                   dest="CHECKPOINT",
                   help="Where to write the parameters")
    p.add_argument("--resume", dest="RESUME", help="Checkpoint to continue")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bc", help="Behavior cloning on expert derivations")
    p.add_argument("--expert",
                   dest="EXPERT",
                   nargs=2,
                   action="append",
                   metavar=("PROBLEM", "TRACE"))
    p.add_argument("--synthetic", dest="SYNTHETIC", type=int, default=0)
    p.add_argument("--checkpoint", dest="CHECKPOINT")
    p.add_argument("--resume", dest="RESUME")
    p.set_defaults(func=cmd_bc)

    p = sub.add_parser("selftest",
                       help="Gradient and faithfulness checks of the engines")
    p.add_argument("--full",
                   dest="FULL",
                   action="store_true",
                   default=False,
                   help="Run the large suites")
    p.set_defaults(func=cmd_selftest)
    return parser


def load_config(args) -> config.Config:
    """File first, then --set and the flags, which win"""
    cfg = config.Config()
    if args.VERBOSE:
        cfg.logger.setLevel(logging.DEBUG)
    if args.CFG:
        cfg.load_config(args.CFG)
    else:
        cfg.load_default()
    for k, v in args.SET:
        cfg.set(k, v)
    if args.SEED is not None:
        cfg.set("seed", args.SEED)
        cfg.set("train.seed", args.SEED)
    if args.WORKERS is not None:
        cfg.set("train.workers", args.WORKERS)
    args.SEED = cfg.seed
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(cfg, args)
    except (MathesisError, ValueError, KeyError, OSError) as e:
        config.logger.error(f"{args.COMMAND}: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
