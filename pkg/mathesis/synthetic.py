# SPDX-License-Identifier: GPL-2.0+
"""Template problems with scripted expert derivations.

Each template is a problem text over randomly drawn symbol names plus the
canonical derivation, written as (rule, [rendered operands]). Operands are
resolved against the built state through MathState.describe() so scripts do
not depend on entity ids.
"""
import string
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .hypergraph import EntityRef, MathState, N, E
from .problem import Problem, problem_from_text
from .rules import Action, RuleLibrary
from .training import ExpertTrace

Script = List[Tuple[str, List[str]]]
Template = Callable[[List[str]], Tuple[str, Script]]

NAME_POOL = [I for I in string.ascii_lowercase] + [
    f"{I}{J}" for I in "pqrs" for J in range(1, 10)
]


def _decls(names: Sequence[str]) -> str:
    return " ".join(f"(decl {I} var)" for I in names)


def modus_ponens(names: List[str]) -> Tuple[str, Script]:
    a, b, c, d = names[:4]
    P = f"(Equals (Sum {a} {b}) {c})"
    Q = f"(Equals {c} {d})"
    text = (f"(problem {_decls((a, b, c, d))} (premise {P}) "
            f"(premise (Implies {P} {Q})) (goal {Q}))")
    Ps = f"Equals(Sum({a},{b}),{c})"
    Qs = f"Equals({c},{d})"
    return text, [("ModusPonens", [Ps, f"Implies({Ps},{Qs})"])]


def two_step_modus_ponens(names: List[str]) -> Tuple[str, Script]:
    a, b, c, d = names[:4]
    P, Q, R = (f"(Equals {a} {b})", f"(Equals {b} {c})", f"(Equals {c} {d})")
    Ps, Qs, Rs = (f"Equals({a},{b})", f"Equals({b},{c})", f"Equals({c},{d})")
    text = (f"(problem {_decls((a, b, c, d))} (premise {P}) "
            f"(premise (Implies {P} {Q})) (premise (Implies {Q} {R})) "
            f"(goal {R}))")
    return text, [("ModusPonens", [Ps, f"Implies({Ps},{Qs})"]),
                  ("ModusPonens", [Qs, f"Implies({Qs},{Rs})"])]


def instantiation(names: List[str]) -> Tuple[str, Script]:
    v, a, b, c = names[:4]
    text = (f"(problem {_decls((a, b, c))} "
            f"(premise (forall ({v}) (Equals (Sum {v} {a}) {b}))) "
            f"(goal (Equals (Sum {c} {a}) {b})))")
    return text, [("UniversalInstantiation",
                   [f"ForAll[{v}](Equals(Sum({v},{a}),{b}))", v, c])]


def transitivity_with_distractor(names: List[str]) -> Tuple[str, Script]:
    a, b, c, d, e, x, w = names[:7]
    P = f"(Equals {x} {w})"
    text = (f"(problem {_decls((a, b, c, d, e, x, w))} (premise {P}) "
            f"(premise (Implies {P} (Equals {a} {b}))) "
            f"(premise (Equals {b} {c})) (premise (Equals {d} {e})) "
            f"(goal (Equals {a} {c})))")
    Ps = f"Equals({x},{w})"
    return text, [
        ("ModusPonens", [Ps, f"Implies({Ps},Equals({a},{b}))"]),
        ("EqualityTransitivity", [f"Equals({a},{b})", f"Equals({b},{c})"]),
    ]


TEMPLATES: Dict[str, Template] = {
    "modus_ponens": modus_ponens,
    "two_step_modus_ponens": two_step_modus_ponens,
    "instantiation": instantiation,
    "transitivity_with_distractor": transitivity_with_distractor,
}


def _resolve(state: MathState, text: str) -> EntityRef:
    refs = [N(I) for I in sorted(state.nodes)]
    refs += [E(I) for I in sorted(state.edges)]
    for I in refs:
        if state.describe(I) == text:
            return I
    raise KeyError(f"No entity renders as {text}")


def script_actions(problem: Problem, script: Script) -> List[Action]:
    """Turn a rendered script into concrete actions by replaying it"""
    state = problem.state
    res = []
    for op, operands in script:
        a = Action(op, tuple(_resolve(state, I) for I in operands))
        state = problem.library.apply(state, a)
        res.append(a)
    return res


def make_problem(template: str,
                 rng: np.random.Generator,
                 cfg: Optional[config.Config] = None,
                 library: Optional[RuleLibrary] = None,
                 index: int = 0) -> ExpertTrace:
    names = [NAME_POOL[I] for I in rng.permutation(len(NAME_POOL))[:8]]
    text, script = TEMPLATES[template](names)
    problem = problem_from_text(text, f"{template}-{index}", cfg,
                                int(rng.integers(2**31)), library)
    return ExpertTrace(problem, script_actions(problem, script))


def generate(n: int,
             seed: int = 0,
             cfg: Optional[config.Config] = None,
             templates: Optional[Sequence[str]] = None,
             library: Optional[RuleLibrary] = None) -> List[ExpertTrace]:
    """n problems cycling through the templates in order"""
    if templates is None:
        templates = list(TEMPLATES)
    rng = np.random.default_rng(seed)
    return [
        make_problem(templates[I % len(templates)], rng, cfg, library, I)
        for I in range(n)
    ]
