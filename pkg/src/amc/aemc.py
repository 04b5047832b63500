"""Fixpoint evaluation of alternating epistemic mu-calculus formulas.

``denotation`` computes satisfying-state sets over int bitsets; least and
greatest fixpoints run Kleene iteration from the empty and the full set.
The one-step coalition operator comes in two variants:

* ``objective``: a state satisfies ``<<A>> X f`` when some joint coalition
  action at that state sends every completion into the target;
* ``subjective``: there must be one action per (member, observation class)
  covering the coalition's epistemic neighborhood of the state, such that
  from every state in that neighborhood all completions land in the target.

The subjective variant is the default; it mirrors the strategic-next clause
of the uniform-strategy semantics, so it cross-checks against the
enumeration-based checker.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .bitsets import bit, complement, full_set, iter_bits, size
from .formulas import (
    And,
    CoalitionX,
    Formula,
    FormulaError,
    Mu,
    Not,
    Nu,
    Or,
    Prop,
    Top,
    Var,
    free_vars,
    require_checkable,
)
from .model import ICGS, ModelError


class EvalError(RuntimeError):
    """A fixpoint invariant failed during evaluation (checker bug guard)."""


class NextVariant(Enum):
    OBJECTIVE = "objective"
    SUBJECTIVE = "subjective"


@dataclass
class FixpointStats:
    """Statistics of one top-level query.

    ``iterations`` counts functional applications that changed the set, for
    the outermost fixpoint of the formula (the largest such count when the
    formula has several top-level fixpoints).  ``applications`` is the raw
    application count over all fixpoint evaluations, including restarted
    inner ones.
    """

    sat_count: int = 0
    iterations: int = 0
    applications: int = 0
    wall_time: float = 0.0


# ---------------------------------------------------------------------------
# One-step coalition pre-image
# ---------------------------------------------------------------------------

def _completion_lists(model: ICGS, free: tuple[int, ...], state: int):
    return [model.avail_idx(a, state) for a in free]


def _good_tuple(model: ICGS, state: int, members: tuple[int, ...],
                free: tuple[int, ...], alpha: tuple[int, ...], target: int) -> bool:
    """Does this coalition tuple force the next state into ``target``?"""
    joint = [0] * model.n_agents
    for a, x in zip(members, alpha):
        joint[a] = x
    for combo in itertools.product(*_completion_lists(model, free, state)):
        for a, x in zip(free, combo):
            joint[a] = x
        if not (target >> model.succ_idx(state, tuple(joint))) & 1:
            return False
    return True


def _pre_empty(model: ICGS, target: int) -> int:
    """<<>> X f : all joint actions must land in the target."""
    result = 0
    for q in range(model.n_states):
        if _good_tuple(model, q, (), tuple(range(model.n_agents)), (), target):
            result |= bit(q)
    return result


def _pre_objective(model: ICGS, members: tuple[int, ...], target: int) -> int:
    if not members:
        return _pre_empty(model, target)
    free = tuple(a for a in range(model.n_agents) if a not in members)
    result = 0
    for q in range(model.n_states):
        for alpha in itertools.product(*(model.avail_idx(a, q) for a in members)):
            if _good_tuple(model, q, members, free, alpha, target):
                result |= bit(q)
                break
    return result


def _signature_groups(model: ICGS, members: tuple[int, ...]):
    """Partition of the states by the tuple of member observation classes.

    Cached on the model: the grouping depends only on the coalition.  Each
    group records its signature, member bitset and the coalition's action
    lists (availability is constant on observation classes, hence on groups).
    """
    cache = getattr(model, "_sig_groups", None)
    if cache is None:
        cache = {}
        setattr(model, "_sig_groups", cache)
    if members in cache:
        return cache[members]
    by_sig: dict[tuple[int, ...], int] = {}
    for q in range(model.n_states):
        sig = tuple(model.class_id(a, q) for a in members)
        by_sig[sig] = by_sig.get(sig, 0) | bit(q)
    groups = []
    for sig, mask in by_sig.items():
        rep = (mask & -mask).bit_length() - 1
        avail = [model.avail_idx(a, rep) for a in members]
        neighborhood = 0
        for a, cid in zip(members, sig):
            neighborhood |= model.class_members_idx(a, cid)
        groups.append({"sig": sig, "mask": mask, "avail": avail, "nbhd": neighborhood})
    cache[members] = groups
    return groups


def _pre_subjective(model: ICGS, members: tuple[int, ...], target: int) -> int:
    if not members:
        return _pre_empty(model, target)
    free = tuple(a for a in range(model.n_agents) if a not in members)
    groups = _signature_groups(model, members)

    # Coalition tuples that work from every state of a group.  Computed with
    # an early stop: once the running intersection is empty the remaining
    # member states cannot resurrect the group.
    good_of_group: dict[tuple[int, ...], set[tuple[int, ...]]] = {}
    for g in groups:
        tuples = set(itertools.product(*g["avail"]))
        for q in iter_bits(g["mask"]):
            if not tuples:
                break
            tuples = {a for a in tuples if _good_tuple(model, q, members, free, a, target)}
        good_of_group[g["sig"]] = tuples

    result = 0
    for g in groups:
        covered = [g2 for g2 in groups if g2["mask"] & g["nbhd"]]
        if _uniform_choice_exists(members, covered, good_of_group):
            result |= g["mask"]
    return result


def _uniform_choice_exists(members, covered, good_of_group) -> bool:
    """Backtracking search for one action per (member, class) satisfying
    every covered group's good-tuple set."""
    slots: list[tuple[int, int]] = []  # (member position, class id)
    slot_domain: dict[tuple[int, int], tuple[int, ...]] = {}
    for g in covered:
        if not good_of_group[g["sig"]]:
            return False
        for k, cid in enumerate(g["sig"]):
            key = (k, cid)
            if key not in slot_domain:
                slots.append(key)
                slot_domain[key] = g["avail"][k]
    # groups become checkable once their last slot is assigned
    order = {key: i for i, key in enumerate(slots)}
    group_ready: dict[int, list] = {}
    for g in covered:
        last = max(order[(k, cid)] for k, cid in enumerate(g["sig"]))
        group_ready.setdefault(last, []).append(g)

    assignment: dict[tuple[int, int], int] = {}

    def assign(i: int) -> bool:
        if i == len(slots):
            return True
        key = slots[i]
        for action in slot_domain[key]:
            assignment[key] = action
            ok = True
            for g in group_ready.get(i, ()):
                alpha = tuple(assignment[(k, cid)] for k, cid in enumerate(g["sig"]))
                if alpha not in good_of_group[g["sig"]]:
                    ok = False
                    break
            if ok and assign(i + 1):
                return True
        del assignment[key]
        return False

    return assign(0)


def pre_coalition_idx(model: ICGS, members: tuple[int, ...], target: int,
                      variant: NextVariant = NextVariant.SUBJECTIVE) -> int:
    if variant is NextVariant.OBJECTIVE:
        return _pre_objective(model, members, target)
    return _pre_subjective(model, members, target)


def pre_coalition(model: ICGS, coalition: Iterable[str], target: Iterable[str],
                  variant: NextVariant = NextVariant.SUBJECTIVE) -> frozenset[str]:
    """States from which the coalition can force the next state into ``target``."""
    members = model.coalition_indices(coalition)
    bits = 0
    for q in target:
        bits |= bit(model.state_index(q))
    return model.state_set(pre_coalition_idx(model, members, bits, variant))


# ---------------------------------------------------------------------------
# Denotation
# ---------------------------------------------------------------------------

class _Evaluator:
    def __init__(self, model: ICGS, variant: NextVariant):
        self.model = model
        self.variant = variant
        self.full = full_set(model.n_states)
        self.applications = 0
        self.top_level_iterations: list[int] = []

    def eval(self, f: Formula, env: dict[str, int], depth: int) -> int:
        model = self.model
        if isinstance(f, Prop):
            return model.label_bits(f.name)
        if isinstance(f, Top):
            return self.full
        if isinstance(f, Var):
            return env[f.name]
        if isinstance(f, Not):
            return complement(self.eval(f.child, env, depth), model.n_states)
        if isinstance(f, And):
            return self.eval(f.left, env, depth) & self.eval(f.right, env, depth)
        if isinstance(f, Or):
            return self.eval(f.left, env, depth) | self.eval(f.right, env, depth)
        if isinstance(f, CoalitionX):
            target = self.eval(f.child, env, depth)
            members = model.coalition_indices(f.coalition)
            return pre_coalition_idx(model, members, target, self.variant)
        if isinstance(f, (Mu, Nu)):
            return self.fixpoint(f, env, depth)
        raise FormulaError(f"cannot evaluate node {type(f).__name__}")

    def fixpoint(self, f: Mu | Nu, env: dict[str, int], depth: int) -> int:
        grows = isinstance(f, Mu)
        current = 0 if grows else self.full
        changed = 0
        inner = dict(env)
        while True:
            inner[f.var] = current
            nxt = self.eval(f.body, inner, depth + 1)
            self.applications += 1
            if grows:
                if nxt & current != current:
                    raise EvalError("least fixpoint iteration is not a growing chain")
            else:
                if nxt | current != current:
                    raise EvalError("greatest fixpoint iteration is not a shrinking chain")
            if nxt == current:
                break
            changed += 1
            if changed > self.model.n_states:
                raise EvalError("fixpoint failed to stabilise within |states| changes")
            current = nxt
        if depth == 0:
            self.top_level_iterations.append(changed)
        return current


def denotation(
    model: ICGS,
    f: Formula,
    valuation: Mapping[str, Iterable[str]] | None = None,
    variant: NextVariant = NextVariant.SUBJECTIVE,
) -> tuple[frozenset[str], FixpointStats]:
    """Satisfying-state set of a fixpoint formula under a valuation."""
    if not all(isinstance(n, tuple) or True for n in ()):  # pragma: no cover
        pass
    fv = free_vars(f)
    valuation = valuation or {}
    missing = fv - set(valuation)
    if missing:
        raise FormulaError(f"valuation misses variables {sorted(missing)}")
    from .formulas import is_aemc, is_monotone, check_alternation_free

    if not is_aemc(f):
        raise FormulaError("not a fixpoint-language formula")
    if not is_monotone(f):
        raise FormulaError("formula is not syntactically monotone")
    if not check_alternation_free(f):
        raise FormulaError("formula is not alternation-free")

    env = {}
    for var, states in valuation.items():
        mask = 0
        for q in states:
            mask |= bit(model.state_index(q))
        env[var] = mask

    started = time.perf_counter()
    ev = _Evaluator(model, variant)
    result = ev.eval(f, env, 0)
    elapsed = time.perf_counter() - started
    stats = FixpointStats(
        sat_count=size(result),
        iterations=max(ev.top_level_iterations, default=0),
        applications=ev.applications,
        wall_time=elapsed,
    )
    return model.state_set(result), stats


def check_aemc(
    model: ICGS,
    state: str,
    f: Formula,
    variant: NextVariant = NextVariant.SUBJECTIVE,
) -> tuple[bool, FixpointStats]:
    """Truth of a closed fixpoint formula at one state, with statistics."""
    require_checkable(f)
    model.state_index(state)
    sat, stats = denotation(model, f, {}, variant)
    return state in sat, stats
