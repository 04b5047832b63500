"""Imperfect-information concurrent game structures.

An :class:`ICGS` bundles agents, states, per-agent action availability, a
deterministic joint-action transition function and one observation partition
per agent.  States, agents and actions are opaque strings at the interface;
internally everything is indexed densely in declaration order, which fixes
the canonical ordering used by enumeration, reporting and file export.

Models are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .bitsets import bit, from_indices, full_set, iter_bits


class ModelError(ValueError):
    """Unknown agent/state/action, or an action unavailable where used."""


@dataclass(frozen=True)
class Violation:
    """One broken model invariant, with the offending witnesses."""

    kind: str  # empty-availability | missing-transition | bad-transition | availability-uniformity | bad-partition
    message: str
    agent: str | None = None
    states: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class ICGS:
    """Explicit imperfect-information concurrent game structure.

    Parameters use names; ``available`` and ``transition`` may instead be
    index-level callables so that large generated models never materialise
    their transition tables:

    * ``available(agent_index, state_index) -> tuple of action indices``
    * ``transition(state_index, joint action index tuple) -> state index``

    ``observations`` maps an agent to a partition of the states (a list of
    state-name groups).  Agents without an entry observe perfectly (identity
    partition).  The first declared state is the model's initial state unless
    ``initial_state`` says otherwise.
    """

    def __init__(
        self,
        agents: Sequence[str],
        states: Sequence[str],
        actions: Sequence[str],
        propositions: Sequence[str],
        labeling: Mapping[str, Iterable[str]],
        available,
        transition,
        observations: Mapping[str, Sequence[Iterable[str]]] | None = None,
        initial_state: str | None = None,
    ):
        if not agents:
            raise ModelError("a model needs at least one agent")
        if not states:
            raise ModelError("a model needs at least one state")
        self.agents = tuple(agents)
        self.states = tuple(states)
        self.actions = tuple(actions)
        self.propositions = tuple(propositions)
        if len(set(self.agents)) != len(self.agents):
            raise ModelError("duplicate agent names")
        if len(set(self.states)) != len(self.states):
            raise ModelError("duplicate state names")
        if len(set(self.actions)) != len(self.actions):
            raise ModelError("duplicate action names")
        self._agent_idx = {a: i for i, a in enumerate(self.agents)}
        self._state_idx = {q: i for i, q in enumerate(self.states)}
        self._action_idx = {x: i for i, x in enumerate(self.actions)}
        self.n_agents = len(self.agents)
        self.n_states = len(self.states)

        self.initial_state = initial_state if initial_state is not None else self.states[0]
        if self.initial_state not in self._state_idx:
            raise ModelError(f"unknown initial state {self.initial_state!r}")

        self._labels: dict[str, int] = {}
        for p in self.propositions:
            members = labeling.get(p, ())
            self._labels[p] = from_indices(self.state_index(q) for q in members)
        unknown = set(labeling) - set(self.propositions)
        if unknown:
            raise ModelError(f"labeling uses undeclared propositions {sorted(unknown)}")

        # Availability is always materialised: it is small and consulted in
        # every inner loop of both checkers.
        self._avail: list[list[tuple[int, ...]]] = []
        if callable(available):
            for ai in range(self.n_agents):
                self._avail.append([tuple(available(ai, qi)) for qi in range(self.n_states)])
        else:
            for a in self.agents:
                per_agent = available.get(a, {})
                row = []
                for q in self.states:
                    acts = per_agent.get(q, ())
                    row.append(tuple(self.action_index(x) for x in acts))
                self._avail.append(row)

        self._trans_map: dict[tuple[int, tuple[int, ...]], int] | None = None
        if callable(transition):
            self._trans_fn = transition
        else:
            tmap: dict[tuple[int, tuple[int, ...]], int] = {}
            for (q, joint), q2 in transition.items():
                key = (self.state_index(q), tuple(self.action_index(x) for x in joint))
                tmap[key] = self.state_index(q2)
            self._trans_map = tmap
            self._trans_fn = self._lookup_transition

        # Observation partitions: class id per (agent, state), plus member
        # bitsets per class.  Class ids follow the declaration order of their
        # first member state.
        self._class_of: list[list[int]] = []
        self._class_members: list[list[int]] = []
        observations = observations or {}
        unknown = set(observations) - set(self.agents)
        if unknown:
            raise ModelError(f"observations given for undeclared agents {sorted(unknown)}")
        for a in self.agents:
            groups = observations.get(a)
            if groups is None:
                self._class_of.append(list(range(self.n_states)))
                self._class_members.append([bit(i) for i in range(self.n_states)])
                continue
            class_of = [-1] * self.n_states
            raw: list[int] = []
            for g in groups:
                mask = from_indices(self.state_index(q) for q in g)
                raw.append(mask)
            # canonical: order classes by smallest member index
            raw.sort(key=lambda m: (m & -m).bit_length())
            members: list[int] = []
            for mask in raw:
                cid = len(members)
                members.append(mask)
                for i in iter_bits(mask):
                    if class_of[i] != -1:
                        raise ModelError(
                            f"observation groups for agent {a!r} overlap at state {self.states[i]!r}"
                        )
                    class_of[i] = cid
            if any(c == -1 for c in class_of):
                missing = [self.states[i] for i, c in enumerate(class_of) if c == -1]
                raise ModelError(f"observation groups for agent {a!r} miss states {missing}")
            self._class_of.append(class_of)
            self._class_members.append(members)

    # -- index-level accessors (used by the checker kernels) ------------------

    def agent_index(self, a: str) -> int:
        try:
            return self._agent_idx[a]
        except KeyError:
            raise ModelError(f"unknown agent {a!r}") from None

    def state_index(self, q: str) -> int:
        try:
            return self._state_idx[q]
        except KeyError:
            raise ModelError(f"unknown state {q!r}") from None

    def action_index(self, x: str) -> int:
        try:
            return self._action_idx[x]
        except KeyError:
            raise ModelError(f"unknown action {x!r}") from None

    def avail_idx(self, agent: int, state: int) -> tuple[int, ...]:
        return self._avail[agent][state]

    def succ_idx(self, state: int, joint: tuple[int, ...]) -> int:
        return self._trans_fn(state, joint)

    def _lookup_transition(self, state: int, joint: tuple[int, ...]) -> int:
        try:
            return self._trans_map[(state, joint)]  # type: ignore[index]
        except KeyError:
            q = self.states[state]
            acts = tuple(self.actions[x] for x in joint)
            raise ModelError(f"no transition from {q!r} under {acts}") from None

    def class_id(self, agent: int, state: int) -> int:
        return self._class_of[agent][state]

    def class_members_idx(self, agent: int, class_id: int) -> int:
        return self._class_members[agent][class_id]

    def n_classes(self, agent: int) -> int:
        return len(self._class_members[agent])

    def label_bits(self, prop: str) -> int:
        try:
            return self._labels[prop]
        except KeyError:
            raise ModelError(f"unknown proposition {prop!r}") from None

    def joint_actions_idx(self, state: int) -> Iterator[tuple[int, ...]]:
        """All joint actions available at a state, in canonical product order."""
        return itertools.product(*(self._avail[a][state] for a in range(self.n_agents)))

    def coalition_indices(self, coalition: Iterable[str]) -> tuple[int, ...]:
        idx = sorted({self.agent_index(a) for a in coalition})
        return tuple(idx)

    def state_set(self, mask: int) -> frozenset[str]:
        return frozenset(self.states[i] for i in iter_bits(mask))

    # -- name-level operations -------------------------------------------------

    def available_actions(self, agent: str, state: str) -> tuple[str, ...]:
        acts = self._avail[self.agent_index(agent)][self.state_index(state)]
        return tuple(self.actions[x] for x in acts)

    def labeled_states(self, prop: str) -> frozenset[str]:
        return self.state_set(self.label_bits(prop))


def step(model: ICGS, state: str, joint_action: Sequence[str]) -> str:
    """Successor of ``state`` under one action per agent, in agent order."""
    qi = model.state_index(state)
    if len(joint_action) != model.n_agents:
        raise ModelError(
            f"joint action needs {model.n_agents} components, got {len(joint_action)}"
        )
    joint = []
    for a, x in zip(range(model.n_agents), joint_action):
        xi = model.action_index(x)
        if xi not in model.avail_idx(a, qi):
            raise ModelError(
                f"action {x!r} unavailable to agent {model.agents[a]!r} at {state!r}"
            )
        joint.append(xi)
    return model.states[model.succ_idx(qi, tuple(joint))]


def epistemic_class(model: ICGS, agent: str, state: str) -> frozenset[str]:
    """States the agent cannot distinguish from ``state`` (including it)."""
    ai = model.agent_index(agent)
    qi = model.state_index(state)
    return model.state_set(model.class_members_idx(ai, model.class_id(ai, qi)))


def coalition_neighborhood_idx(model: ICGS, coalition: tuple[int, ...], state: int) -> int:
    if not coalition:
        raise ModelError("coalition_neighborhood needs a nonempty coalition")
    mask = 0
    for a in coalition:
        mask |= model.class_members_idx(a, model.class_id(a, state))
    return mask


def coalition_neighborhood(model: ICGS, coalition: Iterable[str], state: str) -> frozenset[str]:
    """Union of the coalition members' epistemic classes at ``state``."""
    idx = model.coalition_indices(coalition)
    return model.state_set(coalition_neighborhood_idx(model, idx, model.state_index(state)))


class UniformStrategy:
    """Memoryless strategy for a coalition, constant on observation classes.

    ``choices`` maps ``(agent name, class id)`` to an action name; the
    convenience constructor :meth:`from_state_map` accepts a per-state table
    and checks it for uniformity.
    """

    def __init__(self, model: ICGS, coalition: Sequence[str], choices: Mapping[tuple[str, int], str]):
        self.model = model
        self.coalition = tuple(coalition)
        self._members = model.coalition_indices(self.coalition)
        self._table: dict[tuple[int, int], int] = {}
        for a in self._members:
            name = model.agents[a]
            for cid in range(model.n_classes(a)):
                try:
                    act = choices[(name, cid)]
                except KeyError:
                    raise ModelError(
                        f"strategy misses a choice for agent {name!r}, class {cid}"
                    ) from None
                xi = model.action_index(act)
                members = model.class_members_idx(a, cid)
                for qi in iter_bits(members):
                    if xi not in model.avail_idx(a, qi):
                        raise ModelError(
                            f"action {act!r} unavailable to {name!r} at "
                            f"{model.states[qi]!r} (class {cid})"
                        )
                self._table[(a, cid)] = xi

    @classmethod
    def from_state_map(
        cls, model: ICGS, coalition: Sequence[str], per_state: Mapping[tuple[str, str], str]
    ) -> "UniformStrategy":
        choices: dict[tuple[str, int], str] = {}
        for a in model.coalition_indices(coalition):
            name = model.agents[a]
            for cid in range(model.n_classes(a)):
                acts = set()
                for qi in iter_bits(model.class_members_idx(a, cid)):
                    q = model.states[qi]
                    if (name, q) in per_state:
                        acts.add(per_state[(name, q)])
                if len(acts) > 1:
                    group = model.state_set(model.class_members_idx(a, cid))
                    raise ModelError(
                        f"strategy for {name!r} is not uniform on {sorted(group)}: {sorted(acts)}"
                    )
                if not acts:
                    raise ModelError(f"strategy misses agent {name!r}, class {cid}")
                choices[(name, cid)] = acts.pop()
        return cls(model, coalition, choices)

    def action_idx(self, agent: int, state: int) -> int:
        return self._table[(agent, self.model.class_id(agent, state))]

    def choice(self, agent: str, state: str) -> str:
        ai = self.model.agent_index(agent)
        if ai not in self._members:
            raise ModelError(f"agent {agent!r} is not in the coalition")
        return self.model.actions[self.action_idx(ai, self.model.state_index(state))]

    def members_idx(self) -> tuple[int, ...]:
        return self._members

    def as_table(self) -> dict[tuple[str, int], str]:
        return {
            (self.model.agents[a], cid): self.model.actions[x]
            for (a, cid), x in sorted(self._table.items())
        }


class InducedModel:
    """Successor structure when the coalition follows a fixed strategy.

    Edges are computed lazily per state: successors of ``q`` are all
    ``step(q, joint)`` where coalition members play the strategy and the
    remaining agents play anything available.
    """

    def __init__(self, base: ICGS, strategy: UniformStrategy):
        self.base = base
        self.strategy = strategy
        self._cache: dict[int, int] = {}
        members = strategy.members_idx()
        self._free = tuple(a for a in range(base.n_agents) if a not in members)
        self._members = members

    def successors_idx(self, state: int) -> int:
        cached = self._cache.get(state)
        if cached is not None:
            return cached
        base = self.base
        fixed = {a: self.strategy.action_idx(a, state) for a in self._members}
        mask = 0
        free_lists = [base.avail_idx(a, state) for a in self._free]
        joint = [0] * base.n_agents
        for a, x in fixed.items():
            joint[a] = x
        for combo in itertools.product(*free_lists):
            for a, x in zip(self._free, combo):
                joint[a] = x
            mask |= bit(base.succ_idx(state, tuple(joint)))
        self._cache[state] = mask
        return mask

    def successors(self, state: str) -> frozenset[str]:
        return self.base.state_set(self.successors_idx(self.base.state_index(state)))

    def reachable_idx(self, start: int) -> int:
        """All states reachable from ``start`` (inclusive) under the strategy."""
        seen = bit(start)
        frontier = [start]
        while frontier:
            q = frontier.pop()
            for s in iter_bits(self.successors_idx(q) & ~seen):
                seen |= bit(s)
                frontier.append(s)
        return seen


def induce(model: ICGS, strategy: UniformStrategy) -> InducedModel:
    if strategy.model is not model:
        raise ModelError("strategy was built for a different model")
    return InducedModel(model, strategy)


def enumerate_uniform_strategies(
    model: ICGS, coalition: Iterable[str]
) -> Iterator[UniformStrategy]:
    """Every uniform memoryless collective strategy, exactly once.

    Enumeration order is the canonical product order: coalition members by
    agent index, classes by class id, actions by declaration order.  The
    total count is the product over (member, class) of the class's available
    action count.
    """
    members = model.coalition_indices(coalition)
    if not members:
        raise ModelError("cannot enumerate strategies for the empty coalition")
    slots: list[tuple[int, int, tuple[int, ...]]] = []
    for a in members:
        for cid in range(model.n_classes(a)):
            rep = (model.class_members_idx(a, cid) & -model.class_members_idx(a, cid)).bit_length() - 1
            slots.append((a, cid, model.avail_idx(a, rep)))
    for combo in itertools.product(*(acts for (_, _, acts) in slots)):
        choices = {
            (model.agents[a], cid): model.actions[x]
            for (a, cid, _), x in zip(slots, combo)
        }
        yield UniformStrategy(model, [model.agents[a] for a in members], choices)


def count_uniform_strategies(model: ICGS, coalition: Iterable[str]) -> int:
    """Closed-form strategy count (product of per-class availability sizes)."""
    total = 1
    for a in model.coalition_indices(coalition):
        for cid in range(model.n_classes(a)):
            members = model.class_members_idx(a, cid)
            rep = (members & -members).bit_length() - 1
            total *= len(model.avail_idx(a, rep))
    return total


def validate(model: ICGS) -> list[Violation]:
    """Check every ICGS invariant; an empty list means the model is valid.

    Cost is |states| x |joint actions| for the totality check, so this is
    meant for construction-time and import-time checking, not for the large
    generated benchmark instances.
    """
    out: list[Violation] = []
    n = model.n_states

    for a in range(model.n_agents):
        for qi in range(n):
            if not model.avail_idx(a, qi):
                out.append(
                    Violation(
                        "empty-availability",
                        f"agent {model.agents[a]!r} has no action at {model.states[qi]!r}",
                        agent=model.agents[a],
                        states=(model.states[qi],),
                    )
                )

    # partition sanity (guaranteed by construction, but imported models may
    # have been built through the index-level interface)
    for a in range(model.n_agents):
        seen = 0
        ok = True
        for cid in range(model.n_classes(a)):
            members = model.class_members_idx(a, cid)
            if members & seen:
                ok = False
            seen |= members
        if not ok or seen != full_set(n):
            out.append(
                Violation(
                    "bad-partition",
                    f"observation classes of agent {model.agents[a]!r} do not partition the states",
                    agent=model.agents[a],
                )
            )
            continue
        # availability must be constant on classes
        for cid in range(model.n_classes(a)):
            members = model.class_members_idx(a, cid)
            rep = (members & -members).bit_length() - 1
            base = model.avail_idx(a, rep)
            for qi in iter_bits(members):
                if model.avail_idx(a, qi) != base:
                    out.append(
                        Violation(
                            "availability-uniformity",
                            f"agent {model.agents[a]!r} has different actions at "
                            f"indistinguishable states {model.states[rep]!r} and {model.states[qi]!r}",
                            agent=model.agents[a],
                            states=(model.states[rep], model.states[qi]),
                        )
                    )

    for qi in range(n):
        for joint in model.joint_actions_idx(qi):
            try:
                q2 = model.succ_idx(qi, joint)
            except Exception:
                q2 = None
            if q2 is None or not (0 <= q2 < n):
                acts = tuple(model.actions[x] for x in joint)
                out.append(
                    Violation(
                        "missing-transition",
                        f"no successor for {model.states[qi]!r} under {acts}",
                        states=(model.states[qi],),
                    )
                )
    return out


def equivalence_closure(
    states: Sequence[str], pairs: Iterable[tuple[str, str]]
) -> tuple[list[list[str]], bool]:
    """Partition induced by the reflexive-symmetric-transitive closure of pairs.

    Returns the groups (in first-member declaration order) and whether the
    closure added any pair beyond reflexivity that was not listed explicitly.
    """
    index = {q: i for i, q in enumerate(states)}
    parent = list(range(len(states)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    listed = set()
    for x, y in pairs:
        xi, yi = index[x], index[y]
        listed.add((min(xi, yi), max(xi, yi)))
        parent[find(xi)] = find(yi)

    groups: dict[int, list[str]] = {}
    for q in states:
        groups.setdefault(find(index[q]), []).append(q)
    ordered = sorted(groups.values(), key=lambda g: index[g[0]])
    added = False
    for g in ordered:
        for x, y in itertools.combinations(sorted(index[q] for q in g), 2):
            if (x, y) not in listed:
                added = True
    return ordered, added
