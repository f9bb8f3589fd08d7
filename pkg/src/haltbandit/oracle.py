"""Brute-force ground truth: global optima, policy enumeration, certification.

Everything here is deliberately slow and simple.  ``dp_optimal`` computes
the best achievable value by backward induction over every reachable
history, independent of any index machinery, so index-based policies have
something honest to be measured against.  ``enumerate_policies`` lists
every deterministic controller of a small game, and ``atoms`` expands the
full joint sample space so pathwise (not just in-expectation) claims can
be checked outcome by outcome.

The two certifiers package the headline checks: the index policy attains
the optimum, and the greedy policy is pathwise dominant under the
penultimate scheme once rewards never increase before the halt.

The random generators at the bottom produce small valid instances for
property sweeps; they draw from a counter-based generator so a seed pins
the instance exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import PreconditionError, ResourceCapError
from .game import (
    DEFAULT_HISTORY_CAP,
    GameInstance,
    GlobalHistory,
    GreedyRewardPolicy,
    IndexPolicy,
    Policy,
    TablePolicy,
    evaluate_exact,
    immediate_payment,
    round_of,
    step,
    terminal_payout,
)
from .jsonio import Number
from .models import (
    MarkovBandit,
    MarkovState,
    ProfitBandit,
    TreeBandit,
    TreeEdge,
    TreeNode,
    validate,
)
from .reductions import PayoutModel, model_index

DEFAULT_POLICY_CAP = 10**4


@dataclass(frozen=True)
class OptimalSolution:
    value: Number
    policy: TablePolicy
    values: Mapping[GlobalHistory, Number]
    actions: Mapping[GlobalHistory, int]


def dp_optimal(game: GameInstance, *, history_cap: int = DEFAULT_HISTORY_CAP) -> OptimalSolution:
    """Backward induction over every reachable history; ties to the lowest id."""
    if game.backend != "tree":
        raise PreconditionError("the optimality oracle needs a finite tree backend")
    values: dict[GlobalHistory, Number] = {}
    actions: dict[GlobalHistory, int] = {}
    visited = 0

    def value(h: GlobalHistory) -> Number:
        nonlocal visited
        if h in values:
            return values[h]
        visited += 1
        if visited > history_cap:
            raise ResourceCapError(f"more than {history_cap} reachable histories")
        best: Number | None = None
        best_i = 0
        for i in range(game.n):
            v = immediate_payment(game, h, i)
            for p, nxt in step(game, h, i):
                if nxt.halter is not None:
                    v = v + p * terminal_payout(game, h, i, nxt)
                else:
                    v = v + p * value(nxt)
            if best is None or v > best:
                best, best_i = v, i
        values[h] = best  # type: ignore[assignment]
        actions[h] = best_i
        return best  # type: ignore[return-value]

    top = value(game.initial_history())
    return OptimalSolution(
        value=top, policy=TablePolicy(actions), values=values, actions=actions
    )


def enumerate_policies(
    game: GameInstance, *, cap: int = DEFAULT_POLICY_CAP
) -> list[TablePolicy]:
    """Every deterministic policy, one choice per history it can reach.

    Distinct assignments on unreachable histories do not multiply the count:
    choices are assigned only where the policy being built can actually
    arrive.  Reachable histories of a tree game never merge, so the
    assignment order (smallest undecided history first) is canonical.
    """
    if game.backend != "tree":
        raise PreconditionError("policy enumeration needs a finite tree backend")
    out: list[TablePolicy] = []

    def rec(assign: dict[GlobalHistory, int], frontier: frozenset[GlobalHistory]) -> None:
        if not frontier:
            if len(out) >= cap:
                raise ResourceCapError(f"more than {cap} deterministic policies")
            out.append(TablePolicy(dict(assign)))
            return
        h = min(frontier, key=lambda x: (round_of(game, x), x.nodes))
        rest = frontier - {h}
        for i in range(game.n):
            opened = [nxt for _, nxt in step(game, h, i) if nxt.halter is None]
            assign[h] = i
            rec(assign, rest | frozenset(opened))
            del assign[h]

    rec({}, frozenset((game.initial_history(),)))
    return out


# ---------------------------------------------------------------------------
# Joint outcome atoms


@dataclass(frozen=True)
class Atom:
    """One complete joint outcome: a full root-to-halt path per bandit."""

    paths: tuple[tuple[int, ...], ...]
    probability: Number


def _bandit_paths(tree: TreeBandit) -> list[tuple[tuple[int, ...], Number]]:
    out: list[tuple[tuple[int, ...], Number]] = []

    def walk(nid: int, path: tuple[int, ...], p: Number) -> None:
        node = tree.nodes[nid]
        if node.halted:
            out.append((path, p))
            return
        for e in node.edges:
            walk(e.to, path + (e.to,), p * e.p)

    walk(tree.root, (tree.root,), 1)
    return out


def atoms(game: GameInstance, *, cap: int = DEFAULT_HISTORY_CAP) -> list[Atom]:
    """The full product sample space of a tree game."""
    if game.backend != "tree":
        raise PreconditionError("atom enumeration needs a tree backend")
    per = []
    count = 1
    for i in range(game.n):
        dyn = game.dynamics(i)
        assert isinstance(dyn, TreeBandit)
        paths = _bandit_paths(dyn)
        count *= len(paths)
        if count > cap:
            raise ResourceCapError(f"more than {cap} joint outcome atoms")
        per.append(paths)
    out = [Atom(paths=(), probability=1)]
    for paths in per:
        out = [
            Atom(paths=a.paths + (path,), probability=a.probability * p)
            for a in out
            for path, p in paths
        ]
    return out


@dataclass(frozen=True)
class AtomRun:
    payout: Number
    halter: int
    rounds: int
    final: GlobalHistory


def run_on_atom(game: GameInstance, policy: Policy, atom: Atom) -> AtomRun:
    """Play the policy on one atom: every draw is dictated by the atom's paths."""
    positions = [0] * game.n  # index into each bandit's path
    h = game.initial_history()
    total: Number = 0
    for round_ in range(sum(len(p) for p in atom.paths)):
        i = policy.choose(game, h, round_of(game, h))
        total += immediate_payment(game, h, i)
        positions[i] += 1
        nid = atom.paths[i][positions[i]]
        nxt_nodes = h.nodes[:i] + (nid,) + h.nodes[i + 1 :]
        dyn = game.dynamics(i)
        assert isinstance(dyn, TreeBandit)
        if dyn.nodes[nid].halted:
            post = GlobalHistory(nxt_nodes, halter=i)
            total += terminal_payout(game, h, i, post)
            return AtomRun(payout=total, halter=i, rounds=round_ + 1, final=post)
        h = GlobalHistory(nxt_nodes)
    raise PreconditionError("atom paths ran out before any bandit halted")


# ---------------------------------------------------------------------------
# Certification


@dataclass(frozen=True)
class IndexOptimalityReport:
    index_value: Number
    optimal_value: Number
    gap: Number
    histories_compared: int
    action_disagreements: int
    tolerance: float
    passed: bool

    def to_obj(self) -> dict:
        return {
            "index_value": self.index_value,
            "optimal_value": self.optimal_value,
            "gap": self.gap,
            "histories_compared": self.histories_compared,
            "action_disagreements": self.action_disagreements,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def certify_index_optimality(
    game: GameInstance,
    *,
    tol: float = 1e-10,
    history_cap: int = DEFAULT_HISTORY_CAP,
) -> IndexOptimalityReport:
    """Check that always playing the largest index attains the optimum.

    Compares the index policy's exact value against the brute-force
    optimum, and on every history the index policy reaches, checks that its
    choice agrees with the optimal action whenever both the best index and
    the best action are unique.  Exact inputs must match exactly; floats
    within ``tol``.
    """
    if game.model is PayoutModel.PSP:
        raise PreconditionError("the penultimate scheme has no index policy to certify")
    sol = dp_optimal(game, history_cap=history_cap)
    policy = IndexPolicy()
    idx_value = evaluate_exact(game, policy, history_cap=history_cap)
    gap = sol.value - idx_value
    exact = not isinstance(gap, float)
    compared = 0
    disagreements = 0
    stack = [game.initial_history()]
    while stack:
        h = stack.pop()
        choice = policy.choose(game, h, round_of(game, h))
        q: list[Number] = []
        for i in range(game.n):
            v = immediate_payment(game, h, i)
            for p, nxt in step(game, h, i):
                if nxt.halter is not None:
                    v = v + p * terminal_payout(game, h, i, nxt)
                else:
                    v = v + p * sol.values[nxt]
            q.append(v)
        indices = [
            model_index(game.model, game.bandits[i], h.nodes[i]) for i in range(game.n)
        ]
        if _unique_argmax(q, exact, tol) and _unique_argmax(indices, exact, tol):
            compared += 1
            if q.index(max(q)) != indices.index(max(indices)):
                disagreements += 1
        for p, nxt in step(game, h, choice):
            if nxt.halter is None:
                stack.append(nxt)
    ok = (gap == 0 if exact else abs(gap) <= tol) and disagreements == 0
    return IndexOptimalityReport(
        index_value=idx_value,
        optimal_value=sol.value,
        gap=gap,
        histories_compared=compared,
        action_disagreements=disagreements,
        tolerance=tol,
        passed=ok,
    )


def _unique_argmax(values: Sequence[Number], exact: bool, tol: float) -> bool:
    top = max(values)
    if exact:
        return sum(1 for v in values if v == top) == 1
    return sum(1 for v in values if abs(v - top) <= tol) == 1


@dataclass(frozen=True)
class GreedyDominanceReport:
    n_policies: int
    n_atoms: int
    min_slack: Number
    tolerance: float
    passed: bool

    def to_obj(self) -> dict:
        return {
            "n_policies": self.n_policies,
            "n_atoms": self.n_atoms,
            "min_slack": self.min_slack,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def certify_greedy_dominance(
    game: GameInstance,
    *,
    tol: float = 0.0,
    policy_cap: int = DEFAULT_POLICY_CAP,
    atom_cap: int = DEFAULT_HISTORY_CAP,
) -> GreedyDominanceReport:
    """Check the greedy policy's pathwise dominance under the penultimate scheme.

    Requires every bandit's rewards to never increase along any live path;
    then on every joint outcome atom and against every deterministic
    policy, greedy's realized payout must be at least the other policy's —
    dominance outcome by outcome, not merely on average.
    """
    if game.model is not PayoutModel.PSP:
        raise PreconditionError("greedy dominance is a penultimate-scheme statement")
    for i in range(game.n):
        dyn = game.dynamics(i)
        assert isinstance(dyn, TreeBandit)
        for nid, node in enumerate(dyn.nodes):
            for e in node.edges:
                child = dyn.nodes[e.to]
                if not child.halted and child.reward > node.reward:
                    raise PreconditionError(
                        f"bandit {i} rewards increase on edge {nid}->{e.to}; "
                        "greedy dominance needs non-increasing rewards"
                    )
    greedy = GreedyRewardPolicy()
    all_atoms = atoms(game, cap=atom_cap)
    greedy_pay = [run_on_atom(game, greedy, a).payout for a in all_atoms]
    policies = enumerate_policies(game, cap=policy_cap)
    min_slack: Number | None = None
    ok = True
    for pol in policies:
        for k, a in enumerate(all_atoms):
            slack = greedy_pay[k] - run_on_atom(game, pol, a).payout
            if min_slack is None or slack < min_slack:
                min_slack = slack
            if slack < -tol:
                ok = False
    assert min_slack is not None
    return GreedyDominanceReport(
        n_policies=len(policies),
        n_atoms=len(all_atoms),
        min_slack=min_slack,
        tolerance=tol,
        passed=ok,
    )


# ---------------------------------------------------------------------------
# Random corpus


_HALT_MASSES = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1))


def _rng_of(seed_or_rng: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.Philox(key=seed_or_rng))


def random_tree_bandit(
    seed_or_rng: int | np.random.Generator,
    *,
    max_depth: int = 3,
    max_branching: int = 2,
    rational: bool = True,
) -> TreeBandit:
    """A small valid bandit: integer rewards in [-5, 10], halting masses from
    {1/4, 1/2, 3/4, 1}, every path halted by ``max_depth``."""
    rng = _rng_of(seed_or_rng)
    nodes: list[TreeNode | None] = []

    def reward() -> int:
        return int(rng.integers(-5, 11))

    def split(total: Fraction, k: int) -> list[Fraction]:
        weights = [int(rng.integers(1, 5)) for _ in range(k)]
        s = sum(weights)
        return [total * Fraction(w, s) for w in weights]

    def build(depth: int) -> int:
        nid = len(nodes)
        nodes.append(None)
        mass = Fraction(1) if depth + 1 >= max_depth else _HALT_MASSES[int(rng.integers(0, 4))]
        edges: list[TreeEdge] = []
        n_halt = int(rng.integers(1, 3))
        for p in split(mass, n_halt):
            hid = len(nodes)
            nodes.append(TreeNode(depth=depth + 1, reward=reward(), halted=True, edges=()))
            edges.append(TreeEdge(to=hid, p=p, halting=True))
        if mass < 1:
            n_live = int(rng.integers(1, max_branching + 1))
            for p in split(1 - mass, n_live):
                cid = build(depth + 1)
                edges.append(TreeEdge(to=cid, p=p, halting=False))
        nodes[nid] = TreeNode(depth=depth, reward=reward(), halted=False, edges=tuple(edges))
        return nid

    root = build(0)
    bandit = TreeBandit(nodes=tuple(n for n in nodes if n is not None), root=root)
    if not rational:
        from .models import to_float

        bandit = to_float(bandit)  # type: ignore[assignment]
    report = validate(bandit)
    assert report.passed, report.codes()
    return bandit


def random_profit_bandit(
    seed_or_rng: int | np.random.Generator,
    *,
    max_depth: int = 3,
    max_branching: int = 2,
) -> ProfitBandit:
    rng = _rng_of(seed_or_rng)
    tree = random_tree_bandit(rng, max_depth=max_depth, max_branching=max_branching)
    costs = tuple(int(rng.integers(0, 6)) for _ in tree.nodes)
    return ProfitBandit(rewards=tree, costs=costs)


def random_markov_bandit(
    seed_or_rng: int | np.random.Generator,
    *,
    n_states: int = 3,
    constant_halt: Fraction | None = None,
    halt_rewards: str = "reward",
) -> MarkovBandit:
    """A small valid chain; a constant halting probability (e.g. for the
    discounted-index comparison) can be forced."""
    rng = _rng_of(seed_or_rng)
    states = []
    for _ in range(n_states):
        r = int(rng.integers(-5, 11))
        h = constant_halt if constant_halt is not None else _HALT_MASSES[int(rng.integers(0, 3))]
        states.append(MarkovState(reward=r, halt_prob=h, halt_reward=r if halt_rewards == "reward" else 0))
    transitions = []
    for _ in range(n_states):
        weights = [int(rng.integers(0, 4)) for _ in range(n_states)]
        if sum(weights) == 0:
            weights[int(rng.integers(0, n_states))] = 1
        s = sum(weights)
        transitions.append(tuple(Fraction(w, s) for w in weights))
    bandit = MarkovBandit(states=tuple(states), transitions=tuple(transitions), initial=0)
    report = validate(bandit)
    assert report.passed, report.codes()
    return bandit


def random_game(
    seed_or_rng: int | np.random.Generator,
    *,
    n_bandits: int = 2,
    model: PayoutModel = PayoutModel.CP,
    max_depth: int = 3,
    max_branching: int = 2,
    rational: bool = True,
) -> GameInstance:
    rng = _rng_of(seed_or_rng)
    if model is PayoutModel.TP:
        bandits: tuple = tuple(
            random_profit_bandit(rng, max_depth=max_depth, max_branching=max_branching)
            for _ in range(n_bandits)
        )
    else:
        bandits = tuple(
            random_tree_bandit(rng, max_depth=max_depth, max_branching=max_branching, rational=rational)
            for _ in range(n_bandits)
        )
    return GameInstance(bandits=bandits, model=model)
