"""Shared test fixtures: tiny instance builders and an independent value oracle.

``oracle_value`` recomputes policy values from first principles — it multiplies
out the joint distribution over per-bandit outcome paths and transcribes each
payout formula directly — so the engine's evaluators are checked against a
route that shares none of their code.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction
from itertools import product

from haltbandit import (
    GameInstance,
    GlobalHistory,
    PayoutModel,
    Policy,
    ProfitBandit,
    TablePolicy,
    TreeBandit,
    TreeEdge,
    TreeNode,
    step,
)

HALF = Fraction(1, 2)
ONE = Fraction(1)


def path_bandit(rewards, halt_masses, halt_rewards=None) -> TreeBandit:
    """Single-spine bandit: alive at local time t the process is worth
    ``rewards[t]``; the activation leaving t halts with mass ``halt_masses[t]``
    (the last mass must be 1).  By default the halted copy carries the same
    reward as the live one; ``halt_rewards`` overrides that per step.

    Node ids: 0 is the root, then (halted, live) pairs down the spine —
    the depth-1 halted node is 1, the depth-1 live node is 2, and so on.
    """
    rewards = tuple(rewards)
    halt_masses = tuple(halt_masses)
    assert len(rewards) == len(halt_masses) + 1
    assert halt_masses[-1] == 1, "the spine must end in a sure halt"
    if halt_rewards is None:
        halt_rewards = rewards[1:]
    nodes: list[TreeNode | None] = []

    def build(t: int) -> int:
        nid = len(nodes)
        nodes.append(None)
        mass = halt_masses[t]
        hid = len(nodes)
        nodes.append(TreeNode(depth=t + 1, reward=halt_rewards[t], halted=True, edges=()))
        edges = [TreeEdge(to=hid, p=mass, halting=True)]
        if mass != 1:
            cid = build(t + 1)
            edges.append(TreeEdge(to=cid, p=1 - mass, halting=False))
        nodes[nid] = TreeNode(depth=t, reward=rewards[t], halted=False, edges=tuple(edges))
        return nid

    build(0)
    return TreeBandit(nodes=tuple(n for n in nodes if n is not None), root=0)


def ramp_bandit() -> TreeBandit:
    """The (0, 4, 10) bandit: halt mass 1/2 after the first activation,
    certain halt after the second.  Index 8 at the root, 6 below."""
    return path_bandit((0, 4, 10), (HALF, ONE))


def sure_bandit(value) -> TreeBandit:
    """Halts on the very first activation, landing on ``value``."""
    return path_bandit((0, value), (ONE,))


def pair_game(model: PayoutModel = PayoutModel.CP) -> GameInstance:
    """Two-bandit workhorse: the ramp bandit against a sure halt worth 5.

    Collective-payout values of its three policies are 7 ("always 0"),
    13/2 ("0, then 1 if 0 survives"), and 5 ("always 1")."""
    return GameInstance(bandits=(ramp_bandit(), sure_bandit(5)), model=model)


def always(i: int) -> TablePolicy:
    return TablePolicy({}, default=i)


def as_table(game: GameInstance, policy: Policy) -> TablePolicy:
    """Freeze a policy's reachable choices into a plain table.

    The table carries over to any game sharing the same node ids, which is
    how a policy computed on one reward labeling is replayed on another.
    """
    table: dict[GlobalHistory, int] = {}

    def visit(h: GlobalHistory, round_: int) -> None:
        if h in table:
            return
        c = policy.choose(game, h, round_)
        table[h] = c
        for _, nxt in step(game, h, c):
            if nxt.halter is None:
                visit(nxt, round_ + 1)

    visit(game.initial_history(), 0)
    return TablePolicy(table)


def reachable_histories(game: GameInstance, policy: Policy) -> list[tuple[GlobalHistory, int]]:
    """Every live history the policy can reach, with its round number."""
    out: list[tuple[GlobalHistory, int]] = []
    seen: set[GlobalHistory] = set()

    def visit(h: GlobalHistory, round_: int) -> None:
        if h in seen:
            return
        seen.add(h)
        out.append((h, round_))
        for _, nxt in step(game, h, policy.choose(game, h, round_)):
            if nxt.halter is None:
                visit(nxt, round_ + 1)

    visit(game.initial_history(), 0)
    return out


def make_nonincreasing(tree: TreeBandit) -> TreeBandit:
    """Clamp live-edge rewards so the process never rises while alive.

    Halted nodes are left alone: the penultimate payout never reads them.
    """
    nodes = list(tree.nodes)

    def visit(nid: int) -> None:
        cur = nodes[nid].reward
        for e in nodes[nid].edges:
            if not e.halting:
                if nodes[e.to].reward > cur:
                    nodes[e.to] = replace(nodes[e.to], reward=cur)
                visit(e.to)

    visit(tree.root)
    return TreeBandit(nodes=tuple(nodes), root=tree.root)


# ---------------------------------------------------------------------------
# The independent oracle


def _dyn(bandit) -> TreeBandit:
    return bandit.rewards if isinstance(bandit, ProfitBandit) else bandit


def tree_paths(tree: TreeBandit) -> list[tuple[tuple[int, ...], Fraction]]:
    """Root-to-halt paths as (node ids, probability)."""
    out: list[tuple[tuple[int, ...], Fraction]] = []

    def walk(nid: int, trail: tuple[int, ...], prob) -> None:
        trail = trail + (nid,)
        node = tree.nodes[nid]
        if node.halted:
            out.append((trail, prob))
            return
        for e in node.edges:
            walk(e.to, trail, prob * e.p)

    walk(tree.root, (), Fraction(1))
    return out


def _replay_payout(game: GameInstance, policy: Policy, paths) -> Fraction:
    """Deterministic payout of one joint outcome, each scheme written out
    longhand from its definition."""
    model = game.model
    trees = [_dyn(b) for b in game.bandits]
    t = [0] * game.n
    collected = Fraction(0)
    halter = None
    round_ = 0
    while halter is None:
        nodes = tuple(paths[i][t[i]] for i in range(game.n))
        c = policy.choose(game, GlobalHistory(nodes), round_)
        if model is PayoutModel.CCP:
            collected += trees[c].nodes[paths[c][t[c]]].reward
        t[c] += 1
        if trees[c].nodes[paths[c][t[c]]].halted:
            halter = c
        round_ += 1

    def live(i: int):
        return trees[i].nodes[paths[i][t[i]]].reward

    final = trees[halter].nodes[paths[halter][t[halter]]].reward
    if model is PayoutModel.CP:
        return final + sum(live(j) for j in range(game.n) if j != halter)
    if model is PayoutModel.SP:
        return final
    if model is PayoutModel.PSP:
        return trees[halter].nodes[paths[halter][t[halter] - 1]].reward
    if model is PayoutModel.NH:
        # the halting cost is quoted positive (smaller is better)
        return sum(live(j) for j in range(game.n) if j != halter)
    if model is PayoutModel.TP:
        spent = sum(
            game.bandits[j].cost(paths[j][t[j]]) for j in range(game.n) if j != halter
        )
        return final - spent
    if model is PayoutModel.CCP:
        return collected
    raise AssertionError(model)


def oracle_value(game: GameInstance, policy: Policy) -> Fraction:
    """Expected payout by brute enumeration of the joint outcome space."""
    per = [tree_paths(_dyn(b)) for b in game.bandits]
    total = Fraction(0)
    for combo in product(*per):
        prob = Fraction(1)
        for _, p in combo:
            prob *= p
        total += prob * _replay_payout(game, policy, [ids for ids, _ in combo])
    return total
