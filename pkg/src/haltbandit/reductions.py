"""Payout schemes and their reductions to the core scheme.

The core scheme (CP) pays every bandit its current reward when the game
halts.  Each alternative scheme is handled by relabeling rewards on the
same histories so that the relabeled bandit, played under CP, pays exactly
what the original pays under its own scheme:

* SP  -- only the halting bandit is paid, at its halted history: keep the
         rewards of halted nodes and zero the rest.
* NH  -- every bandit except the halter pays out (a cost): zero the halted
         nodes and negate the rest; CP value of the relabeling equals minus
         the NH cost, so maximizing the relabeled game minimizes the cost.
* TP  -- the halter collects its terminal reward while everyone else pays
         their running cost: halted nodes keep the reward, live nodes carry
         minus the cost.
* CCP -- every activation pays the bandit's pre-activation reward: relabel
         each node with the sum of rewards strictly above it (prefix sums),
         so the relabeled terminal value telescopes into the running total.

PSP (pay the halter its reward just before the final activation) has no
relabeling; the game engine evaluates it natively and the greedy policy is
the optimal one once rewards never increase before the halt.

With constant survival probability per activation, the cumulative scheme's
index is the classical Gittins index divided by the halting probability;
``gittins_compare`` checks that identity against an independent Gittins
solver based on retirement-value calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

from .errors import PreconditionError
from .jsonio import Number
from .indices import (
    DEFAULT_ITER_CAP,
    DEFAULT_RULE_CAP,
    ZERO_TOL,
    IndexResult,
    enumerate_stopping_rules,
    markov_cumulative_index,
    solo_index_enumerate,
    solo_index_parametric,
)
from .models import (
    AnyBandit,
    MarkovBandit,
    MarkovState,
    ProfitBandit,
    TreeBandit,
    dynamics_of,
)


class PayoutModel(str, Enum):
    CP = "CP"    # everyone is paid their current reward at the global halt
    PSP = "PSP"  # the halter is paid its reward just before the halting activation
    SP = "SP"    # the halter is paid its reward at the halt
    NH = "NH"    # everyone except the halter pays out (a cost to minimize)
    TP = "TP"    # halter collects terminal reward, the rest pay running costs
    CCP = "CCP"  # every activation pays the activated bandit's current reward


def reduce_sp(bandit: TreeBandit) -> TreeBandit:
    """Keep halted rewards, zero live ones."""
    nodes = tuple(
        replace(n, reward=n.reward if n.halted else 0) for n in bandit.nodes
    )
    return TreeBandit(nodes=nodes, root=bandit.root)


def reduce_nh(bandit: TreeBandit) -> TreeBandit:
    """Zero halted rewards, negate live ones (CP value = minus the NH cost)."""
    nodes = tuple(
        replace(n, reward=0 if n.halted else -n.reward) for n in bandit.nodes
    )
    return TreeBandit(nodes=nodes, root=bandit.root)


def reduce_tp(bandit: ProfitBandit) -> TreeBandit:
    """Halted nodes keep the terminal reward, live nodes carry minus the cost."""
    if not isinstance(bandit, ProfitBandit):
        raise PreconditionError("the terminal-profit scheme needs a bandit with costs")
    tree = bandit.rewards
    nodes = tuple(
        replace(n, reward=n.reward if n.halted else -bandit.costs[nid])
        for nid, n in enumerate(tree.nodes)
    )
    return TreeBandit(nodes=nodes, root=tree.root)


def reduce_ccp(bandit: TreeBandit) -> TreeBandit:
    """Relabel each node with the sum of rewards strictly above it."""
    nodes = tuple(
        replace(n, reward=bandit.prefix_reward(nid)) for nid, n in enumerate(bandit.nodes)
    )
    return TreeBandit(nodes=nodes, root=bandit.root)


def _reduce_markov(model: PayoutModel, bandit: MarkovBandit) -> MarkovBandit:
    if model is PayoutModel.SP:
        states = tuple(MarkovState(0, s.halt_prob, s.halt_reward) for s in bandit.states)
    elif model is PayoutModel.NH:
        states = tuple(MarkovState(-s.reward, s.halt_prob, 0) for s in bandit.states)
    else:
        raise PreconditionError(f"no state relabeling for {model.value} on markov bandits")
    return MarkovBandit(states=states, transitions=bandit.transitions, initial=bandit.initial)


def reduced_bandit(model: PayoutModel, bandit: AnyBandit) -> TreeBandit | MarkovBandit:
    """The relabeled bandit whose CP behavior matches ``model`` on the original.

    Raises for PSP (no relabeling exists) and for the cumulative scheme on
    Markov bandits (prefix sums are not a function of the state; use
    ``model_index`` which solves that case directly on the chain).
    """
    if model is PayoutModel.CP:
        return dynamics_of(bandit) if isinstance(bandit, ProfitBandit) else bandit  # type: ignore[return-value]
    if model is PayoutModel.PSP:
        raise PreconditionError("the penultimate scheme has no reward relabeling; evaluate it natively")
    if isinstance(bandit, MarkovBandit):
        return _reduce_markov(model, bandit)
    if model is PayoutModel.SP:
        return reduce_sp(bandit)  # type: ignore[arg-type]
    if model is PayoutModel.NH:
        return reduce_nh(bandit)  # type: ignore[arg-type]
    if model is PayoutModel.TP:
        return reduce_tp(bandit)  # type: ignore[arg-type]
    if model is PayoutModel.CCP:
        if isinstance(bandit, ProfitBandit):
            raise PreconditionError("cumulative payouts read the reward tree, not costs")
        return reduce_ccp(bandit)
    raise PreconditionError(f"unknown payout model {model!r}")


def model_index_result(
    model: PayoutModel,
    bandit: AnyBandit,
    anchor: int | None = None,
    *,
    method: str = "parametric",
    cap: int = DEFAULT_RULE_CAP,
    zero_tol: float = ZERO_TOL,
    max_iters: int = DEFAULT_ITER_CAP,
) -> IndexResult:
    """Full solver output for the scheme-specific index at an anchor.

    Computed as the plain index of the relabeled bandit; node and state ids
    are preserved by every relabeling, so the anchor and the realizing rule
    carry over.  For the cumulative scheme on a Markov bandit the direct
    running-payment solver is used instead.
    """
    if model is PayoutModel.CCP and isinstance(bandit, MarkovBandit):
        return markov_cumulative_index(bandit, anchor, zero_tol=zero_tol, max_iters=max_iters)
    reduced = reduced_bandit(model, bandit)
    if method == "parametric":
        return solo_index_parametric(reduced, anchor, zero_tol=zero_tol, max_iters=max_iters)
    if method == "enumerate":
        if not isinstance(reduced, TreeBandit):
            raise PreconditionError("enumeration requires a tree bandit")
        return solo_index_enumerate(reduced, anchor, cap=cap)
    raise PreconditionError(f"unknown method {method!r}")


def model_index(
    model: PayoutModel,
    bandit: AnyBandit,
    anchor: int | None = None,
    *,
    method: str = "parametric",
    cap: int = DEFAULT_RULE_CAP,
    zero_tol: float = ZERO_TOL,
    max_iters: int = DEFAULT_ITER_CAP,
) -> Number:
    """The scheme-specific priority index at an anchor.

    Larger is better for every scheme; for NH the value is minus the
    smallest achievable cost rate, so the usual argmax rule still picks
    the cost-minimizing bandit.
    """
    return model_index_result(
        model, bandit, anchor, method=method, cap=cap, zero_tol=zero_tol, max_iters=max_iters
    ).value


def direct_index(
    model: PayoutModel,
    bandit: AnyBandit,
    anchor: int | None = None,
    *,
    cap: int = DEFAULT_RULE_CAP,
) -> Number:
    """Scheme index straight from its defining ratio, by rule enumeration.

    This is the slow cross-check for ``model_index``: for each stopping
    rule the scheme-specific numerator is accumulated path by path.  For
    SP, TP and CCP the best (largest) ratio is returned and must equal the
    relabeled index.  For NH the returned value is the smallest achievable
    cost rate — the cost-minimizing convention — and equals minus the
    relabeled index.
    """
    tree = dynamics_of(bandit)
    if not isinstance(tree, TreeBandit):
        raise PreconditionError("direct enumeration requires a tree bandit")
    if anchor is None:
        anchor = tree.root
    costs = bandit.costs if isinstance(bandit, ProfitBandit) else None
    if model is PayoutModel.TP and costs is None:
        raise PreconditionError("the terminal-profit scheme needs a bandit with costs")

    def ratio(rule) -> Number:
        num: Number = 0
        den: Number = 0
        base = tree.nodes[anchor].reward
        prefix_base = tree.prefix_reward(anchor)

        def walk(nid: int, weight: Number) -> None:
            nonlocal num, den
            for e in tree.nodes[nid].edges:
                w = weight * e.p
                child = tree.nodes[e.to]
                if e.halting:
                    den += w
                    if model is PayoutModel.SP:
                        num += w * child.reward
                    elif model is PayoutModel.TP:
                        num += w * child.reward
                    elif model is PayoutModel.CCP:
                        # total paid on this branch: every activation from the
                        # anchor (inclusive) down to the halt
                        num += w * (tree.prefix_reward(e.to) - prefix_base)
                    # NH: the halter pays nothing
                elif e.to in rule.stop_set:
                    if model is PayoutModel.NH:
                        num += w * child.reward
                    elif model is PayoutModel.TP:
                        num -= w * costs[e.to]  # type: ignore[index]
                    elif model is PayoutModel.CCP:
                        num += w * (tree.prefix_reward(e.to) - prefix_base)
                else:
                    walk(e.to, w)

        if model is PayoutModel.NH:
            num -= base  # the anchor reward the bandit would have paid
        if model is PayoutModel.TP:
            num += costs[anchor]  # type: ignore[index]
        walk(anchor, 1)
        return (num if isinstance(num, float) or isinstance(den, float) else Fraction(num)) / den

    values = [ratio(rule) for rule in enumerate_stopping_rules(tree, anchor, cap=cap)]
    if model is PayoutModel.NH:
        return min(values)
    if model in (PayoutModel.SP, PayoutModel.TP, PayoutModel.CCP):
        return max(values)
    raise PreconditionError(f"no direct form for {model.value}")


# ---------------------------------------------------------------------------
# Gittins recovery


def gittins_index(
    bandit: MarkovBandit,
    state: int | None = None,
    *,
    bisect_tol: float = 1e-10,
    value_tol: float = 1e-13,
    max_sweeps: int = 200_000,
) -> float:
    """Classical discounted Gittins index by retirement calibration.

    The discount is read off the (constant) survival probability.  For a
    candidate charge the stopping value W(x) = max(0, r(x) − charge +
    beta · E[W(next)]) is computed by value iteration; the index is the
    charge at which playing once from the target state becomes exactly
    break-even, found by bisection.  This solver is intentionally separate
    from the ratio-iteration machinery so the two can check each other.
    """
    beta = _constant_survival(bandit)
    if state is None:
        state = bandit.initial
    rewards = [float(s.reward) for s in bandit.states]
    rows = [[float(p) for p in row] for row in bandit.transitions]
    n = len(rewards)

    def forced_play(charge: float) -> float:
        w = [0.0] * n
        for _ in range(max_sweeps):
            worst = 0.0
            nxt = [0.0] * n
            for x in range(n):
                cont = rewards[x] - charge + beta * sum(rows[x][y] * w[y] for y in range(n))
                nxt[x] = cont if cont > 0.0 else 0.0
                worst = max(worst, abs(nxt[x] - w[x]))
            w = nxt
            if worst <= value_tol:
                break
        return rewards[state] - charge + beta * sum(rows[state][y] * w[y] for y in range(n))

    lo = min(rewards) - 1.0
    hi = max(rewards) + 1.0
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if forced_play(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _constant_survival(bandit: MarkovBandit) -> float:
    probs = {s.halt_prob for s in bandit.states}
    if len(probs) != 1:
        raise PreconditionError("the Gittins identity needs one constant halting probability")
    h = probs.pop()
    if not 0 < h < 1:
        raise PreconditionError("the Gittins identity needs survival strictly inside (0, 1)")
    return float(1 - h)


@dataclass(frozen=True)
class GittinsComparison:
    cumulative_index: Number
    gittins: float
    ratio: float
    beta: float
    abs_error: float
    passed: bool

    def to_obj(self) -> dict:
        return {
            "cumulative_index": self.cumulative_index,
            "gittins": self.gittins,
            "ratio": self.ratio,
            "beta": self.beta,
            "abs_error": self.abs_error,
            "pass": self.passed,
        }


def gittins_compare(
    bandit: MarkovBandit,
    state: int | None = None,
    *,
    tol: float = 1e-8,
) -> GittinsComparison:
    """Check cumulative-scheme index == Gittins / (1 − beta) on one chain."""
    beta = _constant_survival(bandit)
    if state is None:
        state = bandit.initial
    rho = markov_cumulative_index(bandit, state).value
    g = gittins_index(bandit, state)
    err = abs(float(rho) * (1.0 - beta) - g)
    ratio = float(rho) / g if g != 0 else math.inf
    return GittinsComparison(
        cumulative_index=rho,
        gittins=g,
        ratio=ratio,
        beta=beta,
        abs_error=err,
        passed=err <= tol,
    )
