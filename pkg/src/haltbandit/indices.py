"""Solo-payout indices and their block decomposition.

The solo-payout index of a bandit at a history is the best achievable
ratio between the expected reward movement collected if the bandit halts
while being run, and the probability that it does halt, over all ways of
deciding when to give up:

    index(anchor) = max over stopping rules tau of
        E[reward at (halt time ^ tau) - reward at anchor | anchor]
        / P(anchor < halt time <= tau | anchor)

Stopping rules must act strictly after the anchor and are adapted to the
bandit's own history.  Since every activation carries positive halting
mass, the denominator of every rule is positive and the index is finite.

Two solvers are provided and kept deliberately independent: a brute-force
enumeration over every stopping rule (the oracle), and a parametric ratio
iteration (Dinkelbach): for a candidate charge the inner optimal-stopping
problem "collect the movement but pay the charge when the halt is yours"
is solved by backward induction (trees) or by policy iteration over
stationary stop sets (Markov chains); the charge is a root of the inner
value exactly at the index, and each iteration replaces the charge with
the maximizing rule's own ratio.  The earliest optimal rule breaks every
tie toward stopping, which is the canonical choice used throughout.

Iterating the earliest optimal rule from the root partitions every path
into index blocks whose values never increase; the per-node "prevailing
index" (the value of the block a node sits in) is the non-increasing
equivalent reward process used by the greedy reduction of the full game.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import prod
from typing import Callable, Iterator, Mapping

from .errors import InvalidRuleError, PreconditionError, ResourceCapError, SolverError
from .jsonio import Number
from .linear import solve_linear
from .models import MarkovBandit, TreeBandit

DEFAULT_RULE_CAP = 10**6
DEFAULT_ITER_CAP = 10**4
ZERO_TOL = 1e-10
VALUE_ITER_TOL = 1e-12


@dataclass(frozen=True)
class StoppingRule:
    """Stop at the first member of ``stop_set`` reached strictly below ``anchor``."""

    anchor: int
    stop_set: frozenset[int]

    def to_obj(self) -> dict:
        return {"anchor": self.anchor, "stop_set": sorted(self.stop_set)}


@dataclass(frozen=True)
class BlockValue:
    numerator: Number
    denominator: Number

    @property
    def ratio(self) -> Number:
        if isinstance(self.numerator, float) or isinstance(self.denominator, float):
            return self.numerator / self.denominator
        return Fraction(self.numerator, 1) / Fraction(self.denominator, 1)


@dataclass(frozen=True)
class IndexResult:
    """Solver output: the index value and a rule realizing it."""

    value: Number
    rule: StoppingRule | frozenset[int]
    iterations: int
    trace: tuple[tuple[Number, Number], ...] = ()


def check_rule(bandit: TreeBandit, anchor: int, rule: StoppingRule) -> None:
    """Reject rules that stop at or before their anchor, or that could run
    forever (unreachable on sound trees, checked anyway)."""
    if not 0 <= anchor < len(bandit.nodes):
        raise InvalidRuleError(f"anchor {anchor} is not a node")
    if bandit.nodes[anchor].halted:
        raise InvalidRuleError(f"anchor {anchor} is halted; nothing can be decided there")
    if rule.anchor != anchor:
        raise InvalidRuleError(f"rule anchored at {rule.anchor}, expected {anchor}")
    if anchor in rule.stop_set:
        raise InvalidRuleError("a stopping rule must act strictly after its anchor")
    for nid in bandit.ancestors(anchor):
        if nid in rule.stop_set:
            raise InvalidRuleError(f"stop set contains {nid}, an ancestor of the anchor")
    stack = [anchor]
    while stack:
        nid = stack.pop()
        node = bandit.nodes[nid]
        if node.halted or (nid != anchor and nid in rule.stop_set):
            continue
        if not node.edges:
            raise InvalidRuleError(f"node {nid} leaves the rule uncovered: no halt, no stop")
        for e in node.edges:
            stack.append(e.to)


def block_value(bandit: TreeBandit, anchor: int, rule: StoppingRule) -> BlockValue:
    """Expected reward movement and halting probability of one rule.

    The numerator is E[reward at (halt ^ stop) - anchor reward], the
    denominator is the probability that the bandit halts no later than the
    rule stops; both are conditional on sitting at the anchor.
    """
    check_rule(bandit, anchor, rule)
    base = bandit.nodes[anchor].reward
    num: Number = 0
    den: Number = 0

    def walk(nid: int, weight: Number) -> None:
        nonlocal num, den
        for e in bandit.nodes[nid].edges:
            w = weight * e.p
            child = bandit.nodes[e.to]
            if e.halting:
                num += w * (child.reward - base)
                den += w
            elif e.to in rule.stop_set:
                num += w * (child.reward - base)
            else:
                walk(e.to, w)

    walk(anchor, 1)
    return BlockValue(numerator=num, denominator=den)


def _choices_below(bandit: TreeBandit, nid: int) -> list[frozenset[int]]:
    # every way to place stops at/below a live node: stop here, or continue
    # and decide independently inside each live child subtree
    parts = [_choices_below(bandit, e.to) for e in bandit.continuation_edges(nid)]
    if parts:
        cont = [frozenset().union(*combo) for combo in itertools.product(*parts)]
    else:
        cont = [frozenset()]
    return [frozenset((nid,))] + cont


def rule_count(bandit: TreeBandit, anchor: int) -> int:
    """Number of distinct stopping rules below an anchor."""

    def f(nid: int) -> int:
        return 1 + prod(f(e.to) for e in bandit.continuation_edges(nid))

    return prod(f(e.to) for e in bandit.continuation_edges(anchor))


def enumerate_stopping_rules(
    bandit: TreeBandit, anchor: int, *, cap: int = DEFAULT_RULE_CAP
) -> list[StoppingRule]:
    if bandit.nodes[anchor].halted:
        raise InvalidRuleError(f"anchor {anchor} is halted")
    n = rule_count(bandit, anchor)
    if n > cap:
        raise ResourceCapError(
            f"{n} stopping rules below anchor {anchor} exceed the cap {cap}; use the parametric solver"
        )
    parts = [_choices_below(bandit, e.to) for e in bandit.continuation_edges(anchor)]
    if not parts:
        return [StoppingRule(anchor, frozenset())]
    return [StoppingRule(anchor, frozenset().union(*combo)) for combo in itertools.product(*parts)]


def solo_index_enumerate(
    bandit: TreeBandit, anchor: int | None = None, *, cap: int = DEFAULT_RULE_CAP
) -> IndexResult:
    """Oracle solver: scan every stopping rule and keep the best ratio."""
    if anchor is None:
        anchor = bandit.root
    best: Number | None = None
    best_rule: StoppingRule | None = None
    count = 0
    for rule in enumerate_stopping_rules(bandit, anchor, cap=cap):
        count += 1
        ratio = block_value(bandit, anchor, rule).ratio
        if best is None or ratio > best:
            best = ratio
            best_rule = rule
    assert best is not None and best_rule is not None
    return IndexResult(value=best, rule=best_rule, iterations=count)


def parametric_stopping_value(
    bandit: TreeBandit, anchor: int, charge: Number
) -> tuple[Number, StoppingRule]:
    """Value of the charge-adjusted stopping problem below an anchor.

    Each path collects (reward at halt-or-stop − anchor reward) and pays
    ``charge`` whenever the halt arrives before the stop.  Returns the value
    together with the earliest optimal rule: stop at the first node where
    continuing is no longer strictly better.
    """
    base = bandit.nodes[anchor].reward

    def best(nid: int) -> tuple[Number, frozenset[int]]:
        node = bandit.nodes[nid]
        stop_val = node.reward - base
        cont: Number = 0
        stops: list[frozenset[int]] = []
        for e in node.edges:
            child = bandit.nodes[e.to]
            if e.halting:
                cont += e.p * (child.reward - base - charge)
            else:
                v, s = best(e.to)
                cont += e.p * v
                stops.append(s)
        if stop_val >= cont:
            return stop_val, frozenset((nid,))
        return cont, frozenset().union(*stops) if stops else frozenset()

    value: Number = 0
    stops: list[frozenset[int]] = []
    for e in bandit.nodes[anchor].edges:
        child = bandit.nodes[e.to]
        if e.halting:
            value += e.p * (child.reward - base - charge)
        else:
            v, s = best(e.to)
            value += e.p * v
            stops.append(s)
    stop_set = frozenset().union(*stops) if stops else frozenset()
    return value, StoppingRule(anchor, stop_set)


def _tree_index_parametric(
    bandit: TreeBandit, anchor: int, zero_tol: float, max_iters: int
) -> IndexResult:
    exact = bandit.is_exact()
    rule = StoppingRule(anchor, frozenset())
    charge = block_value(bandit, anchor, rule).ratio
    trace: list[tuple[Number, Number]] = []
    for it in range(1, max_iters + 1):
        value, candidate = parametric_stopping_value(bandit, anchor, charge)
        trace.append((charge, value))
        if value == 0 or (not exact and abs(value) <= zero_tol):
            return IndexResult(value=charge, rule=candidate, iterations=it, trace=tuple(trace))
        charge = block_value(bandit, anchor, candidate).ratio
    raise SolverError(f"ratio iteration did not settle within {max_iters} rounds")


# ---------------------------------------------------------------------------
# Markov chains

# The Markov solvers share one parameterization of the charge-adjusted
# stopping problem: per-state stop payoff, per-activation running payment,
# and per-state payoff collected when the halt arrives first.  The plain
# index instantiates (stop = reward difference, running = 0, halt = halt
# reward difference); the cumulative-payout index instantiates (stop = 0,
# running = state reward, halt = 0).


@dataclass(frozen=True)
class _MarkovForm:
    stop: tuple[Number, ...]
    running: tuple[Number, ...]
    halt: tuple[Number, ...]


def _markov_form_plain(bandit: MarkovBandit, anchor: int) -> _MarkovForm:
    base = bandit.states[anchor].reward
    return _MarkovForm(
        stop=tuple(s.reward - base for s in bandit.states),
        running=tuple(0 for _ in bandit.states),
        halt=tuple(s.halt_reward - base for s in bandit.states),
    )


def _markov_form_cumulative(bandit: MarkovBandit) -> _MarkovForm:
    return _MarkovForm(
        stop=tuple(0 for _ in bandit.states),
        running=tuple(s.reward for s in bandit.states),
        halt=tuple(0 for _ in bandit.states),
    )


def _markov_entered_values(
    bandit: MarkovBandit, form: _MarkovForm, stop_set: frozenset[int], charge: Number | None
) -> list[Number]:
    """Value of each state when entered at time >= 1 under a stationary stop
    set; with ``charge=None`` the pair (numerator, denominator) caller uses
    the charge-free numerator form."""
    n = len(bandit.states)
    live = [x for x in range(n) if x not in stop_set]
    pos = {x: i for i, x in enumerate(live)}
    rows = []
    rhs = []
    for x in live:
        st = bandit.states[x]
        row: list[Number] = [0] * len(live)
        row[pos[x]] = 1
        pay = form.running[x] + st.halt_prob * form.halt[x]
        if charge is not None:
            pay -= st.halt_prob * charge
        survive = 1 - st.halt_prob
        for y, p in enumerate(bandit.transitions[x]):
            if p == 0:
                continue
            if y in stop_set:
                pay += survive * p * form.stop[y]
            else:
                row[pos[y]] -= survive * p
        rows.append(row)
        rhs.append(pay)
    sol = solve_linear(rows, rhs) if live else []
    values: list[Number] = [form.stop[x] for x in range(n)]
    for x in live:
        values[x] = sol[pos[x]]
    return values


def _markov_continue_value(
    bandit: MarkovBandit, form: _MarkovForm, values: list[Number], x: int, charge: Number
) -> Number:
    st = bandit.states[x]
    out = form.running[x] + st.halt_prob * (form.halt[x] - charge)
    survive = 1 - st.halt_prob
    for y, p in enumerate(bandit.transitions[x]):
        if p != 0:
            out += survive * p * values[y]
    return out


def _markov_stopping_value(
    bandit: MarkovBandit, form: _MarkovForm, anchor: int, charge: Number, max_iters: int
) -> tuple[Number, frozenset[int]]:
    """Charge-adjusted stopping value by policy iteration over stop sets.

    Each candidate set is evaluated exactly by a linear solve; the
    improvement step stops wherever continuing is not strictly better, so
    ties resolve toward the earliest rule.  Evaluation is exact, hence the
    fixed point satisfies its optimality equation with zero residual.
    """
    stop_set: frozenset[int] = frozenset()
    for _ in range(max_iters):
        values = _markov_entered_values(bandit, form, stop_set, charge)
        improved = frozenset(
            x
            for x in range(len(bandit.states))
            if form.stop[x] >= _markov_continue_value(bandit, form, values, x, charge)
        )
        if improved == stop_set:
            break
        stop_set = improved
    else:
        raise SolverError("stop-set iteration did not settle")
    values = _markov_entered_values(bandit, form, stop_set, charge)
    return _markov_continue_value(bandit, form, values, anchor, charge), stop_set


def _markov_ratio(
    bandit: MarkovBandit, form: _MarkovForm, anchor: int, stop_set: frozenset[int]
) -> BlockValue:
    """Exact ratio achieved by a stationary stop set from the anchor."""
    num_values = _markov_entered_values(bandit, form, stop_set, None)
    den_form = _MarkovForm(
        stop=tuple(0 for _ in bandit.states),
        running=tuple(0 for _ in bandit.states),
        halt=tuple(1 for _ in bandit.states),
    )
    den_values = _markov_entered_values(bandit, den_form, stop_set, None)
    st = bandit.states[anchor]
    survive = 1 - st.halt_prob
    num = form.running[anchor] + st.halt_prob * form.halt[anchor]
    den: Number = st.halt_prob
    for y, p in enumerate(bandit.transitions[anchor]):
        if p == 0:
            continue
        num += survive * p * (form.stop[y] if y in stop_set else num_values[y])
        den += survive * p * (0 if y in stop_set else den_values[y])
    return BlockValue(numerator=num, denominator=den)


def _markov_index_parametric(
    bandit: MarkovBandit,
    form: _MarkovForm,
    anchor: int,
    zero_tol: float,
    max_iters: int,
) -> IndexResult:
    exact = bandit.is_exact()
    stop_set: frozenset[int] = frozenset()
    charge = _markov_ratio(bandit, form, anchor, stop_set).ratio
    trace: list[tuple[Number, Number]] = []
    for it in range(1, max_iters + 1):
        value, candidate = _markov_stopping_value(bandit, form, anchor, charge, max_iters)
        trace.append((charge, value))
        if value == 0 or (not exact and abs(value) <= zero_tol):
            return IndexResult(value=charge, rule=candidate, iterations=it, trace=tuple(trace))
        charge = _markov_ratio(bandit, form, anchor, candidate).ratio
    raise SolverError(f"ratio iteration did not settle within {max_iters} rounds")


def solo_index_parametric(
    bandit: TreeBandit | MarkovBandit,
    anchor: int | None = None,
    *,
    zero_tol: float = ZERO_TOL,
    max_iters: int = DEFAULT_ITER_CAP,
) -> IndexResult:
    """Parametric ratio iteration for the solo-payout index.

    Starting from the never-stop rule, alternate between solving the
    charge-adjusted stopping problem and resetting the charge to the
    maximizing rule's exact ratio.  The charge increases strictly while the
    adjusted value stays positive and can only take finitely many rule
    ratios, so termination needs at most one round per distinct rule.
    """
    if isinstance(bandit, TreeBandit):
        if anchor is None:
            anchor = bandit.root
        if bandit.nodes[anchor].halted:
            raise PreconditionError(f"anchor {anchor} is halted; it has no index")
        return _tree_index_parametric(bandit, anchor, zero_tol, max_iters)
    if isinstance(bandit, MarkovBandit):
        if anchor is None:
            anchor = bandit.initial
        if not 0 <= anchor < len(bandit.states):
            raise PreconditionError(f"anchor state {anchor} out of range")
        return _markov_index_parametric(bandit, _markov_form_plain(bandit, anchor), anchor, zero_tol, max_iters)
    raise PreconditionError(f"no index solver for {type(bandit).__name__}")


def markov_cumulative_index(
    bandit: MarkovBandit,
    anchor: int | None = None,
    *,
    zero_tol: float = ZERO_TOL,
    max_iters: int = DEFAULT_ITER_CAP,
) -> IndexResult:
    """Index of the cumulative payout scheme, solved directly on the chain.

    The per-path prefix sums of a Markov reward process are not a function
    of the state, so the cumulative scheme cannot be rebuilt as a reward
    relabeling of the same chain; instead the ratio problem "expected sum
    of per-activation rewards over probability of halting in time" is
    solved by the same parametric iteration with running payments.
    """
    if anchor is None:
        anchor = bandit.initial
    if not 0 <= anchor < len(bandit.states):
        raise PreconditionError(f"anchor state {anchor} out of range")
    return _markov_index_parametric(bandit, _markov_form_cumulative(bandit), anchor, zero_tol, max_iters)


# ---------------------------------------------------------------------------
# Index blocks


@dataclass(frozen=True)
class IndexBlock:
    level: int
    anchor: int
    value: Number
    rule: StoppingRule
    parent: int | None


@dataclass(frozen=True)
class IndexDecomposition:
    """Partition of every live node into index blocks.

    ``prevailing_index`` maps each live node to the value of its block;
    along every path the sequence of block values never increases, and the
    blocks at level k are anchored exactly where the level-(k-1) earliest
    optimal rules stop.
    """

    bandit: TreeBandit
    blocks: tuple[IndexBlock, ...]
    block_of: Mapping[int, int]
    prevailing_index: Mapping[int, Number]

    def index_times(self, k: int) -> StoppingRule:
        """The k-th block boundary (k >= 1) as a rule anchored at the root;
        paths halting earlier simply never reach it."""
        if k < 1:
            raise PreconditionError("block boundaries are indexed from 1")
        stops = [b.rule.stop_set for b in self.blocks if b.level == k - 1]
        return StoppingRule(self.bandit.root, frozenset().union(*stops) if stops else frozenset())

    @property
    def depth(self) -> int:
        return 1 + max((b.level for b in self.blocks), default=0)


def equivalent_rewards(dec: IndexDecomposition) -> TreeBandit:
    """Relabel each live node with its prevailing index.

    The result is the non-increasing reward process that is block-for-block
    equivalent to the original; halted nodes inherit the value of the block
    the halt interrupted (their parent's), keeping the model valid — payout
    schemes that read pre-halt rewards never look at those labels.
    """
    from dataclasses import replace

    bandit = dec.bandit

    def label(nid: int) -> Number:
        if bandit.nodes[nid].halted:
            parent = bandit.parent(nid)
            assert parent is not None
            return dec.prevailing_index[parent]
        return dec.prevailing_index[nid]

    nodes = tuple(replace(n, reward=label(nid)) for nid, n in enumerate(bandit.nodes))
    return TreeBandit(nodes=nodes, root=bandit.root)


def index_decomposition(
    bandit: TreeBandit,
    *,
    zero_tol: float = ZERO_TOL,
    max_iters: int = DEFAULT_ITER_CAP,
) -> IndexDecomposition:
    """Iterate the earliest optimal rule from the root to carve out blocks."""
    blocks: list[IndexBlock] = []
    block_of: dict[int, int] = {}
    prevailing: dict[int, Number] = {}
    queue: list[tuple[int, int, int | None]] = [(bandit.root, 0, None)]
    while queue:
        anchor, level, parent = queue.pop(0)
        res = solo_index_parametric(bandit, anchor, zero_tol=zero_tol, max_iters=max_iters)
        assert isinstance(res.rule, StoppingRule)
        bi = len(blocks)
        blocks.append(IndexBlock(level=level, anchor=anchor, value=res.value, rule=res.rule, parent=parent))
        stack = [anchor]
        while stack:
            nid = stack.pop()
            block_of[nid] = bi
            prevailing[nid] = res.value
            for e in bandit.continuation_edges(nid):
                if e.to not in res.rule.stop_set:
                    stack.append(e.to)
        for stop in sorted(res.rule.stop_set):
            if not bandit.nodes[stop].halted:
                queue.append((stop, level + 1, bi))
    return IndexDecomposition(
        bandit=bandit,
        blocks=tuple(blocks),
        block_of=block_of,
        prevailing_index=prevailing,
    )
