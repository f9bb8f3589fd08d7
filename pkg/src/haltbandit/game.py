"""The product game: histories, stepping, policies, and evaluation.

A game runs several independent bandits under one controller.  Each round
the controller activates exactly one bandit; the activated bandit advances
along one of its edges (the rest stay frozen) and the first halt ends the
whole game.  Global rounds count from 0, a bandit's local time is the
number of times it has been activated, and the sum of local times always
equals the round number.

Payouts are settled at the halt according to the game's scheme (see
``reductions.PayoutModel``); the cumulative scheme instead pays the chosen
bandit's current reward at every activation, the halting activation
included, and settles nothing extra at the end.  One scheme runs the other
way: the non-halting scheme's value is the bill for the bandits that never
halted, quoted positive, and a controller wants it small — minimize it by
maximizing the sign-flipped collective rewrite from ``reductions``.

Exact evaluation works backward over reachable histories on tree backends
and solves the absorbing-chain linear system on Markov backends, where the
only extra state a supported policy may carry is the round number modulo a
declared period.  Sampling uses a counter-based generator (Philox, 64-bit)
keyed by the seed, so a (seed, game, policy) triple reproduces its stream
bit for bit on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import PreconditionError, ResourceCapError, SolverError
from .indices import index_decomposition
from .jsonio import Number
from .linear import residual, solve_linear
from .models import AnyBandit, MarkovBandit, ProfitBandit, TreeBandit, dynamics_of
from .reductions import PayoutModel, model_index, reduced_bandit

RESIDUAL_TOL = 1e-12
DEFAULT_HISTORY_CAP = 10**7
_EPISODE_ROUND_CAP = 10**6


@dataclass(frozen=True)
class GlobalHistory:
    """Product position of all bandits; ``halter`` is set once the game ends."""

    nodes: tuple[int, ...]
    halter: int | None = None


@dataclass(frozen=True)
class GameInstance:
    bandits: tuple[AnyBandit, ...]
    model: PayoutModel = PayoutModel.CP

    def __post_init__(self) -> None:
        bandits = tuple(self.bandits)
        object.__setattr__(self, "bandits", bandits)
        model = PayoutModel(self.model)
        object.__setattr__(self, "model", model)
        if not bandits:
            raise PreconditionError("a game needs at least one bandit")
        kinds = {type(b) for b in bandits}
        if len(kinds) != 1:
            raise PreconditionError("all bandits in a game must share one backend")
        if model is PayoutModel.TP and not isinstance(bandits[0], ProfitBandit):
            raise PreconditionError("the terminal-profit scheme needs bandits with costs")
        if model is not PayoutModel.TP and isinstance(bandits[0], ProfitBandit):
            raise PreconditionError("bandits with costs are only played under the terminal-profit scheme")

    @property
    def n(self) -> int:
        return len(self.bandits)

    @property
    def backend(self) -> str:
        return "markov" if isinstance(dynamics_of(self.bandits[0]), MarkovBandit) else "tree"

    def dynamics(self, i: int) -> TreeBandit | MarkovBandit:
        return dynamics_of(self.bandits[i])

    def initial_history(self) -> GlobalHistory:
        starts = []
        for i in range(self.n):
            dyn = self.dynamics(i)
            starts.append(dyn.root if isinstance(dyn, TreeBandit) else dyn.initial)
        return GlobalHistory(nodes=tuple(starts))


def current_reward(game: GameInstance, i: int, position: int) -> Number:
    """The bandit's live reward at its current position (pre-activation)."""
    dyn = game.dynamics(i)
    if isinstance(dyn, TreeBandit):
        return dyn.nodes[position].reward
    return dyn.states[position].reward


def _final_reward(game: GameInstance, i: int, position: int) -> Number:
    """The halter's reward at the halt (tree: the halted node's label)."""
    dyn = game.dynamics(i)
    if isinstance(dyn, TreeBandit):
        return dyn.nodes[position].reward
    return dyn.states[position].halt_reward


def local_times(game: GameInstance, history: GlobalHistory) -> tuple[int, ...]:
    """Per-bandit activation counts; recoverable from positions on trees only."""
    if game.backend != "tree":
        raise PreconditionError("local times are not a function of the state on chains")
    out = []
    for i, nid in enumerate(history.nodes):
        dyn = game.dynamics(i)
        assert isinstance(dyn, TreeBandit)
        out.append(dyn.nodes[nid].depth)
    return tuple(out)


def round_of(game: GameInstance, history: GlobalHistory) -> int:
    return sum(local_times(game, history))


def step(
    game: GameInstance, history: GlobalHistory, choice: int
) -> tuple[tuple[Number, GlobalHistory], ...]:
    """Outcome distribution of activating one bandit: (probability, next)."""
    if history.halter is not None:
        raise PreconditionError("the game is over; nothing can be activated")
    if not 0 <= choice < game.n:
        raise PreconditionError(f"no bandit {choice} in a {game.n}-bandit game")
    dyn = game.dynamics(choice)
    pos = history.nodes[choice]
    out: list[tuple[Number, GlobalHistory]] = []
    if isinstance(dyn, TreeBandit):
        node = dyn.nodes[pos]
        if node.halted:
            raise PreconditionError(f"bandit {choice} is already halted")
        for e in node.edges:
            nxt = history.nodes[:choice] + (e.to,) + history.nodes[choice + 1 :]
            out.append((e.p, GlobalHistory(nxt, halter=choice if e.halting else None)))
    else:
        st = dyn.states[pos]
        if st.halt_prob != 0:
            out.append((st.halt_prob, GlobalHistory(history.nodes, halter=choice)))
        survive = 1 - st.halt_prob
        for y, p in enumerate(dyn.transitions[pos]):
            if p == 0:
                continue
            nxt = history.nodes[:choice] + (y,) + history.nodes[choice + 1 :]
            out.append((survive * p, GlobalHistory(nxt)))
    return tuple(out)


def immediate_payment(game: GameInstance, history: GlobalHistory, choice: int) -> Number:
    """What the activation itself pays: the cumulative scheme charges the
    chosen bandit's pre-activation reward, every other scheme pays nothing
    until the halt."""
    if game.model is PayoutModel.CCP:
        return current_reward(game, choice, history.nodes[choice])
    return 0


def terminal_payout(
    game: GameInstance, pre: GlobalHistory, choice: int, post: GlobalHistory
) -> Number:
    """Settlement when activating ``choice`` from ``pre`` produced the halt
    ``post``.  Frozen bandits are read at their pre-halt positions."""
    model = game.model
    if model is PayoutModel.CCP:
        return 0  # every activation already paid
    if model is PayoutModel.PSP:
        return current_reward(game, choice, pre.nodes[choice])
    if model is PayoutModel.SP:
        return _final_reward(game, choice, post.nodes[choice])
    if model is PayoutModel.CP:
        total = _final_reward(game, choice, post.nodes[choice])
        for j in range(game.n):
            if j != choice:
                total += current_reward(game, j, pre.nodes[j])
        return total
    if model is PayoutModel.NH:
        # the halting cost: a positive total the controller wants small;
        # its negation is the collective payout of the sign-flipped rewrite
        total: Number = 0
        for j in range(game.n):
            if j != choice:
                total += current_reward(game, j, pre.nodes[j])
        return total
    if model is PayoutModel.TP:
        total = _final_reward(game, choice, post.nodes[choice])
        for j in range(game.n):
            if j != choice:
                bandit = game.bandits[j]
                assert isinstance(bandit, ProfitBandit)
                total -= bandit.cost(pre.nodes[j])
        return total
    raise PreconditionError(f"unknown payout model {model!r}")


# ---------------------------------------------------------------------------
# Policies


class Policy:
    """Deterministic controller: a function of the current product position.

    ``period`` declares the only round dependence allowed on Markov
    backends — the engine hands ``choose`` the round number modulo it.
    """

    period: int = 1

    def choose(self, game: GameInstance, history: GlobalHistory, round_: int) -> int:
        raise NotImplementedError

    def describe(self) -> str:
        return type(self).__name__


class CyclicPolicy(Policy):
    def __init__(self, order: Sequence[int]):
        order = tuple(order)
        if not order:
            raise PreconditionError("a cyclic policy needs a non-empty order")
        self.order = order
        self.period = len(order)

    def choose(self, game: GameInstance, history: GlobalHistory, round_: int) -> int:
        return self.order[round_ % len(self.order)]

    def describe(self) -> str:
        return "cyclic:" + ",".join(str(i) for i in self.order)


class GreedyRewardPolicy(Policy):
    """Activate the bandit with the largest current reward, lowest id on ties."""

    def choose(self, game: GameInstance, history: GlobalHistory, round_: int) -> int:
        best = 0
        best_val = current_reward(game, 0, history.nodes[0])
        for i in range(1, game.n):
            v = current_reward(game, i, history.nodes[i])
            if v > best_val:
                best, best_val = i, v
        return best

    def describe(self) -> str:
        return "greedy"


class IndexPolicy(Policy):
    """Activate the bandit with the largest current index, lowest id on ties.

    Recomputes (with caching) the scheme-specific index at every round.
    The penultimate scheme has no index; ask for the greedy policy there.
    """

    def __init__(self, model: PayoutModel | None = None):
        self.model = None if model is None else PayoutModel(model)
        self._cache: dict[tuple[AnyBandit, int], Number] = {}

    def _index(self, model: PayoutModel, bandit: AnyBandit, position: int) -> Number:
        key = (bandit, position)
        if key not in self._cache:
            self._cache[key] = model_index(model, bandit, position)
        return self._cache[key]

    def choose(self, game: GameInstance, history: GlobalHistory, round_: int) -> int:
        model = self.model if self.model is not None else game.model
        if model is PayoutModel.PSP:
            raise PreconditionError(
                "the penultimate scheme has no activation index; use the greedy policy"
            )
        best = 0
        best_val = self._index(model, game.bandits[0], history.nodes[0])
        for i in range(1, game.n):
            v = self._index(model, game.bandits[i], history.nodes[i])
            if v > best_val:
                best, best_val = i, v
        return best

    def describe(self) -> str:
        return "index"


class BlockCommitmentIndexPolicy(Policy):
    """Pick the bandit with the best prevailing index and play it through its
    whole block before comparing again.

    Under its own play at most one bandit can sit strictly inside a block;
    the policy is still total on every history (lowest mid-block id first),
    so it can be compared state-by-state against other policies.  Tree
    backends only: blocks come from the index decomposition.
    """

    def __init__(self, model: PayoutModel | None = None):
        self.model = None if model is None else PayoutModel(model)
        self._decs: dict[AnyBandit, object] = {}

    def _decomposition(self, model: PayoutModel, bandit: AnyBandit):
        if bandit not in self._decs:
            reduced = reduced_bandit(model, bandit)
            if not isinstance(reduced, TreeBandit):
                raise PreconditionError("block commitment needs a tree backend")
            self._decs[bandit] = index_decomposition(reduced)
        return self._decs[bandit]

    def choose(self, game: GameInstance, history: GlobalHistory, round_: int) -> int:
        model = self.model if self.model is not None else game.model
        if model is PayoutModel.PSP:
            raise PreconditionError(
                "the penultimate scheme has no activation index; use the greedy policy"
            )
        decs = [self._decomposition(model, game.bandits[i]) for i in range(game.n)]
        for i in range(game.n):
            dec = decs[i]
            nid = history.nodes[i]
            block = dec.blocks[dec.block_of[nid]]
            if block.anchor != nid:
                return i  # committed mid-block
        best = 0
        best_val = decs[0].prevailing_index[history.nodes[0]]
        for i in range(1, game.n):
            v = decs[i].prevailing_index[history.nodes[i]]
            if v > best_val:
                best, best_val = i, v
        return best

    def describe(self) -> str:
        return "index-block"


class TablePolicy(Policy):
    """Explicit history-to-bandit map; unlisted histories fall back to a default."""

    def __init__(self, mapping: Mapping[GlobalHistory, int], default: int = 0):
        self.mapping = dict(mapping)
        self.default = default

    def choose(self, game: GameInstance, history: GlobalHistory, round_: int) -> int:
        return self.mapping.get(history, self.default)

    def describe(self) -> str:
        return "table"


# ---------------------------------------------------------------------------
# Exact evaluation


def evaluate_exact(
    game: GameInstance, policy: Policy, *, history_cap: int = DEFAULT_HISTORY_CAP
) -> Number:
    """Expected payout of a deterministic policy.

    Tree backends recurse over reachable histories with memoization.  Markov
    backends index the unknowns by (product state, round mod period) and
    solve the absorbing-chain linear system exactly; the solution is
    rejected if its residual exceeds 1e-12 (it is zero in rational mode).
    """
    if game.backend == "tree":
        return _evaluate_tree(game, policy, history_cap)
    return _evaluate_markov(game, policy, history_cap)


def _evaluate_tree(game: GameInstance, policy: Policy, cap: int) -> Number:
    memo: dict[GlobalHistory, Number] = {}
    visited = 0

    def value(h: GlobalHistory) -> Number:
        nonlocal visited
        if h in memo:
            return memo[h]
        visited += 1
        if visited > cap:
            raise ResourceCapError(f"more than {cap} reachable histories")
        i = policy.choose(game, h, round_of(game, h))
        v = immediate_payment(game, h, i)
        for p, nxt in step(game, h, i):
            if nxt.halter is not None:
                v = v + p * terminal_payout(game, h, i, nxt)
            else:
                v = v + p * value(nxt)
        memo[h] = v
        return v

    return value(game.initial_history())


def _evaluate_markov(game: GameInstance, policy: Policy, cap: int) -> Number:
    period = max(1, int(getattr(policy, "period", 1)))
    start = (game.initial_history().nodes, 0)
    order: list[tuple[tuple[int, ...], int]] = []
    seen = {start}
    queue = [start]
    moves: dict[tuple[tuple[int, ...], int], tuple[int, Number, list, list]] = {}
    while queue:
        key = queue.pop(0)
        if len(seen) > cap:
            raise ResourceCapError(f"more than {cap} reachable product states")
        order.append(key)
        nodes, phase = key
        h = GlobalHistory(nodes)
        i = policy.choose(game, h, phase)
        if not 0 <= i < game.n:
            raise PreconditionError(f"policy chose bandit {i}, not in the game")
        pay = immediate_payment(game, h, i)
        cont: list[tuple[Number, tuple[tuple[int, ...], int]]] = []
        for p, nxt in step(game, h, i):
            if nxt.halter is not None:
                pay = pay + p * terminal_payout(game, h, i, nxt)
            else:
                nkey = (nxt.nodes, (phase + 1) % period)
                cont.append((p, nkey))
                if nkey not in seen:
                    seen.add(nkey)
                    queue.append(nkey)
        moves[key] = (i, pay, cont, [])
    pos = {key: k for k, key in enumerate(order)}
    m = len(order)
    zero: Number = 0
    rows = [[zero] * m for _ in range(m)]
    rhs: list[Number] = []
    for k, key in enumerate(order):
        _, pay, cont, _ = moves[key]
        rows[k][k] = 1
        for p, nkey in cont:
            rows[k][pos[nkey]] -= p
        rhs.append(pay)
    sol = solve_linear(rows, rhs)
    res = residual(rows, rhs, sol)
    if isinstance(res, float) and res > RESIDUAL_TOL:
        raise SolverError(f"linear system residual {res} above {RESIDUAL_TOL}")
    return sol[pos[start]]


# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True)
class SimulationResult:
    mean: float
    stderr: float
    n_samples: int
    seed: int

    def to_obj(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


def _outcome_tables(game: GameInstance) -> list[list[list[tuple[float, int, bool]]]]:
    """Per (bandit, position): cumulative-probability outcome rows
    (cum, next position, halting), in the same order ``step`` emits them."""
    tables: list[list[list[tuple[float, int, bool]]]] = []
    for i in range(game.n):
        dyn = game.dynamics(i)
        per: list[list[tuple[float, int, bool]]] = []
        if isinstance(dyn, TreeBandit):
            for node in dyn.nodes:
                acc = 0.0
                rows = []
                for e in node.edges:
                    acc += float(e.p)
                    rows.append((acc, e.to, e.halting))
                per.append(rows)
        else:
            for x, st in enumerate(dyn.states):
                acc = 0.0
                rows = []
                if st.halt_prob != 0:
                    acc += float(st.halt_prob)
                    rows.append((acc, x, True))
                survive = float(1 - st.halt_prob)
                for y, p in enumerate(dyn.transitions[x]):
                    if p != 0:
                        acc += survive * float(p)
                        rows.append((acc, y, False))
                per.append(rows)
        tables.append(per)
    return tables


def run_policy_sampled(
    game: GameInstance, policy: Policy, seed: int, n_samples: int
) -> SimulationResult:
    """Monte Carlo estimate of a policy's value.

    Draws one uniform per activation from a Philox counter-based generator
    keyed by the seed; identical (game, policy, seed, n_samples) calls
    reproduce the stream, and therefore the estimate, bit for bit.
    """
    if n_samples < 1:
        raise PreconditionError("need at least one sample")
    rng = np.random.Generator(np.random.Philox(key=seed))
    tables = _outcome_tables(game)
    start = game.initial_history().nodes
    ccp = game.model is PayoutModel.CCP
    totals = np.empty(n_samples, dtype=float)
    for k in range(n_samples):
        nodes = start
        total = 0.0
        for round_ in range(_EPISODE_ROUND_CAP):
            h = GlobalHistory(nodes)
            i = policy.choose(game, h, round_)
            if ccp:
                total += float(current_reward(game, i, nodes[i]))
            rows = tables[i][nodes[i]]
            u = rng.random()
            to, halting = rows[-1][1], rows[-1][2]
            for cum, t, flag in rows:
                if u < cum:
                    to, halting = t, flag
                    break
            nxt = nodes[:i] + (to,) + nodes[i + 1 :]
            if halting:
                post = GlobalHistory(nxt, halter=i)
                total += float(terminal_payout(game, h, i, post))
                break
            nodes = nxt
        else:
            raise SolverError("an episode exceeded the round cap; is the model valid?")
        totals[k] = total
    mean = float(np.mean(totals))
    stderr = 0.0 if n_samples == 1 else float(np.std(totals, ddof=1) / math.sqrt(n_samples))
    return SimulationResult(mean=mean, stderr=stderr, n_samples=n_samples, seed=seed)


# ---------------------------------------------------------------------------
# Path traces


@dataclass(frozen=True)
class TraceRow:
    round: int
    local_times: tuple[int, ...]
    choice: int
    reward: Number
    survival_probability: Number


@dataclass(frozen=True)
class Trace:
    """Bookkeeping of one concrete play-through.

    ``rows[s]`` describes round ``s``: local times before the activation,
    the activated bandit, its pre-activation reward, and the probability of
    everything realized so far (this round's outcome included).  When the
    last outcome is a halt, ``halt_round`` is the total activation count.
    """

    rows: tuple[TraceRow, ...]
    halt_round: int | None
    halter: int | None

    def activation_rounds(self, i: int) -> tuple[int, ...]:
        """Rounds at which bandit ``i`` was activated: entry t is the round
        advancing its local time from t to t+1."""
        return tuple(r.round for r in self.rows if r.choice == i)


Outcome = str | tuple[str, int]


def trace_times(
    game: GameInstance, policy: Policy, outcomes: Sequence[Outcome]
) -> Trace:
    """Replay explicit outcomes under a policy and tabulate the bookkeeping.

    Each outcome is ``"survive"`` or ``"halt"``, optionally ``(kind, id)``
    naming the landing node/state when several edges of that kind exist;
    a bare descriptor with several matches is rejected as ambiguous.
    """
    nodes = game.initial_history().nodes
    times = [0] * game.n
    rows: list[TraceRow] = []
    survival: Number = 1
    halter: int | None = None
    for s, outcome in enumerate(outcomes):
        if halter is not None:
            raise PreconditionError("outcomes continue past the halt")
        kind, target = (outcome, None) if isinstance(outcome, str) else outcome
        if kind not in ("survive", "halt"):
            raise PreconditionError(f"unknown outcome {outcome!r}")
        h = GlobalHistory(nodes)
        i = policy.choose(game, h, s)
        matches = [
            (p, nxt)
            for p, nxt in step(game, h, i)
            if (nxt.halter is not None) == (kind == "halt")
            and (target is None or nxt.nodes[i] == target)
        ]
        if not matches:
            raise PreconditionError(f"round {s}: no {outcome!r} outcome for bandit {i}")
        if len(matches) > 1:
            raise PreconditionError(
                f"round {s}: {outcome!r} is ambiguous for bandit {i}; name the landing id"
            )
        p, nxt = matches[0]
        survival = survival * p
        rows.append(
            TraceRow(
                round=s,
                local_times=tuple(times),
                choice=i,
                reward=current_reward(game, i, nodes[i]),
                survival_probability=survival,
            )
        )
        times[i] += 1
        nodes = nxt.nodes
        halter = nxt.halter
    return Trace(
        rows=tuple(rows),
        halt_round=len(rows) if halter is not None else None,
        halter=halter,
    )
