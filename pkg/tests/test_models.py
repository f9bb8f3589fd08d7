"""Model representations: validation, normalization, builders, serialization."""

from fractions import Fraction

import pytest

from haltbandit import (
    GameInstance,
    MarkovBandit,
    MarkovState,
    PayoutModel,
    PreconditionError,
    TreeBandit,
    TreeEdge,
    TreeNode,
    dumps_model,
    enumerate_policies,
    evaluate_exact,
    geometric_markov,
    loads_model,
    normalize,
    to_float,
    unroll_markov,
    validate,
)

from helpers import HALF, ONE, pair_game, path_bandit, ramp_bandit, sure_bandit


def test_ramp_bandit_validates_cleanly():
    report = validate(ramp_bandit())
    assert report.passed
    assert report.violations == ()


def test_markov_constant_halt_validates():
    chain = geometric_markov(1, HALF)
    assert validate(chain).passed


def test_zero_halting_mass_is_flagged_at_the_node():
    nodes = (
        TreeNode(depth=0, reward=0, halted=False, edges=(TreeEdge(to=1, p=ONE, halting=False),)),
        TreeNode(depth=1, reward=1, halted=False, edges=(TreeEdge(to=2, p=ONE, halting=True),)),
        TreeNode(depth=2, reward=1, halted=True, edges=()),
    )
    report = validate(TreeBandit(nodes=nodes, root=0))
    assert not report.passed
    assert "zero-halting-mass" in report.codes()
    offender = next(v for v in report.violations if v.code == "zero-halting-mass")
    assert offender.where == "node 0"


def test_unhalted_leaf_is_flagged():
    nodes = (
        TreeNode(depth=0, reward=0, halted=False, edges=(TreeEdge(to=1, p=ONE, halting=False),)),
        TreeNode(depth=1, reward=2, halted=False, edges=()),
    )
    codes = validate(TreeBandit(nodes=nodes, root=0)).codes()
    assert "unhalted-leaf" in codes
    assert "zero-halting-mass" in codes


def test_bad_probability_sum_is_flagged():
    nodes = (
        TreeNode(depth=0, reward=0, halted=False, edges=(TreeEdge(to=1, p=Fraction(9, 10), halting=True),)),
        TreeNode(depth=1, reward=1, halted=True, edges=()),
    )
    assert "edge-probability-sum" in validate(TreeBandit(nodes=nodes, root=0)).codes()


def test_markov_violations():
    bad_halt = MarkovBandit(
        states=(MarkovState(reward=1, halt_prob=0, halt_reward=0),),
        transitions=((ONE,),),
        initial=0,
    )
    assert "zero-halting-mass" in validate(bad_halt).codes()
    bad_row = MarkovBandit(
        states=(MarkovState(reward=1, halt_prob=HALF, halt_reward=0),),
        transitions=((HALF,),),
        initial=0,
    )
    assert "row-sum" in validate(bad_row).codes()


def test_depth_and_branching_limits_are_configurable():
    tree = ramp_bandit()
    assert "depth-limit" in validate(tree, max_depth=1).codes()
    assert validate(tree, max_depth=None, max_branching=None).passed


def test_normalize_shifts_every_reward_by_the_root_value():
    shifted = path_bandit((3, 5, 2), (HALF, ONE))
    normed = normalize(shifted)
    assert [n.reward for n in normed.nodes] == [0, 2, 2, -1]
    assert normed.nodes[normed.root].reward == 0


def test_normalize_is_identity_at_zero_root_and_idempotent():
    tree = ramp_bandit()
    assert normalize(tree) == tree
    shifted = path_bandit((3, 5, 2), (HALF, ONE))
    assert normalize(normalize(shifted)) == normalize(shifted)


def test_normalize_shifts_collective_values_by_the_root_sum():
    # raise bandit 0 by 3 and bandit 1 by 2: every policy value moves by 5
    raised = GameInstance(
        bandits=(path_bandit((3, 7, 13), (HALF, ONE)), path_bandit((2, 7), (ONE,))),
        model=PayoutModel.CP,
    )
    base = pair_game()
    for policy in enumerate_policies(base):
        assert evaluate_exact(raised, policy) == evaluate_exact(base, policy) + 5


def test_geometric_markov_single_state():
    chain = geometric_markov(1, HALF)
    assert len(chain.states) == 1
    assert chain.states[0].reward == 1
    assert chain.states[0].halt_prob == HALF
    assert chain.transitions == ((1,),)


def test_geometric_markov_cycle():
    chain = geometric_markov((1, 2), Fraction(9, 10))
    assert [s.reward for s in chain.states] == [1, 2]
    assert all(s.halt_prob == Fraction(1, 10) for s in chain.states)
    assert chain.transitions == ((0, 1), (1, 0))
    assert validate(chain).passed


def test_geometric_markov_rejects_degenerate_survival():
    with pytest.raises(PreconditionError):
        geometric_markov(1, 1)
    with pytest.raises(PreconditionError):
        geometric_markov(1, 0)


def test_unroll_markov_is_valid_and_halts_at_the_cut():
    tree = unroll_markov(geometric_markov(1, HALF), max_depth=6)
    assert validate(tree, max_depth=None).passed
    deepest = max(n.depth for n in tree.nodes)
    assert deepest == 6
    for n in tree.nodes:
        if not n.halted and n.depth == deepest - 1:
            assert len(n.edges) == 1 and n.edges[0].halting


def test_model_document_round_trip_is_byte_identical():
    bandits = [ramp_bandit(), sure_bandit(5)]
    text = dumps_model(bandits)
    loaded = loads_model(text, rational=True)
    assert loaded == bandits
    assert dumps_model(loaded) == text


def test_parser_accepts_decimal_strings_and_floats():
    text = dumps_model([ramp_bandit()]).replace('"1/2"', "0.5")
    exact = loads_model(text, rational=True)[0]
    assert exact.nodes[0].edges[0].p == HALF
    inexact = loads_model(dumps_model([ramp_bandit()]))[0]
    assert inexact.nodes[0].edges[0].p == 0.5


def test_to_float_converts_probabilities_and_rewards():
    tree = to_float(ramp_bandit())
    assert isinstance(tree.nodes[0].edges[0].p, float)
    assert evaluate_exact(
        GameInstance(bandits=(tree,), model=PayoutModel.CP), enumerate_policies(
            GameInstance(bandits=(tree,), model=PayoutModel.CP)
        )[0]
    ) == pytest.approx(7.0)
