"""Core MDP representation, codec, sampling and serialization tests."""

import itertools
import math

import numpy as np
import pytest

from teamq.mdp import (
    TeamMdp,
    decode_joint,
    empirical_return,
    encode_joint,
    expected_reward,
    load_mdp_json,
    num_joint_actions,
    random_team_mdp,
    rng_stream,
    sample_step,
    save_mdp_json,
)


# ---------------------------------------------------------------------------
# Joint-action codec.
# ---------------------------------------------------------------------------

def test_encode_zero_and_max():
    assert encode_joint([0, 0], [2, 3]) == 0
    assert encode_joint([1, 2], [2, 3]) == 5  # product - 1


def test_encode_matches_enumeration_order():
    # Oracle: enumerate all tuples in declared order (agent 1 most significant).
    counts = [2, 2, 2]
    order = list(itertools.product(range(2), range(2), range(2)))
    assert order.index((1, 0, 1)) == 5
    assert encode_joint([1, 0, 1], counts) == 5
    for flat, tup in enumerate(order):
        assert encode_joint(tup, counts) == flat


@pytest.mark.parametrize("counts", [(2,), (3, 4), (2, 3, 5), (2, 3, 4, 5), (5, 5, 5, 5)])
def test_roundtrip_full_joint_space(counts):
    for flat in range(num_joint_actions(counts)):
        assert encode_joint(decode_joint(flat, counts), counts) == flat


def test_encode_rejects_out_of_range():
    with pytest.raises(ValueError):
        encode_joint([2, 0], [2, 3])
    with pytest.raises(ValueError):
        encode_joint([0, -1], [2, 3])
    with pytest.raises(ValueError):
        decode_joint(6, [2, 3])


# ---------------------------------------------------------------------------
# Construction invariants.
# ---------------------------------------------------------------------------

def _chain_mdp(noise=0.0, gamma=0.9):
    # Two-state single-agent chain: action 0 moves to the absorbing state with
    # reward 2, action 1 self-loops with reward 0.
    transition = np.zeros((2, 2, 2))
    transition[0, 0, 1] = 1.0
    transition[0, 1, 0] = 1.0
    transition[1, :, 1] = 1.0
    reward_mean = np.zeros((2, 2, 2))
    reward_mean[0, 0, 1] = 2.0
    reward_std = np.zeros((2, 2, 2))
    reward_std[0, 0, 1] = noise
    return TeamMdp(
        action_counts=(2,),
        transition=transition,
        reward_mean=reward_mean,
        reward_std=reward_std,
        discount=gamma,
        initial_dist=np.array([1.0, 0.0]),
        terminal=np.array([False, True]),
    )


def test_rejects_nonstochastic_kernel():
    bad = _chain_mdp()
    kernel = bad.transition.copy()
    kernel[0, 0, 1] = 0.5
    with pytest.raises(ValueError, match="sums to"):
        TeamMdp((2,), kernel, bad.reward_mean, bad.reward_std, 0.9,
                bad.initial_dist, bad.terminal)


def test_rejects_bad_initial_dist():
    good = _chain_mdp()
    with pytest.raises(ValueError, match="probability vector"):
        TeamMdp((2,), good.transition, good.reward_mean, good.reward_std, 0.9,
                np.array([0.6, 0.6]), good.terminal)


def test_rejects_nonabsorbing_terminal():
    good = _chain_mdp()
    with pytest.raises(ValueError, match="absorbing"):
        TeamMdp((2,), good.transition, good.reward_mean, good.reward_std, 0.9,
                good.initial_dist, np.array([True, False]))


def test_rejects_rewarding_terminal():
    good = _chain_mdp()
    rm = good.reward_mean.copy()
    rm[1, 0, 1] = 1.0
    with pytest.raises(ValueError, match="zero reward"):
        TeamMdp((2,), good.transition, rm, good.reward_std, 0.9,
                good.initial_dist, good.terminal)


def test_rejects_bad_discount():
    good = _chain_mdp()
    with pytest.raises(ValueError, match="discount"):
        TeamMdp((2,), good.transition, good.reward_mean, good.reward_std, 1.0,
                good.initial_dist, good.terminal)


# ---------------------------------------------------------------------------
# Expected reward and sampling.
# ---------------------------------------------------------------------------

def test_expected_reward_single_support():
    mdp = _chain_mdp()
    assert expected_reward(mdp, 0, [0]) == 2.0


def test_expected_reward_hand_sum():
    # P = [0.5, 0.5] over two next states with rewards -30 and +10.
    transition = np.zeros((3, 1, 3))
    transition[0, 0] = [0.0, 0.5, 0.5]
    transition[1, 0, 1] = 1.0
    transition[2, 0, 2] = 1.0
    reward_mean = np.zeros((3, 1, 3))
    reward_mean[0, 0, 1] = -30.0
    reward_mean[0, 0, 2] = 10.0
    mdp = TeamMdp((1,), transition, reward_mean, np.zeros((3, 1, 3)), 0.9,
                  np.array([1.0, 0.0, 0.0]), np.array([False, True, True]))
    assert expected_reward(mdp, 0, 0) == pytest.approx(-10.0, abs=1e-12)


def test_expected_reward_terminal_is_zero():
    mdp = _chain_mdp()
    assert expected_reward(mdp, 1, 0) == 0.0


def test_sample_step_deterministic_kernel():
    mdp = _chain_mdp()
    rng = rng_stream(0, "env")
    nxt, reward, done = sample_step(mdp, 0, [0], rng)
    assert (nxt, reward, done) == (1, 2.0, True)


def test_sample_step_rejects_terminal_state():
    mdp = _chain_mdp()
    with pytest.raises(ValueError, match="terminal"):
        sample_step(mdp, 1, [0], rng_stream(0, "env"))


def test_sample_step_gaussian_noise_mean():
    mdp = _chain_mdp(noise=1.0)
    rng = rng_stream(1, "env")
    draws = np.array([sample_step(mdp, 0, [0], rng)[1] for _ in range(100_000)])
    # Monte-Carlo mean of N(2, 1) over 1e5 draws lies within 0.05 of 2.
    assert abs(draws.mean() - 2.0) < 0.05
    assert abs(draws.std() - 1.0) < 0.05


def test_sample_step_frequencies_within_binomial_bounds():
    transition = np.zeros((3, 1, 3))
    transition[0, 0] = [0.1, 0.3, 0.6]
    transition[1, 0, 1] = 1.0
    transition[2, 0, 2] = 1.0
    mdp = TeamMdp((1,), transition, np.zeros((3, 1, 3)), np.zeros((3, 1, 3)), 0.9,
                  np.array([1.0, 0.0, 0.0]), np.array([False, True, True]))
    rng = rng_stream(2, "env")
    n = 100_000
    counts = np.zeros(3)
    for _ in range(n):
        nxt, _, _ = sample_step(mdp, 0, 0, rng)
        counts[nxt] += 1
    for s, p in enumerate([0.1, 0.3, 0.6]):
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(counts[s] - n * p) < 3 * sigma


def test_sample_step_seed_reproducibility():
    mdp = _chain_mdp(noise=1.0)
    seq1 = [sample_step(mdp, 0, 0, rng_stream(7, "env", i)) for i in range(50)]
    seq2 = [sample_step(mdp, 0, 0, rng_stream(7, "env", i)) for i in range(50)]
    assert seq1 == seq2


def test_horizon_done_flag():
    mdp = _chain_mdp()
    mdp.horizon = 3
    rng = rng_stream(0, "env")
    assert sample_step(mdp, 0, 1, rng, step_count=1)[2] is False
    assert sample_step(mdp, 0, 1, rng, step_count=2)[2] is True


# ---------------------------------------------------------------------------
# Returns.
# ---------------------------------------------------------------------------

def test_empirical_return_single_reward():
    assert empirical_return([10.0], 0.37) == 10.0


def test_empirical_return_delayed_reward():
    assert empirical_return([0.0, 0.0, 0.0, 10.0], 0.9) == pytest.approx(7.29, abs=1e-12)


def test_empirical_return_empty():
    assert empirical_return([], 0.9) == 0.0


# ---------------------------------------------------------------------------
# Serialization and streams.
# ---------------------------------------------------------------------------

def test_json_roundtrip_value_exact(tmp_path):
    rng = rng_stream(3, "env")
    mdp = random_team_mdp(rng, num_states=3, action_counts=(2, 2), gamma=0.7)
    path = tmp_path / "mdp.json"
    save_mdp_json(mdp, path)
    back = load_mdp_json(path)
    assert (back.transition == mdp.transition).all()
    assert (back.reward_mean == mdp.reward_mean).all()
    assert (back.initial_dist == mdp.initial_dist).all()
    assert back.discount == mdp.discount
    assert back.action_counts == mdp.action_counts
    assert back.horizon == mdp.horizon


def test_rng_streams_are_independent_and_stable():
    a = rng_stream(0, "env").random(4)
    b = rng_stream(0, "exploration").random(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, rng_stream(0, "env").random(4))
    with pytest.raises(ValueError, match="unknown stream"):
        rng_stream(0, "nope")
