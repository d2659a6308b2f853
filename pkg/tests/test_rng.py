import numpy as np
import pytest
from scipy.stats import chisquare

from stabforest.rng import (GOLDEN_GAMMA, MASK64, PERMUTATION_SALT, TREE_SALT, RandomStream, RngState,
                            derive_seed, derive_trial_seed, scan_seed_collisions, shuffle, splitmix64_next)

REFERENCE_FIRST_OUTPUT = 0xE220A8397B1DCDAF


def test_splitmix64_reference_vector():
    state, value = splitmix64_next(RngState(0))
    assert value == REFERENCE_FIRST_OUTPUT
    assert state.state == GOLDEN_GAMMA


def test_splitmix64_is_deterministic():
    assert splitmix64_next(RngState(12345)) == splitmix64_next(RngState(12345))
    assert splitmix64_next(RngState(1))[1] != splitmix64_next(RngState(2))[1]


def test_splitmix64_wraps_at_64_bits():
    state, value = splitmix64_next(RngState(MASK64))
    assert state.state == (MASK64 + GOLDEN_GAMMA) & MASK64
    assert 0 <= value <= MASK64


def test_rng_state_rejects_out_of_range():
    with pytest.raises(ValueError):
        RngState(-1)
    with pytest.raises(ValueError):
        RngState(1 << 64)


def test_derive_trial_seed_zero_cell_is_reference_vector():
    assert derive_trial_seed(0, 0, 0) == REFERENCE_FIRST_OUTPUT
    assert derive_trial_seed(42, 3, 17) == derive_trial_seed(42, 3, 17)


def test_derive_trial_seed_formula():
    master, subject, trial = 43, 5, 9
    expected = splitmix64_next(RngState(master ^ ((subject * GOLDEN_GAMMA + trial) & MASK64)))[1]
    assert derive_trial_seed(master, subject, trial) == expected


def test_derive_seed_uses_salted_stream():
    assert derive_seed(42, 3) == derive_trial_seed(42 ^ TREE_SALT, 3, 0)
    assert derive_seed(42, 3) != derive_seed(42, 3, salt=PERMUTATION_SALT)
    assert derive_seed(42, 3) != derive_trial_seed(42, 3, 0)


def test_trial_grid_has_no_seed_collisions():
    assert scan_seed_collisions(42, 683, 400) == []


def test_scan_matches_scalar_derivation():
    from collections import Counter
    seeds = Counter(derive_trial_seed(7, s, t) for s in range(20) for t in range(30))
    assert max(seeds.values()) == 1
    assert scan_seed_collisions(7, 20, 30) == []
    assert scan_seed_collisions(7, 0, 30) == []


def test_stream_matches_splitmix64():
    stream = RandomStream(0)
    state = RngState(0)
    for _ in range(5):
        state, value = splitmix64_next(state)
        assert stream.next_u64() == value


def test_block_draws_consume_stream_like_scalar_draws():
    block = RandomStream(99)
    scalar = RandomStream(99)
    drawn = block.integers(7, 200)
    assert drawn.tolist() == [scalar.bounded(7) for _ in range(200)]
    assert block.next_u64() == scalar.next_u64()


def test_uniform_and_normal_blocks_match_scalar_draws():
    block = RandomStream(5)
    scalar = RandomStream(5)
    assert np.allclose(block.uniforms(50), [scalar.uniform() for _ in range(50)], rtol=0, atol=0)
    block, scalar = RandomStream(6), RandomStream(6)
    assert np.allclose(block.normals(20), [scalar.normal() for _ in range(20)])


def test_uniform_range():
    values = RandomStream(1).uniforms(1000)
    assert values.min() >= 0.0
    assert values.max() < 1.0


def test_bounded_rejects_non_positive_bound():
    with pytest.raises(ValueError):
        RandomStream(1).bounded(0)


@pytest.mark.parametrize('n', [0, 1, 2, 5, 64])
def test_permutation_is_a_permutation(n):
    order = RandomStream(3).permutation(n)
    assert sorted(order.tolist()) == list(range(n))


def test_shuffle_edge_cases_and_determinism():
    assert shuffle(1, 42) == [0]
    assert shuffle(0, 42) == []
    assert shuffle(5, 42) == shuffle(5, 42)
    assert shuffle(50, 42) != shuffle(50, 43)


def test_permutation_follows_fisher_yates_order():
    stream = RandomStream(21)
    replay = RandomStream(21)
    expected = list(range(6))
    for i in range(5, 0, -1):
        j = replay.bounded(i + 1)
        expected[i], expected[j] = expected[j], expected[i]
    assert stream.permutation(6).tolist() == expected


def test_sample_without_replacement():
    sample = RandomStream(8).sample_without_replacement(10, 4)
    assert len(sample) == 4
    assert len(set(sample)) == 4
    assert all(0 <= item < 10 for item in sample)
    assert sorted(RandomStream(8).sample_without_replacement(6, 6)) == list(range(6))
    with pytest.raises(ValueError):
        RandomStream(8).sample_without_replacement(3, 4)


def test_batched_subsets_match_scalar_draws():
    batched = RandomStream(77)
    scalar = RandomStream(77)
    rows = batched.samples_without_replacement(9, 3, 40)
    assert rows.tolist() == [scalar.sample_without_replacement(9, 3) for _ in range(40)]
    assert batched.next_u64() == scalar.next_u64()
    assert RandomStream(1).samples_without_replacement(5, 2, 0).shape == (0, 2)


def test_bounded_draws_pass_chi_square():
    draws = RandomStream(2024).integers(7, 10 ** 6)
    observed = np.bincount(draws, minlength=7)
    assert observed.sum() == 10 ** 6
    assert chisquare(observed).pvalue > 0.001
