import numpy as np

from noisyor import bits


def test_bit_of_matches_bit_column():
    k = 4
    for pos in range(k):
        col = bits.bit_column(k, pos)
        for idx in range(1 << k):
            assert col[idx] == bits.bit_of(idx, k, pos)


def test_position_zero_is_most_significant():
    assert list(bits.bit_column(3, 0)) == [0, 0, 0, 0, 1, 1, 1, 1]
    assert list(bits.bit_column(3, 2)) == [0, 1, 0, 1, 0, 1, 0, 1]


def test_encode_decode_round_trip():
    rng = np.random.default_rng(0)
    values = rng.integers(0, 2, size=(40, 5))
    idx = bits.encode_rows(values)
    assert np.array_equal(bits.decode_configs(idx, 5), values)
    assert np.array_equal(bits.encode_rows(bits.decode_configs(np.arange(32), 5)), np.arange(32))


def test_encode_rows_msb_first():
    assert bits.encode_rows(np.array([1, 0, 1])) == 5
    assert bits.encode_rows(np.array([[0, 0, 1], [1, 1, 1]])).tolist() == [1, 7]


def test_assignment_mask():
    mask = bits.assignment_mask(3, {0: 1, 2: 0})
    expected = [idx for idx in range(8) if bits.bit_of(idx, 3, 0) == 1 and bits.bit_of(idx, 3, 2) == 0]
    assert list(np.flatnonzero(mask)) == expected
    assert bits.assignment_mask(3, {}).all()


def test_permute_positions_identity_and_inverse():
    rng = np.random.default_rng(1)
    vec = rng.random(16)
    perm = [2, 0, 3, 1]
    out = bits.permute_positions(vec, perm)
    # invert: old position perm[p] moved to new position p
    inverse = [perm.index(p) for p in range(4)]
    assert np.allclose(bits.permute_positions(out, inverse), vec)
    assert np.allclose(bits.permute_positions(vec, [0, 1, 2, 3]), vec)


def test_permute_positions_semantics():
    # new position p reads the bit that sat at old position new_to_old[p]
    k = 3
    vec = np.arange(8.0)
    new_to_old = [1, 2, 0]
    out = bits.permute_positions(vec, new_to_old)
    for new_idx in range(8):
        old_idx = 0
        for p in range(k):
            old_idx |= bits.bit_of(new_idx, k, p) << (k - 1 - new_to_old[p])
        assert out[new_idx] == vec[old_idx]


def test_permute_positions_rejects_bad_length():
    import pytest

    with pytest.raises(ValueError):
        bits.permute_positions(np.ones(8), [0, 1])
