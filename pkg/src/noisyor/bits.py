"""Index arithmetic for joint configurations of binary variables.

A joint configuration of k binary variables is stored as an integer index
into a vector of length 2**k.  The variable at position 0 occupies the most
significant bit, so configurations are enumerated lexicographically with the
first variable varying slowest.
"""

import numpy as np


def n_configs(k):
    return 1 << k


def bit_of(index, k, pos):
    """Value of the variable at `pos` inside configuration `index`."""
    return (index >> (k - 1 - pos)) & 1


def bit_column(k, pos):
    """Vector over all 2**k configurations holding the bit at `pos`."""
    return (np.arange(1 << k) >> (k - 1 - pos)) & 1


def assignment_mask(k, assignment):
    """Boolean vector selecting configurations consistent with `assignment`.

    `assignment` maps positions to required 0/1 values.
    """
    mask = np.ones(1 << k, dtype=bool)
    for pos, val in assignment.items():
        mask &= bit_column(k, pos) == val
    return mask


def permute_positions(vec, new_to_old):
    """Reindex `vec` so that new position p holds old position new_to_old[p].

    `vec` is a length 2**k vector over configurations; the result is the same
    multiset of values laid out in the permuted bit order.
    """
    k = len(new_to_old)
    if len(vec) != (1 << k):
        raise ValueError("vector length does not match permutation size")
    idx = np.arange(1 << k)
    src = np.zeros(1 << k, dtype=np.int64)
    for newp, oldp in enumerate(new_to_old):
        src |= ((idx >> (k - 1 - newp)) & 1) << (k - 1 - oldp)
    return np.asarray(vec)[src]


def encode_rows(values):
    """Map an (m, k) array of 0/1 values to m configuration indices."""
    values = np.asarray(values)
    k = values.shape[-1]
    weights = 1 << np.arange(k - 1, -1, -1)
    return values @ weights


def decode_configs(indices, k):
    """Map configuration indices to an (m, k) array of 0/1 values."""
    indices = np.asarray(indices)
    shifts = np.arange(k - 1, -1, -1)
    return (indices[..., None] >> shifts) & 1
