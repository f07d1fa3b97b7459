"""Shared oracles for the test suite.

`oracle_prob_vector` recomputes exact joint distributions by brute-force
enumeration over every (configuration, disturbance) pair, written against the
model definition alone.  It shares no code path with the package's fast
einsum-based routine, so agreement between the two is a real check.
"""

import numpy as np
import pytest

from noisyor import bits
from noisyor.data import Dataset, DatasetEntry, spec_id
from noisyor.model import Model


def _bit(index, n, p):
    return (index >> (n - 1 - p)) & 1


def oracle_prob_vector(model, spec=None):
    """P(x ∥ do) over configurations in causal-position layout, O(4^n)."""
    n = model.n
    order = model.order
    intervened = spec.intervened if spec is not None else frozenset()
    interactions = getattr(model, "interactions", {})
    out = np.zeros(1 << n)
    for x_idx in range(1 << n):
        x = [_bit(x_idx, n, p) for p in range(n)]  # by causal position
        value = {order[p]: x[p] for p in range(n)}  # by variable index
        total = 0.0
        for e_idx in range(1 << n):
            like = 1.0
            for p in range(n):
                j = order[p]
                xj = x[p]
                if j in intervened:
                    q = spec.prob(j)
                    like *= q if xj else 1.0 - q
                    continue
                if _bit(e_idx, n, p) == 1:
                    like *= 1.0 if xj else 0.0
                else:
                    off = 1.0
                    for (i, jj), b in model.links.items():
                        if jj != j:
                            continue
                        active = value[i] if b > 0 else 1 - value[i]
                        if active:
                            off *= 1.0 - abs(b)
                    for (k, i, jj), probs in interactions.items():
                        if k != j:
                            continue
                        state = (1 - value[i]) * 2 + (1 - value[jj])
                        off *= 1.0 - probs[state]
                    like *= (1.0 - off) if xj else off
                if like == 0.0:
                    break
            total += float(model.disturbance[e_idx]) * like
        out[x_idx] = total
    return out


def make_model(rng, n, p_link=0.6, negative=0.5, names=None):
    """Random model built directly, bypassing the package generator."""
    order = tuple(int(v) for v in rng.permutation(n))
    links = {}
    for a in range(n):
        for b_pos in range(a + 1, n):
            if rng.random() < p_link:
                mag = rng.uniform(0.15, 0.85)
                sign = -1.0 if rng.random() < negative else 1.0
                links[(order[a], order[b_pos])] = sign * mag
    disturbance = rng.dirichlet(np.ones(1 << n))
    return Model(names or tuple(f"X{k + 1}" for k in range(n)), order, links, disturbance)


def exact_entry(model, spec, total=1.0):
    """Infinite-sample counts for one experiment, via the brute-force oracle."""
    vec = oracle_prob_vector(model, spec)
    new_to_old = [model.position(v) for v in range(model.n)]
    counts = bits.permute_positions(vec, new_to_old) * total
    return DatasetEntry(spec, counts, spec_id(spec, model.names))


def exact_dataset(model, specs, total=1.0):
    return Dataset(model.names, tuple(exact_entry(model, s, total) for s in specs))


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
