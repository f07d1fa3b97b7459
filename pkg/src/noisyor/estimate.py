"""Estimators computed from a single experiment's counts table.

Everything here works on a DatasetEntry in the dataset bit layout (variable 0
as the most significant bit).  The causal-power estimator measures the
probability that an incoming link fires, screening off indirect routes by
conditioning a chosen set of variables to zero; in the infinite-sample limit,
with the cause randomized and all intermediate variables conditioned off, it
returns the link probability itself.  Links that suppress their effect are
handled by re-running the estimate with the cause's role inverted and
flipping the sign of the result.

Counts are floats throughout, so exactly computed distributions (fed in as
fractional counts) exercise the same code paths as finite samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import bits
from .errors import UnreliableEstimateError

# Conditional strata thinner than this are treated as unusable.
DENOMINATOR_FLOOR = 1e-6

# Keep estimates strictly inside (-1, 1) even on degenerate strata.
_VALUE_CAP = 1.0 - 1e-12


def stratum_counts(entry, assignment):
    """Total count of samples matching a partial {index: value} assignment."""
    mask = bits.assignment_mask(entry.m, assignment)
    return float(entry.counts[mask].sum())


def empirical_conditional(entry, target, value, given):
    """P-hat(target = value | given) plus the count behind the estimate.

    Raises UnreliableEstimateError when no samples fall in the conditioning
    stratum.
    """
    denom = stratum_counts(entry, given)
    if denom <= 0.0:
        raise UnreliableEstimateError(
            f"no samples satisfy the conditioning assignment {given!r}"
        )
    joint = dict(given)
    joint[target] = value
    return stratum_counts(entry, joint) / denom, denom


@dataclass(frozen=True)
class CpEstimate:
    """A signed causal-power estimate and the conditionals behind it.

    p1 and p0 are the effect's estimated on-probabilities with the cause at 1
    and at 0 inside the zero-conditioned stratum, and n1 and n0 count the
    samples behind each.  sign is the orientation used: +1 reads the cause's
    value 1 as active, -1 reads value 0 as active (the estimate of a
    suppressing link, reported with a negative value).
    """

    cause: int
    effect: int
    conditioning: tuple[int, ...]
    value: float
    sign: int
    p1: float
    p0: float
    n1: float
    n0: float
    exp_id: str = ""

    @property
    def support(self):
        return (self.n1, self.n0)

    @property
    def total_support(self):
        return self.n1 + self.n0


def _cp_value(p1, p0, sign):
    denom = (1.0 - p0) if sign > 0 else (1.0 - p1)
    if denom < DENOMINATOR_FLOOR:
        raise UnreliableEstimateError(
            f"causal-power denominator {denom!r} below {DENOMINATOR_FLOOR}"
        )
    return float(np.clip((p1 - p0) / denom, -_VALUE_CAP, _VALUE_CAP))


def causal_power(entry, cause, effect, conditioning=(), sign=None):
    """Causal power of `cause` on `effect` with `conditioning` held at 0.

    Meaningful when the entry's experiment randomizes the cause and leaves the
    effect alone; the caller is responsible for picking such an entry.  With
    sign None the positive orientation is tried first and, when its value
    comes out negative, the estimate is redone in the inverted orientation.
    Passing sign +1 or -1 forces the orientation, which keeps estimates of one
    link comparable across experiments.
    """
    conditioning = tuple(sorted(int(c) for c in conditioning))
    base = {c: 0 for c in conditioning}
    if cause in base or effect in base or cause == effect:
        raise UnreliableEstimateError("cause, effect, and conditioning set must be disjoint")
    p1, n1 = empirical_conditional(entry, effect, 1, {**base, cause: 1})
    p0, n0 = empirical_conditional(entry, effect, 1, {**base, cause: 0})

    def build(s):
        return CpEstimate(
            cause, effect, conditioning, _cp_value(p1, p0, s), s, p1, p0, n1, n0, entry.exp_id
        )

    if sign is not None:
        return build(int(sign))
    est = build(1)
    if est.value < 0.0:
        est = build(-1)
    return est


@dataclass(frozen=True)
class IndependenceTest:
    """A 2x2 chi-square test of independence inside a conditioning stratum.

    Degenerate tables (an empty margin) come back with statistic 0 and
    p-value 1.  `valid` additionally requires every expected cell to reach the
    minimum; callers treat invalid tests as non-rejections.
    """

    statistic: float
    p_value: float
    table: np.ndarray
    valid: bool

    @property
    def stratum_size(self):
        return float(self.table.sum())

    def rejects(self, alpha):
        return self.valid and self.p_value < alpha


def chi_square_independence(entry, a, b, given=None, min_expected=5.0):
    """Test whether variables a and b covary within the `given` stratum."""
    base = {int(c): int(v) for c, v in (given or {}).items()}
    if a in base or b in base or a == b:
        raise UnreliableEstimateError("tested variables must be outside the conditioning set")
    table = np.empty((2, 2))
    for va in (0, 1):
        for vb in (0, 1):
            table[va, vb] = stratum_counts(entry, {**base, a: va, b: vb})
    total = table.sum()
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    if total <= 0 or np.any(rows <= 0) or np.any(cols <= 0):
        return IndependenceTest(0.0, 1.0, table, False)
    expected = np.outer(rows, cols) / total
    statistic = float(((table - expected) ** 2 / expected).sum())
    p_value = float(stats.chi2.sf(statistic, df=1))
    return IndependenceTest(statistic, p_value, table, bool(expected.min() >= min_expected))
