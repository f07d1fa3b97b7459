"""Constructive identification from single-variable interventions plus passive data.

The procedure runs in four stages: establish a causal order from
interventional (in)dependences, estimate each link by causal power with every
in-between variable conditioned to zero, assemble the conditional matrix of
observed configurations given disturbance configurations, and invert it
against the passive-observational distribution to recover the joint
disturbance.  On exact input this is lossless; on finite samples every stage
degrades gracefully and reports what it could not pin down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import bits
from .errors import (
    InconsistentOrderError,
    InvalidLinksError,
    MissingPassiveDataError,
    ModelTooLargeError,
)
from .estimate import causal_power, chi_square_independence, stratum_counts
from .model import Distribution, LearnedModel, Model

# Dense 2**n x 2**n matrices get unmanageable past this point.
MAX_DENSE_VARS = 14

ORDER_ALPHA = 0.01

# Estimated |b| at or below this is read as "no link" (exact-input scale).
ZERO_LINK_TOL = 1e-9


@dataclass(frozen=True)
class CausalOrder:
    """An ancestor relation plus one total order refining it.

    `ancestors` holds ordered pairs (i, j) meaning i precedes j causally; it
    is transitively closed.  `unknown` lists the ordered pairs no experiment
    could test.  `order` is the chosen linear extension, ties broken toward
    lower variable indices.
    """

    ancestors: frozenset[tuple[int, int]]
    order: tuple[int, ...]
    unknown: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        pos = {v: p for p, v in enumerate(self.order)}
        for i, j in self.ancestors:
            if pos[i] >= pos[j]:
                raise InconsistentOrderError(
                    f"order places {j} before its ancestor {i}"
                )

    def position(self, i):
        return self.order.index(i)


def _transitive_closure(pairs, n):
    reach = np.zeros((n, n), dtype=bool)
    for i, j in pairs:
        reach[i, j] = True
    for k in range(n):
        reach |= np.outer(reach[:, k], reach[k, :])
    return reach


def _linear_extension(reach, n):
    remaining = set(range(n))
    out = []
    while remaining:
        free = [v for v in sorted(remaining) if not any(reach[u, v] for u in remaining if u != v)]
        if not free:
            raise InconsistentOrderError("ancestor relation contains a cycle")
        v = free[0]
        out.append(v)
        remaining.remove(v)
    return tuple(out)


def find_causal_order(dataset, alpha=ORDER_ALPHA):
    """Stage one: ancestor pairs from interventional dependence, then a total order.

    An ordered pair (i, j) is testable in any experiment that randomizes i
    while leaving j alone; dependence between the two in such an experiment
    can only flow along directed paths from i to j, so a rejected independence
    marks i as an ancestor of j.  Pairs no experiment can test are reported as
    unknown.  Thin strata (any expected cell below the chi-square validity
    floor) never count as evidence.
    """
    n = dataset.n
    direct = set()
    tested = set()
    for entry in dataset.entries:
        for i in sorted(entry.spec.intervened):
            for j in range(n):
                if j == i or j in entry.spec.intervened:
                    continue
                tested.add((i, j))
                if (i, j) in direct:
                    continue
                if chi_square_independence(entry, i, j).rejects(alpha):
                    direct.add((i, j))
    reach = _transitive_closure(direct, n)
    for i in range(n):
        for j in range(n):
            if i != j and reach[i, j] and reach[j, i]:
                raise InconsistentOrderError(
                    f"variables {i} and {j} appear as ancestors of each other"
                )
    ancestors = frozenset((i, j) for i in range(n) for j in range(n) if i != j and reach[i, j])
    unknown = frozenset(
        (i, j) for i in range(n) for j in range(n) if i != j and (i, j) not in tested
    )
    return CausalOrder(ancestors, _linear_extension(reach, n), unknown)


def _qualifying_entries(dataset, i, j):
    return [e for e in dataset.entries if i in e.spec.intervened and j not in e.spec.intervened]


def identify_links(dataset, order, zero_tol=ZERO_LINK_TOL):
    """Stage two and three: one causal-power estimate per ordered pair.

    For the pair at positions (p, q) of the order, every variable strictly
    between them is conditioned to zero, which blocks all indirect routes.
    Among qualifying experiments (cause randomized, effect observed) the one
    with the heaviest all-zeros stratum is used.  Returns the link map and a
    diagnostics dict listing unidentified pairs, estimates read as zero, and
    the experiment chosen for each pair.
    """
    seq = order.order if isinstance(order, CausalOrder) else tuple(order)
    links = {}
    info = {"unidentified": [], "zero": [], "chosen": {}, "estimates": {}}
    for p in range(len(seq)):
        for q in range(p + 1, len(seq)):
            i, j = seq[p], seq[q]
            conditioning = seq[p + 1 : q]
            candidates = _qualifying_entries(dataset, i, j)
            if not candidates:
                info["unidentified"].append((i, j))
                continue
            entry = max(candidates, key=lambda e: stratum_counts(e, {c: 0 for c in conditioning}))
            est = causal_power(entry, i, j, conditioning)
            key = f"{i}->{j}"
            info["chosen"][key] = entry.exp_id
            info["estimates"][key] = est.value
            if abs(est.value) <= zero_tol:
                info["zero"].append((i, j))
            else:
                links[(i, j)] = est.value
    return links, info


def conditional_probability_matrix(links, order, spec=None):
    """The matrix of P(observed configuration | disturbance configuration).

    Rows and columns are indexed lexicographically over configurations in
    causal-position layout (position 0 as the most significant bit).  Without
    an intervention a row can only be reached from column patterns it
    dominates bitwise, so the matrix is lower triangular with a strictly
    positive diagonal.  Under an intervention the randomized positions take
    their intervention probabilities independent of everything, which breaks
    the triangularity but keeps each column a distribution over rows.
    """
    n = len(order)
    if n > MAX_DENSE_VARS:
        raise ModelTooLargeError(
            f"dense conditional matrix needs 4**{n} entries; capped at {MAX_DENSE_VARS} variables"
        )
    pos = {v: p for p, v in enumerate(order)}
    M = np.ones((1, 1))
    for p in range(n):
        C = np.empty((1 << p, 2, 2))
        if spec is not None and order[p] in spec.intervened:
            q = spec.prob(order[p])
            C[:, 1, :] = q
            C[:, 0, :] = 1.0 - q
        else:
            h = np.arange(1 << p)
            off = np.ones(1 << p)
            for (i, j), b in links.items():
                if j != order[p]:
                    continue
                bit = (h >> (p - 1 - pos[i])) & 1
                active = bit if b > 0 else 1 - bit
                off = off * np.where(active == 1, 1.0 - abs(b), 1.0)
            C[:, 1, 0] = 1.0 - off
            C[:, 0, 0] = off
            C[:, 1, 1] = 1.0
            C[:, 0, 1] = 0.0
        # M'[h x, g e] = M[h, g] C[h, x, e]
        M = (M[:, None, :, None] * C[:, :, None, :]).reshape(1 << (p + 1), 1 << (p + 1))
    return M


def recover_disturbance(links, order, passive, negativity_tolerance=1e-6):
    """Stage four: solve the triangular system matrix @ P(E) = P(X).

    `passive` is the passive-observational Distribution.  Forward substitution
    plus two rounds of iterative refinement keeps the solution tight even when
    many small diagonal entries stack up.  Tiny negative entries (accumulated
    rounding, or sampling noise on empirical input) are clipped and the vector
    renormalized; mass clipped beyond `negativity_tolerance` flags the result
    as unreliable rather than failing.
    """
    order = tuple(order)
    n = len(order)
    M = conditional_probability_matrix(links, order)
    diag = np.diag(M)
    if np.any(diag <= 0.0):
        raise InvalidLinksError("conditional matrix has a nonpositive diagonal entry")
    px = bits.permute_positions(passive.by_index_order(), order)
    e = solve_triangular(M, px, lower=True)
    for _ in range(2):
        e += solve_triangular(M, px - M @ e, lower=True)
    negative_mass = float(-np.minimum(e, 0.0).sum())
    e = np.maximum(e, 0.0)
    total = e.sum()
    if total <= 0.0:
        raise InvalidLinksError("recovered disturbance has no positive mass")
    e /= total
    info = {
        "negative_mass": negative_mass,
        "flagged": bool(negative_mass > negativity_tolerance),
        "negativity_tolerance": negativity_tolerance,
    }
    return e, info


def run_id(dataset, alpha=ORDER_ALPHA, zero_tol=ZERO_LINK_TOL, negativity_tolerance=0.05):
    """The full procedure: order, links, and disturbance from one dataset.

    The dataset must contain a passive-observational entry; interventional
    coverage determines how much of the rest is identified.  The default
    negativity tolerance suits sampled counts; drop it to 1e-6 when feeding
    exact distributions.
    """
    passive = dataset.passive_entry()
    if passive is None or passive.total <= 0:
        raise MissingPassiveDataError(
            "disturbance recovery needs a passive-observational experiment"
        )
    order = find_causal_order(dataset, alpha)
    links, link_info = identify_links(dataset, order, zero_tol)
    dist = Distribution(
        bits.permute_positions(passive.frequencies(), order.order), order.order
    )
    disturbance, dist_info = recover_disturbance(
        links, order.order, dist, negativity_tolerance
    )
    model = Model(dataset.names, order.order, links, disturbance)
    names = dataset.names
    diagnostics = {
        "method": "id",
        "order": [names[v] for v in order.order],
        "ancestor_pairs": sorted([names[i], names[j]] for i, j in order.ancestors),
        "untested_pairs": sorted([names[i], names[j]] for i, j in order.unknown),
        "unidentified_pairs": sorted([names[i], names[j]] for i, j in link_info["unidentified"]),
        "zero_links": sorted([names[i], names[j]] for i, j in link_info["zero"]),
        "experiments_used": link_info["chosen"],
        "disturbance_recovery": dist_info,
    }
    return LearnedModel(model, diagnostics)
