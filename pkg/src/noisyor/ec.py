"""Structure learning with minimal conditioning sets.

Where the exhaustive procedure conditions on every variable between a cause
and an effect, this learner conditions only on the smallest sets of variables
that block the directed paths already discovered.  Smaller conditioning sets
mean fatter strata and better estimates on finite data.  Pairs are processed
so that whenever (i, j) is examined, every edge that could lie on a path from
i to j has already been decided: the outer loop walks causes from the back of
the order toward the front, the inner loop walks effects forward.

Per pair, a preliminary estimate is computed for every usable combination of
experiment and minimal blocking set; the estimates are pooled by a
stratum-size weighted average, and the pair becomes an edge only when an
independence test on the best-supported stratum rejects.  The joint
disturbance is then recovered by least squares over the probability simplex,
stacking the conditional matrices of every experiment in the data.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.linalg import solve_triangular

from . import bits
from .errors import UnreliableEstimateError
from .estimate import causal_power, chi_square_independence
from .identify import conditional_probability_matrix, find_causal_order
from .model import LearnedModel, Model
from .simplex import project_to_simplex, simplex_least_squares

EDGE_ALPHA = 0.01

MAX_BLOCKING_SETS = 32


@dataclass(frozen=True)
class BlockingSetQuery:
    """Paths between a candidate cause and effect in one experiment's graph.

    Paths are vertex sequences over currently accepted edges, with every edge
    into an intervened variable removed first (the intervention severs it).
    """

    cause: int
    effect: int
    paths: tuple[tuple[int, ...], ...]
    intervened: frozenset[int]


def known_paths(links, cause, effect, intervened=frozenset()):
    """All directed paths cause -> effect over the given edges.

    Edges into intervened variables are dropped.  Acyclicity of the accepted
    edge set bounds the recursion.
    """
    children = {}
    for i, j in links:
        if j in intervened:
            continue
        children.setdefault(i, []).append(j)
    paths = []

    def walk(v, trail):
        if v == effect:
            paths.append(tuple(trail))
            return
        for w in sorted(children.get(v, ())):
            walk(w, trail + [w])

    walk(cause, [cause])
    return tuple(paths)


def minimal_blocking_sets(query, universe, cap=MAX_BLOCKING_SETS):
    """All minimum-cardinality vertex sets hitting every path's interior.

    The universe is the order window strictly between cause and effect; every
    interior vertex of every path must lie in it.  With no paths the empty set
    is the unique answer.  When more minimum cuts exist than `cap`, the
    lexicographically earliest ones are kept.
    """
    interiors = []
    universe = set(universe)
    for path in query.paths:
        interior = set(path[1:-1])
        # pairs are decided innermost-first, so a known path always has an
        # interior vertex inside the window
        assert interior and interior <= universe, "path escapes the order window"
        interiors.append(interior)
    if not interiors:
        return [frozenset()]
    candidates = sorted(set().union(*interiors))
    for size in range(1, len(candidates) + 1):
        found = []
        for combo in combinations(candidates, size):
            chosen = set(combo)
            if all(chosen & interior for interior in interiors):
                found.append(frozenset(combo))
                if len(found) >= cap:
                    break
        if found:
            return found
    raise AssertionError("unblockable path set")  # unreachable: each interior is a cut


def _qualifying(dataset, i, j):
    return [e for e in dataset.entries if i in e.spec.intervened and j not in e.spec.intervened]


def _pair_candidates(dataset, accepted, i, j, universe, cap):
    """Preliminary estimates for one pair: (estimate, blocking set, entry)."""
    out = []
    for entry in _qualifying(dataset, i, j):
        paths = known_paths(accepted, i, j, entry.spec.intervened)
        query = BlockingSetQuery(i, j, paths, entry.spec.intervened)
        for blocker in minimal_blocking_sets(query, universe, cap):
            try:
                est = causal_power(entry, i, j, blocker)
            except UnreliableEstimateError:
                continue
            out.append((est, blocker, entry))
    return out


def _recover_disturbance_ls(dataset, links, order, quick, diagnostics):
    """Simplex least squares for P(E), stacked over every usable experiment."""
    n = len(order)
    blocks_a, blocks_b = [], []
    warm = None
    for entry in dataset.entries:
        if entry.total <= 0:
            continue
        M = conditional_probability_matrix(links, order, entry.spec)
        freq = bits.permute_positions(entry.frequencies(), order)
        if entry.spec.is_passive and warm is None:
            # triangular solve on the passive block alone; exact when the
            # passive distribution is exact and the links are right
            warm = project_to_simplex(solve_triangular(M, freq, lower=True))
        blocks_a.append(M)
        blocks_b.append(freq)
    if quick and warm is not None:
        diagnostics["disturbance_solver"] = {"method": "passive-triangular"}
        return warm
    A = np.vstack(blocks_a)
    b = np.concatenate(blocks_b)
    solution, info = simplex_least_squares(A, b, x0=warm)
    info = {"method": "simplex-ls", **info}
    if not info["converged"]:
        fallback, *_ = np.linalg.lstsq(A, b, rcond=None)
        fallback = project_to_simplex(fallback)
        r_fb = A @ fallback - b
        if float(r_fb @ r_fb) < info["objective"]:
            solution = fallback
            info["fallback_projection_used"] = True
    diagnostics["disturbance_solver"] = info
    return solution


def run_ec(
    dataset,
    alpha=EDGE_ALPHA,
    min_stratum=5.0,
    order=None,
    max_blocking_sets=MAX_BLOCKING_SETS,
    quick_disturbance=False,
):
    """Full structure-and-parameter fit with minimal conditioning sets.

    `alpha` gates both the order-finding tests and edge insertion;
    `min_stratum` is the minimum expected cell count for a chi-square test to
    count.  `quick_disturbance` replaces the stacked least-squares disturbance
    solve with a triangular solve against the passive experiment alone, which
    is much faster and adequate when only structure is of interest.
    """
    if order is None:
        order = find_causal_order(dataset, alpha)
    seq = order.order if hasattr(order, "order") else tuple(order)
    n = len(seq)
    names = dataset.names
    accepted = {}
    pair_records = {}
    unidentified = []
    for ip in range(n - 2, -1, -1):
        for jp in range(ip + 1, n):
            i, j = seq[ip], seq[jp]
            universe = set(seq[ip + 1 : jp])
            candidates = _pair_candidates(dataset, accepted, i, j, universe, max_blocking_sets)
            key = f"{names[i]}->{names[j]}"
            if not candidates:
                unidentified.append([names[i], names[j]])
                continue
            best_est, best_set, best_entry = max(
                candidates, key=lambda c: (c[0].total_support, c[0].sign)
            )
            gate = chi_square_independence(
                best_entry, i, j, {c: 0 for c in best_set}, min_expected=min_stratum
            )
            record = {
                "gate_experiment": best_entry.exp_id,
                "gate_set": sorted(names[c] for c in best_set),
                "statistic": gate.statistic,
                "p_value": gate.p_value,
                "stratum": gate.stratum_size,
                "edge": bool(gate.rejects(alpha)),
                "estimates": [],
            }
            pooled_num = pooled_den = 0.0
            for _, blocker, entry in candidates:
                try:
                    est = causal_power(entry, i, j, blocker, sign=best_est.sign)
                except UnreliableEstimateError:
                    continue
                w = est.total_support
                pooled_num += w * est.value
                pooled_den += w
                record["estimates"].append(
                    {
                        "experiment": entry.exp_id,
                        "set": sorted(names[c] for c in blocker),
                        "weight": w,
                        "value": est.value,
                    }
                )
            if pooled_den > 0:
                record["pooled"] = pooled_num / pooled_den
                if record["edge"] and abs(record["pooled"]) > 1e-12:
                    accepted[(i, j)] = record["pooled"]
                elif record["edge"]:
                    record["edge"] = False  # gate fired but estimate is exactly null
            else:
                record["edge"] = False
            pair_records[key] = record
    diagnostics = {
        "method": "ec",
        "order": [names[v] for v in seq],
        "pairs": pair_records,
        "unidentified_pairs": unidentified,
    }
    disturbance = _recover_disturbance_ls(dataset, accepted, seq, quick_disturbance, diagnostics)
    model = Model(names, seq, accepted, disturbance)
    return LearnedModel(model, diagnostics)
