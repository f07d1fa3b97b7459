"""Expectation-maximization over latent disturbance configurations.

The learner fixes a causal order, treats the joint disturbance configuration
of each sample as the latent variable, and alternates between computing
posteriors over the 2**n disturbance configurations for every observed
configuration (E-step) and re-fitting the link magnitudes and the disturbance
distribution against those posteriors (M-step).

Links form a complete DAG over the causal order: every ordered pair carries a
signed parameter, possibly zero.  Signs are chosen at initialization and held
fixed; the M-step optimizes the magnitudes on an unconstrained scale via a
sigmoid map, with a backtracking ascent that guarantees the expected
log-likelihood never decreases.  There is no closed form for the magnitude
update, but the per-node objective aggregates into one weight pair per parent
context, so each ascent step is cheap regardless of sample count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import bits
from .errors import (
    EmDivergedError,
    ImpossibleDataError,
    ModelTooLargeError,
    NoisyOrError,
    UnreliableEstimateError,
)
from .estimate import causal_power
from .identify import find_causal_order
from .model import LearnedModel, Model

MAX_EM_VARS = 14

# Magnitudes this small are numerically zero; they also keep logit() finite.
MAG_FLOOR = 1e-12


@dataclass(frozen=True)
class EmConfig:
    tol: float = 1e-6
    max_iters: int = 500
    restarts: int = 3
    init: str = "auto"  # "auto" tries a quick minimal-conditioning fit first
    map_prior: bool = False
    map_scale: float = 0.01
    prune_threshold: float = 0.05
    inner_tol: float = 1e-8
    max_inner_iters: int = 200
    seed: int = 0


@dataclass
class EmState:
    """Mutable fitting state: signed complete-DAG links plus the disturbance."""

    order: tuple[int, ...]
    links: dict[tuple[int, int], float]
    disturbance: np.ndarray
    posteriors: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    stuck_nodes: set = field(default_factory=set)


def _pairs(order):
    return [(order[a], order[b]) for a in range(len(order)) for b in range(a + 1, len(order))]


# ---- E-step -------------------------------------------------------------------


@dataclass(frozen=True)
class EStepEntry:
    """Posterior table for one experiment, restricted to observed rows."""

    spec: object
    configs: np.ndarray  # row-aligned observed configurations, bits by variable index
    counts: np.ndarray
    posterior: np.ndarray  # rows x 2**n over disturbance configs, position layout


def _likelihood_rows(links, order, spec, V):
    """P(x | E, links, intervention), one row per configuration in V.

    Columns range over disturbance configurations in causal-position layout.
    Intervened positions contribute no factor.
    """
    R = V.shape[0]
    L = np.ones((R, 1))
    for p, j in enumerate(order):
        g = np.empty((R, 2))
        if j in spec.intervened:
            g[:] = 1.0
        else:
            off = np.ones(R)
            for (i, jj), b in links.items():
                if jj != j or b == 0.0:
                    continue
                xi = V[:, i]
                active = xi if b > 0 else 1 - xi
                off = off * np.where(active == 1, 1.0 - abs(b), 1.0)
            xj = V[:, j]
            g[:, 0] = np.where(xj == 1, 1.0 - off, off)
            g[:, 1] = xj
        L = (L[:, :, None] * g[:, None, :]).reshape(R, -1)
    return L


def _intervention_loglik(spec, V, counts):
    total = 0.0
    for i in spec.intervened:
        q = spec.prob(i)
        on = float(counts[V[:, i] == 1].sum())
        total += on * math.log(q) + (float(counts.sum()) - on) * math.log(1.0 - q)
    return total


def e_step(state, dataset):
    """Posterior over disturbance configurations per observed row, plus the LL.

    The log-likelihood includes the (parameter-free) intervention factors, so
    it is the actual data log-likelihood under the current model.
    """
    results = []
    loglik = 0.0
    for entry in dataset.entries:
        nz = np.flatnonzero(entry.counts)
        V = bits.decode_configs(nz, entry.m)
        counts = entry.counts[nz]
        L = _likelihood_rows(state.links, state.order, entry.spec, V)
        w = L * state.disturbance[None, :]
        denom = w.sum(axis=1)
        if np.any(denom <= 0.0):
            bad = nz[np.flatnonzero(denom <= 0.0)[0]]
            raise ImpossibleDataError(
                f"observed configuration {bad} has zero probability under the current model"
            )
        results.append(EStepEntry(entry.spec, V, counts, w / denom[:, None]))
        loglik += float(counts @ np.log(denom)) + _intervention_loglik(entry.spec, V, counts)
    return results, loglik


# ---- M-step: links ------------------------------------------------------------


@dataclass(frozen=True)
class LinkObjective:
    """Expected log-likelihood of one node's incoming magnitudes.

    A is the context-by-parent active-indicator matrix (signs already folded
    in); w1 and w0 are the posterior weights of the node being on and off with
    its own disturbance off, per parent context.
    """

    A: np.ndarray
    w1: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        # rows with on-weight, split out once: value/gradient run in a hot loop
        on = np.flatnonzero(self.w1 > 0.0)
        object.__setattr__(self, "_on", on)
        object.__setattr__(self, "_A_on", np.ascontiguousarray(self.A[on]))
        object.__setattr__(self, "_w1_on", self.w1[on])
        object.__setattr__(self, "_AT", np.ascontiguousarray(self.A.T))

    def value(self, m):
        logq1p = np.log1p(-m)
        q_on = np.exp(self._A_on @ logq1p)
        on = self._w1_on @ np.log(np.maximum(1.0 - q_on, 1e-300))
        return float(on + self.w0 @ (self.A @ logq1p))

    def gradient(self, m):
        q = np.exp(self.A @ np.log1p(-m))
        ratio = np.zeros(len(self.w1))
        q_on = q[self._on]
        ratio[self._on] = self._w1_on * q_on / np.maximum(1.0 - q_on, 1e-300)
        return (self._AT @ (ratio - self.w0)) / (1.0 - m)


def node_objective(estep_results, order, position):
    """Aggregate per-context weights for the node at a causal position.

    Returns (parent index tuple, builder) where builder(signs) yields the
    LinkObjective for given parent signs.  Weights pool every experiment in
    which the node is not intervened.
    """
    j = order[position]
    preds = order[:position]
    n = len(order)
    w1 = np.zeros(1 << position)
    w0 = np.zeros(1 << position)
    e_off = bits.bit_column(n, position) == 0
    for res in estep_results:
        if j in res.spec.intervened:
            continue
        h = bits.encode_rows(res.configs[:, list(preds)]) if position else np.zeros(
            len(res.counts), dtype=int
        )
        weight = res.counts * res.posterior[:, e_off].sum(axis=1)
        on = res.configs[:, j] == 1
        np.add.at(w1, h[on], weight[on])
        np.add.at(w0, h[~on], weight[~on])

    def build(signs):
        h = np.arange(1 << position)
        A = np.empty((1 << position, position))
        for k in range(position):
            bit = (h >> (position - 1 - k)) & 1
            A[:, k] = bit if signs[k] > 0 else 1 - bit
        keep = (w1 + w0) > 0.0
        return LinkObjective(A[keep], w1[keep], w0[keep])

    return preds, build


def _ascend(obj, m, tol, max_iters):
    """Backtracking gradient ascent on sigmoid-mapped magnitudes.

    Monotone by construction: a step is only taken when it improves the
    objective.  Returns (new magnitudes, stuck flag); stuck means the gradient
    was clearly nonzero yet no step length improved anything.
    """
    theta = np.log(m) - np.log1p(-m)
    f = obj.value(m)
    stuck = False
    step = 1.0
    for _ in range(max_iters):
        g = obj.gradient(m) * m * (1.0 - m)
        gnorm = float(g @ g)
        if gnorm < 1e-24:
            break
        # resume near the last accepted step; saves most backtracking trials
        step = min(1.0, 4.0 * step)
        while step > 1e-12:
            cand = expit(theta + step * g)
            cand = np.clip(cand, MAG_FLOOR, 1.0 - MAG_FLOOR)
            f_cand = obj.value(cand)
            if f_cand > f + 1e-4 * step * gnorm:
                break
            step *= 0.5
        else:
            stuck = gnorm > 1e-12
            break
        theta = theta + step * g
        gain, m, f = f_cand - f, cand, f_cand
        if gain < tol:
            break
    return m, stuck


def m_step_links(state, estep_results, config):
    """Refit all link magnitudes node by node, signs held fixed.

    Nodes whose ascent cannot improve despite a nonzero gradient keep their
    previous values and are reported back for diagnostics.
    """
    order = state.order
    new_links = dict(state.links)
    stuck_nodes = []
    for position in range(1, len(order)):
        j = order[position]
        preds, build = node_objective(estep_results, order, position)
        signs = [1.0 if state.links[(i, j)] >= 0 else -1.0 for i in preds]
        obj = build(signs)
        if obj.w1.size == 0:
            continue
        m = np.clip(
            np.array([abs(state.links[(i, j)]) for i in preds]), MAG_FLOOR, 1.0 - MAG_FLOOR
        )
        m_new, stuck = _ascend(obj, m, config.inner_tol, config.max_inner_iters)
        if stuck:
            stuck_nodes.append(j)
            continue
        for k, i in enumerate(preds):
            new_links[(i, j)] = signs[k] * float(m_new[k])
    return new_links, stuck_nodes


def m_step_disturbance(estep_results, map_pseudo=0.0):
    """Posterior-weighted relative frequency of disturbance configurations."""
    total = None
    for res in estep_results:
        contrib = res.counts @ res.posterior
        total = contrib if total is None else total + contrib
    total = total + map_pseudo
    return total / total.sum()


# ---- driver -------------------------------------------------------------------


def _random_init(dataset, order, rng):
    links = {}
    for i, j in _pairs(order):
        sign = 1.0
        for entry in dataset.entries:
            if i in entry.spec.intervened and j not in entry.spec.intervened:
                try:
                    sign = 1.0 if causal_power(entry, i, j).value >= 0 else -1.0
                except UnreliableEstimateError:
                    pass
                break
        links[(i, j)] = sign * rng.uniform(0.1, 0.9)
    disturbance = np.full(1 << len(order), 1.0 / (1 << len(order)))
    return links, disturbance


def _ec_init(dataset, order, rng):
    from .ec import run_ec

    fitted = run_ec(dataset, order=order, quick_disturbance=True)
    links = {}
    for i, j in _pairs(order):
        b = fitted.model.links.get((i, j))
        links[(i, j)] = b if b is not None else rng.uniform(0.05, 0.15)
    disturbance = bits.permute_positions(
        fitted.model.disturbance_by_index(), order
    )
    # interior start: posteriors need every configuration reachable
    disturbance = 0.99 * disturbance + 0.01 / disturbance.size
    return links, disturbance


def fit_once(dataset, order, init_links, init_disturbance, config):
    """One EM run from a given starting point; returns the final state.

    The monotone quantity (and hence the trace and convergence criterion) is
    the data log-likelihood, plus the Dirichlet pseudo-count term when the MAP
    prior is on: the M-step maximizes the penalized expected log-likelihood,
    so only the penalized total is guaranteed non-decreasing.
    """
    state = EmState(tuple(order), dict(init_links), np.asarray(init_disturbance, dtype=float))
    n_total = float(dataset.total)
    pseudo = config.map_scale * n_total / (1 << len(order)) if config.map_prior else 0.0
    prev_obj = -np.inf
    prev_params = None
    converged = False
    ll = obj = -np.inf
    for iteration in range(config.max_iters):
        results, ll = e_step(state, dataset)
        state.posteriors = results
        obj = ll
        if pseudo > 0.0:
            obj += pseudo * float(np.log(np.maximum(state.disturbance, 1e-300)).sum())
        params = np.array(
            [state.links[k] for k in sorted(state.links)] + list(state.disturbance)
        )
        delta = float(np.max(np.abs(params - prev_params))) if prev_params is not None else None
        state.trace.append((iteration, obj, delta))
        if obj < prev_obj - 1e-8:
            raise EmDivergedError(
                f"objective decreased from {prev_obj} to {obj} at iteration {iteration}"
            )
        if iteration > 0 and abs(obj - prev_obj) < config.tol:
            converged = True
            break
        prev_obj = obj
        prev_params = params
        new_links, stuck = m_step_links(state, results, config)
        state.links = new_links
        state.disturbance = m_step_disturbance(results, pseudo)
        state.stuck_nodes.update(stuck)
    return state, obj, ll, converged


def run_em(dataset, config=EmConfig(), order=None):
    """EM with restarts; the best final log-likelihood wins.

    The first start comes from a quick minimal-conditioning fit when
    `config.init` is "auto" (falling back to a random draw if that fit fails);
    the remaining starts are random.  Returns a LearnedModel whose model keeps
    every nonzero link; diagnostics carry the complete estimate map, the
    pruned edge list for structural readings, and the per-iteration trace.
    """
    if dataset.n > MAX_EM_VARS:
        raise ModelTooLargeError(
            f"posterior tables are 2**{dataset.n} wide; capped at {MAX_EM_VARS} variables"
        )
    if order is None:
        order = find_causal_order(dataset).order
    seq = order.order if hasattr(order, "order") else tuple(order)
    runs = []
    for r in range(max(1, config.restarts)):
        rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), r]))
        kind = "random"
        if r == 0 and config.init == "auto":
            try:
                links, disturbance = _ec_init(dataset, seq, rng)
                kind = "ec"
            except NoisyOrError:
                links, disturbance = _random_init(dataset, seq, rng)
        else:
            links, disturbance = _random_init(dataset, seq, rng)
        state, obj, ll, converged = fit_once(dataset, seq, links, disturbance, config)
        runs.append(
            {"init": kind, "objective": obj, "loglik": ll, "converged": converged, "state": state}
        )
    best = max(runs, key=lambda run: run["objective"])
    state = best["state"]
    names = dataset.names
    model_links = {k: b for k, b in state.links.items() if abs(b) > 1e-9}
    model = Model(names, seq, model_links, state.disturbance)
    all_links = [
        {"from": names[i], "to": names[j], "b": b}
        for (i, j), b in sorted(state.links.items(), key=lambda kv: kv[0])
    ]
    diagnostics = {
        "method": "em",
        "order": [names[v] for v in seq],
        "loglik": best["loglik"],
        "objective": best["objective"],
        "converged": best["converged"],
        "iterations": len(state.trace),
        "restarts": [
            {k: run[k] for k in ("init", "objective", "loglik", "converged")} for run in runs
        ],
        "all_links": all_links,
        "pruned_links": [
            rec for rec in all_links if abs(rec["b"]) >= config.prune_threshold
        ],
        "prune_threshold": config.prune_threshold,
        "map_prior": config.map_prior,
        "stuck_nodes": sorted(names[j] for j in state.stuck_nodes),
        "trace": [
            {"iteration": it, "loglik": ll, "max_param_delta": d}
            for it, ll, d in state.trace
        ],
    }
    return LearnedModel(model, diagnostics)
