"""Scoring metrics and the three reference studies.

Metrics compare a learned model against the generating one: linear correlation
of link parameter vectors, structural error rates over the skeleton, Pearson
correlation of disturbance vectors, and KL divergence of interventional
distributions (direction fixed as KL(true || estimated)).

The studies mirror the standard protocols at desk scale: an accuracy study
over total sample size, a scalability study over model size with a hidden
variable prefix, and a robustness study over a grid of confounding and
interaction levels.  Replicates draw independent generator streams from
(seed, condition, replicate), so results are bit-reproducible and replicates
can run in any order or in parallel.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from . import bits
from .data import Dataset, all_k_var_specs, default_battery
from .ec import run_ec
from .em import EmConfig, run_em
from .errors import DataError, NoisyOrError
from .generate import (
    GenConfig,
    derive_rng,
    interactive_from,
    marginalize_latents,
    mix_confounding,
    random_model,
    sample_dataset,
)
from .identify import run_id
from .model import ExperimentSpec, exact_distribution, single_spec

KL_DIRECTION = "KL(true || estimated)"


# ---- metrics ------------------------------------------------------------------


def _link_map(est, prune_threshold=0.0):
    """Signed link map keyed by (cause name, effect name).

    Accepts a Model, an InteractiveModel, a LearnedModel, or a plain dict
    already keyed by name pairs.  Learners that carry a complete parameter map
    in their diagnostics contribute it whole, so near-zero estimates
    participate as near-zeros rather than as absent edges.  Name keys make
    comparisons independent of each model's internal index layout (a model
    reloaded from JSON renumbers its variables into causal order).
    """
    if isinstance(est, dict):
        links = dict(est)
    elif hasattr(est, "diagnostics"):
        full = est.diagnostics.get("all_links")
        if full is not None:
            links = {(r["from"], r["to"]): r["b"] for r in full}
        else:
            links = _named_links(est.model)
    else:
        links = _named_links(est)
    if prune_threshold > 0.0:
        links = {k: b for k, b in links.items() if abs(b) >= prune_threshold}
    return links


def _named_links(model):
    names = model.names
    return {(names[i], names[j]): b for (i, j), b in model.links.items()}


def link_correlation(true_model, est, prune_threshold=0.0):
    """Pearson correlation between true and estimated link vectors.

    Vectors run over the union of edges present on either side, absent edges
    contributing zero.  Returns None when either vector has no variance (the
    correlation is undefined).
    """
    true_links = _link_map(true_model)
    est_links = _link_map(est, prune_threshold)
    keys = sorted(set(true_links) | set(est_links))
    if not keys:
        return None
    t = np.array([true_links.get(k, 0.0) for k in keys])
    e = np.array([est_links.get(k, 0.0) for k in keys])
    if t.std() == 0.0 or e.std() == 0.0:
        return None
    return float(np.corrcoef(t, e)[0, 1])


def _name_permutation(from_names, to_names):
    """new_to_old map so axis t of the result holds to_names[t]."""
    idx = {s: k for k, s in enumerate(from_names)}
    if sorted(from_names) != sorted(to_names):
        raise DataError("models disagree on variable names")
    return [idx[s] for s in to_names]


def disturbance_correlation(true_model, est):
    """Pearson correlation of the joint disturbance vectors.

    Vectors are aligned by variable name, so models with different internal
    index layouts compare correctly.
    """
    model = est.model if hasattr(est, "model") else est
    t = true_model.disturbance_by_index()
    e = model.disturbance_by_index()
    if tuple(model.names) != tuple(true_model.names):
        e = bits.permute_positions(e, _name_permutation(model.names, true_model.names))
    if t.std() == 0.0 or e.std() == 0.0:
        return None
    return float(np.corrcoef(t, e)[0, 1])


@dataclass(frozen=True)
class StructuralErrors:
    additions: float
    deletions: float
    reversals: int


def structural_errors(true_model, est, n=None, prune_threshold=0.0):
    """Skeleton error rates: spurious edges, missed edges, flipped edges.

    Rates are computed over unordered pairs: additions over true non-edges,
    deletions over true edges.  A reversal counts once and does not also count
    as an addition plus a deletion.
    """
    true_links = _link_map(true_model)
    est_links = _link_map(est, prune_threshold)
    if n is None:
        if hasattr(true_model, "n"):
            n = true_model.n
        elif hasattr(est, "model"):
            n = est.model.n
        else:
            raise DataError("pass n when both sides are plain link maps")
    true_u = {frozenset(k) for k in true_links}
    est_u = {frozenset(k) for k in est_links}
    non_edges = n * (n - 1) // 2 - len(true_u)
    added = len(est_u - true_u)
    deleted = len(true_u - est_u)
    reversals = sum(
        1
        for k in true_links
        if (k[1], k[0]) in est_links and k not in est_links
    )
    return StructuralErrors(
        added / non_edges if non_edges else 0.0,
        deleted / len(true_u) if true_u else 0.0,
        reversals,
    )


def interventional_kl(true_like, est_model, spec):
    """KL(true || estimated) over joint configurations under one experiment.

    `spec` is phrased in the true model's variable indices; the estimate is
    aligned by name.  Infinity when the estimate puts zero mass where the
    truth has support.
    """
    if hasattr(true_like, "exact_distribution"):
        true_dist = true_like.exact_distribution(spec)
    else:
        true_dist = exact_distribution(true_like, spec)
    true_names = tuple(true_like.names)
    est_spec = spec
    if tuple(est_model.names) != true_names:
        remap = {s: k for k, s in enumerate(est_model.names)}
        if sorted(est_model.names) != sorted(true_names):
            raise DataError("models disagree on variable names")
        est_spec = ExperimentSpec(
            frozenset(remap[true_names[i]] for i in spec.intervened),
            {remap[true_names[i]]: spec.prob(i) for i in spec.intervened},
        )
    p = true_dist.by_index_order()
    q = exact_distribution(est_model, est_spec).by_index_order()
    if est_spec is not spec:
        q = bits.permute_positions(q, _name_permutation(est_model.names, true_names))
    support = p > 0.0
    if np.any(q[support] == 0.0):
        return math.inf
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


# ---- study configuration ------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    """One study's schedule: what to vary, how often, and from which seed."""

    kind: str
    sizes: tuple[int, ...]
    samples: tuple[int, ...]
    replicates: int
    seed: int = 0
    algorithms: tuple[str, ...] = ("id", "ec", "em")
    max_parents: int = 2
    battery_prob: float = 0.5
    x_grid: tuple[float, ...] = ()
    y_grid: tuple[float, ...] = ()
    em_restarts: int = 3
    em_map: bool = False
    prune_threshold: float = 0.05

    def __post_init__(self):
        if self.kind not in ("accuracy", "scalability", "robustness"):
            raise DataError(f"unknown study kind {self.kind!r}")
        if self.replicates < 1:
            raise DataError("replicates must be at least 1")
        if not self.sizes or not self.samples:
            raise DataError("model-size and sample-size schedules must be nonempty")

    def conditions(self):
        if self.kind == "accuracy":
            return [{"total": t} for t in self.samples]
        if self.kind == "scalability":
            return [{"n": n} for n in self.sizes]
        return [{"x": x, "y": y} for x in self.x_grid for y in self.y_grid]


def accuracy_config(replicates=30, seed=2210, samples=(900, 9000, 90000)):
    return StudyConfig("accuracy", (5,), tuple(samples), replicates, seed)


def scalability_config(replicates=10, seed=2211, sizes=(4, 5, 6, 7, 8, 9, 10), samples=(1000,)):
    return StudyConfig(
        "scalability", tuple(sizes), tuple(samples), replicates, seed, algorithms=("ec",)
    )


def robustness_config(
    replicates=5, seed=2212, x_grid=(0.0, 0.5, 1.0), y_grid=(0.0, 0.25, 0.5), samples=(10000,)
):
    return StudyConfig(
        "robustness",
        (5,),
        tuple(samples),
        replicates,
        seed,
        algorithms=("em",),
        x_grid=tuple(x_grid),
        y_grid=tuple(y_grid),
        em_map=True,
        em_restarts=2,
    )


def _sub_seed(seed, *keys):
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


def _row(cond, rep, algorithm, metric, value, note=""):
    return {
        "condition": cond,
        "replicate": rep,
        "algorithm": algorithm,
        "metric": metric,
        "value": value,
        "note": note,
    }


def _learn(algo, dataset, cfg, seed):
    if algo == "id":
        return run_id(dataset)
    if algo == "ec":
        return run_ec(dataset)
    if algo == "em":
        em_cfg = EmConfig(
            restarts=cfg.em_restarts,
            map_prior=cfg.em_map,
            prune_threshold=cfg.prune_threshold,
            seed=seed,
        )
        return run_em(dataset, em_cfg)
    raise DataError(f"unknown algorithm {algo!r}")


def _score_against(true_model, learned, cond, rep, algo, prune):
    rows = []
    corr = link_correlation(true_model, learned)
    rows.append(_row(cond, rep, algo, "link_correlation", corr, "" if corr is not None else "missing"))
    pruned = link_correlation(true_model, learned, prune_threshold=prune)
    rows.append(
        _row(cond, rep, algo, "link_correlation_pruned", pruned, "" if pruned is not None else "missing")
    )
    dcorr = disturbance_correlation(true_model, learned)
    rows.append(
        _row(cond, rep, algo, "disturbance_correlation", dcorr, "" if dcorr is not None else "missing")
    )
    threshold = prune if algo == "em" else 0.0
    errs = structural_errors(true_model, learned, prune_threshold=threshold)
    rows.append(_row(cond, rep, algo, "addition_rate", errs.additions))
    rows.append(_row(cond, rep, algo, "deletion_rate", errs.deletions))
    rows.append(_row(cond, rep, algo, "reversals", float(errs.reversals)))
    return rows


def _accuracy_replicate(cfg, cond_idx, rep):
    cond = cfg.conditions()[cond_idx]
    n = cfg.sizes[0]
    model = random_model(
        GenConfig(n_observed=n, max_parents=cfg.max_parents),
        rng=derive_rng(cfg.seed, cond_idx, rep, 0),
    )
    battery = default_battery(n, cfg.battery_prob)
    per = cond["total"] // len(battery)
    dataset = sample_dataset(model, battery, per, _sub_seed(cfg.seed, cond_idx, rep, 1))
    rows = []
    for k, algo in enumerate(cfg.algorithms):
        try:
            learned = _learn(algo, dataset, cfg, _sub_seed(cfg.seed, cond_idx, rep, 2, k))
        except NoisyOrError as exc:
            rows.append(_row(cond, rep, algo, "failed", 1.0, str(exc)))
            continue
        rows.extend(_score_against(model, learned, cond, rep, algo, cfg.prune_threshold))
    return rows


def _scalability_replicate(cfg, cond_idx, rep):
    cond = cfg.conditions()[cond_idx]
    n = cond["n"]
    latent = n // 2
    full = random_model(
        GenConfig(n_observed=n, n_latent=latent, max_parents=cfg.max_parents, confounded=False),
        rng=derive_rng(cfg.seed, cond_idx, rep, 0),
    )
    view = marginalize_latents(full, latent)
    battery = default_battery(n, cfg.battery_prob)
    per = cfg.samples[0]
    entries = tuple(
        view.sample(spec, per, derive_rng(cfg.seed, cond_idx, rep, 1, k))
        for k, spec in enumerate(battery)
    )
    dataset = Dataset(view.names, entries)
    rows = []
    try:
        learned = run_ec(dataset, quick_disturbance=True)
    except NoisyOrError as exc:
        return [_row(cond, rep, "ec", "failed", 1.0, str(exc))]
    true_links = {
        (view.names[i], view.names[j]): b for (i, j), b in view.observed_links().items()
    }
    errs = structural_errors(true_links, learned, n=n)
    rows.append(_row(cond, rep, "ec", "addition_rate", errs.additions))
    rows.append(_row(cond, rep, "ec", "deletion_rate", errs.deletions))
    rows.append(_row(cond, rep, "ec", "reversals", float(errs.reversals)))
    return rows


def _robustness_replicate(cfg, cond_idx, rep):
    cond = cfg.conditions()[cond_idx]
    n = cfg.sizes[0]
    base = random_model(
        GenConfig(n_observed=n, max_parents=cfg.max_parents),
        rng=derive_rng(cfg.seed, cond_idx, rep, 0),
    )
    generator = interactive_from(
        mix_confounding(base, cond["x"]), cond["y"], derive_rng(cfg.seed, cond_idx, rep, 2)
    )
    battery = default_battery(n, cfg.battery_prob)
    per = cfg.samples[0] // len(battery)
    dataset = sample_dataset(generator, battery, per, _sub_seed(cfg.seed, cond_idx, rep, 1))
    try:
        learned = _learn("em", dataset, cfg, _sub_seed(cfg.seed, cond_idx, rep, 3))
    except NoisyOrError as exc:
        return [_row(cond, rep, "em", "failed", 1.0, str(exc))]
    rows = []
    for label, specs in (
        ("kl_single", [single_spec(i, cfg.battery_prob) for i in range(n)]),
        ("kl_double", all_k_var_specs(n, 2, cfg.battery_prob)),
    ):
        values = [interventional_kl(generator, learned.model, spec) for spec in specs]
        finite = [v for v in values if math.isfinite(v)]
        rows.append(
            _row(
                cond,
                rep,
                "em",
                label,
                float(np.mean(finite)) if finite else None,
                "" if finite else "all infinite",
            )
        )
        rows.append(_row(cond, rep, "em", label + "_inf", float(len(values) - len(finite))))
    return rows


_REPLICATE_FUNCS = {
    "accuracy": _accuracy_replicate,
    "scalability": _scalability_replicate,
    "robustness": _robustness_replicate,
}


def study_replicate(cfg, cond_idx, rep):
    """All result rows for one (condition, replicate) cell."""
    return _REPLICATE_FUNCS[cfg.kind](cfg, cond_idx, rep)


def run_study(cfg, parallel=1):
    """Execute a study; returns (rows, summary).

    With parallel > 1 replicates run in separate processes; row order and
    content are identical either way because every replicate derives its own
    RNG streams.
    """
    tasks = [
        (cond_idx, rep)
        for cond_idx in range(len(cfg.conditions()))
        for rep in range(cfg.replicates)
    ]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            chunks = list(pool.map(partial(study_replicate, cfg), *zip(*tasks)))
    else:
        chunks = [study_replicate(cfg, c, r) for c, r in tasks]
    rows = [row for chunk in chunks for row in chunk]
    return rows, summarize(cfg, rows)


def summarize(cfg, rows):
    """Group rows into mean / standard deviation records per metric."""
    groups = {}
    for row in rows:
        key = (tuple(sorted(row["condition"].items())), row["algorithm"], row["metric"])
        groups.setdefault(key, []).append(row["value"])
    records = []
    for (cond_items, algo, metric), values in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])
    ):
        finite = [v for v in values if v is not None and math.isfinite(v)]
        record = {
            "condition": dict(cond_items),
            "algorithm": algo,
            "metric": metric,
            "count": len(finite),
            "missing": len(values) - len(finite),
            "mean": float(np.mean(finite)) if finite else None,
            "std": float(np.std(finite, ddof=1)) if len(finite) > 1 else 0.0,
        }
        records.append(record)
    return {
        "study": cfg.kind,
        "seed": cfg.seed,
        "config": asdict(cfg),
        "kl_direction": KL_DIRECTION,
        "groups": records,
    }


# ---- result files -------------------------------------------------------------


def _format_value(v):
    if v is None:
        return ""
    if math.isinf(v):
        return "inf"
    return repr(float(v))


def _format_condition(cond):
    return ";".join(f"{k}={cond[k]}" for k in sorted(cond))


def write_results_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "replicate", "algorithm", "metric", "value", "note"])
        for row in rows:
            writer.writerow(
                [
                    _format_condition(row["condition"]),
                    row["replicate"],
                    row["algorithm"],
                    row["metric"],
                    _format_value(row["value"]),
                    row["note"],
                ]
            )
