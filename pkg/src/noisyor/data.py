"""Datasets: per-experiment counts over observed configurations, plus file IO.

A dataset couples a variable-name tuple with one counts table per experiment.
Counts tables are laid out over the 2**m joint configurations of the named
variables with variable 0 (the first name) as the most significant bit; this
is independent of any causal order, which is generally unknown when data is
collected.  Counts are floats so that exactly computed distributions can be
fed through the same estimation code paths as finite samples.

The delimited format is one row per observed configuration per experiment::

    experiment_id,intervened_vars,X1,X2,X3,count
    passive,,0,1,0,143
    do(X1),X1:0.5,1,1,0,88

The intervened_vars cell holds name:probability pairs joined by ';', making
files self-contained for learning.  Configurations absent from the file have
count zero.  A companion manifest lists the experiments as JSON.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import bits
from .errors import DataError
from .model import Distribution, ExperimentSpec, exact_distribution, passive_spec, single_spec


def spec_id(spec, names):
    if spec.is_passive:
        return "passive"
    members = sorted(spec.intervened)
    return "do(" + ",".join(names[i] for i in members) + ")"


@dataclass(frozen=True, eq=False)
class DatasetEntry:
    """Counts over observed configurations gathered under one experiment."""

    spec: ExperimentSpec
    counts: np.ndarray
    exp_id: str = ""

    def __post_init__(self):
        counts = np.array(self.counts, dtype=float)
        if counts.ndim != 1 or counts.size & (counts.size - 1):
            raise DataError("counts must be a vector of length 2**m")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise DataError("counts must be finite and nonnegative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def m(self):
        return self.counts.size.bit_length() - 1

    @property
    def total(self):
        return float(self.counts.sum())

    def frequencies(self):
        total = self.total
        if total <= 0:
            raise DataError("entry holds no samples")
        return self.counts / total


@dataclass(frozen=True, eq=False)
class Dataset:
    names: tuple[str, ...]
    entries: tuple[DatasetEntry, ...]

    def __post_init__(self):
        names = tuple(str(s) for s in self.names)
        entries = tuple(self.entries)
        for e in entries:
            if e.m != len(names):
                raise DataError("entry size disagrees with variable names")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self):
        return len(self.names)

    def passive_entry(self):
        for e in self.entries:
            if e.spec.is_passive:
                return e
        return None

    @property
    def total(self):
        return sum(e.total for e in self.entries)


def default_battery(n, p=0.5, include_passive=True):
    """Passive observation plus one single-variable intervention per variable."""
    specs = [passive_spec()] if include_passive else []
    specs.extend(single_spec(i, p) for i in range(n))
    return specs


def all_k_var_specs(n, k, p=0.5):
    from itertools import combinations

    from .model import multi_spec

    return [multi_spec(c, p) for c in combinations(range(n), k)]


def entry_from_distribution(dist, spec, total, exp_id=""):
    """Fractional counts proportional to an exact distribution.

    The distribution's probabilities are converted to the index-ordered
    layout used by datasets and scaled by `total`.
    """
    counts = dist.by_index_order() * float(total)
    return DatasetEntry(spec, counts, exp_id)


def expected_counts_dataset(model_like, specs, total=1e9):
    """Dataset of expected (fractional) counts under exact distributions.

    Each experiment receives weight `total`; estimators then see their
    infinite-sample values while exercising the finite-sample code paths.
    Accepts anything with an exact_distribution method (latent views) or
    anything the module-level exact_distribution handles.
    """
    names = model_like.names
    entries = []
    for spec in specs:
        if hasattr(model_like, "exact_distribution"):
            dist = model_like.exact_distribution(spec)
        else:
            dist = exact_distribution(model_like, spec)
        entries.append(entry_from_distribution(dist, spec, total, spec_id(spec, names)))
    return Dataset(tuple(names), tuple(entries))


# ---- delimited counts files ------------------------------------------------


def _format_count(c):
    return str(int(c)) if float(c).is_integer() else repr(float(c))


def _intervened_cell(spec, names):
    return ";".join(f"{names[i]}:{spec.prob(i)!r}" for i in sorted(spec.intervened))


def write_dataset_csv(dataset, path):
    names = dataset.names
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment_id", "intervened_vars", *names, "count"])
        for entry in dataset.entries:
            cell = _intervened_cell(entry.spec, names)
            nz = np.flatnonzero(entry.counts)
            values = bits.decode_configs(nz, len(names))
            for row_idx, cfg in zip(nz, values):
                writer.writerow(
                    [entry.exp_id, cell, *cfg.tolist(), _format_count(entry.counts[row_idx])]
                )


def read_dataset_csv(path):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty dataset file") from None
        if len(header) < 4 or header[0] != "experiment_id" or header[-1] != "count":
            raise DataError(f"{path}: unrecognized dataset header {header!r}")
        names = tuple(header[2:-1])
        name_to_idx = {s: k for k, s in enumerate(names)}
        m = len(names)
        counts = {}
        cells = {}
        order_seen = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != m + 3:
                raise DataError(f"{path}:{lineno}: expected {m + 3} fields, got {len(row)}")
            exp_id, cell = row[0], row[1]
            if exp_id not in counts:
                counts[exp_id] = np.zeros(1 << m)
                cells[exp_id] = cell
                order_seen.append(exp_id)
            elif cells[exp_id] != cell:
                raise DataError(f"{path}:{lineno}: experiment {exp_id!r} changes its intervention set")
            try:
                cfg = [int(v) for v in row[2:-1]]
                c = float(row[-1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if any(v not in (0, 1) for v in cfg):
                raise DataError(f"{path}:{lineno}: configuration values must be 0 or 1")
            if c < 0:
                raise DataError(f"{path}:{lineno}: negative count")
            counts[exp_id][int(bits.encode_rows(np.array(cfg)))] += c
        entries = []
        for exp_id in order_seen:
            spec = _parse_intervened_cell(cells[exp_id], name_to_idx, path)
            entries.append(DatasetEntry(spec, counts[exp_id], exp_id))
        if not entries:
            raise DataError(f"{path}: no data rows")
        return Dataset(names, tuple(entries))


def _parse_intervened_cell(cell, name_to_idx, path):
    if not cell.strip():
        return passive_spec()
    intervened = {}
    for part in cell.split(";"):
        name, _, p = part.partition(":")
        name = name.strip()
        if name not in name_to_idx:
            raise DataError(f"{path}: intervened variable {name!r} not among columns")
        intervened[name_to_idx[name]] = float(p) if p else 0.5
    return ExperimentSpec(frozenset(intervened), intervened)


# ---- experiment manifests ----------------------------------------------------


def write_experiment_manifest(dataset, path):
    records = []
    for entry in dataset.entries:
        records.append(
            {
                "id": entry.exp_id,
                "intervened": [dataset.names[i] for i in sorted(entry.spec.intervened)],
                "probs": {dataset.names[i]: entry.spec.prob(i) for i in sorted(entry.spec.intervened)},
                "total_count": entry.total,
            }
        )
    with open(path, "w") as fh:
        json.dump({"variables": list(dataset.names), "experiments": records}, fh, indent=2)
        fh.write("\n")


def read_experiment_specs(path, names):
    """Experiment list from a manifest-shaped JSON file."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read experiments {path}: {exc}") from exc
    name_to_idx = {s: k for k, s in enumerate(names)}
    specs = []
    for rec in obj.get("experiments", []):
        try:
            members = [name_to_idx[s] for s in rec.get("intervened", [])]
        except KeyError as exc:
            raise DataError(f"{path}: unknown variable {exc}") from exc
        probs = {name_to_idx[s]: float(p) for s, p in rec.get("probs", {}).items()}
        specs.append(ExperimentSpec(frozenset(members), {i: probs.get(i, 0.5) for i in members}))
    if not specs:
        raise DataError(f"{path}: no experiments listed")
    return specs
