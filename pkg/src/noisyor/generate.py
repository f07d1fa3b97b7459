"""Random model generation, confounding control, and ancestral sampling.

Random models follow a fixed protocol: a uniformly random causal order, a
parent count per node drawn uniformly between zero and the cap, parents drawn
uniformly without replacement from the node's predecessors, link magnitudes
uniform on a range with a configurable fraction of negative signs, and a
Dirichlet joint disturbance.  Models meant for hidden-variable studies place
their latent variables first in the causal order so an observed-margin view
can drop a prefix.

Sampling draws, for each batch of samples, first the intervened values, then
the joint disturbance configurations, then one firing indicator per link in
link order, then (for interactive models) the pair-interaction indicators.
This fixed draw order makes an interactive model with all interaction
probabilities zero reproduce the base model's samples bit for bit under the
same seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import bits
from .data import Dataset, DatasetEntry, spec_id
from .errors import DataError
from .model import Distribution, ExperimentSpec, Model, exact_distribution


def derive_rng(seed, *keys):
    """Independent generator for (seed, keys); stable across processes."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class GenConfig:
    """Knobs for the random-model protocol."""

    n_observed: int
    n_latent: int = 0
    max_parents: int = 2
    link_range: tuple[float, float] = (0.1, 0.9)
    negative_fraction: float = 0.5
    dirichlet_alpha: float = 1.0
    confounded: bool = True
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.link_range
        if not 0.0 < lo <= hi < 1.0:
            raise DataError("link_range must satisfy 0 < lo <= hi < 1")
        if not 0.0 <= self.negative_fraction <= 1.0:
            raise DataError("negative_fraction must lie in [0, 1]")
        if self.n_observed < 1 or self.n_latent < 0:
            raise DataError("need at least one observed variable")
        if self.dirichlet_alpha <= 0:
            raise DataError("dirichlet_alpha must be positive")

    @property
    def n_total(self):
        return self.n_observed + self.n_latent


def random_model(config, rng=None):
    """Draw a model from the protocol in `config`.

    Latent variables (when any) are named L1.. and occupy the first causal
    positions; observed ones are named X1.. in random relative order.  With
    `confounded` the joint disturbance is Dirichlet over all configurations;
    without it each disturbance term is independent with a uniform marginal.
    """
    rng = _as_rng(config.seed if rng is None else rng)
    n = config.n_total
    latent = [f"L{k + 1}" for k in range(config.n_latent)]
    observed = [f"X{k + 1}" for k in range(config.n_observed)]
    names = tuple(latent + observed)
    lat_idx = list(range(config.n_latent))
    obs_idx = list(range(config.n_latent, n))
    order = tuple(rng.permutation(lat_idx).tolist() + rng.permutation(obs_idx).tolist())

    lo, hi = config.link_range
    links = {}
    for p in range(1, n):
        k_max = min(config.max_parents, p)
        k = int(rng.integers(0, k_max + 1))
        if k == 0:
            continue
        parent_positions = rng.choice(p, size=k, replace=False)
        for pp in sorted(int(q) for q in parent_positions):
            mag = rng.uniform(lo, hi)
            sign = -1.0 if rng.random() < config.negative_fraction else 1.0
            links[(order[pp], order[p])] = sign * mag

    if config.confounded:
        disturbance = rng.dirichlet(np.full(1 << n, config.dirichlet_alpha))
    else:
        disturbance = np.ones(1)
        for _ in range(n):
            leak = rng.uniform(0.0, 1.0)
            disturbance = np.kron(disturbance, np.array([1.0 - leak, leak]))
    return Model(names, order, links, disturbance)


def mix_confounding(model, x):
    """Interpolate the joint disturbance toward its independent product.

    x = 1 keeps the original joint; x = 0 replaces it with the product of its
    marginals, removing all confounding while preserving each disturbance
    term's individual rate.
    """
    if not 0.0 <= x <= 1.0:
        raise DataError("mixing weight must lie in [0, 1]")
    n = model.n
    joint = model.disturbance
    product = np.ones(1)
    for p in range(n):
        rate = float(joint[bits.bit_column(n, p) == 1].sum())
        product = np.kron(product, np.array([1.0 - rate, rate]))
    return model.with_disturbance(x * joint + (1.0 - x) * product)


# ---- interactive extension ---------------------------------------------------


_STATES = ("pp", "pm", "mp", "mm")


@dataclass(frozen=True, eq=False)
class InteractiveModel:
    """A model extended with pairwise interaction terms.

    For a node k and a pair (i, j) of earlier variables, the four
    probabilities give the chance of an extra activation of k in each joint
    state of (X_i, X_j): on-on, on-off, off-on, off-off.  Zero probabilities
    are allowed; an all-zero extension behaves exactly like the base model.
    """

    base: Model
    interactions: dict[tuple[int, int, int], tuple[float, float, float, float]]

    def __post_init__(self):
        inter = {}
        pos = self.base._pos
        for (k, i, j), probs in self.interactions.items():
            k, i, j = int(k), int(i), int(j)
            if not pos[i] < pos[j] < pos[k]:
                raise DataError(
                    f"interaction ({k}, {i}, {j}) must name two distinct earlier variables"
                )
            probs = tuple(float(p) for p in probs)
            if len(probs) != 4 or any(not 0.0 <= p <= 1.0 for p in probs):
                raise DataError("interaction probabilities must be four values in [0, 1]")
            inter[(k, i, j)] = probs
        object.__setattr__(self, "interactions", inter)

    @property
    def n(self):
        return self.base.n

    @property
    def names(self):
        return self.base.names

    @property
    def order(self):
        return self.base.order

    @property
    def links(self):
        return self.base.links

    @property
    def disturbance(self):
        return self.base.disturbance

    @property
    def _pos(self):
        return self.base._pos

    def position(self, i):
        return self.base.position(i)

    def activation_without_disturbance(self, p):
        act = self.base.activation_without_disturbance(p)
        off = 1.0 - act
        k = self.base.order[p]
        h = np.arange(1 << p)
        for (kk, i, j), probs in self.interactions.items():
            if kk != k:
                continue
            pi, pj = self.base.position(i), self.base.position(j)
            xi = (h >> (p - 1 - pi)) & 1
            xj = (h >> (p - 1 - pj)) & 1
            state = (1 - xi) * 2 + (1 - xj)  # 0=pp, 1=pm, 2=mp, 3=mm
            off = off * (1.0 - np.asarray(probs)[state])
        return 1.0 - off

    def to_json(self):
        obj = self.base.to_json()
        names = self.base.names
        pos = self.base._pos
        records = sorted(self.interactions.items(), key=lambda kv: (pos[kv[0][0]], pos[kv[0][1]], pos[kv[0][2]]))
        obj["interactions"] = [
            {
                "node": names[k],
                "pair": [names[i], names[j]],
                **{s: p for s, p in zip(_STATES, probs)},
            }
            for (k, i, j), probs in records
        ]
        return obj

    @classmethod
    def from_json(cls, obj):
        base = Model.from_json(obj)
        idx = {s: k for k, s in enumerate(base.names)}
        inter = {}
        for rec in obj.get("interactions", []):
            k = idx[rec["node"]]
            i, j = (idx[s] for s in rec["pair"])
            inter[(k, i, j)] = tuple(float(rec[s]) for s in _STATES)
        return cls(base, inter)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def interactive_from(model, y, rng):
    """Extend `model` with interaction probabilities drawn uniformly on [0, y].

    One four-value block is drawn for every unordered pair of parents each
    node actually has, in causal-position order.  y = 0 yields an extension
    whose samples match the base model exactly under a shared seed.
    """
    if not 0.0 <= y <= 1.0:
        raise DataError("interaction level y must lie in [0, 1]")
    rng = _as_rng(rng)
    pos = model._pos
    inter = {}
    for p in range(model.n):
        k = model.order[p]
        parents = model.parents(k)
        for a in range(len(parents)):
            for b in range(a + 1, len(parents)):
                i, j = parents[a], parents[b]
                inter[(k, i, j)] = tuple(rng.uniform(0.0, y, size=4).tolist())
    return InteractiveModel(model, inter)


# ---- sampling ----------------------------------------------------------------


def sample(model_like, spec, n_samples, seed):
    """Ancestral samples under an intervention, returned as a counts table.

    `model_like` is a Model or InteractiveModel; `seed` is an int or a numpy
    Generator.  The counts table uses the dataset layout (variable 0 as the
    most significant bit) and the same (model, spec, n_samples, seed) always
    reproduces the same table.
    """
    if n_samples <= 0:
        raise DataError("need a positive sample count")
    rng = _as_rng(seed)
    base = model_like.base if isinstance(model_like, InteractiveModel) else model_like
    n = base.n
    order, pos = base.order, base._pos
    values = np.zeros((n_samples, n), dtype=np.int8)

    for i in sorted(spec.intervened, key=lambda v: pos[v]):
        values[:, i] = rng.random(n_samples) < spec.prob(i)

    e_idx = rng.choice(1 << n, size=n_samples, p=base.disturbance)
    e_bits = bits.decode_configs(e_idx, n)  # columns indexed by causal position

    link_items = sorted(base.links.items(), key=lambda kv: (pos[kv[0][0]], pos[kv[0][1]]))
    fires = {key: rng.random(n_samples) < abs(b) for key, b in link_items}

    inter_draws = {}
    if isinstance(model_like, InteractiveModel):
        records = sorted(
            model_like.interactions.items(), key=lambda kv: (pos[kv[0][0]], pos[kv[0][1]], pos[kv[0][2]])
        )
        for key, probs in records:
            inter_draws[key] = np.stack(
                [rng.random(n_samples) < q for q in probs], axis=1
            )

    for p in range(n):
        j = order[p]
        if j in spec.intervened:
            continue
        on = e_bits[:, p].astype(bool)
        for (i, jj), b in link_items:
            if jj != j:
                continue
            parent = values[:, i].astype(bool)
            active = parent if b > 0 else ~parent
            on |= active & fires[(i, jj)]
        for (kk, i, jj), draws in inter_draws.items():
            if kk != j:
                continue
            xi = values[:, i].astype(bool)
            xj = values[:, jj].astype(bool)
            state = (~xi).astype(int) * 2 + (~xj).astype(int)
            on |= draws[np.arange(n_samples), state]
        values[:, j] = on

    counts = np.bincount(bits.encode_rows(values), minlength=1 << n).astype(float)
    return DatasetEntry(spec, counts, spec_id(spec, base.names))


def sample_dataset(model_like, specs, counts_per_spec, seed):
    """One entry per experiment; per-experiment generators derive from `seed`.

    `counts_per_spec` is an int applied to every experiment or a sequence
    aligned with `specs`.
    """
    base = model_like.base if isinstance(model_like, InteractiveModel) else model_like
    if np.isscalar(counts_per_spec):
        counts_per_spec = [int(counts_per_spec)] * len(specs)
    if len(counts_per_spec) != len(specs):
        raise DataError("counts_per_spec length disagrees with specs")
    entries = []
    for k, (spec, c) in enumerate(zip(specs, counts_per_spec)):
        entries.append(sample(model_like, spec, int(c), derive_rng(seed, k)))
    return Dataset(base.names, tuple(entries))


# ---- observed-margin views ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class LatentView:
    """A model watched through its observed suffix.

    The hidden variables must occupy the first `latent_count` causal
    positions.  The view exposes names, exact distributions, and samples over
    the observed variables only, indexed 0..m-1 in causal order.
    """

    full: Model | InteractiveModel
    latent_count: int

    def __post_init__(self):
        if not 0 <= self.latent_count < self.full.n:
            raise DataError("latent prefix must leave at least one observed variable")

    @property
    def n(self):
        return self.full.n - self.latent_count

    @property
    def names(self):
        full = self.full
        return tuple(full.names[full.order[p]] for p in range(self.latent_count, full.n))

    def _full_spec(self, spec):
        order = self.full.order
        members = {order[self.latent_count + i]: spec.prob(i) for i in spec.intervened}
        return ExperimentSpec(frozenset(members), members)

    def exact_distribution(self, spec=None):
        spec = spec if spec is not None else ExperimentSpec(frozenset())
        dist = exact_distribution(self.full, self._full_spec(spec))
        probs = dist.probs.reshape(1 << self.latent_count, -1).sum(axis=0)
        return Distribution(probs, tuple(range(self.n)))

    def sample(self, spec, n_samples, seed):
        spec = spec if spec is not None else ExperimentSpec(frozenset())
        full_entry = sample(self.full, self._full_spec(spec), n_samples, seed)
        # Full-model counts are laid out by variable index; fold them into the
        # causal-position layout first, then drop the latent prefix.
        order_layout = bits.permute_positions(full_entry.counts, self.full.order)
        counts = order_layout.reshape(1 << self.latent_count, -1).sum(axis=0)
        return DatasetEntry(spec, counts, spec_id(spec, self.names))

    def observed_links(self):
        """Links between observed variables, keyed by view indices."""
        full = self.full
        pos = full._pos
        L = self.latent_count
        out = {}
        for (i, j), b in full.links.items():
            if pos[i] >= L and pos[j] >= L:
                out[(pos[i] - L, pos[j] - L)] = b
        return out


def marginalize_latents(model_like, latent_count):
    """View of `model_like` with its first `latent_count` causal positions hidden."""
    return LatentView(model_like, latent_count)
