"""Core types and exact inference for noisy-OR models with joint disturbances.

A model over n binary variables consists of a causal order, a set of signed
link probabilities, and a joint distribution over the n binary disturbance
terms.  Each variable turns on when any incoming link fires from an active
parent (an inactive parent for negatively signed links) or when its own
disturbance term is on.  Because the disturbance terms may be arbitrarily
dependent, the disturbance vector ranges over all 2**n joint configurations
and encodes any pattern of latent confounding.

Configuration indexing convention, used for disturbance vectors and for the
probability vectors produced here: configurations are enumerated
lexicographically with the variable occupying causal position 0 as the most
significant bit.  Helper routines for this layout live in :mod:`noisyor.bits`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import bits
from .errors import (
    DataError,
    ModelTooLargeError,
    UndefinedConditionalError,
)

MAX_MODEL_VARS = 20

_SUM_TOLERANCE = 1e-9


def _as_prob_vector(values, length, what):
    arr = np.array(values, dtype=float)
    if arr.shape != (length,):
        raise DataError(f"{what} must have length {length}, got shape {arr.shape}")
    if np.any(arr < -1e-12) or not np.all(np.isfinite(arr)):
        raise DataError(f"{what} entries must be finite and nonnegative")
    arr = np.clip(arr, 0.0, None)
    total = arr.sum()
    if abs(total - 1.0) > _SUM_TOLERANCE:
        raise DataError(f"{what} sums to {total!r}, beyond tolerance {_SUM_TOLERANCE}")
    arr /= total
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ExperimentSpec:
    """An intervention: the set of randomized variables and their on-probabilities.

    Intervened variables are cut off from their natural causes and drawn
    independently, each with its own probability of being set to 1 (0.5 when
    not given).  An empty set describes passive observation.
    """

    intervened: frozenset[int]
    probs: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        intervened = frozenset(int(i) for i in self.intervened)
        probs = {int(i): float(p) for i, p in self.probs.items()}
        for i in probs:
            if i not in intervened:
                raise DataError(f"probability given for non-intervened variable {i}")
        for i in intervened:
            p = probs.setdefault(i, 0.5)
            if not 0.0 < p < 1.0:
                raise DataError(f"intervention probability for {i} must lie strictly in (0, 1)")
        object.__setattr__(self, "intervened", intervened)
        object.__setattr__(self, "probs", probs)

    @property
    def is_passive(self):
        return not self.intervened

    def prob(self, i):
        return self.probs[i]


def passive_spec():
    return ExperimentSpec(frozenset())


def single_spec(i, p=0.5):
    return ExperimentSpec(frozenset([i]), {i: p})


def multi_spec(indices, p=0.5):
    idx = frozenset(indices)
    return ExperimentSpec(idx, {i: p for i in idx})


@dataclass(frozen=True, eq=False)
class Model:
    """A noisy-OR model with signed links and a joint disturbance distribution.

    names
        Stable external variable names; a variable's index is its position in
        this tuple and never changes.
    order
        Permutation of variable indices: order[p] is the variable occupying
        causal position p (position 0 is the first cause).
    links
        Map from an ordered pair (i, j) of variable indices, with i strictly
        before j in the causal order, to a signed link probability b with
        0 < |b| < 1.  Positive links fire from an active parent, negative
        links from an inactive one.
    disturbance
        Probability vector of length 2**n over joint disturbance
        configurations, in the lexicographic layout described in the module
        docstring (causal position 0 is the most significant bit).
    """

    names: tuple[str, ...]
    order: tuple[int, ...]
    links: dict[tuple[int, int], float]
    disturbance: np.ndarray

    def __post_init__(self):
        names = tuple(str(s) for s in self.names)
        n = len(names)
        if n == 0:
            raise DataError("a model needs at least one variable")
        if n > MAX_MODEL_VARS:
            raise ModelTooLargeError(
                f"{n} variables exceed the cap of {MAX_MODEL_VARS} (disturbance table would "
                f"need 2**{n} entries)"
            )
        if len(set(names)) != n:
            raise DataError("variable names must be unique")
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(n)):
            raise DataError("order must be a permutation of variable indices")
        pos = {v: p for p, v in enumerate(order)}
        links = {}
        for (i, j), b in self.links.items():
            i, j, b = int(i), int(j), float(b)
            if i not in pos or j not in pos:
                raise DataError(f"link ({i}, {j}) names an unknown variable")
            if pos[i] >= pos[j]:
                raise DataError(f"link ({i}, {j}) does not respect the causal order")
            if not 0.0 < abs(b) < 1.0:
                raise DataError(f"link ({i}, {j}) has b={b!r}; need 0 < |b| < 1")
            links[(i, j)] = b
        disturbance = _as_prob_vector(self.disturbance, 1 << n, "disturbance")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "disturbance", disturbance)
        object.__setattr__(self, "_pos", pos)

    @property
    def n(self):
        return len(self.names)

    def position(self, i):
        """Causal position of variable index i."""
        return self._pos[i]

    def parents(self, j):
        """Variable indices with a link into j, sorted by causal position."""
        ps = [i for (i, jj) in self.links if jj == j]
        ps.sort(key=lambda i: self._pos[i])
        return tuple(ps)

    def index_of(self, name):
        return self.names.index(name)

    def links_by_position(self):
        """Link map keyed by (position of cause, position of effect)."""
        return {(self._pos[i], self._pos[j]): b for (i, j), b in self.links.items()}

    def activation_without_disturbance(self, p):
        """P(variable at position p turns on | predecessors, own disturbance off).

        Returns a vector over the 2**p configurations of the variables at
        positions 0..p-1 (position 0 as the most significant bit).
        """
        j = self.order[p]
        off = np.ones(1 << p)
        h = np.arange(1 << p)
        for (i, jj), b in self.links.items():
            if jj != j:
                continue
            pi = self._pos[i]
            bit = (h >> (p - 1 - pi)) & 1
            active = bit if b > 0 else 1 - bit
            off = off * np.where(active == 1, 1.0 - abs(b), 1.0)
        return 1.0 - off

    def disturbance_by_index(self):
        """Disturbance vector reindexed so variable 0 is the most significant bit."""
        n = self.n
        new_to_old = [self._pos[v] for v in range(n)]
        return bits.permute_positions(self.disturbance, new_to_old)

    def with_disturbance(self, disturbance):
        return Model(self.names, self.order, self.links, disturbance)

    # ---- serialization ----------------------------------------------------

    def to_json(self):
        link_items = sorted(self.links.items(), key=lambda kv: (self._pos[kv[0][0]], self._pos[kv[0][1]]))
        return {
            "n": self.n,
            "order": [self.names[v] for v in self.order],
            "links": [
                {"from": self.names[i], "to": self.names[j], "b": b} for (i, j), b in link_items
            ],
            "disturbance": [float(x) for x in self.disturbance],
        }

    @classmethod
    def from_json(cls, obj):
        try:
            order_names = list(obj["order"])
            n = int(obj["n"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed model record: {exc}") from exc
        if len(order_names) != n:
            raise DataError("model order length disagrees with n")
        # Indices follow the order of appearance in the file, so a loaded
        # model always has the identity causal order over its own indices.
        names = tuple(order_names)
        name_to_idx = {s: k for k, s in enumerate(names)}
        order = tuple(range(n))
        links = {}
        for rec in obj.get("links", []):
            try:
                i, j, b = name_to_idx[rec["from"]], name_to_idx[rec["to"]], float(rec["b"])
            except KeyError as exc:
                raise DataError(f"link names unknown variable: {exc}") from exc
            links[(i, j)] = b
        return cls(names, order, links, obj["disturbance"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_json(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read model {path}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over joint configurations of n binary variables.

    The bit layout matches a model's disturbance vector: the variable at
    causal position 0 (order[0]) is the most significant bit.  `order` maps
    positions back to variable indices so queries can be phrased in terms of
    stable indices.
    """

    probs: np.ndarray
    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        probs = _as_prob_vector(self.probs, 1 << len(order), "distribution")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "_pos", {v: p for p, v in enumerate(order)})

    @property
    def n(self):
        return len(self.order)

    def _mask(self, assignment):
        return bits.assignment_mask(self.n, {self._pos[i]: v for i, v in assignment.items()})

    def prob(self, assignment):
        """Probability of the (possibly partial) assignment {index: value}."""
        return float(self.probs[self._mask(assignment)].sum())

    def conditional(self, target, value, given):
        """P(target = value | given), where given maps indices to values."""
        denom = self.prob(given)
        if denom == 0.0:
            raise UndefinedConditionalError(
                f"conditioning event {given!r} has probability zero"
            )
        joint = dict(given)
        joint[target] = value
        return self.prob(joint) / denom

    def by_index_order(self):
        """Probability vector reindexed so variable 0 is the most significant bit."""
        new_to_old = [self._pos[v] for v in range(self.n)]
        return bits.permute_positions(self.probs, new_to_old)


def conditional_query(dist, target, value, given):
    """P(target = value | given) under `dist`; error on zero-probability givens."""
    return dist.conditional(target, value, given)


def node_conditional(model, j, parent_values, e_j):
    """P(X_j = 1 | parent values, own disturbance term e_j).

    `parent_values` maps every parent index of j to its 0/1 value.  With the
    disturbance on the node is on regardless of its parents; with it off the
    node stays off unless at least one incoming link fires, each link firing
    independently with probability |b| when its parent is active (value 1 for
    positive links, 0 for negative ones).
    """
    if j not in model._pos:
        raise DataError(f"unknown variable index {j}")
    if int(e_j) == 1:
        return 1.0
    off = 1.0
    for i in model.parents(j):
        if i not in parent_values:
            raise DataError(f"missing value for parent {i} of {j}")
        b = model.links[(i, j)]
        x = int(parent_values[i])
        active = x if b > 0 else 1 - x
        if active:
            off *= 1.0 - abs(b)
    return 1.0 - off


def _position_coeffs(model, p, spec):
    """Local conditional table for the variable at position p.

    Returns an array C of shape (2**p, 2, 2): C[h, x, e] is the probability
    that the variable takes value x given that its predecessors take the
    configuration h and its disturbance term equals e.  For intervened
    variables the table is the intervention distribution, independent of both
    h and e.
    """
    j = model.order[p]
    m = 1 << p
    C = np.empty((m, 2, 2))
    if spec is not None and j in spec.intervened:
        q = spec.prob(j)
        C[:, 1, :] = q
        C[:, 0, :] = 1.0 - q
        return C
    act = model.activation_without_disturbance(p)
    C[:, 1, 0] = act
    C[:, 0, 0] = 1.0 - act
    C[:, 1, 1] = 1.0
    C[:, 0, 1] = 0.0
    return C


def exact_distribution(model, spec=None):
    """Exact joint distribution of the model under an intervention.

    Works position by position: starting from the joint disturbance vector,
    each step integrates out one disturbance bit and replaces it with the
    corresponding variable's value, using the local conditional given the
    already-resolved predecessors.  Memory stays at two vectors of length
    2**n and time at O(n 2**n).
    """
    n = model.n
    if n > MAX_MODEL_VARS:
        raise ModelTooLargeError(f"exact distributions are capped at {MAX_MODEL_VARS} variables")
    if spec is not None:
        for i in spec.intervened:
            if not 0 <= i < n:
                raise DataError(f"intervened index {i} out of range")
    T = np.array(model.disturbance, dtype=float)
    for p in range(n):
        C = _position_coeffs(model, p, spec)
        T = np.einsum("hxe,het->hxt", C, T.reshape(1 << p, 2, -1)).reshape(-1)
    return Distribution(T, model.order)


@dataclass(frozen=True, eq=False)
class LearnedModel:
    """A fitted model together with structural diagnostics.

    `diagnostics` is a JSON-serializable dict; its keys depend on the learner
    (unidentifiable pairs, flagged negative disturbance mass, stratum sizes,
    convergence records, and so on).
    """

    model: Model
    diagnostics: dict

    def save(self, path, diagnostics_path=None):
        self.model.save(path)
        if diagnostics_path is not None:
            with open(diagnostics_path, "w") as fh:
                json.dump(self.diagnostics, fh, indent=2, default=_json_default)
                fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")
