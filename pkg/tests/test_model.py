import json

import numpy as np
import pytest

from conftest import make_model, oracle_prob_vector
from noisyor import bits
from noisyor.errors import DataError, ModelTooLargeError, UndefinedConditionalError
from noisyor.model import (
    Distribution,
    ExperimentSpec,
    Model,
    exact_distribution,
    multi_spec,
    node_conditional,
    passive_spec,
    single_spec,
)


def chain_model(b12=0.6, b13=0.4, b23=0.5):
    disturbance = np.array([0.4, 0.1, 0.05, 0.05, 0.1, 0.1, 0.1, 0.1])
    return Model(("X1", "X2", "X3"), (0, 1, 2), {(0, 1): b12, (0, 2): b13, (1, 2): b23}, disturbance)


# ---- specs ---------------------------------------------------------------------


def test_spec_defaults_and_validation():
    s = single_spec(2)
    assert s.prob(2) == 0.5 and s.intervened == frozenset([2])
    assert passive_spec().is_passive
    assert multi_spec([0, 1], 0.3).probs == {0: 0.3, 1: 0.3}
    with pytest.raises(DataError):
        ExperimentSpec(frozenset([0]), {1: 0.5})
    with pytest.raises(DataError):
        single_spec(0, 1.0)
    with pytest.raises(DataError):
        single_spec(0, 0.0)


# ---- model validation ----------------------------------------------------------


def test_model_validation_errors():
    d = np.full(4, 0.25)
    with pytest.raises(DataError):
        Model(("A", "A"), (0, 1), {}, d)
    with pytest.raises(DataError):
        Model(("A", "B"), (0, 0), {}, d)
    with pytest.raises(DataError):
        Model(("A", "B"), (0, 1), {(1, 0): 0.5}, d)  # against the order
    with pytest.raises(DataError):
        Model(("A", "B"), (0, 1), {(0, 1): 1.0}, d)  # |b| must be < 1
    with pytest.raises(DataError):
        Model(("A", "B"), (0, 1), {(0, 1): 0.0}, d)
    with pytest.raises(DataError):
        Model(("A", "B"), (0, 1), {}, np.array([0.5, 0.5, 0.5, 0.5]))
    with pytest.raises(ModelTooLargeError):
        Model(tuple(f"V{k}" for k in range(21)), tuple(range(21)), {}, np.ones(1))


def test_model_accessors():
    m = chain_model()
    assert m.n == 3
    assert m.position(2) == 2
    assert m.parents(2) == (0, 1)
    assert m.index_of("X2") == 1
    assert m.links_by_position() == {(0, 1): 0.6, (0, 2): 0.4, (1, 2): 0.5}


def test_activation_without_disturbance_hand_values():
    m = chain_model(0.6, 0.4, 0.5)
    act2 = m.activation_without_disturbance(2)
    # predecessors (X1, X2) as bits (MSB X1): 00, 01, 10, 11
    assert act2[0] == 0.0
    assert act2[1] == pytest.approx(0.5)
    assert act2[2] == pytest.approx(0.4)
    assert act2[3] == pytest.approx(1 - 0.6 * 0.5)
    neg = Model(("X1", "X2"), (0, 1), {(0, 1): -0.7}, np.full(4, 0.25))
    act1 = neg.activation_without_disturbance(1)
    assert act1[0] == pytest.approx(0.7)  # parent off fires a negative link
    assert act1[1] == 0.0


def test_node_conditional():
    m = chain_model(0.6, 0.4, 0.5)
    assert node_conditional(m, 2, {0: 1, 1: 1}, 1) == 1.0
    assert node_conditional(m, 2, {0: 1, 1: 1}, 0) == pytest.approx(1 - 0.6 * 0.5)
    assert node_conditional(m, 2, {0: 0, 1: 0}, 0) == 0.0
    with pytest.raises(DataError):
        node_conditional(m, 2, {0: 1}, 0)


# ---- exact distributions against the brute-force oracle ------------------------


def test_exact_distribution_matches_oracle(rng):
    for trial in range(12):
        n = int(rng.integers(2, 6))
        m = make_model(rng, n)
        specs = [None, single_spec(int(rng.integers(n)), 0.4)]
        if n >= 3:
            pair = rng.choice(n, size=2, replace=False)
            specs.append(multi_spec((int(pair[0]), int(pair[1])), 0.7))
        for spec in specs:
            got = exact_distribution(m, spec)
            want = oracle_prob_vector(m, spec)
            assert np.allclose(got.probs, want, atol=1e-12)
            assert got.order == m.order


def test_exact_distribution_normalizes():
    m = chain_model()
    for spec in (None, single_spec(1), multi_spec([0, 2])):
        assert exact_distribution(m, spec).probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_intervention_cuts_parents():
    m = chain_model()
    d = exact_distribution(m, single_spec(1, 0.5))
    # randomized X2 is independent of X1 under do(X2)
    assert d.prob({1: 1}) == pytest.approx(0.5)
    p_joint = d.prob({0: 1, 1: 1})
    assert p_joint == pytest.approx(d.prob({0: 1}) * 0.5, abs=1e-12)


def test_exact_distribution_rejects_bad_spec():
    m = chain_model()
    with pytest.raises(DataError):
        exact_distribution(m, single_spec(7))


# ---- Distribution queries ------------------------------------------------------


def test_distribution_prob_and_conditional(rng):
    m = make_model(rng, 4)
    dist = exact_distribution(m)
    vec = oracle_prob_vector(m)
    # marginal of the variable at position 2
    target = m.order[2]
    want = vec[bits.bit_column(4, 2) == 1].sum()
    assert dist.prob({target: 1}) == pytest.approx(want, abs=1e-12)
    given = {m.order[0]: 1}
    num = vec[(bits.bit_column(4, 0) == 1) & (bits.bit_column(4, 2) == 1)].sum()
    den = vec[bits.bit_column(4, 0) == 1].sum()
    assert dist.conditional(target, 1, given) == pytest.approx(num / den, abs=1e-12)


def test_conditional_on_impossible_event():
    m = Model(("A", "B"), (0, 1), {(0, 1): 0.5}, np.array([1.0, 0.0, 0.0, 0.0]))
    dist = exact_distribution(m)
    with pytest.raises(UndefinedConditionalError):
        dist.conditional(1, 1, {0: 1})


def test_by_index_order_realigns():
    m = make_model(np.random.default_rng(5), 3)
    dist = exact_distribution(m)
    direct = dist.by_index_order()
    for idx in range(8):
        assignment = {v: bits.bit_of(idx, 3, v) for v in range(3)}
        assert direct[idx] == pytest.approx(dist.prob(assignment), abs=1e-14)


# ---- serialization -------------------------------------------------------------


def test_json_round_trip(tmp_path, rng):
    m = make_model(rng, 4)
    path = tmp_path / "model.json"
    m.save(path)
    m2 = Model.load(path)
    # loaded models renumber variables into causal order but keep names
    assert set(m2.names) == set(m.names)
    assert m2.order == tuple(range(4))
    by_name = {(m.names[i], m.names[j]): b for (i, j), b in m.links.items()}
    by_name2 = {(m2.names[i], m2.names[j]): b for (i, j), b in m2.links.items()}
    assert by_name2 == pytest.approx(by_name)
    # the distribution over named variables is unchanged
    d1 = exact_distribution(m).by_index_order()
    perm = [m2.names.index(m.names[v]) for v in range(4)]
    d2 = bits.permute_positions(exact_distribution(m2).by_index_order(), perm)
    assert np.allclose(d1, d2, atol=1e-12)


def test_from_json_rejects_malformed():
    with pytest.raises(DataError):
        Model.from_json({"n": 2, "order": ["A"]})
    with pytest.raises(DataError):
        Model.from_json({"order": ["A", "B"]})


def test_load_missing_file(tmp_path):
    with pytest.raises(DataError):
        Model.load(tmp_path / "nope.json")


def test_save_emits_plain_json(tmp_path):
    m = chain_model()
    path = tmp_path / "m.json"
    m.save(path)
    obj = json.loads(path.read_text())
    assert obj["order"] == ["X1", "X2", "X3"]
    assert len(obj["disturbance"]) == 8


def test_with_disturbance_replaces():
    m = chain_model()
    flat = np.full(8, 1 / 8)
    m2 = m.with_disturbance(flat)
    assert np.allclose(m2.disturbance, flat)
    assert m2.links == m.links


def test_disturbance_by_index_matches_prob():
    rng = np.random.default_rng(9)
    m = make_model(rng, 3)
    direct = m.disturbance_by_index()
    for idx in range(8):
        want = 0.0
        for cfg in range(8):
            if all(
                bits.bit_of(cfg, 3, m.position(v)) == bits.bit_of(idx, 3, v) for v in range(3)
            ):
                want += m.disturbance[cfg]
        assert direct[idx] == pytest.approx(want, abs=1e-15)
