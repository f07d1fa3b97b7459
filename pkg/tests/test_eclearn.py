import numpy as np
import pytest

from conftest import exact_dataset, make_model
from noisyor.data import Dataset, default_battery
from noisyor.ec import BlockingSetQuery, known_paths, minimal_blocking_sets, run_ec
from noisyor.identify import run_id
from noisyor.model import Model, passive_spec, single_spec


# ---- path enumeration -----------------------------------------------------------


def test_known_paths_chain_and_direct():
    links = {(0, 1): 0.5, (1, 2): 0.5}
    assert known_paths(links, 0, 2) == ((0, 1, 2),)
    links[(0, 2)] = 0.3
    assert known_paths(links, 0, 2) == ((0, 1, 2), (0, 2))


def test_known_paths_diamond():
    links = {(0, 1): 0.5, (0, 2): 0.5, (1, 3): 0.5, (2, 3): 0.5}
    assert known_paths(links, 0, 3) == ((0, 1, 3), (0, 2, 3))


def test_known_paths_intervention_severs_incoming_edges():
    links = {(0, 1): 0.5, (1, 2): 0.5, (0, 2): 0.3}
    assert known_paths(links, 0, 2, intervened=frozenset({1})) == ((0, 2),)
    assert known_paths(links, 0, 2, intervened=frozenset({2})) == ()


def test_known_paths_none():
    assert known_paths({(1, 0): 0.5}, 0, 1) == ()
    assert known_paths({}, 0, 1) == ()


# ---- minimal blocking sets ------------------------------------------------------


def _query(paths):
    return BlockingSetQuery(0, 9, tuple(paths), frozenset())


def test_blocking_sets_no_paths():
    assert minimal_blocking_sets(_query([]), set()) == [frozenset()]


def test_blocking_sets_single_interior():
    assert minimal_blocking_sets(_query([(0, 1, 9)]), {1}) == [frozenset({1})]


def test_blocking_sets_shared_vertex_wins():
    sets = minimal_blocking_sets(_query([(0, 1, 2, 9), (0, 1, 3, 9)]), {1, 2, 3})
    assert sets == [frozenset({1})]


def test_blocking_sets_disjoint_paths_need_both():
    sets = minimal_blocking_sets(_query([(0, 1, 9), (0, 2, 9)]), {1, 2})
    assert sets == [frozenset({1, 2})]


def test_blocking_sets_enumeration_and_cap():
    paths = [(0, 1, 2, 9), (0, 2, 3, 9), (0, 1, 3, 9)]
    sets = minimal_blocking_sets(_query(paths), {1, 2, 3})
    assert sets == [frozenset({1, 2}), frozenset({1, 3}), frozenset({2, 3})]
    assert minimal_blocking_sets(_query(paths), {1, 2, 3}, cap=2) == [
        frozenset({1, 2}),
        frozenset({1, 3}),
    ]


def test_blocking_sets_reject_paths_outside_window():
    with pytest.raises(AssertionError):
        minimal_blocking_sets(_query([(0, 1, 9)]), set())


# ---- full learner ---------------------------------------------------------------


def test_run_ec_exact_recovery(rng):
    for _ in range(6):
        n = int(rng.integers(2, 6))
        m = make_model(rng, n)
        data = exact_dataset(m, default_battery(n), total=1e6)
        learned = run_ec(data)
        assert set(learned.model.links) == set(m.links)
        for key, b in m.links.items():
            assert learned.model.links[key] == pytest.approx(b, abs=1e-9)
        assert np.allclose(
            learned.model.disturbance_by_index(), m.disturbance_by_index(), atol=1e-9
        )


def test_run_ec_matches_exhaustive_learner_on_exact_data(rng):
    # with exact counts the minimal-set estimates agree with the
    # condition-everything estimates link for link
    for _ in range(4):
        m = make_model(rng, 4)
        data = exact_dataset(m, default_battery(4), total=1e6)
        ec = run_ec(data)
        id_ = run_id(data, negativity_tolerance=1e-6)
        assert set(ec.model.links) == set(id_.model.links)
        for key in ec.model.links:
            assert ec.model.links[key] == pytest.approx(id_.model.links[key], abs=1e-9)
        assert np.allclose(
            ec.model.disturbance_by_index(), id_.model.disturbance_by_index(), atol=1e-9
        )


def test_run_ec_quick_disturbance(rng):
    m = make_model(rng, 4)
    data = exact_dataset(m, default_battery(4), total=1e6)
    learned = run_ec(data, quick_disturbance=True)
    assert learned.diagnostics["disturbance_solver"] == {"method": "passive-triangular"}
    assert np.allclose(
        learned.model.disturbance_by_index(), m.disturbance_by_index(), atol=1e-9
    )


def test_run_ec_no_links(rng):
    m = make_model(rng, 3, p_link=0.0)
    data = exact_dataset(m, default_battery(3), total=1e6)
    learned = run_ec(data)
    assert learned.model.links == {}
    for record in learned.diagnostics["pairs"].values():
        assert not record["edge"]


def test_run_ec_diagnostics_records(rng):
    m = Model(("X1", "X2", "X3"), (0, 1, 2), {(0, 1): 0.6, (0, 2): 0.4, (1, 2): 0.5},
              rng.dirichlet(np.ones(8)))
    data = exact_dataset(m, default_battery(3), total=1e6)
    learned = run_ec(data)
    pairs = learned.diagnostics["pairs"]
    assert set(pairs) == {"X1->X2", "X1->X3", "X2->X3"}
    rec = pairs["X1->X3"]
    assert rec["edge"]
    assert rec["gate_set"] == ["X2"]  # the known indirect route gets blocked
    assert rec["pooled"] == pytest.approx(0.4, abs=1e-9)
    assert rec["p_value"] < 0.01
    assert all(e["weight"] > 0 for e in rec["estimates"])
    assert learned.diagnostics["order"] == ["X1", "X2", "X3"]
    assert learned.diagnostics["unidentified_pairs"] == []


def test_run_ec_explicit_order(rng):
    m = make_model(rng, 3)
    data = exact_dataset(m, [passive_spec()] + [single_spec(i) for i in range(3)], total=1e6)
    learned = run_ec(data, order=m.order)
    assert learned.model.order == m.order
    assert set(learned.model.links) == set(m.links)


def test_run_ec_unidentified_pairs(rng):
    m = Model(("X1", "X2", "X3"), (0, 1, 2), {(0, 1): 0.6}, rng.dirichlet(np.ones(8)))
    data = exact_dataset(m, [passive_spec(), single_spec(0)], total=1e6)
    learned = run_ec(data)
    assert ["X2", "X3"] in learned.diagnostics["unidentified_pairs"]
    assert (1, 2) not in learned.model.links


def test_run_ec_thin_strata_block_edges(rng):
    m = Model(("X1", "X2"), (0, 1), {(0, 1): 0.9}, rng.dirichlet(np.ones(4)))
    data = exact_dataset(m, default_battery(2), total=8.0)
    learned = run_ec(data, min_stratum=5.0)
    assert learned.model.links == {}
    assert not learned.diagnostics["pairs"]["X1->X2"]["edge"]
