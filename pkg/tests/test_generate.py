import numpy as np
import pytest
from scipy import stats

from conftest import make_model, oracle_prob_vector
from noisyor import bits
from noisyor.errors import DataError
from noisyor.generate import (
    GenConfig,
    InteractiveModel,
    derive_rng,
    interactive_from,
    marginalize_latents,
    mix_confounding,
    random_model,
    sample,
    sample_dataset,
)
from noisyor.model import Model, exact_distribution, multi_spec, passive_spec, single_spec


def test_gen_config_validation():
    with pytest.raises(DataError):
        GenConfig(n_observed=0)
    with pytest.raises(DataError):
        GenConfig(n_observed=3, link_range=(0.0, 0.9))
    with pytest.raises(DataError):
        GenConfig(n_observed=3, negative_fraction=1.5)
    with pytest.raises(DataError):
        GenConfig(n_observed=3, dirichlet_alpha=0.0)


def test_random_model_respects_protocol():
    cfg = GenConfig(n_observed=6, n_latent=2, max_parents=2, link_range=(0.2, 0.8), seed=4)
    m = random_model(cfg)
    assert m.names[:2] == ("L1", "L2")
    assert m.names[2:] == ("X1", "X2", "X3", "X4", "X5", "X6")
    # latents occupy the causal prefix
    assert set(m.order[:2]) == {0, 1}
    parents = {}
    for (i, j), b in m.links.items():
        assert 0.2 <= abs(b) <= 0.8
        parents.setdefault(j, []).append(i)
    assert all(len(ps) <= 2 for ps in parents.values())


def test_random_model_seeded_reproducibility():
    cfg = GenConfig(n_observed=5, seed=11)
    a, b = random_model(cfg), random_model(cfg)
    assert a.order == b.order and a.links == b.links
    assert np.array_equal(a.disturbance, b.disturbance)
    c = random_model(GenConfig(n_observed=5, seed=12))
    assert a.links != c.links or a.order != c.order or not np.array_equal(
        a.disturbance, c.disturbance
    )


def test_unconfounded_disturbance_is_product():
    m = random_model(GenConfig(n_observed=4, confounded=False, seed=2))
    d = m.disturbance
    marg = [d[bits.bit_column(4, p) == 1].sum() for p in range(4)]
    product = np.ones(1)
    for q in marg:
        product = np.kron(product, np.array([1 - q, q]))
    assert np.allclose(d, product, atol=1e-12)


def test_mix_confounding_endpoints(rng):
    m = make_model(rng, 3)
    same = mix_confounding(m, 1.0)
    assert np.allclose(same.disturbance, m.disturbance)
    indep = mix_confounding(m, 0.0)
    d = indep.disturbance
    for p in range(3):
        marg_new = d[bits.bit_column(3, p) == 1].sum()
        marg_old = m.disturbance[bits.bit_column(3, p) == 1].sum()
        assert marg_new == pytest.approx(marg_old, abs=1e-12)
    # independence: joint equals product of marginals
    m0 = d[bits.bit_column(3, 0) == 1].sum()
    m1 = d[bits.bit_column(3, 1) == 1].sum()
    joint = d[(bits.bit_column(3, 0) == 1) & (bits.bit_column(3, 1) == 1)].sum()
    assert joint == pytest.approx(m0 * m1, abs=1e-12)


def test_derive_rng_streams_are_stable_and_distinct():
    a = derive_rng(7, 1, 2).random(4)
    b = derive_rng(7, 1, 2).random(4)
    c = derive_rng(7, 1, 3).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---- sampling ------------------------------------------------------------------


def test_sample_reproducible_and_counts():
    m = random_model(GenConfig(n_observed=3, seed=1))
    e1 = sample(m, single_spec(0), 500, 99)
    e2 = sample(m, single_spec(0), 500, 99)
    assert np.array_equal(e1.counts, e2.counts)
    assert e1.total == 500
    assert e1.exp_id == "do(X1)"
    with pytest.raises(DataError):
        sample(m, passive_spec(), 0, 1)


def test_sampler_goodness_of_fit(rng):
    m = make_model(rng, 3, p_link=0.7)
    for spec in (passive_spec(), single_spec(1, 0.3)):
        entry = sample(m, spec, 200_000, 7)
        expected = oracle_prob_vector(m, spec)
        new_to_old = [m.position(v) for v in range(3)]
        expected = bits.permute_positions(expected, new_to_old) * entry.total
        keep = expected > 0
        assert np.all(entry.counts[~keep] == 0)
        stat = float(((entry.counts[keep] - expected[keep]) ** 2 / expected[keep]).sum())
        p = stats.chi2.sf(stat, keep.sum() - 1)
        assert p > 0.001


def test_intervened_values_ignore_model(rng):
    # under do(X_i) the intervened variable is an independent coin
    m = make_model(rng, 3, p_link=1.0)
    j = m.order[2]  # last in causal order, otherwise fully caused
    entry = sample(m, single_spec(j, 0.8), 100_000, 3)
    on = entry.counts[bits.bit_column(3, j) == 1].sum()
    assert on / entry.total == pytest.approx(0.8, abs=0.01)


def test_sample_dataset_splits_and_names():
    m = random_model(GenConfig(n_observed=3, seed=6))
    specs = [passive_spec(), single_spec(0), single_spec(1)]
    ds = sample_dataset(m, specs, [100, 200, 300], 5)
    assert [e.total for e in ds.entries] == [100, 200, 300]
    assert ds.names == m.names
    with pytest.raises(DataError):
        sample_dataset(m, specs, [100], 5)


# ---- interaction variants ------------------------------------------------------


def test_interactive_zero_strength_is_bit_identical():
    m = random_model(GenConfig(n_observed=4, seed=8))
    im = interactive_from(m, 0.0, derive_rng(8, 1))
    for spec in (passive_spec(), single_spec(2)):
        a = sample(m, spec, 4000, 123)
        b = sample(im, spec, 4000, 123)
        assert np.array_equal(a.counts, b.counts)


def test_interactive_from_draws_within_bound():
    m = random_model(GenConfig(n_observed=5, seed=9))
    im = interactive_from(m, 0.3, derive_rng(9, 1))
    for (k, i, j), probs in im.interactions.items():
        assert m.position(i) < m.position(j) < m.position(k)
        assert all(0.0 <= q <= 0.3 for q in probs)
        assert i in m.parents(k) and j in m.parents(k)


def test_interactive_exact_distribution_matches_oracle(rng):
    base = make_model(rng, 3, p_link=1.0)
    order = base.order
    inter = {(order[2], order[0], order[1]): (0.25, 0.1, 0.0, 0.05)}
    im = InteractiveModel(base, inter)
    got = exact_distribution(im, passive_spec()).probs
    want = oracle_prob_vector(im)
    assert np.allclose(got, want, atol=1e-12)


def test_interactive_sampler_gof(rng):
    base = make_model(rng, 3, p_link=1.0)
    order = base.order
    im = InteractiveModel(base, {(order[2], order[0], order[1]): (0.3, 0.15, 0.1, 0.0)})
    entry = sample(im, passive_spec(), 150_000, 17)
    expected = oracle_prob_vector(im)
    new_to_old = [base.position(v) for v in range(3)]
    expected = bits.permute_positions(expected, new_to_old) * entry.total
    keep = expected > 0
    stat = float(((entry.counts[keep] - expected[keep]) ** 2 / expected[keep]).sum())
    assert stats.chi2.sf(stat, keep.sum() - 1) > 0.001


def test_interactive_validation():
    base = make_model(np.random.default_rng(3), 3)
    order = base.order
    with pytest.raises(DataError):
        InteractiveModel(base, {(order[0], order[1], order[2]): (0.1, 0.1, 0.1, 0.1)})
    with pytest.raises(DataError):
        InteractiveModel(base, {(order[2], order[0], order[1]): (0.1, 0.1, 0.1, 1.5)})


def test_interactive_json_round_trip(tmp_path):
    m = random_model(GenConfig(n_observed=3, seed=10))
    im = interactive_from(m, 0.4, derive_rng(10, 1))
    path = tmp_path / "im.json"
    im.save(path)
    im2 = InteractiveModel.load(path)
    by_name = {
        (im.names[k], im.names[i], im.names[j]): v for (k, i, j), v in im.interactions.items()
    }
    by_name2 = {
        (im2.names[k], im2.names[i], im2.names[j]): v for (k, i, j), v in im2.interactions.items()
    }
    assert set(by_name) == set(by_name2)
    for key in by_name:
        assert by_name2[key] == pytest.approx(by_name[key])


# ---- latent views --------------------------------------------------------------


def latent_prefix_model(rng, n_obs, n_lat):
    cfg = GenConfig(n_observed=n_obs, n_latent=n_lat, confounded=False, seed=int(rng.integers(1e6)))
    return random_model(cfg)


def test_latent_view_exact_distribution(rng):
    full = latent_prefix_model(rng, 3, 2)
    view = marginalize_latents(full, 2)
    assert view.names == tuple(full.names[v] for v in full.order[2:])
    got = view.exact_distribution(passive_spec()).probs
    # oracle: full joint in position layout, summed over the latent prefix
    want = oracle_prob_vector(full).reshape(4, -1).sum(axis=0)
    assert np.allclose(got, want, atol=1e-12)


def test_latent_view_interventions_match_full(rng):
    full = latent_prefix_model(rng, 3, 1)
    view = marginalize_latents(full, 1)
    k = 1  # view index: second observed variable in causal order
    full_idx = full.order[1 + k]
    got = view.exact_distribution(single_spec(k, 0.6)).probs
    want = oracle_prob_vector(full, single_spec(full_idx, 0.6)).reshape(2, -1).sum(axis=0)
    assert np.allclose(got, want, atol=1e-12)


def test_latent_view_sampling_layout(rng):
    full = latent_prefix_model(rng, 3, 2)
    view = marginalize_latents(full, 2)
    entry = view.sample(single_spec(0, 0.5), 50_000, 21)
    assert entry.m == 3
    assert entry.total == 50_000
    assert entry.exp_id == f"do({view.names[0]})"
    expected = oracle_prob_vector(full, single_spec(full.order[2], 0.5)).reshape(4, -1).sum(axis=0)
    keep = expected > 0
    assert np.all(entry.counts[~keep] == 0)
    stat = float(
        ((entry.counts[keep] - expected[keep] * entry.total) ** 2 / (expected[keep] * entry.total)).sum()
    )
    assert stats.chi2.sf(stat, keep.sum() - 1) > 0.001


def test_observed_links_keyed_by_view_index():
    # hand model: L -> X1 -> X2 with L first in the causal order
    m = Model(
        ("L1", "X1", "X2"),
        (0, 1, 2),
        {(0, 1): 0.5, (1, 2): 0.7},
        np.full(8, 1 / 8),
    )
    view = marginalize_latents(m, 1)
    assert view.names == ("X1", "X2")
    assert view.observed_links() == {(0, 1): 0.7}
