import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attrishift.attribution import (
    ExplanationMatrix,
    explain_dataset,
    gaussian_observational_value_fn,
    interventional_value_fn,
    lime_tabular,
    shap_exact_enumeration,
    shap_linear_interventional,
    shap_linear_observational_gaussian,
    shap_tree_path_dependent,
    tree_conditional_value_fn,
    tree_expected_value,
)
from attrishift.background import BackgroundStats
from attrishift.dataset import Dataset
from attrishift.errors import SizeError, UnsupportedModelError
from attrishift.models import LEAF, ModelSpec, Predictor, Tree, fit


def permutation_shapley(val, p):
    """Average marginal contribution over all p! orderings."""
    phi = np.zeros(p)
    perms = list(itertools.permutations(range(p)))
    for order in perms:
        seen = set()
        for j in order:
            before = val(frozenset(seen))
            seen.add(j)
            phi[j] += val(frozenset(seen)) - before
    return phi / len(perms)


def linear_model(coef, intercept=0.0, names=None) -> Predictor:
    coef = np.asarray(coef, dtype=float)
    names = names or tuple(f"x{j}" for j in range(coef.size))
    return Predictor(ModelSpec("ols"), names, coef=coef, intercept=intercept)


def random_data(seed, n=300, p=4):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(p, p))
    return rng.normal(size=(n, p)) @ a + rng.normal(size=p)


# ---------------------------------------------------------------- enumeration


def test_enumeration_additive_and_symmetric_games():
    c = np.array([1.5, -2.0, 0.25, 4.0])
    np.testing.assert_allclose(shap_exact_enumeration(lambda t: sum(c[j] for j in t), 4), c)
    sym = {frozenset(): 0.0, frozenset({0}): 1.0, frozenset({1}): 1.0, frozenset({0, 1}): 5.0}
    s = shap_exact_enumeration(sym.__getitem__, 2)
    assert s[0] == s[1] == 2.5


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8))
def test_enumeration_matches_permutation_average(table):
    val = lambda t: table[sum(1 << j for j in t)]
    np.testing.assert_allclose(shap_exact_enumeration(val, 3), permutation_shapley(val, 3), atol=1e-12)


def test_enumeration_size_limit():
    with pytest.raises(SizeError):
        shap_exact_enumeration(lambda t: 0.0, 13)


# ---------------------------------------------------------------- linear


def test_linear_interventional_closed_form():
    m = linear_model([2.0, 3.0], 1.0)
    bg = BackgroundStats(np.zeros(2), np.eye(2))
    s = shap_linear_interventional(m, [1.0, 1.0], bg)
    np.testing.assert_allclose(s, [2.0, 3.0])
    assert s.sum() + 1.0 == pytest.approx(m.margin([1.0, 1.0])[0])
    m0 = linear_model([0.0, 3.0])
    x = np.random.default_rng(0).normal(size=(10, 2))
    assert np.all(shap_linear_interventional(m0, x, bg)[:, 0] == 0)


def test_linear_interventional_rejects_trees():
    x = np.random.default_rng(0).normal(size=(30, 2))
    m = fit(ModelSpec("tree", max_depth=2), Dataset(x, ("a", "b"), y=x[:, 0]))
    with pytest.raises(UnsupportedModelError):
        shap_linear_interventional(m, x[0])


@pytest.mark.parametrize("seed", range(5))
def test_linear_interventional_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 7))
    x = random_data(seed, 200, p)
    m = linear_model(rng.normal(size=p), rng.normal())
    bg = BackgroundStats.from_matrix(x)
    rows = x[:4]
    oracle = shap_exact_enumeration(interventional_value_fn(m, rows, bg.rows), p)
    np.testing.assert_allclose(shap_linear_interventional(m, rows, bg), oracle, atol=1e-8)


def test_gaussian_observational_collapses_under_independence():
    rng = np.random.default_rng(1)
    m = linear_model(rng.normal(size=4), 0.3)
    bg = BackgroundStats(rng.normal(size=4), np.diag(rng.uniform(0.5, 2, 4)))
    x = rng.normal(size=(6, 4))
    np.testing.assert_allclose(shap_linear_observational_gaussian(m, x, bg), shap_linear_interventional(m, x, bg), atol=1e-8)


def bivariate_value(beta, c, mu, cov, x, t):
    """Coalition value from the textbook bivariate normal conditional mean."""
    if t == (0, 1):
        return beta @ x + c
    if t == ():
        return beta @ mu + c
    k, o = (0, 1) if t == (0,) else (1, 0)
    cond = mu[o] + cov[o, k] / cov[k, k] * (x[k] - mu[k])
    filled = np.empty(2)
    filled[k], filled[o] = x[k], cond
    return beta @ filled + c


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gaussian_observational_two_player_hand_formula(seed):
    rng = np.random.default_rng(seed)
    beta, c = rng.normal(size=2), rng.normal()
    mu = rng.normal(size=2)
    sd = rng.uniform(0.5, 2, 2)
    rho = rng.uniform(-0.9, 0.9)
    cov = np.array([[sd[0] ** 2, rho * sd[0] * sd[1]], [rho * sd[0] * sd[1], sd[1] ** 2]])
    x = rng.normal(size=2)
    v = lambda t: bivariate_value(beta, c, mu, cov, x, t)
    s1 = 0.5 * (v((0, 1)) - v((1,))) + 0.5 * (v((0,)) - v(()))
    s2 = 0.5 * (v((0, 1)) - v((0,))) + 0.5 * (v((1,)) - v(()))
    got = shap_linear_observational_gaussian(linear_model(beta, c), x, BackgroundStats(mu, cov))
    np.testing.assert_allclose(got, [s1, s2], atol=1e-7)


def test_gaussian_observational_differs_from_linear_term_under_correlation():
    a = 1.5
    m = linear_model([a, 0.0])
    bg = BackgroundStats(np.zeros(2), np.array([[1.0, 0.6], [0.6, 1.0]]))
    x = np.array([1.0, -1.0])
    assert abs(shap_linear_observational_gaussian(m, x, bg)[0] - a * x[0]) > 0.1


@pytest.mark.parametrize("seed", range(5))
def test_gaussian_observational_matches_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    p = int(rng.integers(2, 7))
    bg = BackgroundStats.from_matrix(random_data(seed, 500, p))
    m = linear_model(rng.normal(size=p), rng.normal())
    rows = rng.normal(size=(3, p))
    oracle = shap_exact_enumeration(gaussian_observational_value_fn(m, rows, bg), p)
    np.testing.assert_allclose(shap_linear_observational_gaussian(m, rows, bg), oracle, atol=1e-8)


def test_gaussian_observational_size_limit():
    m = linear_model(np.ones(21))
    with pytest.raises(SizeError):
        shap_linear_observational_gaussian(m, np.zeros(21), BackgroundStats(np.zeros(21), np.eye(21)))


# ---------------------------------------------------------------- trees


def test_stump_two_outcome_symmetry():
    t = Tree(feature=[0, LEAF, LEAF], threshold=[0.0, 0, 0], left=[1, -1, -1], right=[2, -1, -1], value=[0.5, 0.0, 1.0], cover=[2.0, 1.0, 1.0])
    m = Predictor(ModelSpec("tree"), ("x1", "x2", "x3"), trees=(t,))
    np.testing.assert_allclose(shap_tree_path_dependent(m, [1.0, 7.0, -3.0]), [0.5, 0.0, 0.0])
    assert tree_expected_value(m) == 0.5


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("kind", ["tree:max_depth=3,min_leaf=3", "gbdt:n_trees=4,max_depth=3", "gbdt:n_trees=3,max_depth=2,task=classification"])
def test_tree_shap_matches_enumeration(seed, kind):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 7))
    x = rng.normal(size=(120, p))
    y = np.sin(x[:, 0]) + x[:, -1] * x[:, 0] + 0.1 * rng.normal(size=120)
    if "classification" in kind:
        y = (y > 0).astype(float)
    m = fit(ModelSpec.parse(kind), Dataset(x, [f"f{j}" for j in range(p)], y=y))
    rows = rng.normal(size=(5, p))
    oracle = shap_exact_enumeration(tree_conditional_value_fn(m, rows), p)
    got = shap_tree_path_dependent(m, rows)
    np.testing.assert_allclose(got, oracle, atol=1e-8)
    np.testing.assert_allclose(got.sum(axis=1) + tree_expected_value(m), m.margin(rows), atol=1e-8)


def test_tree_unused_feature_zero():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(200, 3))
    x[:, 2] = 0.0
    m = fit(ModelSpec("gbdt", n_trees=20), Dataset(x, ("a", "b", "c"), y=x[:, 0] * x[:, 1]))
    assert 2 not in set().union(*(t.used_features() for t in m.trees))
    probe = rng.normal(size=(50, 3))
    assert np.all(shap_tree_path_dependent(m, probe)[:, 2] == 0.0)


# ---------------------------------------------------------------- LIME


def test_lime_recovers_linear_coefficients():
    beta = np.array([1.0, -2.0, 0.0])
    x = random_data(4, 500, 3)
    m = linear_model(beta, 0.5)
    m = Predictor(m.spec, m.feature_names, coef=m.coef, intercept=m.intercept, background=BackgroundStats.from_matrix(x))
    attr, coef = lime_tabular(m, x[0], n_samples=5000, seed=1, return_coef=True)
    np.testing.assert_allclose(coef, beta, atol=0.05)
    assert abs(coef[2]) < 0.05
    np.testing.assert_allclose(attr, shap_linear_interventional(m, x[0]), atol=1e-6)


def test_lime_unused_feature_in_trees_and_determinism():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(400, 3))
    m = fit(ModelSpec("gbdt", n_trees=20), Dataset(x, ("a", "b", "c"), y=x[:, 0] + 0.0 * x[:, 2]))
    _, coef = lime_tabular(m, x[1], n_samples=5000, seed=3, return_coef=True)
    _, coef2 = lime_tabular(m, x[1], n_samples=5000, seed=3, return_coef=True)
    np.testing.assert_array_equal(coef, coef2)
    used = set().union(*(t.used_features() for t in m.trees))
    if 2 not in used:
        assert abs(coef[2]) < 0.05


# ---------------------------------------------------------------- explain_dataset


def test_explain_dataset_efficiency_and_csv(tmp_path):
    x = random_data(7, 200, 3)
    d = Dataset(x, ("a", "b", "c"), y=x[:, 0] - x[:, 1] ** 2)
    for spec in ("ols", "gbdt:n_trees=10"):
        m = fit(ModelSpec.parse(spec), d)
        e = explain_dataset(m, d)
        np.testing.assert_allclose(e.values.sum(axis=1) + e.base_value, m.margin(x), atol=1e-6)
    m = fit(ModelSpec("ols"), d)
    e = explain_dataset(m, d, linear_variant="observational")
    np.testing.assert_allclose(e.values.sum(axis=1) + e.base_value, m.margin(x), atol=1e-6)
    e.to_csv(tmp_path / "e.csv")
    back = ExplanationMatrix.from_csv(tmp_path / "e.csv")
    np.testing.assert_array_equal(back.values, e.values)
    assert back.base_value == e.base_value and back.feature_names == e.feature_names


def test_explain_dataset_lime_shape():
    x = random_data(8, 60, 2)
    m = fit(ModelSpec("ols"), Dataset(x, ("a", "b"), y=x @ [1.0, 2.0]))
    e = explain_dataset(m, x[:5], method="lime", n_samples=500, seed=2)
    assert e.values.shape == (5, 2) and e.method == "lime"
    assert math.isfinite(e.base_value)
