import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attrishift import stats
from attrishift.dataset import Dataset
from attrishift.errors import DomainError, MalformedTreeError, RankDeficiencyError, ShapeError
from attrishift.models import LEAF, ModelSpec, Predictor, Tree, fit
from attrishift.models.linear import logistic_objective
from attrishift.synthgen import ScenarioSpec, generate


def _stump() -> Predictor:
    t = Tree(feature=[0, LEAF, LEAF], threshold=[0.0, 0, 0], left=[1, -1, -1], right=[2, -1, -1], value=[0.5, 0.0, 1.0], cover=[2.0, 1.0, 1.0])
    return Predictor(ModelSpec("tree"), ("x1",), trees=(t,))


def test_ols_exact_line():
    x = np.linspace(-2, 2, 11)
    m = fit(ModelSpec("ols"), Dataset(x, ("x",), y=2 * x + 1))
    assert m.coef[0] == pytest.approx(2, abs=1e-8) and m.intercept == pytest.approx(1, abs=1e-8)
    np.testing.assert_allclose(m.predict([[3.0]]), [7.0])
    with pytest.raises(ShapeError):
        m.predict(np.zeros((1, 2)))


def test_ols_rank_deficient():
    x = np.column_stack([np.arange(5.0), 2 * np.arange(5.0)])
    with pytest.raises(RankDeficiencyError):
        fit(ModelSpec("ols"), Dataset(x, ("a", "b"), y=np.arange(5.0)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_ols_residuals_orthogonal(seed, p):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(40, p))
    y = rng.normal(size=40)
    m = fit(ModelSpec("ols"), Dataset(x, [f"f{j}" for j in range(p)], y=y))
    r = y - m.predict(x)
    design = np.column_stack([np.ones(40), x])
    assert np.max(np.abs(design.T @ r)) < 1e-6


def test_stump_predictions_and_depth_one_tree():
    np.testing.assert_array_equal(_stump().predict([[-5.0], [5.0]]), [0.0, 1.0])
    x = np.linspace(-1, 1, 20)
    m = fit(ModelSpec("tree", max_depth=1, min_leaf=1, task="classification"), Dataset(x, ("x",), y=(x > 0).astype(float)))
    assert np.mean((m.predict(x[:, None]) > 0.5) == (x > 0)) == 1.0


def test_gbdt_constant_target():
    m = fit(ModelSpec("gbdt", n_trees=1, learning_rate=1.0), Dataset(np.arange(10.0), ("x",), y=np.full(10, 3.5)))
    np.testing.assert_allclose(m.predict(np.arange(10.0).reshape(-1, 1)), 3.5)


@pytest.mark.parametrize("task", ["regression", "classification"])
def test_gbdt_loss_non_increasing(task):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(300, 3))
    y = x[:, 0] * x[:, 1] + 0.1 * rng.normal(size=300)
    if task == "classification":
        y = (y > 0).astype(float)
    m = fit(ModelSpec("gbdt", n_trees=30, task=task), Dataset(x, ("a", "b", "c"), y=y))
    h = np.array(m.train_history)
    assert h.size == 31 and np.all(np.diff(h) <= 1e-12)


def test_logistic_objective_monotone_and_power_data():
    sc = generate(ScenarioSpec("power", n=400, seed=0, mu=0.5))
    tr, te = sc.train, sc.new
    m = fit(ModelSpec("logistic"), tr)
    assert np.all(np.diff(m.train_history) <= 1e-12)
    held_out = stats.auc(m.predict(te.x), te.y)
    assert held_out > 0.5
    # optimum: gradient of the penalized objective vanishes
    eps = 1e-6
    w = np.r_[m.coef, m.intercept]
    f0 = logistic_objective(tr.x, tr.y, m.coef, m.intercept, 1.0)
    for k in range(w.size):
        d = np.zeros_like(w)
        d[k] = eps
        f1 = logistic_objective(tr.x, tr.y, m.coef + d[:-1], m.intercept + d[-1], 1.0)
        assert (f1 - f0) / eps > -1e-4


def test_logistic_rejects_non_binary():
    with pytest.raises(DomainError):
        fit(ModelSpec("logistic"), Dataset(np.arange(4.0), ("x",), y=[0, 1, 2, 1]))


def test_tree_covers_consistent():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(200, 4))
    m = fit(ModelSpec("gbdt", n_trees=10, max_depth=3), Dataset(x, list("abcd"), y=x[:, 0] + x[:, 1] ** 2))
    for t in m.trees:
        t.validate()
        assert t.cover[0] == 200
    bad = Tree(feature=[0, LEAF, LEAF], threshold=[0.0, 0, 0], left=[1, -1, -1], right=[2, -1, -1], value=[0, 0, 1.0], cover=[0.0, 0.0, 0.0])
    with pytest.raises(MalformedTreeError):
        bad.validate()


def test_model_spec_parse_and_json_round_trip():
    spec = ModelSpec.parse("gbdt:n_trees=5,max_depth=2")
    assert spec.n_trees == 5 and spec.max_depth == 2 and spec.learning_rate == 0.1
    with pytest.raises(DomainError):
        ModelSpec.parse("svm")
    x = np.random.default_rng(1).normal(size=(50, 2))
    d = Dataset(x, ("a", "b"), y=x[:, 0] - x[:, 1] ** 2)
    for s in ("ols", "ridge:lam=0.5", "tree", "gbdt:n_trees=5"):
        m = fit(ModelSpec.parse(s), d)
        back = Predictor.from_json(m.to_json())
        np.testing.assert_array_equal(back.predict(x), m.predict(x))
