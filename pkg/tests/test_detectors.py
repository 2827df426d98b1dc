import numpy as np
import pytest

from attrishift.dataset import Dataset, split_three_way
from attrishift.detectors import (
    baseline_suite,
    c2st,
    dp_inspect,
    et_inspect,
    explain_drivers,
    independence_tests,
    input_c2st,
    power_point,
    shift_detect,
)
from attrishift.errors import DomainError, SchemaError
from attrishift.models import ModelSpec, Predictor, fit
from attrishift.synthgen import ScenarioSpec, generate


def _et_setup(n=10_000, seed=0, model="logistic", **kw):
    d = generate(ScenarioSpec("et_fairness", n=n, seed=seed, **kw)).train
    d_tr, d_val, d_te = split_three_way(d, seed=seed)
    return fit(ModelSpec.parse(model), d_tr), d_val, d_te


def test_uninformative_case_et_not_detected():
    f, d_val, d_te = _et_setup(case="uninformative", gamma=0.8, target="regression", model="ols")
    r = et_inspect(f, d_val, d_te)
    assert 0.45 <= r.auc <= 0.55 and r.p_value > 0.05


def test_random_protected_attribute():
    f, d_val, d_te = _et_setup(gamma=0.9)
    rng = np.random.default_rng(0)
    scramble = lambda d: d.replace(z=rng.integers(0, 2, d.n))
    r = et_inspect(f, scramble(d_val), scramble(d_te))
    assert abs(r.auc - 0.5) < 0.02


def test_yule_dp_blind_et_not():
    d = generate(ScenarioSpec("yule", n=10_000, seed=0)).train
    d_tr, d_val, d_te = split_three_way(d, seed=0)
    f = fit(ModelSpec("ols"), d_tr)
    assert 0.45 <= dp_inspect(f, d_val, d_te).auc <= 0.55
    assert et_inspect(f, d_val, d_te).auc > 0.6


def test_indirect_dp_bounded_by_et():
    f, d_val, d_te = _et_setup(gamma=0.6)
    et, dp = et_inspect(f, d_val, d_te), dp_inspect(f, d_val, d_te)
    assert 0.5 < dp.auc <= et.auc + 0.02
    combined = dp_inspect(f, d_val, d_te, combined=True)
    assert combined.kind == "combined" and len(combined.drivers) == 4


def test_constant_model_dp_auc_half():
    d = generate(ScenarioSpec("et_fairness", n=600, seed=1, gamma=0.5)).train
    _, d_val, d_te = split_three_way(d, seed=1)
    f = Predictor(ModelSpec("ols"), d.feature_names, coef=np.zeros(d.p), intercept=2.0)
    r = dp_inspect(f, d_val, d_te)
    assert r.auc == 0.5


def test_schema_and_domain_errors():
    f, d_val, d_te = _et_setup(n=300)
    with pytest.raises(SchemaError):
        et_inspect(f, d_val.replace(z=None), d_te)
    with pytest.raises(DomainError):
        et_inspect(f, d_val.replace(z=np.zeros(d_val.n)), d_te)
    with pytest.raises(SchemaError):
        shift_detect(f, d_val, d_te.select(d_te.feature_names[:2]))


def test_et_implies_dp_over_random_pairs():
    rng = np.random.default_rng(2024)
    violations = []
    for k in range(50):
        case = ["indirect", "uninformative"][k % 2]
        gamma = float(rng.choice([0.0, 0.3, 0.6, 0.9]))
        f, d_val, d_te = _et_setup(n=3000, seed=k, case=case, gamma=gamma, target="regression", model="ols")
        et, dp = et_inspect(f, d_val, d_te, seed=k), dp_inspect(f, d_val, d_te, seed=k)
        if et.auc <= 0.52 and dp.auc > 0.54:
            violations.append((k, et.auc, dp.auc))
    assert not violations


def test_shift_detect_exchangeable_and_symmetric():
    sc = generate(ScenarioSpec("covariate_rho", n=6000, seed=3, rho=0.0))
    d_tr, d_val, _ = split_three_way(sc.train, (0.5, 0.5, 0.0), seed=3)
    f = fit(ModelSpec("gbdt", n_trees=30), d_tr)
    same = shift_detect(f, d_val, sc.new, seed=3)
    assert 0.45 <= same.auc <= 0.55
    shifted = generate(ScenarioSpec("covariate_rho", n=6000, seed=3, rho=0.8)).new
    a = shift_detect(f, d_val, shifted, seed=5).auc
    b = shift_detect(f, shifted, d_val, seed=5).auc
    assert min(abs(a - b), abs(a - (1 - b))) < 1e-9
    assert shift_detect(f, d_val, shifted, seed=5).auc == a


def test_unused_feature_explanation_vs_input():
    sc = generate(ScenarioSpec("unused_feature", n=10_000, seed=0))
    d_tr, d_te, _ = split_three_way(sc.train, (0.5, 0.5, 0.0), seed=0)
    f = fit(ModelSpec("gbdt"), d_tr)
    assert 0.45 <= shift_detect(f, d_te, sc.new, seed=0).auc <= 0.55
    assert input_c2st(d_te, sc.new, seed=0).auc > 0.6


def test_concept_shift_does_not_fire():
    sc = generate(ScenarioSpec("concept_pair", n=6000, seed=0))
    f = fit(ModelSpec("gbdt", n_trees=30), sc.train)
    assert 0.45 <= shift_detect(f, sc.train, sc.new, seed=0).auc <= 0.55


def test_baseline_suite_identical_data():
    sc = generate(ScenarioSpec("covariate_rho", n=2000, seed=1))
    f = fit(ModelSpec("gbdt", n_trees=20), sc.train)
    board = baseline_suite(f, sc.new, sc.new, seed=1, B=5)
    assert board.b1_input_ks == board.b2_prediction_wasserstein == board.b4_prediction_ks == 0.0
    assert board.b3_explanation_ndcg == 0.0
    for v in (board.b6_input_c2st, board.b7_output_c2st, board.explanation_shift):
        assert 0.45 <= v <= 0.55
    assert board.b5_uncertainty > 0


def test_c2st_needs_rows():
    with pytest.raises(DomainError):
        c2st(np.zeros((3, 1)), np.ones((10, 1)), ("a",))


def test_driver_coefficients_follow_gamma():
    coefs = []
    for gamma in (0.0, 0.5, 0.9):
        f, d_val, d_te = _et_setup(gamma=gamma, p5=True)
        coefs.append([abs(d.coefficient) for d in et_inspect(f, d_val, d_te).drivers])
    c = np.array(coefs)
    assert np.all(np.diff(c[:, 2]) > 0) and np.all(np.diff(c[:, 3]) > 0)
    assert c[-1, 2] - c[0, 2] > c[-1, 3] - c[0, 3]
    assert np.all(c[:, :2] < 0.2 * c[-1, 2])


def test_driver_distances_noise_feature_last():
    d = generate(ScenarioSpec("et_fairness", n=3000, seed=4, gamma=0.9)).train
    noise = np.random.default_rng(4).normal(size=(d.n, 1))
    d = Dataset(np.hstack([d.x, noise]), d.feature_names + ("N",), y=d.y, z=d.z)
    d_tr, d_val, d_te = split_three_way(d, seed=4)
    # the premise: f ignores the noise column, so its attribution is exactly zero
    f = fit(ModelSpec.parse("tree:max_depth=3"), d_tr)
    assert 3 not in f.trees[0].used_features()
    r = et_inspect(f, d_val, d_te)
    dist = explain_drivers(r, n_bootstrap=50, seed=4)
    assert np.argmin(dist) == 3
    assert np.argmax(dist) == 2
    with pytest.raises(DomainError):
        explain_drivers(r, n_bootstrap=10)


def test_uninformative_drivers_match_random_baseline():
    f, d_val, d_te = _et_setup(n=3000, case="uninformative", gamma=0.8, target="regression", model="ols")
    r = et_inspect(f, d_val, d_te)
    dist = explain_drivers(r, n_bootstrap=50, seed=1)
    # distance between two independent random-label laws, as a yardstick
    null = explain_drivers(r.with_distances(dist), r.train_data.replace(y=np.random.default_rng(0).permutation(r.train_data.y)), n_bootstrap=50, seed=2)
    assert np.all(dist <= null + 2 * null.std())


def test_independence_tests_and_power_point_determinism():
    d = generate(ScenarioSpec("power", n=200, seed=0, mu=0.3)).train
    ps = independence_tests(d.x, d.z, 0)
    assert set(ps) == {"bm_auc", "accuracy", "asymptotic_auc"} and all(0 <= v <= 1 for v in ps.values())
    a, b = power_point(0.1, 0.5, runs=20, seed=1), power_point(0.1, 0.5, runs=20, seed=1)
    assert a == b and 0.0 <= a.power("bm_auc") <= 1.0
