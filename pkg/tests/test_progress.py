import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from cubeverse.fixtures import load_series
from cubeverse.progress import (
    ExponentialDecay,
    FitError,
    FitResult,
    LearningCurve,
    ProgressCurve,
    ProgressSeries,
    bic,
    bic_value,
    collapse,
    compare_families,
    derive_learning_curve,
    fit_exponential,
    fit_family,
    fit_progress_eq2,
    half_life,
    read_series_csv,
    write_series_csv,
)

T20 = np.arange(1, 21, dtype=float)


def series(y, T=T20, label="s", kind="time"):
    return ProgressSeries(label, T, np.asarray(y, dtype=float), kind)


def test_series_validation():
    with pytest.raises(ValueError):
        series([1, 2, 3], T=np.array([1.0, 1.0, 2.0]))
    with pytest.raises(ValueError):
        series([1.0, -1.0], T=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        series([1.0], T=np.array([1.0]), kind="speed")


def test_exponential_exact():
    f = fit_exponential(series(20 * np.exp(-0.1 * T20)))
    assert f.params["k"] == pytest.approx(20, rel=1e-8)
    assert f.params["lam"] == pytest.approx(0.1, rel=1e-8)


def test_linear_exact():
    f = fit_family(series(10 - 0.5 * np.arange(1, 16), T=np.arange(1, 16.0)), "linear")
    assert f.params["a"] == pytest.approx(10, abs=1e-10)
    assert f.params["b"] == pytest.approx(0.5, abs=1e-10)


def test_power_exact():
    f = fit_family(series(8 * T20 ** -0.7), "power")
    assert f.params["k"] == pytest.approx(8, rel=1e-6)
    assert f.params["alpha"] == pytest.approx(0.7, rel=1e-6)


def test_eq2_exact():
    f = fit_progress_eq2(series(1 + np.exp(0.1 * (12 - T20))))
    assert f.converged
    assert f.params["r_learn"] == pytest.approx(0.1, abs=1e-4)
    assert f.params["tau"] == pytest.approx(12, abs=1e-4)
    assert f.params["A"] == 1.0


def test_eq2_unnormalised_keeps_scale():
    f = fit_progress_eq2(series(3 * (1 + np.exp(0.2 * (8 - T20)))), normalize=False)
    assert f.params["A"] == pytest.approx(3, rel=1e-6)


def test_too_few_points():
    with pytest.raises(FitError):
        fit_progress_eq2(series([3.0, 2.0, 1.5], T=np.arange(1, 4.0)))


@settings(max_examples=25, deadline=None)
@given(k=st.floats(1, 500), lam=st.floats(0.02, 0.5), c=st.floats(0.01, 100))
def test_exponential_scale_equivariance(k, lam, c):
    rng = np.random.default_rng(0)
    y = k * np.exp(-lam * T20) * (1 + 0.03 * rng.standard_normal(20))
    a = fit_exponential(series(y))
    b = fit_exponential(series(y * c))
    assert b.params["lam"] == pytest.approx(a.params["lam"], rel=1e-6)
    assert b.params["k"] == pytest.approx(c * a.params["k"], rel=1e-6)


def test_exponential_time_shift():
    y = 20 * np.exp(-0.15 * T20)
    a = fit_exponential(series(y))
    b = fit_exponential(series(y, T=T20 + 5))
    assert b.params["lam"] == pytest.approx(a.params["lam"], rel=1e-8)


def test_estimator_api():
    est = ProgressCurve(normalize=False, n_rates=20)
    assert est.get_params()["n_rates"] == 20
    c = clone(est)
    assert c.get_params() == est.get_params()
    e = ExponentialDecay().fit(T20.reshape(-1, 1), 5 * np.exp(-0.2 * T20))
    assert e.predict([[1.0]])[0] == pytest.approx(5 * math.exp(-0.2))
    assert e.score(T20.reshape(-1, 1), 5 * np.exp(-0.2 * T20)) == pytest.approx(1.0)


def test_bic_formula():
    assert bic_value(2.0, 20, 2) - bic_value(1.0, 20, 2) == pytest.approx(20 * math.log(2))
    assert bic_value(1.0, 20, 2) == pytest.approx(20 * math.log(1 / 20) + 3 * math.log(20))
    with pytest.raises(FitError):
        bic_value(0.0, 20, 2)


def test_bic_equal_parameter_counts():
    a = FitResult("exponential", {"k": 1, "lam": 1}, 3.0, None, 12, True)
    b = FitResult("power", {"k": 1, "alpha": 1}, 3.0, None, 12, True)
    assert bic(a) == bic(b)


def test_bic_prefers_exponential_on_noisy_exponential():
    wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = 20 * np.exp(-0.1 * T20) * (1 + 0.05 * rng.standard_normal(20))
        d = compare_families(series(y))["delta_bic"]
        wins += d["linear"] > 0
    assert wins >= 95


def test_half_life():
    assert half_life(0.1) == pytest.approx(6.931, abs=1e-3)
    with pytest.raises(ValueError):
        half_life(0)


def test_learning_curve_shape():
    lc = LearningCurve(0.3, 10.0)
    assert lc.p_f(10.0) == pytest.approx(0.75)
    p = lc.p_f(np.arange(1, 200))
    assert np.all(np.diff(p) >= 0) and p[-1] == pytest.approx(1.0)


def test_learning_curve_identity():
    rng = np.random.default_rng(1)
    y = 4 * (1 + np.exp(0.1 * (15 - T20))) * (1 + 0.02 * rng.standard_normal(20))
    fit = fit_progress_eq2(series(y))
    lc = derive_learning_curve(fit, 30)
    T = np.array([t for t, _ in lc.samples])
    assert len(T) == 30
    assert np.allclose(lc.progress(T), fit.predict(T), rtol=1e-9, atol=0)


def test_learning_curve_rejects_other_fits():
    f = fit_exponential(series(20 * np.exp(-0.1 * T20)))
    with pytest.raises(FitError):
        derive_learning_curve(f, 10)
    bad = FitResult("progress_eq2", {"A": 1, "r_learn": 0.1, "tau": 5, "asymptote": 1}, 1.0, 1.0, 10, False)
    with pytest.raises(FitError):
        derive_learning_curve(bad, 10)


def test_collapse_identical_rates():
    sset = [series(k * np.exp(-0.1 * T20), label=str(i)) for i, k in enumerate([20, 60, 150, 300, 500])]
    normed, disp = collapse(sset)
    assert disp < 1e-6
    assert all(s.y.max() == pytest.approx(1.0) for s in normed)


def test_collapse_needs_overlap():
    a = series([3.0, 2.0, 1.0], T=np.array([1.0, 2.0, 3.0]))
    b = series([3.0, 2.0, 1.0], T=np.array([5.0, 6.0, 7.0]))
    with pytest.raises(ValueError):
        collapse([a, b])


def test_series_csv_round_trip():
    sset = load_series("sighted.csv")
    back = read_series_csv(write_series_csv(sset))
    for a, b in zip(sset, back):
        assert a.label == b.label and np.array_equal(a.T, b.T) and np.array_equal(a.y, b.y)


def test_fit_result_dict_round_trip():
    f = fit_progress_eq2(series(1 + np.exp(0.1 * (12 - T20))))
    assert FitResult.from_dict(f.to_dict()) == f


# -- fixture series -----------------------------------------------------------


def test_sighted_rates_near_one_tenth():
    for s in load_series("sighted.csv"):
        lam = fit_exponential(s).params["lam"]
        assert abs(lam - 0.1) <= 0.03, (s.label, lam)


def test_moves_rate_near_one_fifth():
    (moves,) = load_series("moves.csv")
    lam_m = fit_exponential(moves).params["lam"]
    lam_t = fit_exponential(load_series("sighted.csv")[0]).params["lam"]
    assert abs(lam_m - 0.2) <= 0.03
    assert 1.5 <= lam_m / lam_t <= 3.0


def test_sighted_exponential_wins_bic():
    for s in load_series("sighted.csv"):
        d = compare_families(s)["delta_bic"]
        assert d["linear"] > 0 and d["power"] > 0


def test_sighted_learning_rates_agree():
    rates = [fit_progress_eq2(s).params["r_learn"] for s in load_series("sighted.csv")]
    assert max(rates) - min(rates) <= 0.03


def test_blindfold_early_rate():
    for s in load_series("blindfold.csv"):
        r = fit_progress_eq2(s.head(8)).params["r_learn"]
        assert abs(r - 0.3) <= 0.05, (s.label, r)


def test_progress_identity_far_from_inflection():
    lc = LearningCurve(0.3, 90.0, 2.0)
    T = np.arange(1.0, 9.0)
    expect = 2.0 * (1 + np.exp(0.3 * (90.0 - T)))
    assert np.allclose(lc.progress(T), expect, rtol=1e-12, atol=0)
