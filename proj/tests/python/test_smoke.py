import numpy as np
import pytest

import gsm


def test_multiplier_constants():
    assert gsm.multiplier_upper_bound(80, 100) == pytest.approx(1.8647, abs=5e-5)
    assert gsm.multiplier_upper_bound(1000, 100) == pytest.approx(1.6438, abs=5e-5)


def test_estimate_shapes_and_symmetry():
    rng = np.random.default_rng(0)
    x = np.abs(rng.normal(size=(60, 5)))
    before = x.copy()
    fit = gsm.estimate(x, h="pow:1:3", nlambda=20)
    assert np.array_equal(x, before)
    K = fit["K"]
    assert K.shape == (5, 5)
    assert np.array_equal(K, K.T)
    assert fit["eta"].shape == (5,)
    assert len(fit["lambdas"]) == 20
    assert all(a > b for a, b in zip(fit["lambdas"], fit["lambdas"][1:]))
    assert fit["selected_index"] == 19


def test_simulate_estimate_roundtrip():
    sim = gsm.simulate(10, 2000, graph="block:0.8:5", seed=3, burn_in=500, thin=20)
    assert sim["x"].shape == (2000, 10)
    assert (sim["x"] >= 0).all()
    assert np.linalg.eigvalsh(sim["K0"]).min() == pytest.approx(0.1, abs=1e-8)
    fit = gsm.estimate(sim["x"], centered=True, h="log1p:inf", ebic=True, refit=True, penalize_diagonal=False)
    assert fit["refitted"]
    assert len(fit["ebic"]) == 50
    roc = gsm.path_roc(fit["path_K"], sim["K0"])
    assert roc["auc"] > 0.9
    assert roc["fpr"][0] == 0 and roc["tpr"][-1] == 1


def test_univariate():
    assert gsm.cramer_rao("sigma2", 1.0, 0.0) == pytest.approx(2.0, abs=1e-6)
    assert gsm.cramer_rao("mu", 12.0, 1.0) == pytest.approx(1.0, rel=1e-6)
    x = np.array([0.5, 1.0, 2.0])
    assert gsm.estimate_sigma2(x, 0.0, "const:1") == np.mean(x**2)
    v = gsm.asymptotic_variance("mu", 2.0, 1.0, "pow:1:3")
    assert np.isfinite(v) and v > 0
    assert np.isfinite(gsm.estimate_mu(x, 1.0, "log1p:1"))


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        gsm.estimate(np.array([[1.0, -1.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        gsm.estimate(np.ones((5, 3)), h="nope")
    with pytest.raises(gsm.DomainError):
        gsm.simulate(10, 5, graph="block:0.8:3")
