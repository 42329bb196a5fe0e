import math

import numpy as np
import pytest

import sgld


def test_gaussian_chain_variance():
    samples, steps, warnings = sgld.run_chain(
        {"id": "gaussian", "d": 1}, 0.2, n_steps=200_000, burn_in=1000, seed=3
    )
    assert samples.shape == (199_000, 1)
    assert steps[0] == 1001
    v = sgld.stationary_variance(0.2, 1.0, 1.0)
    assert abs(samples.var() / v - 1) < 0.03
    assert warnings == []


def test_chain_is_reproducible():
    a, _, _ = sgld.run_chain("mixture", 0.1, n_steps=500, seed=9)
    b, _, _ = sgld.run_chain("mixture", 0.1, n_steps=500, seed=9)
    assert np.array_equal(a, b)


def test_divergence_and_validation_errors():
    with pytest.raises(sgld.DivergenceError):
        sgld.run_chain({"id": "gaussian", "d": 1}, 3.0, n_steps=2000)
    with pytest.raises(sgld.ValidationError):
        sgld.run_chain({"id": "gaussian"}, -1.0, n_steps=10)
    with pytest.raises(ValueError):
        sgld.run_chain({"id": "nope"}, 0.1, n_steps=10)


def test_wasserstein_worked_values():
    assert sgld.wasserstein([0.0, 2.0], [3.0, 1.0], p=1)["value"] == 1.0
    e = sgld.wasserstein([0.0, 1.0], [2.0], p=2, method="sorted_1d")
    assert e["method"] == "sorted_1d" and e["n_mu"] == 2 and e["n_nu"] == 1
    assert e["value"] == pytest.approx(math.sqrt(2.5))
    pts = np.random.default_rng(0).normal(size=(30, 2))
    assert sgld.wasserstein(pts, pts + [3.0, 4.0], p=2)["value"] == pytest.approx(5.0)
    assert sgld.w12(np.zeros((1, 2)), np.array([[0.6, 0.8]])) == pytest.approx(4.0)


def test_constants_worked_value():
    assert sgld.lambda_max(1.0, 1.0, 16.0) == 1 / 256
    rep = sgld.constants({"model": {"id": "gaussian", "d": 1}, "constants": {"moments_mc": 20000}})
    assert rep["constants"]["lambda_max"] == pytest.approx(1 / 512)
    assert "C0" in rep["constants"] and "formulas" in rep


def test_figure_data_and_kde():
    z, y, w = sgld.gen_figure1_data(1)
    assert z.shape == (1000, 2) and set(np.unique(y)) <= {0, 1} and w.shape == (2,)
    assert np.all(np.abs(z.mean(axis=0)) < 4 * math.sqrt(0.1 / 1000))
    xs, ys, dens, integral = sgld.kde_2d(np.random.default_rng(1).normal(size=(5000, 2)), grid=64)
    assert dens.shape == (64, 64) and abs(integral - 1) < 0.02


def test_verify_reports_no_violations():
    rep = sgld.verify("mixture", trials=2000, seed=4)
    assert rep["all_pass"]


def test_sweep_rows_carry_method():
    rows = sgld.sweep(
        {
            "model": {"id": "gaussian", "d": 1},
            "chain": {"n_steps": 200},
            "experiment": {"lambda_grid": [0.1, 0.2], "n_chains": 256, "repetitions": 2},
        }
    )
    assert len(rows) == 4
    assert all(r["distance"]["method"] == "sorted_1d" and r["distance"]["n_mu"] == 256 for r in rows)
