"""SGLD sampler, explicit convergence constants and Wasserstein estimators.

Thin wrapper over the C++ core. Models and experiment configs are plain
dicts with the same keys as the CLI's JSON config.
"""

import json

import numpy as np

from . import _core
from ._core import DivergenceError, ValidationError, lambda_max, stationary_variance

__all__ = [
    "DivergenceError",
    "ValidationError",
    "bound_check",
    "constants",
    "gen_figure1_data",
    "kde_2d",
    "lambda_max",
    "rate",
    "run_chain",
    "stationary_variance",
    "sweep",
    "verify",
    "wasserstein",
    "w12",
]

__version__ = _core.version()


def _model(model):
    if isinstance(model, str):
        model = {"id": model}
    return json.dumps(model)


def run_chain(model, lambda_, n_steps, beta=1.0, burn_in=0, thinning=1, seed=0, theta0=None, init_sigma=0.0):
    """Runs one chain. Returns (samples, steps, warnings); samples is (n, d)."""
    t0 = None if theta0 is None else np.asarray(theta0, dtype=float)
    samples, steps, warnings = _core.run_chain(
        _model(model), lambda_, beta, n_steps, burn_in, thinning, seed, t0, init_sigma
    )
    return np.asarray(samples), np.asarray(steps), list(warnings)


def constants(config):
    """Every explicit constant for the configured model, as a dict."""
    return json.loads(_core.constants(json.dumps(config)))


def verify(model, trials=10000, seed=0, beta=1.0):
    return json.loads(_core.verify(_model(model), beta, trials, seed))


def _cloud(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def wasserstein(a, b, p=2, method="exact", projections=256, seed=0):
    """W_p between two point clouds (rows are points); 1-D arrays are scalars."""
    return json.loads(_core.wasserstein(_cloud(a), _cloud(b), p, method, projections, seed))


def w12(a, b):
    return _core.w12(_cloud(a), _cloud(b))


def gen_figure1_data(seed, n=1000):
    """(z, y, w_star) with z ~ N(0, 0.1 I_2) and logistic labels."""
    z, y, w = _core.gen_figure1_data(seed, n)
    return np.asarray(z), np.asarray(y), np.asarray(w)


def kde_2d(samples, grid=128):
    """(xs, ys, density, integral); density[i, j] is at (xs[i], ys[j])."""
    xs, ys, dens, integral = _core.kde_2d(np.asarray(samples, dtype=float), grid)
    return np.asarray(xs), np.asarray(ys), np.asarray(dens), integral


def sweep(config):
    return json.loads(_core.sweep(json.dumps(config)))


def rate(config):
    return json.loads(_core.rate(json.dumps(config)))


def bound_check(config):
    return json.loads(_core.bound_check(json.dumps(config)))
