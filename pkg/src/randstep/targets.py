"""Benchmark target distributions.

Each factory returns a Target bundling the log-density (up to an additive
constant), its analytic gradient, the dimension, a direct sampler when the
law is tractable, and the exact first-coordinate marginal when known.  All
density and gradient callables are shape-generic: they accept arrays of
shape (..., d) and act on the last axis, so the same code serves a single
chain state and a batch of states.
"""

import numpy as np
from scipy import stats

from .special import std_normal_cdf, std_normal_quantile


class MarginalLaw:
    """Exact law of the first coordinate: CDF and quantile function."""

    def __init__(self, name, cdf, quantile):
        self.name = name
        self.cdf = cdf
        self.quantile = quantile


class Target:
    def __init__(self, name, dim, params, log_density, grad_log_density,
                 direct_sampler=None, first_marginal=None, metadata=None):
        self.name = name
        self.dim = int(dim)
        self.params = dict(params)
        self.log_density = log_density
        self.grad_log_density = grad_log_density
        self.direct_sampler = direct_sampler
        self.first_marginal = first_marginal
        self.metadata = metadata if metadata is not None else {}

    def __repr__(self):
        return "Target(%s, dim=%d)" % (self.name, self.dim)


class PoissonRegressionData:
    """Synthetic design for the Poisson regression posterior."""

    def __init__(self, covariates, responses, true_parameter, seed):
        covariates = np.asarray(covariates, dtype=float)
        responses = np.asarray(responses)
        true_parameter = np.asarray(true_parameter, dtype=float)
        n, d = covariates.shape
        if n != 10 * d:
            raise ValueError("need n = 10 d rows, got n=%d, d=%d" % (n, d))
        if responses.shape != (n,) or np.any(responses < 0):
            raise ValueError("responses must be n nonnegative counts")
        self.covariates = covariates
        self.responses = responses
        self.true_parameter = true_parameter
        self.seed = seed
        self.n = n
        self.d = d


def _check_state(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != d:
        raise ValueError("state must have trailing axis of length %d" % d)
    return x


def make_std_normal(d):
    d = int(d)
    if d < 1:
        raise ValueError("d must be >= 1")

    def log_density(x):
        x = _check_state(x, d)
        return -0.5 * np.sum(x * x, axis=-1)

    def grad_log_density(x):
        return -_check_state(x, d)

    def direct_sampler(rng, size=None):
        return rng.standard_normal(d if size is None else (int(size), d))

    marginal = MarginalLaw("std_normal", std_normal_cdf, std_normal_quantile)
    return Target("std_normal", d, {"d": d}, log_density, grad_log_density,
                  direct_sampler, marginal)


def make_laplace_1d():
    def log_density(x):
        x = _check_state(x, 1)
        return -np.abs(x[..., 0])

    def grad_log_density(x):
        x = _check_state(x, 1)
        # np.sign(0) = 0: the kink at the origin takes the midpoint
        # subgradient, and a continuous chain lands there with probability 0
        return -np.sign(x)

    def direct_sampler(rng, size=None):
        return rng.laplace(0.0, 1.0, (1,) if size is None else (int(size), 1))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.5 * np.exp(x), 1.0 - 0.5 * np.exp(-x))

    def quantile(p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError("p must be in (0, 1)")
        return np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 - 2.0 * p))

    marginal = MarginalLaw("laplace", cdf, quantile)
    return Target("laplace_1d", 1, {}, log_density, grad_log_density,
                  direct_sampler, marginal)


def make_student_t5_1d():
    def log_density(x):
        x = _check_state(x, 1)
        return -3.0 * np.log1p(x[..., 0] ** 2 / 5.0)

    def grad_log_density(x):
        x = _check_state(x, 1)
        return -6.0 * x / (5.0 + x * x)

    def direct_sampler(rng, size=None):
        return rng.standard_t(5.0, (1,) if size is None else (int(size), 1))

    law = stats.t(df=5)
    marginal = MarginalLaw("student_t5", law.cdf, law.ppf)
    return Target("student_t5_1d", 1, {}, log_density, grad_log_density,
                  direct_sampler, marginal)


def make_funnel(d, sigma2):
    """Scale-hierarchy target: X1 ~ N(0, sigma2), Xi | X1 ~ N(0, e^{X1}).

    Joint log density -x1^2/(2 sigma2) - (d-1) x1 / 2 - e^{-x1} sum x_i^2 / 2;
    the middle term is the log-normalizer of the conditional block.
    """
    d = int(d)
    if d < 2:
        raise ValueError("funnel needs d >= 2")
    sigma2 = float(sigma2)
    if sigma2 <= 0.0:
        raise ValueError("sigma2 must be positive")
    sigma = np.sqrt(sigma2)

    def log_density(x):
        x = _check_state(x, d)
        x1 = x[..., 0]
        s2 = np.sum(x[..., 1:] ** 2, axis=-1)
        with np.errstate(over="ignore"):
            return (-0.5 * x1 * x1 / sigma2 - 0.5 * (d - 1) * x1
                    - 0.5 * np.exp(-x1) * s2)

    def grad_log_density(x):
        x = _check_state(x, d)
        x1 = x[..., 0]
        rest = x[..., 1:]
        with np.errstate(over="ignore"):
            e = np.exp(-x1)
            g = np.empty_like(x)
            g[..., 0] = (-x1 / sigma2 - 0.5 * (d - 1)
                         + 0.5 * e * np.sum(rest * rest, axis=-1))
            g[..., 1:] = -rest * e[..., None]
        return g

    def direct_sampler(rng, size=None):
        shape = () if size is None else (int(size),)
        x1 = sigma * rng.standard_normal(shape)
        rest = np.exp(0.5 * x1)[..., None] * rng.standard_normal(shape + (d - 1,))
        return np.concatenate([x1[..., None], rest], axis=-1)

    marginal = MarginalLaw(
        "normal_scale",
        lambda x: std_normal_cdf(np.asarray(x, dtype=float) / sigma),
        lambda p: sigma * std_normal_quantile(p))
    return Target("funnel", d, {"d": d, "sigma2": sigma2}, log_density,
                  grad_log_density, direct_sampler, marginal)


def make_rosenbrock(a, b):
    """Banana-shaped 2-d target, log density -a x1^2 - b (x2 - x1^2)^2."""
    a = float(a)
    b = float(b)
    if a <= 0.0 or b <= 0.0:
        raise ValueError("a and b must be positive")

    def log_density(x):
        x = _check_state(x, 2)
        x1, x2 = x[..., 0], x[..., 1]
        return -a * x1 * x1 - b * (x2 - x1 * x1) ** 2

    def grad_log_density(x):
        x = _check_state(x, 2)
        x1, x2 = x[..., 0], x[..., 1]
        r = x2 - x1 * x1
        g = np.empty_like(x)
        g[..., 0] = -2.0 * a * x1 + 4.0 * b * x1 * r
        g[..., 1] = -2.0 * b * r
        return g

    def direct_sampler(rng, size=None):
        shape = () if size is None else (int(size),)
        x1 = rng.standard_normal(shape) / np.sqrt(2.0 * a)
        x2 = x1 * x1 + rng.standard_normal(shape) / np.sqrt(2.0 * b)
        return np.stack([x1, x2], axis=-1)

    s1 = 1.0 / np.sqrt(2.0 * a)
    marginal = MarginalLaw(
        "normal_scale",
        lambda x: std_normal_cdf(np.asarray(x, dtype=float) / s1),
        lambda p: s1 * std_normal_quantile(p))
    return Target("rosenbrock", 2, {"a": a, "b": b}, log_density,
                  grad_log_density, direct_sampler, marginal)


_ETA_CLIP = 700.0


def make_poisson_posterior(d, seed):
    """Poisson regression posterior with synthetic data, n = 10 d.

    Data generated from the given seed: x* ~ N(0, I), rows z_i ~ N(0, I/d),
    Y_i ~ Poisson(exp<z_i, x*>).  The posterior is over the coefficient
    vector with a standard normal prior.  Linear predictors are clipped at
    700 before exponentiation; any clip is flagged in target.metadata.
    """
    d = int(d)
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    x_star = rng.standard_normal(d)
    covariates = rng.standard_normal((10 * d, d)) / np.sqrt(d)
    rates = np.exp(covariates @ x_star)
    responses = rng.poisson(rates)
    data = PoissonRegressionData(covariates, responses, x_star, seed)

    y = responses.astype(float)
    metadata = {"eta_clipped": False}

    def _eta(x):
        eta = x @ covariates.T
        if np.any(eta > _ETA_CLIP):
            metadata["eta_clipped"] = True
            eta = np.minimum(eta, _ETA_CLIP)
        return eta

    def log_density(x):
        x = _check_state(x, d)
        eta = _eta(x)
        return (np.sum(y * eta - np.exp(eta), axis=-1)
                - 0.5 * np.sum(x * x, axis=-1))

    def grad_log_density(x):
        x = _check_state(x, d)
        eta = _eta(x)
        return (y - np.exp(eta)) @ covariates - x

    target = Target("poisson_reg", d, {"d": d, "seed": seed}, log_density,
                    grad_log_density, metadata=metadata)
    return target, data


_FACTORIES = {
    "std_normal": make_std_normal,
    "laplace_1d": lambda **kw: make_laplace_1d(),
    "student_t5_1d": lambda **kw: make_student_t5_1d(),
    "funnel": make_funnel,
    "rosenbrock": make_rosenbrock,
}


def from_config(cfg):
    """Build a Target from {"name": ..., "params": {...}}.

    The Poisson posterior is included; its config carries the data seed so
    the same dataset is regenerated on every run.
    """
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise ValueError("target config needs a 'name' key")
    name = cfg["name"]
    params = dict(cfg.get("params") or {})
    try:
        if name == "poisson_reg":
            target, _ = make_poisson_posterior(**params)
            return target
        if name not in _FACTORIES:
            raise KeyError
        return _FACTORIES[name](**params)
    except KeyError:
        raise ValueError("unknown target %r" % (name,))
    except TypeError as err:
        raise ValueError("bad parameters for target %r: %s" % (name, err))
