"""Distributions of the positive step-size multiplier z.

A randomized kernel draws z from one of the families below and runs its base
proposal with step h*z (or h*z**2, depending on the wrapper convention).  Each
family exposes a density on z > 0, a sampler driven by an explicit generator,
and a config round-trip used by the experiment driver.  A numeric certificate
for the ratio condition mu(z/h) >= C * mu(z), h >= 1, is provided for the
continuous families; the heavy-tail results downstream lean on it.

Objects are immutable after construction and hold no generator state, so a
single instance can be shared across worker threads.
"""

import numpy as np

from .special import log_bessel_k, std_normal_cdf, std_normal_quantile

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _check_finite(name, value):
    value = float(value)
    if not np.isfinite(value):
        raise ValueError("%s must be finite, got %r" % (name, value))
    return value


def _check_positive(name, value):
    value = _check_finite(name, value)
    if value <= 0.0:
        raise ValueError("%s must be positive, got %r" % (name, value))
    return value


class StepSizeDistribution:
    """Base interface; subclasses fill in log_density and sample."""

    name = "base"
    support = (0.0, np.inf)

    def log_density(self, z):
        raise NotImplementedError

    def density(self, z):
        scalar = np.ndim(z) == 0
        with np.errstate(under="ignore"):
            out = np.exp(self.log_density(z))
        return float(out) if scalar else out

    def sample(self, rng, size=None):
        raise NotImplementedError

    def config(self):
        raise NotImplementedError

    def __repr__(self):
        cfg = self.config()
        args = ", ".join("%s=%r" % kv for kv in sorted(cfg["params"].items()))
        return "%s(%s)" % (type(self).__name__, args)


class Uniform01(StepSizeDistribution):
    """Uniform multiplier on (0, 1]."""

    name = "uniform"
    support = (0.0, 1.0)

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        return np.where((z > 0.0) & (z <= 1.0), 0.0, -np.inf)

    def sample(self, rng, size=None):
        # 1 - U places the draw in (0, 1]: the multiplier must stay positive
        return 1.0 - rng.random(size)

    def config(self):
        return {"name": "uniform", "params": {}}


class Exponential1(StepSizeDistribution):
    """Unit-rate exponential multiplier."""

    name = "exponential"

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(z > 0.0, -z, -np.inf)

    def sample(self, rng, size=None):
        return rng.standard_exponential(size)

    def config(self):
        return {"name": "exponential", "params": {}}


class HalfNormal(StepSizeDistribution):
    """|N(0, sigma^2)|, density sqrt(2/pi)/sigma * exp(-z^2 / (2 sigma^2))."""

    name = "half_normal"

    def __init__(self, sigma=1.0):
        self.sigma = _check_positive("sigma", sigma)
        self._log_const = 0.5 * np.log(2.0 / np.pi) - np.log(self.sigma)

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        u = z / self.sigma
        return np.where(z > 0.0, self._log_const - 0.5 * u * u, -np.inf)

    def sample(self, rng, size=None):
        return self.sigma * np.abs(rng.standard_normal(size))

    def config(self):
        return {"name": "half_normal", "params": {"sigma": self.sigma}}


class TruncatedGaussianPositive(StepSizeDistribution):
    """N(mean, variance) conditioned on z > 0, sampled by inverse CDF."""

    name = "trunc_gaussian"

    def __init__(self, mean, variance):
        self.mean = _check_finite("mean", mean)
        self.variance = _check_positive("variance", variance)
        self.sigma = np.sqrt(self.variance)
        # mass of the untruncated law below zero
        self._p0 = float(std_normal_cdf(-self.mean / self.sigma))
        if self._p0 >= 1.0:
            raise ValueError("truncation to z > 0 keeps essentially no mass "
                             "(mean %g, sigma %g)" % (self.mean, self.sigma))
        self._log_kept = np.log1p(-self._p0)

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        u = (z - self.mean) / self.sigma
        val = -_LOG_SQRT_2PI - np.log(self.sigma) - 0.5 * u * u - self._log_kept
        return np.where(z > 0.0, val, -np.inf)

    def sample(self, rng, size=None):
        scalar = size is None
        u = rng.random(1 if scalar else size)
        p = self._p0 + (1.0 - self._p0) * u
        # u = 0 or rounding could park p on a boundary; nudge inward one ulp
        p = np.clip(p, np.nextafter(self._p0, 1.0), np.nextafter(1.0, 0.0))
        z = self.mean + self.sigma * std_normal_quantile(p)
        return float(z[0]) if scalar else z

    def config(self):
        return {"name": "trunc_gaussian",
                "params": {"mean": self.mean, "variance": self.variance}}


class GeneralizedInverseGaussian(StepSizeDistribution):
    """GIG(p, a, b): density prop. to z^(p-1) exp(-(a z + b / z) / 2), z > 0.

    Normalizer (a/b)^(p/2) / (2 K_p(sqrt(ab))).  Sampling is rejection in
    x = log z, where the log-density p*x - (a e^x + b e^-x)/2 is strictly
    concave; the envelope is a flat cap at the mode flanked by the tangents
    at x_mode +/- delta, with delta chosen so the log-density drops by about
    1.45 nats there (the optimum for a Gaussian shape, and the arccosh limit
    keeps the tangents on the shoulders of flat-topped cases).
    """

    name = "gig"

    _DROP = 1.445

    def __init__(self, p, a, b):
        self.p = _check_finite("p", p)
        self.a = _check_positive("a", a)
        self.b = _check_positive("b", b)
        sab = np.sqrt(self.a) * np.sqrt(self.b)
        self._log_norm = (0.5 * self.p * (np.log(self.a) - np.log(self.b))
                          - np.log(2.0) - log_bessel_k(self.p, sab))
        # mode of f(x) = p x - (a e^x + b e^-x)/2 solves a e^x - b e^-x = 2p
        root = np.hypot(self.p, sab)
        if self.p >= 0.0:
            ex = (self.p + root) / self.a
        else:
            ex = self.b / (root - self.p)  # rationalized; avoids cancellation
        self._x_mode = np.log(ex)
        self._f_mode = self._f(self._x_mode)
        delta = self._solve_drop(self.p, root)
        x_l = self._x_mode - delta
        x_r = self._x_mode + delta
        s_l = self._fprime(x_l)
        s_r = self._fprime(x_r)
        # tangents meet the cap level f_mode at the plateau edges
        u_l = x_l + (self._f_mode - self._f(x_l)) / s_l
        u_r = x_r + (self._f_mode - self._f(x_r)) / s_r
        self._s_l, self._s_r = s_l, s_r
        self._u_l, self._u_r = u_l, u_r
        w = np.array([1.0 / s_l, u_r - u_l, -1.0 / s_r])
        self._cum = np.cumsum(w) / np.sum(w)

    def _f(self, x):
        with np.errstate(over="ignore", under="ignore"):
            return self.p * x - 0.5 * (self.a * np.exp(x) + self.b * np.exp(-x))

    def _fprime(self, x):
        return self.p - 0.5 * (self.a * np.exp(x) - self.b * np.exp(-x))

    @classmethod
    def _solve_drop(cls, p, root):
        # f(mode) - f(mode +/- d) = p (sinh d - d) + root (cosh d - 1),
        # increasing in d; bisect for a drop of _DROP nats
        def drop(d):
            return p * (np.sinh(d) - d) + root * (np.cosh(d) - 1.0) - cls._DROP

        lo, hi = 1e-8, 1.0
        while drop(hi) < 0.0:
            hi *= 2.0
            if hi > 1e4:
                break
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if drop(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = (self._log_norm + (self.p - 1.0) * np.log(z)
                   - 0.5 * (self.a * z + self.b / z))
        return np.where(z > 0.0, val, -np.inf)

    def _hat(self, x):
        lo = self._f_mode + self._s_l * (x - self._u_l)
        hi = self._f_mode + self._s_r * (x - self._u_r)
        return np.where(x < self._u_l, lo,
                        np.where(x > self._u_r, hi, self._f_mode))

    def sample(self, rng, size=None):
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        out = np.empty(n)
        filled = 0
        for _ in range(64):
            m = max(int(1.4 * (n - filled)) + 16, 16)
            pick = rng.random(m)
            e = rng.standard_exponential(m)
            v = rng.random(m)
            x = np.where(pick < self._cum[0], self._u_l - e / self._s_l,
                         np.where(pick < self._cum[1],
                                  self._u_l + v * (self._u_r - self._u_l),
                                  self._u_r - e / self._s_r))
            keep = -rng.standard_exponential(m) <= self._f(x) - self._hat(x)
            take = x[keep]
            k = min(take.size, n - filled)
            out[filled:filled + k] = np.exp(take[:k])
            filled += k
            if filled == n:
                break
        else:
            raise RuntimeError("GIG rejection sampler failed to fill the batch")
        if scalar:
            return float(out[0])
        return out.reshape(size)

    def config(self):
        return {"name": "gig", "params": {"p": self.p, "a": self.a, "b": self.b}}


class Degenerate(StepSizeDistribution):
    """Point mass at z0; turns a randomized wrapper back into its base kernel."""

    name = "degenerate"

    def __init__(self, z0=1.0):
        self.z0 = _check_positive("z0", z0)
        self.support = (self.z0, self.z0)

    def log_density(self, z):
        raise ValueError("Degenerate step distribution has no density")

    def density(self, z):
        raise ValueError("Degenerate step distribution has no density")

    def sample(self, rng, size=None):
        # deliberately consumes no randomness, so a wrapper with a point mass
        # at z0 = 1 replays the base kernel's stream draw for draw
        if size is None:
            return self.z0
        return np.full(size, self.z0)

    def config(self):
        return {"name": "degenerate", "params": {"z0": self.z0}}


DEFAULT_H_GRID = (1.0, 2.0, 5.0, 10.0, 100.0, 1000.0)


def default_z_grid(dist, num=200):
    """200 log-spaced points in [1e-4, 10] clipped to the support of dist."""
    z = np.logspace(-4.0, 1.0, num)
    lo, hi = dist.support
    return z[(z > lo) & (z <= hi)]


def assumption1_certificate(dist, h_grid=None, z_grid=None):
    """Numeric lower bound for mu(z/h) / mu(z) over the given grids.

    Returns min over grid points with mu(z) > 0.  A strictly positive value
    is evidence that the ratio is bounded below on the grid; it is not a
    proof over all h >= 1, z > 0.
    """
    if isinstance(dist, Degenerate):
        raise ValueError("point mass has no density; certificate undefined")
    h = np.asarray(DEFAULT_H_GRID if h_grid is None else h_grid,
                   dtype=float).ravel()
    z = np.asarray(default_z_grid(dist) if z_grid is None else z_grid,
                   dtype=float).ravel()
    if h.size == 0 or z.size == 0:
        raise ValueError("certificate grids must be non-empty")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(z))):
        raise ValueError("certificate grids must be finite")
    if np.any(h < 1.0):
        raise ValueError("h grid must satisfy h >= 1")
    if np.any(z <= 0.0):
        raise ValueError("z grid must be positive")
    log_mu = dist.log_density(z)
    ok = log_mu > -np.inf
    if not np.any(ok):
        raise ValueError("no z grid point falls inside the support")
    z = z[ok]
    log_ratio = dist.log_density(z[None, :] / h[:, None]) - log_mu[ok][None, :]
    with np.errstate(under="ignore"):
        return float(np.exp(np.min(log_ratio)))


_REQUIRED_PARAMS = {
    "uniform": (Uniform01, ()),
    "exponential": (Exponential1, ()),
    "half_normal": (HalfNormal, ()),
    "trunc_gaussian": (TruncatedGaussianPositive, ("mean", "variance")),
    "gig": (GeneralizedInverseGaussian, ("p", "a", "b")),
    "degenerate": (Degenerate, ()),
}


def from_config(cfg):
    """Build a distribution from {"name": ..., "params": {...}}."""
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise ValueError("step distribution config needs a 'name' key")
    name = cfg["name"]
    if name not in _REQUIRED_PARAMS:
        raise ValueError("unknown step distribution %r; expected one of %s"
                         % (name, sorted(_REQUIRED_PARAMS)))
    cls, required = _REQUIRED_PARAMS[name]
    params = dict(cfg.get("params") or {})
    for key in required:
        if key not in params:
            raise ValueError("step distribution %r requires parameter %r"
                             % (name, key))
    try:
        return cls(**params)
    except TypeError as err:
        raise ValueError("bad parameters for %r: %s" % (name, err))
