"""Dimension-free scaling limits: efficiency curves and optimal rates.

The acceptance limit a(l) = 2 Phi(-kappa l^(1/(2c)) / 2) and efficiency
eff(l) = l a(l) govern the kernel families through the single exponent c
(1 for RWM, 1/3 for MALA, 1/4 for HMC).  Randomizing the step replaces
both curves by their mu-mixtures; the optima of either family follow from
one-dimensional root-finding and maximization.  kappa is fixed to 1 by
default: every reported quantity (optimal acceptance, efficiency ratio)
is kappa-free, which the tests enforce by invariance.
"""

import numpy as np
from scipy import integrate, optimize

from .special import std_normal_cdf, std_normal_pdf
from .step_dists import Exponential1, StepSizeDistribution, Uniform01

SCALING_EXPONENTS = {"rwm": 1.0, "mala": 1.0 / 3.0, "hmc": 0.25}

# infinite-support quadrature cutoffs; the discarded tails are below
# (1 + Z per linear growth) * density(Z) ~ 1e-60, recorded here rather
# than per call
_TRUNC_HI = {"exponential": 150.0, "half_normal": 45.0}


class ScalingModel:
    __slots__ = ("c", "kappa", "mu")

    def __init__(self, c, kappa=1.0, mu=None):
        if c <= 0.0:
            raise ValueError("scaling exponent c must be positive")
        if kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if mu is not None and not isinstance(mu, StepSizeDistribution):
            raise ValueError("mu must be a step-size distribution")
        self.c = float(c)
        self.kappa = float(kappa)
        self.mu = mu

    def __repr__(self):
        tail = ", mu=%s" % self.mu.name if self.mu is not None else ""
        return "ScalingModel(c=%g, kappa=%g%s)" % (self.c, self.kappa, tail)


class Optimum:
    __slots__ = ("ell_opt", "acceptance_at_opt", "eff_at_opt")

    def __init__(self, ell_opt, acceptance_at_opt, eff_at_opt):
        if not 0.0 < acceptance_at_opt < 1.0:
            raise ValueError("optimal acceptance must lie in (0, 1)")
        self.ell_opt = float(ell_opt)
        self.acceptance_at_opt = float(acceptance_at_opt)
        self.eff_at_opt = float(eff_at_opt)

    def __repr__(self):
        return ("Optimum(ell=%.6g, acceptance=%.4f, eff=%.6g)"
                % (self.ell_opt, self.acceptance_at_opt, self.eff_at_opt))


def accept_rate(model, ell):
    """a(l) = 2 Phi(-kappa l^(1/(2c)) / 2)."""
    ell = np.asarray(ell, dtype=float)
    if np.any(ell < 0.0):
        raise ValueError("ell must be nonnegative")
    r = ell ** (1.0 / (2.0 * model.c))
    out = 2.0 * std_normal_cdf(-0.5 * model.kappa * r)
    return float(out) if out.ndim == 0 else out


def eff(model, ell):
    """eff(l) = l a(l)."""
    out = np.asarray(ell, dtype=float) * accept_rate(model, ell)
    return float(out) if np.ndim(out) == 0 else out


def optimize_base(model):
    """Optimum of eff: solve Phi(-u) = u phi(u) / (2c), l = (2u/kappa)^2c.

    The left side starts at 1/2 and falls to 0, the right side grows from
    0, so a sign change always exists; located by doubling then brentq.
    """
    c = model.c

    def g(u):
        return std_normal_cdf(-u) - u * std_normal_pdf(u) / (2.0 * c)

    hi = 1.0
    while g(hi) > 0.0:
        hi *= 2.0
        if hi > 1e8:
            raise RuntimeError("no sign change while bracketing the "
                               "optimal acceptance equation")
    u = optimize.brentq(g, 1e-12, hi, xtol=1e-14, rtol=8.9e-16)
    ell = (2.0 * u / model.kappa) ** (2.0 * c)
    return Optimum(ell, accept_rate(model, ell), eff(model, ell))


def _mu_cutoff(mu):
    lo, hi = mu.support
    return lo, min(hi, _TRUNC_HI.get(mu.name, np.inf))


def mu_integral(fn, mu, tol=1e-10):
    """integral of fn(z) mu(z) dz over the support, absolute tolerance tol."""
    lo, hi = _mu_cutoff(mu)
    val, err = integrate.quad(lambda z: fn(z) * mu.density(z), lo, hi,
                              epsabs=0.25 * tol, epsrel=1e-12, limit=200)
    if err > tol:
        raise RuntimeError("mu-quadrature reached only %.3g (need %.3g)"
                           % (err, tol))
    return val


def accept_rate_bar(model, ell):
    """Mixture acceptance: integral of a(l z) mu(z) dz."""
    if model.mu is None:
        raise ValueError("model has no step-size distribution")
    return mu_integral(lambda z: accept_rate(model, ell * z), model.mu)


def eff_bar(model, ell):
    """Mixture efficiency: integral of eff(l z) mu(z) dz."""
    if model.mu is None:
        raise ValueError("model has no step-size distribution")
    return mu_integral(lambda z: eff(model, ell * z), model.mu)


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def optimize_bar(model, tol=1e-10):
    """Maximize eff_bar by golden section on a doubling-found bracket."""
    base = optimize_base(model)
    grid = base.ell_opt * 2.0 ** np.arange(-8.0, 9.0)
    vals = [eff_bar(model, l) for l in grid]
    k = int(np.argmax(vals))
    if k == 0 or k == len(grid) - 1:
        raise RuntimeError("efficiency maximum not bracketed by the "
                           "doubling grid")
    a, b = grid[k - 1], grid[k + 1]
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = eff_bar(model, x1), eff_bar(model, x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = eff_bar(model, x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = eff_bar(model, x1)
    ell = 0.5 * (a + b)
    return Optimum(ell, accept_rate_bar(model, ell), eff_bar(model, ell))


def randomized_optimum_residual(model, omega):
    """First-order condition of the mixture optimum in the omega variable:
    integral of u [Phi(-u^(1/2c)) - u^(1/2c) phi(u^(1/2c)) / (2c)] mu(u/omega) du,
    zero at omega = ell_bar_opt (kappa/2)^(2c)."""
    if model.mu is None:
        raise ValueError("model has no step-size distribution")
    c = model.c
    lo, hi = _mu_cutoff(model.mu)

    def f(u):
        r = u ** (1.0 / (2.0 * c))
        return (u * (std_normal_cdf(-r) - r * std_normal_pdf(r) / (2.0 * c))
                * model.mu.density(u / omega))

    val, _ = integrate.quad(f, lo * omega, hi * omega, epsabs=1e-12,
                            epsrel=1e-12, limit=200)
    return val


def c_star(c_of_h, mu, h):
    """Mixture-robust rate: 1 / integral of mu(z) / c(h z) dz."""
    lo, hi = mu.support

    def integrand(z):
        # c(hz) may overflow to inf deep in the tail; mu / inf -> 0 is the
        # correct limiting contribution
        with np.errstate(over="ignore"):
            return mu.density(z) / c_of_h(h * z)

    val, err = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-12,
                              limit=400)
    if val <= 0.0:
        raise RuntimeError("c_star quadrature collapsed")
    if err > 1e-10 * val:
        raise RuntimeError("c_star quadrature reached only rel %.3g"
                           % (err / val))
    return 1.0 / val


def dominating_bounds(kind, params):
    """Integrable envelopes for the mixture efficiency integrands."""
    if kind == "rwm":
        ell = float(params["ell"])
        return lambda z: ell * z
    if kind == "mala":
        bigter = float(params["C"])
        return lambda z: bigter * (z * z + z)
    raise ValueError("no dominating bound for kind %r" % (kind,))


TABLE1_MUS = ("uniform", "exponential")


def table1():
    """Optimal acceptance rates and efficiency losses of the randomized
    kernels, one row per (kernel, mu)."""
    rows = []
    for kind in ("mala", "hmc"):
        c = SCALING_EXPONENTS[kind]
        base = optimize_base(ScalingModel(c))
        for mu_name in TABLE1_MUS:
            mu = Uniform01() if mu_name == "uniform" else Exponential1()
            opt = optimize_bar(ScalingModel(c, mu=mu))
            rows.append({
                "kernel": kind,
                "mu": mu_name,
                "base_acceptance": base.acceptance_at_opt,
                "randomized_acceptance": opt.acceptance_at_opt,
                "efficiency_ratio": base.eff_at_opt / opt.eff_at_opt,
            })
    return rows
