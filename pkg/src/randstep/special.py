"""Log-scale special functions for the marginalized kernels.

Everything numerically delicate lives here: the modified Bessel function of
the second kind and its upper-incomplete variant, both returned as logarithms
because the orders that show up in d dimensions (|order| = d/2 - 1) push the
linear-scale values far outside double range.

The workhorse is a quadrature for integrals of the form

    integral over (u0, inf) of exp(-nu*u - w*K(u)) du,

with K(u) = cosh(u), exp(u) or exp(-u).  The log-integrand is strictly
concave in u for w > 0, so it is unimodal with exponentially decaying flanks;
we locate the mode, bracket the window where the integrand is within
exp(-DROP) of its peak, and apply composite Gauss-Legendre panels with
log-sum-exp accumulation, doubling the panel count until the log value is
stable.
"""

import numpy as np
from scipy import special as sp

_LN2 = float(np.log(2.0))
_LOG_SQRT_2PI = 0.5 * float(np.log(2.0 * np.pi))

# Window depth: integrand below exp(-DROP) of the peak is discarded.  The
# truncated mass is < width * exp(-DROP) relative to the peak panel, far
# below the 1e-11 convergence tolerance.
_DROP = 45.0
_CONV_TOL = 1e-11
_MAX_LEVELS = 10


def std_normal_pdf(u):
    u = np.asarray(u, dtype=float)
    return np.exp(-0.5 * u * u - _LOG_SQRT_2PI)


def std_normal_cdf(u):
    return sp.ndtr(np.asarray(u, dtype=float))


def std_normal_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("quantile defined for p in (0, 1)")
    return sp.ndtri(p)


def erfc(u):
    """Complementary error function, written via the normal cdf."""
    return 2.0 * std_normal_cdf(-np.sqrt(2.0) * np.asarray(u, dtype=float))


def _log_cosh(u):
    au = np.abs(u)
    return au + np.log1p(np.exp(-2.0 * au)) - _LN2


def _gl_nodes(n):
    # cached Gauss-Legendre rule on [-1, 1]
    rule = _gl_cache.get(n)
    if rule is None:
        rule = np.polynomial.legendre.leggauss(n)
        _gl_cache[n] = rule
    return rule


_gl_cache: dict = {}


def _concave_exponent(u, nu, logw, kind):
    """-nu*u - w*K(u) evaluated overflow-safely; u has a trailing node axis."""
    if kind == "cosh":
        logk = _log_cosh(u)
    elif kind == "exp":
        logk = u
    else:  # "expneg"
        logk = -u
    with np.errstate(over="ignore"):
        return -nu * u - np.exp(logw + logk)


def _log_concave_tail_integral(nu, w, u0, kind):
    """log of integral over (u0, inf) of exp(-nu*u - w*K(u)) du.

    nu, w, u0: 1-d arrays of equal length; w > 0; u0 may be -inf for the
    cosh kind.  Returns a 1-d array of log values.
    """
    nu = np.asarray(nu, dtype=float)
    w = np.asarray(w, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    logw = np.log(w)

    def g1(u):
        return _concave_exponent(u[:, None], nu[:, None], logw[:, None], kind)[:, 0]

    # stationary point and local curvature/slope of the exponent
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == "cosh":
            mode = np.arcsinh(-nu / w)
        elif kind == "exp":
            # -nu - w e^u = 0 has a root only for nu < 0
            mode = np.where(nu < 0.0, np.log(np.maximum(-nu, 1e-300)) - logw, -np.inf)
        else:  # expneg: -nu + w e^{-u} = 0 needs nu > 0
            if np.any(nu <= 0.0):
                raise ValueError("integral diverges for non-positive order")
            mode = logw - np.log(nu)
        m = np.maximum(mode, u0)
        if kind == "cosh":
            curv = np.exp(logw + _log_cosh(m))
            slope = -nu - w * np.sinh(m)
        elif kind == "exp":
            curv = np.exp(logw + m)
            slope = -nu - curv
        else:
            curv = np.exp(logw - m)
            slope = -nu + curv
    gm = g1(m)
    target = gm - _DROP

    # initial window guess from a quadratic fit at the (possibly clipped) mode
    sigma = np.sqrt(2.0 * _DROP / np.clip(curv, 1e-290, None))
    slope_scale = _DROP / np.clip(np.abs(slope), 1e-12, None)
    step0 = np.clip(np.minimum(sigma, slope_scale), 1e-9, 50.0)

    # expand left until the exponent has dropped below target (or the domain
    # edge is reached); concavity makes the flank monotone
    left_flank = m > u0
    step = step0.copy()
    lo = np.where(left_flank, np.maximum(m - step, u0), m)
    for _ in range(90):
        push = left_flank & (g1(lo) > target) & (lo > u0)
        if not push.any():
            break
        step = np.where(push, 2.0 * step, step)
        lo = np.where(push, np.maximum(m - step, u0), lo)
    L = lo

    # expand right; the exponent is strictly decreasing beyond the mode
    step = step0.copy()
    hi = m + step
    for _ in range(90):
        push = g1(hi) > target
        if not push.any():
            break
        step = np.where(push, 2.0 * step, step)
        hi = np.where(push, m + step, hi)
    R = hi

    # composite Gauss-Legendre with panel doubling until the log value is
    # stable; the windowed integrand is analytic so convergence is fast
    width = R - L
    logwidth = np.log(width)
    out = np.full(m.shape, np.nan)
    prev = np.full(m.shape, np.nan)
    active = np.ones(m.shape, dtype=bool)
    n_panels = 8
    n_nodes = 16
    xg, wg = _gl_nodes(n_nodes)
    for level in range(_MAX_LEVELS + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        edges = np.linspace(0.0, 1.0, n_panels + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        t = (mids[:, None] + half * xg[None, :]).ravel()
        logwt = np.tile(np.log(half * wg), n_panels)
        u = L[idx, None] + width[idx, None] * t[None, :]
        vals = _concave_exponent(u, nu[idx, None], logw[idx, None], kind)
        vals = vals + logwt[None, :] + logwidth[idx, None]
        vmax = vals.max(axis=1)
        cur = vmax + np.log(np.exp(vals - vmax[:, None]).sum(axis=1))
        if level > 0:
            tol = _CONV_TOL + 4e-15 * np.abs(cur)
            done = np.abs(cur - prev[idx]) <= tol
            out[idx[done]] = cur[done]
            active[idx[done]] = False
        prev[idx] = cur
        n_panels *= 2
    rest = np.nonzero(active)[0]
    out[rest] = prev[rest]
    return out


def log_bessel_k(nu, x):
    """log K_nu(x) for x > 0, robust over |nu| <= 200 and tiny or huge x.

    Fast path is the exponentially scaled routine from scipy; where that
    over- or underflows (large order at small argument) the value comes from
    the cosh integral representation
        K_nu(x) = 1/2 * integral over R of exp(-nu*u - x*cosh u) du
    evaluated in log scale.
    """
    nu_a, x_a = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(x, dtype=float))
    if np.any(~np.isfinite(x_a)) or np.any(x_a <= 0.0):
        raise ValueError("argument must be positive and finite")
    if np.any(~np.isfinite(nu_a)):
        raise ValueError("order must be finite")
    shape = nu_a.shape
    nu_f = np.abs(nu_a.ravel())  # K_{-nu} = K_nu
    x_f = x_a.ravel()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        kv = sp.kve(nu_f, x_f)
        out = np.log(kv) - x_f
    bad = ~np.isfinite(out)
    if bad.any():
        out[bad] = -_LN2 + _log_concave_tail_integral(
            -nu_f[bad], x_f[bad], np.full(bad.sum(), -np.inf), "cosh"
        )
    out = out.reshape(shape)
    if out.shape == ():
        return float(out)
    return out


def log_upper_incomplete_k(nu, a, b):
    """log of integral over (1, inf) of t^(-nu-1) exp(-a t - b / t) dt.

    Converges iff a > 0, or a == 0 with nu > 0.  Negative a or b is a domain
    error.  Computed through the substitution t = sqrt(b/a) e^u, which turns
    the integrand into exp(-nu*u - 2 sqrt(ab) cosh u) on (log sqrt(a/b), inf),
    a strictly concave exponent handled by the windowed quadrature; the pure
    one-sided cases (a == 0 or b == 0) reduce to the exp kinds.
    """
    nu_a, a_a, b_a = np.broadcast_arrays(
        np.asarray(nu, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    if np.any(a_a < 0.0) or np.any(b_a < 0.0):
        raise ValueError("coefficients must be non-negative")
    if np.any(~np.isfinite(a_a)) or np.any(~np.isfinite(b_a)) or np.any(~np.isfinite(nu_a)):
        raise ValueError("arguments must be finite")
    if np.any((a_a == 0.0) & (nu_a <= 0.0)):
        raise ValueError("integral diverges for a == 0 with non-positive order")
    shape = nu_a.shape
    nu_f = nu_a.ravel().astype(float)
    a_f = a_a.ravel().astype(float)
    b_f = b_a.ravel().astype(float)
    out = np.empty(nu_f.shape)

    both = (a_f > 0.0) & (b_f > 0.0)
    if both.any():
        av, bv, nv = a_f[both], b_f[both], nu_f[both]
        dlog = np.log(av) - np.log(bv)
        w = 2.0 * np.sqrt(av) * np.sqrt(bv)
        out[both] = 0.5 * nv * dlog + _log_concave_tail_integral(nv, w, 0.5 * dlog, "cosh")
    only_a = (a_f > 0.0) & (b_f == 0.0)
    if only_a.any():
        # t = e^u maps to exp(-nu*u - a e^u) on (0, inf)
        out[only_a] = _log_concave_tail_integral(
            nu_f[only_a], a_f[only_a], np.zeros(only_a.sum()), "exp"
        )
    only_b = (a_f == 0.0) & (b_f > 0.0)
    if only_b.any():
        # t = e^v with v = -u: exp(-nu*u - b e^{-u}) on (0, inf)
        out[only_b] = _log_concave_tail_integral(
            nu_f[only_b], b_f[only_b], np.zeros(only_b.sum()), "expneg"
        )
    neither = (a_f == 0.0) & (b_f == 0.0)
    if neither.any():
        out[neither] = -np.log(nu_f[neither])

    out = out.reshape(shape)
    if out.shape == ():
        return float(out)
    return out
