"""Randomized-step-size kernels.

Two constructions share the same proposal mixture and differ only in the
acceptance rule.  The auxiliary wrapper draws a fresh multiplier z each
transition and runs its base kernel at the multiplied step, accepting with
the base ratio at that step.  The marginalized MALA kernels propose the same
way but accept with the ratio of marginal proposal densities, integrating z
out analytically; for uniform and exponential multipliers those marginals
reduce to incomplete or complete Bessel-K factors evaluated in log scale.

Step conventions: "step" multiplies h itself (effective step h z), "scale"
multiplies the proposal standard deviation (base runs at h z^2, recorded
effective step sqrt(h) z).  The marginalized kernels are defined under the
step convention.
"""

import numpy as np

from .kernels import (
    ProposalKernel,
    TransitionOutcome,
    _checked_grad,
    _grad_at_proposals,
    _sanitize_log_density,
    propose,
    mh_step,
)
from .special import log_bessel_k, log_upper_incomplete_k
from .step_dists import Exponential1, StepSizeDistribution, Uniform01, from_config as mu_from_config

CONVENTIONS = ("step", "scale")


class AuxiliaryKernel:
    """Base kernel run at a freshly randomized step each transition."""

    def __init__(self, base, mu, h, convention="step"):
        if not isinstance(base, ProposalKernel):
            raise ValueError("base must be a ProposalKernel")
        if not isinstance(mu, StepSizeDistribution):
            raise ValueError("mu must be a step-size distribution")
        if convention not in CONVENTIONS:
            raise ValueError("convention must be one of %s" % (CONVENTIONS,))
        h = float(h)
        if h <= 0.0:
            raise ValueError("h must be positive")
        self.base = base
        self.mu = mu
        self.h = h
        self.convention = convention
        self.target = base.target
        self.needs_grad = base.needs_grad

    def __repr__(self):
        return "AuxiliaryKernel(%s, mu=%s, h=%g, %s)" % (
            self.base.kind, self.mu.name, self.h, self.convention)


def aux_step(kernel, x, rng, h=None, lp_x=None, grad_x=None):
    """One transition of the auxiliary kernel; z is drawn first, then the
    base kernel moves at the multiplied step.  h overrides the stored step
    (used by adaptive drivers)."""
    h0 = kernel.h if h is None else h
    x = np.asarray(x, dtype=float)
    batch_shape = x.shape[:-1]
    z = kernel.mu.sample(rng, batch_shape if batch_shape else None)
    if kernel.convention == "step":
        h_base = h0 * z
        recorded = h0 * z
    else:
        h_base = h0 * z * z
        recorded = np.sqrt(h0) * z
    out = mh_step(kernel.base, x, h_base, rng, lp_x=lp_x, grad_x=grad_x)
    out.effective_step = recorded
    out.multiplier = z
    return out


class MarginalizedMalaKernel:
    """MALA with the step multiplier integrated out of the acceptance ratio.

    mu_kind "uniform" or "exponential"; anything else has no implemented
    closed form for the marginal proposal density.
    """

    def __init__(self, mu_kind, target, h):
        if mu_kind not in ("uniform", "exponential"):
            raise ValueError("marginalized kernel supports mu_kind 'uniform' "
                             "or 'exponential', not %r" % (mu_kind,))
        h = float(h)
        if h <= 0.0:
            raise ValueError("h must be positive")
        self.mu_kind = mu_kind
        self.target = target
        self.h = h
        self.mu = Uniform01() if mu_kind == "uniform" else Exponential1()
        self.nu = 1.0 - 0.5 * target.dim
        self._base = ProposalKernel("mala", target)
        self.needs_grad = True

    def __repr__(self):
        return "MarginalizedMalaKernel(%s, h=%g, target=%s)" % (
            self.mu_kind, self.h, self.target.name)


def _log_qbar_rows(kernel, x, y, g_x, h):
    """Marginal proposal log-density rows, up to an (x, y)-free constant.

    Rows must satisfy y != x.  With g the gradient at the departure point,
    a = |y-x|^2/(4h), c = <y-x, g>/2:
      uniform:      c + log Kbar_nu(a, h|g|^2/4)
      exponential:  c + (1/2 - d/4) (log a - log b) + log K_nu(2 sqrt(ab)),
                    b = 1 + h|g|^2/4
    where nu = 1 - d/2 and Kbar is the upper-incomplete K integral.
    """
    diff = y - x
    a = np.sum(diff * diff, axis=-1) / (4.0 * h)
    c = 0.5 * np.sum(diff * g_x, axis=-1)
    gg = np.sum(g_x * g_x, axis=-1)
    if kernel.mu_kind == "uniform":
        b = 0.25 * h * gg
        return c + log_upper_incomplete_k(kernel.nu, a, b)
    b = 1.0 + 0.25 * h * gg
    return (c + (0.5 - 0.25 * kernel.target.dim) * (np.log(a) - np.log(b))
            + log_bessel_k(kernel.nu, 2.0 * np.sqrt(a) * np.sqrt(b)))


def log_marginal_mala_density(kernel, x, y, grad_x=None, h=None):
    """log Q-bar_h(x, y) up to an additive constant shared by (x,y), (y,x).

    Rejects y == x (the marginal density has an integrable singularity
    there) and non-finite gradients.
    """
    h0 = kernel.h if h is None else float(h)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = y - x
    if np.any(np.sum(diff * diff, axis=-1) == 0.0):
        raise ValueError("marginal density undefined at y == x")
    g = _checked_grad(kernel.target, x) if grad_x is None else grad_x
    return _log_qbar_rows(kernel, x, y, g, h0)


def marginalized_log_accept_prob(kernel, x, y, h=None, lp_x=None, lp_y=None,
                                 g_x=None, g_y=None):
    """log alpha-tilde_h(x, y) = min(0, log pi(y) - log pi(x)
    + log Qbar(y,x) - log Qbar(x,y)); batched over leading axes.

    y == x rows get log alpha = 0 (the chain cannot move anyway), rows with
    pi(y) = 0 get -inf.
    """
    h0 = kernel.h if h is None else float(h)
    target = kernel.target
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 1
    x2 = x[None, :] if scalar else x
    y2 = y[None, :] if scalar else y
    if lp_x is None:
        lp_x = target.log_density(x2)
    if lp_y is None:
        lp_y = _sanitize_log_density(target.log_density(y2))
    lp_x = np.atleast_1d(lp_x)
    lp_y = np.atleast_1d(lp_y)
    if g_x is None:
        g_x = _checked_grad(target, x2)
    else:
        g_x = np.asarray(g_x).reshape(x2.shape)
    live = lp_y > -np.inf
    if g_y is None:
        g_y = _grad_at_proposals(target, y2, live)
    else:
        g_y = np.asarray(g_y).reshape(y2.shape)
    stay = np.sum((y2 - x2) ** 2, axis=-1) == 0.0

    ratio = np.full(lp_y.shape, -np.inf)
    sel = live & ~stay
    if np.any(sel):
        xs, ys = x2[sel], y2[sel]
        q = _log_qbar_rows(kernel,
                           np.concatenate([xs, ys]),
                           np.concatenate([ys, xs]),
                           np.concatenate([g_x[sel], g_y[sel]]), h0)
        m = xs.shape[0]
        ratio[sel] = lp_y[sel] - lp_x[sel] + q[m:] - q[:m]
    log_alpha = np.minimum(0.0, ratio)
    log_alpha = np.where(stay, 0.0, log_alpha)
    if scalar:
        return float(log_alpha[0])
    return log_alpha


def marginalized_step(kernel, x, rng, h=None, lp_x=None, grad_x=None):
    """One transition of the marginalized kernel.

    The proposal still draws z and moves like MALA at step h z (a valid
    draw from the marginal mixture); only the acceptance ratio integrates
    z out."""
    h0 = kernel.h if h is None else float(h)
    target = kernel.target
    x = np.asarray(x, dtype=float)
    batch_shape = x.shape[:-1]
    if lp_x is None:
        lp_x = target.log_density(x)
    if grad_x is None:
        grad_x = _checked_grad(target, x)
    z = kernel.mu.sample(rng, batch_shape if batch_shape else None)
    h_eff = h0 * z
    y, _ = propose(kernel._base, x, h_eff, rng, grad_x=grad_x)
    lp_y = _sanitize_log_density(target.log_density(y))
    g_y = _grad_at_proposals(target, y, lp_y > -np.inf)
    log_alpha_flat = marginalized_log_accept_prob(
        kernel, x.reshape(-1, target.dim), y.reshape(-1, target.dim), h=h0,
        lp_x=np.ravel(lp_x), lp_y=np.ravel(lp_y),
        g_x=grad_x.reshape(-1, target.dim), g_y=g_y.reshape(-1, target.dim))
    log_alpha = np.reshape(log_alpha_flat, batch_shape)

    accept = -rng.standard_exponential(batch_shape) < log_alpha
    keep = np.asarray(accept)[..., None]
    next_state = np.where(keep, y, x)
    return TransitionOutcome(
        next_state=next_state, proposal=y,
        acceptance_prob=np.exp(log_alpha), accepted=accept,
        effective_step=h_eff, multiplier=z,
        log_pi_next=np.where(accept, lp_y, lp_x),
        grad_next=np.where(keep, g_y, grad_x))


def transition(kernel, x, rng, h=None, lp_x=None, grad_x=None):
    """One step of a plain, auxiliary, or marginalized kernel.

    Plain kernels need an explicit h; wrapped kernels use their stored step
    unless h overrides it.
    """
    if isinstance(kernel, AuxiliaryKernel):
        return aux_step(kernel, x, rng, h=h, lp_x=lp_x, grad_x=grad_x)
    if isinstance(kernel, MarginalizedMalaKernel):
        return marginalized_step(kernel, x, rng, h=h, lp_x=lp_x,
                                 grad_x=grad_x)
    if h is None:
        raise ValueError("plain kernels need an explicit step h")
    return mh_step(kernel, x, h, rng, lp_x=lp_x, grad_x=grad_x)


def describe_kernel(kernel):
    """Flat (kernel, wrapper, mu) fields for CSV rows and labels."""
    if isinstance(kernel, AuxiliaryKernel):
        return {"kernel": kernel.base.kind, "wrapper": "auxiliary",
                "mu": kernel.mu.name}
    if isinstance(kernel, MarginalizedMalaKernel):
        return {"kernel": "mala", "wrapper": "marginalized",
                "mu": kernel.mu_kind}
    return {"kernel": kernel.kind, "wrapper": "none", "mu": "none"}


def kernel_label(kernel):
    desc = describe_kernel(kernel)
    if desc["wrapper"] == "none":
        return desc["kernel"]
    return "%s|%s(%s)" % (desc["kernel"], desc["wrapper"], desc["mu"])


def wrap_kernel(base, wrapper_cfg, h):
    """Apply a wrapper config {"wrapper": ..., "mu": ..., "convention": ...}
    to a base kernel; "none" returns the base unchanged."""
    cfg = dict(wrapper_cfg or {})
    wrapper = cfg.get("wrapper", "none")
    if wrapper == "none":
        return base
    if wrapper == "auxiliary":
        if "mu" not in cfg:
            raise ValueError("auxiliary wrapper needs a 'mu' config")
        mu = mu_from_config(cfg["mu"])
        return AuxiliaryKernel(base, mu, h,
                               convention=cfg.get("convention", "step"))
    if wrapper == "marginalized":
        if base.kind != "mala":
            raise ValueError("marginalized wrapper is defined for MALA only")
        mu_name = (cfg.get("mu") or {}).get("name")
        return MarginalizedMalaKernel(mu_name, base.target, h)
    raise ValueError("unknown wrapper %r" % (wrapper,))
