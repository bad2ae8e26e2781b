"""Fixed-step Metropolis-Hastings kernels.

Six proposal families around a common transition step: Gaussian random walk,
MALA, the Barker sign-flip proposal, their Rademacher-increment analogues in
one dimension, and HMC with a leapfrog integrator.  Everything is
shape-generic over a trailing coordinate axis: states of shape (d,) step a
single chain, states of shape (n, d) step n independent chains at once, and
the step size may then be a scalar or one value per row.

Acceptance ratios are assembled in log scale and only exponentiated against
the uniform draw; h-independent normalizers that cancel inside a ratio are
never formed there (log_proposal_density keeps them, since it promises the
exact normalized density).
"""

import numpy as np

KINDS = ("rwm", "mala", "barker", "rademacher_rwm", "rademacher_barker", "hmc")
DENSITY_KINDS = ("rwm", "mala", "barker")
_GRAD_KINDS = ("mala", "barker", "rademacher_barker", "hmc")
_LOG_2PI = np.log(2.0 * np.pi)


class RunAbortError(RuntimeError):
    """A transition hit non-finite quantities it cannot step through."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ProposalKernel:
    def __init__(self, kind, target, L=10):
        if kind not in KINDS:
            raise ValueError("unknown kernel kind %r; expected one of %s"
                             % (kind, KINDS))
        if kind.startswith("rademacher") and target.dim != 1:
            raise ValueError("%s is defined for one-dimensional targets" % kind)
        L = int(L)
        if L < 1:
            raise ValueError("L must be a positive integer")
        self.kind = kind
        self.target = target
        self.L = L
        self.needs_grad = kind in _GRAD_KINDS
        self.has_density = kind in DENSITY_KINDS

    def __repr__(self):
        if self.kind == "hmc":
            return "ProposalKernel(hmc, L=%d, target=%s)" % (self.L,
                                                             self.target.name)
        return "ProposalKernel(%s, target=%s)" % (self.kind, self.target.name)


class TransitionOutcome:
    """One MH transition: the proposal, the decision, and bookkeeping.

    next_state/proposal carry the trailing coordinate axis of the input;
    acceptance_prob, accepted and effective_step are scalars for a single
    chain and per-row arrays for a batch.  multiplier records the step
    multiplier z of a randomized wrapper (1 for plain kernels).  log_pi_next
    and grad_next cache the target evaluations at next_state when the step
    already produced them, so a chain loop never re-evaluates.
    """

    __slots__ = ("next_state", "proposal", "acceptance_prob", "accepted",
                 "effective_step", "multiplier", "log_pi_next", "grad_next")

    def __init__(self, next_state, proposal, acceptance_prob, accepted,
                 effective_step, multiplier=1.0, log_pi_next=None,
                 grad_next=None):
        self.next_state = next_state
        self.proposal = proposal
        self.acceptance_prob = acceptance_prob
        self.accepted = accepted
        self.effective_step = effective_step
        self.multiplier = multiplier
        self.log_pi_next = log_pi_next
        self.grad_next = grad_next


def log_sigmoid(t):
    return -np.logaddexp(0.0, -np.asarray(t, dtype=float))


def _col(h):
    return np.asarray(h, dtype=float)[..., None]


def _checked_grad(target, x):
    g = target.grad_log_density(x)
    if not np.all(np.isfinite(g)):
        raise RunAbortError("non-finite gradient at the current state", state=x)
    return g


def _sanitize_log_density(lp):
    """Map NaN from boundary arithmetic (inf - inf) to -inf; +inf is a bug."""
    lp = np.asarray(lp, dtype=float)
    if np.any(np.isposinf(lp)):
        raise RunAbortError("log-density evaluated to +inf")
    return np.where(np.isnan(lp), -np.inf, lp)


def leapfrog(target, x, p, eps, n_steps):
    """n_steps leapfrog steps of size eps for H = -log pi(x) + |p|^2 / 2.

    Returns (x, p, grad_at_x, diverged).  Rows whose trajectory left the
    floating-point range are flagged diverged instead of raising: a diverged
    trajectory has infinite energy error and is rejected by the caller.
    """
    eps = _col(eps) if np.ndim(eps) else eps
    with np.errstate(over="ignore", invalid="ignore"):
        g = target.grad_log_density(x)
        p = p + 0.5 * eps * g
        for i in range(n_steps):
            x = x + eps * p
            g = target.grad_log_density(x)
            if i < n_steps - 1:
                p = p + eps * g
        p = p + 0.5 * eps * g
    bad = ~(np.all(np.isfinite(x), axis=-1) & np.all(np.isfinite(p), axis=-1)
            & np.all(np.isfinite(g), axis=-1))
    return x, p, g, bad


def propose(kernel, x, h, rng, grad_x=None, log_pi_x=None):
    """Draw y ~ Q_h(x, .); returns (y, extra) with the auxiliary draws.

    For HMC the extra record carries the momenta and the energy difference
    that mh_step turns into the acceptance probability.
    """
    x = np.asarray(x, dtype=float)
    hh = _col(h)
    root_h = np.sqrt(hh)
    kind = kernel.kind

    if kind == "rwm":
        return x + root_h * rng.standard_normal(x.shape), {}

    if kind == "mala":
        g = _checked_grad(kernel.target, x) if grad_x is None else grad_x
        y = x + hh * g + np.sqrt(2.0) * root_h * rng.standard_normal(x.shape)
        return y, {"grad_x": g}

    if kind == "barker":
        g = _checked_grad(kernel.target, x) if grad_x is None else grad_x
        w = root_h * rng.standard_normal(x.shape)
        flip = rng.random(x.shape) < _expit(g * w)
        y = x + np.where(flip, w, -w)
        return y, {"grad_x": g}

    if kind == "rademacher_rwm":
        s = 2.0 * rng.integers(0, 2, size=x.shape) - 1.0
        return x + root_h * s, {}

    if kind == "rademacher_barker":
        g = _checked_grad(kernel.target, x) if grad_x is None else grad_x
        w = root_h * (2.0 * rng.integers(0, 2, size=x.shape) - 1.0)
        flip = rng.random(x.shape) < _expit(g * w)
        y = x + np.where(flip, w, -w)
        return y, {"grad_x": g}

    # hmc
    g = _checked_grad(kernel.target, x) if grad_x is None else grad_x
    lp_x = kernel.target.log_density(x) if log_pi_x is None else log_pi_x
    p0 = rng.standard_normal(x.shape)
    y, p1, g_y, diverged = leapfrog(kernel.target, x, p0, np.sqrt(h), kernel.L)
    with np.errstate(invalid="ignore", over="ignore"):
        lp_y = _sanitize_log_density(kernel.target.log_density(y))
        neg_delta_h = (lp_y - lp_x
                       + 0.5 * (np.sum(p0 * p0, axis=-1)
                                - np.sum(p1 * p1, axis=-1)))
    neg_delta_h = np.where(diverged | np.isnan(neg_delta_h), -np.inf,
                           neg_delta_h)
    extra = {"grad_x": g, "p_start": p0, "p_end": p1, "log_pi_y": lp_y,
             "grad_y": g_y, "neg_delta_h": neg_delta_h, "diverged": diverged}
    return y, extra


def _expit(t):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(t, dtype=float)))


def log_proposal_density(kernel, x, y, h):
    """Exact log Q_h(x, y) for the density-based kinds."""
    if kernel.kind not in DENSITY_KINDS:
        raise ValueError("kind %r has no tractable proposal density"
                         % kernel.kind)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    d = kernel.target.dim
    diff = y - x
    if kernel.kind == "rwm":
        return (-0.5 * np.sum(diff * diff, axis=-1) / h
                - 0.5 * d * (_LOG_2PI + np.log(h)))
    if kernel.kind == "mala":
        g = _checked_grad(kernel.target, x)
        dev = diff - _col(h) * g
        return (-0.25 * np.sum(dev * dev, axis=-1) / h
                - 0.5 * d * (_LOG_2PI + np.log(2.0 * h)))
    g = _checked_grad(kernel.target, x)
    per_coord = (np.log(2.0) + log_sigmoid(g * diff)
                 - 0.5 * diff * diff / _col(h))
    return np.sum(per_coord, axis=-1) - 0.5 * d * (_LOG_2PI + np.log(h))


def _log_ratio_density_kinds(kernel, x, y, h, lp_x, lp_y, g_x, g_y):
    """log [pi(y) q_h(y,x)] - log [pi(x) q_h(x,y)], h-normalizers dropped."""
    kind = kernel.kind
    base = lp_y - lp_x
    if kind in ("rwm", "rademacher_rwm"):
        return base
    if kind == "mala":
        diff = y - x
        hh = _col(h)
        fwd = diff - hh * g_x
        rev = -diff - hh * g_y
        h = np.asarray(h, dtype=float)
        return base + 0.25 * (np.sum(fwd * fwd, axis=-1)
                              - np.sum(rev * rev, axis=-1)) / h
    # barker and rademacher_barker share the sign-flip form
    diff = y - x
    return base + np.sum(log_sigmoid(-g_y * diff) - log_sigmoid(g_x * diff),
                         axis=-1)


def log_accept_prob(kernel, x, y, h, lp_x=None, lp_y=None, g_x=None, g_y=None):
    """log alpha_h(x, y) without running the chain (not defined for HMC)."""
    if kernel.kind == "hmc":
        raise ValueError("HMC acceptance depends on the momentum draw")
    target = kernel.target
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if lp_x is None:
        lp_x = target.log_density(x)
    if lp_y is None:
        lp_y = _sanitize_log_density(target.log_density(y))
    live = lp_y > -np.inf
    if kernel.needs_grad:
        if g_x is None:
            g_x = _checked_grad(target, x)
        if g_y is None:
            g_y = _grad_at_proposals(target, y, live)
    with np.errstate(invalid="ignore"):
        ratio = _log_ratio_density_kinds(kernel, x, y, h, lp_x, lp_y, g_x, g_y)
    ratio = np.where(live, ratio, -np.inf)
    return np.minimum(0.0, ratio)


def _grad_at_proposals(target, y, live):
    """Gradient at proposals, zeroed where the density is zero.

    Only rows with positive target density feed the reverse proposal term;
    a non-finite gradient there aborts, elsewhere it is irrelevant.
    """
    with np.errstate(all="ignore"):
        g = target.grad_log_density(y)
    bad = ~np.all(np.isfinite(g), axis=-1)
    if np.any(bad & live):
        raise RunAbortError("non-finite gradient at a positive-density "
                            "proposal", state=y)
    keep = np.asarray(live)[..., None]
    return np.where(keep, g, 0.0)


def mh_step(kernel, x, h, rng, lp_x=None, grad_x=None):
    """One Metropolis-Hastings transition from x at step h."""
    target = kernel.target
    x = np.asarray(x, dtype=float)
    batch_shape = x.shape[:-1]
    if lp_x is None:
        lp_x = target.log_density(x)
    if kernel.needs_grad and grad_x is None:
        grad_x = _checked_grad(target, x)

    if kernel.kind == "hmc":
        y, extra = propose(kernel, x, h, rng, grad_x=grad_x, log_pi_x=lp_x)
        log_alpha = np.minimum(0.0, extra["neg_delta_h"])
        lp_y, g_y = extra["log_pi_y"], extra["grad_y"]
    else:
        y, extra = propose(kernel, x, h, rng, grad_x=grad_x)
        lp_y = _sanitize_log_density(target.log_density(y))
        live = lp_y > -np.inf
        g_y = (_grad_at_proposals(target, y, live) if kernel.needs_grad
               else None)
        with np.errstate(invalid="ignore"):
            ratio = _log_ratio_density_kinds(kernel, x, y, h, lp_x, lp_y,
                                             grad_x, g_y)
        log_alpha = np.minimum(0.0, np.where(live, ratio, -np.inf))

    accept = -rng.standard_exponential(batch_shape) < log_alpha
    keep = np.asarray(accept)[..., None]
    next_state = np.where(keep, y, x)
    lp_next = np.where(accept, lp_y, lp_x)
    if kernel.needs_grad and g_y is not None:
        grad_next = np.where(keep, g_y, grad_x)
    else:
        grad_next = grad_x
    return TransitionOutcome(
        next_state=next_state, proposal=y,
        acceptance_prob=np.exp(log_alpha), accepted=accept,
        effective_step=h, multiplier=1.0,
        log_pi_next=lp_next, grad_next=grad_next)


def kernel_from_config(cfg, target):
    """Build a kernel from {"name": ..., "params": {"L": ...}}."""
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise ValueError("kernel config needs a 'name' key")
    params = dict(cfg.get("params") or {})
    try:
        return ProposalKernel(cfg["name"], target, **params)
    except TypeError as err:
        raise ValueError("bad kernel parameters: %s" % err)
