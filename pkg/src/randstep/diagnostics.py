"""Rao-Blackwellized jump estimators, tail probabilities, Q-Q extraction.

The ESJD and Dirichlet-form estimators draw the current state i.i.d. from
the target (every benchmark target here is directly samplable) and weight
each squared proposal jump by the transition's own acceptance probability
instead of the accept indicator.  That removes both the chain
autocorrelation and the accept/reject noise from the estimator; the
unconditioned realized-jump estimator survives in the tests as a
cross-check.
"""

import numpy as np

from .randomized import describe_kernel, kernel_label, transition

_CHUNK = 65536


class EsjdEstimate:
    """Expected squared jump of the first coordinate, with its metadata."""

    __slots__ = ("value", "std_error", "n_samples", "kernel_label",
                 "target_label", "h")

    def __init__(self, value, std_error, n_samples, kernel_label="",
                 target_label="", h=float("nan")):
        if value < 0.0 or std_error < 0.0:
            raise ValueError("esjd value and std_error must be nonnegative")
        if n_samples <= 0:
            raise ValueError("n_samples must be positive")
        self.value = float(value)
        self.std_error = float(std_error)
        self.n_samples = int(n_samples)
        self.kernel_label = kernel_label
        self.target_label = target_label
        self.h = float(h)

    def __repr__(self):
        return ("EsjdEstimate(%.6g +- %.2g, n=%d, %s on %s at h=%g)"
                % (self.value, self.std_error, self.n_samples,
                   self.kernel_label, self.target_label, self.h))


class TailEstimate:
    __slots__ = ("probability", "threshold", "n_iterations")

    def __init__(self, probability, threshold, n_iterations):
        if not 0.0 <= probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        if n_iterations <= 0:
            raise ValueError("n_iterations must be positive")
        self.probability = float(probability)
        self.threshold = float(threshold)
        self.n_iterations = int(n_iterations)

    def __repr__(self):
        return ("TailEstimate(%.6g at threshold %g over %d iterations)"
                % (self.probability, self.threshold, self.n_iterations))


def _merge_moments(parts):
    # Chan-style pairwise combination of (count, mean, sum of squared
    # deviations); exact for streamed shards
    n, mean, m2 = 0, 0.0, 0.0
    for n_b, mean_b, m2_b in parts:
        if n_b == 0:
            continue
        tot = n + n_b
        delta = mean_b - mean
        m2 = m2 + m2_b + delta * delta * (n * n_b / tot)
        mean = mean + delta * (n_b / tot)
        n = tot
    return n, mean, m2


def _rb_moments(kernel, target, f, h, n, rng):
    """Streaming moments of f-jump summands (f(Y)-f(X))^2 alpha, X ~ pi."""
    parts = []
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        x = target.direct_sampler(rng, m)
        out = transition(kernel, x, rng, h=h)
        jump = f(out.proposal) - f(x)
        alpha = out.acceptance_prob
        # alpha = 0 rows may hold an overflowed proposal; 0 * inf is the
        # rejected move's true contribution, 0
        s = np.where(alpha > 0.0, jump * jump * alpha, 0.0)
        mean = s.mean()
        parts.append((m, float(mean), float(np.sum((s - mean) ** 2))))
        done += m
    return _merge_moments(parts)


def _check_rb_inputs(kernel, target, n):
    if target.direct_sampler is None:
        raise ValueError("target %r has no direct sampler" % target.name)
    if kernel.target is not target:
        raise ValueError("kernel was built for a different target")
    if n < 1000:
        raise ValueError("need N >= 1000 samples")


def _sharded_moments(kernel, target, f, h, n, rng, n_shards):
    if n_shards == 1:
        return _rb_moments(kernel, target, f, h, n, rng)
    children = rng.spawn(n_shards)
    sizes = np.full(n_shards, n // n_shards)
    sizes[:n % n_shards] += 1
    return _merge_moments(
        _rb_moments(kernel, target, f, h, int(sz), child)
        for sz, child in zip(sizes, children))


def esjd_rb(kernel, target, h, n, rng, n_shards=1):
    """Rao-Blackwellized ESJD of the first coordinate.

    Estimates E[(Y_1 - X_1)^2 alpha(X, Y)] with X ~ pi i.i.d.; alpha is the
    kernel's own acceptance probability (the base ratio at the multiplied
    step for auxiliary kernels, the marginal ratio for marginalized ones).
    """
    _check_rb_inputs(kernel, target, n)
    count, mean, m2 = _sharded_moments(
        kernel, target, lambda s: s[..., 0], h, n, rng, n_shards)
    se = np.sqrt(m2 / (count - 1) / count)
    h_meta = h if h is not None else getattr(kernel, "h", float("nan"))
    return EsjdEstimate(mean, se, count, kernel_label(kernel), target.name,
                        h_meta)


def dirichlet_rb(kernel, target, f, n, rng, h=None, n_shards=1):
    """Dirichlet form (1/2) E[(f(Y) - f(X))^2 alpha(X, Y)], X ~ pi.

    Returns (estimate, std_error); f must accept (..., d) state arrays.
    """
    _check_rb_inputs(kernel, target, n)
    count, mean, m2 = _sharded_moments(kernel, target, f, h, n, rng,
                                       n_shards)
    se = np.sqrt(m2 / (count - 1) / count)
    return 0.5 * mean, 0.5 * se


def tail_probability(chain, threshold, direction="below"):
    """Fraction of states whose first coordinate is in the tail event."""
    x = np.asarray(chain, dtype=float)
    if x.size == 0:
        raise ValueError("empty chain")
    x1 = x[..., 0] if x.ndim > 1 else x
    if direction == "below":
        hits = x1 < threshold
    elif direction == "above_abs":
        hits = np.abs(x1) > threshold
    else:
        raise ValueError("direction must be 'below' or 'above_abs'")
    return TailEstimate(float(hits.mean()), threshold, x1.size)


def qq_data(chain, reference_quantile_fn, n_points):
    """(theoretical, empirical) first-coordinate quantile pairs at the
    probabilities (i - 1/2) / n_points."""
    if n_points < 2:
        raise ValueError("need at least 2 quantile points")
    x = np.asarray(chain, dtype=float)
    x1 = x[..., 0] if x.ndim > 1 else x
    p = (np.arange(1, n_points + 1) - 0.5) / n_points
    theo = np.asarray(reference_quantile_fn(p), dtype=float)
    emp = np.quantile(x1, p)
    return np.column_stack([theo, emp])


def _g17(v):
    return "%.17g" % float(v)


ESJD_COLUMNS = ("target", "kernel", "wrapper", "mu", "h", "esjd", "se", "n")
TAIL_COLUMNS = ("run_id", "iterations", "estimate")


def write_esjd_csv(path, rows):
    """rows: iterables matching ESJD_COLUMNS; floats written as %.17g."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(ESJD_COLUMNS) + "\n")
        for target, kernel, wrapper, mu, h, esjd, se, n in rows:
            fh.write("%s,%s,%s,%s,%s,%s,%s,%d\n" % (
                target, kernel, wrapper, mu, _g17(h), _g17(esjd), _g17(se),
                n))


def write_tail_csv(path, rows):
    """rows: (run_id, iterations, estimate) triples."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TAIL_COLUMNS) + "\n")
        for run_id, iterations, estimate in rows:
            fh.write("%s,%d,%s\n" % (run_id, iterations, _g17(estimate)))


def esjd_row(estimate, kernel, target):
    """CSV row for an EsjdEstimate, splitting the kernel into its fields."""
    desc = describe_kernel(kernel)
    return (target.name, desc["kernel"], desc["wrapper"], desc["mu"],
            estimate.h, estimate.value, estimate.std_error,
            estimate.n_samples)
