"""Randomized-step kernels: marginal densities, acceptance flow, wrappers."""

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import expit

from randstep.kernels import (
    ProposalKernel,
    log_accept_prob,
    log_proposal_density,
    mh_step,
    propose,
)
from randstep.randomized import (
    AuxiliaryKernel,
    MarginalizedMalaKernel,
    aux_step,
    log_marginal_mala_density,
    marginalized_log_accept_prob,
    marginalized_step,
    wrap_kernel,
)
from randstep.step_dists import Degenerate, Exponential1, HalfNormal, Uniform01
from randstep.targets import Target, make_std_normal, make_student_t5_1d

from _oracles import ks_distance, oracle_log_marginal_mala

STD1 = make_std_normal(1)
STD2 = make_std_normal(2)
STD3 = make_std_normal(3)

# Frozen from the direct z-mixture quadrature oracle (tests/_oracles.py):
# log Qbar(y -> x) - log Qbar(x -> y), a normalization-free quantity the
# closed forms must reproduce.
RATIO_UNIF_D1 = 0.064401917934381991    # x=0.3, y=-0.5, h=0.7, N(0,1)
RATIO_EXP_D3 = -0.33108938769027496     # x=(.2,-.4,1), y=(-.3,.1,.5), h=1.3


def box_target():
    def logp(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x[..., 0]) <= 1.0, 0.0, -np.inf)

    return Target("box", 1, {}, logp,
                  lambda x: np.zeros_like(np.asarray(x, dtype=float)))


def package_ratio(kernel, x, y):
    fwd = log_marginal_mala_density(kernel, x, y)
    rev = log_marginal_mala_density(kernel, y, x)
    return rev - fwd


def oracle_ratio(target, x, y, h, mu_kind):
    fwd = oracle_log_marginal_mala(x, y, h, mu_kind, target.grad_log_density)
    rev = oracle_log_marginal_mala(y, x, h, mu_kind, target.grad_log_density)
    return rev - fwd


class TestMarginalDensity:
    def test_frozen_uniform_1d(self):
        k = MarginalizedMalaKernel("uniform", STD1, 0.7)
        r = package_ratio(k, np.array([0.3]), np.array([-0.5]))
        np.testing.assert_allclose(r, RATIO_UNIF_D1, atol=1e-9)

    def test_frozen_exponential_3d(self):
        k = MarginalizedMalaKernel("exponential", STD3, 1.3)
        r = package_ratio(k, np.array([0.2, -0.4, 1.0]),
                          np.array([-0.3, 0.1, 0.5]))
        np.testing.assert_allclose(r, RATIO_EXP_D3, atol=1e-9)

    @pytest.mark.parametrize("mu_kind", ["uniform", "exponential"])
    @pytest.mark.parametrize("d", [1, 3])
    def test_ratio_matches_quadrature(self, mu_kind, d):
        target = make_std_normal(d)
        rng = np.random.default_rng(100 + d)
        for h in (0.3, 1.7):
            k = MarginalizedMalaKernel(mu_kind, target, h)
            for _ in range(3):
                x = rng.normal(size=d)
                y = rng.normal(size=d)
                np.testing.assert_allclose(
                    package_ratio(k, x, y), oracle_ratio(target, x, y, h, mu_kind),
                    atol=1e-6)

    @pytest.mark.parametrize("mu_kind", ["uniform", "exponential"])
    def test_offset_from_oracle_is_xy_free(self, mu_kind):
        # the closed form drops only terms shared by every (x, y) pair
        k = MarginalizedMalaKernel(mu_kind, STD3, 1.3)
        rng = np.random.default_rng(7)
        offs = []
        for _ in range(10):
            x = rng.normal(size=3)
            y = rng.normal(size=3)
            p = log_marginal_mala_density(k, x, y)
            o = oracle_log_marginal_mala(x, y, 1.3, mu_kind,
                                         STD3.grad_log_density)
            offs.append(float(p) - o)
        assert np.ptp(offs) < 1e-10

    def test_zero_gradient_exponential_is_radial(self):
        # at a stationary point the density depends on y only through |y - x|
        k = MarginalizedMalaKernel("exponential", STD3, 0.9)
        x = np.zeros(3)
        dirs = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0],
                         [0.6, 0.48, 0.64]])
        r = 0.8
        vals = [log_marginal_mala_density(k, x, r * u) for u in dirs]
        np.testing.assert_allclose(vals, vals[0], rtol=0, atol=1e-12)
        closer = log_marginal_mala_density(k, x, 0.3 * dirs[0])
        assert closer > vals[0]

    @pytest.mark.parametrize("mu_kind", ["uniform", "exponential"])
    def test_zero_gradient_row_mixed_into_batch(self, mu_kind):
        # x = 0 puts the uniform closed form on its b = 0 branch; a row with
        # b > 0 rides along in the same call
        k = MarginalizedMalaKernel(mu_kind, STD3, 1.3)
        xb = np.array([[0.0, 0.0, 0.0], [0.4, -0.2, 0.1]])
        yb = np.array([[0.5, -0.2, 0.3], [0.9, 0.3, -0.4]])
        r = (log_marginal_mala_density(k, yb, xb)
             - log_marginal_mala_density(k, xb, yb))
        for i in range(2):
            np.testing.assert_allclose(
                r[i], oracle_ratio(STD3, xb[i], yb[i], 1.3, mu_kind),
                atol=1e-9)

    def test_batch_matches_rows(self):
        k = MarginalizedMalaKernel("exponential", STD2, 0.6)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(8, 2))
        y = rng.normal(size=(8, 2))
        batch = log_marginal_mala_density(k, x, y)
        rows = [log_marginal_mala_density(k, x[i], y[i]) for i in range(8)]
        np.testing.assert_array_equal(batch, np.array(rows))

    def test_y_equals_x_raises(self):
        k = MarginalizedMalaKernel("uniform", STD2, 1.0)
        x = np.array([0.5, -0.2])
        with pytest.raises(ValueError):
            log_marginal_mala_density(k, x, x.copy())
        xb = np.array([[0.5, -0.2], [1.0, 1.0]])
        yb = np.array([[0.5, -0.2], [0.0, 2.0]])
        with pytest.raises(ValueError):
            log_marginal_mala_density(k, xb, yb)

    def test_rejects_unsupported_mu(self):
        for bad in ("gig", "degenerate", "half_normal", None):
            with pytest.raises(ValueError):
                MarginalizedMalaKernel(bad, STD1, 1.0)

    def test_rejects_bad_h(self):
        with pytest.raises(ValueError):
            MarginalizedMalaKernel("uniform", STD1, 0.0)
        with pytest.raises(ValueError):
            MarginalizedMalaKernel("uniform", STD1, -1.0)

    def test_gradient_override_matches(self):
        k = MarginalizedMalaKernel("uniform", STD3, 0.8)
        x = np.array([0.1, -0.9, 0.4])
        y = np.array([0.7, 0.2, -0.1])
        g = STD3.grad_log_density(x)
        a = log_marginal_mala_density(k, x, y)
        b = log_marginal_mala_density(k, x, y, grad_x=g)
        assert a == b


class TestAcceptanceFlow:
    # min(0, r) - min(0, -r) = r, so the difference of the two directed
    # acceptance logs equals the full detailed-balance log ratio and can be
    # checked against the quadrature oracle with no normalization issues.
    @pytest.mark.parametrize("mu_kind", ["uniform", "exponential"])
    @pytest.mark.parametrize("target", [STD3, make_student_t5_1d()],
                             ids=["normal3", "t5"])
    def test_flow_matches_oracle(self, mu_kind, target):
        h_grid = (0.3, 1.0, 3.0)
        rng = np.random.default_rng(11)
        for h in h_grid:
            k = MarginalizedMalaKernel(mu_kind, target, h)
            x = 1.5 * rng.standard_normal((8, target.dim))
            y = 1.5 * rng.standard_normal((8, target.dim))
            fwd = marginalized_log_accept_prob(k, x, y)
            rev = marginalized_log_accept_prob(k, y, x)
            lp = target.log_density
            for i in range(8):
                want = (lp(y[i]) - lp(x[i])
                        + oracle_ratio(target, x[i], y[i], h, mu_kind))
                np.testing.assert_allclose(fwd[i] - rev[i], want, atol=1e-10)

    def test_stay_rows_accept(self):
        k = MarginalizedMalaKernel("uniform", STD2, 1.0)
        x = np.array([[0.5, -0.2], [1.0, 0.0]])
        y = np.array([[0.5, -0.2], [0.3, 0.4]])
        la = marginalized_log_accept_prob(k, x, y)
        assert la[0] == 0.0
        assert -np.inf < la[1] <= 0.0

    def test_zero_density_proposal_rejected(self):
        k = MarginalizedMalaKernel("uniform", box_target(), 1.0)
        x = np.array([[0.5], [0.0]])
        y = np.array([[2.0], [0.8]])
        la = marginalized_log_accept_prob(k, x, y)
        assert la[0] == -np.inf
        assert la[1] > -np.inf

    def test_scalar_call(self):
        k = MarginalizedMalaKernel("exponential", STD2, 0.7)
        la = marginalized_log_accept_prob(k, np.array([0.2, 0.1]),
                                          np.array([-0.4, 0.6]))
        assert isinstance(la, float)
        assert la <= 0.0


class TestAuxiliaryKernel:
    def test_degenerate_multiplier_replays_base(self):
        # point mass at z = 1 consumes no randomness, so the wrapped chain
        # must reproduce the plain chain draw for draw
        for kind, target, conv in (("mala", STD2, "step"),
                                   ("rwm", STD3, "scale")):
            base = ProposalKernel(kind, target)
            wrapped = AuxiliaryKernel(base, Degenerate(1.0), 0.7,
                                      convention=conv)
            rng_a = np.random.default_rng(5)
            rng_b = np.random.default_rng(5)
            xa = np.zeros((4, target.dim))
            xb = np.zeros((4, target.dim))
            for _ in range(200):
                xa = aux_step(wrapped, xa, rng_a).next_state
                xb = mh_step(base, xb, 0.7, rng_b).next_state
            np.testing.assert_array_equal(xa, xb)

    @pytest.mark.parametrize("convention", ["step", "scale"])
    def test_multiplier_drawn_first_then_base(self, convention):
        base = ProposalKernel("mala", STD2)
        mu = Exponential1()
        k = AuxiliaryKernel(base, mu, 0.9, convention=convention)
        x = np.random.default_rng(1).normal(size=(64, 2))
        out = aux_step(k, x, np.random.default_rng(33))

        replay = np.random.default_rng(33)
        z = mu.sample(replay, (64,))
        h_base = 0.9 * z if convention == "step" else 0.9 * z * z
        ref = mh_step(base, x, h_base, replay)
        np.testing.assert_array_equal(out.next_state, ref.next_state)
        np.testing.assert_array_equal(out.proposal, ref.proposal)
        np.testing.assert_array_equal(out.accepted, ref.accepted)
        np.testing.assert_array_equal(out.multiplier, z)
        want_eff = 0.9 * z if convention == "step" else np.sqrt(0.9) * z
        np.testing.assert_allclose(out.effective_step, want_eff, rtol=1e-15)

    def test_step_override(self):
        base = ProposalKernel("mala", STD1)
        k = AuxiliaryKernel(base, Exponential1(), 0.9)
        x = np.zeros((16, 1))
        out = aux_step(k, x, np.random.default_rng(2), h=4.0)
        replay = np.random.default_rng(2)
        z = Exponential1().sample(replay, (16,))
        ref = mh_step(base, x, 4.0 * z, replay)
        np.testing.assert_array_equal(out.next_state, ref.next_state)

    def test_one_step_preserves_gaussian_moments(self):
        n = 100_000
        base = ProposalKernel("mala", STD1)
        k = AuxiliaryKernel(base, Exponential1(), 1.0)
        rng = np.random.default_rng(21)
        x = STD1.direct_sampler(rng, n)
        v = aux_step(k, x, rng).next_state[:, 0]
        assert abs(v.mean()) < 3.0 * v.std() / np.sqrt(n)
        sq = v * v
        assert abs(sq.mean() - 1.0) < 3.0 * sq.std() / np.sqrt(n)

    def test_validation(self):
        base = ProposalKernel("rwm", STD1)
        with pytest.raises(ValueError):
            AuxiliaryKernel(base, Uniform01(), 0.0)
        with pytest.raises(ValueError):
            AuxiliaryKernel(base, Uniform01(), 1.0, convention="sqrt")
        with pytest.raises(ValueError):
            AuxiliaryKernel("rwm", Uniform01(), 1.0)
        with pytest.raises(ValueError):
            AuxiliaryKernel(base, "uniform", 1.0)


class TestMarginalizedStep:
    @pytest.mark.parametrize("mu_kind", ["uniform", "exponential"])
    def test_one_step_preserves_gaussian_moments(self, mu_kind):
        n = 100_000
        k = MarginalizedMalaKernel(mu_kind, STD1, 1.0)
        rng = np.random.default_rng(31)
        x = STD1.direct_sampler(rng, n)
        v = marginalized_step(k, x, rng).next_state[:, 0]
        assert abs(v.mean()) < 3.0 * v.std() / np.sqrt(n)
        sq = v * v
        assert abs(sq.mean() - 1.0) < 3.0 * sq.std() / np.sqrt(n)

    def test_outcome_invariants(self):
        k = MarginalizedMalaKernel("uniform", STD2, 0.8)
        rng = np.random.default_rng(8)
        x = rng.normal(size=(512, 2))
        out = marginalized_step(k, x, rng)
        acc = out.accepted[:, None]
        np.testing.assert_array_equal(out.next_state,
                                      np.where(acc, out.proposal, x))
        assert np.all((out.acceptance_prob > 0.0)
                      & (out.acceptance_prob <= 1.0))
        assert np.all(out.multiplier > 0.0)
        np.testing.assert_allclose(out.effective_step, 0.8 * out.multiplier,
                                   rtol=1e-15)
        np.testing.assert_allclose(out.log_pi_next,
                                   STD2.log_density(out.next_state),
                                   rtol=1e-12)
        np.testing.assert_allclose(out.grad_next,
                                   STD2.grad_log_density(out.next_state),
                                   rtol=1e-12)

    def test_scalar_matches_batch_row(self):
        k = MarginalizedMalaKernel("exponential", STD2, 0.5)
        x = np.array([0.4, -0.3])
        a = marginalized_step(k, x, np.random.default_rng(9))
        b = marginalized_step(k, x[None, :], np.random.default_rng(9))
        np.testing.assert_array_equal(np.atleast_2d(a.next_state),
                                      b.next_state)
        assert float(a.acceptance_prob) == float(b.acceptance_prob[0])
        assert float(a.multiplier) == float(b.multiplier[0])

    def test_out_of_support_proposals_reject_cleanly(self):
        k = MarginalizedMalaKernel("uniform", box_target(), 50.0)
        rng = np.random.default_rng(12)
        x = np.full((256, 1), 0.9)
        out = marginalized_step(k, x, rng)
        assert np.all(np.abs(out.next_state) <= 1.0)
        escaped = np.abs(out.proposal[:, 0]) > 1.0
        assert np.any(escaped)
        assert not np.any(out.accepted & escaped)


class TestAuxiliaryEquivalences:
    def test_rademacher_rwm_halfnormal_scale_is_gaussian_rwm(self):
        # sign times half-normal magnitude is a full normal: under the scale
        # convention the wrapped proposal increment is exactly N(0, h)
        n = 1_000_000
        h = 0.9
        base = ProposalKernel("rademacher_rwm", STD1)
        k = AuxiliaryKernel(base, HalfNormal(1.0), h, convention="scale")
        x = np.full((n, 1), 0.3)
        out = aux_step(k, x, np.random.default_rng(17))
        inc = out.proposal[:, 0] - 0.3
        d = ks_distance(inc, lambda t: stats.norm.cdf(t / np.sqrt(h)))
        assert d < 0.002

    def test_rademacher_barker_halfnormal_scale_matches_barker(self):
        # increment cdf of the wrapped two-point kernel, differentiated
        # numerically, against the closed-form Barker proposal density
        h = 1.1
        x0 = 0.7
        g = -x0
        rh = np.sqrt(h)

        def cdf(t):
            minus = integrate.quad(
                lambda z: 2.0 * stats.norm.pdf(z) * expit(-g * rh * z),
                0.0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
            if t >= 0.0:
                plus = integrate.quad(
                    lambda z: 2.0 * stats.norm.pdf(z) * expit(g * rh * z),
                    0.0, t / rh, epsabs=1e-13, epsrel=1e-12)[0]
                return minus + plus
            return integrate.quad(
                lambda z: 2.0 * stats.norm.pdf(z) * expit(-g * rh * z),
                -t / rh, np.inf, epsabs=1e-13, epsrel=1e-12)[0]

        barker = ProposalKernel("barker", STD1)
        for w in (-2.0, -1.0, -0.3, 0.3, 1.0, 2.0):
            coarse = (cdf(w + 0.02) - cdf(w - 0.02)) / 0.04
            fine = (cdf(w + 0.01) - cdf(w - 0.01)) / 0.02
            dens = (4.0 * fine - coarse) / 3.0
            want = np.exp(log_proposal_density(
                barker, np.array([x0]), np.array([x0 + w]), h))
            np.testing.assert_allclose(dens, want, atol=1e-8)

    def test_aux_mala_exponential_proposals_match_mixture(self):
        # one-step proposal increments against the z-mixture cdf
        # F(t) = int_0^inf e^{-z} Phi((t - h z g) / sqrt(2 h z)) dz
        n = 1_000_000
        h = 1.0
        x0 = 0.4
        g = -x0
        base = ProposalKernel("mala", STD1)
        k = AuxiliaryKernel(base, Exponential1(), h)
        x = np.full((n, 1), x0)
        out = aux_step(k, x, np.random.default_rng(19))
        inc = out.proposal[:, 0] - x0

        # z = -log u maps the integral to (0, 1); Gauss-Legendre nodes
        nodes, weights = np.polynomial.legendre.leggauss(400)
        u = 0.5 * (nodes + 1.0)
        wq = 0.5 * weights
        z = -np.log(u)
        mean = h * z * g
        sd = np.sqrt(2.0 * h * z)

        def cdf(t):
            out = np.empty(t.size)
            for lo in range(0, t.size, 50_000):
                blk = t[lo:lo + 50_000, None]
                out[lo:lo + 50_000] = stats.norm.cdf(
                    (blk - mean[None, :]) / sd[None, :]) @ wq
            return out

        assert ks_distance(inc, cdf) < 0.002


class TestDirichletComparison:
    def test_marginalized_beats_auxiliary_on_first_coordinate(self):
        # Rao-Blackwellized Dirichlet forms for f(x) = x_1 under shared
        # proposals: the marginalized acceptance can only increase it
        n = 200_000
        h = 1.0
        rng = np.random.default_rng(23)
        base = ProposalKernel("mala", STD1)
        mk = MarginalizedMalaKernel("exponential", STD1, h)

        x = rng.standard_normal((n, 1))
        z = rng.standard_exponential(n)
        y, _ = propose(base, x, h * z, rng)
        lp_x = STD1.log_density(x)
        lp_y = STD1.log_density(y)
        g_x = STD1.grad_log_density(x)
        g_y = STD1.grad_log_density(y)

        a_aux = np.exp(log_accept_prob(base, x, y, h * z, lp_x=lp_x,
                                       lp_y=lp_y, g_x=g_x, g_y=g_y))
        a_marg = np.exp(marginalized_log_accept_prob(
            mk, x, y, lp_x=lp_x, lp_y=lp_y, g_x=g_x, g_y=g_y))

        jump_sq = (y[:, 0] - x[:, 0]) ** 2
        diff = 0.5 * jump_sq * (a_marg - a_aux)
        assert diff.mean() > -3.0 * diff.std() / np.sqrt(n)
        assert (0.5 * jump_sq * a_aux).mean() > 0.0


class TestWrapKernel:
    def test_none_returns_base(self):
        base = ProposalKernel("rwm", STD1)
        assert wrap_kernel(base, {"wrapper": "none"}, 1.0) is base
        assert wrap_kernel(base, None, 1.0) is base

    def test_auxiliary_from_config(self):
        base = ProposalKernel("barker", STD2)
        k = wrap_kernel(base, {"wrapper": "auxiliary",
                               "mu": {"name": "half_normal",
                                      "params": {"sigma": 2.0}},
                               "convention": "scale"}, 0.5)
        assert isinstance(k, AuxiliaryKernel)
        assert k.convention == "scale"
        assert k.mu.name == "half_normal"
        assert k.h == 0.5

    def test_marginalized_from_config(self):
        base = ProposalKernel("mala", STD3)
        k = wrap_kernel(base, {"wrapper": "marginalized",
                               "mu": {"name": "uniform"}}, 2.0)
        assert isinstance(k, MarginalizedMalaKernel)
        assert k.mu_kind == "uniform"
        assert k.h == 2.0

    def test_marginalized_requires_mala(self):
        base = ProposalKernel("rwm", STD1)
        with pytest.raises(ValueError):
            wrap_kernel(base, {"wrapper": "marginalized",
                               "mu": {"name": "uniform"}}, 1.0)

    def test_marginalized_rejects_gig(self):
        base = ProposalKernel("mala", STD1)
        with pytest.raises(ValueError):
            wrap_kernel(base, {"wrapper": "marginalized",
                               "mu": {"name": "gig"}}, 1.0)

    def test_auxiliary_needs_mu(self):
        base = ProposalKernel("mala", STD1)
        with pytest.raises(ValueError):
            wrap_kernel(base, {"wrapper": "auxiliary"}, 1.0)

    def test_unknown_wrapper(self):
        base = ProposalKernel("mala", STD1)
        with pytest.raises(ValueError):
            wrap_kernel(base, {"wrapper": "randomised"}, 1.0)
