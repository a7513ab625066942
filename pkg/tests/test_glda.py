import itertools

import numpy as np
import pytest
from scipy.special import gammaln
from scipy.stats import invgamma, norm
from scipy.stats import t as student_t

from gldakit.core import GldaParams, PriorConfig
from gldakit.errors import DataValidationError
from gldakit.glda import (GldaFitConfig, align_labels, apply_alignment,
                          collapsed_label_logprobs, glda_fit,
                          glda_joint_logdensity, niw_posterior, split_rhat)
from gldakit.synth import SynthConfig, generate_glda

from conftest import make_cohort


# ---------------------------------------------------------------------------
# Conjugate update oracle
# ---------------------------------------------------------------------------

def sequential_niw_update(mu, lam, nu, psi, x):
    """Textbook one-observation NIW update (independent of the batch code)."""
    lam1 = lam + 1.0
    d = x - mu
    return ((lam * mu + x) / lam1, lam1, nu + 1.0,
            psi + (lam / lam1) * np.outer(d, d))


class TestNiwPosterior:
    def test_batch_equals_sequential(self, rng):
        prior = PriorConfig(alpha=1.0, mu0=rng.standard_normal(3), lam=2.5,
                            nu=7.0, psi=np.eye(3) * 1.7)
        xs = rng.standard_normal((9, 3))
        cnt, s1, s2 = len(xs), xs.sum(axis=0), xs.T @ xs
        mu_b, lam_b, nu_b, psi_b = niw_posterior(prior, cnt, s1, s2)

        mu, lam, nu, psi = prior.mu0, prior.lam, prior.nu, prior.psi
        for x in xs:
            mu, lam, nu, psi = sequential_niw_update(mu, lam, nu, psi, x)
        assert np.allclose(mu_b, mu, atol=1e-10)
        assert lam_b == pytest.approx(lam, abs=1e-10)
        assert nu_b == pytest.approx(nu, abs=1e-10)
        assert np.allclose(psi_b, psi, atol=1e-10)

    def test_order_independent(self, rng):
        prior = PriorConfig.default(2)
        xs = rng.standard_normal((6, 2))
        results = []
        for order in (np.arange(6), rng.permutation(6)):
            mu, lam, nu, psi = prior.mu0, prior.lam, prior.nu, prior.psi
            for x in xs[order]:
                mu, lam, nu, psi = sequential_niw_update(mu, lam, nu, psi, x)
            results.append((mu, psi))
        assert np.allclose(results[0][0], results[1][0], atol=1e-10)
        assert np.allclose(results[0][1], results[1][1], atol=1e-10)

    def test_empty_component_is_prior(self):
        prior = PriorConfig.default(2)
        mu, lam, nu, psi = niw_posterior(prior, 0.0, np.zeros(2),
                                         np.zeros((2, 2)))
        assert np.allclose(mu, prior.mu0)
        assert (lam, nu) == (prior.lam, prior.nu)
        assert np.allclose(psi, prior.psi, atol=1e-12)


# ---------------------------------------------------------------------------
# Collapsed conditional vs exhaustive enumeration
# ---------------------------------------------------------------------------

def collapsed_joint_logp_1d(values, subjects, labels, k, prior, m):
    """Closed-form collapsed joint log p(z, x) for V=1.

    Dirichlet-multinomial label term plus, per component, the marginal
    likelihood accumulated one observation at a time through univariate
    Student-t predictives (scipy). Fully independent of the sampler kernel.
    """
    a = prior.alpha
    total = 0.0
    for s in range(m):
        mask = subjects == s
        n_s = int(mask.sum())
        total += gammaln(k * a) - gammaln(k * a + n_s)
        for j in range(k):
            c = int(np.sum(labels[mask] == j))
            total += gammaln(a + c) - gammaln(a)
    for j in range(k):
        mu, lam, nu, psi = (float(prior.mu0[0]), prior.lam, prior.nu,
                            float(prior.psi[0, 0]))
        for x in values[labels == j, 0]:
            df = nu  # V = 1: df = nu - V + 1
            scale = np.sqrt(psi * (lam + 1.0) / (lam * df))
            total += student_t.logpdf(x, df, loc=mu, scale=scale)
            mu_new, lam_new, nu_new, psi_new = sequential_niw_update(
                np.array([mu]), lam, nu, np.array([[psi]]), np.array([x]))
            mu, lam, nu, psi = (float(mu_new[0]), lam_new, nu_new,
                                float(psi_new[0, 0]))
    return total


class TestCollapsedConditional:
    def test_matches_enumeration(self, rng):
        values = rng.standard_normal((5, 1)) * 2.0
        subjects = np.array([0, 0, 1, 1, 1])
        labels = np.array([0, 1, 1, 0, 1])
        prior = PriorConfig(alpha=0.7, mu0=[0.3], lam=1.4, nu=3.2,
                            psi=[[1.9]])
        for n in range(5):
            got = collapsed_label_logprobs(values, subjects, labels, n, 2,
                                           prior)
            joint = np.empty(2)
            for j in range(2):
                trial = labels.copy()
                trial[n] = j
                joint[j] = collapsed_joint_logp_1d(values, subjects, trial, 2,
                                                   prior, 2)
            expected = joint - np.log(np.exp(joint - joint.max()).sum()) \
                - joint.max()
            assert np.allclose(got, expected, atol=1e-8)


# ---------------------------------------------------------------------------
# Joint log density
# ---------------------------------------------------------------------------

def niw_logpdf_1d(mu, sigma2, prior):
    # V=1 inverse-Wishart(nu, psi) is InvGamma(nu/2, psi/2)
    iw = invgamma.logpdf(sigma2, prior.nu / 2.0,
                         scale=float(prior.psi[0, 0]) / 2.0)
    nrm = norm.logpdf(mu, loc=float(prior.mu0[0]),
                      scale=np.sqrt(sigma2 / prior.lam))
    return iw + nrm


class TestJointLogdensity:
    def test_single_obs_decomposition(self):
        data = make_cohort([[0.4]], [0], 1)
        prior = PriorConfig.default(1)
        params = GldaParams(k=1, theta=[[1.0]], mu=[[0.2]], sigma=[[[1.3]]])
        total = glda_joint_logdensity(data, [0], params, prior)
        expected = (0.0                                 # Dirichlet on 1-simplex
                    + niw_logpdf_1d(0.2, 1.3, prior)    # component prior
                    + 0.0                               # log theta = log 1
                    + norm.logpdf(0.4, 0.2, np.sqrt(1.3)))
        assert total == pytest.approx(expected, abs=1e-10)

    def test_label_symmetry(self, rng):
        data = make_cohort(rng.standard_normal((6, 2)), [0, 0, 0, 1, 1, 1], 2)
        prior = PriorConfig.default(2)
        theta = np.array([[0.3, 0.7], [0.6, 0.4]])
        mu = rng.standard_normal((2, 2))
        sigma = np.stack([np.eye(2) * 1.1, np.eye(2) * 0.8])
        labels = np.array([0, 1, 0, 1, 1, 0])
        a = glda_joint_logdensity(
            data, labels, GldaParams(k=2, theta=theta, mu=mu, sigma=sigma),
            prior)
        b = glda_joint_logdensity(
            data, 1 - labels,
            GldaParams(k=2, theta=theta[:, ::-1], mu=mu[::-1],
                       sigma=sigma[::-1]), prior)
        assert a == pytest.approx(b, abs=1e-10)

    def test_hand_summed_small_instance(self):
        # N=4, K=2, V=1: every factor evaluated with scipy directly
        values = np.array([[0.5], [-0.3], [1.2], [0.1]])
        subjects = np.array([0, 0, 1, 1])
        labels = np.array([0, 1, 1, 0])
        data = make_cohort(values, subjects, 2)
        prior = PriorConfig(alpha=2.0, mu0=[0.1], lam=1.5, nu=4.0, psi=[[2.0]])
        theta = np.array([[0.4, 0.6], [0.8, 0.2]])
        mu = np.array([[-0.5], [0.7]])
        sigma = np.array([[[0.9]], [[1.4]]])
        params = GldaParams(k=2, theta=theta, mu=mu, sigma=sigma)

        expected = 0.0
        for row in theta:  # Dirichlet(2, 2) density
            expected += (gammaln(4.0) - 2 * gammaln(2.0)
                         + np.log(row[0]) + np.log(row[1]))
        for j in range(2):
            expected += niw_logpdf_1d(mu[j, 0], sigma[j, 0, 0], prior)
        for n in range(4):
            z, s = labels[n], subjects[n]
            expected += np.log(theta[s, z])
            expected += norm.logpdf(values[n, 0], mu[z, 0],
                                    np.sqrt(sigma[z, 0, 0]))
        got = glda_joint_logdensity(data, labels, params, prior)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_shape_mismatch(self):
        data = make_cohort([[0.0]], [0], 1)
        params = GldaParams(k=1, theta=[[1.0]], mu=[[0.0]], sigma=[[[1.0]]])
        with pytest.raises(DataValidationError):
            glda_joint_logdensity(data, [0, 0], params, PriorConfig.default(1))


# ---------------------------------------------------------------------------
# Label alignment
# ---------------------------------------------------------------------------

class TestAlignLabels:
    def test_identity(self, rng):
        means = rng.standard_normal((3, 2))
        assert align_labels(means, means).tolist() == [0, 1, 2]

    def test_swap(self, rng):
        means = rng.standard_normal((2, 2)) * 3
        assert align_labels(means, means[::-1]).tolist() == [1, 0]

    def test_k3_matches_bruteforce(self, rng):
        ref = rng.standard_normal((3, 2)) * 2
        cand = rng.standard_normal((3, 2)) * 2
        best = min(itertools.permutations(range(3)),
                   key=lambda p: ((ref - cand[list(p)]) ** 2).sum())
        assert align_labels(ref, cand).tolist() == list(best)

    def test_hungarian_matches_bruteforce(self, rng):
        ref = rng.standard_normal((7, 2))
        cand = rng.standard_normal((7, 2))
        best = min(itertools.permutations(range(7)),
                   key=lambda p: ((ref - cand[list(p)]) ** 2).sum())
        assert align_labels(ref, cand).tolist() == list(best)

    def test_k_mismatch(self, rng):
        with pytest.raises(DataValidationError):
            align_labels(rng.standard_normal((2, 2)),
                         rng.standard_normal((3, 2)))


class TestSplitRhat:
    def test_constant_draws(self):
        assert split_rhat(np.ones((2, 50))) == 1.0

    def test_disjoint_chains_flagged(self, rng):
        draws = np.stack([rng.standard_normal(100),
                          rng.standard_normal(100) + 50.0])
        assert split_rhat(draws) > 1.5


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

class TestGldaFit:
    def test_k1_exact_weights_and_pooled_mean(self, quiet):
        data, _, _ = generate_glda(SynthConfig(m=4, k=1, v=2,
                                               obs_per_subject=50, seed=3))
        post = glda_fit(data, GldaFitConfig(k=1, n_iters=120, n_warmup=20,
                                            n_chains=1, seed=0))
        assert np.all(post.params.theta == 1.0)
        pooled = data.values.mean(axis=0)
        se = data.values.std(axis=0, ddof=1) / np.sqrt(data.n_obs)
        assert np.all(np.abs(post.params.mu[0] - pooled) < 3 * se)

    def test_recovery_small(self, quiet):
        data, truth, _ = generate_glda(SynthConfig(
            m=10, k=2, v=2, obs_per_subject=100, alpha=1.0,
            mean_separation=4.0, seed=11))
        post = glda_fit(data, GldaFitConfig(k=2, n_iters=300, n_warmup=60,
                                            n_chains=2, seed=5))
        perm = align_labels(truth.mu, post.params.mu)
        theta, mu, _ = apply_alignment(perm, post.params.theta,
                                       post.params.mu, post.params.sigma)
        assert np.abs(mu - truth.mu).max() < 0.15
        assert np.abs(theta - truth.theta).mean() < 0.05
        assert np.nanmax(post.rhat["mu"]) < 1.1

    def test_duplication_consistency(self, quiet):
        data, truth, _ = generate_glda(SynthConfig(
            m=6, k=2, v=2, obs_per_subject=80, mean_separation=4.0, seed=21))
        doubled = make_cohort(np.concatenate([data.values, data.values]),
                              np.concatenate([data.subjects, data.subjects]),
                              data.n_subjects)
        config = GldaFitConfig(k=2, n_iters=250, n_warmup=50, n_chains=1,
                               seed=9)
        a = glda_fit(data, config)
        b = glda_fit(doubled, config)
        perm = align_labels(a.params.mu, b.params.mu)
        mu_b = b.params.mu[perm]
        theta_b = b.params.theta[:, perm]
        assert np.abs(a.params.mu - mu_b).max() < 0.05
        assert np.abs(a.params.theta - theta_b).max() < 0.05

    def test_bit_identical_given_seed(self, quiet):
        data, _, _ = generate_glda(SynthConfig(m=4, k=2, v=2,
                                               obs_per_subject=30, seed=2))
        config = GldaFitConfig(k=2, n_iters=60, n_warmup=10, n_chains=2,
                               seed=77)
        a = glda_fit(data, config)
        b = glda_fit(data, config)
        assert np.array_equal(a.params.theta, b.params.theta)
        assert np.array_equal(a.params.mu, b.params.mu)
        assert np.array_equal(a.params.sigma, b.params.sigma)
        assert np.array_equal(a.logdensity, b.logdensity)
        assert np.array_equal(a.final_labels, b.final_labels)

    def test_retained_draws_valid(self, quiet):
        data, _, _ = generate_glda(SynthConfig(m=3, k=2, v=2,
                                               obs_per_subject=25, seed=4))
        post = glda_fit(data, GldaFitConfig(k=2, n_iters=50, n_warmup=10,
                                            n_chains=1, seed=1))
        sums = post.theta_draws.sum(axis=-1)
        assert np.all(np.abs(sums - 1.0) < 1e-9)
        assert np.all(post.theta_draws >= 0)
        for sigma in post.sigma_draws.reshape(-1, 2, 2):
            np.linalg.cholesky(sigma)

    def test_fewer_observations_than_k(self):
        data = make_cohort([[0.0, 0.0]], [0], 1)
        with pytest.raises(DataValidationError):
            glda_fit(data, GldaFitConfig(k=2, n_iters=10, n_warmup=1))

    def test_non_standardized_warning(self):
        rng = np.random.default_rng(0)
        data = make_cohort(rng.standard_normal((40, 2)) * 10,
                           np.repeat([0, 1], 20), 2)
        with pytest.warns(UserWarning, match="standardized"):
            glda_fit(data, GldaFitConfig(k=1, n_iters=20, n_warmup=5,
                                         n_chains=1, seed=0))
