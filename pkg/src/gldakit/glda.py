"""Collapsed Gibbs inference for the hierarchical mixture model in which each
subject owns a Dirichlet-distributed weight vector over globally shared
Gaussian components.

The sampler resamples per-observation labels from their collapsed
conditionals (Dirichlet weights and component parameters integrated out via
conjugacy), then draws theta and the component parameters from their exact
posteriors each sweep for the retained trace.
"""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln
from scipy.stats import invwishart

from . import _kernels
from .core import (CohortDataset, GldaParams, PriorConfig, chol_spd,
                   dirichlet_sample, mvn_logpdf)
from .errors import DataValidationError, NumericalError
from ._kmeans import kmeans_labels

EXHAUSTIVE_ALIGN_MAX_K = 6


@dataclass
class GldaFitConfig:
    k: int
    n_iters: int = 1000
    n_warmup: int = 200
    n_chains: int = 2
    seed: int = 0
    prior: PriorConfig | None = None

    def __post_init__(self):
        if self.k < 1:
            raise DataValidationError("k must be >= 1")
        if self.n_iters < 1 or self.n_chains < 1:
            raise DataValidationError("n_iters and n_chains must be >= 1")
        if not 0 <= self.n_warmup < self.n_iters:
            raise DataValidationError("need 0 <= n_warmup < n_iters")


@dataclass
class GldaPosterior:
    """Posterior-mean parameters plus per-chain retained draws/diagnostics.

    Draw arrays are already label-aligned (to the first retained draw of
    chain 0), so averaging over them is meaningful.
    """

    params: GldaParams
    theta_draws: np.ndarray    # (chains, draws, M, K)
    mu_draws: np.ndarray       # (chains, draws, K, V)
    sigma_draws: np.ndarray    # (chains, draws, K, V, V)
    final_labels: np.ndarray   # (chains, N)
    logdensity: np.ndarray     # (chains, n_iters)
    rhat: dict = field(default_factory=dict)
    config: GldaFitConfig | None = None


# ---------------------------------------------------------------------------
# Conjugate updates and densities
# ---------------------------------------------------------------------------

def niw_posterior(prior, cnt, s1, s2):
    """NIW posterior parameters given sufficient statistics of one component.

    cnt = number of observations, s1 = their sum, s2 = their scatter
    (sum of outer products). With cnt = 0 this is the prior itself.
    """
    lam_n = prior.lam + cnt
    nu_n = prior.nu + cnt
    mu_n = (prior.lam * prior.mu0 + s1) / lam_n
    psi_n = (prior.psi + s2 + prior.lam * np.outer(prior.mu0, prior.mu0)
             - lam_n * np.outer(mu_n, mu_n))
    psi_n = 0.5 * (psi_n + psi_n.T)
    return mu_n, lam_n, nu_n, psi_n


def niw_posterior_sample(prior, cnt, s1, s2, rng):
    mu_n, lam_n, nu_n, psi_n = niw_posterior(prior, cnt, s1, s2)
    psi_n = psi_n.copy()
    psi_n[np.diag_indices_from(psi_n)] += _kernels.JITTER
    v = prior.n_vars
    sigma = np.asarray(invwishart.rvs(df=nu_n, scale=psi_n, random_state=rng),
                       dtype=float).reshape(v, v)
    chol = chol_spd(sigma / lam_n, "NIW posterior mean covariance")
    mu = mu_n + chol @ rng.standard_normal(v)
    return mu, sigma


def dirichlet_logpdf(theta, alpha_vec):
    theta = np.asarray(theta, dtype=float)
    alpha_vec = np.asarray(alpha_vec, dtype=float)
    term = np.where(alpha_vec == 1.0, 0.0,
                    (alpha_vec - 1.0) * np.log(np.maximum(theta, 1e-300)))
    return float(gammaln(alpha_vec.sum()) - gammaln(alpha_vec).sum()
                 + term.sum())


def niw_logpdf(mu, sigma, prior):
    """Log density of (mu, sigma) under the NIW prior."""
    iw = float(invwishart.logpdf(sigma, df=prior.nu, scale=prior.psi))
    return iw + mvn_logpdf(mu, prior.mu0, sigma / prior.lam)


def glda_joint_logdensity(data, labels, params, prior):
    """Joint log density log p(theta) + log p(mu, sigma) + log p(z | theta)
    + log p(x | z, mu, sigma) at the given state."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (data.n_obs,):
        raise DataValidationError("labels must be length N")
    if labels.size and (labels.min() < 0 or labels.max() >= params.k):
        raise DataValidationError("label out of range [0, K)")
    if params.n_subjects != data.n_subjects or params.n_vars != data.n_vars:
        raise DataValidationError("params do not match the dataset's shape")
    alpha_vec = np.full(params.k, prior.alpha)

    total = 0.0
    for m in range(data.n_subjects):
        total += dirichlet_logpdf(params.theta[m], alpha_vec)
    for k in range(params.k):
        total += niw_logpdf(params.mu[k], params.sigma[k], prior)
    with np.errstate(divide="ignore"):
        log_theta = np.log(params.theta)
    total += float(log_theta[data.subjects, labels].sum())
    for k in range(params.k):
        mask = labels == k
        if mask.any():
            total += float(np.sum(mvn_logpdf(
                data.values[mask], params.mu[k], params.sigma[k])))
    return total


def collapsed_label_logprobs(values, subjects, labels, n, k, prior):
    """Normalized log probabilities of the collapsed conditional for label n,
    holding every other label fixed. Test/diagnostic surface for the kernel's
    per-observation update."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    keep = np.ones(values.shape[0], dtype=bool)
    keep[n] = False
    rest_vals, rest_labels = values[keep], labels[keep]
    m = subjects[n]
    rest_subjects = np.asarray(subjects)[keep]
    x = values[n]
    logw = np.empty(k)
    for j in range(k):
        block = rest_vals[rest_labels == j]
        cnt = float(block.shape[0])
        s1 = block.sum(axis=0) if block.size else np.zeros(values.shape[1])
        s2 = block.T @ block if block.size else np.zeros(
            (values.shape[1], values.shape[1]))
        c_mj = float(np.sum((rest_subjects == m) & (rest_labels == j)))
        logw[j] = np.log(c_mj + prior.alpha) + _kernels.predictive_logpdf(
            x, cnt, s1, s2, prior.mu0, prior.lam, prior.nu, prior.psi)
    logw -= logw.max()
    return logw - np.log(np.exp(logw).sum())


# ---------------------------------------------------------------------------
# Label alignment
# ---------------------------------------------------------------------------

def align_labels(reference_means, candidate_means):
    """Permutation ``p`` minimizing total squared distance between
    ``reference_means`` and ``candidate_means[p]``.

    Exhaustive search for K <= 6 (ties broken toward the lexicographically
    smallest permutation), Hungarian assignment beyond that.
    """
    ref = np.asarray(reference_means, dtype=float)
    cand = np.asarray(candidate_means, dtype=float)
    if ref.shape != cand.shape:
        raise DataValidationError("component count/dimension mismatch")
    k = ref.shape[0]
    cost = ((ref[:, None, :] - cand[None, :, :]) ** 2).sum(axis=2)
    if k <= EXHAUSTIVE_ALIGN_MAX_K:
        best, best_cost = None, np.inf
        for perm in itertools.permutations(range(k)):
            c = cost[np.arange(k), perm].sum()
            if c < best_cost:
                best, best_cost = perm, c
        return np.asarray(best, dtype=np.int64)
    _, cols = linear_sum_assignment(cost)
    return cols.astype(np.int64)


def apply_alignment(perm, theta=None, mu=None, sigma=None):
    """Reorder component axes by ``perm`` (theta columns, mu/sigma rows)."""
    out = []
    if theta is not None:
        out.append(theta[..., perm])
    if mu is not None:
        out.append(mu[perm])
    if sigma is not None:
        out.append(sigma[perm])
    return tuple(out)


def split_rhat(draws):
    """Split-Rhat over a (chains, draws) array of one scalar summary."""
    x = np.asarray(draws, dtype=float)
    n = x.shape[1]
    half = n // 2
    if half < 2:
        return np.nan
    seqs = np.concatenate([x[:, :half], x[:, n - half:]], axis=0)
    w = seqs.var(axis=1, ddof=1).mean()
    b = half * seqs.mean(axis=1).var(ddof=1)
    if w < 1e-12 and b < 1e-12:
        return 1.0
    if w <= 0.0:
        return np.inf
    var_plus = (half - 1) / half * w + b / half
    return float(np.sqrt(var_plus / w))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _check_standardized(values):
    if values.shape[0] > 1:
        sd = values.std(axis=0, ddof=1)
        if np.any(np.abs(sd - 1.0) > 0.5):
            warnings.warn(
                "input does not look standardized (a variable's global sd "
                "deviates from 1 by more than 50%)")


def _run_chain(data, config, prior, rng):
    values = np.asarray(data.values, dtype=float)
    n, v = values.shape
    k = config.k
    subjects = data.subjects
    m = data.n_subjects

    labels, _ = kmeans_labels(values, k, rng)
    n_ret = config.n_iters - config.n_warmup
    theta_draws = np.empty((n_ret, m, k))
    mu_draws = np.empty((n_ret, k, v))
    sigma_draws = np.empty((n_ret, k, v, v))
    logdens = np.empty(config.n_iters)

    alpha_vec = np.full(k, prior.alpha)
    for it in range(config.n_iters):
        # recompute statistics from scratch each sweep to stop drift from
        # the incremental updates inside the kernel
        comp_n, comp_s1, comp_s2 = _kernels.component_stats(values, labels, k)
        subj_counts = _kernels.subject_label_counts(subjects, labels, m, k)
        uniforms = rng.random(n)
        _kernels.gibbs_sweep(values, subjects, labels, subj_counts,
                             comp_n, comp_s1, comp_s2,
                             prior.alpha, prior.mu0, prior.lam, prior.nu,
                             prior.psi, uniforms)

        theta = np.empty((m, k))
        for s in range(m):
            theta[s] = dirichlet_sample(alpha_vec + subj_counts[s], rng)
        mu = np.empty((k, v))
        sigma = np.empty((k, v, v))
        for j in range(k):
            try:
                mu[j], sigma[j] = niw_posterior_sample(
                    prior, comp_n[j], comp_s1[j], comp_s2[j], rng)
            except (NumericalError, np.linalg.LinAlgError) as exc:
                raise NumericalError(
                    f"factorization failed at iteration {it}, "
                    f"component {j}") from exc

        params = GldaParams(k=k, theta=theta / theta.sum(axis=1, keepdims=True),
                            mu=mu, sigma=sigma)
        logdens[it] = glda_joint_logdensity(data, labels, params, prior)
        if it >= config.n_warmup:
            r = it - config.n_warmup
            theta_draws[r] = params.theta
            mu_draws[r] = mu
            sigma_draws[r] = sigma
    return theta_draws, mu_draws, sigma_draws, labels.copy(), logdens


def glda_fit(data, config):
    """Fit by collapsed Gibbs sampling; deterministic given ``config.seed``.

    Runs ``config.n_chains`` independent chains (each with its own stream
    derived from the seed), aligns every retained draw to the first retained
    draw of chain 0 to undo label switching, and returns posterior means plus
    the aligned traces and split-Rhat diagnostics.
    """
    if not isinstance(data, CohortDataset):
        raise DataValidationError("data must be a CohortDataset")
    if data.n_obs < config.k:
        raise DataValidationError("need at least K observations")
    prior = config.prior or PriorConfig.default(data.n_vars)
    if prior.n_vars != data.n_vars:
        raise DataValidationError("prior dimension does not match the data")
    _check_standardized(data.values)

    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    results = [_run_chain(data, config, prior, np.random.default_rng(s))
               for s in seeds]

    theta_draws = np.stack([r[0] for r in results])
    mu_draws = np.stack([r[1] for r in results])
    sigma_draws = np.stack([r[2] for r in results])
    final_labels = np.stack([r[3] for r in results])
    logdensity = np.stack([r[4] for r in results])

    ref_mu = mu_draws[0, 0]
    for c in range(theta_draws.shape[0]):
        for t in range(theta_draws.shape[1]):
            perm = align_labels(ref_mu, mu_draws[c, t])
            theta_draws[c, t], mu_draws[c, t], sigma_draws[c, t] = \
                apply_alignment(perm, theta_draws[c, t], mu_draws[c, t],
                                sigma_draws[c, t])

    theta_mean = theta_draws.mean(axis=(0, 1))
    theta_mean /= theta_mean.sum(axis=1, keepdims=True)
    params = GldaParams(k=config.k, theta=theta_mean,
                        mu=mu_draws.mean(axis=(0, 1)),
                        sigma=sigma_draws.mean(axis=(0, 1)))

    k, v = config.k, data.n_vars
    rhat_mu = np.empty((k, v))
    for j in range(k):
        for d in range(v):
            rhat_mu[j, d] = split_rhat(mu_draws[:, :, j, d])
    rhat_theta = np.empty((data.n_subjects, k))
    for s in range(data.n_subjects):
        for j in range(k):
            rhat_theta[s, j] = split_rhat(theta_draws[:, :, s, j])

    return GldaPosterior(
        params=params, theta_draws=theta_draws, mu_draws=mu_draws,
        sigma_draws=sigma_draws, final_labels=final_labels,
        logdensity=logdensity,
        rhat={"mu": rhat_mu, "theta": rhat_theta}, config=config)
