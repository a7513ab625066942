"""Baseline global Gaussian mixture fit by expectation-maximization, with
hard assignment and per-subject realized class proportions."""

from dataclasses import dataclass

import numpy as np

from .core import CohortDataset, GmmParams, mvn_logpdf
from .errors import DataValidationError, NumericalError
from ._kmeans import kmeans_pp_centers
from .posterior import responsibilities_from_rows


@dataclass
class GmmFitConfig:
    k: int
    max_iters: int = 500
    tol: float = 1e-7
    n_restarts: int = 8
    seed: int = 0
    reg_covar: float = 1e-6

    def __post_init__(self):
        if self.k < 1 or self.max_iters < 1 or self.n_restarts < 1:
            raise DataValidationError("k, max_iters, n_restarts must be >= 1")
        if self.tol <= 0 or self.reg_covar < 0:
            raise DataValidationError("need tol > 0 and reg_covar >= 0")


class _ComponentCollapse(Exception):
    pass


def _log_resp(values, theta, mu, sigma):
    n, k = values.shape[0], mu.shape[0]
    logp = np.empty((n, k))
    for j in range(k):
        logp[:, j] = mvn_logpdf(values, mu[j], sigma[j])
    with np.errstate(divide="ignore"):
        logw = logp + np.log(theta)
    mx = logw.max(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(logw - mx).sum(axis=1))
    return logw - lse[:, None], float(lse.sum())


def em_run(values, theta, mu, sigma, max_iters, tol, reg_covar):
    """One EM run from explicit initial parameters.

    Returns (theta, mu, sigma, loglik, trace). Raises ``_ComponentCollapse``
    when a mixture weight falls below 1/(10N).
    """
    n, v = values.shape
    k = mu.shape[0]
    floor = 1.0 / (10.0 * n)
    trace = []
    prev = -np.inf
    for _ in range(max_iters):
        logr, loglik = _log_resp(values, theta, mu, sigma)
        trace.append(loglik)
        resp = np.exp(logr)
        nk = resp.sum(axis=0)
        theta = nk / n
        if np.any(theta < floor):
            raise _ComponentCollapse
        mu = (resp.T @ values) / nk[:, None]
        sigma = np.empty((k, v, v))
        for j in range(k):
            diff = values - mu[j]
            sigma[j] = (diff.T * resp[:, j]) @ diff / nk[j]
            sigma[j][np.diag_indices(v)] += reg_covar
        if np.isfinite(prev) and abs(loglik - prev) < tol * abs(loglik):
            break
        prev = loglik
    _, loglik = _log_resp(values, theta, mu, sigma)
    trace.append(loglik)
    return theta, mu, sigma, loglik, np.asarray(trace)


def gmm_fit(data, config):
    """Best-of-restarts maximum-likelihood EM fit on the pooled observations.

    Initialization per restart: k-means++ centers, pooled covariance,
    uniform weights. Deterministic given ``config.seed``. Returns
    (GmmParams, final log-likelihood, per-iteration log-likelihood trace of
    the winning restart).
    """
    if not isinstance(data, CohortDataset):
        raise DataValidationError("data must be a CohortDataset")
    values = np.asarray(data.values, dtype=float)
    n, v = values.shape
    k = config.k
    if n < k:
        raise DataValidationError("need at least K observations")

    pooled = np.cov(values, rowvar=False, ddof=1).reshape(v, v)
    pooled[np.diag_indices(v)] += config.reg_covar

    best = None
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_restarts)
    for s in seeds:
        rng = np.random.default_rng(s)
        mu0 = kmeans_pp_centers(values, k, rng)
        theta0 = np.full(k, 1.0 / k)
        sigma0 = np.repeat(pooled[None], k, axis=0)
        try:
            out = em_run(values, theta0, mu0, sigma0, config.max_iters,
                         config.tol, config.reg_covar)
        except _ComponentCollapse:
            continue
        if best is None or out[3] > best[3]:
            best = out
    if best is None:
        raise NumericalError("every EM restart collapsed a component")
    theta, mu, sigma, loglik, trace = best
    params = GmmParams(k=k, theta=theta / theta.sum(), mu=mu, sigma=sigma)
    return params, loglik, trace


def gmm_hard_assign(data, params):
    """Responsibilities under the global mixture plus argmax labels."""
    if params.n_vars != data.n_vars:
        raise DataValidationError("params dimension does not match the data")
    theta_rows = np.broadcast_to(params.theta, (data.n_obs, params.k))
    resp = responsibilities_from_rows(data.values, theta_rows,
                                      params.mu, params.sigma)
    from .core import AssignmentTrace
    return AssignmentTrace.from_responsibilities(
        resp, data.subjects, data.timestamps)


def realized_proportions(trace, n_subjects, k, soft=False):
    """Per-subject class frequencies of hard labels (rows sum to 1 exactly).

    With ``soft=True``, mean responsibilities per subject instead.
    """
    if trace.k != k:
        raise DataValidationError("trace K does not match")
    counts = np.zeros((n_subjects, k))
    if soft:
        np.add.at(counts, trace.subjects, trace.responsibilities)
    else:
        np.add.at(counts, (trace.subjects, trace.labels), 1.0)
    totals = counts.sum(axis=1)
    if np.any(totals == 0):
        empty = np.flatnonzero(totals == 0).tolist()
        raise DataValidationError(f"subjects with no observations: {empty}")
    return counts / totals[:, None]
