"""Per-observation posterior membership and per-subject state time series.

Membership of observation x_n from subject m is
theta_mk * N(x_n | mu_k, sigma_k) normalized over components, computed in
log-space; hard labels take the lowest index attaining the row maximum.
"""

import warnings

import numpy as np

from .core import AssignmentTrace, mvn_logpdf
from .errors import DataValidationError


def responsibilities_from_rows(values, theta_rows, mu, sigma):
    """Row-wise posterior membership with a per-observation weight vector.

    Shared code path for subject-specific weights and the global-mixture
    case (weights tiled across rows). Zero-weight components receive zero
    responsibility even at their mode.
    """
    values = np.asarray(values, dtype=float)
    theta_rows = np.asarray(theta_rows, dtype=float)
    k = mu.shape[0]
    if theta_rows.shape != (values.shape[0], k):
        raise DataValidationError("weight rows must be (N, K)")
    logp = np.empty((values.shape[0], k))
    for j in range(k):
        logp[:, j] = mvn_logpdf(values, mu[j], sigma[j])
    with np.errstate(divide="ignore"):
        logw = logp + np.log(theta_rows)
    mx = logw.max(axis=1, keepdims=True)
    resp = np.exp(logw - mx)
    resp /= resp.sum(axis=1, keepdims=True)
    return resp


def glda_membership(data, params):
    """Posterior membership of every observation under fitted per-subject
    weights; subjects beyond the fitted range get uniform weights (flagged
    with a warning) so new subjects can be assigned without refitting."""
    if params.n_vars != data.n_vars:
        raise DataValidationError("params dimension does not match the data")
    m_fit = params.n_subjects
    out_of_sample = data.subjects >= m_fit
    if out_of_sample.any():
        warnings.warn(
            f"{int(out_of_sample.sum())} observation(s) from subjects absent "
            "at fit time; using uniform weights for them")
        theta_rows = np.empty((data.n_obs, params.k))
        theta_rows[~out_of_sample] = params.theta[data.subjects[~out_of_sample]]
        theta_rows[out_of_sample] = 1.0 / params.k
    else:
        theta_rows = params.theta[data.subjects]
    resp = responsibilities_from_rows(data.values, theta_rows,
                                      params.mu, params.sigma)
    return AssignmentTrace.from_responsibilities(
        resp, data.subjects, data.timestamps)


def state_series(trace, subject):
    """Time-ordered (timestamp, label) pairs for one subject.

    Sorting is stable: observations sharing a timestamp keep input order.
    """
    if trace.timestamps is None:
        raise DataValidationError(
            "trace has no timestamps; iterate labels in input (index) order "
            "for a timestamp-free series")
    idx = np.flatnonzero(trace.subjects == subject)
    if idx.size == 0:
        raise DataValidationError(f"subject {subject} owns no observations")
    order = idx[np.argsort(trace.timestamps[idx], kind="stable")]
    return [(float(trace.timestamps[i]), int(trace.labels[i])) for i in order]
