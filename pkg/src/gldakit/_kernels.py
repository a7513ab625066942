"""Hot inner loops of the collapsed Gibbs sampler.

These functions are numba-jitted when available (see ``_compat``); with
``GLDAKIT_NUMBA=0`` the same source runs as plain python over numpy arrays.
All randomness is injected as a pre-drawn uniform per observation, so both
paths consume the identical random stream and produce identical sweeps.
"""

import math

import numpy as np

from ._compat import njit

# added to the diagonal of posterior-derived scale matrices before any
# Cholesky, guarding against rank deficiency from tiny clusters
JITTER = 1e-9


@njit(cache=True)
def student_t_logpdf(x, loc, scale, df):
    """Multivariate Student-t log density (Cholesky-based)."""
    v = x.shape[0]
    chol = np.linalg.cholesky(scale)
    y = np.empty(v)
    quad = 0.0
    logdet = 0.0
    for i in range(v):
        s = x[i] - loc[i]
        for j in range(i):
            s -= chol[i, j] * y[j]
        y[i] = s / chol[i, i]
        quad += y[i] * y[i]
        logdet += 2.0 * math.log(chol[i, i])
    return (math.lgamma(0.5 * (df + v)) - math.lgamma(0.5 * df)
            - 0.5 * (v * math.log(df * math.pi) + logdet)
            - 0.5 * (df + v) * math.log1p(quad / df))


@njit(cache=True)
def predictive_logpdf(x, cnt, s1, s2, mu0, lam, nu, psi):
    """Log posterior-predictive density of ``x`` under an NIW prior updated
    with sufficient statistics (cnt, s1=sum x, s2=sum x x^T)."""
    v = x.shape[0]
    lam_n = lam + cnt
    nu_n = nu + cnt
    loc = np.empty(v)
    for i in range(v):
        loc[i] = (lam * mu0[i] + s1[i]) / lam_n
    df = nu_n - v + 1.0
    c = (lam_n + 1.0) / (lam_n * df)
    scale = np.empty((v, v))
    for i in range(v):
        for j in range(v):
            scale[i, j] = c * (psi[i, j] + s2[i, j]
                               + lam * mu0[i] * mu0[j]
                               - lam_n * loc[i] * loc[j])
        scale[i, i] += JITTER
    return student_t_logpdf(x, loc, scale, df)


@njit(cache=True)
def gibbs_sweep(values, subjects, labels, subj_counts,
                comp_n, comp_s1, comp_s2,
                alpha, mu0, lam, nu, psi, uniforms):
    """One collapsed Gibbs sweep over all observation labels, in place.

    For observation n of subject m the label is resampled from
    p(z_n = k) proportional to (c_mk^-n + alpha) * t_k(x_n), where t_k is the
    Student-t posterior predictive of component k excluding observation n.
    ``subj_counts`` (M, K) and the component statistics are kept in sync.
    """
    n_obs, v = values.shape
    k_comp = comp_n.shape[0]
    logw = np.empty(k_comp)
    w = np.empty(k_comp)
    for n in range(n_obs):
        m = subjects[n]
        k_old = labels[n]
        x = values[n]
        # remove observation n from its component
        comp_n[k_old] -= 1.0
        subj_counts[m, k_old] -= 1.0
        for i in range(v):
            comp_s1[k_old, i] -= x[i]
            for j in range(v):
                comp_s2[k_old, i, j] -= x[i] * x[j]
        # collapsed conditional over components
        for k in range(k_comp):
            logw[k] = math.log(subj_counts[m, k] + alpha) + predictive_logpdf(
                x, comp_n[k], comp_s1[k], comp_s2[k], mu0, lam, nu, psi)
        mx = logw[0]
        for k in range(1, k_comp):
            if logw[k] > mx:
                mx = logw[k]
        total = 0.0
        for k in range(k_comp):
            w[k] = math.exp(logw[k] - mx)
            total += w[k]
        u = uniforms[n] * total
        k_new = k_comp - 1
        acc = 0.0
        for k in range(k_comp):
            acc += w[k]
            if u < acc:
                k_new = k
                break
        labels[n] = k_new
        comp_n[k_new] += 1.0
        subj_counts[m, k_new] += 1.0
        for i in range(v):
            comp_s1[k_new, i] += x[i]
            for j in range(v):
                comp_s2[k_new, i, j] += x[i] * x[j]


def component_stats(values, labels, k):
    """Per-component sufficient statistics (count, sum, scatter)."""
    n_obs, v = values.shape
    comp_n = np.zeros(k)
    comp_s1 = np.zeros((k, v))
    comp_s2 = np.zeros((k, v, v))
    for j in range(k):
        block = values[labels == j]
        comp_n[j] = block.shape[0]
        if block.shape[0]:
            comp_s1[j] = block.sum(axis=0)
            comp_s2[j] = block.T @ block
    return comp_n, comp_s1, comp_s2


def subject_label_counts(subjects, labels, m, k):
    counts = np.zeros((m, k))
    np.add.at(counts, (subjects, labels), 1.0)
    return counts
