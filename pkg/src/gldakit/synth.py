"""Synthetic cohort generation from the two generative processes, with a
heterogeneity knob (per-subject Dirichlet concentration) and an optional
linear outcome rule, providing ground truth for recovery tests."""

from dataclasses import dataclass, field

import numpy as np

from .core import (CohortDataset, GldaParams, GmmParams, PriorConfig,
                   chol_spd, dirichlet_sample, niw_sample)
from .errors import DataValidationError
from .ingest import OutcomeTable


def default_outcome_rule(k):
    """One outcome driven by the first class weight: 40*theta_1 + N(0, 4^2)."""
    coef = np.zeros(k)
    coef[0] = 40.0
    return {"score": (coef, 4.0)}


@dataclass
class SynthConfig:
    m: int
    k: int
    v: int
    obs_per_subject: int | list = 100
    alpha: float = 1.0
    mean_separation: float = 3.0
    covariance_scale: float = 1.0
    outcome_rule: dict | None = None
    seed: int = 0
    niw_means: bool = False   # draw components from the NIW prior instead of
                              # the deterministic ladder placement

    def __post_init__(self):
        if self.m < 1 or self.k < 1 or self.v < 1:
            raise DataValidationError("m, k, v must be positive")
        if self.alpha <= 0:
            raise DataValidationError("alpha must be positive")
        if self.mean_separation < 0 or self.covariance_scale <= 0:
            raise DataValidationError(
                "need mean_separation >= 0 and covariance_scale > 0")

    def obs_counts(self):
        if np.isscalar(self.obs_per_subject):
            counts = np.full(self.m, int(self.obs_per_subject))
        else:
            counts = np.asarray(self.obs_per_subject, dtype=int)
            if counts.shape != (self.m,):
                raise DataValidationError("obs_per_subject list must have M entries")
        if np.any(counts < 1):
            raise DataValidationError("every subject needs >= 1 observation")
        return counts


def component_layout(k, v, separation):
    """Deterministic, evenly separated component means: an offset ladder in
    which adjacent components differ by ``separation`` in every coordinate."""
    offsets = separation * (np.arange(k) - (k - 1) / 2.0)
    return np.outer(offsets, np.ones(v))


def _components(config, rng):
    if config.niw_means:
        prior = PriorConfig.default(config.v)
        mu = np.empty((config.k, config.v))
        sigma = np.empty((config.k, config.v, config.v))
        for j in range(config.k):
            mu[j], sigma[j] = niw_sample(prior, rng)
        return mu, sigma
    mu = component_layout(config.k, config.v, config.mean_separation)
    sigma = np.repeat(config.covariance_scale * np.eye(config.v)[None],
                      config.k, axis=0)
    return mu, sigma


def _sample_subject(theta, mu, chol_sigma, n_obs, rng):
    z = np.searchsorted(np.cumsum(theta), rng.random(n_obs),
                        side="right").clip(0, theta.size - 1)
    noise = rng.standard_normal((n_obs, mu.shape[1]))
    values = mu[z] + np.einsum("nij,nj->ni", chol_sigma[z], noise)
    return z, values


def _generate(config, theta_rows, mu, sigma, subject_rngs):
    counts = config.obs_counts()
    chols = np.stack([chol_spd(sigma[j]) for j in range(config.k)])
    subjects, values, labels, timestamps = [], [], [], []
    for m in range(config.m):
        z, x = _sample_subject(theta_rows[m], mu, chols, counts[m],
                               subject_rngs[m])
        subjects.append(np.full(counts[m], m))
        labels.append(z)
        values.append(x)
        timestamps.append(np.arange(counts[m], dtype=float) * 3600.0)
    data = CohortDataset(
        values=np.concatenate(values),
        subjects=np.concatenate(subjects),
        n_subjects=config.m,
        timestamps=np.concatenate(timestamps))
    return data, np.concatenate(labels)


def _outcomes(config, theta_rows, subject_ids, rng):
    rule = config.outcome_rule
    if rule is None:
        return None
    names = sorted(rule)
    values = np.empty((config.m, len(names)))
    for j, name in enumerate(names):
        coef, noise_sd = rule[name]
        coef = np.asarray(coef, dtype=float)
        if coef.shape != (config.k,):
            raise DataValidationError(
                f"outcome rule {name!r}: coefficient vector must be length K")
        values[:, j] = theta_rows @ coef + noise_sd * rng.standard_normal(config.m)
    return OutcomeTable(tuple(subject_ids), tuple(names), values)


def generate_glda(config):
    """Sample a cohort from the hierarchical process: per-subject weights
    from Dirichlet(alpha), labels and values per observation.

    Returns (dataset, true GldaParams, OutcomeTable or None). Deterministic
    given ``config.seed``; each subject draws from its own derived stream.
    """
    ss = np.random.SeedSequence(config.seed).spawn(config.m + 2)
    root = np.random.default_rng(ss[0])
    mu, sigma = _components(config, root)
    alpha_vec = np.full(config.k, config.alpha)
    theta_rows = np.stack([dirichlet_sample(alpha_vec, root)
                           for _ in range(config.m)])
    subject_rngs = [np.random.default_rng(s) for s in ss[1:-1]]
    data, _ = _generate(config, theta_rows, mu, sigma, subject_rngs)
    params = GldaParams(k=config.k, theta=theta_rows, mu=mu, sigma=sigma)
    outcomes = _outcomes(config, theta_rows, data.subject_ids,
                         np.random.default_rng(ss[-1]))
    return data, params, outcomes


def generate_gmm(config):
    """Sample a cohort in which every subject shares one global weight
    vector drawn once from Dirichlet(alpha)."""
    ss = np.random.SeedSequence(config.seed).spawn(config.m + 2)
    root = np.random.default_rng(ss[0])
    mu, sigma = _components(config, root)
    theta = dirichlet_sample(np.full(config.k, config.alpha), root)
    theta_rows = np.repeat(theta[None], config.m, axis=0)
    subject_rngs = [np.random.default_rng(s) for s in ss[1:-1]]
    data, _ = _generate(config, theta_rows, mu, sigma, subject_rngs)
    return data, GmmParams(k=config.k, theta=theta, mu=mu, sigma=sigma)
