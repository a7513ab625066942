"""Shared domain types and elementary probability computations.

Everything here is a plain value object (frozen dataclass over numpy arrays)
or a pure function taking an explicit ``numpy.random.Generator``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import invwishart

from .errors import DataValidationError, NumericalError

LOG_2PI = float(np.log(2.0 * np.pi))


def chol_spd(sigma, what="matrix"):
    """Cholesky factor of ``sigma``, raising ``NumericalError`` with context."""
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive-definite") from exc


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CohortDataset:
    """All observations of a cohort, tagged with a dense subject index.

    values      (N, V) float array of observation vectors
    subjects    (N,) int array, each entry in [0, M)
    n_subjects  M
    subject_ids original subject identifiers, index -> id
    var_names   variable names in column order
    timestamps  optional (N,) float array (epoch seconds)
    """

    values: np.ndarray
    subjects: np.ndarray
    n_subjects: int
    subject_ids: tuple = ()
    var_names: tuple = ()
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        values = _readonly(np.asarray(self.values, dtype=float))
        subjects = _readonly(np.asarray(self.subjects, dtype=np.int64))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "subjects", subjects)
        if values.ndim != 2:
            raise DataValidationError("values must be a 2-D (N, V) array")
        if subjects.shape != (values.shape[0],):
            raise DataValidationError("subjects must be a length-N vector")
        if not np.all(np.isfinite(values)):
            raise DataValidationError("values contain non-finite entries")
        m = int(self.n_subjects)
        if m <= 0:
            raise DataValidationError("n_subjects must be positive")
        if values.shape[0] and (subjects.min() < 0 or subjects.max() >= m):
            raise DataValidationError("subject index out of range [0, M)")
        counts = np.bincount(subjects, minlength=m)
        if np.any(counts == 0):
            empty = np.flatnonzero(counts == 0).tolist()
            raise DataValidationError(f"subjects with no observations: {empty}")
        if self.timestamps is not None:
            ts = _readonly(np.asarray(self.timestamps, dtype=float))
            if ts.shape != (values.shape[0],):
                raise DataValidationError("timestamps must be a length-N vector")
            object.__setattr__(self, "timestamps", ts)
        if not self.subject_ids:
            object.__setattr__(
                self, "subject_ids", tuple(f"S{i:03d}" for i in range(m)))
        if not self.var_names:
            object.__setattr__(
                self, "var_names", tuple(f"x{j}" for j in range(values.shape[1])))
        if len(self.subject_ids) != m:
            raise DataValidationError("subject_ids length must equal n_subjects")
        if len(self.var_names) != values.shape[1]:
            raise DataValidationError("var_names length must equal V")

    @property
    def n_obs(self):
        return self.values.shape[0]

    @property
    def n_vars(self):
        return self.values.shape[1]

    def subject_counts(self):
        return np.bincount(self.subjects, minlength=self.n_subjects)


@dataclass(frozen=True)
class PriorConfig:
    """Symmetric Dirichlet concentration plus Normal-Inverse-Wishart prior."""

    alpha: float
    mu0: np.ndarray
    lam: float
    nu: float
    psi: np.ndarray

    def __post_init__(self):
        mu0 = _readonly(np.asarray(self.mu0, dtype=float).ravel())
        psi = _readonly(np.asarray(self.psi, dtype=float))
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "psi", psi)
        v = mu0.shape[0]
        if self.alpha <= 0:
            raise DataValidationError("alpha must be positive")
        if self.lam <= 0:
            raise DataValidationError("lambda must be positive")
        if self.nu <= v - 1:
            raise DataValidationError("nu must exceed V - 1")
        if psi.shape != (v, v):
            raise DataValidationError("psi must be a VxV matrix")
        if not np.allclose(psi, psi.T, atol=1e-12):
            raise DataValidationError("psi must be symmetric")
        chol_spd(psi, "prior scale matrix psi")

    @property
    def n_vars(self):
        return self.mu0.shape[0]

    @classmethod
    def default(cls, n_vars, alpha=1.0):
        """Neutral/unit prior: mu0=0, lambda=1, nu=V+2, psi=I."""
        return cls(alpha=alpha, mu0=np.zeros(n_vars), lam=1.0,
                   nu=float(n_vars + 2), psi=np.eye(n_vars))


def _check_components(mu, sigma, k, what):
    mu = _readonly(np.asarray(mu, dtype=float))
    sigma = _readonly(np.asarray(sigma, dtype=float))
    if mu.ndim != 2 or mu.shape[0] != k:
        raise DataValidationError(f"{what}: mu must be (K, V)")
    v = mu.shape[1]
    if sigma.shape != (k, v, v):
        raise DataValidationError(f"{what}: sigma must be (K, V, V)")
    for j in range(k):
        chol_spd(sigma[j], f"{what}: covariance of component {j}")
    return mu, sigma


def _check_simplex_rows(theta, what, tol=1e-9):
    theta = _readonly(np.asarray(theta, dtype=float))
    if np.any(theta < 0):
        raise DataValidationError(f"{what}: negative mixture weight")
    sums = theta.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise DataValidationError(f"{what}: weights do not sum to 1")
    return theta


@dataclass(frozen=True)
class GldaParams:
    """Per-subject mixture weights over a shared set of Gaussian components."""

    k: int
    theta: np.ndarray   # (M, K)
    mu: np.ndarray      # (K, V)
    sigma: np.ndarray   # (K, V, V)

    def __post_init__(self):
        mu, sigma = _check_components(self.mu, self.sigma, self.k, "GldaParams")
        theta = _check_simplex_rows(self.theta, "GldaParams.theta")
        if theta.ndim != 2 or theta.shape[1] != self.k:
            raise DataValidationError("GldaParams: theta must be (M, K)")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_subjects(self):
        return self.theta.shape[0]

    @property
    def n_vars(self):
        return self.mu.shape[1]


@dataclass(frozen=True)
class GmmParams:
    """One global mixture weight vector over Gaussian components."""

    k: int
    theta: np.ndarray   # (K,)
    mu: np.ndarray      # (K, V)
    sigma: np.ndarray   # (K, V, V)

    def __post_init__(self):
        mu, sigma = _check_components(self.mu, self.sigma, self.k, "GmmParams")
        theta = _check_simplex_rows(self.theta, "GmmParams.theta")
        if theta.shape != (self.k,):
            raise DataValidationError("GmmParams: theta must be length K")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_vars(self):
        return self.mu.shape[1]


@dataclass(frozen=True)
class AssignmentTrace:
    """Per-observation posterior membership probabilities plus hard labels."""

    responsibilities: np.ndarray   # (N, K)
    labels: np.ndarray             # (N,)
    subjects: np.ndarray           # (N,)
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        resp = _check_simplex_rows(self.responsibilities, "responsibilities")
        labels = _readonly(np.asarray(self.labels, dtype=np.int64))
        subjects = _readonly(np.asarray(self.subjects, dtype=np.int64))
        n = resp.shape[0]
        if labels.shape != (n,) or subjects.shape != (n,):
            raise DataValidationError("labels/subjects must be length-N vectors")
        if n and not np.array_equal(labels, np.argmax(resp, axis=1)):
            raise DataValidationError("labels must be the lowest-index row argmax")
        object.__setattr__(self, "responsibilities", resp)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "subjects", subjects)
        if self.timestamps is not None:
            ts = _readonly(np.asarray(self.timestamps, dtype=float))
            if ts.shape != (n,):
                raise DataValidationError("timestamps must be length N")
            object.__setattr__(self, "timestamps", ts)

    @classmethod
    def from_responsibilities(cls, resp, subjects, timestamps=None):
        resp = np.asarray(resp, dtype=float)
        labels = np.argmax(resp, axis=1)
        return cls(resp, labels, subjects, timestamps)

    @property
    def n_obs(self):
        return self.responsibilities.shape[0]

    @property
    def k(self):
        return self.responsibilities.shape[1]


# ---------------------------------------------------------------------------
# Elementary probability computations
# ---------------------------------------------------------------------------

def mvn_logpdf(x, mu, sigma):
    """Log density of N(mu, sigma) at ``x`` via Cholesky factorization.

    ``x`` may be a single length-V vector or an (N, V) batch; the factorization
    is computed once either way.
    """
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    v = mu.shape[0]
    chol = chol_spd(sigma, "mvn covariance")
    single = x.ndim == 1
    diff = np.atleast_2d(x) - mu
    y = np.linalg.solve(chol, diff.T)
    quad = np.sum(y * y, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    out = -0.5 * (v * LOG_2PI + logdet + quad)
    return float(out[0]) if single else out


def dirichlet_sample(alpha_vec, rng):
    """Draw one point on the simplex via normalized gamma variates."""
    alpha_vec = np.asarray(alpha_vec, dtype=float).ravel()
    if alpha_vec.size == 0 or np.any(alpha_vec <= 0):
        raise DataValidationError("Dirichlet concentrations must all be positive")
    if alpha_vec.size == 1:
        return np.ones(1)
    g = rng.standard_gamma(alpha_vec)
    total = g.sum()
    if total <= 0.0:
        # all gammas underflowed (pathologically small concentrations)
        g = np.zeros_like(alpha_vec)
        g[int(np.argmax(alpha_vec))] = 1.0
        total = 1.0
    return g / total


def niw_sample(prior, rng):
    """Draw (mu, sigma) from the Normal-Inverse-Wishart prior."""
    v = prior.n_vars
    sigma = invwishart.rvs(df=prior.nu, scale=prior.psi, random_state=rng)
    sigma = np.asarray(sigma, dtype=float).reshape(v, v)
    chol = chol_spd(sigma / prior.lam, "NIW mean covariance")
    mu = prior.mu0 + chol @ rng.standard_normal(v)
    return mu, sigma


def categorical_sample(log_weights, rng):
    """Sample an index with probability proportional to exp(log_weights)."""
    lw = np.asarray(log_weights, dtype=float).ravel()
    finite = np.isfinite(lw)
    if not finite.any():
        raise DataValidationError("all categorical log-weights are -inf")
    p = np.zeros_like(lw)
    p[finite] = np.exp(lw[finite] - lw[finite].max())
    p /= p.sum()
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return min(idx, lw.size - 1)
