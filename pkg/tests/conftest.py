import warnings

import numpy as np
import pytest

from gldakit.core import CohortDataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def quiet():
    """Suppress the non-standardized-input warning in fits on raw data."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


def make_cohort(values, subjects, n_subjects, timestamps=None):
    return CohortDataset(values=np.asarray(values, dtype=float),
                         subjects=np.asarray(subjects),
                         n_subjects=n_subjects, timestamps=timestamps)


def random_spd(rng, v, scale=1.0):
    a = rng.standard_normal((v, v))
    return scale * (a @ a.T + v * np.eye(v))
