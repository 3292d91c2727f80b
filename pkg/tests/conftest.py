import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)


@pytest.fixture
def four_subject_ds():
    """Four subjects, events at 1..4, covariate pattern (0, 0, 1, 1)."""
    from crcure import SubjectRecord, validate_dataset

    records = [
        SubjectRecord(time=t, status=1, cause=1, covariates=[z])
        for t, z in zip([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 1.0, 1.0])
    ]
    return validate_dataset(records, 1)
