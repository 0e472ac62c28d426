import os

# Single-threaded BLAS: faster for this workload and keeps runs reproducible.
# Must be set before numpy initializes.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)
