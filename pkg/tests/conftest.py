"""Shared fixtures: one small dataset reused by training-level tests."""

import pytest

from fracsde import benchmark_1d, generate_dataset


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(
        benchmark_1d(),
        hurst=0.7,
        n_coarse=8,
        k=2,
        counts=(6, 3, 3),
        seed=11,
    )
