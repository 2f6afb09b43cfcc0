"""Shared factories for randomized datasets and potential-outcome tables."""

import numpy as np
import pytest

from srcre import AdoptionTime, Dataset, DesignSpec, adoption_times
from srcre.oracle import PotentialOutcomeTable


def balanced_design(n_clusters: int, n_periods: int) -> DesignSpec:
    """Near-equal arm sizes; the remainder goes to the earliest arms."""
    n_arms = n_periods + 1
    base = n_clusters // n_arms
    sizes = [base] * n_arms
    for k in range(n_clusters - base * n_arms):
        sizes[k] += 1
    return DesignSpec(n_periods, tuple(sizes))


def make_dataset(
    rng: np.random.Generator,
    n_clusters: int = 12,
    n_periods: int = 2,
    p_x: int = 1,
    p_c: int = 1,
    max_cell: int = 5,
    cluster_signal: float = 0.6,
) -> Dataset:
    """A random observed dataset with a balanced arm assignment baked in."""
    design = balanced_design(n_clusters, n_periods)
    arms = adoption_times(n_periods)
    adoption = []
    for k, size in enumerate(design.sizes):
        adoption.extend([arms[k]] * size)
    rng.shuffle(adoption)

    sizes = rng.integers(1, max_cell + 1, size=(n_clusters, n_periods))
    counts = sizes.reshape(-1)
    cluster_index = np.repeat(
        np.repeat(np.arange(n_clusters), n_periods), counts
    )
    period_index = np.repeat(np.tile(np.arange(n_periods), n_clusters), counts)
    n = int(counts.sum())
    x = rng.normal(size=(n, p_x))
    c = rng.normal(size=(n_clusters, n_periods, p_c))
    cluster_effect = rng.normal(scale=cluster_signal, size=n_clusters)
    y = (
        cluster_effect[cluster_index]
        + 0.3 * period_index
        + 0.5 * x.sum(axis=1)
        + 0.4 * c.sum(axis=2)[cluster_index, period_index]
        + rng.normal(scale=0.5, size=n)
    )
    weight = rng.uniform(0.5, 2.0, size=n)
    return Dataset.from_arrays(
        n_periods=n_periods,
        cluster_ids=tuple(f"c{i}" for i in range(n_clusters)),
        adoption=adoption,
        cluster_index=cluster_index,
        period_index=period_index,
        y=y,
        x=x,
        weight_column=weight,
        c=c,
    )


def make_table(
    rng: np.random.Generator,
    n_clusters: int = 9,
    n_periods: int = 2,
    p_x: int = 1,
    p_c: int = 1,
    max_cell: int = 5,
) -> PotentialOutcomeTable:
    """A random potential-outcome table with arm-specific shifts and slopes."""
    sizes = rng.integers(1, max_cell + 1, size=(n_clusters, n_periods))
    counts = sizes.reshape(-1)
    cluster_index = np.repeat(
        np.repeat(np.arange(n_clusters), n_periods), counts
    )
    period_index = np.repeat(np.tile(np.arange(n_periods), n_clusters), counts)
    n = int(counts.sum())
    x = rng.normal(size=(n, p_x))
    c = rng.normal(size=(n_clusters, n_periods, p_c))
    base = (
        rng.normal(scale=0.8, size=n_clusters)[cluster_index]
        + 0.3 * (period_index + 1)
        + 0.5 * x.sum(axis=1)
        + 0.4 * c.sum(axis=2)[cluster_index, period_index]
    )
    shifts = rng.normal(scale=1.0, size=n_periods + 1)
    y_pot = np.empty((n, n_periods + 1))
    for arm in range(n_periods + 1):
        y_pot[:, arm] = base * (1.0 + 0.2 * arm) + shifts[arm] + rng.normal(
            scale=0.5, size=n
        )
    return PotentialOutcomeTable.from_arrays(
        n_periods=n_periods,
        cluster_ids=tuple(f"c{i}" for i in range(n_clusters)),
        cluster_index=cluster_index,
        period_index=period_index,
        y_pot=y_pot,
        x=x,
        c=c,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
