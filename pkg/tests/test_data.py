"""Dataset loading, adoption times, and the derived weight system."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srcre import (
    AdoptionTime,
    ColumnSchema,
    Dataset,
    WeightScheme,
    adoption_times,
    derive_weights,
    load_dataset,
)
from srcre.errors import (
    EmptyClusterPeriod,
    InvalidAdoptionTime,
    MissingColumn,
    NonContiguousPeriods,
    NonFiniteValue,
    ZeroTotalWeight,
)

from conftest import make_dataset


# ---------------------------------------------------------------------------
# AdoptionTime
# ---------------------------------------------------------------------------

def test_adoption_time_ordering():
    times = adoption_times(3)
    assert [str(a) for a in times] == ["1", "2", "3", "inf"]
    assert all(times[i] < times[i + 1] for i in range(3))
    assert len(times) == 4  # always J + 1 arms


def test_adoption_time_parse_round_trip():
    assert AdoptionTime.parse("inf").is_never
    assert AdoptionTime.parse("never").is_never
    assert AdoptionTime.parse(3) == AdoptionTime(3)
    assert AdoptionTime.parse("2") == AdoptionTime(2)
    assert str(AdoptionTime.never()) == "inf"
    with pytest.raises(InvalidAdoptionTime):
        AdoptionTime.parse("sometime")
    with pytest.raises(InvalidAdoptionTime):
        AdoptionTime(0)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _small_csv(tmp_path, drop_cell=False):
    rows = [
        {"cluster_id": "a", "period": 1, "adoption_time": 1, "outcome": 1.0},
        {"cluster_id": "a", "period": 2, "adoption_time": 1, "outcome": 2.0},
        {"cluster_id": "b", "period": 1, "adoption_time": "inf", "outcome": 3.0},
        {"cluster_id": "b", "period": 2, "adoption_time": "inf", "outcome": 4.0},
    ]
    if drop_cell:
        rows = rows[:3]
    path = tmp_path / "data.csv"
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def test_load_minimal_csv(tmp_path):
    d = load_dataset(_small_csv(tmp_path))
    assert d.n_clusters == 2
    assert d.n_periods == 2
    assert len(d.arms) == 3
    assert d.adoption[0] == AdoptionTime(1)
    assert d.adoption[1].is_never


def test_load_missing_cell(tmp_path):
    with pytest.raises(EmptyClusterPeriod):
        load_dataset(_small_csv(tmp_path, drop_cell=True))


def test_load_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame([{"cluster_id": "a", "period": 1, "outcome": 1.0}]).to_csv(
        path, index=False
    )
    with pytest.raises(MissingColumn):
        load_dataset(path)


def test_load_non_contiguous_periods(tmp_path):
    path = tmp_path / "gap.csv"
    rows = [
        {"cluster_id": "a", "period": 1, "adoption_time": "inf", "outcome": 0.0},
        {"cluster_id": "a", "period": 3, "adoption_time": "inf", "outcome": 0.0},
    ]
    pd.DataFrame(rows).to_csv(path, index=False)
    with pytest.raises(NonContiguousPeriods):
        load_dataset(path)


def test_load_non_finite(tmp_path):
    path = tmp_path / "nan.csv"
    rows = [
        {"cluster_id": "a", "period": 1, "adoption_time": 1, "outcome": np.nan},
        {"cluster_id": "b", "period": 1, "adoption_time": "inf", "outcome": 1.0},
    ]
    pd.DataFrame(rows).to_csv(path, index=False)
    with pytest.raises(NonFiniteValue):
        load_dataset(path)


def test_load_trial_shaped_schema(tmp_path):
    """J=4, arms of sizes 12/12/11/11/11, three covariates; synthetic values."""
    rng = np.random.default_rng(6)
    sizes = [12, 12, 11, 11, 11]
    adoptions = []
    for k, s in enumerate(sizes):
        label = str(k + 1) if k < 4 else "inf"
        adoptions.extend([label] * s)
    rows = []
    for i, adopt in enumerate(adoptions):
        for j in range(1, 5):
            for _ in range(int(rng.integers(2, 5))):
                rows.append(
                    {
                        "cluster_id": f"h{i}",
                        "period": j,
                        "adoption_time": adopt,
                        "outcome": float(rng.integers(0, 2)),
                        "x_age": rng.normal(60, 10),
                        "x_gender": float(rng.integers(0, 2)),
                        "x_sbp": rng.normal(130, 20),
                    }
                )
    path = tmp_path / "trial.csv"
    pd.DataFrame(rows).to_csv(path, index=False)
    d = load_dataset(path)
    assert d.n_periods == 4
    assert d.p_x == 3
    assert d.x_names == ("x_age", "x_gender", "x_sbp")
    assert tuple(d.arm_sizes()) == (12, 12, 11, 11, 11)


def test_load_relabels_shifted_periods(tmp_path):
    path = tmp_path / "shift.csv"
    rows = [
        {"cluster_id": "a", "period": 5, "adoption_time": 6, "outcome": 0.0},
        {"cluster_id": "a", "period": 6, "adoption_time": 6, "outcome": 0.0},
        {"cluster_id": "b", "period": 5, "adoption_time": "inf", "outcome": 1.0},
        {"cluster_id": "b", "period": 6, "adoption_time": "inf", "outcome": 1.0},
    ]
    pd.DataFrame(rows).to_csv(path, index=False)
    d = load_dataset(path)
    assert d.n_periods == 2
    assert d.adoption[0] == AdoptionTime(2)


# ---------------------------------------------------------------------------
# derive_weights
# ---------------------------------------------------------------------------

def _two_cluster_dataset(n1=2, n2=3):
    cluster_index = np.array([0] * n1 + [1] * n2)
    period_index = np.zeros(n1 + n2, dtype=int)
    return Dataset.from_arrays(
        n_periods=1,
        cluster_ids=("a", "b"),
        adoption=(AdoptionTime(1), AdoptionTime.never()),
        cluster_index=cluster_index,
        period_index=period_index,
        y=np.arange(n1 + n2, dtype=float),
    )


def test_uniform_weights_direct_definition():
    d = _two_cluster_dataset(2, 3)
    w = derive_weights(d, WeightScheme.uniform())
    assert w.w_period[0] == 5.0
    assert w.pi_cluster_period[0, 0] == pytest.approx(0.4, abs=1e-15)
    assert w.pi_cluster_period[1, 0] == pytest.approx(0.6, abs=1e-15)


def test_inverse_size_weights_equalize_clusters(rng):
    d = make_dataset(rng, n_clusters=6, n_periods=2)
    w = derive_weights(d, WeightScheme.inverse_cluster_period_size())
    assert np.abs(w.pi_cluster_period - 1.0 / 6.0).max() <= 1e-14


def test_custom_zero_period_weight():
    d = Dataset.from_arrays(
        n_periods=2,
        cluster_ids=("a", "b"),
        adoption=(AdoptionTime(1), AdoptionTime.never()),
        cluster_index=np.array([0, 0, 1, 1]),
        period_index=np.array([0, 1, 0, 1]),
        y=np.ones(4),
        weight_column=np.array([1.0, 0.0, 1.0, 0.0]),
    )
    with pytest.raises(ZeroTotalWeight):
        derive_weights(d, WeightScheme.custom())


def test_pi_sums_to_one_per_period(rng):
    for scheme in (
        WeightScheme.uniform(),
        WeightScheme.inverse_cluster_period_size(),
        WeightScheme.custom(),
    ):
        d = make_dataset(rng, n_clusters=8, n_periods=3)
        w = derive_weights(d, scheme)
        per_period = np.bincount(d.period_index, weights=w.pi, minlength=3)
        assert np.abs(per_period - 1.0).max() <= 1e-12


def test_ytilde_matches_definition(rng):
    d = make_dataset(rng, n_clusters=7, n_periods=2)
    w = derive_weights(d, WeightScheme.custom())
    recomputed = d.n_clusters * w.pi_cluster_period * w.ybar
    scale = np.maximum(1.0, np.abs(w.ytilde))
    assert (np.abs(recomputed - w.ytilde) / scale).max() <= 1e-12


def test_derive_weights_deterministic(rng):
    d = make_dataset(rng, n_clusters=5, n_periods=2)
    w1 = derive_weights(d, WeightScheme.custom())
    w2 = derive_weights(d, WeightScheme.custom())
    for name in ("pi", "ybar", "ytilde", "xbar_period", "cc_w"):
        a, b = getattr(w1, name), getattr(w2, name)
        assert np.array_equal(a, b)  # bit identical


@settings(max_examples=20, deadline=None)
@given(
    st.integers(min_value=2, max_value=6),
    st.integers(min_value=1, max_value=3),
    st.integers(min_value=0, max_value=2 ** 31 - 1),
)
def test_weight_invariants_property(n_clusters, n_periods, seed):
    d = make_dataset(
        np.random.default_rng(seed),
        n_clusters=max(n_clusters, n_periods + 1),
        n_periods=n_periods,
    )
    w = derive_weights(d, WeightScheme.custom())
    per_period = np.bincount(d.period_index, weights=w.pi, minlength=n_periods)
    assert np.abs(per_period - 1.0).max() <= 1e-12
    assert np.abs(w.pi_cluster_period.sum(axis=0) - 1.0).max() <= 1e-12


def test_arrays_are_immutable(rng):
    d = make_dataset(rng)
    with pytest.raises(ValueError):
        d.y[0] = 99.0
    w = derive_weights(d, WeightScheme.uniform())
    with pytest.raises(ValueError):
        w.pi[0] = 0.5
