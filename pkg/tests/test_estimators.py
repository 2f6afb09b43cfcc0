"""Point estimators: closed forms, equivalences, and the full-matrix oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srcre import (
    AdoptionTime,
    Dataset,
    WeightScheme,
    derive_weights,
    fit,
    full_wls_oracle,
    location_shift_report,
)
from srcre.errors import (
    EmptyArm,
    InsufficientClusters,
    InvalidEstimatorSpec,
    RankDeficientCovariates,
)
from srcre.estimators import Adjustment, EstimatorSpec, Level

from conftest import make_dataset


def _constant_outcome_dataset():
    """J=1, arm-1 outcomes all 3.0, never-arm outcomes all 1.0, ragged sizes."""
    cluster_index = np.array([0, 0, 1, 2, 2, 2, 3])
    period_index = np.zeros(7, dtype=int)
    adoption = (
        AdoptionTime(1), AdoptionTime(1), AdoptionTime.never(), AdoptionTime.never()
    )
    y = np.where(cluster_index <= 1, 3.0, 1.0)
    return Dataset.from_arrays(
        n_periods=1,
        cluster_ids=("a", "b", "c", "d"),
        adoption=adoption,
        cluster_index=cluster_index,
        period_index=period_index,
        y=y,
        weight_column=np.linspace(0.5, 2.0, 7),
    )


@pytest.mark.parametrize("level", [Level.INDIVIDUAL, Level.AVERAGE, Level.TOTAL])
@pytest.mark.parametrize(
    "scheme",
    [WeightScheme.uniform(), WeightScheme.inverse_cluster_period_size(),
     WeightScheme.custom()],
)
def test_constant_outcomes_give_exact_contrast(level, scheme):
    d = _constant_outcome_dataset()
    w = derive_weights(d, scheme)
    est = fit(d, w, EstimatorSpec(level))
    tau = est.tau(AdoptionTime(1), AdoptionTime.never(), 1)
    assert tau == pytest.approx(2.0, abs=1e-12)


def test_unadjusted_beta_is_group_weighted_mean(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=2)
    w = derive_weights(d, WeightScheme.custom())
    est = fit(d, w, EstimatorSpec(Level.INDIVIDUAL))
    codes = d.arm_codes()
    for arm in range(3):
        members = codes == arm
        for j in range(2):
            num = (w.pi_cluster_period[members, j] * w.ybar[members, j]).sum()
            den = w.pi_cluster_period[members, j].sum()
            assert est.beta[arm, j] == pytest.approx(num / den, abs=1e-12)


def test_individual_equals_average(rng):
    for _ in range(5):
        d = make_dataset(rng, n_clusters=9, n_periods=2)
        w = derive_weights(d, WeightScheme.uniform())
        ti = fit(d, w, EstimatorSpec(Level.INDIVIDUAL)).tau_vector()
        ta = fit(d, w, EstimatorSpec(Level.AVERAGE)).tau_vector()
        assert np.abs(ti - ta).max() <= 1e-10 * np.maximum(1.0, np.abs(ti)).max()


def test_cluster_covariate_adjustment_equivalence(rng):
    d = make_dataset(rng, n_clusters=12, n_periods=2, p_c=2)
    w = derive_weights(d, WeightScheme.custom())
    cov = ("c:c0", "c:c1")
    ti = fit(d, w, EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, cov))
    ta = fit(d, w, EstimatorSpec(Level.AVERAGE, Adjustment.FULLY_INTERACTED, cov))
    assert np.abs(ti.tau_vector() - ta.tau_vector()).max() <= 1e-10


def test_inverse_weights_triple_equality(rng):
    d = make_dataset(rng, n_clusters=12, n_periods=2, p_c=1)
    w = derive_weights(d, WeightScheme.inverse_cluster_period_size())
    levels = [
        fit(d, w, EstimatorSpec(level)).tau_vector()
        for level in (Level.INDIVIDUAL, Level.AVERAGE, Level.TOTAL)
    ]
    assert np.abs(levels[0] - levels[1]).max() <= 1e-10
    assert np.abs(levels[1] - levels[2]).max() <= 1e-10
    adj = [
        fit(
            d, w, EstimatorSpec(level, Adjustment.FULLY_INTERACTED, ("c:c0",))
        ).tau_vector()
        for level in (Level.INDIVIDUAL, Level.AVERAGE, Level.TOTAL)
    ]
    assert np.abs(adj[0] - adj[1]).max() <= 1e-10
    assert np.abs(adj[1] - adj[2]).max() <= 1e-10


def test_antisymmetry_exact(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=2)
    w = derive_weights(d, WeightScheme.uniform())
    est = fit(d, w, EstimatorSpec(Level.INDIVIDUAL))
    a1, a2 = AdoptionTime(1), AdoptionTime(2)
    for j in (1, 2):
        assert est.tau(a1, a2, j) == -est.tau(a2, a1, j)
        assert est.tau(a1, a1, j) == 0.0


def test_location_shift_invariance_of_individual_fit(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=2)
    w = derive_weights(d, WeightScheme.uniform())
    report = location_shift_report(d, w, 7.5)
    assert report.max_individual_drift <= 1e-10


def test_location_shift_total_matches_analytic(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=2)
    w = derive_weights(d, WeightScheme.uniform())
    report = location_shift_report(d, w, 5.0)
    deltas = report.delta_total()
    for key, observed in deltas.items():
        assert observed == pytest.approx(report.delta_total_analytic[key], abs=1e-10)


def test_location_shift_zero_m(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=1)
    w = derive_weights(d, WeightScheme.uniform())
    report = location_shift_report(d, w, 0.0)
    assert report.max_individual_drift == 0.0
    assert all(v == 0.0 for v in report.delta_total().values())


def test_location_shift_equal_weights_total_invariant(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=2)
    w = derive_weights(d, WeightScheme.inverse_cluster_period_size())
    report = location_shift_report(d, w, 4.0)
    assert max(abs(v) for v in report.delta_total().values()) <= 1e-10


# ---------------------------------------------------------------------------
# Fit vs the stacked-design oracle
# ---------------------------------------------------------------------------

_SPEC_MENU = [
    EstimatorSpec(Level.INDIVIDUAL),
    EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ("x:x0",)),
    EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ("x:x0", "c:c0")),
    EstimatorSpec(Level.INDIVIDUAL, Adjustment.ANCOVA, ("x:x0",)),
    EstimatorSpec(Level.AVERAGE),
    EstimatorSpec(Level.AVERAGE, Adjustment.FULLY_INTERACTED, ("c:c0",)),
    EstimatorSpec(Level.TOTAL),
    EstimatorSpec(Level.TOTAL, Adjustment.FULLY_INTERACTED, ("pi",)),
    EstimatorSpec(Level.TOTAL, Adjustment.FULLY_INTERACTED, ("pi", "pi*c:c0")),
    EstimatorSpec(Level.TOTAL, Adjustment.FULLY_INTERACTED, ("pi", "xtilde:x0")),
]


def _assert_matches_oracle(d, w, spec, tol=1e-9):
    a = fit(d, w, spec)
    b = full_wls_oracle(d, w, spec)
    scale = np.maximum(1.0, np.abs(b.beta_vec))
    assert (np.abs(a.beta_vec - b.beta_vec) / scale).max() <= tol
    assert np.abs(a.residuals - b.residuals).max() <= tol * max(
        1.0, np.abs(d.y).max()
    )
    if a.gamma is not None:
        assert np.abs(a.gamma - b.gamma).max() <= tol * max(1.0, np.abs(b.gamma).max())


@pytest.mark.parametrize("spec", _SPEC_MENU, ids=lambda s: s.name)
def test_fit_matches_oracle_menu(rng, spec):
    d = make_dataset(rng, n_clusters=12, n_periods=2, p_x=1, p_c=1)
    w = derive_weights(d, WeightScheme.custom())
    _assert_matches_oracle(d, w, spec)


def test_fully_interacted_matches_oracle_two_covariates(rng):
    d = make_dataset(rng, n_clusters=12, n_periods=2, p_x=2)
    w = derive_weights(d, WeightScheme.uniform())
    spec = EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ("x:x0", "x:x1"))
    _assert_matches_oracle(d, w, spec)


@settings(max_examples=20, deadline=None)
@given(
    st.integers(min_value=0, max_value=2 ** 31 - 1),
    st.sampled_from(range(len(_SPEC_MENU))),
    st.sampled_from(["uniform", "inverse_cluster_period_size", "custom"]),
)
def test_fit_matches_oracle_property(seed, spec_idx, scheme_name):
    d = make_dataset(
        np.random.default_rng(seed), n_clusters=12, n_periods=2, p_x=1, p_c=1
    )
    w = derive_weights(d, WeightScheme.parse(scheme_name))
    _assert_matches_oracle(d, w, _SPEC_MENU[spec_idx])


# ---------------------------------------------------------------------------
# Guards
# ---------------------------------------------------------------------------

def test_zero_covariate_is_rank_deficient(rng):
    d = make_dataset(rng, n_clusters=12, n_periods=2, p_x=1)
    zeroed = Dataset.from_arrays(
        n_periods=d.n_periods,
        cluster_ids=d.cluster_ids,
        adoption=d.adoption,
        cluster_index=d.cluster_index,
        period_index=d.period_index,
        y=d.y,
        x=np.zeros_like(d.x),
        weight_column=d.weight_column,
        c=d.c,
    )
    w = derive_weights(zeroed, WeightScheme.uniform())
    spec = EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ("x:x0",))
    with pytest.raises(RankDeficientCovariates):
        fit(zeroed, w, spec)
    with pytest.raises(RankDeficientCovariates):
        full_wls_oracle(zeroed, w, spec)


def test_missing_arm_is_empty_arm(rng):
    d = make_dataset(rng, n_clusters=8, n_periods=2)
    all_never = Dataset.from_arrays(
        n_periods=d.n_periods,
        cluster_ids=d.cluster_ids,
        adoption=tuple(AdoptionTime.never() for _ in d.adoption),
        cluster_index=d.cluster_index,
        period_index=d.period_index,
        y=d.y,
        x=d.x,
        c=d.c,
    )
    w = derive_weights(all_never, WeightScheme.uniform())
    with pytest.raises(EmptyArm):
        fit(all_never, w, EstimatorSpec(Level.INDIVIDUAL))


def test_small_arm_rejected_under_adjustment(rng):
    d = make_dataset(rng, n_clusters=6, n_periods=2)  # two clusters per arm
    w = derive_weights(d, WeightScheme.uniform())
    spec = EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ("x:x0",))
    with pytest.raises(InsufficientClusters):
        fit(d, w, spec)


def test_spec_validation():
    with pytest.raises(InvalidEstimatorSpec):
        EstimatorSpec(Level.AVERAGE, Adjustment.ANCOVA, ("c:c0",))
    with pytest.raises(InvalidEstimatorSpec):
        EstimatorSpec(Level.INDIVIDUAL, Adjustment.NONE, ("x:x0",))
    with pytest.raises(InvalidEstimatorSpec):
        EstimatorSpec(Level.AVERAGE, Adjustment.FULLY_INTERACTED, ("pi",))
    with pytest.raises(InvalidEstimatorSpec):
        EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ())


def test_estimate_serialization_round_trip(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=1)
    w = derive_weights(d, WeightScheme.uniform())
    est = fit(d, w, EstimatorSpec(Level.TOTAL))
    payload = est.to_json()
    assert payload["spec"]["level"] == "total"
    assert len(payload["pairs"]) == 1
    assert payload["pairs"][0]["a_prime"] == "inf"
