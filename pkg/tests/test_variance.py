"""Sandwich covariances, contrast matrices, and Wald intervals."""

import numpy as np
import pytest

from srcre import (
    AdoptionTime,
    Dataset,
    WeightScheme,
    contrast_Q,
    derive_weights,
    fit,
    sandwich,
    stacked_Q,
    summary_se,
    wald_ci,
)
from srcre.errors import DimensionMismatch, InsufficientClusters, InvalidPair
from srcre.estimators import Adjustment, EstimatorSpec, Level
from srcre.variance import sandwich_parts, stacked_length

from conftest import make_dataset


# ---------------------------------------------------------------------------
# Contrast matrices
# ---------------------------------------------------------------------------

def test_contrast_single_period():
    q = contrast_Q(1, AdoptionTime(1), AdoptionTime.never()).matrix
    assert q.shape == (1, 2)
    assert np.array_equal(q, [[1.0, -1.0]])


def test_contrast_two_periods_first_pair():
    q = contrast_Q(2, AdoptionTime(1), AdoptionTime(2)).matrix
    eye = np.eye(2)
    zero = np.zeros((2, 2))
    assert np.array_equal(q, np.hstack([eye, -eye, zero]))


def test_contrast_two_periods_last_pair():
    # block rule applied to (2, inf)
    q = contrast_Q(2, AdoptionTime(2), AdoptionTime.never()).matrix
    eye = np.eye(2)
    zero = np.zeros((2, 2))
    assert np.array_equal(q, np.hstack([zero, eye, -eye]))


def test_contrast_antisymmetry_and_rank():
    for n_periods in (1, 2, 3):
        arms = [AdoptionTime(j) for j in range(1, n_periods + 1)]
        arms.append(AdoptionTime.never())
        for i, a in enumerate(arms):
            for ap in arms[i + 1 :]:
                q = contrast_Q(n_periods, a, ap).matrix
                q_rev = contrast_Q(n_periods, ap, a).matrix
                assert np.array_equal(q, -q_rev)
                assert np.linalg.matrix_rank(q) == n_periods
                # each row has exactly one +1 and one -1
                assert np.all((q == 1.0).sum(axis=1) == 1)
                assert np.all((q == -1.0).sum(axis=1) == 1)


def test_contrast_invalid_pair():
    with pytest.raises(InvalidPair):
        contrast_Q(2, AdoptionTime(1), AdoptionTime(1))


def test_stacked_Q_shape():
    q = stacked_Q(2)
    assert q.shape == (stacked_length(2), 6)
    assert stacked_length(2) == 2 * 3


# ---------------------------------------------------------------------------
# Sandwich
# ---------------------------------------------------------------------------

def test_zero_residuals_give_zero_covariance():
    # outcomes equal to fitted group means exactly
    cluster_index = np.repeat(np.arange(4), 2)
    period_index = np.zeros(8, dtype=int)
    adoption = (
        AdoptionTime(1), AdoptionTime(1), AdoptionTime.never(), AdoptionTime.never()
    )
    y = np.where(cluster_index <= 1, 2.5, -1.0)
    d = Dataset.from_arrays(
        n_periods=1,
        cluster_ids=tuple("abcd"),
        adoption=adoption,
        cluster_index=cluster_index,
        period_index=period_index,
        y=y,
    )
    w = derive_weights(d, WeightScheme.uniform())
    est = fit(d, w, EstimatorSpec(Level.INDIVIDUAL))
    cov = sandwich(est, d, w)
    pair = (AdoptionTime(1), AdoptionTime.never())
    assert np.abs(cov.cov(*pair)).max() == 0.0
    assert cov.se(*pair)[0] == 0.0


def test_cr_equals_hc_for_unadjusted(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=2)
    w = derive_weights(d, WeightScheme.uniform())
    ci = sandwich(fit(d, w, EstimatorSpec(Level.INDIVIDUAL)), d, w)
    ca = sandwich(fit(d, w, EstimatorSpec(Level.AVERAGE)), d, w)
    assert ci.kind == "CR"
    assert ca.kind == "HC"
    assert np.abs(ci.e_beta - ca.e_beta).max() <= 1e-10


def test_cr_equals_hc_for_cluster_covariate_adjustment(rng):
    d = make_dataset(rng, n_clusters=12, n_periods=2, p_c=1)
    w = derive_weights(d, WeightScheme.custom())
    cov = ("c:c0",)
    ci = sandwich(
        fit(d, w, EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, cov)), d, w
    )
    ca = sandwich(
        fit(d, w, EstimatorSpec(Level.AVERAGE, Adjustment.FULLY_INTERACTED, cov)), d, w
    )
    assert np.abs(ci.e_beta - ca.e_beta).max() <= 1e-10


def test_marginal_se_closed_form(rng):
    """The contrast diagonal must equal the explicit score-sum expression."""
    d = make_dataset(rng, n_clusters=6, n_periods=2)
    w = derive_weights(d, WeightScheme.custom())
    est = fit(d, w, EstimatorSpec(Level.INDIVIDUAL))
    cov = sandwich(est, d, w)
    codes = d.arm_codes()
    n_periods = d.n_periods
    cell = d.cluster_index * n_periods + d.period_index
    score = np.bincount(
        cell, weights=w.pi * est.residuals, minlength=d.n_clusters * n_periods
    ).reshape(d.n_clusters, n_periods)
    a, ap = AdoptionTime(1), AdoptionTime.never()
    expected = np.zeros(n_periods)
    for arm in (0, n_periods):
        members = codes == arm
        for j in range(n_periods):
            pi_arm = w.pi_cluster_period[members, j].sum()
            expected[j] += (score[members, j] ** 2).sum() / pi_arm**2
    assert np.abs(cov.se(a, ap) - np.sqrt(expected)).max() <= 1e-12


def test_sandwich_is_psd(rng):
    for _ in range(5):
        d = make_dataset(rng, n_clusters=12, n_periods=2, p_x=1)
        w = derive_weights(d, WeightScheme.uniform())
        spec = EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ("x:x0",))
        est = fit(d, w, spec)
        parts = sandwich_parts(est, d, w)
        full = parts.bread @ parts.meat @ parts.bread
        full = (full + full.T) / 2
        eig = np.linalg.eigvalsh(full)
        assert eig.min() >= -1e-10 * max(np.trace(full), 1e-300)
        assert np.abs(parts.meat - parts.meat.T).max() == 0.0


def test_average_path_with_unit_cells_reproduces_individual(rng):
    """With N_ij = 1 the HC path is the CR path on the same rows."""
    d = make_dataset(rng, n_clusters=9, n_periods=2, max_cell=1)
    w = derive_weights(d, WeightScheme.uniform())
    ei = fit(d, w, EstimatorSpec(Level.INDIVIDUAL))
    ea = fit(d, w, EstimatorSpec(Level.AVERAGE))
    assert np.array_equal(ei.beta, ea.beta)
    pi = sandwich_parts(ei, d, w)
    pa = sandwich_parts(ea, d, w)
    assert np.array_equal(pi.scores, pa.scores)
    assert np.array_equal(pi.bread, pa.bread)


def test_insufficient_clusters_for_variance(rng):
    d = make_dataset(rng, n_clusters=4, n_periods=2)  # arm sizes 2/1/1
    w = derive_weights(d, WeightScheme.uniform())
    est = fit(d, w, EstimatorSpec(Level.INDIVIDUAL))
    with pytest.raises(InsufficientClusters):
        sandwich(est, d, w)


def test_df_correction_scales_covariance(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=1)
    w = derive_weights(d, WeightScheme.uniform())
    est = fit(d, w, EstimatorSpec(Level.INDIVIDUAL))
    raw = sandwich(est, d, w)
    corrected = sandwich(est, d, w, df_correction=True)
    ratio = corrected.e_beta / np.where(raw.e_beta == 0, 1.0, raw.e_beta)
    assert ratio[raw.e_beta != 0].max() == pytest.approx(9 / 8, rel=1e-12)


# ---------------------------------------------------------------------------
# Summary SEs and Wald intervals
# ---------------------------------------------------------------------------

def test_summary_se_one_hot_matches_marginal(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=2)
    w = derive_weights(d, WeightScheme.uniform())
    est = fit(d, w, EstimatorSpec(Level.INDIVIDUAL))
    cov = sandwich(est, d, w)
    b = np.zeros(stacked_length(2))
    b[2] = 1.0  # pair (1, inf), period 1 in stacking order
    a, ap = AdoptionTime(1), AdoptionTime.never()
    assert summary_se(cov, b) == pytest.approx(cov.se(a, ap)[0], abs=1e-12)


def test_summary_se_zero_vector(rng):
    d = make_dataset(rng, n_clusters=9, n_periods=1)
    w = derive_weights(d, WeightScheme.uniform())
    cov = sandwich(fit(d, w, EstimatorSpec(Level.INDIVIDUAL)), d, w)
    assert summary_se(cov, np.zeros(stacked_length(1))) == 0.0
    with pytest.raises(DimensionMismatch):
        summary_se(cov, np.zeros(5))


def test_wald_ci_frozen_quantiles():
    lo, hi = wald_ci(0.0, 1.0, 0.95)
    assert lo == pytest.approx(-1.959963984540054, abs=1e-9)
    assert hi == pytest.approx(1.959963984540054, abs=1e-9)
    assert wald_ci(2.0, 0.0, 0.95) == (2.0, 2.0)
    lo, hi = wald_ci(1.0, 0.5, 0.90)
    assert lo == pytest.approx(0.1775731865242639, abs=1e-9)
    assert hi == pytest.approx(1.8224268134757362, abs=1e-9)


def test_wald_ci_validation():
    with pytest.raises(DimensionMismatch):
        wald_ci(0.0, -1.0, 0.95)
    with pytest.raises(DimensionMismatch):
        wald_ci(0.0, 1.0, 1.5)
