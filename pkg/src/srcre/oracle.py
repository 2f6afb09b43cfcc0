"""Finite-population ground truth for verification.

Holds the full potential-outcome table Y_ijk(a), computes true estimands
through all three algebraic re-expressions, the finite-population covariance
constructions the asymptotic results are stated in, the residual series each
variance limit is built from, exact randomization moments by exhaustive
enumeration, and the efficiency-ordering report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _linalg
from .data import (
    AdoptionTime,
    Dataset,
    DerivedWeights,
    WeightScheme,
    adoption_times,
    arm_index,
    cell_mean,
    derive_weights,
    ordered_pairs,
    pi_system,
    record_weights,
    _readonly,
)
from .design import (
    Assignment,
    DesignSpec,
    enumerate_assignments,
    sample_assignment,
    seed_sequence,
)
from .errors import (
    DataError,
    EmptyClusterPeriod,
    NonFiniteValue,
    ShapeMismatch,
    SingularOracleFit,
)
from .estimators import EstimatorSpec, fit
from .variance import sandwich


@dataclass(frozen=True)
class PotentialOutcomeTable:
    """Y_ijk(a) for every record and every adoption time, plus covariates.

    ``y_pot`` has shape (n_records, J+1) in arm block order. The table never
    carries adoption times; ``reveal`` produces an observed Dataset under an
    assignment.
    """

    n_periods: int
    cluster_ids: tuple[str, ...]
    y_pot: np.ndarray
    x: np.ndarray
    weight_column: np.ndarray
    cluster_index: np.ndarray
    period_index: np.ndarray
    c: np.ndarray
    x_names: tuple[str, ...] = ()
    c_names: tuple[str, ...] = ()
    n_ij: np.ndarray = field(default=None, repr=False)

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_ids)

    @property
    def n_records(self) -> int:
        return self.y_pot.shape[0]

    @property
    def n_arms(self) -> int:
        return self.n_periods + 1

    @property
    def arms(self) -> tuple[AdoptionTime, ...]:
        return adoption_times(self.n_periods)

    @classmethod
    def from_arrays(
        cls,
        n_periods: int,
        cluster_ids: Sequence[str],
        cluster_index: np.ndarray,
        period_index: np.ndarray,
        y_pot: np.ndarray,
        x: Optional[np.ndarray] = None,
        weight_column: Optional[np.ndarray] = None,
        c: Optional[np.ndarray] = None,
        x_names: Sequence[str] = (),
        c_names: Sequence[str] = (),
    ) -> "PotentialOutcomeTable":
        n_periods = int(n_periods)
        n_clusters = len(cluster_ids)
        cluster_index = np.asarray(cluster_index, dtype=np.intp)
        period_index = np.asarray(period_index, dtype=np.intp)
        y_pot = np.asarray(y_pot, dtype=float)
        n = y_pot.shape[0]
        if y_pot.ndim != 2 or y_pot.shape[1] != n_periods + 1:
            raise ShapeMismatch(
                f"y_pot must have shape (n, {n_periods + 1}), got {y_pot.shape}"
            )
        if cluster_index.shape != (n,) or period_index.shape != (n,):
            raise ShapeMismatch("record index arrays do not match y_pot")
        x = np.zeros((n, 0)) if x is None else np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        weight_column = (
            np.ones(n) if weight_column is None else np.asarray(weight_column, dtype=float)
        )
        c = np.zeros((n_clusters, n_periods, 0)) if c is None else np.asarray(c, dtype=float)
        if c.shape[:2] != (n_clusters, n_periods):
            raise ShapeMismatch("cluster covariates must have shape (I, J, p_c)")
        for label, arr in (("potential outcome", y_pot), ("covariate", x),
                           ("cluster covariate", c), ("weight", weight_column)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteValue(f"{label} values contain NaN or infinity")

        order = np.lexsort((period_index, cluster_index))
        cluster_index = cluster_index[order]
        period_index = period_index[order]
        y_pot = y_pot[order]
        x = x[order]
        weight_column = weight_column[order]
        n_ij = np.bincount(
            cluster_index * n_periods + period_index,
            minlength=n_clusters * n_periods,
        ).reshape(n_clusters, n_periods)
        if np.any(n_ij == 0):
            i, j = np.argwhere(n_ij == 0)[0]
            raise EmptyClusterPeriod(
                f"cluster {cluster_ids[i]!r} has no records in period {j + 1}"
            )
        x_names = tuple(x_names) if x_names else tuple(f"x{k}" for k in range(x.shape[1]))
        c_names = tuple(c_names) if c_names else tuple(f"c{k}" for k in range(c.shape[2]))
        return cls(
            n_periods=n_periods,
            cluster_ids=tuple(str(cid) for cid in cluster_ids),
            y_pot=_readonly(y_pot),
            x=_readonly(x),
            weight_column=_readonly(weight_column),
            cluster_index=_readonly(cluster_index),
            period_index=_readonly(period_index),
            c=_readonly(c),
            x_names=x_names,
            c_names=c_names,
            n_ij=_readonly(n_ij),
        )

    def reveal(self, assignment: Assignment) -> Dataset:
        """Observed dataset under an assignment: each record's outcome is its
        potential outcome at the cluster's adoption time."""
        if assignment.spec.n_clusters != self.n_clusters:
            raise ShapeMismatch(
                f"assignment has {assignment.spec.n_clusters} clusters, "
                f"table has {self.n_clusters}"
            )
        if assignment.spec.n_periods != self.n_periods:
            raise ShapeMismatch("assignment and table disagree on the period count")
        codes = assignment.arm_codes()
        y = self.y_pot[np.arange(self.n_records), codes[self.cluster_index]]
        return Dataset.from_arrays(
            n_periods=self.n_periods,
            cluster_ids=self.cluster_ids,
            adoption=assignment.arms,
            cluster_index=self.cluster_index,
            period_index=self.period_index,
            y=y,
            x=self.x,
            weight_column=self.weight_column,
            c=self.c,
            x_names=self.x_names,
            c_names=self.c_names,
        )


@dataclass(frozen=True)
class TableAggregates:
    """The pi system and per-arm aggregates of a potential-outcome table."""

    pi: np.ndarray                  # (n,)
    pi_cluster_period: np.ndarray   # (I, J)
    w_period: np.ndarray            # (J,)
    ybar_pot: np.ndarray            # (I, J, A) per-arm cluster-period means
    ytilde_pot: np.ndarray          # (I, J, A) per-arm scaled totals
    ybar_period_pot: np.ndarray     # (J, A) weighted period means per arm
    xbar: np.ndarray                # (I, J, p_x)
    xbar_period: np.ndarray         # (J, p_x)
    xc: np.ndarray                  # (n, p_x)
    xtilde_c: np.ndarray            # (I, J, p_x) I pi (xbar - xbar_period)
    cc_w: np.ndarray                # (I, J, p_c) weighted-centered C
    cc_u: np.ndarray                # (I, J, p_c) unweighted-centered C


def table_aggregates(po: PotentialOutcomeTable, scheme: WeightScheme) -> TableAggregates:
    """Weight system and per-arm aggregates; depends only on the fixed table."""
    w = record_weights(scheme, po.n_ij, po.cluster_index, po.period_index, po.weight_column)
    ps = pi_system(w, po.n_clusters, po.n_periods, po.cluster_index, po.period_index)
    n_arms = po.n_arms

    ybar_pot = np.zeros((po.n_clusters, po.n_periods, n_arms))
    for k in range(n_arms):
        ybar_pot[:, :, k] = cell_mean(
            po.y_pot[:, k], w, ps.w_cluster_period, po.cluster_index, po.period_index
        )
    ytilde_pot = po.n_clusters * ps.pi_cluster_period[:, :, None] * ybar_pot
    ybar_period_pot = np.einsum("ij,ijk->jk", ps.pi_cluster_period, ybar_pot)

    p_x = po.x.shape[1]
    xbar = np.zeros((po.n_clusters, po.n_periods, p_x))
    for k in range(p_x):
        xbar[:, :, k] = cell_mean(
            po.x[:, k], w, ps.w_cluster_period, po.cluster_index, po.period_index
        )
    xbar_period = np.einsum("ij,ijk->jk", ps.pi_cluster_period, xbar)
    xc = po.x - xbar_period[po.period_index, :]
    xtilde_c = (
        po.n_clusters * ps.pi_cluster_period[:, :, None] * (xbar - xbar_period[None, :, :])
    )

    cbar_w = np.einsum("ij,ijk->jk", ps.pi_cluster_period, po.c)
    cbar_u = po.c.mean(axis=0)
    return TableAggregates(
        pi=ps.pi,
        pi_cluster_period=ps.pi_cluster_period,
        w_period=ps.w_period,
        ybar_pot=ybar_pot,
        ytilde_pot=ytilde_pot,
        ybar_period_pot=ybar_period_pot,
        xbar=xbar,
        xbar_period=xbar_period,
        xc=xc,
        xtilde_c=xtilde_c,
        cc_w=po.c - cbar_w[None, :, :],
        cc_u=po.c - cbar_u[None, :, :],
    )


# ---------------------------------------------------------------------------
# True estimands
# ---------------------------------------------------------------------------

def true_dwate_paths(
    po: PotentialOutcomeTable, scheme: WeightScheme
) -> dict[str, dict]:
    """True tau_j(a, a') through the three algebraic re-expressions.

    Returns {"individual": ..., "average": ..., "total": ...}, each a map
    (a, a', j) -> value computed along an independent route: normalized
    individual weights, cluster weights on cluster-period means, and plain
    cluster means of scaled totals.
    """
    agg = table_aggregates(po, scheme)
    n_periods = po.n_periods
    out = {"individual": {}, "average": {}, "total": {}}
    for a, ap in ordered_pairs(n_periods):
        ia, ib = arm_index(a, n_periods), arm_index(ap, n_periods)
        diff_rec = po.y_pot[:, ia] - po.y_pot[:, ib]
        by_ind = np.bincount(po.period_index, weights=agg.pi * diff_rec, minlength=n_periods)
        by_avg = np.einsum(
            "ij,ij->j", agg.pi_cluster_period, agg.ybar_pot[:, :, ia] - agg.ybar_pot[:, :, ib]
        )
        by_tot = (agg.ytilde_pot[:, :, ia] - agg.ytilde_pot[:, :, ib]).mean(axis=0)
        for j in range(1, n_periods + 1):
            out["individual"][(a, ap, j)] = float(by_ind[j - 1])
            out["average"][(a, ap, j)] = float(by_avg[j - 1])
            out["total"][(a, ap, j)] = float(by_tot[j - 1])
    return out


def true_dwate(
    po: PotentialOutcomeTable, scheme: WeightScheme, check_tol: float = 1e-12
) -> dict:
    """True DWATEs, cross-checked across all three re-expressions."""
    paths = true_dwate_paths(po, scheme)
    base = paths["individual"]
    for key, value in base.items():
        scale = max(1.0, abs(value))
        for other in ("average", "total"):
            if abs(paths[other][key] - value) > check_tol * scale:
                raise DataError(
                    f"re-expression mismatch at {key}: {value} vs {paths[other][key]}"
                )
    return base


def epsilon_tilde(agg: TableAggregates, n_clusters: int) -> np.ndarray:
    """Centered scaled totals: Ytilde_ij(a) - I pi_ij ybar_period(a); (I, J, A)."""
    return agg.ytilde_pot - (
        n_clusters * agg.pi_cluster_period[:, :, None] * agg.ybar_period_pot[None, :, :]
    )


# ---------------------------------------------------------------------------
# Finite-population covariance constructions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FinitePopVariance:
    """V_c and V for one adoption pair: J x J covariance constructions of a
    cluster-level series, with and without the difference correction."""

    a: AdoptionTime
    a_prime: AdoptionTime
    v_c: np.ndarray
    v: np.ndarray

    @property
    def correction(self) -> np.ndarray:
        return self.v_c - self.v


def finite_pop_variance(
    series: np.ndarray, design: DesignSpec, a: AdoptionTime, a_prime: AdoptionTime
) -> FinitePopVariance:
    """Build V_c(xi)(a, a') and V(xi)(a, a') for a cluster series (I, J, A)."""
    n_periods = design.n_periods
    ia = arm_index(a, n_periods)
    ib = arm_index(a_prime, n_periods)
    xa = series[:, :, ia]
    xb = series[:, :, ib]
    v_c = xa.T @ xa / design.size(a) + xb.T @ xb / design.size(a_prime)
    delta = xa - xb
    v = v_c - delta.T @ delta / design.n_clusters
    return FinitePopVariance(a=a, a_prime=a_prime, v_c=v_c, v=v)


# ---------------------------------------------------------------------------
# Oracle regression coefficients and theorem residual series
# ---------------------------------------------------------------------------

def _oracle_wls(design: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray]) -> np.ndarray:
    """Minimum-norm least squares; residuals stay unique under degenerate
    covariates (e.g. a constant column), so the variance constructions remain
    well defined."""
    if weights is not None:
        root = np.sqrt(weights)
        design = design * root[:, None]
        y = y * root
    coef = np.linalg.lstsq(design, y, rcond=None)[0]
    if not np.all(np.isfinite(coef)):
        raise SingularOracleFit("full-table oracle regression is singular")
    return coef


def oracle_gamma_individual(
    po: PotentialOutcomeTable, agg: TableAggregates
) -> np.ndarray:
    """Per (j, a): coefficients of the full-table WLS of Y(a) on (1, xc); (J, A, p_x)."""
    p = po.x.shape[1]
    out = np.zeros((po.n_periods, po.n_arms, p))
    for j in range(po.n_periods):
        mask = po.period_index == j
        design = np.column_stack([np.ones(int(mask.sum())), agg.xc[mask]])
        for arm in range(po.n_arms):
            coef = _oracle_wls(design, po.y_pot[mask, arm], agg.pi[mask])
            out[j, arm, :] = coef[1:]
    return out


def oracle_gamma_average(
    po: PotentialOutcomeTable, agg: TableAggregates
) -> np.ndarray:
    """Per (j, a): full-table WLS of ybar(a) on (1, weighted-centered C); (J, A, p_c)."""
    p = po.c.shape[2]
    out = np.zeros((po.n_periods, po.n_arms, p))
    for j in range(po.n_periods):
        design = np.column_stack([np.ones(po.n_clusters), agg.cc_w[:, j, :]])
        wts = agg.pi_cluster_period[:, j]
        for arm in range(po.n_arms):
            coef = _oracle_wls(design, agg.ybar_pot[:, j, arm], wts)
            out[j, arm, :] = coef[1:]
    return out


def total_covariate_grid(
    po: PotentialOutcomeTable, agg: TableAggregates, selectors: Sequence[str]
) -> np.ndarray:
    """Scaled-total-level covariate grid (I, J, q), uncentered.

    Selectors: "pi", "xtilde:<x name>", "pi*c:<c name>", "c:<c name>",
    "xbar:<x name>".
    """
    x_pos = {name: k for k, name in enumerate(po.x_names)}
    c_pos = {name: k for k, name in enumerate(po.c_names)}
    ipi = po.n_clusters * agg.pi_cluster_period
    grids = []
    for sel in selectors:
        if sel == "pi":
            grids.append(agg.pi_cluster_period)
        elif sel.startswith("xtilde:"):
            grids.append(ipi * agg.xbar[:, :, x_pos[sel[7:]]])
        elif sel.startswith("pi*c:"):
            grids.append(agg.pi_cluster_period * po.c[:, :, c_pos[sel[5:]]])
        elif sel.startswith("c:"):
            grids.append(po.c[:, :, c_pos[sel[2:]]])
        elif sel.startswith("xbar:"):
            grids.append(agg.xbar[:, :, x_pos[sel[5:]]])
        else:
            raise DataError(f"unknown total-level selector {sel!r}")
    return np.stack(grids, axis=2)


def oracle_gamma_total(
    po: PotentialOutcomeTable, agg: TableAggregates, grid: np.ndarray
) -> np.ndarray:
    """Per (j, a): full-table OLS of ytilde(a) on (1, unweighted-centered Z)."""
    q = grid.shape[2]
    centered = grid - grid.mean(axis=0)[None, :, :]
    out = np.zeros((po.n_periods, po.n_arms, q))
    for j in range(po.n_periods):
        design = np.column_stack([np.ones(po.n_clusters), centered[:, j, :]])
        for arm in range(po.n_arms):
            coef = _oracle_wls(design, agg.ytilde_pot[:, j, arm], None)
            out[j, arm, :] = coef[1:]
    return out


def residual_series_individual_adjusted(
    po: PotentialOutcomeTable, agg: TableAggregates, gamma: Optional[np.ndarray] = None
) -> np.ndarray:
    """epsilon_tilde minus the scaled-total centered covariates times the
    individual-level oracle coefficients; (I, J, A)."""
    if gamma is None:
        gamma = oracle_gamma_individual(po, agg)
    eps = epsilon_tilde(agg, po.n_clusters)
    return eps - np.einsum("ijp,jap->ija", agg.xtilde_c, gamma)


def residual_series_individual_ancova(
    po: PotentialOutcomeTable,
    agg: TableAggregates,
    design: DesignSpec,
    gamma: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Like the adjusted series but with one arm-fraction-averaged coefficient."""
    if gamma is None:
        gamma = oracle_gamma_individual(po, agg)
    q = np.array([design.fraction(a) for a in design.arms])
    pooled = np.einsum("a,jap->jp", q, gamma)
    eps = epsilon_tilde(agg, po.n_clusters)
    adjust = np.einsum("ijp,jp->ij", agg.xtilde_c, pooled)
    return eps - adjust[:, :, None]


def residual_series_average_adjusted(
    po: PotentialOutcomeTable, agg: TableAggregates, gamma: Optional[np.ndarray] = None
) -> np.ndarray:
    """epsilon_tilde minus I pi_ij C^c gamma_avg; (I, J, A)."""
    if gamma is None:
        gamma = oracle_gamma_average(po, agg)
    scaled_c = po.n_clusters * agg.pi_cluster_period[:, :, None] * agg.cc_w
    eps = epsilon_tilde(agg, po.n_clusters)
    return eps - np.einsum("ijp,jap->ija", scaled_c, gamma)


def residual_series_total(po: PotentialOutcomeTable, agg: TableAggregates) -> np.ndarray:
    """Ytilde_ij(a) - ybar_period(a); (I, J, A)."""
    return agg.ytilde_pot - agg.ybar_period_pot[None, :, :]


def residual_series_total_adjusted(
    po: PotentialOutcomeTable,
    agg: TableAggregates,
    selectors: Sequence[str],
    gamma: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Ytilde(a) - ybar_period(a) - Z^c gamma_total; (I, J, A)."""
    grid = total_covariate_grid(po, agg, selectors)
    centered = grid - grid.mean(axis=0)[None, :, :]
    if gamma is None:
        gamma = oracle_gamma_total(po, agg, grid)
    base = residual_series_total(po, agg)
    return base - np.einsum("ijq,jaq->ija", centered, gamma)


# ---------------------------------------------------------------------------
# Exact randomization moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentsReport:
    """First two randomization moments of an estimator over assignments.

    ``mean_tau`` maps (a, a', j) to the mean estimate; ``cov_tau`` is the
    covariance of the stacked contrast vector; ``mean_icov`` maps pairs to
    the mean of I times the sandwich covariance (None when variance was not
    computed). Exact when ``monte_carlo`` is False.
    """

    n_assignments: int
    monte_carlo: bool
    mean_tau: dict
    cov_tau: np.ndarray
    mean_icov: Optional[dict]
    mc_se_tau: Optional[dict] = None


def _moments_over(
    assignments: Iterable[Assignment],
    po: PotentialOutcomeTable,
    estimator: EstimatorSpec,
    scheme: WeightScheme,
    include_variance: bool,
    monte_carlo: bool,
) -> MomentsReport:
    n_periods = po.n_periods
    pairs = ordered_pairs(n_periods)
    dim = n_periods * len(pairs)
    total = np.zeros(dim)
    outer = np.zeros((dim, dim))
    icov_total = {pair: np.zeros((n_periods, n_periods)) for pair in pairs}
    count = 0
    for assignment in assignments:
        dataset = po.reveal(assignment)
        weights = derive_weights(dataset, scheme)
        estimate = fit(dataset, weights, estimator)
        tau = estimate.tau_vector()
        total += tau
        outer += np.outer(tau, tau)
        if include_variance:
            cov = sandwich(estimate, dataset, weights)
            for pair in pairs:
                icov_total[pair] += po.n_clusters * cov.cov(*pair)
        count += 1
    mean = total / count
    cov_tau = outer / count - np.outer(mean, mean)
    mean_tau = {}
    mc_se = {}
    for k, pair in enumerate(pairs):
        for j in range(1, n_periods + 1):
            pos = k * n_periods + j - 1
            mean_tau[(pair[0], pair[1], j)] = float(mean[pos])
            mc_se[(pair[0], pair[1], j)] = float(
                np.sqrt(max(cov_tau[pos, pos], 0.0) / count)
            )
    mean_icov = (
        {pair: icov_total[pair] / count for pair in pairs} if include_variance else None
    )
    return MomentsReport(
        n_assignments=count,
        monte_carlo=monte_carlo,
        mean_tau=mean_tau,
        cov_tau=cov_tau,
        mean_icov=mean_icov,
        mc_se_tau=mc_se if monte_carlo else None,
    )


def exhaustive_moments(
    po: PotentialOutcomeTable,
    design: DesignSpec,
    estimator: EstimatorSpec,
    scheme: WeightScheme,
    cap: int = 1_000_000,
    include_variance: Optional[bool] = None,
) -> MomentsReport:
    """Exact moments over every assignment in the design's support.

    Variance-estimator means are skipped automatically when some arm has a
    single cluster (the sandwich is undefined there).
    """
    if include_variance is None:
        include_variance = min(design.sizes) >= 2
    return _moments_over(
        enumerate_assignments(design, cap=cap), po, estimator, scheme,
        include_variance, monte_carlo=False,
    )


def sampled_moments(
    po: PotentialOutcomeTable,
    design: DesignSpec,
    estimator: EstimatorSpec,
    scheme: WeightScheme,
    n_samples: int,
    seed: int = 0,
    include_variance: Optional[bool] = None,
) -> MomentsReport:
    """Monte Carlo fallback when the support exceeds the enumeration cap."""
    if include_variance is None:
        include_variance = min(design.sizes) >= 2
    draws = (
        sample_assignment(design, seed_sequence(seed, r)) for r in range(n_samples)
    )
    return _moments_over(draws, po, estimator, scheme, include_variance, monte_carlo=True)


def random_table(
    seed,
    n_clusters: int = 12,
    n_periods: int = 2,
    p_x: int = 1,
    p_c: int = 1,
    max_cell: int = 5,
    effect_scale: float = 1.0,
) -> PotentialOutcomeTable:
    """A small random potential-outcome table for verification runs.

    Cluster-period sizes are uniform on 1..max_cell, covariates standard
    normal, and potential outcomes mix cluster effects, covariate signal, and
    arm-specific shifts so no estimator is degenerate.
    """
    from .design import rng_from_seed

    rng = rng_from_seed(seed)
    sizes = rng.integers(1, max_cell + 1, size=(n_clusters, n_periods))
    counts = sizes.reshape(-1)
    cluster_index = np.repeat(
        np.repeat(np.arange(n_clusters, dtype=np.intp), n_periods), counts
    )
    period_index = np.repeat(np.tile(np.arange(n_periods, dtype=np.intp), n_clusters), counts)
    n = int(counts.sum())

    x = rng.normal(size=(n, p_x))
    c = rng.normal(size=(n_clusters, n_periods, p_c))
    cluster_effect = rng.normal(scale=0.8, size=n_clusters)
    arm_shift = rng.normal(scale=effect_scale, size=n_periods + 1)
    y_pot = np.empty((n, n_periods + 1))
    c_signal = c.sum(axis=2)[cluster_index, period_index]
    base = (
        cluster_effect[cluster_index]
        + 0.3 * (period_index + 1)
        + 0.5 * x.sum(axis=1)
        + 0.4 * c_signal
    )
    for arm in range(n_periods + 1):
        slope = 1.0 + 0.2 * arm
        y_pot[:, arm] = (
            base * slope + arm_shift[arm] + rng.normal(scale=0.5, size=n)
        )
    return PotentialOutcomeTable.from_arrays(
        n_periods=n_periods,
        cluster_ids=tuple(f"c{i + 1}" for i in range(n_clusters)),
        cluster_index=cluster_index,
        period_index=period_index,
        y_pot=y_pot,
        x=x,
        c=c,
    )


# ---------------------------------------------------------------------------
# Efficiency orderings
# ---------------------------------------------------------------------------

_CHAIN_LABELS = (
    ("tot_adj[pi,xtilde]", "tot_adj[pi]"),
    ("tot_adj[pi]", "ind"),
    ("tot_adj[pi,xtilde]", "ind_adj"),
    ("tot_adj[pi,pic]", "tot_adj[pi]"),
    ("tot_adj[pi]", "avg"),
    ("tot_adj[pi,pic]", "avg_adj"),
)


@dataclass(frozen=True)
class InequalityCheck:
    lhs_key: str
    rhs_key: str
    a: AdoptionTime
    a_prime: AdoptionTime
    j: int
    lhs: float
    rhs: float
    ok: bool


@dataclass(frozen=True)
class EfficiencyReport:
    """Theorem-formula variance diagonals and the printed ordering checks.

    The individual-level adjusted estimator is allowed to be less efficient
    than its unadjusted counterpart; those reversals are flagged, never
    treated as violations.
    """

    values: dict
    checks: tuple
    adjusted_individual_reversals: tuple

    @property
    def all_ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_json(self) -> dict:
        return {
            "all_ok": self.all_ok,
            "checks": [
                {
                    "lhs": c.lhs_key, "rhs": c.rhs_key, "a": str(c.a),
                    "a_prime": str(c.a_prime), "j": c.j,
                    "lhs_value": c.lhs, "rhs_value": c.rhs, "ok": c.ok,
                }
                for c in self.checks
            ],
            "adjusted_individual_reversals": [
                {"a": str(a), "a_prime": str(ap), "j": j}
                for (a, ap, j) in self.adjusted_individual_reversals
            ],
        }


def efficiency_inequalities(
    po: PotentialOutcomeTable,
    scheme: WeightScheme,
    design: DesignSpec,
    rel_tol: float = 1e-9,
) -> EfficiencyReport:
    """Evaluate the six printed variance orderings on a fixed table.

    Diagonals of V(r)(a, a') are computed from each estimator's theorem
    residual series; orderings must hold up to a relative slack of
    ``rel_tol``. Requires at least one individual covariate and one
    cluster-period covariate.
    """
    if po.x.shape[1] == 0 or po.c.shape[2] == 0:
        raise DataError("efficiency report needs x and c covariates")
    agg = table_aggregates(po, scheme)
    xt_sel = tuple(f"xtilde:{name}" for name in po.x_names)
    pic_sel = tuple(f"pi*c:{name}" for name in po.c_names)

    series = {
        "ind": epsilon_tilde(agg, po.n_clusters),
        "ind_adj": residual_series_individual_adjusted(po, agg),
        "avg_adj": residual_series_average_adjusted(po, agg),
        "tot_adj[pi]": residual_series_total_adjusted(po, agg, ("pi",)),
        "tot_adj[pi,xtilde]": residual_series_total_adjusted(po, agg, ("pi",) + xt_sel),
        "tot_adj[pi,pic]": residual_series_total_adjusted(po, agg, ("pi",) + pic_sel),
    }
    series["avg"] = series["ind"]  # identical residual series

    values: dict = {}
    checks: list[InequalityCheck] = []
    reversals: list = []
    for a, ap in ordered_pairs(po.n_periods):
        diag = {
            key: np.diag(finite_pop_variance(s, design, a, ap).v)
            for key, s in series.items()
        }
        for j in range(1, po.n_periods + 1):
            values[(a, ap, j)] = {key: float(d[j - 1]) for key, d in diag.items()}
            row = values[(a, ap, j)]
            for lhs_key, rhs_key in _CHAIN_LABELS:
                lhs, rhs = row[lhs_key], row[rhs_key]
                scale = max(abs(lhs), abs(rhs), 1e-300)
                checks.append(
                    InequalityCheck(
                        lhs_key=lhs_key, rhs_key=rhs_key, a=a, a_prime=ap, j=j,
                        lhs=lhs, rhs=rhs, ok=(rhs - lhs) >= -rel_tol * scale,
                    )
                )
            if row["ind_adj"] > row["ind"]:
                reversals.append((a, ap, j))
    return EfficiencyReport(
        values=values, checks=tuple(checks),
        adjusted_individual_reversals=tuple(reversals),
    )
