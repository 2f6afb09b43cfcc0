"""Sandwich covariance estimators and contrast machinery.

Individual-level fits get the cluster-robust (CR) sandwich, cluster-level
fits the heteroskedasticity-consistent (HC) one; both run through the same
code path with per-cluster design blocks D_i, weight diagonals Pi_i, and
residuals. Adjusted fits extract the leading J(J+1) block of the sandwich
before contrasting. No small-sample degrees-of-freedom correction is applied
unless explicitly requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.stats

from . import _linalg
from .data import (
    AdoptionTime,
    Dataset,
    DerivedWeights,
    adoption_times,
    arm_index,
    ordered_pairs,
)
from .errors import (
    DimensionMismatch,
    InsufficientClusters,
    InvalidPair,
    ShapeMismatch,
    SingularBread,
)
from .estimators import (
    Adjustment,
    DwateEstimate,
    EstimatorSpec,
    Level,
    Rows,
    beta_column,
    build_rows,
    covariate_column,
    design_width,
)


# ---------------------------------------------------------------------------
# Contrast matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContrastMatrix:
    """Q(a, a'): J x J(J+1) selector with +I at block a and -I at block a'."""

    n_periods: int
    a: AdoptionTime
    a_prime: AdoptionTime
    matrix: np.ndarray


def contrast_Q(n_periods: int, a: AdoptionTime, a_prime: AdoptionTime) -> ContrastMatrix:
    """Build the contrast selector for one adoption-time pair."""
    if a == a_prime:
        raise InvalidPair(f"contrast needs two distinct adoption times, got {a}")
    ia = arm_index(a, n_periods)
    ib = arm_index(a_prime, n_periods)
    q = np.zeros((n_periods, n_periods * (n_periods + 1)))
    eye = np.eye(n_periods)
    q[:, ia * n_periods : (ia + 1) * n_periods] = eye
    q[:, ib * n_periods : (ib + 1) * n_periods] = -eye
    q.setflags(write=False)
    return ContrastMatrix(n_periods=n_periods, a=a, a_prime=a_prime, matrix=q)


def stacked_Q(n_periods: int) -> np.ndarray:
    """All pairwise contrasts stacked in the canonical pair order."""
    blocks = [
        contrast_Q(n_periods, a, ap).matrix for a, ap in ordered_pairs(n_periods)
    ]
    return np.vstack(blocks)


def stacked_length(n_periods: int) -> int:
    return n_periods * len(ordered_pairs(n_periods))


# ---------------------------------------------------------------------------
# Sandwich assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichParts:
    """Bread, meat, and per-cluster score vectors of a sandwich covariance."""

    bread: np.ndarray   # (P, P) inverse of the weighted Gram matrix
    meat: np.ndarray    # (P, P) sum of score outer products
    scores: np.ndarray  # (I, P) u_i = D_i' Pi_i e_i


def _bread_inverse(rows: Rows, spec: EstimatorSpec, width: int) -> np.ndarray:
    """Block-wise inverse of the Gram matrix; blocks follow the indicator structure."""
    n_periods, n_arms = rows.n_periods, rows.n_arms
    p = rows.z.shape[1]
    bread = np.zeros((width, width))
    if spec.adjustment is Adjustment.ANCOVA:
        for j in range(n_periods):
            mask = rows.period == j
            dummies = np.zeros((int(mask.sum()), n_arms))
            dummies[np.arange(dummies.shape[0]), rows.arm[mask]] = 1.0
            block_design = np.column_stack([dummies, rows.z[mask]])
            gram = (block_design * rows.pi[mask][:, None]).T @ block_design
            cols = [beta_column(arm, j, n_periods) for arm in range(n_arms)]
            cols += [
                covariate_column(spec.adjustment, 0, j, l, n_periods, n_arms, p)
                for l in range(p)
            ]
            try:
                inv = _linalg.inverse_via_qr(gram)
            except _linalg.SingularSystem:
                raise SingularBread(
                    f"sandwich bread singular in period {j + 1}", period=j + 1
                ) from None
            bread[np.ix_(cols, cols)] = inv
        return bread

    cell = rows.arm * n_periods + rows.period
    for arm in range(n_arms):
        for j in range(n_periods):
            mask = cell == arm * n_periods + j
            block_design = np.column_stack(
                [np.ones(int(mask.sum())), rows.z[mask]]
            )
            gram = (block_design * rows.pi[mask][:, None]).T @ block_design
            cols = [beta_column(arm, j, n_periods)]
            if spec.adjustment is Adjustment.FULLY_INTERACTED:
                cols += [
                    covariate_column(spec.adjustment, arm, j, l, n_periods, n_arms, p)
                    for l in range(p)
                ]
            try:
                inv = _linalg.inverse_via_qr(gram)
            except _linalg.SingularSystem:
                raise SingularBread(
                    f"sandwich bread singular in period {j + 1}, arm index {arm}",
                    period=j + 1,
                    arm=arm,
                ) from None
            bread[np.ix_(cols, cols)] = inv
    return bread


def _cluster_scores(rows: Rows, spec: EstimatorSpec, residuals: np.ndarray, width: int) -> np.ndarray:
    """Per-cluster score vectors u_i accumulated column by column.

    Forming u_i directly (never the residual outer product) keeps memory at
    O(P) per cluster and is algebraically identical to D_i' Pi_i e_i e_i' Pi_i D_i
    summation once the outer products of the u_i are taken.
    """
    n_periods, n_arms = rows.n_periods, rows.n_arms
    p = rows.z.shape[1]
    n_clusters = rows.n_clusters
    val = rows.pi * residuals
    flat = np.zeros(n_clusters * width)
    cols = beta_column(rows.arm, rows.period, n_periods)
    flat += np.bincount(rows.cluster * width + cols, weights=val,
                        minlength=n_clusters * width)
    if spec.adjustment is not Adjustment.NONE:
        arm_for_col = rows.arm if spec.adjustment is Adjustment.FULLY_INTERACTED else 0
        for l in range(p):
            cols = covariate_column(
                spec.adjustment, arm_for_col, rows.period, l, n_periods, n_arms, p
            )
            flat += np.bincount(
                rows.cluster * width + cols,
                weights=val * rows.z[:, l],
                minlength=n_clusters * width,
            )
    return flat.reshape(n_clusters, width)


def sandwich_parts(
    estimate: DwateEstimate, dataset: Dataset, weights: DerivedWeights
) -> SandwichParts:
    """Assemble bread, meat, and scores for a fitted estimate."""
    rows = build_rows(dataset, weights, estimate.spec)
    if rows.y.shape[0] != estimate.residuals.shape[0]:
        raise ShapeMismatch(
            "fit residuals do not align with the dataset's rows at this level"
        )
    width = design_width(estimate.spec, rows.n_periods, rows.z.shape[1])
    bread = _bread_inverse(rows, estimate.spec, width)
    scores = _cluster_scores(rows, estimate.spec, estimate.residuals, width)
    meat = scores.T @ scores
    return SandwichParts(bread=bread, meat=meat, scores=scores)


@dataclass(frozen=True)
class DwateCovariance:
    """Estimated covariance of the contrast vector for every adoption pair.

    ``e_beta`` is the leading J(J+1) block of the full sandwich; pairwise
    J x J covariances and marginal standard errors are read off it through
    the contrast selectors. ``kind`` records CR vs HC provenance.
    """

    n_periods: int
    kind: str
    spec: EstimatorSpec
    e_beta: np.ndarray
    df_corrected: bool = False

    @property
    def arms(self) -> tuple[AdoptionTime, ...]:
        return adoption_times(self.n_periods)

    def _block(self, ia: int, ib: int) -> np.ndarray:
        J = self.n_periods
        return self.e_beta[ia * J : (ia + 1) * J, ib * J : (ib + 1) * J]

    def cov(self, a: AdoptionTime, a_prime: AdoptionTime) -> np.ndarray:
        """Q(a, a') E Q(a, a')' without materializing Q."""
        if a == a_prime:
            raise InvalidPair("covariance needs two distinct adoption times")
        ia = arm_index(a, self.n_periods)
        ib = arm_index(a_prime, self.n_periods)
        out = (
            self._block(ia, ia)
            + self._block(ib, ib)
            - self._block(ia, ib)
            - self._block(ib, ia)
        )
        return (out + out.T) / 2.0

    def se(self, a: AdoptionTime, a_prime: AdoptionTime) -> np.ndarray:
        """Marginal standard errors per period; zero-variance cells clamp to 0."""
        return np.sqrt(np.clip(np.diag(self.cov(a, a_prime)), 0.0, None))

    def stacked_cov(self) -> np.ndarray:
        """Covariance of the stacked contrast vector (canonical pair order)."""
        pairs = ordered_pairs(self.n_periods)
        J = self.n_periods
        n = J * len(pairs)
        out = np.zeros((n, n))
        idx = [
            (arm_index(a, J), arm_index(ap, J)) for a, ap in pairs
        ]
        for r, (ia, ib) in enumerate(idx):
            for c, (ka, kb) in enumerate(idx):
                block = (
                    self._block(ia, ka)
                    - self._block(ia, kb)
                    - self._block(ib, ka)
                    + self._block(ib, kb)
                )
                out[r * J : (r + 1) * J, c * J : (c + 1) * J] = block
        return (out + out.T) / 2.0

    def to_json(self) -> dict:
        entries = []
        for a, ap in ordered_pairs(self.n_periods):
            entries.append(
                {
                    "pair": {"a": str(a), "a_prime": str(ap)},
                    "cov": self.cov(a, ap).ravel().tolist(),
                    "se": self.se(a, ap).tolist(),
                }
            )
        return {"kind": self.kind, "df_corrected": self.df_corrected, "pairs": entries}


def sandwich(
    estimate: DwateEstimate,
    dataset: Dataset,
    weights: DerivedWeights,
    df_correction: bool = False,
) -> DwateCovariance:
    """CR/HC sandwich covariance of a fitted DWATE estimate.

    ``df_correction=True`` scales the sandwich by I/(I-1); it is off by
    default and is a finite-sample convenience, not part of the estimator
    definitions.
    """
    sizes = dataset.arm_sizes()
    arms = dataset.arms
    for k, count in enumerate(sizes):
        if count < 2:
            raise InsufficientClusters(
                f"variance estimation needs >= 2 clusters per arm; "
                f"arm {arms[k]} has {count}",
                arm=str(arms[k]),
            )
    parts = sandwich_parts(estimate, dataset, weights)
    full = parts.bread @ parts.meat @ parts.bread
    if df_correction:
        n_clusters = dataset.n_clusters
        full = full * (n_clusters / (n_clusters - 1))
    n_beta = dataset.n_periods * (dataset.n_periods + 1)
    e_beta = full[:n_beta, :n_beta]
    e_beta = (e_beta + e_beta.T) / 2.0
    kind = "CR" if estimate.spec.level is Level.INDIVIDUAL else "HC"
    return DwateCovariance(
        n_periods=dataset.n_periods,
        kind=kind,
        spec=estimate.spec,
        e_beta=e_beta,
        df_corrected=df_correction,
    )


# ---------------------------------------------------------------------------
# Summary-level inference
# ---------------------------------------------------------------------------

def summary_se(covariance: DwateCovariance, b: np.ndarray) -> float:
    """sqrt(b' Cov b) for a contrast-weight vector in stacked pair order."""
    b = np.asarray(b, dtype=float)
    expected = stacked_length(covariance.n_periods)
    if b.shape != (expected,):
        raise DimensionMismatch(
            f"contrast weights have length {b.shape}, expected ({expected},)"
        )
    value = float(b @ covariance.stacked_cov() @ b)
    return float(np.sqrt(max(value, 0.0)))


def wald_ci(point: float, se: float, level: float = 0.95) -> tuple[float, float]:
    """Normal-quantile confidence interval point +/- z * se."""
    if se < 0:
        raise DimensionMismatch("standard error must be non-negative")
    if not 0.0 < level < 1.0:
        raise DimensionMismatch("confidence level must be in (0, 1)")
    z = float(scipy.stats.norm.ppf((1.0 + level) / 2.0))
    return (point - z * se, point + z * se)
