"""Point estimators of the dynamic weighted average treatment effects.

Every estimator is a working-model WLS fit of arm-by-period indicators,
optionally with centered covariates: individual-level records weighted by
pi_ijk, cluster-period averages weighted by pi_ij., or scaled cluster-period
totals by OLS. ``fit`` solves the group-wise closed forms (the indicator
structure makes the global Gram matrix block diagonal); ``full_wls_oracle``
solves the literal stacked design matrix in one global WLS and exists purely
to cross-check ``fit``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import _linalg
from .data import (
    AdoptionTime,
    Dataset,
    DerivedWeights,
    WeightScheme,
    adoption_times,
    arm_index,
    derive_weights,
    ordered_pairs,
)
from .errors import (
    EmptyArm,
    InsufficientClusters,
    InvalidEstimatorSpec,
    RankDeficientCovariates,
    ShapeMismatch,
    SingularNormalEquations,
)


class Level(Enum):
    INDIVIDUAL = "individual"
    AVERAGE = "average"
    TOTAL = "total"


class Adjustment(Enum):
    NONE = "none"
    FULLY_INTERACTED = "fully_interacted"
    ANCOVA = "ancova"


# Covariate selectors admissible at each analysis level. "x:NAME" is an
# individual covariate column; "c:NAME" a cluster-period covariate column;
# "xbar:NAME" the cluster-period weighted mean of an x column; "pi" the
# normalized cluster weight of the fitted scheme; "pi*c:NAME" and
# "xtilde:NAME" the constructed scaled-total adjustments. "size_share" is the
# scheme-independent relative size N_ij / N_j (identical to "pi" under
# uniform weights but non-degenerate under inverse-size weights).
_SELECTOR_LEVELS = {
    "x": {Level.INDIVIDUAL},
    "c": {Level.INDIVIDUAL, Level.AVERAGE, Level.TOTAL},
    "xbar": {Level.INDIVIDUAL, Level.AVERAGE, Level.TOTAL},
    "pi": {Level.TOTAL},
    "pi*c": {Level.TOTAL},
    "xtilde": {Level.TOTAL},
    "size_share": {Level.TOTAL},
    "size_share*c": {Level.TOTAL},
}


def _split_selector(selector: str) -> tuple[str, Optional[str]]:
    if selector in ("pi", "size_share"):
        return selector, None
    for prefix in ("x", "c", "xbar", "pi*c", "xtilde", "size_share*c"):
        if selector.startswith(prefix + ":"):
            name = selector[len(prefix) + 1 :]
            if not name:
                raise InvalidEstimatorSpec(f"selector {selector!r} names no column")
            return prefix, name
    raise InvalidEstimatorSpec(f"unknown covariate selector {selector!r}")


@dataclass(frozen=True)
class EstimatorSpec:
    """What to regress: analysis level, adjustment form, and covariates.

    ANCOVA (a single covariate coefficient shared across arms) is only
    supported for the individual level. Scaled-total fits are OLS; the other
    levels use the normalized weights.
    """

    level: Level
    adjustment: Adjustment = Adjustment.NONE
    covariates: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        if self.adjustment is Adjustment.ANCOVA and self.level is not Level.INDIVIDUAL:
            raise InvalidEstimatorSpec(
                "ANCOVA is only supported at the individual level"
            )
        if self.adjustment is Adjustment.NONE and self.covariates:
            raise InvalidEstimatorSpec("unadjusted fits take no covariates")
        if self.adjustment is not Adjustment.NONE and not self.covariates:
            raise InvalidEstimatorSpec("adjusted fits need at least one covariate")
        for sel in self.covariates:
            prefix, _ = _split_selector(sel)
            if self.level not in _SELECTOR_LEVELS[prefix]:
                raise InvalidEstimatorSpec(
                    f"selector {sel!r} is not valid at level {self.level.value}"
                )
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self) -> str:
        base = {"individual": "ind", "average": "avg", "total": "tot"}[self.level.value]
        if self.adjustment is Adjustment.NONE:
            return base
        suffix = "ancova" if self.adjustment is Adjustment.ANCOVA else "adj"
        return f"{base}_{suffix}[{','.join(self.covariates)}]"

    @property
    def n_covariates(self) -> int:
        return len(self.covariates)

    def to_json(self) -> dict:
        return {
            "level": self.level.value,
            "adjustment": self.adjustment.value,
            "covariates": list(self.covariates),
            "name": self.name,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "EstimatorSpec":
        return cls(
            level=Level(payload["level"]),
            adjustment=Adjustment(payload.get("adjustment", "none")),
            covariates=tuple(payload.get("covariates", ())),
            name=payload.get("name", ""),
        )


@dataclass(frozen=True)
class Rows:
    """Regression rows at the spec's level, in canonical order.

    Individual rows are the dataset records; average/total rows are the
    (cluster, period) grid flattened cluster-major. ``z`` is the centered
    covariate matrix, empty for unadjusted fits.
    """

    level: Level
    y: np.ndarray
    pi: np.ndarray
    cluster: np.ndarray
    period: np.ndarray
    arm: np.ndarray
    z: np.ndarray
    n_periods: int
    n_arms: int
    n_clusters: int


def _grid_indices(n_clusters: int, n_periods: int):
    cluster = np.repeat(np.arange(n_clusters, dtype=np.intp), n_periods)
    period = np.tile(np.arange(n_periods, dtype=np.intp), n_clusters)
    return cluster, period


def _covariate_columns(
    dataset: Dataset, weights: DerivedWeights, spec: EstimatorSpec,
    cluster: np.ndarray, period: np.ndarray,
) -> np.ndarray:
    """Centered covariate columns for the given rows."""
    n_rows = cluster.shape[0]
    cols = []
    x_pos = {name: k for k, name in enumerate(dataset.x_names)}
    c_pos = {name: k for k, name in enumerate(dataset.c_names)}
    unweighted = spec.level is Level.TOTAL
    pi_cp = weights.pi_cluster_period
    size_share = dataset.n_ij / weights.n_period[None, :]
    for sel in spec.covariates:
        prefix, name = _split_selector(sel)
        if prefix == "x":
            if name not in x_pos:
                raise InvalidEstimatorSpec(f"unknown individual covariate {name!r}")
            cols.append(weights.xc[:, x_pos[name]])
            continue
        if prefix == "pi":
            grid = pi_cp
        elif prefix == "size_share":
            grid = size_share
        elif prefix in ("c", "pi*c", "size_share*c"):
            if name not in c_pos:
                raise InvalidEstimatorSpec(f"unknown cluster covariate {name!r}")
            grid = dataset.c[:, :, c_pos[name]]
            if prefix == "pi*c":
                grid = pi_cp * grid
            elif prefix == "size_share*c":
                grid = size_share * grid
        elif prefix in ("xbar", "xtilde"):
            if name not in x_pos:
                raise InvalidEstimatorSpec(f"unknown individual covariate {name!r}")
            grid = weights.xbar[:, :, x_pos[name]]
            if prefix == "xtilde":
                grid = dataset.n_clusters * pi_cp * grid
        if unweighted:
            center = grid.mean(axis=0)
        else:
            center = np.einsum("ij,ij->j", pi_cp, grid)
        cols.append((grid - center[None, :])[cluster, period])
    if not cols:
        return np.zeros((n_rows, 0))
    return np.column_stack(cols)


def build_rows(dataset: Dataset, weights: DerivedWeights, spec: EstimatorSpec) -> Rows:
    """Assemble the regression rows for a spec."""
    arm_of_cluster = dataset.arm_codes()
    if spec.level is Level.INDIVIDUAL:
        cluster = dataset.cluster_index
        period = dataset.period_index
        y = dataset.y
        pi = weights.pi
    else:
        cluster, period = _grid_indices(dataset.n_clusters, dataset.n_periods)
        if spec.level is Level.AVERAGE:
            y = weights.ybar.ravel()
            pi = weights.pi_cluster_period.ravel()
        else:
            y = weights.ytilde.ravel()
            pi = np.ones(cluster.shape[0])
    z = _covariate_columns(dataset, weights, spec, cluster, period)
    return Rows(
        level=spec.level,
        y=np.asarray(y, dtype=float),
        pi=np.asarray(pi, dtype=float),
        cluster=cluster,
        period=period,
        arm=arm_of_cluster[cluster],
        z=z,
        n_periods=dataset.n_periods,
        n_arms=dataset.n_periods + 1,
        n_clusters=dataset.n_clusters,
    )


@dataclass(frozen=True)
class DwateEstimate:
    """Fitted coefficients for every (adoption time, period) cell.

    ``beta`` has shape (J+1, J) in arm block order; flattened arm-major it is
    the full J(J+1) coefficient vector. ``gamma`` is (J, J+1, p) for fully
    interacted fits, (J, p) for ANCOVA, None otherwise. Residuals align with
    the canonical row order of the fitted level.
    """

    spec: EstimatorSpec
    scheme: WeightScheme
    n_periods: int
    arm_sizes: tuple[int, ...]
    beta: np.ndarray
    gamma: Optional[np.ndarray]
    residuals: np.ndarray

    @property
    def arms(self) -> tuple[AdoptionTime, ...]:
        return adoption_times(self.n_periods)

    @property
    def beta_vec(self) -> np.ndarray:
        return self.beta.ravel()

    def tau(self, a: AdoptionTime, a_prime: AdoptionTime, j: int) -> float:
        """tau_hat_j(a, a') = beta_hat_j(a) - beta_hat_j(a'); antisymmetric by construction."""
        ia = arm_index(a, self.n_periods)
        ib = arm_index(a_prime, self.n_periods)
        return float(self.beta[ia, j - 1] - self.beta[ib, j - 1])

    def tau_pair(self, a: AdoptionTime, a_prime: AdoptionTime) -> np.ndarray:
        ia = arm_index(a, self.n_periods)
        ib = arm_index(a_prime, self.n_periods)
        return self.beta[ia, :] - self.beta[ib, :]

    def tau_table(self) -> dict[tuple[AdoptionTime, AdoptionTime, int], float]:
        out = {}
        for a, ap in ordered_pairs(self.n_periods):
            for j in range(1, self.n_periods + 1):
                out[(a, ap, j)] = self.tau(a, ap, j)
        return out

    def tau_vector(self) -> np.ndarray:
        """All pairwise contrasts stacked in the canonical pair order."""
        return np.concatenate(
            [self.tau_pair(a, ap) for a, ap in ordered_pairs(self.n_periods)]
        )

    def to_json(self) -> dict:
        pairs = [
            {"a": str(a), "a_prime": str(ap), "j": j, "tau": self.tau(a, ap, j)}
            for a, ap in ordered_pairs(self.n_periods)
            for j in range(1, self.n_periods + 1)
        ]
        return {
            "pairs": pairs,
            "beta": self.beta_vec.tolist(),
            "spec": self.spec.to_json(),
            "weight_scheme": self.scheme.kind.value,
        }


def _check_arms(dataset: Dataset, spec: EstimatorSpec) -> np.ndarray:
    sizes = dataset.arm_sizes()
    arms = dataset.arms
    for k, count in enumerate(sizes):
        if count == 0:
            raise EmptyArm(f"no clusters with adoption time {arms[k]}", arm=str(arms[k]))
    if spec.adjustment is not Adjustment.NONE:
        need = spec.n_covariates + 2
        for k, count in enumerate(sizes):
            if count < need:
                raise InsufficientClusters(
                    f"adjusted fit needs at least {need} clusters per arm; "
                    f"arm {arms[k]} has {count}",
                    arm=str(arms[k]),
                    required=need,
                )
    return sizes


def _cell_wls(rows: Rows, mask: np.ndarray, j: int, arm: int) -> np.ndarray:
    """Per-cell WLS of y on (1, z); returns coefficients (1 + p,)."""
    z = rows.z[mask]
    design = np.column_stack([np.ones(z.shape[0]), z])
    try:
        return _linalg.wls_solve(design, rows.y[mask], rows.pi[mask])
    except _linalg.SingularSystem:
        root = np.sqrt(rows.pi[mask])
        if _linalg.column_rank(z * root[:, None]) < z.shape[1]:
            raise RankDeficientCovariates(
                f"covariates are rank deficient in period {j + 1}, arm index {arm}"
            ) from None
        raise SingularNormalEquations(
            f"singular normal equations in period {j + 1}, arm index {arm}",
            period=j + 1,
            arm=arm,
        ) from None


def fit(dataset: Dataset, weights: DerivedWeights, spec: EstimatorSpec) -> DwateEstimate:
    """Fit a DWATE estimator by group-wise WLS closed forms.

    Unadjusted coefficients are arm-wise weighted outcome means. Fully
    interacted fits solve one small WLS per (period, arm) cell; ANCOVA solves
    one per period with a shared covariate coefficient. Covariate centering
    constants are frozen from ``weights`` (full-sample, per period), never
    recomputed per arm.
    """
    sizes = _check_arms(dataset, spec)
    rows = build_rows(dataset, weights, spec)
    n_periods, n_arms = rows.n_periods, rows.n_arms
    p = rows.z.shape[1]
    beta = np.zeros((n_arms, n_periods))
    gamma = None
    cell = rows.arm * n_periods + rows.period
    n_cells = n_arms * n_periods

    if spec.adjustment is Adjustment.NONE:
        num = np.bincount(cell, weights=rows.pi * rows.y, minlength=n_cells)
        den = np.bincount(cell, weights=rows.pi, minlength=n_cells)
        for k in range(n_cells):
            arm, j = divmod(k, n_periods)
            if den[k] <= 0.0:
                raise SingularNormalEquations(
                    f"zero total weight in period {j + 1}, arm index {arm}",
                    period=j + 1,
                    arm=arm,
                )
        beta = (num / den).reshape(n_arms, n_periods)
        fitted = beta[rows.arm, rows.period]
    elif spec.adjustment is Adjustment.FULLY_INTERACTED:
        gamma = np.zeros((n_periods, n_arms, p))
        fitted = np.zeros_like(rows.y)
        for arm in range(n_arms):
            for j in range(n_periods):
                mask = cell == arm * n_periods + j
                coef = _cell_wls(rows, mask, j, arm)
                beta[arm, j] = coef[0]
                gamma[j, arm, :] = coef[1:]
                fitted[mask] = coef[0] + rows.z[mask] @ coef[1:]
    else:  # ANCOVA: shared covariate coefficient per period
        gamma = np.zeros((n_periods, p))
        fitted = np.zeros_like(rows.y)
        for j in range(n_periods):
            mask = rows.period == j
            dummies = np.zeros((int(mask.sum()), n_arms))
            dummies[np.arange(dummies.shape[0]), rows.arm[mask]] = 1.0
            design = np.column_stack([dummies, rows.z[mask]])
            try:
                coef = _linalg.wls_solve(design, rows.y[mask], rows.pi[mask])
            except _linalg.SingularSystem:
                root = np.sqrt(rows.pi[mask])
                if _linalg.column_rank(rows.z[mask] * root[:, None]) < p:
                    raise RankDeficientCovariates(
                        f"covariates are rank deficient in period {j + 1}"
                    ) from None
                raise SingularNormalEquations(
                    f"singular normal equations in period {j + 1}", period=j + 1
                ) from None
            beta[:, j] = coef[:n_arms]
            gamma[j, :] = coef[n_arms:]
            fitted[mask] = design @ coef

    return DwateEstimate(
        spec=spec,
        scheme=weights.scheme,
        n_periods=n_periods,
        arm_sizes=tuple(int(s) for s in sizes),
        beta=beta,
        gamma=gamma,
        residuals=rows.y - fitted,
    )


# ---------------------------------------------------------------------------
# Global design-matrix layout (shared with the sandwich machinery)
# ---------------------------------------------------------------------------

def beta_column(arm: int, j: int, n_periods: int) -> int:
    """Global column of beta_j(a): arm-major blocks, period-minor within."""
    return arm * n_periods + j


def covariate_column(
    spec_adjustment: Adjustment, arm: int, j: int, l: int, n_periods: int,
    n_arms: int, p: int,
) -> int:
    n_beta = n_periods * n_arms
    if spec_adjustment is Adjustment.FULLY_INTERACTED:
        return n_beta + arm * n_periods * p + j * p + l
    return n_beta + j * p + l


def design_width(spec: EstimatorSpec, n_periods: int, p: int) -> int:
    n_arms = n_periods + 1
    n_beta = n_periods * n_arms
    if spec.adjustment is Adjustment.NONE:
        return n_beta
    if spec.adjustment is Adjustment.FULLY_INTERACTED:
        return n_beta + n_arms * n_periods * p
    return n_beta + n_periods * p


def stacked_design(rows: Rows, spec: EstimatorSpec) -> np.ndarray:
    """The literal row-stacked design matrix of the working regression model."""
    n = rows.y.shape[0]
    p = rows.z.shape[1]
    width = design_width(spec, rows.n_periods, p)
    design = np.zeros((n, width))
    r = np.arange(n)
    design[r, beta_column(rows.arm, rows.period, rows.n_periods)] = 1.0
    if spec.adjustment is Adjustment.FULLY_INTERACTED:
        for l in range(p):
            cols = covariate_column(
                spec.adjustment, rows.arm, rows.period, l,
                rows.n_periods, rows.n_arms, p,
            )
            design[r, cols] = rows.z[:, l]
    elif spec.adjustment is Adjustment.ANCOVA:
        for l in range(p):
            cols = covariate_column(
                spec.adjustment, 0, rows.period, l, rows.n_periods, rows.n_arms, p
            )
            design[r, cols] = rows.z[:, l]
    return design


def full_wls_oracle(
    dataset: Dataset, weights: DerivedWeights, spec: EstimatorSpec
) -> DwateEstimate:
    """Independent verification path: one global WLS on the stacked design.

    Builds the literal design matrix (rows are individuals or cluster-period
    cells, columns the full indicator-by-covariate layout) and solves it in a
    single weighted least squares; agreement with ``fit`` validates the
    block-wise decomposition.
    """
    sizes = _check_arms(dataset, spec)
    rows = build_rows(dataset, weights, spec)
    n_periods, n_arms = rows.n_periods, rows.n_arms
    p = rows.z.shape[1]
    design = stacked_design(rows, spec)
    root = np.sqrt(rows.pi)
    if p and _linalg.column_rank(design[:, n_periods * n_arms :] * root[:, None]) < (
        design.shape[1] - n_periods * n_arms
    ):
        raise RankDeficientCovariates("stacked covariate block is rank deficient")
    try:
        coef = _linalg.wls_solve(design, rows.y, rows.pi)
    except _linalg.SingularSystem:
        raise SingularNormalEquations("global stacked WLS is singular") from None

    beta = coef[: n_periods * n_arms].reshape(n_arms, n_periods)
    gamma = None
    if spec.adjustment is Adjustment.FULLY_INTERACTED:
        gamma = np.zeros((n_periods, n_arms, p))
        for arm in range(n_arms):
            for j in range(n_periods):
                for l in range(p):
                    gamma[j, arm, l] = coef[
                        covariate_column(spec.adjustment, arm, j, l, n_periods, n_arms, p)
                    ]
    elif spec.adjustment is Adjustment.ANCOVA:
        gamma = np.zeros((n_periods, p))
        for j in range(n_periods):
            for l in range(p):
                gamma[j, l] = coef[
                    covariate_column(spec.adjustment, 0, j, l, n_periods, n_arms, p)
                ]

    return DwateEstimate(
        spec=spec,
        scheme=weights.scheme,
        n_periods=n_periods,
        arm_sizes=tuple(int(s) for s in sizes),
        beta=beta,
        gamma=gamma,
        residuals=rows.y - design @ coef,
    )


# ---------------------------------------------------------------------------
# Location-shift diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocationShiftReport:
    """Effect of transforming outcomes Y -> Y + m on the unadjusted fits.

    The individual-level (Hajek) estimator is invariant; the scaled-total
    (Horvitz-Thompson) estimator shifts by m times the arm difference in mean
    I * pi_ij., reported both as observed and in closed form.
    """

    shift: float
    tau_individual: dict
    tau_individual_shifted: dict
    tau_total: dict
    tau_total_shifted: dict
    delta_total_analytic: dict

    @property
    def max_individual_drift(self) -> float:
        return max(
            abs(self.tau_individual_shifted[k] - self.tau_individual[k])
            for k in self.tau_individual
        )

    def delta_total(self) -> dict:
        return {
            k: self.tau_total_shifted[k] - self.tau_total[k] for k in self.tau_total
        }


def location_shift_report(
    dataset: Dataset, weights: DerivedWeights, shift: float
) -> LocationShiftReport:
    """Fit the unadjusted individual and scaled-total estimators on Y and Y + m."""
    spec_i = EstimatorSpec(level=Level.INDIVIDUAL)
    spec_t = EstimatorSpec(level=Level.TOTAL)
    shifted = dataset.with_outcomes(dataset.y + shift)
    weights_shifted = derive_weights(shifted, weights.scheme)

    fit_i = fit(dataset, weights, spec_i)
    fit_i_s = fit(shifted, weights_shifted, spec_i)
    fit_t = fit(dataset, weights, spec_t)
    fit_t_s = fit(shifted, weights_shifted, spec_t)

    arm_codes = dataset.arm_codes()
    ipi = dataset.n_clusters * weights.pi_cluster_period  # (I, J)
    arm_mean = np.zeros((dataset.n_periods + 1, dataset.n_periods))
    for k in range(dataset.n_periods + 1):
        arm_mean[k, :] = ipi[arm_codes == k, :].mean(axis=0)

    analytic = {}
    for a, ap in ordered_pairs(dataset.n_periods):
        ia = arm_index(a, dataset.n_periods)
        ib = arm_index(ap, dataset.n_periods)
        for j in range(1, dataset.n_periods + 1):
            analytic[(a, ap, j)] = shift * (arm_mean[ia, j - 1] - arm_mean[ib, j - 1])

    return LocationShiftReport(
        shift=shift,
        tau_individual=fit_i.tau_table(),
        tau_individual_shifted=fit_i_s.tau_table(),
        tau_total=fit_t.tau_table(),
        tau_total_shifted=fit_t_s.tau_table(),
        delta_total_analytic=analytic,
    )
