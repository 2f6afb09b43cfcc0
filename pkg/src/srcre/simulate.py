"""Monte Carlo harness for the two benchmark data-generating processes.

Study 1 draws potential outcomes whose means load on cluster-period size and
on polynomial transforms of an individual covariate; study 2 keeps the size
signal but makes the covariate pure noise. Each replication draws a fresh
table, randomizes, reveals, fits the estimator roster, and records estimates
with sandwich standard errors against that replication's own true estimands.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .data import AdoptionTime, WeightScheme, cell_mean, derive_weights, ordered_pairs, pi_system, record_weights
from .design import DesignSpec, rng_from_seed, sample_assignment, seed_sequence
from .errors import ConfigError, SrcreError
from .estimands import SummarySpec, build_b, estimate_summary
from .estimators import Adjustment, EstimatorSpec, Level, fit
from .oracle import PotentialOutcomeTable, true_dwate
from .variance import sandwich, wald_ci


def allocate_arms(n_clusters: int, fractions: Sequence[float]) -> tuple[int, ...]:
    """Integer arm sizes by the largest-remainder rule; ties go to earlier arms."""
    fractions = np.asarray(fractions, dtype=float)
    if fractions.ndim != 1 or np.any(fractions <= 0):
        raise ConfigError("arm fractions must be positive")
    fractions = fractions / fractions.sum()
    raw = fractions * n_clusters
    sizes = np.floor(raw).astype(int)
    shortfall = n_clusters - sizes.sum()
    remainders = raw - sizes
    order = np.lexsort((np.arange(len(sizes)), -remainders))
    for k in order[:shortfall]:
        sizes[k] += 1
    if np.any(sizes < 1):
        raise ConfigError("allocation left an arm empty; increase the cluster count")
    return tuple(int(s) for s in sizes)


def study1_roster() -> tuple[EstimatorSpec, ...]:
    """The nine-estimator comparison set for the informative-covariate study."""
    return (
        EstimatorSpec(Level.INDIVIDUAL, name="ind"),
        EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ("x:x",), name="ind_adj"),
        EstimatorSpec(Level.INDIVIDUAL, Adjustment.FULLY_INTERACTED, ("xbar:x",), name="ind_adj_c"),
        EstimatorSpec(Level.INDIVIDUAL, Adjustment.ANCOVA, ("x:x",), name="ind_ancova"),
        EstimatorSpec(Level.AVERAGE, name="avg"),
        EstimatorSpec(Level.AVERAGE, Adjustment.FULLY_INTERACTED, ("xbar:x",), name="avg_adj"),
        EstimatorSpec(Level.TOTAL, name="tot"),
        EstimatorSpec(Level.TOTAL, Adjustment.FULLY_INTERACTED, ("pi",), name="tot_adj_pi"),
        EstimatorSpec(
            Level.TOTAL, Adjustment.FULLY_INTERACTED, ("pi", "xtilde:x"),
            name="tot_adj_pi_pic",
        ),
    )


def study2_roster() -> tuple[EstimatorSpec, ...]:
    """Seven estimators: the two duplicates of the equivalence pairs are dropped."""
    keep = {"ind", "ind_adj", "ind_ancova", "avg_adj", "tot", "tot_adj_pi", "tot_adj_pi_pic"}
    return tuple(s for s in study1_roster() if s.name in keep)


@dataclass(frozen=True)
class SimConfig:
    """Configuration of a simulation run.

    ``arm_fractions`` defaults to equal thirds; integer sizes come from the
    largest-remainder rule. ``cluster_period_noise_var`` is the variance of
    the shared cluster-period effect. With ``redraw_outcomes`` (the default)
    each replication generates a fresh potential-outcome table; set it False
    to fix the table from sub-seed 0 and vary only the randomization.
    """

    study: str = "study1"
    n_clusters: int = 260
    n_periods: int = 2
    arm_fractions: Optional[tuple[float, ...]] = None
    replications: int = 1000
    master_seed: int = 0
    size_base: float = 5200.0
    size_jitter: tuple[float, float] = (0.6, 1.4)
    min_cluster_period_size: int = 2
    outcome_noise_sd: float = 1.0
    cluster_period_noise_var: float = 0.2
    weighting: WeightScheme = field(default_factory=WeightScheme.uniform)
    estimators: Optional[tuple[EstimatorSpec, ...]] = None
    summaries: tuple[SummarySpec, ...] = (SummarySpec.owte_sim(),)
    ci_level: float = 0.95
    redraw_outcomes: bool = True
    check_equivalences: bool = True

    def __post_init__(self):
        if self.study not in ("study1", "study2"):
            raise ConfigError(f"unknown study {self.study!r}")
        if self.n_periods != 2:
            raise ConfigError("the benchmark generating processes use 2 periods")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n_clusters < 3 * (self.n_periods + 1):
            raise ConfigError("too few clusters for the arm count")

    @property
    def fractions(self) -> tuple[float, ...]:
        if self.arm_fractions is not None:
            return self.arm_fractions
        return tuple([1.0 / (self.n_periods + 1)] * (self.n_periods + 1))

    def design(self) -> DesignSpec:
        return DesignSpec(self.n_periods, allocate_arms(self.n_clusters, self.fractions))

    def roster(self) -> tuple[EstimatorSpec, ...]:
        if self.estimators is not None:
            return self.estimators
        return study1_roster() if self.study == "study1" else study2_roster()


def _draw_table(cfg: SimConfig, seed, informative: bool) -> PotentialOutcomeTable:
    rng = rng_from_seed(seed)
    n_clusters, n_periods = cfg.n_clusters, cfg.n_periods

    lo = np.array([cfg.size_base / ((j + 1) * n_clusters) * cfg.size_jitter[0]
                   for j in range(n_periods)])
    hi = np.array([cfg.size_base / ((j + 1) * n_clusters) * cfg.size_jitter[1]
                   for j in range(n_periods)])
    sizes = np.rint(rng.uniform(lo[None, :], hi[None, :], size=(n_clusters, n_periods)))
    sizes = np.maximum(sizes, cfg.min_cluster_period_size).astype(int)

    cell_cluster = np.repeat(np.arange(n_clusters, dtype=np.intp), n_periods)
    cell_period = np.tile(np.arange(n_periods, dtype=np.intp), n_clusters)
    counts = sizes.reshape(-1)
    cluster_index = np.repeat(cell_cluster, counts)
    period_index = np.repeat(cell_period, counts)
    n = int(counts.sum())

    mean_shift = (cluster_index + 1) * (period_index + 1) / n_clusters
    x = mean_shift + rng.uniform(-1.0, 1.0, size=n)
    zeta = rng.normal(0.0, math.sqrt(cfg.cluster_period_noise_var),
                      size=(n_clusters, n_periods))

    w = record_weights(cfg.weighting, sizes, cluster_index, period_index, np.ones(n))
    ps = pi_system(w, n_clusters, n_periods, cluster_index, period_index)

    def center(values):
        bar = cell_mean(values, w, ps.w_cluster_period, cluster_index, period_index)
        period_mean = np.einsum("ij,ij->j", ps.pi_cluster_period, bar)
        return values - period_mean[period_index]

    xc = center(x)
    # |xc| below 1e-12 would blow up log|xc|; redraw those records.
    for _ in range(100):
        mask = np.abs(xc) < 1e-12
        if not mask.any():
            break
        x[mask] = mean_shift[mask] + rng.uniform(-1.0, 1.0, size=int(mask.sum()))
        xc = center(x)

    n_period = np.bincount(period_index, minlength=n_periods).astype(float)
    rec_size = sizes[cluster_index, period_index].astype(float)
    rec_nj = n_period[period_index]
    rec_zeta = zeta[cluster_index, period_index]
    rec_i = (cluster_index + 1).astype(float)

    if informative:
        f1 = 2.0 * rec_size * n_clusters / rec_nj + xc**3 + rec_zeta
        f2 = np.sqrt(rec_size) * n_clusters / rec_nj * xc**4 + np.log(np.abs(xc)) + rec_zeta
        f_inf = rec_i / n_clusters + xc**2 + rec_zeta
    else:
        f1 = 2.0 * rec_size * n_clusters / rec_nj + rec_zeta
        f2 = np.sqrt(rec_size) * n_clusters / rec_nj + rec_zeta
        f_inf = rec_i / n_clusters + rec_zeta

    y_pot = np.empty((n, n_periods + 1))
    for k, f in enumerate((f1, f2, f_inf)):
        y_pot[:, k] = f + rng.normal(0.0, cfg.outcome_noise_sd, size=n)

    return PotentialOutcomeTable.from_arrays(
        n_periods=n_periods,
        cluster_ids=tuple(f"c{i + 1}" for i in range(n_clusters)),
        cluster_index=cluster_index,
        period_index=period_index,
        y_pot=y_pot,
        x=x[:, None],
        c=None,
        x_names=("x",),
    )


def dgp_study1(cfg: SimConfig, seed) -> PotentialOutcomeTable:
    """Informative-covariate table: outcome means load on size and on x."""
    return _draw_table(cfg, seed, informative=True)


def dgp_study2(cfg: SimConfig, seed) -> PotentialOutcomeTable:
    """Uninformative-covariate table: x is generated but never enters the means."""
    return _draw_table(cfg, seed, informative=False)


def _tau_label(a: AdoptionTime, ap: AdoptionTime, j: int) -> str:
    return f"tau_{j}({a},{ap})"


def _equivalence_partners(roster: Sequence[EstimatorSpec]):
    """Index pairs whose estimates must agree identically in every replication."""
    pairs = []
    by_key = {}
    for k, spec in enumerate(roster):
        by_key[(spec.level, spec.adjustment, spec.covariates)] = k
    unadj_i = by_key.get((Level.INDIVIDUAL, Adjustment.NONE, ()))
    unadj_a = by_key.get((Level.AVERAGE, Adjustment.NONE, ()))
    if unadj_i is not None and unadj_a is not None:
        pairs.append((unadj_i, unadj_a))
    for (level, adj, cov), k in by_key.items():
        if level is Level.INDIVIDUAL and adj is Adjustment.FULLY_INTERACTED:
            if all(sel.split(":")[0] in ("c", "xbar") for sel in cov):
                partner = by_key.get((Level.AVERAGE, Adjustment.FULLY_INTERACTED, cov))
                if partner is not None:
                    pairs.append((k, partner))
    return pairs


def _replicate(cfg: SimConfig, design: DesignSpec, roster, r: int, fixed_table):
    """One replication: draw, randomize, reveal, fit, record."""
    if fixed_table is not None:
        table = fixed_table
    else:
        dgp = dgp_study1 if cfg.study == "study1" else dgp_study2
        table = dgp(cfg, seed_sequence(cfg.master_seed, r, 0))
    assignment = sample_assignment(design, seed_sequence(cfg.master_seed, r, 1))
    dataset = table.reveal(assignment)
    weights = derive_weights(dataset, cfg.weighting)

    truth_map = true_dwate(table, cfg.weighting)
    truth = {
        _tau_label(a, ap, j): truth_map[(a, ap, j)]
        for a, ap in ordered_pairs(cfg.n_periods)
        for j in range(1, cfg.n_periods + 1)
    }
    tau_true_vec = np.array(
        [truth_map[(a, ap, j)]
         for a, ap in ordered_pairs(cfg.n_periods)
         for j in range(1, cfg.n_periods + 1)]
    )
    summary_b = {s.name: build_b(s, weights, design) for s in cfg.summaries}
    for s in cfg.summaries:
        truth[s.name] = float(summary_b[s.name] @ tau_true_vec)

    estimates = {}
    errors = {}
    fits = {}
    for spec in roster:
        try:
            est = fit(dataset, weights, spec)
            cov = sandwich(est, dataset, weights)
        except SrcreError as exc:
            errors[spec.name] = exc.code
            continue
        fits[spec.name] = est
        rec = {}
        for a, ap in ordered_pairs(cfg.n_periods):
            se = cov.se(a, ap)
            for j in range(1, cfg.n_periods + 1):
                rec[_tau_label(a, ap, j)] = (est.tau(a, ap, j), float(se[j - 1]))
        for s in cfg.summaries:
            summ = estimate_summary(est, cov, s, b=summary_b[s.name], ci_level=cfg.ci_level)
            rec[s.name] = (summ.theta, summ.se)
        estimates[spec.name] = rec

    if cfg.check_equivalences:
        for ka, kb in _equivalence_partners(roster):
            na, nb = roster[ka].name, roster[kb].name
            if na in fits and nb in fits:
                ta = fits[na].tau_vector()
                tb = fits[nb].tau_vector()
                scale = np.maximum(1.0, np.abs(ta))
                if np.any(np.abs(ta - tb) > 1e-10 * scale):
                    raise RuntimeError(
                        f"replication {r}: equivalent estimators {na} and {nb} "
                        f"disagree beyond 1e-10"
                    )

    return {"truth": truth, "estimates": estimates, "errors": errors}


@dataclass(frozen=True)
class SimReport:
    """Per-estimator, per-target metrics over the replications.

    ``emp_se`` is the standard deviation of the estimation error
    (estimate minus that replication's true value); bias is relative to the
    mean absolute true value. Coverage counts Wald intervals containing the
    per-replication truth.
    """

    rows: tuple
    config: dict
    arm_sizes: tuple[int, ...]
    error_counts: dict
    notes: tuple[str, ...] = ()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows))

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "arm_sizes": list(self.arm_sizes),
            "error_counts": dict(self.error_counts),
            "notes": list(self.notes),
            "rows": list(self.rows),
        }

    def metric(self, estimator: str, target: str, name: str):
        for row in self.rows:
            if row["estimator"] == estimator and row["target"] == target:
                return row[name]
        raise KeyError(f"no row for ({estimator}, {target})")


def run_replications(cfg: SimConfig, n_processes: int = 1) -> SimReport:
    """Run the configured study and aggregate the metrics.

    Replications use sub-seeds (master, r) and aggregate in replication
    order, so results do not depend on scheduling; ``n_processes`` > 1
    distributes replications across processes.
    """
    design = cfg.design()
    roster = cfg.roster()
    fixed_table = None
    if not cfg.redraw_outcomes:
        dgp = dgp_study1 if cfg.study == "study1" else dgp_study2
        fixed_table = dgp(cfg, seed_sequence(cfg.master_seed, 0, 0))

    indices = range(1, cfg.replications + 1)
    if n_processes > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n_processes) as pool:
            results = list(
                pool.map(
                    _replicate_star,
                    [(cfg, design, roster, r, fixed_table) for r in indices],
                    chunksize=max(1, cfg.replications // (8 * n_processes)),
                )
            )
    else:
        results = [_replicate(cfg, design, roster, r, fixed_table) for r in indices]

    targets = list(results[0]["truth"].keys())
    z = wald_ci(0.0, 1.0, cfg.ci_level)[1]
    rows = []
    error_counts: dict = {}
    for spec in roster:
        name = spec.name
        n_errors = sum(1 for res in results if name in res["errors"])
        if n_errors:
            error_counts[name] = n_errors
        for target in targets:
            est = np.array(
                [res["estimates"][name][target][0] for res in results if name in res["estimates"]]
            )
            se = np.array(
                [res["estimates"][name][target][1] for res in results if name in res["estimates"]]
            )
            tru = np.array(
                [res["truth"][target] for res in results if name in res["estimates"]]
            )
            err = est - tru
            n_used = est.shape[0]
            bias = float(err.mean()) if n_used else float("nan")
            denom = float(np.abs(tru).mean()) if n_used else float("nan")
            emp_se = float(err.std(ddof=1)) if n_used > 1 else float("nan")
            covered = np.abs(err) <= z * se
            rows.append(
                {
                    "estimator": name,
                    "target": target,
                    "n_used": int(n_used),
                    "n_errors": int(n_errors),
                    "bias": bias,
                    "rel_bias": bias / denom if denom else float("nan"),
                    "emp_se": emp_se,
                    "emp_se_mc_error": emp_se / math.sqrt(2.0 * (n_used - 1))
                    if n_used > 1
                    else float("nan"),
                    "mean_se": float(se.mean()) if n_used else float("nan"),
                    "coverage": float(covered.mean()) if n_used else float("nan"),
                }
            )

    notes = (
        f"arm allocation (largest remainder): {design.sizes}",
        "emp_se is the SD of (estimate - per-replication true value)",
        "cluster-period noise variance interpreted as a variance "
        f"(sd={math.sqrt(cfg.cluster_period_noise_var):.6f})",
    )
    config_echo = {
        "study": cfg.study,
        "n_clusters": cfg.n_clusters,
        "n_periods": cfg.n_periods,
        "replications": cfg.replications,
        "master_seed": cfg.master_seed,
        "weighting": cfg.weighting.kind.value,
        "ci_level": cfg.ci_level,
        "redraw_outcomes": cfg.redraw_outcomes,
        "estimators": [s.name for s in roster],
        "summaries": [s.name for s in cfg.summaries],
    }
    return SimReport(
        rows=tuple(rows),
        config=config_echo,
        arm_sizes=design.sizes,
        error_counts=error_counts,
        notes=notes,
    )


def _replicate_star(args):
    return _replicate(*args)
