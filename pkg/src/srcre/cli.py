"""Command-line front end: estimate on data, run simulations, verify.

Configuration is a single JSON file per subcommand; unknown keys are
rejected. Errors are emitted as one JSON object {code, message, context} on
stderr with exit code 2 (validation), 3 (singular/degenerate fits), or 4
(verification failure). Outputs are byte-identical across runs for identical
config and seeds; CSV numbers carry 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .data import ColumnSchema, WeightScheme, derive_weights, load_dataset, ordered_pairs
from .design import DesignSpec
from .errors import (
    ConfigError,
    FitError,
    InsufficientClusters,
    SingularOracleFit,
    SrcreError,
    VarianceError,
)
from .estimands import SummarySpec, classify_pair, estimate_summary
from .estimators import EstimatorSpec, fit
from .oracle import (
    efficiency_inequalities,
    epsilon_tilde,
    exhaustive_moments,
    finite_pop_variance,
    random_table,
    sampled_moments,
    table_aggregates,
    true_dwate,
    true_dwate_paths,
)
from .simulate import SimConfig, run_replications
from .variance import sandwich, wald_ci

_EXIT_VALIDATION = 2
_EXIT_SINGULAR = 3
_EXIT_VERIFY = 4

_FMT = "%.17g"


def _fail(payload: dict, code: int) -> int:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def _error_exit(exc: SrcreError) -> int:
    singular = isinstance(exc, (FitError, VarianceError, SingularOracleFit))
    return _fail(exc.to_payload(), _EXIT_SINGULAR if singular else _EXIT_VALIDATION)


def _check_keys(payload: dict, allowed: set, where: str) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a JSON object")
    return payload


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("SRCRE_THREADS")
    return max(1, int(env)) if env else 1


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

_SCHEMA_KEYS = {
    "cluster_id", "period", "adoption_time", "outcome", "weight",
    "x_prefix", "c_prefix", "x_columns", "c_columns", "period_map",
}


def _parse_schema(payload: dict) -> ColumnSchema:
    _check_keys(payload, _SCHEMA_KEYS, "data.schema")
    kwargs = dict(payload)
    for key in ("x_columns", "c_columns"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(kwargs[key])
    return ColumnSchema(**kwargs)


def cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(
        cfg, {"data", "weights", "estimators", "summaries", "ci_level", "design"},
        "estimate config",
    )
    data_cfg = cfg.get("data")
    if not isinstance(data_cfg, dict):
        raise ConfigError("estimate config needs a 'data' object")
    _check_keys(data_cfg, {"path", "covariates_path", "schema"}, "data")
    schema = _parse_schema(data_cfg.get("schema", {}))
    dataset = load_dataset(
        data_cfg.get("path"), schema=schema,
        covariates_path=data_cfg.get("covariates_path"),
    )
    scheme = WeightScheme.parse(cfg.get("weights", "uniform"))
    weights = derive_weights(dataset, scheme)
    ci_level = float(cfg.get("ci_level", 0.95))

    specs = [EstimatorSpec.from_json(e) for e in cfg.get("estimators", [])]
    if not specs:
        raise ConfigError("estimate config lists no estimators")
    summaries = [SummarySpec.from_json(s) for s in cfg.get("summaries", [])]

    if "design" in cfg:
        _check_keys(cfg["design"], {"arm_sizes"}, "design")
        design = DesignSpec.from_mapping(dataset.n_periods, cfg["design"]["arm_sizes"])
    else:
        design = DesignSpec(dataset.n_periods, tuple(int(s) for s in dataset.arm_sizes()))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    dwate_rows = []
    summary_rows = []
    for spec in specs:
        estimate = fit(dataset, weights, spec)
        try:
            covariance = sandwich(
                estimate, dataset, weights, df_correction=args.df_correction
            )
        except InsufficientClusters as exc:
            # point estimates stay valid; uncertainty columns become NaN
            print(f"warning: {spec.name}: {exc.message}; writing NaN standard errors")
            covariance = None
        for a, ap in ordered_pairs(dataset.n_periods):
            se = covariance.se(a, ap) if covariance is not None else None
            for j in range(1, dataset.n_periods + 1):
                tau = estimate.tau(a, ap, j)
                if se is None:
                    se_j, lo, hi = float("nan"), float("nan"), float("nan")
                else:
                    se_j = float(se[j - 1])
                    lo, hi = wald_ci(tau, se_j, ci_level)
                dwate_rows.append(
                    {
                        "estimator": spec.name,
                        "j": j,
                        "a": str(a),
                        "a_prime": str(ap),
                        "class": classify_pair(j, a, ap).kind.value,
                        "tau_hat": tau,
                        "se": se_j,
                        "ci_lo": lo,
                        "ci_hi": hi,
                    }
                )
        for summary in summaries:
            if covariance is None:
                continue
            result = estimate_summary(
                estimate, covariance, summary,
                weights=weights, design=design, ci_level=ci_level,
            )
            summary_rows.append({"estimator": spec.name, **result.to_json()})

    pd.DataFrame(dwate_rows).to_csv(out / "dwate.csv", index=False, float_format=_FMT)
    if summary_rows:
        pd.DataFrame(summary_rows).to_csv(
            out / "summary.csv", index=False, float_format=_FMT
        )
    print(f"wrote {out / 'dwate.csv'}" + (" and summary.csv" if summary_rows else ""))
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_SIM_KEYS = {
    "study", "n_clusters", "n_periods", "arm_fractions", "replications",
    "master_seed", "size_base", "size_jitter", "min_cluster_period_size",
    "outcome_noise_sd", "cluster_period_noise_var", "weighting", "estimators",
    "summaries", "ci_level", "redraw_outcomes",
}


def _parse_sim_config(payload: dict, seed_override) -> SimConfig:
    _check_keys(payload, _SIM_KEYS, "simulate config")
    kwargs = dict(payload)
    if "weighting" in kwargs:
        kwargs["weighting"] = WeightScheme.parse(kwargs["weighting"])
    if kwargs.get("estimators") is not None:
        kwargs["estimators"] = tuple(
            EstimatorSpec.from_json(e) for e in kwargs["estimators"]
        )
    if kwargs.get("summaries") is not None:
        kwargs["summaries"] = tuple(SummarySpec.from_json(s) for s in kwargs["summaries"])
    for key in ("arm_fractions", "size_jitter"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(kwargs[key])
    if seed_override is not None:
        kwargs["master_seed"] = int(seed_override)
    try:
        return SimConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad simulate config: {exc}") from None


def cmd_simulate(args) -> int:
    cfg = _parse_sim_config(_load_config(args.config), args.seed)
    report = run_replications(cfg, n_processes=_threads(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "report.csv")
    with open(out / "report.json", "w", encoding="utf-8") as handle:
        json.dump(report.to_json(), handle, indent=2, sort_keys=True)
    if report.error_counts:
        print(f"fit errors: {report.error_counts}")
    print(f"wrote {out / 'report.csv'} ({len(report.rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

_VERIFY_KEYS = {
    "suites", "seed", "tables", "n_clusters", "n_periods",
    "enumeration_cap", "self_test", "mc_samples",
}
_ALL_SUITES = ("reexpression", "psd", "unbiasedness", "inequalities")


def _verify_reexpression(seed, tables, n_clusters, n_periods) -> dict:
    worst = 0.0
    for t in range(tables):
        po = random_table((seed, t), n_clusters=n_clusters, n_periods=n_periods)
        paths = true_dwate_paths(po, WeightScheme.uniform())
        for key, base in paths["individual"].items():
            scale = max(1.0, abs(base))
            for other in ("average", "total"):
                worst = max(worst, abs(paths[other][key] - base) / scale)
    return {"max_discrepancy": worst, "ok": worst <= 1e-12}


def _verify_psd(seed, tables, n_clusters, n_periods, corrupt=False) -> dict:
    worst = float("inf")
    scheme = WeightScheme.uniform()
    for t in range(tables):
        po = random_table((seed, 1000 + t), n_clusters=n_clusters, n_periods=n_periods)
        agg = table_aggregates(po, scheme)
        series = epsilon_tilde(agg, po.n_clusters)
        per_arm = max(po.n_clusters // (n_periods + 1), 1)
        design = DesignSpec(
            n_periods,
            tuple([po.n_clusters - per_arm * n_periods] + [per_arm] * n_periods),
        )
        for a, ap in ordered_pairs(n_periods):
            fp = finite_pop_variance(series, design, a, ap)
            gap = fp.v_c - fp.v
            if corrupt:
                gap = gap.copy()
                gap[0, 0] = -abs(gap[0, 0]) - 1.0
            trace = max(np.trace(gap), 1e-300)
            margin = float(np.linalg.eigvalsh((gap + gap.T) / 2).min() / trace)
            worst = min(worst, margin)
    return {"min_eigenvalue_over_trace": worst, "ok": worst >= -1e-10}


def _verify_unbiasedness(seed, cap, mc_samples) -> dict:
    po = random_table((seed, 77), n_clusters=6, n_periods=2, max_cell=4)
    design = DesignSpec(2, (2, 2, 2))
    spec = EstimatorSpec.from_json({"level": "total", "adjustment": "none"})
    scheme = WeightScheme.uniform()
    truth = true_dwate(po, scheme)
    fallback = design.support_size() > cap
    if fallback:
        print("verify: enumeration cap exceeded, falling back to Monte Carlo")
        report = sampled_moments(po, design, spec, scheme, n_samples=mc_samples, seed=seed)
    else:
        report = exhaustive_moments(po, design, spec, scheme, cap=cap)
    worst = 0.0
    for key, mean in report.mean_tau.items():
        tol = 1e-10 * max(1.0, abs(truth[key]))
        if report.monte_carlo:
            tol = 4.0 * report.mc_se_tau[key] + 1e-10
        worst = max(worst, abs(mean - truth[key]) - tol)
    return {
        "n_assignments": report.n_assignments,
        "monte_carlo": report.monte_carlo,
        "ok": worst <= 0.0,
    }


def _verify_inequalities(seed, tables, n_clusters, n_periods) -> dict:
    scheme = WeightScheme.uniform()
    failures = 0
    for t in range(tables):
        po = random_table((seed, 2000 + t), n_clusters=n_clusters, n_periods=n_periods)
        per_arm = n_clusters // (n_periods + 1)
        design = DesignSpec(
            n_periods,
            tuple([n_clusters - per_arm * n_periods] + [per_arm] * n_periods),
        )
        report = efficiency_inequalities(po, scheme, design)
        if not report.all_ok:
            failures += 1
    return {"tables": tables, "failures": failures, "ok": failures == 0}


def cmd_verify(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    _check_keys(cfg, _VERIFY_KEYS, "verify config")
    suites = tuple(cfg.get("suites", _ALL_SUITES))
    for s in suites:
        if s not in _ALL_SUITES:
            raise ConfigError(f"unknown verify suite {s!r}")
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    tables = int(cfg.get("tables", 20))
    n_clusters = int(cfg.get("n_clusters", 12))
    n_periods = int(cfg.get("n_periods", 2))
    cap = int(cfg.get("enumeration_cap", 1_000_000))
    mc_samples = int(cfg.get("mc_samples", 20_000))
    self_test = bool(cfg.get("self_test", False) or args.self_test)

    results = {}
    for suite in suites:
        if suite == "reexpression":
            results[suite] = _verify_reexpression(seed, tables, n_clusters, n_periods)
        elif suite == "psd":
            results[suite] = _verify_psd(
                seed, tables, n_clusters, n_periods, corrupt=self_test
            )
        elif suite == "unbiasedness":
            results[suite] = _verify_unbiasedness(seed, cap, mc_samples)
        else:
            results[suite] = _verify_inequalities(seed, tables, n_clusters, n_periods)
        print(f"{'PASS' if results[suite]['ok'] else 'FAIL'} {suite}: {results[suite]}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "oracle_report.json", "w", encoding="utf-8") as handle:
        json.dump(results, handle, indent=2, sort_keys=True, default=float)

    failing = [s for s in suites if not results[s]["ok"]]
    if failing:
        return _fail(
            {"code": "VerificationFailed", "message": f"first failing check: {failing[0]}",
             "context": {"failing": failing}},
            _EXIT_VERIFY,
        )
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srcre",
        description="Design-based estimation for staggered rollout cluster "
        "randomized experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument(
        "--threads", type=int, default=None,
        help="worker processes (fallback: SRCRE_THREADS)",
    )

    p_est = sub.add_parser("estimate", parents=[common], help="estimate on a dataset")
    p_est.add_argument("--config", required=True)
    p_est.add_argument(
        "--df-correction", action="store_true",
        help="scale sandwich covariances by I/(I-1); a finite-sample "
        "convenience outside the estimator definitions",
    )
    p_est.set_defaults(func=cmd_estimate)

    p_sim = sub.add_parser("simulate", parents=[common], help="run a simulation study")
    p_sim.add_argument("--config", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", parents=[common], help="run the oracle suites")
    p_ver.add_argument("--config", default=None)
    p_ver.add_argument(
        "--self-test", action="store_true",
        help="corrupt one check deliberately to confirm failures surface",
    )
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SrcreError as exc:
        return _error_exit(exc)


if __name__ == "__main__":
    sys.exit(main())
