"""Long-format data for staggered rollout cluster randomized experiments.

Holds the immutable dataset (individual records, per-cluster adoption times,
cluster-period covariates), the normalized weight system pi derived from a
weight scheme, and the cluster-period aggregates every estimator consumes.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    EmptyClusterPeriod,
    InvalidAdoptionTime,
    InvalidWeight,
    MissingColumn,
    NonContiguousPeriods,
    NonFiniteValue,
    ZeroTotalWeight,
)

_NEVER_TOKENS = {"inf", "infinity", "never", "none"}


@functools.total_ordering
class AdoptionTime:
    """A treatment adoption time: a rollout period in {1..J} or never ("inf").

    Never-treated sorts after every finite period, so the arm order
    1 < 2 < ... < J < inf is total. Instances are immutable and hashable.
    """

    __slots__ = ("_period",)

    def __init__(self, period: Optional[int] = None):
        if period is not None:
            period = int(period)
            if period < 1:
                raise InvalidAdoptionTime(f"adoption period must be >= 1, got {period}")
        object.__setattr__(self, "_period", period)

    def __setattr__(self, name, value):
        raise AttributeError("AdoptionTime is immutable")

    @classmethod
    def never(cls) -> "AdoptionTime":
        return cls(None)

    @classmethod
    def parse(cls, text) -> "AdoptionTime":
        """Parse an integer or one of the never-treated tokens ("inf", "never")."""
        if isinstance(text, AdoptionTime):
            return text
        if isinstance(text, (int, np.integer)):
            return cls(int(text))
        if isinstance(text, float) and not np.isfinite(text):
            return cls.never()
        s = str(text).strip().lower()
        if s in _NEVER_TOKENS:
            return cls.never()
        try:
            return cls(int(float(s)))
        except ValueError:
            raise InvalidAdoptionTime(f"cannot parse adoption time {text!r}") from None

    @property
    def period(self) -> Optional[int]:
        return self._period

    @property
    def is_never(self) -> bool:
        return self._period is None

    def _key(self):
        return (1, 0) if self._period is None else (0, self._period)

    def __eq__(self, other):
        return isinstance(other, AdoptionTime) and self._key() == other._key()

    def __lt__(self, other):
        if not isinstance(other, AdoptionTime):
            return NotImplemented
        return self._key() < other._key()

    def __hash__(self):
        return hash(self._key())

    def __str__(self):
        return "inf" if self._period is None else str(self._period)

    def __repr__(self):
        return f"AdoptionTime({'inf' if self._period is None else self._period})"

    def __getstate__(self):
        return self._period

    def __setstate__(self, state):
        object.__setattr__(self, "_period", state)


def adoption_times(n_periods: int) -> tuple[AdoptionTime, ...]:
    """The full arm set (1, ..., J, inf) in block order; cardinality J + 1."""
    return tuple(AdoptionTime(j) for j in range(1, n_periods + 1)) + (AdoptionTime.never(),)


def arm_index(a: AdoptionTime, n_periods: int) -> int:
    """Position of arm ``a`` in the block order 1, ..., J, inf."""
    if a.is_never:
        return n_periods
    if not 1 <= a.period <= n_periods:
        raise InvalidAdoptionTime(f"adoption time {a} outside 1..{n_periods}")
    return a.period - 1


def ordered_pairs(n_periods: int) -> tuple[tuple[AdoptionTime, AdoptionTime], ...]:
    """All (a, a') with a < a', in the stacking order (1,2), ..., (1,inf), (2,3), ..., (J,inf)."""
    arms = adoption_times(n_periods)
    return tuple(
        (arms[i], arms[k])
        for i in range(len(arms))
        for k in range(i + 1, len(arms))
    )


class WeightKind(Enum):
    UNIFORM = "uniform"
    INVERSE_CLUSTER_PERIOD_SIZE = "inverse_cluster_period_size"
    CUSTOM = "custom"


@dataclass(frozen=True)
class WeightScheme:
    """Choice of per-record weights w_ijk.

    ``uniform`` weights every individual equally, ``inverse_cluster_period_size``
    weights every cluster equally within each period (w_ijk = 1/N_ij), and
    ``custom`` uses the dataset's weight column.
    """

    kind: WeightKind = WeightKind.UNIFORM

    @classmethod
    def uniform(cls) -> "WeightScheme":
        return cls(WeightKind.UNIFORM)

    @classmethod
    def inverse_cluster_period_size(cls) -> "WeightScheme":
        return cls(WeightKind.INVERSE_CLUSTER_PERIOD_SIZE)

    @classmethod
    def custom(cls) -> "WeightScheme":
        return cls(WeightKind.CUSTOM)

    @classmethod
    def parse(cls, text: str) -> "WeightScheme":
        try:
            return cls(WeightKind(str(text).strip().lower()))
        except ValueError:
            raise DataError(f"unknown weight scheme {text!r}") from None


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Validated long-format SR-CRE data.

    Records are stored flat and sorted by (cluster, period); ``cluster_index``
    and ``period_index`` are 0-based codes into ``cluster_ids`` and 1..J.
    ``c`` holds cluster-period covariates with shape (I, J, p_c). All arrays
    are read-only; instances are safe for concurrent shared reads.
    """

    n_periods: int
    cluster_ids: tuple[str, ...]
    adoption: tuple[AdoptionTime, ...]
    y: np.ndarray
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
        return self.y.shape[0]

    @property
    def p_x(self) -> int:
        return self.x.shape[1]

    @property
    def p_c(self) -> int:
        return self.c.shape[2]

    @property
    def arms(self) -> tuple[AdoptionTime, ...]:
        return adoption_times(self.n_periods)

    def arm_codes(self) -> np.ndarray:
        """Arm index (block order) of each cluster."""
        return np.array([arm_index(a, self.n_periods) for a in self.adoption], dtype=np.intp)

    def arm_sizes(self) -> np.ndarray:
        """Cluster counts per arm in block order (zeros for absent arms)."""
        return np.bincount(self.arm_codes(), minlength=self.n_periods + 1)

    def with_outcomes(self, y: np.ndarray) -> "Dataset":
        """Copy of the dataset with the outcome column replaced."""
        y = np.asarray(y, dtype=float)
        if y.shape != self.y.shape:
            raise DataError("replacement outcomes have the wrong shape")
        if not np.all(np.isfinite(y)):
            raise NonFiniteValue("replacement outcomes contain non-finite values")
        return Dataset(
            n_periods=self.n_periods,
            cluster_ids=self.cluster_ids,
            adoption=self.adoption,
            y=_readonly(y),
            x=self.x,
            weight_column=self.weight_column,
            cluster_index=self.cluster_index,
            period_index=self.period_index,
            c=self.c,
            x_names=self.x_names,
            c_names=self.c_names,
            n_ij=self.n_ij,
        )

    @classmethod
    def from_arrays(
        cls,
        n_periods: int,
        cluster_ids: Sequence[str],
        adoption: Sequence[AdoptionTime],
        cluster_index: np.ndarray,
        period_index: np.ndarray,
        y: np.ndarray,
        x: Optional[np.ndarray] = None,
        weight_column: Optional[np.ndarray] = None,
        c: Optional[np.ndarray] = None,
        x_names: Sequence[str] = (),
        c_names: Sequence[str] = (),
    ) -> "Dataset":
        """Build and validate a dataset from flat record arrays.

        Records may arrive in any order; they are sorted into the canonical
        (cluster, period) order. Every (i, j) cell must contain at least one
        record and all numeric values must be finite.
        """
        n_periods = int(n_periods)
        if n_periods < 1:
            raise DataError("n_periods must be >= 1")
        n_clusters = len(cluster_ids)
        if len(adoption) != n_clusters:
            raise DataError("adoption length does not match cluster count")
        adoption = tuple(AdoptionTime.parse(a) for a in adoption)
        for cid, a in zip(cluster_ids, adoption):
            if not a.is_never and not 1 <= a.period <= n_periods:
                raise InvalidAdoptionTime(
                    f"cluster {cid!r}: adoption time {a} outside 1..{n_periods}",
                    cluster=cid,
                )

        cluster_index = np.asarray(cluster_index, dtype=np.intp)
        period_index = np.asarray(period_index, dtype=np.intp)
        y = np.asarray(y, dtype=float)
        n = y.shape[0]
        if cluster_index.shape != (n,) or period_index.shape != (n,):
            raise DataError("record index arrays have inconsistent lengths")
        if n == 0:
            raise DataError("dataset has no records")
        if cluster_index.min() < 0 or cluster_index.max() >= n_clusters:
            raise DataError("cluster_index out of range")
        if period_index.min() < 0 or period_index.max() >= n_periods:
            raise DataError("period_index out of range")

        x = np.zeros((n, 0)) if x is None else np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != n:
            raise DataError("covariate rows do not match record count")
        weight_column = (
            np.ones(n) if weight_column is None else np.asarray(weight_column, dtype=float)
        )
        if weight_column.shape != (n,):
            raise DataError("weight column length does not match record count")
        c = np.zeros((n_clusters, n_periods, 0)) if c is None else np.asarray(c, dtype=float)
        if c.shape[:2] != (n_clusters, n_periods):
            raise DataError("cluster-period covariates must have shape (I, J, p_c)")

        for label, arr in (("outcome", y), ("covariate", x), ("cluster covariate", c)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteValue(f"{label} values contain NaN or infinity")
        if not np.all(np.isfinite(weight_column)):
            raise NonFiniteValue("weight values contain NaN or infinity")
        if np.any(weight_column < 0):
            raise InvalidWeight("weights must be non-negative")

        order = np.lexsort((period_index, cluster_index))
        cluster_index = cluster_index[order]
        period_index = period_index[order]
        y = y[order]
        x = x[order]
        weight_column = weight_column[order]

        cell = cluster_index * n_periods + period_index
        n_ij = np.bincount(cell, minlength=n_clusters * n_periods).reshape(
            n_clusters, n_periods
        )
        if np.any(n_ij == 0):
            i, j = np.argwhere(n_ij == 0)[0]
            raise EmptyClusterPeriod(
                f"cluster {cluster_ids[i]!r} has no records in period {j + 1}",
                cluster=cluster_ids[i],
                period=int(j + 1),
            )

        x_names = tuple(x_names) if x_names else tuple(f"x{k}" for k in range(x.shape[1]))
        c_names = tuple(c_names) if c_names else tuple(f"c{k}" for k in range(c.shape[2]))
        if len(x_names) != x.shape[1] or len(c_names) != c.shape[2]:
            raise DataError("covariate names do not match column counts")

        return cls(
            n_periods=n_periods,
            cluster_ids=tuple(str(cid) for cid in cluster_ids),
            adoption=adoption,
            y=_readonly(y),
            x=_readonly(x),
            weight_column=_readonly(weight_column),
            cluster_index=_readonly(cluster_index),
            period_index=_readonly(period_index),
            c=_readonly(c),
            x_names=x_names,
            c_names=c_names,
            n_ij=_readonly(n_ij),
        )


@dataclass(frozen=True)
class ColumnSchema:
    """Column mapping for CSV ingestion.

    ``x_columns``/``c_columns`` override prefix auto-detection. ``period_map``
    maps raw period labels (e.g. calendar dates) to integers; adoption times
    are mapped through the same table.
    """

    cluster_id: str = "cluster_id"
    period: str = "period"
    adoption_time: str = "adoption_time"
    outcome: str = "outcome"
    weight: Optional[str] = "weight"
    x_prefix: str = "x_"
    c_prefix: str = "c_"
    x_columns: Optional[tuple[str, ...]] = None
    c_columns: Optional[tuple[str, ...]] = None
    period_map: Optional[Mapping] = None


def _map_periods(raw: pd.Series, schema: ColumnSchema) -> tuple[np.ndarray, dict]:
    """Map raw period labels to contiguous 1..J; returns codes and the label map."""
    if schema.period_map is not None:
        mapped = raw.map(lambda v: schema.period_map.get(v, schema.period_map.get(str(v))))
        if mapped.isna().any():
            bad = raw[mapped.isna()].iloc[0]
            raise NonContiguousPeriods(f"period label {bad!r} missing from period_map")
        values = mapped.astype(int)
    else:
        try:
            values = raw.astype(int)
        except (TypeError, ValueError):
            raise NonContiguousPeriods(
                "period column is not integer; supply a period_map"
            ) from None
    distinct = np.sort(values.unique())
    lo, hi = int(distinct[0]), int(distinct[-1])
    if not np.array_equal(distinct, np.arange(lo, hi + 1)):
        raise NonContiguousPeriods(
            f"periods {distinct.tolist()} do not form a contiguous integer run"
        )
    label_map = {int(v): int(v) - lo + 1 for v in distinct}
    return values.to_numpy() - lo, label_map


def load_dataset(
    path,
    schema: Optional[ColumnSchema] = None,
    covariates_path=None,
) -> Dataset:
    """Load and validate a long-format CSV.

    The main file needs columns for cluster id, period, adoption time, and
    outcome; individual covariates are taken from ``schema.x_columns`` or any
    column starting with ``schema.x_prefix``. Adoption times accept integers
    or "inf"/"never". An optional second CSV supplies cluster-period
    covariates keyed by (cluster_id, period).
    """
    schema = schema or ColumnSchema()
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    frame = pd.read_csv(path)

    required = [schema.cluster_id, schema.period, schema.adoption_time, schema.outcome]
    for col in required:
        if col not in frame.columns:
            raise MissingColumn(f"column {col!r} missing from {path.name}", column=col)

    if schema.x_columns is not None:
        x_names = tuple(schema.x_columns)
        for col in x_names:
            if col not in frame.columns:
                raise MissingColumn(f"covariate column {col!r} missing", column=col)
    else:
        x_names = tuple(sorted(c for c in frame.columns if c.startswith(schema.x_prefix)))

    period_codes, label_map = _map_periods(frame[schema.period], schema)
    n_periods = int(period_codes.max()) + 1

    cluster_ids = tuple(pd.unique(frame[schema.cluster_id].astype(str)))
    cluster_code = {cid: k for k, cid in enumerate(cluster_ids)}
    cluster_index = frame[schema.cluster_id].astype(str).map(cluster_code).to_numpy()

    adoption: list[AdoptionTime] = [None] * len(cluster_ids)
    for cid_raw, a_raw in zip(frame[schema.cluster_id].astype(str), frame[schema.adoption_time]):
        parsed = AdoptionTime.parse(a_raw)
        if not parsed.is_never:
            if schema.period_map is not None:
                raw_label = a_raw
                mapped = schema.period_map.get(raw_label, schema.period_map.get(str(raw_label)))
                if mapped is None:
                    raise InvalidAdoptionTime(
                        f"adoption time {a_raw!r} missing from period_map"
                    )
                parsed = AdoptionTime(int(mapped) - min(label_map.values()) + 1)
            else:
                mapped = label_map.get(parsed.period)
                if mapped is None:
                    raise InvalidAdoptionTime(
                        f"adoption time {a_raw!r} is not one of the observed periods "
                        f"and is not 'inf'"
                    )
                parsed = AdoptionTime(mapped)
        code = cluster_code[cid_raw]
        if adoption[code] is None:
            adoption[code] = parsed
        elif adoption[code] != parsed:
            raise InvalidAdoptionTime(
                f"cluster {cid_raw!r} has conflicting adoption times", cluster=cid_raw
            )

    y = pd.to_numeric(frame[schema.outcome], errors="coerce").to_numpy(dtype=float)
    x = (
        frame[list(x_names)].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
        if x_names
        else None
    )
    weight = None
    if schema.weight and schema.weight in frame.columns:
        weight = pd.to_numeric(frame[schema.weight], errors="coerce").to_numpy(dtype=float)

    c = None
    c_names: tuple[str, ...] = ()
    if covariates_path is not None:
        cpath = Path(covariates_path)
        if not cpath.exists():
            raise DataError(f"cluster covariate file not found: {cpath}")
        cframe = pd.read_csv(cpath)
        for col in (schema.cluster_id, schema.period):
            if col not in cframe.columns:
                raise MissingColumn(f"column {col!r} missing from {cpath.name}", column=col)
        if schema.c_columns is not None:
            c_names = tuple(schema.c_columns)
        else:
            c_names = tuple(sorted(col for col in cframe.columns if col.startswith(schema.c_prefix)))
        if not c_names:
            raise MissingColumn(f"no cluster covariate columns found in {cpath.name}")
        c_codes, _ = _map_periods(cframe[schema.period], schema)
        c = np.full((len(cluster_ids), n_periods, len(c_names)), np.nan)
        for row, (cid, jcode) in enumerate(zip(cframe[schema.cluster_id].astype(str), c_codes)):
            if cid not in cluster_code:
                raise DataError(f"cluster covariate file references unknown cluster {cid!r}")
            c[cluster_code[cid], jcode, :] = [
                pd.to_numeric(cframe[name].iloc[row]) for name in c_names
            ]
        if np.isnan(c).any():
            i, j = np.argwhere(np.isnan(c).any(axis=2))[0]
            raise EmptyClusterPeriod(
                f"cluster covariates missing for cluster {cluster_ids[i]!r}, "
                f"period {j + 1}",
                cluster=cluster_ids[i],
                period=int(j + 1),
            )

    return Dataset.from_arrays(
        n_periods=n_periods,
        cluster_ids=cluster_ids,
        adoption=adoption,
        cluster_index=cluster_index,
        period_index=period_codes,
        y=y,
        x=x,
        weight_column=weight,
        c=c,
        x_names=x_names,
        c_names=c_names,
    )


# ---------------------------------------------------------------------------
# Weight system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiSystem:
    """The normalized weight system shared by observed data and oracle tables."""

    pi: np.ndarray               # (n,) pi_ijk
    w_cluster_period: np.ndarray  # (I, J) w_ij.
    pi_cluster_period: np.ndarray  # (I, J) pi_ij.
    w_period: np.ndarray          # (J,) w_.j.
    n_period: np.ndarray          # (J,) N_j


def record_weights(
    scheme: WeightScheme,
    n_ij: np.ndarray,
    cluster_index: np.ndarray,
    period_index: np.ndarray,
    weight_column: np.ndarray,
) -> np.ndarray:
    """Materialize w_ijk for a scheme."""
    if scheme.kind is WeightKind.UNIFORM:
        return np.ones(cluster_index.shape[0])
    if scheme.kind is WeightKind.INVERSE_CLUSTER_PERIOD_SIZE:
        return 1.0 / n_ij[cluster_index, period_index].astype(float)
    w = np.asarray(weight_column, dtype=float)
    if np.any(w < 0):
        raise InvalidWeight("custom weights must be non-negative")
    return w.copy()


def pi_system(
    w: np.ndarray,
    n_clusters: int,
    n_periods: int,
    cluster_index: np.ndarray,
    period_index: np.ndarray,
) -> PiSystem:
    """Normalize record weights into the pi system; raises on zero period totals."""
    cell = cluster_index * n_periods + period_index
    n_cells = n_clusters * n_periods
    w_cp = np.bincount(cell, weights=w, minlength=n_cells).reshape(n_clusters, n_periods)
    w_period = w_cp.sum(axis=0)
    for j in range(n_periods):
        if w_period[j] <= 0.0:
            raise ZeroTotalWeight(j + 1)
    pi = w / w_period[period_index]
    pi_cp = w_cp / w_period[None, :]
    n_period = np.bincount(period_index, minlength=n_periods).astype(float)
    return PiSystem(
        pi=_readonly(pi),
        w_cluster_period=_readonly(w_cp),
        pi_cluster_period=_readonly(pi_cp),
        w_period=_readonly(w_period),
        n_period=_readonly(n_period),
    )


def cell_mean(
    values: np.ndarray,
    w: np.ndarray,
    w_cluster_period: np.ndarray,
    cluster_index: np.ndarray,
    period_index: np.ndarray,
) -> np.ndarray:
    """Weighted per-cell mean of a record column; zero where a cell has no weight."""
    n_clusters, n_periods = w_cluster_period.shape
    cell = cluster_index * n_periods + period_index
    total = np.bincount(cell, weights=w * values, minlength=n_clusters * n_periods)
    total = total.reshape(n_clusters, n_periods)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(w_cluster_period > 0, total / w_cluster_period, 0.0)
    return out


@dataclass(frozen=True)
class DerivedWeights:
    """The pi system plus every cluster-period aggregate the estimators need.

    Centering constants: individual- and average-level models center by the
    pi-weighted period mean; scaled-total models center by the plain mean
    over clusters. ``xtilde`` is the scaled cluster-period total
    I * pi_ij. * xbar_ij. Immutable; recomputation is deterministic.
    """

    scheme: WeightScheme
    pi: np.ndarray
    w_cluster_period: np.ndarray
    pi_cluster_period: np.ndarray
    w_period: np.ndarray
    n_period: np.ndarray
    ybar: np.ndarray            # (I, J) pi-weighted cluster-period outcome average
    ytilde: np.ndarray          # (I, J) scaled cluster-period totals
    xbar: np.ndarray            # (I, J, p_x)
    xbar_period: np.ndarray     # (J, p_x) pi-weighted period mean
    xc: np.ndarray              # (n, p_x) centered records
    xtilde: np.ndarray          # (I, J, p_x)
    cbar_period_w: np.ndarray   # (J, p_c) pi-weighted period mean of C
    cbar_period_u: np.ndarray   # (J, p_c) unweighted period mean of C
    cc_w: np.ndarray            # (I, J, p_c) C centered at weighted mean
    cc_u: np.ndarray            # (I, J, p_c) C centered at unweighted mean


def derive_weights(dataset: Dataset, scheme: WeightScheme) -> DerivedWeights:
    """Materialize the weight system and aggregates for a dataset."""
    w = record_weights(
        scheme, dataset.n_ij, dataset.cluster_index, dataset.period_index,
        dataset.weight_column,
    )
    ps = pi_system(
        w, dataset.n_clusters, dataset.n_periods,
        dataset.cluster_index, dataset.period_index,
    )

    ybar = cell_mean(
        dataset.y, w, ps.w_cluster_period, dataset.cluster_index, dataset.period_index
    )
    ytilde = dataset.n_clusters * ps.pi_cluster_period * ybar

    p_x = dataset.p_x
    xbar = np.zeros((dataset.n_clusters, dataset.n_periods, p_x))
    for k in range(p_x):
        xbar[:, :, k] = cell_mean(
            dataset.x[:, k], w, ps.w_cluster_period,
            dataset.cluster_index, dataset.period_index,
        )
    xbar_period = np.einsum("ij,ijk->jk", ps.pi_cluster_period, xbar)
    xc = dataset.x - xbar_period[dataset.period_index, :]
    xtilde = dataset.n_clusters * ps.pi_cluster_period[:, :, None] * xbar

    cbar_w = np.einsum("ij,ijk->jk", ps.pi_cluster_period, dataset.c)
    cbar_u = dataset.c.mean(axis=0) if dataset.n_clusters else dataset.c.sum(axis=0)
    cc_w = dataset.c - cbar_w[None, :, :]
    cc_u = dataset.c - cbar_u[None, :, :]

    return DerivedWeights(
        scheme=scheme,
        pi=ps.pi,
        w_cluster_period=ps.w_cluster_period,
        pi_cluster_period=ps.pi_cluster_period,
        w_period=ps.w_period,
        n_period=ps.n_period,
        ybar=_readonly(ybar),
        ytilde=_readonly(ytilde),
        xbar=_readonly(xbar),
        xbar_period=_readonly(xbar_period),
        xc=_readonly(xc),
        xtilde=_readonly(xtilde),
        cbar_period_w=_readonly(cbar_w),
        cbar_period_u=_readonly(cbar_u),
        cc_w=_readonly(cc_w),
        cc_u=_readonly(cc_u),
    )
