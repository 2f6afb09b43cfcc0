"""DWATE targets, pair classification, and summary estimands.

A DWATE tau_j(a, a') contrasts weighted average potential outcomes between
two adoption times in calendar period j. Summary estimands are user-weighted
linear combinations of DWATEs; the two built-in simple averages aggregate
treatment effects (over a <= j) and anticipation effects (over j < a <= J)
with weights proportional to w_.j. I(a).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .data import AdoptionTime, DerivedWeights, arm_index, ordered_pairs
from .design import DesignSpec
from .errors import EmptySupport, InvalidPair, MissingPair
from .estimators import DwateEstimate
from .variance import DwateCovariance, stacked_length, summary_se, wald_ci


class PairClass(Enum):
    """Causal reading of tau_j(a, a') by the relation of j to a < a'."""

    ANTICIPATION = "anticipation"  # j < a < a'
    CONTRAST = "contrast"          # a <= j < a'
    DURATION = "duration"          # a < a' <= j


@dataclass(frozen=True)
class ClassifiedPair:
    j: int
    a: AdoptionTime
    a_prime: AdoptionTime
    kind: PairClass
    tag: Optional[str] = None  # WATE_j(a) / AWATE_j(a) when a' is never-treated


def classify_pair(j: int, a: AdoptionTime, a_prime: AdoptionTime) -> ClassifiedPair:
    """Classify (j, a, a') with a < a' as anticipation, contrast, or duration.

    Pairs against the never-treated arm additionally carry a WATE_j(a) tag
    when a <= j (a realized treatment effect) or AWATE_j(a) when j < a (a
    pure anticipation effect).
    """
    a = AdoptionTime.parse(a)
    a_prime = AdoptionTime.parse(a_prime)
    if not a < a_prime:
        raise InvalidPair(f"need a < a', got ({a}, {a_prime})")
    if j < 1:
        raise InvalidPair(f"period must be >= 1, got {j}")

    after_a = a.is_never or j < a.period
    after_ap = a_prime.is_never or j < a_prime.period
    if after_a:
        kind = PairClass.ANTICIPATION
    elif after_ap:
        kind = PairClass.CONTRAST
    else:
        kind = PairClass.DURATION

    tag = None
    if a_prime.is_never:
        tag = f"AWATE_{j}({a})" if after_a else f"WATE_{j}({a})"
    return ClassifiedPair(j=j, a=a, a_prime=a_prime, kind=kind, tag=tag)


class SummaryKind(Enum):
    OWTE_SIM = "owte_sim"
    OAWTE_SIM = "oawte_sim"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SummarySpec:
    """A summary estimand theta = sum_j sum_{a<a'} b_j(a,a') tau_j(a,a').

    ``terms`` is only used for the custom kind: ((j, a, a'), weight) tuples.
    """

    kind: SummaryKind = SummaryKind.OWTE_SIM
    terms: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.kind is SummaryKind.CUSTOM and not self.terms:
            raise EmptySupport("custom summary has no terms")
        if not self.name:
            object.__setattr__(self, "name", self.kind.value)

    @classmethod
    def owte_sim(cls) -> "SummarySpec":
        return cls(SummaryKind.OWTE_SIM)

    @classmethod
    def oawte_sim(cls) -> "SummarySpec":
        return cls(SummaryKind.OAWTE_SIM)

    @classmethod
    def custom(cls, terms, name: str = "custom") -> "SummarySpec":
        packed = tuple(
            ((int(j), AdoptionTime.parse(a), AdoptionTime.parse(ap)), float(wt))
            for (j, a, ap), wt in terms
        )
        return cls(SummaryKind.CUSTOM, packed, name=name)

    @classmethod
    def from_json(cls, payload: dict) -> "SummarySpec":
        kind = SummaryKind(payload["kind"])
        if kind is SummaryKind.CUSTOM:
            terms = [
                ((t["j"], t["a"], t["a_prime"]), t["weight"])
                for t in payload.get("terms", [])
            ]
            return cls.custom(terms, name=payload.get("name", "custom"))
        spec = cls(kind)
        if payload.get("name"):
            object.__setattr__(spec, "name", payload["name"])
        return spec

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "name": self.name}
        if self.kind is SummaryKind.CUSTOM:
            out["terms"] = [
                {"j": j, "a": str(a), "a_prime": str(ap), "weight": wt}
                for (j, a, ap), wt in self.terms
            ]
        return out


def _pair_offsets(n_periods: int) -> dict:
    return {
        pair: k * n_periods for k, pair in enumerate(ordered_pairs(n_periods))
    }


def build_b(spec: SummarySpec, weights: DerivedWeights, design: DesignSpec) -> np.ndarray:
    """Contrast-weight vector in stacked pair order.

    The built-in simple averages weight each supporting WATE/AWATE term by
    w_.j. I(a), normalized to sum to one; weights use the observed period
    totals and the designed arm sizes. Raises EmptySupport when the summary
    has no supporting terms (e.g. the anticipation average with J = 1).
    """
    n_periods = design.n_periods
    offsets = _pair_offsets(n_periods)
    b = np.zeros(n_periods * len(offsets))
    never = AdoptionTime.never()

    if spec.kind is SummaryKind.CUSTOM:
        for (j, a, ap), wt in spec.terms:
            if not 1 <= j <= n_periods or (a, ap) not in offsets:
                raise MissingPair(
                    f"summary term (j={j}, a={a}, a'={ap}) is outside the design"
                )
            b[offsets[(a, ap)] + j - 1] += wt
        return b

    support = []
    for j in range(1, n_periods + 1):
        for a_period in range(1, n_periods + 1):
            a = AdoptionTime(a_period)
            if spec.kind is SummaryKind.OWTE_SIM and a_period <= j:
                support.append((j, a))
            elif spec.kind is SummaryKind.OAWTE_SIM and j < a_period:
                support.append((j, a))
    if not support:
        raise EmptySupport(f"summary {spec.kind.value} has empty support at J={n_periods}")

    raw = np.array(
        [weights.w_period[j - 1] * design.size(a) for j, a in support], dtype=float
    )
    raw /= raw.sum()
    for (j, a), wt in zip(support, raw):
        b[offsets[(a, never)] + j - 1] = wt
    return b


def calendar_weighted_standin(design: DesignSpec) -> SummarySpec:
    """A calendar-weighted overall treatment effect: equal weight per period,
    arm-size weights within a period, over the treated (a <= j) terms.

    This is a documented stand-in for calendar-time weighting, not a
    normative definition.
    """
    terms = []
    never = AdoptionTime.never()
    for j in range(1, design.n_periods + 1):
        arms_j = [AdoptionTime(a) for a in range(1, j + 1)]
        total = sum(design.size(a) for a in arms_j)
        for a in arms_j:
            terms.append(
                ((j, a, never), design.size(a) / (total * design.n_periods))
            )
    return SummarySpec.custom(terms, name="owte_cal_standin")


@dataclass(frozen=True)
class SummaryEstimate:
    spec: SummarySpec
    theta: float
    se: float
    ci: tuple[float, float]
    b: np.ndarray

    def to_json(self) -> dict:
        return {
            "summary": self.spec.name,
            "theta": self.theta,
            "se": self.se,
            "ci_lo": self.ci[0],
            "ci_hi": self.ci[1],
        }


def estimate_summary(
    estimate: DwateEstimate,
    covariance: DwateCovariance,
    spec: SummarySpec,
    weights: Optional[DerivedWeights] = None,
    design: Optional[DesignSpec] = None,
    b: Optional[np.ndarray] = None,
    ci_level: float = 0.95,
) -> SummaryEstimate:
    """Plug-in summary estimate theta_hat = b' tau_hat with its sandwich SE.

    Either pass ``b`` directly or the (weights, design) pair needed to build
    it from the spec.
    """
    if b is None:
        if weights is None or design is None:
            raise ValueError("estimate_summary needs either b or (weights, design)")
        b = build_b(spec, weights, design)
    b = np.asarray(b, dtype=float)
    expected = stacked_length(estimate.n_periods)
    if b.shape != (expected,):
        raise MissingPair(
            f"contrast weights have length {b.shape[0]}, fit supports {expected}"
        )
    theta = float(b @ estimate.tau_vector())
    se = summary_se(covariance, b)
    return SummaryEstimate(
        spec=spec, theta=theta, se=se, ci=wald_ci(theta, se, ci_level), b=b
    )
