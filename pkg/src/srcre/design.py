"""Complete randomization of clusters to adoption times.

Assignments are drawn by a seeded Fisher-Yates shuffle cut into consecutive
arm-size blocks, which is exactly uniform over the multinomial support.
Exhaustive enumeration (for exact finite-sample moments) yields every
distinct assignment once, in a stable lexicographic order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .data import AdoptionTime, adoption_times, arm_index
from .errors import DesignError, EnumerationTooLarge, ShapeMismatch

DEFAULT_ENUMERATION_CAP = 1_000_000


def seed_sequence(seed, *path: int) -> np.random.SeedSequence:
    """Sub-stream seed for (master seed, path).

    Replication r of a master seed uses ``seed_sequence(master, r)``; further
    path components split independent streams within a replication.
    """
    if isinstance(seed, np.random.SeedSequence):
        if not path:
            return seed
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(path)
        )
    if isinstance(seed, (tuple, list)):
        entropy = tuple(int(s) for s in seed)
    else:
        entropy = int(seed)
    return np.random.SeedSequence(entropy=entropy, spawn_key=tuple(path))


def rng_from_seed(seed, *path: int) -> np.random.Generator:
    """Counter-based generator for (master seed, sub-stream path)."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *path)))


@dataclass(frozen=True)
class DesignSpec:
    """Arm sizes I(a) for a J-period staggered rollout with I clusters."""

    n_periods: int
    sizes: tuple[int, ...]  # block order 1, ..., J, inf

    def __post_init__(self):
        if self.n_periods < 1:
            raise DesignError("n_periods must be >= 1")
        if len(self.sizes) != self.n_periods + 1:
            raise DesignError(
                f"need {self.n_periods + 1} arm sizes, got {len(self.sizes)}"
            )
        if any(int(s) < 1 for s in self.sizes):
            raise DesignError("every arm must have at least one cluster")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @classmethod
    def from_mapping(cls, n_periods: int, arm_sizes: Mapping) -> "DesignSpec":
        arms = adoption_times(n_periods)
        lookup = {AdoptionTime.parse(k): int(v) for k, v in arm_sizes.items()}
        missing = [a for a in arms if a not in lookup]
        if missing:
            raise DesignError(f"arm sizes missing for {[str(a) for a in missing]}")
        extra = set(lookup) - set(arms)
        if extra:
            raise DesignError(f"unknown arms {[str(a) for a in extra]}")
        return cls(n_periods, tuple(lookup[a] for a in arms))

    @property
    def n_clusters(self) -> int:
        return sum(self.sizes)

    @property
    def arms(self) -> tuple[AdoptionTime, ...]:
        return adoption_times(self.n_periods)

    def size(self, a: AdoptionTime) -> int:
        return self.sizes[arm_index(a, self.n_periods)]

    def fraction(self, a: AdoptionTime) -> float:
        return self.size(a) / self.n_clusters

    def support_size(self) -> int:
        """Number of distinct assignments (multinomial coefficient)."""
        total = math.factorial(self.n_clusters)
        for s in self.sizes:
            total //= math.factorial(s)
        return total


@dataclass(frozen=True)
class Assignment:
    """Realized adoption times for each cluster."""

    spec: DesignSpec
    arms: tuple[AdoptionTime, ...]

    def __post_init__(self):
        if len(self.arms) != self.spec.n_clusters:
            raise ShapeMismatch(
                f"assignment covers {len(self.arms)} clusters, "
                f"design has {self.spec.n_clusters}"
            )
        counts = [0] * (self.spec.n_periods + 1)
        for a in self.arms:
            counts[arm_index(a, self.spec.n_periods)] += 1
        if tuple(counts) != self.spec.sizes:
            raise DesignError(
                f"arm counts {tuple(counts)} do not match design {self.spec.sizes}"
            )

    def arm_codes(self) -> np.ndarray:
        """Arm index (block order) per cluster."""
        return np.array(
            [arm_index(a, self.spec.n_periods) for a in self.arms], dtype=np.intp
        )

    def indicator(self, a: AdoptionTime) -> np.ndarray:
        """G_i(a) = 1{A_i = a} per cluster."""
        return np.array([int(b == a) for b in self.arms])

    def to_frame(self, cluster_ids: Sequence[str] | None = None):
        import pandas as pd

        ids = cluster_ids or [str(i) for i in range(self.spec.n_clusters)]
        return pd.DataFrame(
            {"cluster_id": list(ids), "adoption_time": [str(a) for a in self.arms]}
        )

    def to_csv(self, path, cluster_ids: Sequence[str] | None = None) -> None:
        self.to_frame(cluster_ids).to_csv(path, index=False)


def sample_assignment(spec: DesignSpec, seed) -> Assignment:
    """Draw one assignment uniformly over all partitions into the arm sizes.

    Deterministic given ``seed`` (an integer or a SeedSequence).
    """
    rng = rng_from_seed(seed)
    perm = rng.permutation(spec.n_clusters)
    arms: list[AdoptionTime] = [None] * spec.n_clusters
    pos = 0
    for a, size in zip(spec.arms, spec.sizes):
        for idx in perm[pos : pos + size]:
            arms[idx] = a
        pos += size
    return Assignment(spec=spec, arms=tuple(arms))


def enumerate_assignments(
    spec: DesignSpec, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[Assignment]:
    """Yield every distinct assignment exactly once.

    Arms are filled in adoption-time order by lexicographic combinations of
    the remaining cluster indices, so the sequence is stable across runs.
    Raises EnumerationTooLarge when the support exceeds ``cap``.
    """
    total = spec.support_size()
    if total > cap:
        raise EnumerationTooLarge(
            f"support has {total} assignments, cap is {cap}", support=total, cap=cap
        )

    n = spec.n_clusters
    arms = spec.arms
    sizes = spec.sizes

    def rec(remaining: tuple[int, ...], k: int, acc: dict):
        if k == len(arms) - 1:
            out = dict(acc)
            for idx in remaining:
                out[idx] = arms[k]
            yield Assignment(spec=spec, arms=tuple(out[i] for i in range(n)))
            return
        for combo in itertools.combinations(remaining, sizes[k]):
            nxt = dict(acc)
            for idx in combo:
                nxt[idx] = arms[k]
            rest = tuple(i for i in remaining if i not in combo)
            yield from rec(rest, k + 1, nxt)

    yield from rec(tuple(range(n)), 0, {})


def reveal_outcomes(potential_outcomes, assignment: Assignment):
    """Observed dataset under an assignment: Y_ijk = Y_ijk(A_i).

    ``potential_outcomes`` is an oracle table exposing ``reveal``; covariates
    and weights are copied unchanged.
    """
    return potential_outcomes.reveal(assignment)
