"""What an honest-but-curious provider can infer, and the object-security metric.

The provider only ever sees detector zones, the bit vectors each detector
reports, the public request fields and the index set of the final location
retrieval.  :class:`ServiceProvider` is the container for exactly that view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .owner import chi_square_stat
from .protocol import InvalidParameter, SealedLocation

__all__ = [
    "RankReport",
    "rank_by_bit_ones",
    "rank_by_p_value",
    "normalized_rank",
    "ServiceProvider",
]


@dataclass(frozen=True, eq=False)
class RankReport:
    """Suspicion ordering of all detectors; ``ranking[0]`` is the most suspected."""

    strategy: str
    ranking: np.ndarray
    scores: np.ndarray | None = None

    @property
    def C(self) -> int:
        return int(self.ranking.size)

    def ranks(self) -> np.ndarray:
        """``ranks()[d]`` is the 1-based rank of detector ``d``."""
        r = np.empty(self.C, dtype=np.int64)
        r[self.ranking] = np.arange(1, self.C + 1)
        return r

    def rank_of(self, d: int) -> int:
        return int(self.ranks()[d])

    def real_rank(self, real_set: Iterable[int]) -> int | None:
        real = list(real_set)
        if not real:
            return None
        return int(self.ranks()[real].min())


def _as_matrix(frames) -> np.ndarray:
    if isinstance(frames, (list, tuple)):
        frames = np.concatenate([np.asarray(f, dtype=bool) for f in frames], axis=1)
    mat = np.asarray(frames, dtype=bool)
    if mat.ndim != 2:
        raise InvalidParameter("frames must be a (detectors, bits) matrix or a list of them")
    return mat


def rank_by_bit_ones(frames, rng: np.random.Generator) -> RankReport:
    """Most ones first; ties broken uniformly at random.

    ``frames`` is a ``(C, bits)`` matrix of everything each detector reported,
    or a list of per-round matrices.
    """
    mat = _as_matrix(frames)
    ones = mat.sum(axis=1)
    tiebreak = rng.permutation(ones.size)
    order = np.lexsort((tiebreak, -ones))
    return RankReport("bit_ones", order, ones)


def rank_by_p_value(frames, p1_prime: float, rng: np.random.Generator, chi2_mode: str = "counts") -> RankReport:
    """Ascending chi-squared p-value of each detector's overall ones-frequency.

    Detectors with fewer ones than expected are all placed after those with at
    least the expected frequency.  Sorting uses the statistic itself, so
    p-values that underflow to zero still order correctly.
    """
    mat = _as_matrix(frames)
    C, nbits = mat.shape
    if nbits == 0:
        raise InvalidParameter("no reported bits to rank on")
    p_ob = mat.sum(axis=1) / nbits
    n = float(nbits) if chi2_mode == "counts" else 1.0
    stat = np.array([chi_square_stat(float(p), p1_prime, n) for p in p_ob])
    low_side = (p_ob < p1_prime).astype(np.int8)
    tiebreak = rng.permutation(C)
    order = np.lexsort((tiebreak, -stat, low_side))
    return RankReport("p_value", order, stat)


def normalized_rank(report: RankReport, real_set: Iterable[int]) -> float | None:
    """Best rank among the detectors covering the lost tag, divided by ``C``.

    ``None`` when no detector covers the tag (metric undefined).
    """
    best = report.real_rank(real_set)
    return None if best is None else best / report.C


@dataclass
class ServiceProvider:
    """Everything the provider legitimately observes during one run."""

    zones: list[tuple[int, int]]
    sealed: dict[int, SealedLocation] = field(default_factory=dict)
    requests: list = field(default_factory=list)
    reports: list[np.ndarray] = field(default_factory=list)
    retrievals: list[tuple[int, ...]] = field(default_factory=list)

    def store_location(self, detector: int, sealed: SealedLocation) -> None:
        self.sealed[detector] = sealed

    def forward_request(self, request) -> None:
        self.requests.append(request)

    def collect(self, bits: np.ndarray) -> None:
        self.reports.append(np.asarray(bits, dtype=bool))

    def serve(self, indices: Iterable[int]) -> dict[int, SealedLocation]:
        idx = tuple(sorted(int(i) for i in indices))
        self.retrievals.append(idx)
        return {i: self.sealed[i] for i in idx}

    def observed_bits(self) -> np.ndarray:
        if not self.reports:
            return np.zeros((len(self.zones), 0), dtype=bool)
        return np.concatenate(self.reports, axis=1)

    def rank(self, strategy: str, rng: np.random.Generator, p1_prime: float | None = None,
             chi2_mode: str = "counts") -> RankReport:
        bits = self.observed_bits()
        if strategy == "bit_ones":
            return rank_by_bit_ones(bits, rng)
        if strategy == "p_value":
            return rank_by_p_value(bits, p1_prime, rng, chi2_mode)
        raise InvalidParameter(f"unknown strategy {strategy!r}")
