"""Traffic-load driven choice of the row/column selection scheme."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .quorum_core import Scheme


class LoadRegion(str, Enum):
    LOW = "low"
    MODERATE = "moderate"
    HIGH = "high"


@dataclass(frozen=True)
class LoadThresholds:
    """Boundaries on the number of contending pairs.

    ``low_max`` is the largest load still counted as LOW and ``high_min``
    the smallest load counted as HIGH.
    """

    low_max: int = 16
    high_min: int = 34

    def __post_init__(self):
        if not 0 <= self.low_max < self.high_min:
            raise ValueError(
                f"need 0 <= low_max < high_min, got low_max={self.low_max}, high_min={self.high_min}"
            )


def classify_load(active_pairs: int, thresholds: LoadThresholds = LoadThresholds()) -> LoadRegion:
    if active_pairs <= thresholds.low_max:
        return LoadRegion.LOW
    if active_pairs >= thresholds.high_min:
        return LoadRegion.HIGH
    return LoadRegion.MODERATE


_SCHEME_FOR_REGION = {
    LoadRegion.LOW: Scheme.TWO_BY_TWO,
    LoadRegion.MODERATE: Scheme.TWO_BY_ONE,
    LoadRegion.HIGH: Scheme.ONE_BY_ONE,
}


def scheme_for_region(region: LoadRegion) -> Scheme:
    return _SCHEME_FOR_REGION[LoadRegion(region)]


class AdaptivePolicy:
    """Per-run policy object; re-evaluated only at cycle boundaries."""

    def __init__(self, thresholds: LoadThresholds = LoadThresholds()):
        self.thresholds = thresholds
        self.cycles_in_region = {region: 0 for region in LoadRegion}

    def choose(self, contending_pairs: int) -> Scheme:
        region = classify_load(contending_pairs, self.thresholds)
        self.cycles_in_region[region] += 1
        return scheme_for_region(region)
