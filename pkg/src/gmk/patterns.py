"""Extrema-boundary motion pattern detection and movement characterization.

A 1-D trajectory is summarized by its boundary values, global extrema and the
relations between them (does it start or end near an extreme, are the extrema
interior). A fixed rule cascade turns those relations into a pattern label.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from gmk import errors
from gmk.motion import smooth

PATTERNS = (
    "linear",
    "round_trip",
    "return_to_extreme",
    "peak_at_start",
    "peak_at_end",
    "peak_between",
    "single_extreme_inside",
    "complex_extrema",
    "insufficient_data",
)
TIERS = ("very_slight", "slight", "moderate", "significant")
# cut-points on range / sigma_ref between consecutive tiers
DEFAULT_TIER_CUTS = (0.25, 0.75, 1.5)
OSCILLATION_REVERSALS = 3


@dataclass(frozen=True)
class Thresholds:
    """Static-range, extrema-proximity and slow-movement thresholds (channel units)."""

    eps_static: float = 0.02
    eps: float = 0.01
    eps_slow: float = 0.1

    def __post_init__(self):
        if not (self.eps_static > 0 and self.eps > 0):
            raise errors.ConfigError("thresholds must be positive")
        if not self.eps_static < self.eps_slow:
            raise errors.ConfigError("eps_static must be below eps_slow")

    @classmethod
    def from_static(cls, eps_static: float) -> "Thresholds":
        return cls(eps_static, 0.5 * eps_static, 5.0 * eps_static)

    def scaled(self, c: float) -> "Thresholds":
        return Thresholds(c * self.eps_static, c * self.eps, c * self.eps_slow)


ANGLE_THRESHOLDS = Thresholds.from_static(0.02)
POSITION_THRESHOLDS = Thresholds.from_static(0.01)


@dataclass(frozen=True)
class InsufficientData:
    pattern: str = "insufficient_data"


@dataclass(frozen=True)
class LinearResult:
    range: float
    direction: str
    pattern: str = "linear"


@dataclass(frozen=True)
class MotionStats:
    y: np.ndarray
    y0: float
    yT: float
    i_max: int
    i_min: int
    y_max: float
    y_min: float
    delta_range: float
    net_change: float
    s: tuple[bool, bool]
    e: tuple[bool, bool]
    interior: tuple[bool, bool]

    @property
    def flags(self) -> tuple[bool, bool, bool, bool, bool, bool]:
        return (*self.s, *self.e, *self.interior)


Detection = Union[InsufficientData, LinearResult, MotionStats]


def get_direction(delta: float) -> str:
    if delta > 0:
        return "positive"
    if delta < 0:
        return "negative"
    return "none"


def classify_movement(delta: float, th: Thresholds) -> str:
    a = abs(delta)
    if a < th.eps_static:
        return "static"
    if a < th.eps_slow:
        return "slow"
    return "significant"


def detect_motion(y, th: Thresholds) -> Detection:
    """Extract boundary/extrema statistics of ``y``.

    Returns :class:`InsufficientData` for fewer than two samples and
    :class:`LinearResult` when the range is below ``th.eps_static``.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    T = len(y)
    if T <= 1:
        return InsufficientData()

    y0, yT = float(y[0]), float(y[T - 1])
    i_max, i_min = int(np.argmax(y)), int(np.argmin(y))
    y_max, y_min = float(y[i_max]), float(y[i_min])
    rng, net = y_max - y_min, yT - y0

    if rng < th.eps_static:
        return LinearResult(range=rng, direction=get_direction(net))

    s = (abs(y0 - y_max) <= th.eps, abs(y0 - y_min) <= th.eps)
    e = (abs(yT - y_max) <= th.eps, abs(yT - y_min) <= th.eps)
    interior = (i_max not in (0, T - 1), i_min not in (0, T - 1))
    return MotionStats(y, y0, yT, i_max, i_min, y_max, y_min, rng, net, s, e, interior)


def classify_flags(s_max, s_min, e_max, e_min, in_max, in_min) -> str:
    start = s_max or s_min
    end = e_max or e_min
    if (s_max and e_min) or (s_min and e_max):
        return "round_trip"
    if start and end:
        return "return_to_extreme"
    if start and not end:
        return "peak_at_start"
    if end and not start:
        return "peak_at_end"
    if in_max and in_min:
        return "peak_between"
    if in_max != in_min:
        return "single_extreme_inside"
    return "complex_extrema"


def classify_pattern(stats: Detection) -> str:
    if isinstance(stats, (InsufficientData, LinearResult)):
        return stats.pattern
    return classify_flags(*stats.flags)


def count_reversals(y, tol: float) -> int:
    """Count direction reversals, ignoring excursions of size ``tol`` or less.

    A reversal is registered once the series has moved more than ``tol`` back
    from the running extreme of the current leg.
    """
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 3:
        return 0
    direction = 0
    anchor = y[0]
    reversals = 0
    for v in y[1:]:
        if direction == 0:
            if abs(v - anchor) > tol:
                direction = 1 if v > anchor else -1
                anchor = v
        elif direction > 0:
            if v > anchor:
                anchor = v
            elif anchor - v > tol:
                reversals += 1
                direction, anchor = -1, v
        else:
            if v < anchor:
                anchor = v
            elif v - anchor > tol:
                reversals += 1
                direction, anchor = 1, v
    return reversals


def tier_for(ratio: float, cuts=DEFAULT_TIER_CUTS) -> str:
    for name, cut in zip(TIERS, cuts):
        if ratio < cut:
            return name
    return TIERS[-1]


def shape_for(reversals: int, oscillation=OSCILLATION_REVERSALS) -> str:
    if reversals == 0:
        return "monotonic"
    if reversals < oscillation:
        return "bidirectional"
    return "oscillatory"


@dataclass(frozen=True)
class MovementDescriptor:
    pattern: str
    direction: str
    magnitude: str
    tier: str
    shape: str
    range: float

    def to_json(self) -> dict:
        return asdict(self)

    @property
    def phrase(self) -> str:
        """Short template text such as ``"slightly positive"``."""
        if self.magnitude == "static" or self.pattern == "insufficient_data":
            return "static"
        adverb = {"very_slight": "very slightly", "slight": "slightly",
                  "moderate": "moderately", "significant": "significantly"}[self.tier]
        if self.shape == "oscillatory":
            return f"{adverb} back and forth repeatedly"
        if self.shape == "bidirectional" or self.direction == "none":
            return f"{adverb} out and back"
        return f"{adverb} {self.direction}"


def characterize(y, th: Thresholds, sigma_ref: float, *, smooth_window: int = 1,
                 tier_cuts=DEFAULT_TIER_CUTS, oscillation=OSCILLATION_REVERSALS) -> MovementDescriptor:
    """Describe one channel slice by pattern, direction, magnitude, tier and shape.

    Magnitude is judged on the range of the slice (not the net change), so a
    trajectory that leaves and returns is not called static. A static slice is
    always reported in the lowest tier.
    """
    if not sigma_ref > 0:
        raise errors.NonPositiveSigma(f"sigma_ref must be positive, got {sigma_ref}")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    det = detect_motion(y, th)
    if isinstance(det, InsufficientData):
        return MovementDescriptor(det.pattern, "none", "static", TIERS[0], "monotonic", 0.0)

    pattern = classify_pattern(det)
    rng = det.range if isinstance(det, LinearResult) else det.delta_range
    direction = det.direction if isinstance(det, LinearResult) else get_direction(det.net_change)
    magnitude = classify_movement(rng, th)
    tier = TIERS[0] if magnitude == "static" else tier_for(rng / sigma_ref, tier_cuts)

    w = min(smooth_window, len(y) if len(y) % 2 else len(y) - 1)
    ys = smooth(y, max(w, 1))
    shape = shape_for(count_reversals(ys, th.eps), oscillation) if magnitude != "static" else "monotonic"
    return MovementDescriptor(pattern, direction, magnitude, tier, shape, float(rng))
