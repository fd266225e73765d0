"""Sensor geometry and shared value types for 2D range-data detection.

All types here are immutable after construction and safe to share between
workers. Coordinate convention: sensor frame has x forward, y left, angle 0
at the scan center, angles increasing counter-clockwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

TWO_PI = 2.0 * math.pi


class ClassId(IntEnum):
    """Object classes. BACKGROUND is never an annotation or detection class."""

    BACKGROUND = 0
    WHEELCHAIR = 1
    WALKER = 2
    PERSON = 3


FOREGROUND_CLASSES = (ClassId.WHEELCHAIR, ClassId.WALKER, ClassId.PERSON)
NUM_CLASSES = len(ClassId)
CLASS_NAMES = {c: c.name.lower() for c in ClassId}


def normalize_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


def polar_to_cart(rng: float, angle: float) -> tuple[float, float]:
    """Range/bearing to sensor-frame (x, y). Total on range >= 0."""
    return rng * math.cos(angle), rng * math.sin(angle)


def cart_to_polar(x: float, y: float) -> tuple[float, float]:
    """Sensor-frame (x, y) to (range, bearing in (-pi, pi])."""
    return math.hypot(x, y), math.atan2(y, x)


@dataclass(frozen=True)
class ScanGeometry:
    """Static parameters of the scanner.

    Defaults: 450 beams over a 225 degree field of view at 12.5 Hz with a
    15 m horizon. Beam i points at -fov/2 + i * angular_increment.
    """

    num_beams: int = 450
    fov: float = math.radians(225.0)
    scan_rate: float = 12.5
    max_range: float = 15.0

    def __post_init__(self):
        if self.num_beams < 2:
            raise ValueError(f"num_beams must be >= 2, got {self.num_beams}")
        if self.fov <= 0.0:
            raise ValueError(f"fov must be positive, got {self.fov}")
        if self.scan_rate <= 0.0:
            raise ValueError(f"scan_rate must be positive, got {self.scan_rate}")
        if self.max_range <= 0.0:
            raise ValueError(f"max_range must be positive, got {self.max_range}")

    @property
    def angular_increment(self) -> float:
        return self.fov / (self.num_beams - 1)

    def beam_angle(self, i: int) -> float:
        """Bearing of beam i in the sensor frame."""
        if not 0 <= i < self.num_beams:
            raise IndexError(f"beam index {i} out of range [0, {self.num_beams})")
        return -0.5 * self.fov + i * self.angular_increment

    def beam_angles(self) -> np.ndarray:
        return np.linspace(-0.5 * self.fov, 0.5 * self.fov, self.num_beams)


@dataclass(frozen=True)
class LaserScan:
    """One scan: seq number, timestamp in seconds, ranges in meters."""

    seq: int
    timestamp: float
    ranges: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranges, dtype=np.float64)
        object.__setattr__(self, "ranges", r)
        if r.ndim != 1:
            raise ValueError("ranges must be a 1-D array")


@dataclass(frozen=True)
class OdometryFrame:
    """World-frame sensor pose at one scan. yaw is normalized to (-pi, pi]."""

    seq: int
    timestamp: float
    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))


@dataclass(frozen=True)
class Annotation:
    """Hand-labeled object center in the sensor frame of scan `seq`."""

    seq: int
    class_id: ClassId
    x: float
    y: float

    def __post_init__(self):
        if ClassId(self.class_id) not in FOREGROUND_CLASSES:
            raise ValueError(f"annotation class must be a foreground class, got {self.class_id}")
        object.__setattr__(self, "class_id", ClassId(self.class_id))


@dataclass(frozen=True)
class Detection:
    """Continuous-coordinate detection with a foreground class distribution.

    class_probs is ordered (wheelchair, walker, person) and sums to 1.
    confidence is the probability of the dominant class.
    """

    x: float
    y: float
    class_probs: np.ndarray
    confidence: float
    supporting_vote_count: int = 0

    def __post_init__(self):
        p = np.asarray(self.class_probs, dtype=np.float64)
        object.__setattr__(self, "class_probs", p)
        if p.shape != (len(FOREGROUND_CLASSES),):
            raise ValueError(f"class_probs must have {len(FOREGROUND_CLASSES)} entries")
        if np.any(p < -1e-9) or np.any(p > 1.0 + 1e-9):
            raise ValueError("class_probs entries must lie in [0, 1]")
        if abs(float(p.sum()) - 1.0) > 1e-6:
            raise ValueError(f"class_probs must sum to 1, got {p.sum()}")
        if abs(self.confidence - float(p.max())) > 1e-9:
            raise ValueError("confidence must equal the dominant class probability")

    @classmethod
    def make(cls, x, y, class_probs, supporting_vote_count=0) -> "Detection":
        p = np.asarray(class_probs, dtype=np.float64)
        return cls(float(x), float(y), p, float(p.max()), int(supporting_vote_count))

    @property
    def dominant_class(self) -> ClassId:
        return FOREGROUND_CLASSES[int(np.argmax(self.class_probs))]
