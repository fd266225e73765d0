"""Scan preprocessing: fixed-size depth windows, temporal stacking, targets.

A window ("cutout") covers a fixed real-world width around one beam, is
resampled to a fixed point count, depth-centered on its anchor range,
clamped, and normalized to [-1, +1]. Temporal cutouts stack the same
spatial window over the T most recent frames; under sensor rotation the
window is re-anchored in past frames using the odometry yaw difference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Annotation, ClassId, LaserScan, OdometryFrame, ScanGeometry, normalize_angle

ODOMETRY_MODES = ("none", "rotation")
CENTER_MODES = ("each_frame", "fixed_location")


@dataclass(frozen=True)
class PreprocConfig:
    """Cutout parameters.

    window_width: real-world width covered by a cutout, meters.
    num_cutout_points: resampled point count per frame.
    time_window: number of past frames stacked on top of the current one.
    depth_clamp: half-extent for fore/background clamping, meters.
    odometry_mode: "rotation" re-anchors past frames by the yaw difference.
    center_mode: "fixed_location" keeps the current frame's anchor depth for
        past frames; "each_frame" re-centers every frame on its own depth.
    """

    window_width: float = 1.0
    num_cutout_points: int = 48
    time_window: int = 5
    depth_clamp: float = 1.0
    odometry_mode: str = "rotation"
    center_mode: str = "fixed_location"

    def __post_init__(self):
        if self.window_width <= 0.0:
            raise ValueError("window_width must be positive")
        if self.num_cutout_points < 2:
            raise ValueError("num_cutout_points must be >= 2")
        if self.time_window < 0:
            raise ValueError("time_window must be >= 0")
        if self.depth_clamp <= 0.0:
            raise ValueError("depth_clamp must be positive")
        if self.odometry_mode not in ODOMETRY_MODES:
            raise ValueError(f"odometry_mode must be one of {ODOMETRY_MODES}")
        if self.center_mode not in CENTER_MODES:
            raise ValueError(f"center_mode must be one of {CENTER_MODES}")

    @property
    def variant(self) -> str:
        if self.center_mode == "each_frame":
            return "each_frame"
        if self.odometry_mode == "rotation":
            return "fixed_location+rotation"
        return "fixed_location"


@dataclass(frozen=True)
class CutoutAnchor:
    """Beam index and center depth a cutout is taken around."""

    beam_index: int
    center_range: float


@dataclass(frozen=True)
class Cutout:
    """Normalized depth window; every value lies in [-1, +1]."""

    values: np.ndarray
    anchor: CutoutAnchor


@dataclass(frozen=True)
class TemporalCutout:
    """Stack of T+1 cutouts of one spatial window, ordered current-first."""

    frames: tuple[Cutout, ...]
    variant: str

    def array(self, dtype=np.float32) -> np.ndarray:
        return np.stack([f.values for f in self.frames]).astype(dtype)


@dataclass(frozen=True)
class OdometryShift:
    """Per-frame beam-index shift of a fixed world bearing, current-first.

    Entry k answers: at which beam was the world bearing of current beam i
    seen k frames ago. That beam is i - delta_beams[k].
    """

    delta_beams: tuple[int, ...]


@dataclass(frozen=True)
class PointTarget:
    """Per-beam training target: class label plus center vote.

    vote_offset points from the beam endpoint to the owning annotation
    center, expressed in the beam-aligned frame (x' along the beam,
    y' perpendicular). has_vote is true exactly for foreground labels.
    """

    class_label: ClassId
    vote_offset: tuple[float, float]
    has_vote: bool


def opening_angle(width: float, distance: float) -> float:
    """Angular span of a window of the given width at the given distance."""
    if width <= 0.0:
        raise ValueError("width must be positive")
    if distance <= 0.0:
        raise ValueError("distance must be positive")
    return 2.0 * math.atan(width / (2.0 * distance))


def cut(scan: LaserScan, anchor: CutoutAnchor, config: PreprocConfig,
        geometry: ScanGeometry) -> Cutout:
    """Extract one normalized depth window from a scan.

    The beam span covered by the window's opening angle is linearly
    resampled to num_cutout_points (nearest beam at the span edges; sample
    positions whose nearest beam falls outside the scan read max_range),
    centered on the anchor depth, clamped to +-depth_clamp and normalized.
    """
    n = geometry.num_beams
    if not 0 <= anchor.beam_index < n:
        raise IndexError(f"beam index {anchor.beam_index} out of range [0, {n})")
    if anchor.center_range <= 0.0:
        raise ValueError("anchor center_range must be positive")
    half = 0.5 * opening_angle(config.window_width, anchor.center_range) / geometry.angular_increment
    pos = np.linspace(anchor.beam_index - half, anchor.beam_index + half,
                      config.num_cutout_points)
    vals = np.interp(pos, np.arange(n), scan.ranges)
    nearest = np.rint(pos)
    vals[(nearest < 0) | (nearest >= n)] = geometry.max_range
    vals -= anchor.center_range
    np.clip(vals, -config.depth_clamp, config.depth_clamp, out=vals)
    vals /= config.depth_clamp
    return Cutout(values=vals, anchor=anchor)


def beam_shifts(odometry: list[OdometryFrame], geometry: ScanGeometry) -> OdometryShift:
    """Beam-index shifts induced by sensor rotation, relative to the last frame.

    odometry is ordered oldest to newest; the result is current-first. A
    world point at beam i in the newest frame was at beam i - delta_beams[k]
    k frames earlier (yaw decreasing between then and now shifts scene
    content toward higher beam indices, giving positive deltas).
    """
    yaw_now = odometry[-1].yaw
    limit = geometry.num_beams - 1
    shifts = []
    for frame in reversed(odometry):
        d = int(round(normalize_angle(frame.yaw - yaw_now) / geometry.angular_increment))
        shifts.append(max(-limit, min(limit, d)))
    return OdometryShift(tuple(shifts))


def temporal_anchors(scans: list[LaserScan], odometry: list[OdometryFrame] | None,
                     beam_index: int, config: PreprocConfig,
                     geometry: ScanGeometry) -> list[CutoutAnchor]:
    """Anchors for one spatial window across a frame window, current-first.

    scans are ordered oldest to newest with the current frame last. With
    center_mode "each_frame" every frame re-centers on its own depth at the
    beam. With "fixed_location" all frames use the current depth; odometry
    mode "rotation" additionally re-points past frames at the beam where the
    current world bearing was seen (shifted index clipped to the valid
    range, never an error).
    """
    if not scans:
        raise ValueError("empty scan window")
    n = geometry.num_beams
    if not 0 <= beam_index < n:
        raise IndexError(f"beam index {beam_index} out of range [0, {n})")

    if config.center_mode == "each_frame":
        return [CutoutAnchor(beam_index, float(s.ranges[beam_index])) for s in reversed(scans)]

    center = float(scans[-1].ranges[beam_index])
    if config.odometry_mode == "rotation" and len(scans) > 1:
        if odometry is None or len(odometry) != len(scans):
            raise ValueError("odometry covering the scan window is required for rotation correction")
        deltas = beam_shifts(odometry, geometry).delta_beams
        return [CutoutAnchor(min(n - 1, max(0, beam_index - d)), center) for d in deltas]
    return [CutoutAnchor(beam_index, center)] * len(scans)


def build_temporal_cutout(scans: list[LaserScan], odometry: list[OdometryFrame] | None,
                          beam_index: int, config: PreprocConfig,
                          geometry: ScanGeometry) -> TemporalCutout:
    """Cut one spatial window from every frame of the window, current-first."""
    anchors = temporal_anchors(scans, odometry, beam_index, config, geometry)
    frames = tuple(cut(scans[-1 - k], anchors[k], config, geometry)
                   for k in range(len(scans)))
    return TemporalCutout(frames=frames, variant=config.variant)


def cutout_batch(scans: list[LaserScan], odometry: list[OdometryFrame] | None,
                 beam_indices, config: PreprocConfig, geometry: ScanGeometry,
                 dtype=np.float32) -> np.ndarray:
    """Temporal cutouts for many beams of one frame window.

    Returns an array of shape (len(beam_indices), len(scans),
    num_cutout_points), frames ordered current-first.
    """
    out = np.empty((len(beam_indices), len(scans), config.num_cutout_points), dtype=dtype)
    for row, i in enumerate(beam_indices):
        tc = build_temporal_cutout(scans, odometry, int(i), config, geometry)
        for k, frame in enumerate(tc.frames):
            out[row, k] = frame.values
    return out


def target_arrays(scan: LaserScan, annotations: list[Annotation],
                  geometry: ScanGeometry, label_radius: float = 0.35):
    """Per-beam training targets as arrays.

    Returns (labels, offsets, has_vote): class ids (num_beams,), beam-frame
    vote offsets (num_beams, 2), and the foreground mask. A beam owns the
    annotation nearest to its endpoint if that lies within label_radius;
    distance ties break toward the lowest class id, then input order.
    """
    n = geometry.num_beams
    angles = geometry.beam_angles()
    ex = scan.ranges * np.cos(angles)
    ey = scan.ranges * np.sin(angles)

    labels = np.zeros(n, dtype=np.int64)
    offsets = np.zeros((n, 2), dtype=np.float64)
    best = np.full(n, np.inf)
    tx = np.zeros(n)
    ty = np.zeros(n)
    for ann in sorted(annotations, key=lambda a: int(a.class_id)):
        d = np.hypot(ex - ann.x, ey - ann.y)
        better = d < best
        best[better] = d[better]
        labels[better] = int(ann.class_id)
        tx[better] = ann.x
        ty[better] = ann.y

    inside = best <= label_radius
    labels[~inside] = int(ClassId.BACKGROUND)
    dx = tx - ex
    dy = ty - ey
    ca = np.cos(angles)
    sa = np.sin(angles)
    offsets[:, 0] = ca * dx + sa * dy
    offsets[:, 1] = -sa * dx + ca * dy
    offsets[~inside] = 0.0
    return labels, offsets, inside


def make_training_targets(scan: LaserScan, annotations: list[Annotation],
                          geometry: ScanGeometry,
                          label_radius: float = 0.35) -> list[PointTarget]:
    """Per-beam training targets; see target_arrays for the assignment rule."""
    labels, offsets, has_vote = target_arrays(scan, annotations, geometry, label_radius)
    return [PointTarget(ClassId(int(labels[i])),
                        (float(offsets[i, 0]), float(offsets[i, 1])),
                        bool(has_vote[i]))
            for i in range(geometry.num_beams)]
