"""Vote-grid post-processing: from per-beam predictions to detections.

Beams whose summed foreground probability clears the detection threshold
cast weighted votes at their predicted object centers. Votes accumulate in
a grid around the sensor, the grid is blurred, local maxima are found, and
each vote joins its nearest maximum; a maximum's detection is the plain
mean of its assigned votes, so detections live in continuous coordinates.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from .core import Detection, LaserScan, ScanGeometry

FOREGROUND_COUNT = 3  # wheelchair, walker, person


@dataclass(frozen=True)
class VotingConfig:
    """Grid geometry and vote/peak filtering parameters.

    grid_extent is the half-width: the grid covers [-extent, +extent]^2.
    blur_sigma (and the per-class sigmas used by split voting) are in cells.
    detection_threshold applies to a beam's summed foreground probability.
    """

    grid_extent: float = 15.0
    cell_size: float = 0.05
    blur_sigma: float = 2.0
    detection_threshold: float = 0.4
    assignment_radius: float = 0.5
    min_votes: int = 3
    weighted_mean: bool = False
    class_blur_sigmas: tuple[float, float, float] = (2.0, 2.0, 2.0)
    cross_class_nms_radius: float = 0.5

    def __post_init__(self):
        if self.cell_size <= 0.0:
            raise ValueError("cell_size must be positive")
        if self.grid_extent <= self.cell_size:
            raise ValueError("grid_extent must exceed cell_size")
        if self.assignment_radius <= 0.0:
            raise ValueError("assignment_radius must be positive")
        if self.min_votes < 1:
            raise ValueError("min_votes must be >= 1")
        object.__setattr__(self, "class_blur_sigmas", tuple(self.class_blur_sigmas))

    @property
    def n_cells(self) -> int:
        return int(round(2.0 * self.grid_extent / self.cell_size))


@dataclass(frozen=True)
class VoteSet:
    """Votes of one scan: positions, foreground distributions, weights.

    positions are sensor-frame meters, class_probs rows are normalized over
    (wheelchair, walker, person), weight is the casting beam's summed
    foreground probability.
    """

    positions: np.ndarray
    class_probs: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return int(self.positions.shape[0])

    @classmethod
    def empty(cls) -> "VoteSet":
        return cls(np.empty((0, 2)), np.empty((0, FOREGROUND_COUNT)), np.empty(0))


@dataclass
class VoteGrid:
    """Square accumulator over [-extent, +extent]^2, row index along x."""

    values: np.ndarray
    extent: float
    cell_size: float
    kernel_center: float = 1.0
    dropped_votes: int = 0

    def cell_index(self, xy: np.ndarray):
        return np.floor((xy + self.extent) / self.cell_size).astype(np.int64)

    def cell_centers(self, idx: np.ndarray) -> np.ndarray:
        return (idx + 0.5) * self.cell_size - self.extent


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Truncated normalized Gaussian with radius 3 sigma (identity at 0)."""
    if sigma <= 0.0:
        return np.ones(1)
    r = int(math.ceil(3.0 * sigma))
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def collect_votes(class_probs: np.ndarray, votes: np.ndarray, scan: LaserScan,
                  geometry: ScanGeometry, config: VotingConfig) -> VoteSet:
    """Turn per-beam predictions into sensor-frame votes.

    class_probs is (num_beams, 4) ordered (background, wheelchair, walker,
    person); votes are beam-frame offsets (num_beams, 2). Beams whose
    foreground probability mass exceeds the detection threshold emit one
    vote at endpoint + offset rotated back into the sensor frame, carrying
    that mass as weight and the renormalized foreground distribution.
    """
    probs = np.asarray(class_probs, dtype=np.float64)
    offs = np.asarray(votes, dtype=np.float64)
    p_obj = probs[:, 1:].sum(axis=1)
    keep = p_obj > config.detection_threshold
    if not keep.any():
        return VoteSet.empty()
    angles = geometry.beam_angles()[keep]
    ranges = scan.ranges[keep]
    ca, sa = np.cos(angles), np.sin(angles)
    ox, oy = offs[keep, 0], offs[keep, 1]
    pos = np.stack([ranges * ca + ca * ox - sa * oy,
                    ranges * sa + sa * ox + ca * oy], axis=1)
    dist = probs[keep, 1:] / p_obj[keep, None]
    return VoteSet(positions=pos, class_probs=dist, weights=p_obj[keep])


def _cast(positions, weights, config: VotingConfig, sigma: float) -> VoteGrid:
    n = config.n_cells
    grid = np.zeros((n, n))
    idx = np.floor((positions + config.grid_extent) / config.cell_size).astype(np.int64)
    ok = (idx[:, 0] >= 0) & (idx[:, 0] < n) & (idx[:, 1] >= 0) & (idx[:, 1] < n)
    np.add.at(grid, (idx[ok, 0], idx[ok, 1]), weights[ok])
    k = gaussian_kernel1d(sigma)
    if len(k) > 1:
        grid = convolve1d(grid, k, axis=0, mode="constant")
        grid = convolve1d(grid, k, axis=1, mode="constant")
    center = float(k[len(k) // 2] ** 2)
    return VoteGrid(values=grid, extent=config.grid_extent, cell_size=config.cell_size,
                    kernel_center=center, dropped_votes=int((~ok).sum()))


def cast_and_smooth(votes: VoteSet, config: VotingConfig) -> VoteGrid:
    """Accumulate vote weights into the grid and blur it.

    The blur kernel is a truncated Gaussian (radius 3 sigma) normalized to
    sum 1, so total mass is conserved away from the grid border. Votes
    outside the extent are dropped and counted on the grid.
    """
    return _cast(votes.positions, votes.weights, config, config.blur_sigma)


def find_maxima(grid: VoteGrid, config: VotingConfig):
    """Cells strictly above their 8-neighborhood with enough mass.

    The mass floor is min_votes * detection_threshold * the blur kernel's
    center value. On plateaus the cell with the lowest row-major index
    wins. Returns (positions (P, 2) at cell centers, smoothed values (P,)),
    ordered row-major.
    """
    g = grid.values
    n0, n1 = g.shape
    padded = np.full((n0 + 2, n1 + 2), -np.inf)
    padded[1:-1, 1:-1] = g
    is_peak = np.ones_like(g, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di:1 + di + n0, 1 + dj:1 + dj + n1]
            later = di > 0 or (di == 0 and dj > 0)  # neighbor has higher row-major index
            if later:
                is_peak &= (g > nb) | (g == nb)
            else:
                is_peak &= g > nb
    min_mass = config.min_votes * config.detection_threshold * grid.kernel_center
    is_peak &= g >= min_mass
    idx = np.argwhere(is_peak)
    return grid.cell_centers(idx), g[idx[:, 0], idx[:, 1]]


def _mean(rows: np.ndarray, weights: np.ndarray | None) -> np.ndarray:
    if weights is None:
        return rows.mean(axis=0)
    return (rows * weights[:, None]).sum(axis=0) / weights.sum()


def joint_vote(votes: VoteSet, peak_positions: np.ndarray,
               config: VotingConfig) -> list[Detection]:
    """Assign votes to their nearest peak and report per-peak vote means.

    Votes farther than assignment_radius from every peak are discarded.
    Peaks keeping at least min_votes votes become detections at the exact
    (by default unweighted) mean of their assigned vote positions, with the
    mean foreground distribution renormalized and the dominant-class
    probability as confidence.
    """
    if len(votes) == 0 or len(peak_positions) == 0:
        return []
    d = np.linalg.norm(votes.positions[:, None, :] - peak_positions[None, :, :], axis=2)
    nearest = d.argmin(axis=1)
    within = d[np.arange(len(votes)), nearest] <= config.assignment_radius
    detections = []
    for p in range(len(peak_positions)):
        assigned = np.flatnonzero(within & (nearest == p))
        if assigned.size < config.min_votes:
            continue
        w = votes.weights[assigned] if config.weighted_mean else None
        center = _mean(votes.positions[assigned], w)
        probs = _mean(votes.class_probs[assigned], w)
        probs = probs / probs.sum()
        detections.append(Detection.make(center[0], center[1], probs, assigned.size))
    return detections


def split_vote(class_probs: np.ndarray, votes: np.ndarray, scan: LaserScan,
               geometry: ScanGeometry, config: VotingConfig) -> list[Detection]:
    """Class-specific voting: one grid per foreground class, then NMS.

    Each vote adds its class-c probability mass to class c's grid, which is
    blurred with that class's sigma. Per-class maxima build candidate
    detections exactly as in joint voting; a final cross-class pass keeps,
    among candidates within the NMS radius, the one with the largest
    smoothed peak mass.
    """
    vs = collect_votes(class_probs, votes, scan, geometry, config)
    if len(vs) == 0:
        return []
    candidates = []  # (mass, class index, detection)
    for c in range(FOREGROUND_COUNT):
        mass_c = vs.weights * vs.class_probs[:, c]
        grid = _cast(vs.positions, mass_c, config, config.class_blur_sigmas[c])
        peaks, peak_vals = find_maxima(grid, config)
        if len(peaks) == 0:
            continue
        d = np.linalg.norm(vs.positions[:, None, :] - peaks[None, :, :], axis=2)
        nearest = d.argmin(axis=1)
        within = d[np.arange(len(vs)), nearest] <= config.assignment_radius
        for p in range(len(peaks)):
            assigned = np.flatnonzero(within & (nearest == p))
            if assigned.size < config.min_votes:
                continue
            w = mass_c[assigned] if config.weighted_mean else None
            center = _mean(vs.positions[assigned], w)
            probs = _mean(vs.class_probs[assigned], w)
            probs = probs / probs.sum()
            det = Detection.make(center[0], center[1], probs, assigned.size)
            candidates.append((float(peak_vals[p]), c, det))

    candidates.sort(key=lambda t: (-t[0], t[1]))
    kept: list[Detection] = []
    for mass, _, det in candidates:
        if all(math.hypot(det.x - k.x, det.y - k.y) > config.cross_class_nms_radius
               for k in kept):
            kept.append(det)
    return kept


def write_detections(path, detections_by_seq: dict[int, list[Detection]]) -> None:
    """Write the per-scan detection interchange format.

    One line per scan: `seq, [[x, y, conf, p_wc, p_wa, p_person], ...]`
    where the bracketed part is a JSON array. Scans are written in seq
    order.
    """
    with open(path, "w") as f:
        for seq in sorted(detections_by_seq):
            rows = [[d.x, d.y, d.confidence] + [float(v) for v in d.class_probs]
                    for d in detections_by_seq[seq]]
            f.write(f"{seq},{json.dumps(rows)}\n")


def read_detections(path) -> dict[int, list[Detection]]:
    out: dict[int, list[Detection]] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                seq_str, rest = line.split(",", 1)
                rows = json.loads(rest)
                dets = [Detection(float(x), float(y), np.array([wc, wa, wp]), float(conf))
                        for x, y, conf, wc, wa, wp in rows]
            except (ValueError, TypeError) as e:
                raise ValueError(f"{path}:{lineno}: bad detection line: {e}") from e
            out[int(seq_str)] = dets
    return out
