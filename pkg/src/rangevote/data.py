"""Dataset files and sequence access.

File formats (one record per line, newline-terminated):
  scans       `.csv`    seq,timestamp,r_0,...,r_{N-1}   (meters)
  odometry    `.odom2`  seq,timestamp,x,y,phi
  annotations `.wc` / `.wa` / `.wp`
                        seq,JSON array of [x, y] sensor-frame meters;
                        every annotated frame gets a line, even when empty.

Ranges that parse as non-finite or <= 0 are mapped to max_range on load.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import Annotation, ClassId, LaserScan, OdometryFrame, ScanGeometry

ANNOTATION_EXTENSIONS = {ClassId.WHEELCHAIR: ".wc", ClassId.WALKER: ".wa",
                         ClassId.PERSON: ".wp"}


class DataFormatError(Exception):
    """A dataset file failed to parse; the message carries file:line."""


@dataclass(frozen=True)
class ScanSequence:
    """One recording: scans, optional odometry, per-class annotations."""

    geometry: ScanGeometry
    scans: tuple[LaserScan, ...]
    odometry: tuple[OdometryFrame, ...] | None
    annotations: dict  # ClassId -> {seq: [Annotation, ...]}
    annotated_seqs: tuple[int, ...]

    def __post_init__(self):
        seqs = [s.seq for s in self.scans]
        if seqs != sorted(seqs):
            raise ValueError("scans must be ordered by seq")
        index = {s: i for i, s in enumerate(seqs)}
        object.__setattr__(self, "_index", index)
        for s in self.scans:
            if len(s.ranges) != self.geometry.num_beams:
                raise ValueError(f"scan {s.seq} has {len(s.ranges)} ranges, "
                                 f"geometry expects {self.geometry.num_beams}")
        if self.odometry is not None:
            if [o.seq for o in self.odometry] != seqs:
                raise ValueError("odometry is not seq-aligned with the scans")
        for seq in self.annotated_seqs:
            if seq not in index:
                raise ValueError(f"annotated seq {seq} has no scan")

    def __len__(self) -> int:
        return len(self.scans)

    def index_of(self, seq: int) -> int:
        try:
            return self._index[seq]
        except KeyError:
            raise KeyError(f"unknown seq {seq}") from None

    def annotations_for_seq(self, seq: int) -> list[Annotation]:
        out = []
        for cls in ANNOTATION_EXTENSIONS:
            out.extend(self.annotations.get(cls, {}).get(seq, []))
        return out

    def annotations_by_seq(self) -> dict[int, list[Annotation]]:
        return {seq: self.annotations_for_seq(seq) for seq in self.annotated_seqs}


def _parse_floats(parts, path, lineno):
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise DataFormatError(f"{path}:{lineno}: {e}") from None


def load_scan_file(path, geometry: ScanGeometry | None = None):
    """Parse a scan file; returns (scans, geometry).

    The beam count is taken from the first line when no geometry is given.
    """
    scans = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 3:
                raise DataFormatError(f"{path}:{lineno}: expected seq,timestamp,ranges...")
            values = _parse_floats(parts, path, lineno)
            seq = int(values[0])
            ranges = np.asarray(values[2:], dtype=np.float64)
            if geometry is None:
                geometry = ScanGeometry(num_beams=len(ranges))
            if len(ranges) != geometry.num_beams:
                raise DataFormatError(
                    f"{path}:{lineno}: {len(ranges)} ranges, expected {geometry.num_beams}")
            bad = ~np.isfinite(ranges) | (ranges <= 0.0)
            ranges[bad] = geometry.max_range
            scans.append(LaserScan(seq=seq, timestamp=values[1], ranges=ranges))
    if geometry is None:
        geometry = ScanGeometry()
    return scans, geometry


def load_odometry_file(path):
    frames = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise DataFormatError(f"{path}:{lineno}: expected seq,timestamp,x,y,phi")
            values = _parse_floats(parts, path, lineno)
            frames.append(OdometryFrame(seq=int(values[0]), timestamp=values[1],
                                        x=values[2], y=values[3], yaw=values[4]))
    return frames


def load_annotation_file(path, class_id: ClassId):
    """Parse one per-class annotation file; returns {seq: [Annotation, ...]}."""
    out: dict[int, list[Annotation]] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                seq_str, rest = line.split(",", 1)
                seq = int(seq_str)
                points = json.loads(rest)
                anns = [Annotation(seq=seq, class_id=class_id, x=float(x), y=float(y))
                        for x, y in points]
            except (ValueError, TypeError) as e:
                raise DataFormatError(f"{path}:{lineno}: {e}") from None
            out[seq] = anns
    return out


def load_sequence(scan_path, odom_path=None, annotation_paths: dict | None = None,
                  geometry: ScanGeometry | None = None) -> ScanSequence:
    """Load one recording from its files.

    annotation_paths maps ClassId to a file path; annotated_seqs is the
    union of seqs appearing in any annotation file. A seq referenced by
    odometry or annotations but missing from the scans is an error.
    """
    scans, geometry = load_scan_file(scan_path, geometry)
    scans.sort(key=lambda s: s.seq)
    odometry = None
    if odom_path is not None:
        frames = {o.seq: o for o in load_odometry_file(odom_path)}
        missing = [s.seq for s in scans if s.seq not in frames]
        if missing:
            raise DataFormatError(f"{odom_path}: no odometry for seq {missing[0]}")
        odometry = tuple(frames[s.seq] for s in scans)
    annotations: dict = {}
    annotated: set[int] = set()
    if annotation_paths:
        for cls, path in annotation_paths.items():
            annotations[ClassId(cls)] = load_annotation_file(path, ClassId(cls))
            annotated.update(annotations[ClassId(cls)])
    return ScanSequence(geometry=geometry, scans=tuple(scans), odometry=odometry,
                        annotations=annotations, annotated_seqs=tuple(sorted(annotated)))


def sibling_paths(scan_path):
    """Derive odometry/annotation paths next to a scan file, where present."""
    base = os.path.splitext(str(scan_path))[0]
    odom = base + ".odom2"
    anns = {cls: base + ext for cls, ext in ANNOTATION_EXTENSIONS.items()
            if os.path.exists(base + ext)}
    return (odom if os.path.exists(odom) else None), anns


def load_sequence_auto(scan_path, geometry: ScanGeometry | None = None) -> ScanSequence:
    """load_sequence using whichever sibling files exist next to the scans."""
    odom, anns = sibling_paths(scan_path)
    return load_sequence(scan_path, odom, anns, geometry)


def temporal_window(sequence: ScanSequence, seq: int, time_window: int):
    """The scan (and odometry) window ending at seq, oldest first.

    Returns time_window + 1 frames; positions before the sequence start
    repeat the first frame.
    """
    pos = sequence.index_of(seq)
    idx = [max(0, pos - k) for k in range(time_window, -1, -1)]
    scans = [sequence.scans[i] for i in idx]
    odom = [sequence.odometry[i] for i in idx] if sequence.odometry is not None else None
    return scans, odom


def sequences_equal(a: ScanSequence, b: ScanSequence) -> bool:
    """Field-by-field equality (dataclass == would choke on the arrays)."""
    if a.geometry != b.geometry or len(a) != len(b):
        return False
    for sa, sb in zip(a.scans, b.scans):
        if sa.seq != sb.seq or sa.timestamp != sb.timestamp:
            return False
        if not np.array_equal(sa.ranges, sb.ranges):
            return False
    if (a.odometry is None) != (b.odometry is None):
        return False
    if a.odometry is not None and list(a.odometry) != list(b.odometry):
        return False
    if a.annotated_seqs != b.annotated_seqs:
        return False
    for seq in a.annotated_seqs:
        if a.annotations_for_seq(seq) != b.annotations_for_seq(seq):
            return False
    return True


def _fmt(x: float) -> str:
    return repr(float(x))


def write_scan_file(path, scans) -> None:
    with open(path, "w") as f:
        for s in scans:
            f.write(f"{s.seq},{_fmt(s.timestamp)},{','.join(_fmt(r) for r in s.ranges)}\n")


def write_odometry_file(path, frames) -> None:
    with open(path, "w") as f:
        for o in frames:
            f.write(f"{o.seq},{_fmt(o.timestamp)},{_fmt(o.x)},{_fmt(o.y)},{_fmt(o.yaw)}\n")


def write_annotation_file(path, annotations_by_seq: dict) -> None:
    """Write `{seq: [Annotation, ...]}`, one line per seq in order."""
    with open(path, "w") as f:
        for seq in sorted(annotations_by_seq):
            rows = [[a.x, a.y] for a in annotations_by_seq[seq]]
            f.write(f"{seq},{json.dumps(rows)}\n")
