"""Synthetic scenes and an exact 2D raycasting scanner model.

Scenes consist of wall segments, moving agents (leg pairs for persons,
disk blobs for walking aids), optional static clutter disks, and a sensor
trajectory. Rendering intersects every beam with every primitive and keeps
the nearest hit; agents within range yield ground-truth annotations.
Generated datasets use the standard annotation cadence: every 5th frame of
every 4th batch of 100 frames, i.e. 5% of frames.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import Annotation, ClassId, LaserScan, OdometryFrame, ScanGeometry, normalize_angle
from .data import ANNOTATION_EXTENSIONS, write_annotation_file, write_odometry_file, write_scan_file

AGENT_KINDS = ("leg_pair", "blob")


@dataclass(frozen=True)
class Trajectory:
    """Constant-speed ping-pong motion along a waypoint polyline.

    With a single waypoint (or zero speed) the pose is static. Heading
    follows the travel direction when face_motion is set, otherwise the
    fixed yaw; yaw_rate adds steady rotation on top (used for sensors).
    """

    waypoints: tuple
    speed: float = 0.0
    yaw: float = 0.0
    yaw_rate: float = 0.0
    face_motion: bool = True

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.waypoints)
        if not pts:
            raise ValueError("trajectory needs at least one waypoint")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if math.hypot(x1 - x0, y1 - y0) <= 0.0:
                raise ValueError("consecutive waypoints must be distinct")
        object.__setattr__(self, "waypoints", pts)
        if self.speed < 0.0:
            raise ValueError("speed must be >= 0")

    def pose(self, t: float):
        """(x, y, heading) at time t."""
        spin = self.yaw_rate * t
        pts = self.waypoints
        if len(pts) < 2 or self.speed == 0.0:
            return pts[0][0], pts[0][1], normalize_angle(self.yaw + spin)
        arr = np.asarray(pts)
        seg = arr[1:] - arr[:-1]
        lens = np.hypot(seg[:, 0], seg[:, 1])
        cums = np.concatenate([[0.0], np.cumsum(lens)])
        total = float(cums[-1])
        s = math.fmod(self.speed * t, 2.0 * total)
        returning = s > total
        if returning:
            s = 2.0 * total - s
        i = int(np.clip(np.searchsorted(cums, s, side="right") - 1, 0, len(lens) - 1))
        frac = (s - cums[i]) / lens[i]
        x = arr[i, 0] + frac * seg[i, 0]
        y = arr[i, 1] + frac * seg[i, 1]
        if self.face_motion:
            dx, dy = (-seg[i]) if returning else seg[i]
            heading = math.atan2(dy, dx) + spin
        else:
            heading = self.yaw + spin
        return float(x), float(y), normalize_angle(heading)


@dataclass(frozen=True)
class Agent:
    """A moving annotated object.

    leg_pair: two small disks either side of the center along the walking
    direction, their separation oscillating with the gait. blob: one disk.
    """

    kind: str
    class_id: ClassId
    trajectory: Trajectory
    leg_radius: float = 0.06
    leg_sep_base: float = 0.30
    leg_sep_amp: float = 0.15
    gait_freq: float = 1.4
    gait_phase: float = 0.0
    blob_radius: float = 0.28

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"agent kind must be one of {AGENT_KINDS}")
        object.__setattr__(self, "class_id", ClassId(self.class_id))
        if self.kind == "leg_pair":
            if self.class_id != ClassId.PERSON:
                raise ValueError("leg_pair agents are persons")
            if self.leg_radius <= 0.0:
                raise ValueError("leg_radius must be positive")
            if self.leg_sep_base - abs(self.leg_sep_amp) <= 2.0 * self.leg_radius:
                raise ValueError("leg separation must always exceed the leg diameter")
        else:
            if self.class_id not in (ClassId.WHEELCHAIR, ClassId.WALKER):
                raise ValueError("blob agents are wheelchairs or walkers")
            if self.blob_radius <= 0.0:
                raise ValueError("blob_radius must be positive")

    def circles(self, t: float):
        """Disk primitives (x, y, r) of this agent at time t."""
        x, y, heading = self.trajectory.pose(t)
        if self.kind == "blob":
            return [(x, y, self.blob_radius)]
        sep = self.leg_sep_base + self.leg_sep_amp * math.sin(
            2.0 * math.pi * self.gait_freq * t + self.gait_phase)
        dx = 0.5 * sep * math.cos(heading)
        dy = 0.5 * sep * math.sin(heading)
        return [(x + dx, y + dy, self.leg_radius), (x - dx, y - dy, self.leg_radius)]

    def center(self, t: float):
        x, y, _ = self.trajectory.pose(t)
        return x, y


@dataclass(frozen=True)
class Scene:
    """World description: walls, agents, unannotated clutter disks, sensor."""

    walls: tuple  # ((x1, y1), (x2, y2)) segments
    agents: tuple
    sensor: Trajectory
    clutter: tuple = ()  # static (x, y, r) disks, never annotated

    def __post_init__(self):
        object.__setattr__(self, "walls",
                           tuple(((float(a[0]), float(a[1])), (float(b[0]), float(b[1])))
                                 for a, b in self.walls))
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "clutter",
                           tuple((float(x), float(y), float(r)) for x, y, r in self.clutter))
        for _, _, r in self.clutter:
            if r <= 0.0:
                raise ValueError("clutter radius must be positive")


def raycast(origin, angles: np.ndarray, segments, circles, max_range: float) -> np.ndarray:
    """Nearest intersection per ray; rays with no hit read max_range."""
    ox, oy = origin
    dx = np.cos(angles)
    dy = np.sin(angles)
    t_best = np.full(len(angles), max_range)

    for (ax, ay), (bx, by) in segments:
        ex, ey = bx - ax, by - ay
        wx, wy = ax - ox, ay - oy
        denom = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = (wx * ey - wy * ex) / denom
            uu = (wx * dy - wy * dx) / denom
        ok = (np.abs(denom) > 1e-12) & (tt > 1e-9) & (uu >= 0.0) & (uu <= 1.0)
        np.minimum(t_best, np.where(ok, tt, np.inf), out=t_best)

    for cx, cy, r in circles:
        ocx, ocy = ox - cx, oy - cy
        b = ocx * dx + ocy * dy
        c0 = ocx * ocx + ocy * ocy - r * r
        disc = b * b - c0
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(disc)
        t1 = -b - sq
        t2 = -b + sq
        tt = np.where(t1 > 1e-9, t1, np.where(t2 > 1e-9, t2, np.inf))
        ok = disc >= 0.0
        np.minimum(t_best, np.where(ok, tt, np.inf), out=t_best)

    return np.minimum(t_best, max_range)


def render_scan(scene: Scene, time: float, geometry: ScanGeometry, seq: int = 0,
                noise_sigma: float = 0.0, rng: np.random.Generator | None = None):
    """One simulated scan plus ground-truth annotations.

    Annotations are the agent centers within max_range of the sensor,
    expressed in the sensor frame of this scan. Optional additive Gaussian
    range noise; results are clipped to (0, max_range].
    """
    sx, sy, yaw = scene.sensor.pose(time)
    angles = yaw + geometry.beam_angles()
    circles = [c for agent in scene.agents for c in agent.circles(time)]
    circles.extend(scene.clutter)
    ranges = raycast((sx, sy), angles, scene.walls, circles, geometry.max_range)
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("range noise needs an rng")
        ranges = np.clip(ranges + rng.normal(0.0, noise_sigma, len(ranges)),
                         1e-3, geometry.max_range)
    scan = LaserScan(seq=seq, timestamp=time, ranges=ranges)

    annotations = []
    cos_y, sin_y = math.cos(yaw), math.sin(yaw)
    for agent in scene.agents:
        cx, cy = agent.center(time)
        rel_x, rel_y = cx - sx, cy - sy
        if math.hypot(rel_x, rel_y) > geometry.max_range:
            continue
        annotations.append(Annotation(
            seq=seq, class_id=agent.class_id,
            x=cos_y * rel_x + sin_y * rel_y,
            y=-sin_y * rel_x + cos_y * rel_y))
    return scan, annotations


def sensor_odometry(scene: Scene, time: float, seq: int) -> OdometryFrame:
    x, y, yaw = scene.sensor.pose(time)
    return OdometryFrame(seq=seq, timestamp=time, x=x, y=y, yaw=yaw)


def is_annotated_frame(frame: int) -> bool:
    """Cadence: every 5th frame within every 4th batch of 100 frames."""
    return (frame // 100) % 4 == 0 and frame % 5 == 0


def generate_dataset(scene: Scene, n_frames: int, out_dir, basename: str = "synth",
                     geometry: ScanGeometry | None = None, noise_sigma: float = 0.01,
                     seed: int = 0) -> dict:
    """Render a scene to dataset files; returns the written paths.

    Writes <basename>.csv/.odom2/.wc/.wa/.wp under out_dir. Deterministic
    for a fixed seed: rerunning produces byte-identical files.
    """
    geometry = geometry or ScanGeometry()
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    scans = []
    odoms = []
    per_class: dict = {cls: {} for cls in ANNOTATION_EXTENSIONS}
    for f in range(n_frames):
        t = f / geometry.scan_rate
        scan, anns = render_scan(scene, t, geometry, seq=f,
                                 noise_sigma=noise_sigma, rng=rng)
        scans.append(scan)
        odoms.append(sensor_odometry(scene, t, f))
        if is_annotated_frame(f):
            for cls in per_class:
                per_class[cls][f] = [a for a in anns if a.class_id == cls]
    base = os.path.join(str(out_dir), basename)
    paths = {"scans": base + ".csv", "odometry": base + ".odom2"}
    write_scan_file(paths["scans"], scans)
    write_odometry_file(paths["odometry"], odoms)
    for cls, ext in ANNOTATION_EXTENSIONS.items():
        paths[cls.name.lower()] = base + ext
        write_annotation_file(base + ext, per_class[cls])
    return paths


def default_scene() -> Scene:
    """A small indoor world: two walls, two walking persons, one wheelchair.

    The sensor wanders slowly with a gentle steady rotation, so temporal
    windows genuinely need the rotation correction.
    """
    walls = (((-2.0, 5.0), (12.0, 5.0)),
             ((12.0, 5.0), (12.0, -5.0)))
    agents = (
        Agent(kind="leg_pair", class_id=ClassId.PERSON,
              trajectory=Trajectory(waypoints=((4.0, 2.0), (4.0, -2.0)), speed=0.7),
              gait_freq=1.5, gait_phase=0.0),
        Agent(kind="leg_pair", class_id=ClassId.PERSON,
              trajectory=Trajectory(waypoints=((7.0, -2.5), (2.5, -1.0)), speed=0.55),
              gait_freq=1.3, gait_phase=1.7),
        Agent(kind="blob", class_id=ClassId.WHEELCHAIR,
              trajectory=Trajectory(waypoints=((8.0, 2.5), (5.0, 0.5)), speed=0.4),
              blob_radius=0.28),
    )
    sensor = Trajectory(waypoints=((0.0, 0.0), (2.0, 0.5)), speed=0.15,
                        yaw=0.0, yaw_rate=0.05, face_motion=False)
    return Scene(walls=walls, agents=agents, sensor=sensor)


def trajectory_to_dict(tr: Trajectory) -> dict:
    return {"waypoints": [list(p) for p in tr.waypoints], "speed": tr.speed,
            "yaw": tr.yaw, "yaw_rate": tr.yaw_rate, "face_motion": tr.face_motion}


def trajectory_from_dict(d: dict) -> Trajectory:
    return Trajectory(waypoints=tuple(tuple(p) for p in d["waypoints"]),
                      speed=float(d.get("speed", 0.0)), yaw=float(d.get("yaw", 0.0)),
                      yaw_rate=float(d.get("yaw_rate", 0.0)),
                      face_motion=bool(d.get("face_motion", True)))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "walls": [[list(a), list(b)] for a, b in scene.walls],
        "clutter": [list(c) for c in scene.clutter],
        "sensor": trajectory_to_dict(scene.sensor),
        "agents": [{
            "kind": a.kind, "class": a.class_id.name.lower(),
            "trajectory": trajectory_to_dict(a.trajectory),
            "leg_radius": a.leg_radius, "leg_sep_base": a.leg_sep_base,
            "leg_sep_amp": a.leg_sep_amp, "gait_freq": a.gait_freq,
            "gait_phase": a.gait_phase, "blob_radius": a.blob_radius,
        } for a in scene.agents],
    }


def scene_from_dict(d: dict) -> Scene:
    try:
        agents = tuple(Agent(
            kind=a["kind"], class_id=ClassId[a["class"].upper()],
            trajectory=trajectory_from_dict(a["trajectory"]),
            leg_radius=float(a.get("leg_radius", 0.06)),
            leg_sep_base=float(a.get("leg_sep_base", 0.30)),
            leg_sep_amp=float(a.get("leg_sep_amp", 0.15)),
            gait_freq=float(a.get("gait_freq", 1.4)),
            gait_phase=float(a.get("gait_phase", 0.0)),
            blob_radius=float(a.get("blob_radius", 0.28)),
        ) for a in d.get("agents", ()))
        return Scene(walls=tuple((tuple(a), tuple(b)) for a, b in d.get("walls", ())),
                     agents=agents,
                     sensor=trajectory_from_dict(d["sensor"]),
                     clutter=tuple(tuple(c) for c in d.get("clutter", ())))
    except (KeyError, TypeError, IndexError) as e:
        raise ValueError(f"invalid scene spec: {e}") from e
