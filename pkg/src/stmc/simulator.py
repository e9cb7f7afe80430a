"""Deterministic synthetic multi-camera scenario generator.

Builds a ring of elevated cameras looking at the center of a square world,
moves vehicles along piecewise-linear constant-speed paths, and renders
noisy detection streams (dropout, box jitter, embedding noise, false
positives, per-camera frame offsets, calibration perturbation). Everything
is a pure function of the scenario seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Detection
from .metrics import Trajectories

_MIN_SEPARATION = 2.0


@dataclass
class ScenarioSpec:
    """Everything that defines a synthetic scene."""

    seed: int = 0
    num_cameras: int = 3
    num_vehicles: int = 5
    num_frames: int = 100
    extent: float = 40.0              # world square side, meters
    embed_dim: int = 16
    image_width: int = 1920
    image_height: int = 1080
    focal_px: float = 1000.0
    cam_radius_factor: float = 1.375  # ring radius as a fraction of extent
    cam_height_factor: float = 0.45   # camera height as a fraction of extent
    vehicle_width: float = 1.8        # meters
    vehicle_height: float = 1.5       # meters
    speed_min: float = 0.2            # meters per frame
    speed_max: float = 0.6
    drop_prob: float = 0.0
    fp_rate: float = 0.0              # expected false positives per camera-frame
    bbox_jitter_px: float = 0.0
    embed_noise: float = 0.0
    frame_offsets: list[int] = field(default_factory=list)  # per camera; empty = zeros
    calib_jitter: float = 0.0         # relative perturbation of emitted homographies

    def validate(self) -> None:
        if self.num_cameras < 2:
            raise ValueError("num_cameras must be >= 2")
        if self.num_vehicles < 0 or self.num_frames < 1:
            raise ValueError("num_vehicles must be >= 0 and num_frames >= 1")
        if not (0.0 <= self.drop_prob <= 1.0):
            raise ValueError("drop_prob must be within [0, 1]")
        if self.fp_rate < 0.0:
            raise ValueError("fp_rate must be >= 0")
        if self.speed_min <= 0.0 or self.speed_max < self.speed_min:
            raise ValueError("need 0 < speed_min <= speed_max")
        if self.frame_offsets and len(self.frame_offsets) != self.num_cameras:
            raise ValueError("frame_offsets must list one offset per camera")
        if any(off < 0 for off in self.frame_offsets):
            raise ValueError("frame offsets must be >= 0")
        if self.extent <= 0:
            raise ValueError("extent must be positive")

    @property
    def offsets(self) -> list[int]:
        return list(self.frame_offsets) if self.frame_offsets else [0] * self.num_cameras

    @classmethod
    def from_file(cls, path: str | Path) -> ScenarioSpec:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {', '.join(sorted(unknown))}")
        spec = cls(**data)
        spec.validate()
        return spec


@dataclass
class CameraModel:
    """Ground-plane projective model of one camera."""

    camera_id: int
    world_from_pixel: np.ndarray   # 3x3, the calibration consumers get
    pixel_from_world: np.ndarray   # 3x3 inverse, used for rendering
    image_size: tuple[int, int]
    fov_polygon: np.ndarray        # (K, 2) convex ground polygon

    def render(self, point: np.ndarray) -> tuple[np.ndarray, float]:
        """Pixel position and depth of a ground point."""
        mapped = self.pixel_from_world @ np.array([point[0], point[1], 1.0])
        return mapped[:2] / mapped[2], float(mapped[2])

    def sees(self, point: np.ndarray) -> bool:
        """True when the ground point projects inside the image, in front."""
        g = self.pixel_from_world
        vec = np.array([point[0], point[1], 1.0])
        depth = float(g[2] @ vec)
        if depth <= 0.0:
            return False
        u = float(g[0] @ vec)
        v = float(g[1] @ vec)
        width, height = self.image_size
        return 0.0 <= u <= width * depth and 0.0 <= v <= height * depth


def _clip_polygon(polygon: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    """Keep the part of a convex polygon with a*x + b*y + c >= 0."""
    kept: list[np.ndarray] = []
    n = len(polygon)
    for i in range(n):
        p, q = polygon[i], polygon[(i + 1) % n]
        fp = a * p[0] + b * p[1] + c
        fq = a * q[0] + b * q[1] + c
        if fp >= 0:
            kept.append(p)
        if (fp < 0) != (fq < 0):
            t = fp / (fp - fq)
            kept.append(p + t * (q - p))
    return np.array(kept) if kept else np.zeros((0, 2))


def _fov_polygon(pixel_from_world: np.ndarray, image_size: tuple[int, int], extent: float) -> np.ndarray:
    """Exact visible ground region clipped to a padded world box.

    The image-bounds tests are linear in world coordinates once the depth
    is known positive, so the region is an intersection of half-planes.
    """
    width, height = image_size
    pad = extent
    polygon = np.array(
        [[-pad, -pad], [extent + pad, -pad], [extent + pad, extent + pad], [-pad, extent + pad]],
        dtype=float,
    )
    g1, g2, g3 = pixel_from_world
    constraints = [
        (g3[0], g3[1], g3[2]),                                  # in front of the camera
        (g1[0], g1[1], g1[2]),                                  # u >= 0
        (width * g3[0] - g1[0], width * g3[1] - g1[1], width * g3[2] - g1[2]),
        (g2[0], g2[1], g2[2]),                                  # v >= 0
        (height * g3[0] - g2[0], height * g3[1] - g2[1], height * g3[2] - g2[2]),
    ]
    for a, b, c in constraints:
        polygon = _clip_polygon(polygon, a, b, c)
        if len(polygon) == 0:
            break
    return polygon


def build_cameras(spec: ScenarioSpec) -> list[CameraModel]:
    """Evenly spaced ring of cameras looking at the world center."""
    center = np.array([spec.extent / 2.0, spec.extent / 2.0, 0.0])
    radius = spec.cam_radius_factor * spec.extent
    height = spec.cam_height_factor * spec.extent
    intrinsics = np.array(
        [
            [spec.focal_px, 0.0, spec.image_width / 2.0],
            [0.0, spec.focal_px, spec.image_height / 2.0],
            [0.0, 0.0, 1.0],
        ]
    )
    cameras = []
    for cam in range(spec.num_cameras):
        angle = 2.0 * np.pi * cam / spec.num_cameras
        position = center + np.array([radius * np.cos(angle), radius * np.sin(angle), height])
        forward = center - position
        forward = forward / np.linalg.norm(forward)
        right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
        right = right / np.linalg.norm(right)
        down = np.cross(forward, right)
        rotation = np.stack([right, down, forward])
        projection = intrinsics @ rotation @ np.concatenate(
            [np.eye(3), -position[:, None]], axis=1
        )
        pixel_from_world = projection[:, [0, 1, 3]]
        world_from_pixel = np.linalg.inv(pixel_from_world)
        cameras.append(
            CameraModel(
                camera_id=cam,
                world_from_pixel=world_from_pixel,
                pixel_from_world=pixel_from_world,
                image_size=(spec.image_width, spec.image_height),
                fov_polygon=_fov_polygon(
                    pixel_from_world, (spec.image_width, spec.image_height), spec.extent
                ),
            )
        )
    return cameras


def _polyline_path(spec: ScenarioSpec, rng: np.random.Generator, spawn: np.ndarray) -> np.ndarray:
    """One vehicle's positions for every frame: constant speed on a polyline."""
    margin = 2.0
    low, high = margin, spec.extent - margin
    speed = rng.uniform(spec.speed_min, spec.speed_max)
    needed = speed * (spec.num_frames - 1) + 1e-9
    waypoints = [spawn]
    total = 0.0
    while total < needed:
        nxt = rng.uniform(low, high, size=2)
        step = float(np.linalg.norm(nxt - waypoints[-1]))
        if step < 1e-6:
            continue
        waypoints.append(nxt)
        total += step
    cumulative = np.concatenate(
        [[0.0], np.cumsum([np.linalg.norm(b - a) for a, b in zip(waypoints, waypoints[1:])])]
    )
    positions = np.zeros((spec.num_frames, 2))
    for t in range(spec.num_frames):
        arc = min(speed * t, cumulative[-1])
        seg = int(np.searchsorted(cumulative, arc, side="right") - 1)
        seg = min(seg, len(waypoints) - 2)
        frac = (arc - cumulative[seg]) / (cumulative[seg + 1] - cumulative[seg])
        positions[t] = waypoints[seg] + frac * (
            np.asarray(waypoints[seg + 1]) - np.asarray(waypoints[seg])
        )
    return positions


def _sample_paths(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    """Ground positions, shape (num_vehicles, num_frames, 2).

    Vehicles are rigid bodies: a whole path is rejected and resampled until
    it keeps the minimum separation from every earlier vehicle at every
    frame, which also guarantees the spawn-time separation.
    """
    margin = 2.0
    low, high = margin, spec.extent - margin
    accepted: list[np.ndarray] = []
    for _ in range(spec.num_vehicles):
        for _attempt in range(500):
            spawn = rng.uniform(low, high, size=2)
            candidate = _polyline_path(spec, rng, spawn)
            gaps = (
                np.linalg.norm(candidate - other, axis=1).min() for other in accepted
            )
            if all(gap >= _MIN_SEPARATION for gap in gaps):
                accepted.append(candidate)
                break
        else:
            raise ValueError(
                "could not lay out vehicle paths with the required separation; "
                "reduce num_vehicles or enlarge extent"
            )
    if not accepted:
        return np.zeros((0, spec.num_frames, 2))
    return np.stack(accepted)


@dataclass
class ScenarioData:
    """Everything generate() produces for one scene."""

    spec: ScenarioSpec
    cameras: list[CameraModel]
    calibrations: list[np.ndarray]       # emitted (possibly perturbed) pixel->world
    detections: list[Detection]          # frame-ordered noisy stream
    gt_image: Trajectories               # identity -> {(camera, frame): bbox}
    gt_ground: Trajectories              # identity -> {frame: point}


def _render_box(camera: CameraModel, point: np.ndarray, spec: ScenarioSpec) -> np.ndarray:
    """Box with its bottom center exactly at the rendered ground pixel."""
    pixel, depth = camera.render(point)
    width = spec.focal_px * spec.vehicle_width / depth
    height = spec.focal_px * spec.vehicle_height / depth
    return np.array([pixel[0] - width / 2.0, pixel[1] - height, width, height])


def generate(spec: ScenarioSpec) -> ScenarioData:
    """Produce ground truth, calibrations, and the noisy detection stream."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    cameras = build_cameras(spec)
    offsets = spec.offsets

    identities = np.stack(
        [vec / np.linalg.norm(vec) for vec in rng.standard_normal((max(spec.num_vehicles, 1), spec.embed_dim))]
    )[: spec.num_vehicles]
    paths = _sample_paths(spec, rng)

    calibrations = []
    for camera in cameras:
        h = camera.world_from_pixel
        if spec.calib_jitter > 0.0:
            h = h * (1.0 + spec.calib_jitter * rng.standard_normal((3, 3)))
        calibrations.append(h.copy())

    gt_image: Trajectories = {vi + 1: {} for vi in range(spec.num_vehicles)}
    gt_ground: Trajectories = {vi + 1: {} for vi in range(spec.num_vehicles)}
    detections: list[Detection] = []

    for vi in range(spec.num_vehicles):
        for frame in range(spec.num_frames):
            gt_ground[vi + 1][frame] = paths[vi, frame].copy()

    for frame in range(spec.num_frames):
        for camera in cameras:
            cam = camera.camera_id
            world_frame = frame - offsets[cam]
            if world_frame < 0:
                continue
            for vi in range(spec.num_vehicles):
                point = paths[vi, world_frame]
                if not camera.sees(point):
                    continue
                box = _render_box(camera, point, spec)
                gt_image[vi + 1][(cam, frame)] = box
                drop = rng.uniform()
                jitter = rng.standard_normal(4)
                noise = rng.standard_normal(spec.embed_dim)
                if drop < spec.drop_prob:
                    continue
                noisy = box + spec.bbox_jitter_px * jitter
                noisy[2] = max(noisy[2], 1.0)
                noisy[3] = max(noisy[3], 1.0)
                embedding = identities[vi] + spec.embed_noise * noise
                embedding = embedding / np.linalg.norm(embedding)
                detections.append(
                    Detection(
                        camera_id=cam,
                        frame=frame,
                        bbox=noisy,
                        confidence=1.0,
                        embedding=embedding,
                    )
                )
            for _ in range(rng.poisson(spec.fp_rate)):
                width = rng.uniform(20.0, 120.0)
                height = rng.uniform(20.0, 120.0)
                left = rng.uniform(0.0, spec.image_width - width)
                top = rng.uniform(0.0, spec.image_height - height)
                vec = rng.standard_normal(spec.embed_dim)
                detections.append(
                    Detection(
                        camera_id=cam,
                        frame=frame,
                        bbox=np.array([left, top, width, height]),
                        confidence=float(rng.uniform(0.3, 0.9)),
                        embedding=vec / np.linalg.norm(vec),
                    )
                )

    gt_image = {k: v for k, v in gt_image.items() if v}
    gt_ground = {k: v for k, v in gt_ground.items() if v}
    return ScenarioData(
        spec=spec,
        cameras=cameras,
        calibrations=calibrations,
        detections=detections,
        gt_image=gt_image,
        gt_ground=gt_ground,
    )


def noise_free(spec: ScenarioSpec) -> ScenarioSpec:
    """Copy of a spec with every noise source switched off."""
    return replace(
        spec,
        drop_prob=0.0,
        fp_rate=0.0,
        bbox_jitter_px=0.0,
        embed_noise=0.0,
        calib_jitter=0.0,
        frame_offsets=[],
    )
