"""Tiny software rasterizer for the drone's downward cameras.

Cameras are pinhole models fixed to the drone body (the drone does not yaw,
so mount orientations are world-frame constants). A frame is the analytic
sky/ground background plus every scene box painted far-to-near as a flat
convex polygon; basestation markers are painted last and never drop below a
minimum on-screen size.

The background depends only on ray direction, never on drone position, so
absolute position leaks into a frame only through object geometry.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import VisibilityError

SKY_HORIZON = np.array([0.74, 0.84, 0.95])
SKY_ZENITH = np.array([0.33, 0.53, 0.85])
SUN_TINT = np.array([0.26, 0.16, 0.02])
GROUND_NEAR = np.array([0.30, 0.30, 0.32])
GROUND_FAR = np.array([0.46, 0.45, 0.43])
GROUND_SUN_TINT = np.array([0.13, 0.09, 0.02])


@dataclass(frozen=True)
class CameraConfig:
    """Pinhole camera rigidly mounted on the drone.

    forward is the optical axis in world coordinates; the in-image up vector
    is world +z projected off the axis, or +x for a nadir view where that
    projection vanishes.
    """

    mount_index: int
    forward: tuple
    fov_deg: float = 75.0
    width: int = 64
    height: int = 64

    def __post_init__(self):
        if self.mount_index not in (1, 2, 3):
            raise ValueError("mount_index must be 1, 2 or 3")
        f = np.asarray(self.forward, float)
        if abs(np.linalg.norm(f) - 1.0) > 1e-6:
            raise ValueError("forward must be a unit vector")
        if not 10.0 <= self.fov_deg <= 170.0:
            raise ValueError("fov_deg must lie in [10, 170]")
        if self.width < 8 or self.height < 8:
            raise ValueError("frame must be at least 8x8")

    @property
    def focal_px(self):
        return (self.width / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)

    def basis(self):
        """Rows: right, up, forward (world frame)."""
        f = np.asarray(self.forward, float)
        up_hint = np.array([0.0, 0.0, 1.0])
        if abs(f @ up_hint) > 1.0 - 1e-9:
            up_hint = np.array([1.0, 0.0, 0.0])
        right = np.cross(f, up_hint)
        right /= np.linalg.norm(right)
        up = np.cross(right, f)
        return np.stack([right, up, f])


def default_cameras(width=64, height=64, fov_deg=75.0):
    """Three-mount rig: forward-down, nadir, backward-down.

    The oblique mounts pitch 27 degrees below the horizon, which centers a
    roadside mast on the optical axis near the mid-range of a pass; combined
    with the nadir view the rig sees the mast from any point over the street.
    """
    c, s = math.cos(math.radians(27.0)), math.sin(math.radians(27.0))
    return (
        CameraConfig(1, (c, 0.0, -s), fov_deg, width, height),
        CameraConfig(2, (0.0, 0.0, -1.0), fov_deg, width, height),
        CameraConfig(3, (-c, 0.0, -s), fov_deg, width, height),
    )


def _to_camera(points, drone_pos, cam):
    """World points (N, 3) -> camera coords (N, 3): x right, y up, z depth."""
    rel = np.atleast_2d(np.asarray(points, float)) - np.asarray(drone_pos, float)
    return rel @ cam.basis().T


def _to_pixels(cam_pts, cam):
    """Camera coords -> continuous pixel coords (x right, y down), unclipped."""
    f = cam.focal_px
    z = cam_pts[:, 2]
    px = cam.width / 2.0 + f * cam_pts[:, 0] / z
    py = cam.height / 2.0 - f * cam_pts[:, 1] / z
    return np.stack([px, py], axis=1)


def project(point, drone_pos, cam):
    """Pixel (x, y) of a world point, or None if behind or out of frame."""
    cpt = _to_camera(point, drone_pos, cam)
    if cpt[0, 2] <= 1e-9:
        return None
    px, py = _to_pixels(cpt, cam)[0]
    if not (0.0 <= px < cam.width and 0.0 <= py < cam.height):
        return None
    return float(px), float(py)


def select_camera(drone_pos, bs, cameras):
    """Lowest-index camera whose frame contains the basestation mount."""
    for cam in sorted(cameras, key=lambda c: c.mount_index):
        if project(bs.position_vector, drone_pos, cam) is not None:
            return cam
    raise VisibilityError(
        f"basestation {bs.id} not visible from {tuple(np.round(drone_pos, 2))}")


def _convex_hull(pts):
    """Monotone-chain hull, CCW, of (N, 2) points."""
    pts = sorted(map(tuple, pts))
    if len(pts) <= 2:
        return np.asarray(pts, float)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) > 0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.asarray(lower[:-1] + upper[:-1], float)


def _fill_hull(frame, hull, color):
    """Paint the convex polygon onto the frame via half-plane tests."""
    H, W = frame.shape[:2]
    xmin = max(int(math.floor(hull[:, 0].min())), 0)
    xmax = min(int(math.ceil(hull[:, 0].max())), W - 1)
    ymin = max(int(math.floor(hull[:, 1].min())), 0)
    ymax = min(int(math.ceil(hull[:, 1].max())), H - 1)
    if xmin > xmax or ymin > ymax:
        return
    xs = np.arange(xmin, xmax + 1) + 0.5
    ys = np.arange(ymin, ymax + 1) + 0.5
    X, Y = np.meshgrid(xs, ys)
    inside = np.ones(X.shape, bool)
    n = len(hull)
    for i in range(n):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % n]
        inside &= (bx - ax) * (Y - ay) - (by - ay) * (X - ax) >= 0.0
    frame[ymin:ymax + 1, xmin:xmax + 1][inside] = color


def _fill_square(frame, center, half_px, color):
    H, W = frame.shape[:2]
    x0 = max(int(math.floor(center[0] - half_px)), 0)
    x1 = min(int(math.ceil(center[0] + half_px)), W)
    y0 = max(int(math.floor(center[1] - half_px)), 0)
    y1 = min(int(math.ceil(center[1] + half_px)), H)
    if x0 < x1 and y0 < y1:
        frame[y0:y1, x0:x1] = color


def _background(cam):
    """Per-pixel sky/ground shading from ray directions alone."""
    H, W = cam.height, cam.width
    xs = np.arange(W) + 0.5 - W / 2.0
    ys = H / 2.0 - (np.arange(H) + 0.5)
    X, Y = np.meshgrid(xs, ys)
    right, up, fwd = cam.basis()
    dirs = (X[..., None] * right + Y[..., None] * up + cam.focal_px * fwd)
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    el = dirs[..., 2]
    sun = np.clip(dirs[..., 0], 0.0, 1.0) ** 2

    frame = np.empty((H, W, 3))
    sky = el >= 0.0
    t = np.clip(el, 0.0, 1.0)[..., None]
    frame[:] = SKY_HORIZON * (1 - t) + SKY_ZENITH * t + sun[..., None] * SUN_TINT
    tg = (1.0 + np.clip(el, -1.0, 0.0))[..., None]  # 1 at horizon, 0 at nadir
    ground = (GROUND_NEAR * (1 - tg) + GROUND_FAR * tg
              + sun[..., None] * GROUND_SUN_TINT)
    frame[~sky] = ground[~sky]
    return frame


_CORNER_SEL = np.array([[(i >> 2) & 1, (i >> 1) & 1, i & 1] for i in range(8)])


def _box_corners(lo, hi):
    return np.where(_CORNER_SEL.astype(bool), hi, lo)


def render_frame(scene_objects, drone_pos, cam, marker_min_px=3.0):
    """Rasterize posed boxes into an (H, W, 3) float image in [0, 1].

    Boxes are painted far to near by center distance; basestation markers go
    on top afterwards and are inflated to marker_min_px on screen when their
    true projection would be smaller.
    """
    frame = _background(cam)
    drone = np.asarray(drone_pos, float)

    boxes = [o for o in scene_objects if o.kind != "basestation_marker"]
    markers = [o for o in scene_objects if o.kind == "basestation_marker"]

    def center_dist(o):
        return float(np.linalg.norm(0.5 * (o.box_min + o.box_max) - drone))

    for obj in sorted(boxes, key=center_dist, reverse=True):
        cpts = _to_camera(_box_corners(obj.box_min, obj.box_max), drone, cam)
        if np.any(cpts[:, 2] <= 1e-6):
            continue
        hull = _convex_hull(_to_pixels(cpts, cam))
        if len(hull) >= 3:
            _fill_hull(frame, hull, np.asarray(obj.color))

    for obj in sorted(markers, key=center_dist, reverse=True):
        cpts = _to_camera(_box_corners(obj.box_min, obj.box_max), drone, cam)
        if np.any(cpts[:, 2] <= 1e-6):
            continue
        pix = _to_pixels(cpts, cam)
        hull = _convex_hull(pix)
        color = np.asarray(obj.color)
        spans = pix.max(axis=0) - pix.min(axis=0)
        if spans.max() < marker_min_px:
            _fill_square(frame, pix.mean(axis=0), marker_min_px / 2.0, color)
        elif len(hull) >= 3:
            _fill_hull(frame, hull, color)

    return np.clip(frame, 0.0, 1.0)
