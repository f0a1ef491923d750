"""Synthetic two-ellipse fetus phantoms with analytically known landmarks.

The head is the part of a disc on one side of a straight neck line; the body
is the part of an ellipse on the other side. The junction is the midpoint of
the segment where both shapes meet the neck line. The bend between head and
body is solved numerically so that the true (continuous) crown-rump diameter
and the junction subtend the requested flexion angle; the figure is then
mirrored for face orientation, rotated to the requested CRL tilt, scaled so
the horizontal crown-rump projection equals ``span_fraction * width``, and
rasterized by pixel-center inclusion.

Head and body sizes in :class:`PhantomSpec` fix the figure's proportions;
its absolute size is set by ``span_fraction``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import GeometryInfeasible
from .mask_io import BODY, HEAD, PALATE, ImageMeta, LabelMask, UltrasoundFrame

# Neck layout: head and body centre offsets as fractions of the head radius
# and body semi-major axis; the body slides sideways by BODY_SHIFT semi-minor
# axes per right angle of bend, which keeps the neck on the dorsal side.
HEAD_OFFSET = 0.85
BODY_OFFSET = 0.75
BODY_SHIFT = -0.7
SHIFT_SPAN = math.radians(120.0)
MIN_CONTACT = 0.12  # shortest usable neck, in head radii
PALATE_RADIUS = 0.18
PALATE_SHIFT = 0.25

EDGE_MARGIN_PX = 2.0


@dataclass(frozen=True)
class PhantomSpec:
    width: int = 512
    height: int = 384
    head_radius: float = 50.0
    body_semi_major: float = 90.0
    body_semi_minor: float = 32.0
    beta_target_deg: float = 153.0
    alpha_target_deg: float = 0.0
    span_fraction: float = 0.7
    palate: bool = True
    face: str = "up"
    margin_intensity: int = 0
    body_intensity: int = 180
    noise_amplitude: int = 0
    pixel_spacing_mm: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryInfeasible("image dimensions must be positive")
        if min(self.head_radius, self.body_semi_major, self.body_semi_minor) <= 0:
            raise GeometryInfeasible("head and body sizes must be positive")
        if self.body_semi_minor > self.body_semi_major:
            raise GeometryInfeasible("body_semi_minor must not exceed body_semi_major")
        if not 60.0 < self.beta_target_deg <= 180.0:
            raise GeometryInfeasible(f"beta_target_deg {self.beta_target_deg} not in (60, 180]")
        if not -45.0 < self.alpha_target_deg < 45.0:
            raise GeometryInfeasible(f"alpha_target_deg {self.alpha_target_deg} not in (-45, 45)")
        if not 0.0 < self.span_fraction <= 1.0:
            raise GeometryInfeasible(f"span_fraction {self.span_fraction} not in (0, 1]")
        if self.face not in ("up", "down"):
            raise GeometryInfeasible(f"face must be 'up' or 'down', got {self.face!r}")
        for name in ("margin_intensity", "body_intensity"):
            if not 0 <= getattr(self, name) <= 255:
                raise GeometryInfeasible(f"{name} must be an 8-bit value")

    def replace(self, **changes) -> "PhantomSpec":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class GroundTruth:
    crown_A: tuple[float, float]
    rump_B: tuple[float, float]
    junction_C: tuple[float, float]
    alpha_deg: float
    beta_deg: float
    crl_px: float
    span_px: float
    face_sign: int
    palate: bool
    head_center: tuple[float, float]
    head_radius_px: float


def _unit(v):
    return v / np.hypot(*v)


def _angle_at(c, p, q) -> float:
    u, v = p - c, q - c
    cos = float(np.dot(u, v) / (np.hypot(*u) * np.hypot(*v)))
    return math.degrees(math.acos(min(1.0, max(-1.0, cos))))


def _interval(qa: float, qb: float, qc: float):
    disc = qb * qb - 4.0 * qa * qc
    if disc <= 0.0:
        return None
    root = math.sqrt(disc)
    return (-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)


class _Layout:
    """Unscaled figure in a local frame: neck line through the origin, body along +x.

    The head is the part of the disc on the head side of the neck line, the body
    the part of the ellipse on the other side. The junction is the midpoint of
    the segment where both shapes meet the neck line.
    """

    def __init__(self, bend: float, r: float, a: float, b: float):
        self.r, self.a, self.b = r, a, b
        self.u_body = np.array([1.0, 0.0])
        self.v_body = np.array([0.0, -1.0])
        u_head = np.array([math.cos(bend), -math.sin(bend)])
        shift = BODY_SHIFT * min(1.0, (math.pi - bend) / SHIFT_SPAN)
        self.head = HEAD_OFFSET * r * u_head
        self.body = BODY_OFFSET * a * self.u_body + shift * b * self.v_body
        self.split = _unit(u_head - self.u_body)  # head side: p . split > 0
        self.valid = False

        t = np.array([-self.split[1], self.split[0]])
        head_chord = _interval(1.0, -2.0 * float(t @ self.head), float(self.head @ self.head) - r * r)
        tu, tv = float(t @ self.u_body) / a, float(t @ self.v_body) / b
        cu, cv = -float(self.body @ self.u_body) / a, -float(self.body @ self.v_body) / b
        body_chord = _interval(tu * tu + tv * tv, 2.0 * (tu * cu + tv * cv), cu * cu + cv * cv - 1.0)
        if head_chord is None or body_chord is None:
            return
        lo, hi = max(head_chord[0], body_chord[0]), min(head_chord[1], body_chord[1])
        if hi - lo < MIN_CONTACT * r:
            return
        self.contact = hi - lo
        self.junction = 0.5 * (lo + hi) * t
        self.head_corners = [s * t for s in head_chord]
        body_corners = [s * t for s in body_chord]

        # Kept body arc, as an ellipse-parameter interval not crossing the neck line.
        grid = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
        kept = self.split @ self._ellipse_point(grid) <= 0.0
        if kept.all() or not kept.any():
            return
        # A line cuts a convex outline once, so the kept arc is one run.
        order = np.roll(np.arange(grid.size), -int(np.argmin(kept)))
        grid_k = np.unwrap(grid[order][kept[order]])
        q = self._ellipse_point(grid_k)

        cand = np.concatenate([q, np.array(body_corners).T], axis=1)
        reach = self._head_reach(cand)
        best = int(np.argmax(reach))
        if best < grid_k.size:
            step = grid[1] - grid[0]
            lo_t = max(grid_k[0], grid_k[best] - step)
            hi_t = min(grid_k[-1], grid_k[best] + step)
            res = optimize.minimize_scalar(
                lambda s: -float(self._head_reach(self._ellipse_point(np.array([s])))[0]),
                bounds=(lo_t, hi_t), method="bounded", options={"xatol": 1e-12},
            )
            rump = self._ellipse_point(np.array([res.x]))[:, 0]
            if -res.fun < reach[best]:
                rump = cand[:, best]
        else:
            rump = cand[:, best]
        self.rump = rump
        self.crown = self._farthest_head_point(rump)
        self.crl = float(np.hypot(*(self.crown - self.rump)))
        if self.crl <= max(2.0 * r, 2.0 * a) + 1e-9:
            return
        self.beta = _angle_at(self.junction, self.crown, self.rump)
        self.valid = True

    def _ellipse_point(self, s):
        s = np.asarray(s, dtype=float)
        return (
            self.body[:, None]
            + self.a * np.cos(s) * self.u_body[:, None]
            + self.b * np.sin(s) * self.v_body[:, None]
        )

    def _head_reach(self, q):
        """Largest distance from each column of ``q`` to the kept head part."""
        d = q - self.head[:, None]
        dist = np.hypot(d[0], d[1])
        anti = self.head[:, None] - self.r * d / dist
        on_arc = self.split @ anti > 0.0
        corner = np.max([np.hypot(*(q - c[:, None])) for c in self.head_corners], axis=0)
        return np.where(on_arc, dist + self.r, corner)

    def _farthest_head_point(self, q):
        d = q - self.head
        anti = self.head - self.r * d / np.hypot(*d)
        if self.split @ anti > 0.0:
            return anti
        return max(self.head_corners, key=lambda c: np.hypot(*(q - c)))


def _solve_bend(spec: PhantomSpec) -> _Layout:
    r, a, b = spec.head_radius, spec.body_semi_major, spec.body_semi_minor
    straight = _Layout(math.pi, r, a, b)
    if not straight.valid:
        raise GeometryInfeasible("head and body proportions give no usable straight pose")
    target = spec.beta_target_deg
    if target >= 180.0:
        return straight

    def gap(bend):
        layout = _Layout(bend, r, a, b)
        return layout.beta - target

    # Walk the bend down from straight until beta passes the target.
    hi, prev = math.pi, straight.beta
    for bend_deg in np.arange(175.0, 29.0, -5.0):
        lo = math.radians(bend_deg)
        layout = _Layout(lo, r, a, b)
        if not layout.valid or layout.beta > prev:
            break
        if layout.beta <= target:
            bend = optimize.brentq(gap, lo, hi, xtol=1e-13, rtol=1e-13, maxiter=200)
            return _Layout(bend, r, a, b)
        hi, prev = lo, layout.beta
    raise GeometryInfeasible(f"flexion angle {target} deg is not reachable with these proportions")


@dataclass
class _Pose:
    """Figure mirrored, rotated and scaled, before placement in the image."""

    layout: _Layout
    points: dict
    u_body: np.ndarray
    split: np.ndarray
    r: float
    a: float
    b: float
    scale: float
    lo: np.ndarray
    hi: np.ndarray


def _pose(spec: PhantomSpec) -> _Pose:
    layout = _solve_bend(spec)
    flip = np.array([1.0, 1.0 if spec.face == "up" else -1.0])
    pts = {
        "head": layout.head * flip,
        "body": layout.body * flip,
        "crown": layout.crown * flip,
        "rump": layout.rump * flip,
        "junction": layout.junction * flip,
    }
    ab = pts["rump"] - pts["crown"]
    rho = math.radians(spec.alpha_target_deg) - math.atan2(ab[1], ab[0])
    rot = np.array([[math.cos(rho), -math.sin(rho)], [math.sin(rho), math.cos(rho)]])
    pts = {k: rot @ v for k, v in pts.items()}
    u_body = rot @ (layout.u_body * flip)
    split = rot @ (layout.split * flip)

    scale = spec.span_fraction * spec.width / abs(pts["rump"][0] - pts["crown"][0])
    pts = {k: v * scale for k, v in pts.items()}
    r, a, b = layout.r * scale, layout.a * scale, layout.b * scale

    psi = math.atan2(u_body[1], u_body[0])
    ex = math.hypot(a * math.cos(psi), b * math.sin(psi))
    ey = math.hypot(a * math.sin(psi), b * math.cos(psi))
    lo = np.minimum(pts["head"] - r, pts["body"] - [ex, ey])
    hi = np.maximum(pts["head"] + r, pts["body"] + [ex, ey])
    need = hi - lo + 2 * EDGE_MARGIN_PX
    if np.any(need > np.array([spec.width - 1.0, spec.height - 1.0])):
        raise GeometryInfeasible(
            f"figure needs {need[0]:.1f}x{need[1]:.1f} px, image is {spec.width}x{spec.height}"
        )
    return _Pose(layout, pts, u_body, split, r, a, b, scale, lo, hi)


def render(spec: PhantomSpec, image_id: str = "phantom"):
    """Rasterize a phantom.

    Returns:
        ``(LabelMask, UltrasoundFrame, ImageMeta, GroundTruth)``

    Raises:
        GeometryInfeasible: the requested pose cannot be built or does not fit.
    """
    pose = _pose(spec)
    rng = np.random.default_rng(spec.seed)
    r, a, b, u_body, split = pose.r, pose.a, pose.b, pose.u_body, pose.split

    room = np.array([spec.width - 1.0, spec.height - 1.0]) - 2 * EDGE_MARGIN_PX - (pose.hi - pose.lo)
    shift = EDGE_MARGIN_PX - pose.lo + room * rng.uniform(0.3, 0.7, size=2)
    pts = {k: v + shift for k, v in pose.points.items()}

    # Only the figure's bounding window needs testing.
    x0, y0 = np.floor(pose.lo + shift).astype(int) - 1
    x1, y1 = np.ceil(pose.hi + shift).astype(int) + 2
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, spec.width), min(y1, spec.height)
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(float)
    hx, hy = pts["head"]
    in_head = (xs - hx) ** 2 + (ys - hy) ** 2 <= r * r
    bx, by = xs - pts["body"][0], ys - pts["body"][1]
    along = bx * u_body[0] + by * u_body[1]
    across = -bx * u_body[1] + by * u_body[0]
    in_body = (along / a) ** 2 + (across / b) ** 2 <= 1.0
    jx, jy = pts["junction"]
    head_side = (xs - jx) * split[0] + (ys - jy) * split[1] > 0

    window = np.zeros(xs.shape, dtype=np.uint8)
    window[in_head & head_side] = HEAD
    window[in_body & ~head_side] = BODY
    if spec.palate:
        toward_crown = _unit(pts["crown"] - pts["head"])
        px, py = pts["head"] + PALATE_SHIFT * r * toward_crown
        pr = max(PALATE_RADIUS * r, 1.5)
        window[((xs - px) ** 2 + (ys - py) ** 2 <= pr * pr) & (window == HEAD)] = PALATE
    labels = np.zeros((spec.height, spec.width), dtype=np.uint8)
    labels[y0:y1, x0:x1] = window

    intensity = np.full(labels.shape, spec.margin_intensity, dtype=np.int16)
    inside = labels > 0
    tissue = np.full(int(inside.sum()), spec.body_intensity, dtype=np.int16)
    if spec.noise_amplitude:
        amp = int(spec.noise_amplitude)
        tissue = tissue + rng.integers(-amp, amp + 1, size=tissue.shape)
    # Tissue never reads as black, whatever the noise does.
    intensity[inside] = np.clip(tissue, 1, 255)

    crown = tuple(float(v) for v in pts["crown"])
    rump = tuple(float(v) for v in pts["rump"])
    truth = GroundTruth(
        crown_A=crown,
        rump_B=rump,
        junction_C=tuple(float(v) for v in pts["junction"]),
        alpha_deg=float(spec.alpha_target_deg),
        beta_deg=float(pose.layout.beta),
        crl_px=float(pose.layout.crl * pose.scale),
        span_px=float(spec.span_fraction * spec.width),
        face_sign=-1 if spec.face == "up" else 1,
        palate=spec.palate,
        head_center=tuple(float(v) for v in pts["head"]),
        head_radius_px=float(r),
    )
    meta = ImageMeta(image_id=image_id, pixel_spacing_mm=spec.pixel_spacing_mm)
    return LabelMask(labels), UltrasoundFrame(intensity.astype(np.uint8)), meta, truth


def sweep(base: PhantomSpec, parameter: str, values) -> list[PhantomSpec]:
    """Copies of ``base`` with one field set to each of ``values``, in order."""
    names = {f.name for f in dataclasses.fields(PhantomSpec)}
    if parameter not in names:
        raise ValueError(f"{parameter!r} is not a PhantomSpec field")
    return [base.replace(**{parameter: v}) for v in values]


def random_spec(rng: np.random.Generator, width: int = 512, height: int = 384, **fixed) -> PhantomSpec:
    """Draw a feasible phantom pose; explicit keyword values are kept as given."""
    for _ in range(1000):
        params = dict(
            width=width,
            height=height,
            head_radius=float(rng.uniform(42.0, 55.0)),
            body_semi_major=float(rng.uniform(80.0, 100.0)),
            body_semi_minor=float(rng.uniform(28.0, 38.0)),
            beta_target_deg=float(rng.uniform(125.0, 180.0)),
            alpha_target_deg=float(rng.uniform(-35.0, 35.0)),
            span_fraction=float(rng.uniform(0.45, 0.85)),
            palate=bool(rng.random() < 0.6),
            face=str(rng.choice(["up", "down"])),
            seed=int(rng.integers(0, 2**31 - 1)),
        )
        params.update(fixed)
        spec = PhantomSpec(**params)
        try:
            _pose(spec)
        except GeometryInfeasible:
            if fixed.keys() >= {"beta_target_deg", "alpha_target_deg", "span_fraction"}:
                raise
            continue
        return spec
    raise GeometryInfeasible("could not draw a feasible phantom")
