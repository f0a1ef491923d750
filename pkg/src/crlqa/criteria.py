"""The seven CRL image-quality criteria and the acceptance rule.

Each ``eval_*`` function is a small pure predicate; :func:`score_image` runs
the geometry pipeline once and assembles a :class:`ScoreCard`.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CrlqaError, Unevaluable
from .geometry import Measurement, measure
from .mask_io import PALATE, FaceExpectation, ImageMeta, LabelMask, UltrasoundFrame

CRITERIA = (
    "c1_neutral",
    "c2_horizontal",
    "c3_midsagittal",
    "c4_magnification",
    "c5_left_caliper",
    "c6_right_caliper",
    "c7_face",
)
ACCEPT_MIN_SCORE = 4


@dataclass(frozen=True)
class CriteriaConfig:
    horizontal_limit_deg: float = 15.0
    neutral_low_deg: float = 144.64
    neutral_high_deg: float = 162.88
    magnification_threshold: float = 0.60
    palate_min_pixels: int = 5
    caliper_box_w: int = 10
    caliper_box_h: int = 5
    caliper_black_max_intensity: int = 0

    def __post_init__(self):
        for name in (
            "horizontal_limit_deg",
            "neutral_low_deg",
            "neutral_high_deg",
            "magnification_threshold",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("palate_min_pixels", "caliper_box_w", "caliper_box_h"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer")
            object.__setattr__(self, name, int(value))
        if not self.neutral_low_deg < self.neutral_high_deg:
            raise ValueError("neutral_low_deg must be below neutral_high_deg")
        black = self.caliper_black_max_intensity
        if isinstance(black, bool) or int(black) != black or not 0 <= black <= 255:
            raise ValueError("caliper_black_max_intensity must be an 8-bit value")
        object.__setattr__(self, "caliper_black_max_intensity", int(black))

    @classmethod
    def from_dict(cls, raw: dict) -> "CriteriaConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "CriteriaConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ScoreCard:
    image_id: str
    c1_neutral: bool
    c2_horizontal: bool
    c3_midsagittal: bool
    c4_magnification: bool
    c5_left_caliper: Optional[bool]
    c6_right_caliper: Optional[bool]
    c7_face: bool
    crl_px: float
    crl_mm: Optional[float]
    alpha_deg: float
    beta_deg: float
    magnification_fraction: float
    face_tag: str
    flags: tuple = ()
    score: int = field(init=False)
    acceptable: bool = field(init=False)

    def __post_init__(self):
        score = sum(bool(getattr(self, name)) for name in CRITERIA)
        object.__setattr__(self, "score", score)
        object.__setattr__(self, "acceptable", is_acceptable(score))

    def criteria(self) -> tuple:
        return tuple(getattr(self, name) for name in CRITERIA)


@dataclass(frozen=True)
class ScoreFailure:
    """Per-image record for images the geometry pipeline could not score."""

    image_id: str
    error: str
    message: str


def is_acceptable(score: int) -> bool:
    return score >= ACCEPT_MIN_SCORE


def eval_neutral(beta_deg: float, cfg: CriteriaConfig) -> bool:
    return cfg.neutral_low_deg <= beta_deg <= cfg.neutral_high_deg


def eval_horizontal(alpha_deg: float, cfg: CriteriaConfig) -> bool:
    return abs(alpha_deg) <= cfg.horizontal_limit_deg


def eval_midsagittal(mask: LabelMask, cfg: CriteriaConfig) -> bool:
    return mask.count(PALATE) >= cfg.palate_min_pixels


def eval_magnification(crown_A, rump_B, image_width: int, cfg: CriteriaConfig):
    """Horizontal CRL projection as a fraction of the image width.

    Returns:
        ``(passes, fraction)``; passes only when the fraction is strictly
        above the threshold.
    """
    if image_width < 1:
        raise ValueError("image_width must be at least 1")
    fraction = abs(float(crown_A[0]) - float(rump_B[0])) / float(image_width)
    return fraction > cfg.magnification_threshold, fraction


def caliper_box(endpoint, outward_dir, cfg: CriteriaConfig):
    """Pixel bounds ``(x0, x1, y0, y1)`` (half-open) of the caliper box.

    The box is ``caliper_box_w`` wide and ``caliper_box_h`` tall, centred
    vertically on the endpoint row. Its nearest column is 1 px beyond the
    endpoint on the side where the CRL leaves the fetus. A vertical CRL has
    no horizontal component; the box then opens to the right.
    """
    x, y = int(round(float(endpoint[0]))), int(round(float(endpoint[1])))
    step = -1 if float(outward_dir[0]) < 0 else 1
    if step > 0:
        x0 = x + 1
    else:
        x0 = x - cfg.caliper_box_w
    y0 = y - (cfg.caliper_box_h - 1) // 2
    return x0, x0 + cfg.caliper_box_w, y0, y0 + cfg.caliper_box_h


def eval_caliper_visibility(endpoint, outward_dir, frame, cfg: CriteriaConfig) -> bool:
    """True when more than half of the in-image box pixels are black.

    Raises:
        Unevaluable: no frame, or the box lies entirely outside the image.
    """
    if frame is None:
        raise Unevaluable("no frame to inspect")
    x0, x1, y0, y1 = caliper_box(endpoint, outward_dir, cfg)
    grid = frame.intensity
    cx0, cx1 = max(x0, 0), min(x1, grid.shape[1])
    cy0, cy1 = max(y0, 0), min(y1, grid.shape[0])
    if cx0 >= cx1 or cy0 >= cy1:
        raise Unevaluable("caliper box falls outside the image")
    patch = grid[cy0:cy1, cx0:cx1]
    black = int(np.count_nonzero(patch <= cfg.caliper_black_max_intensity))
    return 2 * black > patch.size


def face_tag(sign: int) -> str:
    return {-1: "up", 1: "down", 0: "on_line"}[int(sign)]


def eval_face(sign: int, expected_face) -> tuple[bool, str]:
    tag = face_tag(sign)
    expected = FaceExpectation(expected_face)
    if expected is FaceExpectation.EITHER:
        return True, tag
    return tag == expected.value, tag


def _caliper(endpoint, outward, frame, cfg, side: str, flags: list):
    try:
        return eval_caliper_visibility(endpoint, outward, frame, cfg)
    except Unevaluable as exc:
        flags.append(f"{side}_caliper_unevaluable: {exc}")
        return False


def score_measurement(
    measurement: Measurement,
    mask: LabelMask,
    frame: Optional[UltrasoundFrame],
    meta: ImageMeta,
    cfg: CriteriaConfig,
) -> ScoreCard:
    """Score an image whose geometry has already been measured."""
    lm = measurement.landmarks
    a = np.asarray(lm.crown_A, dtype=float)
    b = np.asarray(lm.rump_B, dtype=float)
    mag_ok, fraction = eval_magnification(a, b, mask.width, cfg)

    # Left caliper is the endpoint with smaller x; outward points away from the other end.
    if a[0] <= b[0]:
        left, right = a, b
    else:
        left, right = b, a
    flags: list = []
    c5 = _caliper(left, left - right, frame, cfg, "left", flags)
    c6 = _caliper(right, right - left, frame, cfg, "right", flags)
    face_ok, tag = eval_face(lm.face_sign, meta.expected_face)

    crl_mm = None
    if meta.pixel_spacing_mm is not None:
        crl_mm = lm.crl_px * meta.pixel_spacing_mm
    return ScoreCard(
        image_id=meta.image_id,
        c1_neutral=eval_neutral(lm.beta_deg, cfg),
        c2_horizontal=eval_horizontal(lm.alpha_deg, cfg),
        c3_midsagittal=eval_midsagittal(mask, cfg),
        c4_magnification=mag_ok,
        c5_left_caliper=c5,
        c6_right_caliper=c6,
        c7_face=face_ok,
        crl_px=lm.crl_px,
        crl_mm=crl_mm,
        alpha_deg=lm.alpha_deg,
        beta_deg=lm.beta_deg,
        magnification_fraction=fraction,
        face_tag=tag,
        flags=tuple(flags),
    )


def score_image(
    mask: LabelMask,
    frame: Optional[UltrasoundFrame],
    meta: ImageMeta,
    cfg: Optional[CriteriaConfig] = None,
) -> ScoreCard:
    """Run the geometry pipeline and evaluate all seven criteria.

    Raises:
        MissingStructure, NoJunction, DegenerateGeometry: the mask cannot be
            measured. Batch callers should use :func:`try_score_image`.
    """
    cfg = cfg or CriteriaConfig()
    return score_measurement(measure(mask), mask, frame, meta, cfg)


def try_score_image(mask, frame, meta, cfg=None):
    """Like :func:`score_image`, but geometry errors become a :class:`ScoreFailure`."""
    try:
        return score_image(mask, frame, meta, cfg)
    except CrlqaError as exc:
        return ScoreFailure(meta.image_id, type(exc).__name__, str(exc))
