"""Loading, validation and on-disk formats for masks, frames and metadata.

A case is up to three files sharing a stem inside one directory::

    <id>.mask.png   single-channel 8-bit PNG, pixel value = label code
    <id>.frame.png  single-channel 8-bit PNG, grayscale ultrasound frame
    <id>.meta.json  optional metadata sidecar

Label codes: 0 background, 1 head, 2 body, 3 palate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, LabelError

BACKGROUND, HEAD, BODY, PALATE = 0, 1, 2, 3
VALID_LABELS = (BACKGROUND, HEAD, BODY, PALATE)

MASK_SUFFIX = ".mask.png"
FRAME_SUFFIX = ".frame.png"
META_SUFFIX = ".meta.json"


class FaceExpectation(str, Enum):
    UP = "up"
    DOWN = "down"
    EITHER = "either"


def _frozen_grid(values, name: str) -> np.ndarray:
    grid = np.array(values, copy=True)
    if grid.ndim != 2:
        raise ValueError(f"{name} must be a 2-D grid, got shape {grid.shape}")
    if grid.shape[0] < 1 or grid.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1")
    grid.setflags(write=False)
    return grid


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Integer label grid indexed ``labels[y, x]``."""

    labels: np.ndarray

    def __post_init__(self):
        grid = _frozen_grid(self.labels, "mask")
        if grid.dtype.kind not in "iub":
            raise LabelError(f"mask must hold integer labels, got dtype {grid.dtype}")
        bad = ~np.isin(grid, VALID_LABELS)
        if bad.any():
            y, x = np.argwhere(bad)[0]
            raise LabelError(
                f"label {int(grid[y, x])} at (x={x}, y={y}) is outside {{0,1,2,3}}"
            )
        grid = grid.astype(np.uint8)
        grid.setflags(write=False)
        object.__setattr__(self, "labels", grid)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def region(self, label: int) -> np.ndarray:
        return self.labels == label

    def count(self, label: int) -> int:
        return int(np.count_nonzero(self.labels == label))

    def __eq__(self, other):
        if not isinstance(other, LabelMask):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class UltrasoundFrame:
    """8-bit grayscale intensities indexed ``intensity[y, x]``."""

    intensity: np.ndarray

    def __post_init__(self):
        grid = _frozen_grid(self.intensity, "frame")
        if grid.dtype.kind not in "iu" or grid.min() < 0 or grid.max() > 255:
            raise DecodeError("frame intensities must be integers in [0, 255]")
        grid = grid.astype(np.uint8)
        grid.setflags(write=False)
        object.__setattr__(self, "intensity", grid)

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def height(self) -> int:
        return self.intensity.shape[0]

    def __eq__(self, other):
        if not isinstance(other, UltrasoundFrame):
            return NotImplemented
        return np.array_equal(self.intensity, other.intensity)

    __hash__ = None


@dataclass(frozen=True)
class ImageMeta:
    image_id: str
    pixel_spacing_mm: Optional[float] = None
    expected_face: FaceExpectation = FaceExpectation.EITHER

    def __post_init__(self):
        if self.pixel_spacing_mm is not None:
            spacing = float(self.pixel_spacing_mm)
            if not spacing > 0:
                raise ValueError(f"pixel_spacing_mm must be > 0, got {spacing}")
            object.__setattr__(self, "pixel_spacing_mm", spacing)
        object.__setattr__(self, "expected_face", FaceExpectation(self.expected_face))

    def to_dict(self) -> dict:
        out = {"image_id": self.image_id}
        if self.pixel_spacing_mm is not None:
            out["pixel_spacing_mm"] = self.pixel_spacing_mm
        out["expected_face"] = self.expected_face.value
        return out


def _read_gray8(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode != "L":
                raise DecodeError(
                    f"{path}: expected single-channel 8-bit image, got mode {mode!r}"
                )
            return np.asarray(img, dtype=np.uint8).copy()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"{path}: cannot decode image ({exc})") from exc


def _write_gray8(grid: np.ndarray, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(grid, dtype=np.uint8)).save(path)


def load_mask(path) -> LabelMask:
    return LabelMask(_read_gray8(Path(path)))


def save_mask(mask: LabelMask, path) -> None:
    _write_gray8(mask.labels, path)


def load_frame(path) -> UltrasoundFrame:
    return UltrasoundFrame(_read_gray8(Path(path)))


def save_frame(frame: UltrasoundFrame, path) -> None:
    _write_gray8(frame.intensity, path)


def load_meta(path, default_id: str = "") -> ImageMeta:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"{path}: cannot read metadata ({exc})") from exc
    if not isinstance(raw, dict):
        raise DecodeError(f"{path}: metadata must be a JSON object")
    try:
        return ImageMeta(
            image_id=str(raw.get("image_id", default_id)),
            pixel_spacing_mm=raw.get("pixel_spacing_mm"),
            expected_face=raw.get("expected_face", "either"),
        )
    except (TypeError, ValueError) as exc:
        raise DecodeError(f"{path}: invalid metadata ({exc})") from exc


def save_meta(meta: ImageMeta, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(meta.to_dict(), indent=2) + "\n", encoding="utf-8")


def case_id(mask_path) -> str:
    name = Path(mask_path).name
    if name.endswith(MASK_SUFFIX):
        return name[: -len(MASK_SUFFIX)]
    return Path(mask_path).stem


def sibling_paths(mask_path) -> tuple[Path, Path]:
    """Return the conventional frame and meta paths next to a mask file."""
    mask_path = Path(mask_path)
    stem = case_id(mask_path)
    return (
        mask_path.with_name(stem + FRAME_SUFFIX),
        mask_path.with_name(stem + META_SUFFIX),
    )


def load_case(mask_path, frame_path=None, meta_path=None):
    """Load and cross-validate one case.

    Missing metadata falls back to defaults (no spacing, either face).
    A missing frame is allowed; the caliper criteria are then unevaluable.

    Returns:
        ``(LabelMask, UltrasoundFrame | None, ImageMeta)``

    Raises:
        DecodeError: a file is malformed or not single-channel 8-bit.
        LabelError: the mask holds a value outside {0, 1, 2, 3}.
        DimensionMismatch: frame and mask sizes differ.
    """
    mask_path = Path(mask_path)
    if not mask_path.is_file():
        raise DecodeError(f"{mask_path}: mask file not found")
    mask = load_mask(mask_path)

    frame = None
    if frame_path is not None:
        frame = load_frame(frame_path)
        if (frame.width, frame.height) != (mask.width, mask.height):
            raise DimensionMismatch(
                f"frame is {frame.width}x{frame.height}, "
                f"mask is {mask.width}x{mask.height}"
            )

    stem = case_id(mask_path)
    if meta_path is not None:
        meta = load_meta(meta_path, default_id=stem)
    else:
        meta = ImageMeta(image_id=stem)
    return mask, frame, meta


def load_case_by_stem(mask_path):
    """Like :func:`load_case` but picks up sibling frame/meta files if present."""
    frame_path, meta_path = sibling_paths(mask_path)
    return load_case(
        mask_path,
        frame_path if frame_path.is_file() else None,
        meta_path if meta_path.is_file() else None,
    )


def save_case(directory, meta: ImageMeta, mask: LabelMask, frame=None) -> Path:
    """Write a case with the conventional naming; returns the mask path."""
    directory = Path(directory)
    mask_path = directory / (meta.image_id + MASK_SUFFIX)
    save_mask(mask, mask_path)
    if frame is not None:
        save_frame(frame, directory / (meta.image_id + FRAME_SUFFIX))
    save_meta(meta, directory / (meta.image_id + META_SUFFIX))
    return mask_path


def find_cases(directory) -> list[Path]:
    return sorted(Path(directory).glob("*" + MASK_SUFFIX))
