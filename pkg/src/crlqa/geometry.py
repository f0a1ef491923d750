"""Contours, crown/rump/junction landmarks and the angles derived from them.

Coordinates are ``(x, y)`` in image space: x grows to the right, y grows
downward. Pixel ``(x, y)`` is ``mask.labels[y, x]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateGeometry, MissingStructure, NoJunction
from .mask_io import BODY, HEAD, PALATE, LabelMask

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

# Below this perpendicular distance (px) the junction counts as on the CRL line.
ON_LINE_PX = 0.5

_PAIR_CHUNK = 1024


@dataclass(frozen=True)
class Contour:
    """Outer boundary pixels of one class, sorted by (x, y)."""

    points: np.ndarray  # (N, 2) int64, columns x, y
    class_label: int

    def __len__(self):
        return len(self.points)

    def centroid(self) -> tuple[float, float]:
        cx, cy = self.points.mean(axis=0)
        return float(cx), float(cy)


@dataclass(frozen=True)
class LandmarkSet:
    crown_A: tuple[int, int]
    rump_B: tuple[int, int]
    junction_C: tuple[float, float]
    crl_px: float
    alpha_deg: float
    beta_deg: float
    face_sign: int


@dataclass(frozen=True)
class Measurement:
    """Everything the geometry pipeline extracts from one mask."""

    landmarks: LandmarkSet
    contours: dict  # class label -> Contour
    borderline: np.ndarray  # (M, 2) head pixels touching the body


def _sorted_xy(rows_cols: np.ndarray) -> np.ndarray:
    xy = rows_cols[:, ::-1].astype(np.int64)
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    return xy[order]


def _padded_box(region: np.ndarray, pad: int = 1):
    """Slices covering ``region``'s bounding box plus ``pad`` pixels, clipped."""
    ys = np.flatnonzero(region.any(axis=1))
    xs = np.flatnonzero(region.any(axis=0))
    h, w = region.shape
    return (
        slice(max(ys[0] - pad, 0), min(ys[-1] + pad + 1, h)),
        slice(max(xs[0] - pad, 0), min(xs[-1] + pad + 1, w)),
    )


def _dilate_in_box(region: np.ndarray, box) -> np.ndarray:
    return ndimage.binary_dilation(region[box], structure=EIGHT_CONNECTED)


def outer_boundary(region: np.ndarray) -> np.ndarray:
    """Pixels added by a 3x3 dilation of ``region``, as sorted (x, y) points."""
    if not region.any():
        return np.empty((0, 2), dtype=np.int64)
    box = _padded_box(region)
    ring = _dilate_in_box(region, box) & ~region[box]
    offset = np.array([box[0].start, box[1].start])
    return _sorted_xy(np.argwhere(ring) + offset)


def extract_contours(mask: LabelMask) -> list[Contour]:
    """One outer contour per class present, in label order (1, 2, 3).

    Raises:
        MissingStructure: neither head nor body is labeled.
    """
    present = [label for label in (HEAD, BODY, PALATE) if mask.count(label)]
    if HEAD not in present and BODY not in present:
        raise MissingStructure("mask contains neither head (1) nor body (2)")
    return [Contour(outer_boundary(mask.region(label)), label) for label in present]


def _unique_points(points) -> np.ndarray:
    # np.unique sorts rows lexicographically by (x, y).
    return np.unique(np.asarray(points, dtype=np.int64).reshape(-1, 2), axis=0)


def _max_pair_sorted(pts: np.ndarray) -> tuple[int, int, int]:
    """Index pair (i < j) of maximal squared distance among sorted points.

    On ties the first maximal pair in row-major order wins, which is the
    lexicographically smallest pair because ``pts`` is sorted.
    """
    best, best_i, best_j = -1, 0, 0
    # Integer coordinates below 2**24 keep every float64 term below exactly.
    if np.abs(pts).max(initial=0) >= 2**24:
        raise ValueError("coordinates too large for exact pair search")
    xy = pts.astype(np.float64)
    sq = (xy * xy).sum(axis=1)
    cols = np.arange(len(pts))[None, :]
    for start in range(0, len(pts), _PAIR_CHUNK):
        stop = min(start + _PAIR_CHUNK, len(pts))
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (xy[start:stop] @ xy.T)
        d2[cols <= np.arange(start, stop)[:, None]] = -1.0
        local = d2.max()
        if local > best:
            best = int(local)
            i, j = np.argwhere(d2 == local)[0]
            best_i, best_j = start + int(i), int(j)
    return best_i, best_j, best


def convex_hull_vertices(pts: np.ndarray) -> np.ndarray:
    """Strict hull vertices (no collinear points) of lexicographically sorted points.

    Monotone chain in exact integer arithmetic; the result is re-sorted
    lexicographically.
    """
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    rows = [(int(x), int(y)) for x, y in pts]
    lower, upper = [], []
    for p in rows:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(rows):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = sorted(set(lower[:-1] + upper[:-1]))
    return np.array(hull, dtype=np.int64)


def _as_pair(pts, i, j, d2):
    p = (int(pts[i, 0]), int(pts[i, 1]))
    q = (int(pts[j, 0]), int(pts[j, 1]))
    return p, q, d2


def farthest_pair_exhaustive(points) -> tuple[tuple[int, int], tuple[int, int], int]:
    """All-pairs search for the two points with the largest separation.

    Works on integer coordinates so squared distances are exact. Ties go to
    the lexicographically smallest ``(x, y)`` pair, with the first endpoint
    smaller than the second.

    Returns:
        ``(p, q, squared_distance)`` with ``p < q``.
    """
    pts = _unique_points(points)
    if len(pts) == 0:
        raise MissingStructure("no contour points")
    if len(pts) == 1:
        return _as_pair(pts, 0, 0, 0)
    return _as_pair(pts, *_max_pair_sorted(pts))


def farthest_pair(points) -> tuple[tuple[int, int], tuple[int, int], int]:
    """Same result as :func:`farthest_pair_exhaustive`, searched over hull vertices.

    Squared distance is strictly convex along any segment, so every maximal
    pair consists of strict hull vertices; restricting the all-pairs search
    to them keeps the answer and the tie-break identical.
    """
    pts = _unique_points(points)
    if len(pts) == 0:
        raise MissingStructure("no contour points")
    if len(pts) == 1:
        return _as_pair(pts, 0, 0, 0)
    hull = convex_hull_vertices(pts)
    return _as_pair(hull, *_max_pair_sorted(hull))


def _contains(contour: Contour, point) -> bool:
    return bool(np.any(np.all(contour.points == np.asarray(point), axis=1)))


def crl_endpoints(head_contour: Contour, body_contour: Contour):
    """Crown A, rump B and their distance from the merged head+body contour.

    The merged set's farthest pair gives the CRL; the endpoint nearer the head
    contour's centroid becomes the crown.

    Raises:
        MissingStructure: either contour is empty.
        DegenerateGeometry: crown and rump cannot be told apart.
    """
    if len(head_contour) == 0 or len(body_contour) == 0:
        raise MissingStructure("crl_endpoints needs both head and body contours")
    merged = np.concatenate([head_contour.points, body_contour.points])
    p, q, d2 = farthest_pair(merged)
    if d2 == 0:
        raise DegenerateGeometry("contour collapses to a single point")

    head_c = np.array(head_contour.centroid())
    body_c = np.array(body_contour.centroid())
    dp_head = float(np.hypot(*(np.array(p) - head_c)))
    dq_head = float(np.hypot(*(np.array(q) - head_c)))

    for own, other, own_c, other_c in (
        (head_contour, body_contour, head_c, body_c),
        (body_contour, head_contour, body_c, head_c),
    ):
        only_own = all(_contains(own, pt) and not _contains(other, pt) for pt in (p, q))
        leans_other = any(
            np.hypot(*(np.array(pt) - other_c)) < np.hypot(*(np.array(pt) - own_c))
            for pt in (p, q)
        )
        if only_own and not leans_other:
            raise DegenerateGeometry(
                "both CRL endpoints lie on one class contour; crown/rump ambiguous"
            )

    if dp_head == dq_head:
        raise DegenerateGeometry("CRL endpoints are equidistant from the head")
    crown, rump = (p, q) if dp_head < dq_head else (q, p)
    return crown, rump, math.sqrt(d2)


def borderline_pixels(mask: LabelMask) -> np.ndarray:
    """Head pixels 8-adjacent to at least one body pixel, sorted (x, y)."""
    head, body = mask.region(HEAD), mask.region(BODY)
    if not head.any() or not body.any():
        return np.empty((0, 2), dtype=np.int64)
    box = _padded_box(body)
    touching = _dilate_in_box(body, box) & head[box]
    offset = np.array([box[0].start, box[1].start])
    return _sorted_xy(np.argwhere(touching) + offset)


def junction_midpoint(mask: LabelMask) -> tuple[float, float]:
    """Centroid of the head/body borderline.

    Raises:
        NoJunction: head and body never touch.
    """
    border = borderline_pixels(mask)
    if len(border) == 0:
        raise NoJunction("head and body regions share no 8-adjacent pixels")
    cx, cy = border.mean(axis=0)
    return float(cx), float(cy)


def horizontal_angle(crown_A, rump_B) -> float:
    """Angle of line AB against the x axis, folded into (-90, 90] degrees.

    Positive slopes downward on screen (y grows down), so ``(0,0)->(10,10)``
    is +45.
    """
    dx = rump_B[0] - crown_A[0]
    dy = rump_B[1] - crown_A[1]
    if dx == 0 and dy == 0:
        raise DegenerateGeometry("crown and rump coincide")
    # Orient the line left-to-right (upward when vertical) so AB and BA agree exactly.
    if dx < 0 or (dx == 0 and dy < 0):
        dx, dy = -dx, -dy
    angle = math.degrees(math.atan2(dy, dx))
    return 90.0 if angle <= -90.0 else angle  # near-vertical rounding


def flexion_angle(crown_A, junction_C, rump_B) -> float:
    """Angle at C between C->A and C->B, by the law of cosines, in degrees."""
    ca = math.dist(junction_C, crown_A)
    cb = math.dist(junction_C, rump_B)
    ab = math.dist(crown_A, rump_B)
    if ca == 0 or cb == 0:
        raise DegenerateGeometry("junction coincides with crown or rump")
    cos_beta = (ca * ca + cb * cb - ab * ab) / (2.0 * ca * cb)
    return math.degrees(math.acos(min(1.0, max(-1.0, cos_beta))))


def junction_offset(crown_A, rump_B, junction_C) -> float:
    """Signed distance of C from line AB; negative means display-above.

    The line is oriented left-to-right (bottom-to-top when vertical) so the
    sign does not depend on which endpoint is the crown.
    """
    dx = rump_B[0] - crown_A[0]
    dy = rump_B[1] - crown_A[1]
    if dx == 0 and dy == 0:
        raise DegenerateGeometry("crown and rump coincide")
    if dx < 0 or (dx == 0 and dy > 0):
        dx, dy = -dx, -dy
    cross = dx * (junction_C[1] - crown_A[1]) - dy * (junction_C[0] - crown_A[0])
    return cross / math.hypot(dx, dy)


def face_sign(crown_A, rump_B, junction_C) -> int:
    """+1 if C sits above line AB on screen, -1 if below, 0 if on it.

    The junction lies on the dorsal side, so +1 reads as face down and -1 as
    face up.
    """
    offset = junction_offset(crown_A, rump_B, junction_C)
    if abs(offset) < ON_LINE_PX:
        return 0
    return 1 if offset < 0 else -1


def perpendicular_foot(crown_A, rump_B, point) -> tuple[float, float]:
    """Orthogonal projection of ``point`` onto line AB."""
    ax, ay = crown_A
    dx, dy = rump_B[0] - ax, rump_B[1] - ay
    t = ((point[0] - ax) * dx + (point[1] - ay) * dy) / (dx * dx + dy * dy)
    return ax + t * dx, ay + t * dy


def measure(mask: LabelMask) -> Measurement:
    """Run the full landmark pipeline on a scorable mask.

    Raises:
        MissingStructure, NoJunction, DegenerateGeometry
    """
    contours = {c.class_label: c for c in extract_contours(mask)}
    if HEAD not in contours or BODY not in contours:
        missing = "head" if HEAD not in contours else "body"
        raise MissingStructure(f"mask has no {missing} region")
    crown, rump, crl = crl_endpoints(contours[HEAD], contours[BODY])
    border = borderline_pixels(mask)
    if len(border) == 0:
        raise NoJunction("head and body regions share no 8-adjacent pixels")
    cx, cy = border.mean(axis=0)
    junction = (float(cx), float(cy))
    landmarks = LandmarkSet(
        crown_A=crown,
        rump_B=rump,
        junction_C=junction,
        crl_px=crl,
        alpha_deg=horizontal_angle(crown, rump),
        beta_deg=flexion_angle(crown, junction, rump),
        face_sign=face_sign(crown, rump, junction),
    )
    return Measurement(landmarks=landmarks, contours=contours, borderline=border)
