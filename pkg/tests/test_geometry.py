import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import grid
from crlqa.errors import DegenerateGeometry, MissingStructure, NoJunction
from crlqa.geometry import (
    Contour,
    convex_hull_vertices,
    crl_endpoints,
    extract_contours,
    face_sign,
    farthest_pair,
    farthest_pair_exhaustive,
    flexion_angle,
    horizontal_angle,
    junction_midpoint,
    measure,
)
from crlqa.mask_io import LabelMask
from crlqa.phantom import PhantomSpec, render


def brute_ring(labels, cls):
    """Reference outer boundary: background-of-class pixels touching the class."""
    h, w = labels.shape
    out = set()
    for y in range(h):
        for x in range(w):
            if labels[y, x] == cls:
                continue
            for dy, dx in itertools.product((-1, 0, 1), repeat=2):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and labels[yy, xx] == cls:
                    out.add((x, y))
                    break
    return out


def brute_farthest(points):
    """Reference farthest pair: every pair, exact integers, lexicographic ties."""
    pts = sorted(set(map(tuple, points)))
    best = None
    for p, q in itertools.combinations(pts, 2):
        d2 = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
        if best is None or d2 > best[2]:
            best = (p, q, d2)
    return best


def contour(points, label):
    return Contour(np.array(points, dtype=np.int64).reshape(-1, 2), label)


# contours


def test_single_pixel_contour_is_its_8_neighbours():
    m = grid((11, 11), head=np.s_[5, 5])
    (head,) = extract_contours(m)
    got = {tuple(p) for p in head.points}
    assert got == {(5 + dx, 5 + dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)} - {(5, 5)}


def test_3x3_block_has_16_pixel_ring():
    m = grid((9, 9), head=np.s_[3:6, 3:6])
    (head,) = extract_contours(m)
    got = {tuple(p) for p in head.points}
    assert len(got) == 16
    assert got == brute_ring(m.labels, 1)


def test_only_palate_is_missing_structure():
    with pytest.raises(MissingStructure):
        extract_contours(grid((6, 6), palate=np.s_[2:4, 2:4]))


@given(st.integers(0, 2**32 - 1))
def test_contours_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    labels = rng.choice(4, size=(9, 11), p=[0.5, 0.2, 0.2, 0.1]).astype(np.uint8)
    labels[0, 0] = 1
    for c in extract_contours(LabelMask(labels)):
        assert {tuple(p) for p in c.points} == brute_ring(labels, c.class_label)
        assert np.all((c.points >= 0) & (c.points < [11, 9]))


# CRL endpoints


def test_crl_345():
    a, b, d = crl_endpoints(contour([(0, 0)], 1), contour([(3, 4)], 2))
    assert (a, b, d) == ((0, 0), (3, 4), 5.0)


def test_collinear_extremes():
    p, q, d2 = farthest_pair([(0, 0), (1, 0), (2, 0)])
    assert (p, q, d2) == ((0, 0), (2, 0), 4)


def test_tie_break_is_lexicographic():
    # Square: both diagonals have length^2 = 2; (0,0)-(1,1) is smaller than (0,1)-(1,0).
    assert farthest_pair([(1, 0), (0, 1), (1, 1), (0, 0)]) == ((0, 0), (1, 1), 2)


point_sets = st.lists(
    st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=2, max_size=60
)


@given(point_sets)
def test_hull_search_equals_exhaustive(points):
    assume(len(set(points)) >= 2)
    ref = brute_farthest(points)
    assert farthest_pair_exhaustive(points) == ref
    assert farthest_pair(points) == ref


@given(st.lists(st.tuples(st.integers(0, 400), st.integers(0, 400)), min_size=2, max_size=500))
def test_wide_sets_equal_exhaustive(points):
    assume(len(set(points)) >= 2)
    assert farthest_pair(points) == farthest_pair_exhaustive(points)


@given(point_sets)
def test_hull_vertices_are_sorted_subset(points):
    pts = np.unique(np.array(points, dtype=np.int64), axis=0)
    hull = convex_hull_vertices(pts)
    assert {tuple(p) for p in hull} <= {tuple(p) for p in pts}
    assert [tuple(p) for p in hull] == sorted(tuple(p) for p in hull)


def test_endpoints_on_phantom_equal_brute_force(default_case):
    mask = default_case[0]
    m = measure(mask)
    head, body = m.contours[1], m.contours[2]
    merged = np.concatenate([head.points, body.points])
    p, q, d2 = brute_farthest(merged.tolist()) if len(merged) <= 800 else farthest_pair_exhaustive(merged)
    assert {m.landmarks.crown_A, m.landmarks.rump_B} == {p, q}
    assert m.landmarks.crl_px == math.sqrt(d2)


@given(st.permutations(list(range(12))))
def test_endpoints_ignore_point_order(order):
    head = [(0, 0), (1, 2), (2, 1), (3, 3), (2, 4), (0, 3)]
    body = [(5, 4), (7, 5), (9, 6), (8, 8), (6, 7), (4, 5)]
    merged = head + body
    shuffled = [merged[i] for i in order]
    h = [p for p in shuffled if p in head]
    b = [p for p in shuffled if p in body]
    assert crl_endpoints(contour(h, 1), contour(b, 2)) == crl_endpoints(
        contour(head, 1), contour(body, 2)
    )


def test_crown_is_the_head_end():
    a, b, _ = crl_endpoints(contour([(10, 0), (9, 1)], 1), contour([(0, 0), (1, 1)], 2))
    assert a == (10, 0) and b == (0, 0)


def test_both_ends_on_body_is_degenerate():
    # Long body bar with head nubs centred above and below it: both extremes are
    # body-only and equidistant from both centroids.
    labels = grid((7, 44), body=np.s_[3, 2:42]).labels.copy()
    labels[2, 21:23] = labels[4, 21:23] = 1
    with pytest.raises(DegenerateGeometry):
        measure(LabelMask(labels))


def test_body_end_leaning_to_head_is_crown():
    # One nub only: the left extreme sits nearer the head centroid, so it is resolvable.
    m = measure(grid((7, 44), body=np.s_[3, 2:42], head=np.s_[2, 21:23]))
    assert m.landmarks.crown_A[1] == 2


# junction


def test_junction_of_vertical_strips():
    m = grid((10, 10), head=np.s_[0:10, 4], body=np.s_[0:10, 5])
    assert junction_midpoint(m) == (4.0, 4.5)


def test_two_pixel_gap_has_no_junction():
    m = grid((10, 12), head=np.s_[2:8, 1:4], body=np.s_[2:8, 6:10])
    with pytest.raises(NoJunction):
        junction_midpoint(m)
    with pytest.raises(NoJunction):
        measure(m)


def test_diagonal_touch_is_a_junction():
    m = grid((6, 6), head=np.s_[1, 1], body=np.s_[2, 2])
    assert junction_midpoint(m) == (1.0, 1.0)


@pytest.mark.parametrize("beta", [125.0, 150.0, 175.0])
@pytest.mark.parametrize("alpha", [-20.0, 0.0, 25.0])
def test_phantom_junction_within_2px(beta, alpha):
    _, _, _, truth = spec_case = render(PhantomSpec(beta_target_deg=beta, alpha_target_deg=alpha))
    got = np.array(junction_midpoint(spec_case[0]))
    assert np.hypot(*(got - truth.junction_C)) <= 2.0


# angles


@pytest.mark.parametrize(
    "b, expected", [((10, 0), 0.0), ((10, 10), 45.0), ((0, 10), 90.0), ((10, -10), -45.0), ((-10, 0), 0.0)]
)
def test_horizontal_angle(b, expected):
    assert horizontal_angle((0, 0), b) == pytest.approx(expected, abs=1e-12)


def test_horizontal_angle_degenerate():
    with pytest.raises(DegenerateGeometry):
        horizontal_angle((3, 3), (3, 3))


def test_flexion_collinear_and_right():
    assert flexion_angle((0, 5), (5, 5), (10, 5)) == 180.0
    assert flexion_angle((0, 0), (0, 4), (3, 4)) == pytest.approx(90.0, abs=1e-12)


def test_flexion_against_dot_product():
    a, c, b = np.array([10, 2.0]), np.array([50, 40.0]), np.array([90, 85.0])
    u, v = a - c, b - c
    ref = math.degrees(math.acos(u @ v / (np.linalg.norm(u) * np.linalg.norm(v))))
    assert flexion_angle(tuple(a), tuple(c), tuple(b)) == pytest.approx(ref, abs=1e-9)
    # Frozen value of the same triple.
    assert ref == pytest.approx(175.164738622, abs=1e-8)


def test_flexion_degenerate():
    with pytest.raises(DegenerateGeometry):
        flexion_angle((1, 1), (1, 1), (5, 5))


coords = st.floats(-100, 100, allow_nan=False)
triples = st.tuples(*(st.tuples(coords, coords) for _ in range(3)))


def well_posed(a, c, b):
    ca, cb = math.dist(c, a), math.dist(c, b)
    if min(ca, cb) < 1.0:
        return False
    beta = flexion_angle(a, c, b)
    return 1.0 < beta < 179.0


@given(triples)
def test_flexion_symmetric(t):
    a, c, b = t
    assume(min(math.dist(c, a), math.dist(c, b)) > 0)
    assert flexion_angle(a, c, b) == pytest.approx(flexion_angle(b, c, a), abs=1e-12)


@given(triples, st.floats(0.1, 10), st.floats(-math.pi, math.pi), coords, coords)
def test_flexion_similarity_invariant(t, scale, theta, tx, ty):
    a, c, b = t
    assume(well_posed(a, c, b))
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])

    def move(p):
        return tuple(scale * (rot @ np.array(p)) + (tx, ty))

    assert flexion_angle(move(a), move(c), move(b)) == pytest.approx(
        flexion_angle(a, c, b), abs=1e-9
    )


@given(st.tuples(coords, coords), st.tuples(coords, coords))
def test_horizontal_angle_symmetric_and_folded(a, b):
    assume(a != b)
    got = horizontal_angle(a, b)
    assert -90.0 < got <= 90.0
    assert got == horizontal_angle(b, a)


def test_face_sign_examples():
    assert face_sign((0, 0), (10, 0), (5, -3)) == 1
    assert face_sign((0, 0), (10, 0), (5, 3)) == -1
    assert face_sign((0, 0), (10, 0), (5, 0)) == 0


@given(triples)
def test_face_sign_flips_under_reflection(t):
    a, b, c = (np.array(p) for p in t)
    d = b - a
    assume(np.hypot(*d) > 1.0)
    foot = a + d * ((c - a) @ d) / (d @ d)
    mirrored = 2 * foot - c
    s = face_sign(tuple(a), tuple(b), tuple(c))
    assume(np.hypot(*(c - foot)) > 0.51)
    assert s != 0
    assert face_sign(tuple(a), tuple(b), tuple(mirrored)) == -s
    # Swapping crown and rump does not change the side.
    assert face_sign(tuple(b), tuple(a), tuple(c)) == s
