import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crlqa.errors import GeometryInfeasible
from crlqa.geometry import flexion_angle, horizontal_angle, measure
from crlqa.mask_io import LabelMask
from crlqa.phantom import PhantomSpec, random_spec, render, sweep


def test_deterministic():
    spec = PhantomSpec(noise_amplitude=20, seed=9)
    m1, f1, _, t1 = render(spec)
    m2, f2, _, t2 = render(spec)
    assert m1 == m2 and f1 == f2 and t1 == t2


def test_seed_moves_the_figure():
    t1 = render(PhantomSpec(seed=1))[3]
    t2 = render(PhantomSpec(seed=2))[3]
    assert t1.crown_A != t2.crown_A
    assert t1.beta_deg == pytest.approx(t2.beta_deg, abs=1e-12)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_truth_is_self_consistent(seed):
    spec = random_spec(np.random.default_rng(seed))
    mask, frame, meta, truth = render(spec)
    a, b, c = truth.crown_A, truth.rump_B, truth.junction_C
    assert truth.beta_deg == pytest.approx(spec.beta_target_deg, abs=1e-6)
    assert flexion_angle(a, c, b) == pytest.approx(truth.beta_deg, abs=1e-6)
    assert horizontal_angle(a, b) == pytest.approx(spec.alpha_target_deg, abs=1e-9)
    assert abs(a[0] - b[0]) == pytest.approx(spec.span_fraction * spec.width, abs=1e-9)
    assert math.dist(a, b) == pytest.approx(truth.crl_px, rel=1e-9)
    # The rendered mask is valid and carries exactly the requested structures.
    assert isinstance(mask, LabelMask) and mask.count(1) and mask.count(2)
    assert (mask.count(3) >= 5) == spec.palate
    assert (frame.width, frame.height) == (spec.width, spec.height)


def test_collinear_pose():
    spec = PhantomSpec(beta_target_deg=180.0, alpha_target_deg=0.0, span_fraction=0.7)
    mask, _, _, truth = render(spec)
    (_, ay), (_, by), (_, cy) = truth.crown_A, truth.rump_B, truth.junction_C
    assert ay == pytest.approx(by, abs=1e-9) and cy == pytest.approx(ay, abs=1e-9)
    assert truth.head_center[1] == pytest.approx(ay, abs=1e-9)
    assert truth.beta_deg == 180.0 and truth.alpha_deg == 0.0


@pytest.mark.xfail(
    strict=True,
    reason="farthest-pair endpoints slide along the round crown; tilt ~ sqrt(2*eps*r)/D "
    "exceeds 1 degree at these image sizes (see decisions ledger)",
)
@pytest.mark.parametrize("size", [(512, 384), (1024, 768)])
def test_collinear_pose_measures_alpha_within_1deg(size):
    worst = 0.0
    for seed in range(4):
        spec = PhantomSpec(width=size[0], height=size[1], beta_target_deg=180.0, seed=seed)
        worst = max(worst, abs(measure(render(spec)[0]).landmarks.alpha_deg))
    assert worst <= 1.0


def test_face_flips_with_orientation():
    up = render(PhantomSpec(face="up"))
    down = render(PhantomSpec(face="down"))
    assert measure(up[0]).landmarks.face_sign == -1 == up[3].face_sign
    assert measure(down[0]).landmarks.face_sign == 1 == down[3].face_sign
    mirrored = LabelMask(up[0].labels[::-1])
    assert measure(mirrored).landmarks.face_sign == 1


@pytest.mark.parametrize(
    "spec",
    [
        PhantomSpec(),
        PhantomSpec(beta_target_deg=125, alpha_target_deg=-30, span_fraction=0.5),
        PhantomSpec(beta_target_deg=175, alpha_target_deg=20, span_fraction=0.8, face="down"),
    ],
)
def test_measured_crl_and_junction_near_truth(spec):
    mask, _, _, truth = render(spec)
    lm = measure(mask).landmarks
    assert lm.crl_px == pytest.approx(truth.crl_px, rel=0.02)
    assert math.dist(lm.junction_C, truth.junction_C) <= 2.0
    assert math.dist(lm.crown_A, truth.crown_A) <= 0.1 * truth.crl_px


def test_frame_intensities():
    mask, frame, _, _ = render(PhantomSpec(margin_intensity=7, body_intensity=3, noise_amplitude=50))
    tissue = mask.labels > 0
    assert np.all(frame.intensity[~tissue] == 7)
    assert frame.intensity[tissue].min() >= 1  # never black inside the fetus


@pytest.mark.parametrize(
    "changes",
    [
        dict(beta_target_deg=70.0),  # tighter flexion than the figure can bend
        dict(height=40),
        dict(span_fraction=1.0),
        dict(alpha_target_deg=50.0),
        dict(face="left"),
        dict(body_semi_minor=200.0),
    ],
)
def test_infeasible(changes):
    with pytest.raises(GeometryInfeasible):
        render(PhantomSpec().replace(**changes))


def test_sweep():
    specs = sweep(PhantomSpec(), "alpha_target_deg", [0, 10, 20])
    assert [s.alpha_target_deg for s in specs] == [0, 10, 20]
    assert all(s.beta_target_deg == 153.0 for s in specs)
    with pytest.raises(ValueError):
        sweep(PhantomSpec(), "colour", [1])


def test_random_spec_keeps_fixed_fields():
    spec = random_spec(np.random.default_rng(0), width=640, height=480, palate=False, face="down")
    assert (spec.width, spec.height, spec.palate, spec.face) == (640, 480, False, "down")
