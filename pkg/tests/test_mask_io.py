import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from crlqa.errors import DecodeError, DimensionMismatch, LabelError, MissingStructure
from crlqa.geometry import measure
from crlqa.mask_io import (
    FaceExpectation,
    ImageMeta,
    LabelMask,
    UltrasoundFrame,
    case_id,
    find_cases,
    load_case,
    load_case_by_stem,
    load_mask,
    save_case,
    save_mask,
)

label_grids = arrays(
    np.uint8,
    st.tuples(st.integers(1, 12), st.integers(1, 12)),
    elements=st.integers(0, 3),
)


@given(label_grids)
def test_mask_roundtrip(tmp_path_factory, labels):
    path = tmp_path_factory.mktemp("rt") / "x.mask.png"
    mask = LabelMask(labels)
    save_mask(mask, path)
    assert load_mask(path) == mask


@given(label_grids, st.integers(4, 255))
def test_any_foreign_label_rejected(labels, bad):
    labels = labels.copy()
    labels.flat[0] = bad
    with pytest.raises(LabelError):
        LabelMask(labels)


def test_value_seven_rejected_on_load(tmp_path):
    labels = np.zeros((5, 5), np.uint8)
    labels[2, 2] = 7
    Image.fromarray(labels).save(tmp_path / "a.mask.png")
    with pytest.raises(LabelError):
        load_case(tmp_path / "a.mask.png")


def test_all_zero_mask_loads_but_is_unscorable(tmp_path):
    Image.fromarray(np.zeros((4, 4), np.uint8)).save(tmp_path / "z.mask.png")
    mask, frame, meta = load_case(tmp_path / "z.mask.png")
    assert frame is None
    with pytest.raises(MissingStructure):
        measure(mask)


def test_dimension_mismatch(tmp_path):
    Image.fromarray(np.zeros((100, 100), np.uint8)).save(tmp_path / "m.mask.png")
    Image.fromarray(np.zeros((120, 100), np.uint8)).save(tmp_path / "m.frame.png")
    with pytest.raises(DimensionMismatch):
        load_case(tmp_path / "m.mask.png", tmp_path / "m.frame.png")


@pytest.mark.parametrize("mode", ["RGB", "I;16", "LA"])
def test_non_gray8_rejected(tmp_path, mode):
    Image.new(mode, (6, 6)).save(tmp_path / "c.mask.png")
    with pytest.raises(DecodeError):
        load_mask(tmp_path / "c.mask.png")


def test_garbage_file_is_decode_error(tmp_path):
    (tmp_path / "g.mask.png").write_bytes(b"not a png at all")
    with pytest.raises(DecodeError):
        load_mask(tmp_path / "g.mask.png")


def test_missing_meta_defaults(tmp_path):
    Image.fromarray(np.zeros((3, 3), np.uint8)).save(tmp_path / "case7.mask.png")
    _, _, meta = load_case_by_stem(tmp_path / "case7.mask.png")
    assert meta == ImageMeta("case7", None, FaceExpectation.EITHER)


def test_meta_file_parsed(tmp_path):
    Image.fromarray(np.zeros((3, 3), np.uint8)).save(tmp_path / "k.mask.png")
    (tmp_path / "k.meta.json").write_text(
        json.dumps({"image_id": "k", "pixel_spacing_mm": 0.2, "expected_face": "up"})
    )
    _, _, meta = load_case_by_stem(tmp_path / "k.mask.png")
    assert meta.pixel_spacing_mm == 0.2
    assert meta.expected_face is FaceExpectation.UP


@pytest.mark.parametrize("raw", ['{"pixel_spacing_mm": -1}', '{"expected_face": "left"}', "[1]", "{"])
def test_bad_meta_is_decode_error(tmp_path, raw):
    Image.fromarray(np.zeros((3, 3), np.uint8)).save(tmp_path / "b.mask.png")
    (tmp_path / "b.meta.json").write_text(raw)
    with pytest.raises(DecodeError):
        load_case_by_stem(tmp_path / "b.mask.png")


def test_spacing_must_be_positive():
    with pytest.raises(ValueError):
        ImageMeta("x", 0.0)


def test_case_roundtrip(tmp_path, default_case):
    mask, frame, meta, _ = default_case
    path = save_case(tmp_path, meta, mask, frame)
    assert case_id(path) == meta.image_id
    assert find_cases(tmp_path) == [path]
    m2, f2, meta2 = load_case_by_stem(path)
    assert (m2, f2, meta2) == (mask, frame, meta)


def test_grids_are_immutable():
    mask = LabelMask(np.zeros((2, 2), np.uint8))
    with pytest.raises(ValueError):
        mask.labels[0, 0] = 1
    frame = UltrasoundFrame(np.zeros((2, 2), np.uint8))
    with pytest.raises(ValueError):
        frame.intensity[0, 0] = 1
