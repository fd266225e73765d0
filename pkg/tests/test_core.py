import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rangevote.core import (Annotation, ClassId, Detection, FOREGROUND_CLASSES,
                            ScanGeometry, cart_to_polar, normalize_angle, polar_to_cart)


def test_polar_to_cart_zero_angle():
    assert polar_to_cart(1.0, 0.0) == (1.0, 0.0)


def test_polar_to_cart_zero_range():
    assert polar_to_cart(0.0, 2.1) == (0.0, 0.0)


def test_polar_to_cart_quarter_turn():
    x, y = polar_to_cart(2.0, math.pi / 2)
    assert abs(x) < 1e-12 and abs(y - 2.0) < 1e-12


def test_beam_angle_endpoints():
    g = ScanGeometry(num_beams=450, fov=math.radians(225.0))
    assert g.beam_angle(0) == pytest.approx(math.radians(-112.5), abs=1e-12)
    assert g.beam_angle(449) == pytest.approx(math.radians(112.5), abs=1e-12)


def test_beam_angle_center_zero_for_odd_counts():
    g = ScanGeometry(num_beams=9, fov=1.0)
    assert g.beam_angle(4) == pytest.approx(0.0, abs=1e-15)


def test_beam_angles_strictly_increasing_and_symmetric():
    g = ScanGeometry()
    angles = g.beam_angles()
    assert np.all(np.diff(angles) > 0)
    assert angles[0] == pytest.approx(-angles[-1])
    assert [g.beam_angle(i) for i in (0, 200, 449)] == pytest.approx(
        [angles[0], angles[200], angles[449]])


def test_beam_angle_out_of_range():
    g = ScanGeometry()
    with pytest.raises(IndexError):
        g.beam_angle(450)
    with pytest.raises(IndexError):
        g.beam_angle(-1)


@pytest.mark.parametrize("kwargs", [
    {"num_beams": 1}, {"fov": 0.0}, {"max_range": -1.0}, {"scan_rate": 0.0},
])
def test_geometry_validation(kwargs):
    with pytest.raises(ValueError):
        ScanGeometry(**kwargs)


@given(st.floats(1e-6, 100.0), st.floats(-math.pi + 1e-9, math.pi))
def test_polar_cart_round_trip(r, a):
    x, y = polar_to_cart(r, a)
    r2, a2 = cart_to_polar(x, y)
    assert abs(r2 - r) / r < 1e-9
    assert abs(normalize_angle(a2 - a)) < 1e-9


@given(st.floats(-50.0, 50.0))
def test_normalize_angle_range(a):
    w = normalize_angle(a)
    assert -math.pi < w <= math.pi
    assert abs(math.sin(w - a)) < 1e-9


def test_normalize_angle_edges():
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(0.0) == 0.0


def test_annotation_rejects_background():
    with pytest.raises(ValueError):
        Annotation(seq=0, class_id=ClassId.BACKGROUND, x=1.0, y=0.0)


def test_detection_invariants():
    d = Detection.make(1.0, 2.0, [0.2, 0.3, 0.5], supporting_vote_count=4)
    assert d.confidence == 0.5
    assert d.dominant_class == ClassId.PERSON
    with pytest.raises(ValueError):
        Detection(1.0, 2.0, np.array([0.5, 0.3, 0.5]), 0.5)  # does not sum to 1
    with pytest.raises(ValueError):
        Detection(1.0, 2.0, np.array([0.2, 0.3, 0.5]), 0.3)  # wrong confidence


def test_foreground_classes_exclude_background():
    assert len(ClassId) == 4
    assert ClassId.BACKGROUND not in FOREGROUND_CLASSES
    assert len(FOREGROUND_CLASSES) == 3
