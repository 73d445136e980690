import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_nfov_extents, mc_iou
from spherevqa.sphere_geom import (
    NMS_MAX_KEEP, NMS_TAU, Perspective, RelationThresholds, SpatialMode, SpatialRelation,
    SphericalBox, UnitVec, alt_embedding, angles_to_unit, calibrate_point, classify_relation,
    grounding_vector, nfov_box_to_spherical, project_to_nfov, quaternion_embedding,
    spatial_code, spatial_code_width, spherical_area, spherical_iou, spherical_nms, wrap_angle,
)

PI = math.pi
coord = st.floats(-1.0, 1.0)
yaw = st.floats(-PI, PI)
pitch = st.floats(-1.5, 1.5)


def box_strategy(max_w=2 * PI, max_h=PI):
    return st.builds(
        SphericalBox,
        st.floats(-PI, PI),
        st.floats(-PI / 2, PI / 2),
        st.floats(1e-3, max_w),
        st.floats(1e-3, max_h),
        st.floats(0.0, 1.0),
    )


def random_box(rng, max_deg=60.0):
    return SphericalBox(rng.uniform(-PI, PI), math.asin(rng.uniform(-0.95, 0.95)),
                        math.radians(rng.uniform(5, max_deg)), math.radians(rng.uniform(5, max_deg)),
                        float(rng.uniform()))


# -- calibration ---------------------------------------------------------------

def test_calibrate_identity_and_yaw():
    v = calibrate_point(0, 0, Perspective(0, 0)).as_array()
    np.testing.assert_allclose(v, [1, 0, 0], atol=1e-9)
    v = calibrate_point(0, 0, Perspective(PI / 2, 0)).as_array()
    np.testing.assert_allclose(v, [0, 1, 0], atol=1e-9)
    v = calibrate_point(1, 0, Perspective(0, 0)).as_array()
    np.testing.assert_allclose(v, [1 / math.sqrt(2), 1 / math.sqrt(2), 0], atol=1e-9)


def test_perspective_ranges():
    with pytest.raises(ValueError):
        Perspective(0, PI / 2)
    with pytest.raises(ValueError):
        Perspective(4.0, 0)


@given(coord, coord, yaw, pitch)
def test_calibrate_unit_norm(x, y, t, p):
    v = calibrate_point(x, y, Perspective(t, p)).as_array()
    assert abs(np.linalg.norm(v) - 1) < 1e-9


@given(coord, coord, yaw, pitch)
def test_calibrate_round_trip(x, y, t, p):
    persp = Perspective(t, p)
    x2, y2 = project_to_nfov(calibrate_point(x, y, persp), persp)
    assert abs(x2 - x) < 1e-9 and abs(y2 - y) < 1e-9


@given(coord, coord, st.floats(-PI / 2, PI / 2), st.floats(-PI / 2, PI / 2), pitch)
def test_calibrate_yaw_equivariance(x, y, t, d, p):
    a = calibrate_point(x, y, Perspective(t, p)).as_array()
    b = calibrate_point(x, y, Perspective(t + d, p)).as_array()
    rz = np.array([[math.cos(d), -math.sin(d), 0], [math.sin(d), math.cos(d), 0], [0, 0, 1]])
    np.testing.assert_allclose(rz @ a, b, atol=1e-9)


def test_project_behind_view_rejected():
    with pytest.raises(ValueError):
        project_to_nfov(UnitVec(-1, 0, 0), Perspective(0, 0))


# -- NFoV boxes ---------------------------------------------------------------

def test_small_box_extents_match_closed_form():
    b = nfov_box_to_spherical(((-0.1, -0.1), (0.1, 0.1)), Perspective(0, 0))
    assert abs(b.w_theta - 2 * math.atan(0.1)) < 1e-9
    assert abs(b.h_phi - 2 * math.atan(0.1)) < 1e-9
    assert abs(b.theta) < 1e-12 and abs(b.phi) < 1e-12


def test_box_yaw_equivariant():
    corners = ((-0.5, -0.5), (0.5, 0.5))
    a = nfov_box_to_spherical(corners, Perspective(0, 0))
    b = nfov_box_to_spherical(corners, Perspective(PI / 2, 0))
    assert abs(b.theta - PI / 2) < 1e-9 and abs(b.phi) < 1e-9
    assert abs(a.w_theta - b.w_theta) < 1e-9 and abs(a.h_phi - b.h_phi) < 1e-9


@pytest.mark.parametrize("corners,t,p", [
    (((-0.3, -0.2), (0.4, 0.5)), 0.3, 0.4),
    (((-0.8, -0.1), (0.2, 0.9)), -2.9, -0.7),
    (((0.1, 0.1), (0.6, 0.3)), 3.1, 1.0),
    (((-1.0, -1.0), (1.0, 1.0)), 1.0, -0.2),
])
def test_box_extents_match_dense_outline(corners, t, p):
    b = nfov_box_to_spherical(corners, Perspective(t, p))
    w, h = brute_nfov_extents(corners, t, p)
    # the brute oracle under-reads by at most its sampling step
    assert abs(b.w_theta - w) < 1e-6 and abs(b.h_phi - h) < 1e-6


def test_box_over_pole_spans_full_circle():
    b = nfov_box_to_spherical(((-0.5, -0.5), (0.5, 0.5)), Perspective(0, 1.4))
    assert b.w_theta == pytest.approx(2 * PI)
    assert b.phi_top == pytest.approx(PI / 2)


def test_unordered_corners_rejected():
    with pytest.raises(ValueError):
        nfov_box_to_spherical(((0.5, 0.0), (0.0, 0.5)), Perspective(0, 0))


# -- area / IoU / NMS ----------------------------------------------------------

def test_area_closed_forms():
    assert spherical_area(SphericalBox(0, 0, 2 * PI, PI)) == pytest.approx(4 * PI)
    assert spherical_area(SphericalBox(PI / 4, PI / 12, PI / 2, PI / 6)) == pytest.approx(PI / 4)
    assert spherical_area(SphericalBox(0, 0, 1.0, 1e-9)) < 1e-8


def test_box_phi_clamped_and_validated():
    b = SphericalBox(0, 1.4, 0.5, 1.0)
    assert b.phi_top == PI / 2
    with pytest.raises(ValueError):
        SphericalBox(0, 0, 0, 0.1)
    with pytest.raises(ValueError):
        SphericalBox(0, 2.0, 0.1, 0.1)


def test_box_json_round_trip():
    b = SphericalBox(1.0, -0.3, 0.4, 0.2, 0.7)
    assert SphericalBox.from_json(json.loads(json.dumps(b.to_json()))) == b


def test_iou_identity_disjoint_and_seam():
    a = SphericalBox(0.3, 0.1, 0.5, 0.4)
    assert spherical_iou(a, a) == pytest.approx(1.0)
    assert spherical_iou(a, SphericalBox(2.5, 0.1, 0.5, 0.4)) == 0.0
    r = math.radians
    wrap = SphericalBox(r(180), 0, r(20), r(10))
    inner = SphericalBox(r(180), 0, r(10), r(10))
    assert spherical_iou(wrap, inner) == pytest.approx(0.5, abs=1e-12)
    assert mc_iou(wrap, inner, 10 ** 6) == pytest.approx(0.5, abs=1e-2)


def test_iou_matches_monte_carlo():
    rng = np.random.default_rng(11)
    for i in range(100):
        a = random_box(rng)
        # place b near a so most pairs overlap
        b = SphericalBox(a.theta + rng.normal(0, 0.3), float(np.clip(a.phi + rng.normal(0, 0.2), -1.5, 1.5)),
                         math.radians(rng.uniform(5, 60)), math.radians(rng.uniform(5, 60)))
        assert abs(spherical_iou(a, b) - mc_iou(a, b, 100_000, seed=i)) < 1e-2


@given(box_strategy(), box_strategy())
def test_iou_symmetric_and_bounded(a, b):
    x, y = spherical_iou(a, b), spherical_iou(b, a)
    assert x == pytest.approx(y, abs=1e-12)
    assert 0.0 <= x <= 1.0


@given(box_strategy())
def test_iou_self_is_one(a):
    assert spherical_iou(a, a) == pytest.approx(1.0)


def test_nms_defaults():
    assert NMS_TAU == 0.65 and NMS_MAX_KEEP == 35


def test_nms_suppresses_above_tau():
    a = SphericalBox(0, 0, 1.0, 0.5, 0.9)
    b = SphericalBox(0.15, 0, 1.0, 0.5, 0.8)
    assert spherical_iou(a, b) > 0.65
    assert spherical_nms([b, a]) == [a]
    assert spherical_nms([a]) == [a]


def test_nms_keeps_top_35_sorted():
    rng = np.random.default_rng(3)
    boxes = [SphericalBox(-PI + 2 * PI * i / 60, 0, 0.05, 0.05, float(rng.uniform())) for i in range(60)]
    kept = spherical_nms(boxes)
    assert len(kept) == 35
    conf = [k.confidence for k in kept]
    assert conf == sorted(conf, reverse=True)
    assert conf[-1] >= sorted((b.confidence for b in boxes), reverse=True)[34]


def test_nms_equal_confidence_keeps_input_order():
    a = SphericalBox(0, 0, 0.1, 0.1, 0.5)
    b = SphericalBox(1, 0, 0.1, 0.1, 0.5)
    assert spherical_nms([b, a]) == [b, a]


@given(st.lists(box_strategy(max_w=1.5, max_h=1.0), max_size=25), st.floats(0.05, 0.95))
def test_nms_idempotent(boxes, tau):
    once = spherical_nms(boxes, tau)
    assert spherical_nms(once, tau) == once


# -- embeddings ------------------------------------------------------------------

def test_quaternion_examples():
    w, h = 0.4, 0.2
    q = quaternion_embedding(SphericalBox(0, -PI / 2, w, h), 1.5).as_array()
    np.testing.assert_allclose(q, [1.5, 1, 0, 0, w / (2 * PI), h / PI], atol=1e-12)
    q = quaternion_embedding(SphericalBox(0, 0, w, h), 0).as_array()
    np.testing.assert_allclose(q[1:4], [math.sqrt(2) / 2, 0, math.sqrt(2) / 2], atol=1e-12)
    q = quaternion_embedding(SphericalBox(0, PI / 2, w, h), 0).as_array()
    np.testing.assert_allclose(q[1:4], [0, 0, 1], atol=1e-12)


@given(box_strategy(), st.floats(0, 10))
def test_quaternion_unit_norm(box, t):
    q = quaternion_embedding(box, t)
    assert abs(q.q_w ** 2 + q.q_x ** 2 + q.q_y ** 2 - 1) < 1e-9


def test_quaternion_unit_norm_10k():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        q = quaternion_embedding(random_box(rng))
        worst = max(worst, abs(q.q_w ** 2 + q.q_x ** 2 + q.q_y ** 2 - 1))
    assert worst < 1e-9


def test_quaternion_injective_on_degree_grid():
    seen = set()
    count = 0
    for lat in range(-89, 90):
        for lon in range(-179, 181):
            q = quaternion_embedding(SphericalBox(math.radians(lon), math.radians(lat), 0.1, 0.1))
            seen.add((round(q.q_w, 9), round(q.q_x, 9), round(q.q_y, 9)))
            count += 1
    assert len(seen) == count


def test_alt_embeddings():
    b = SphericalBox(0, 0, 0.5, 0.25)
    np.testing.assert_allclose(alt_embedding(b, 0, "cartesian")[1:3], [0.5, 0.5])
    np.testing.assert_allclose(alt_embedding(b, 2.0, "spherical"), [2.0, 0, 0, 0.5, 0.25])
    u = alt_embedding(SphericalBox(PI / 2, 0, 0.5, 0.25), 0, SpatialMode.UNIT_SPHERE)
    np.testing.assert_allclose(u[1:4], [0, 1, 0], atol=1e-12)
    with pytest.raises(ValueError):
        alt_embedding(b, 0, "quaternion")
    with pytest.raises(ValueError):
        alt_embedding(b, 0, "polar")


@given(box_strategy())
def test_cartesian_embedding_in_unit_square(b):
    v = alt_embedding(b, 0, "cartesian")[1:]
    assert np.all(v >= 0) and np.all(v <= 1 + 1e-12)


@pytest.mark.parametrize("mode", [m.value for m in SpatialMode])
def test_spatial_code_widths(mode):
    b = SphericalBox(0.2, 0.1, 0.3, 0.3)
    assert spatial_code(b, 0.5, mode).shape == (spatial_code_width(mode),)
    g = grounding_vector(b, mode)
    assert g.shape == (5,)
    np.testing.assert_array_equal(g[: spatial_code_width(mode) - 1], spatial_code(b, 0.5, mode)[1:])


# -- relations -------------------------------------------------------------------

def _at(theta, phi):
    return SphericalBox(theta, phi, 0.1, 0.1)


def test_relation_examples():
    assert classify_relation(_at(0, 0), _at(0, PI / 4)) is SpatialRelation.ABOVE
    assert classify_relation(_at(0, 0), _at(PI, 0)) is SpatialRelation.OPPOSITE_OF
    assert classify_relation(_at(0, 0), _at(PI / 12, 0)) is SpatialRelation.NEXT_TO
    assert classify_relation(_at(0, 0), _at(PI / 2, 0)) is SpatialRelation.RIGHT_OF
    assert classify_relation(_at(0, 0), _at(-PI / 2, 0)) is SpatialRelation.LEFT_OF
    assert classify_relation(_at(0, 0), _at(0, -PI / 3)) is SpatialRelation.BELOW


def test_relation_seam_and_thresholds():
    # crossing the +-pi seam is a short step to the right
    assert classify_relation(_at(3.0, 0), _at(-2.0, 0)) is SpatialRelation.RIGHT_OF
    loose = RelationThresholds(next_to=PI)
    assert classify_relation(_at(0, 0), _at(PI / 2, 0), loose) is SpatialRelation.NEXT_TO


def test_relation_coincident_rejected():
    with pytest.raises(ValueError):
        classify_relation(_at(0.5, 0.2), _at(0.5, 0.2))


@given(st.floats(-PI, PI), st.floats(-1.5, 1.5), st.floats(-PI, PI), st.floats(-1.5, 1.5))
def test_relation_antisymmetry(t1, p1, t2, p2):
    a, b = _at(t1, p1), _at(t2, p2)
    if angles_to_unit(t1, p1).as_array() @ angles_to_unit(t2, p2).as_array() > 1 - 1e-12:
        return
    d = abs(wrap_angle(t2 - t1))
    # exact ties at the boundaries (|dtheta| = pi, |dphi| = |dtheta|) are measure-zero
    if abs(d - PI) < 1e-12 or abs(abs(p2 - p1) - d) < 1e-12:
        return
    assert classify_relation(b, a) is classify_relation(a, b).swapped()


def test_relation_values():
    assert {r.value for r in SpatialRelation} == {
        "next to", "opposite of", "left of", "right of", "above", "below"}
