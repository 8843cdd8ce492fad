import math

import numpy as np
import pytest

from fovtrack.camera import (CameraModel, DegenerateProjectionError,
                             enclosing_circle, project_to_image,
                             unproject_from_image)

CAM = CameraModel()  # f=1, half fov 32 deg


def test_point_below_uav_projects_to_origin():
    u, v, visible = project_to_image(CAM, (2.0, -1.0, 1.7), 0.4, (2.0, -1.0))
    assert (u, v) == (0.0, 0.0)
    assert visible


def test_projection_hand_value():
    # u = f * dx / z = 1 * 1 / 2 = 0.5
    u, v, visible = project_to_image(CAM, (0.0, 0.0, 2.0), 0.0, (1.0, 0.0))
    assert u == pytest.approx(0.5, abs=1e-15)
    assert v == 0.0
    assert visible


def test_doubling_altitude_halves_image_coordinates(rng):
    for _ in range(50):
        x, y = rng.uniform(-3, 3, 2)
        z = rng.uniform(0.5, 2.0)
        h = rng.uniform(-math.pi, math.pi)
        px, py = rng.uniform(-3, 3, 2)
        u1, v1, _ = project_to_image(CAM, (x, y, z), h, (px, py))
        u2, v2, _ = project_to_image(CAM, (x, y, 2 * z), h, (px, py))
        assert u2 == pytest.approx(u1 / 2)
        assert v2 == pytest.approx(v1 / 2)


def test_projection_round_trip(rng):
    for _ in range(2000):
        pose = (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 3.0))
        heading = rng.uniform(-math.pi, math.pi)
        point = (rng.uniform(-5, 5), rng.uniform(-5, 5))
        u, v, _ = project_to_image(CAM, pose, heading, point)
        dx, dy = unproject_from_image(CAM, pose, heading, (u, v))
        assert abs(pose[0] + dx - point[0]) < 1e-9
        assert abs(pose[1] + dy - point[1]) < 1e-9


def test_visibility_is_fov_circle():
    z = 2.0
    edge = z * math.tan(CAM.half_fov)  # ground distance mapping to the extent
    assert project_to_image(CAM, (0, 0, z), 0.0, (edge * 0.999, 0.0))[2]
    assert not project_to_image(CAM, (0, 0, z), 0.0, (edge * 1.001, 0.0))[2]


def test_degenerate_altitude_raises():
    with pytest.raises(DegenerateProjectionError):
        project_to_image(CAM, (0.0, 0.0, 0.05), 0.0, (1.0, 1.0))


def test_camera_validation():
    with pytest.raises(ValueError):
        CameraModel(focal=0.0)
    with pytest.raises(ValueError):
        CameraModel(half_fov=math.pi / 2)
    with pytest.raises(ValueError):
        CameraModel(half_fov=0.0)


# --- smallest enclosing circle ------------------------------------------------

def brute_force_circle(points):
    """Independent oracle: try every diameter pair and the circumcircle,
    keep the smallest candidate that covers all points."""
    def covers(center, r):
        return all(math.dist(center, p) <= r + 1e-12 for p in points)

    best = None
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            c = ((points[i][0] + points[j][0]) / 2,
                 (points[i][1] + points[j][1]) / 2)
            r = math.dist(points[i], points[j]) / 2
            if covers(c, r) and (best is None or r < best[1]):
                best = (c, r)
    if len(points) == 3:
        a, b, c = points
        # circumcenter via perpendicular-bisector linear system
        m = np.array([[b[0] - a[0], b[1] - a[1]],
                      [c[0] - a[0], c[1] - a[1]]])
        rhs = 0.5 * np.array([m[0] @ [a[0] + b[0], a[1] + b[1]],
                              m[1] @ [a[0] + c[0], a[1] + c[1]]])
        if abs(np.linalg.det(m)) > 1e-12:
            center = np.linalg.solve(m, rhs)
            r = max(math.dist(center, p) for p in points)
            if covers(center, r) and (best is None or r < best[1]):
                best = ((float(center[0]), float(center[1])), r)
    if len(points) == 1:
        best = (points[0], 0.0)
    return best


def test_single_point_circle():
    center, radius = enclosing_circle([(1.5, -2.0)])
    assert center == (1.5, -2.0)
    assert radius == 0.0


def test_two_point_circle():
    center, radius = enclosing_circle([(0.0, 0.0), (2.0, 0.0)])
    assert center == (1.0, 0.0)
    assert radius == 1.0


def test_three_point_hand_case():
    # (1,1) sits inside the diameter circle of (0,0)-(2,0): center (1,0), r 1
    center, radius = enclosing_circle([(0.0, 0.0), (2.0, 0.0), (1.0, 1.0)])
    assert center == pytest.approx((1.0, 0.0))
    assert radius == pytest.approx(1.0)


def test_collinear_points():
    center, radius = enclosing_circle([(0.0, 0.0), (1.0, 1.0), (3.0, 3.0)])
    assert center == pytest.approx((1.5, 1.5))
    assert radius == pytest.approx(math.dist((0, 0), (1.5, 1.5)))


def test_matches_brute_force_on_random_triples(rng):
    for _ in range(2000):
        pts = [tuple(rng.uniform(-10, 10, 2)) for _ in range(3)]
        center, radius = enclosing_circle(pts)
        _, r_ref = brute_force_circle(pts)
        assert radius == pytest.approx(r_ref, abs=1e-9)
        assert all(math.dist(center, p) <= radius + 1e-12 for p in pts)


def test_enclosing_circle_input_validation():
    with pytest.raises(ValueError):
        enclosing_circle([])
    with pytest.raises(ValueError):
        enclosing_circle([(0, 0)] * 4)
