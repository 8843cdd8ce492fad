import math

import numpy as np
import pytest

from fovtrack.camera import enclosing_circle
from fovtrack.manoeuvre import (FormationSegment, ManoeuvreKind, ManoeuvreSpec,
                                build_manoeuvre, formation_positions)

BOUNDS = (-5.0, 5.0, -5.0, 5.0)


def pairwise_distances(points):
    return sorted(math.dist(a, b) for i, a in enumerate(points)
                  for b in points[i + 1:])


def test_fixed_altitude_holds_formation_shape():
    spec = build_manoeuvre("fixed_altitude", BOUNDS, seed=4)
    base = pairwise_distances(formation_positions(spec, 0.0))
    for t in np.linspace(0.0, spec.duration, 40):
        assert pairwise_distances(formation_positions(spec, t)) == pytest.approx(base)


def test_climb_scale_grows_monotonically():
    spec = build_manoeuvre("climb", BOUNDS, seed=4)
    radii = [enclosing_circle(formation_positions(spec, t))[1]
             for t in np.linspace(0.0, spec.duration, 50)]
    assert all(r2 >= r1 - 1e-12 for r1, r2 in zip(radii, radii[1:]))
    assert radii[-1] > radii[0]


def test_descend_scale_shrinks_monotonically():
    spec = build_manoeuvre("descend", BOUNDS, seed=4)
    radii = [enclosing_circle(formation_positions(spec, t))[1]
             for t in np.linspace(0.0, spec.duration, 50)]
    assert all(r2 <= r1 + 1e-12 for r1, r2 in zip(radii, radii[1:]))
    assert radii[-1] < radii[0]


def test_combined_positions_continuous_at_segment_boundaries():
    for seed in range(8):
        spec = build_manoeuvre("combined", BOUNDS, seed=seed)
        for tb in spec.segment_boundaries:
            left = formation_positions(spec, tb - 1e-12)
            right = formation_positions(spec, tb + 1e-12)
            for (lx, ly), (rx, ry) in zip(left, right):
                assert math.hypot(rx - lx, ry - ly) < 1e-9


def test_combined_contains_every_primitive_kind():
    for seed in range(6):
        spec = build_manoeuvre("combined", BOUNDS, seed=seed)
        kinds = {s.kind for s in spec.segments}
        assert kinds == {ManoeuvreKind.FIXED_ALTITUDE, ManoeuvreKind.CLIMB,
                         ManoeuvreKind.DESCEND}


def test_time_clamped_to_program():
    spec = build_manoeuvre("climb", BOUNDS, seed=2)
    assert formation_positions(spec, -5.0) == formation_positions(spec, 0.0)
    assert formation_positions(spec, spec.duration + 10) == \
        formation_positions(spec, spec.duration)


def test_ugvs_stay_inside_bounds():
    for kind in ("fixed_altitude", "climb", "descend", "combined"):
        for seed in range(5):
            spec = build_manoeuvre(kind, BOUNDS, seed=seed)
            for t in np.linspace(0.0, spec.duration, 80):
                for x, y in formation_positions(spec, t):
                    assert BOUNDS[0] <= x <= BOUNDS[1]
                    assert BOUNDS[2] <= y <= BOUNDS[3]


def test_builders_are_deterministic_per_seed():
    a = build_manoeuvre("combined", BOUNDS, seed=11)
    b = build_manoeuvre("combined", BOUNDS, seed=11)
    assert a == b
    assert build_manoeuvre("combined", BOUNDS, seed=12) != a


def test_segment_validation():
    with pytest.raises(ValueError):
        FormationSegment(ManoeuvreKind.CLIMB, 5.0, (0, 0), (1, 1), 1.0, 0.5)
    with pytest.raises(ValueError):
        FormationSegment(ManoeuvreKind.DESCEND, 5.0, (0, 0), (1, 1), 1.0, 1.5)
    with pytest.raises(ValueError):
        FormationSegment(ManoeuvreKind.FIXED_ALTITUDE, 5.0, (0, 0), (1, 1), 1.0, 1.2)
    ok = FormationSegment(ManoeuvreKind.FIXED_ALTITUDE, 5.0, (0, 0), (1, 1), 1.0, 1.0)
    jump = FormationSegment(ManoeuvreKind.FIXED_ALTITUDE, 5.0, (9, 9), (2, 2), 1.0, 1.0)
    with pytest.raises(ValueError):
        ManoeuvreSpec(ManoeuvreKind.COMBINED, (ok, jump))
    with pytest.raises(ValueError):
        ManoeuvreSpec(ManoeuvreKind.COMBINED, ())
