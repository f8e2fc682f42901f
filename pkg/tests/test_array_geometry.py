import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from beamsim.array_geometry import (
    ArrayShape, DuplicateAngle, SteeringAngles, array_response, build_codebook,
    build_codebook_deg, steering_matrix, steering_vector,
)

angles = st.builds(SteeringAngles, st.floats(0, 2 * math.pi), st.floats(0, math.pi / 2))
shapes = st.builds(ArrayShape, st.integers(1, 5), st.integers(1, 5))

GRID_AZ = [15 + 30 * n for n in range(12)]


def scalar_steering(phi, theta, n_x, n_y, d=0.5):
    # per-element evaluation: index n_x * N_Y + n_y
    out = []
    for ix in range(n_x):
        for iy in range(n_y):
            ex = cmath.exp(-2j * math.pi * d * math.cos(phi) * math.sin(theta) * ix) / math.sqrt(n_x)
            ey = cmath.exp(-2j * math.pi * d * math.sin(phi) * math.sin(theta) * iy) / math.sqrt(n_y)
            out.append(ex * ey)
    return np.array(out)


def test_single_antenna():
    v = steering_vector(SteeringAngles(1.0, 0.3), ArrayShape(1, 1))
    assert np.allclose(v, [1.0])


def test_broadside_is_flat():
    v = steering_vector(SteeringAngles(0.7, 0.0), ArrayShape(4, 4))
    assert np.allclose(v, np.full(16, 0.25))


def test_matches_scalar_oracle():
    g = SteeringAngles.from_degrees(15, 15)
    assert np.allclose(steering_vector(g, ArrayShape(2, 2)), scalar_steering(g.azimuth, g.elevation, 2, 2))
    assert np.allclose(array_response(g, ArrayShape(4, 3)), scalar_steering(g.azimuth, g.elevation, 4, 3))


@given(angles, shapes)
def test_unit_norm_and_self_match(g, shape):
    v = steering_vector(g, shape)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(v, array_response(g, shape))) == pytest.approx(1.0, abs=1e-12)


@given(angles, shapes)
def test_opposite_azimuth_conjugates(g, shape):
    v = steering_vector(g, shape)
    w = steering_vector(SteeringAngles(g.azimuth + math.pi, g.elevation), shape)
    assert np.allclose(w, v.conj())


@given(st.lists(angles, min_size=1, max_size=6), shapes)
def test_steering_matrix_matches_rows(gs, shape):
    m = steering_matrix([g.azimuth for g in gs], [g.elevation for g in gs], shape)
    for row, g in zip(m, gs):
        assert np.allclose(row, steering_vector(g, shape))


def test_azimuth_is_wrapped():
    assert SteeringAngles(-math.pi / 2, 0.1).azimuth == pytest.approx(1.5 * math.pi)


def test_codebook_sizes_and_order():
    shape = ArrayShape(4, 4)
    w_cb = build_codebook_deg(GRID_AZ, [75, 15, 45], shape)
    f_cb = build_codebook_deg(GRID_AZ, [15], shape)
    assert len(w_cb) == 36 and len(f_cb) == 12
    assert np.allclose(w_cb.elevations_deg, np.repeat([15, 45, 75], 12))
    assert np.allclose(w_cb.azimuths_deg, np.tile(GRID_AZ, 3))
    assert np.allclose(np.linalg.norm(w_cb.vectors, axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        w_cb.vectors[0, 0] = 0


def test_single_entry_codebook_equals_steering_vector():
    shape = ArrayShape(3, 2)
    cb = build_codebook([0.4], [0.2], shape)
    assert np.allclose(cb[0], steering_vector(SteeringAngles(0.4, 0.2), shape))


def test_duplicate_angles_rejected():
    with pytest.raises(DuplicateAngle):
        build_codebook_deg([10, 10], [15], ArrayShape(2, 2))
    with pytest.raises(DuplicateAngle):
        build_codebook_deg([0, 360], [15], ArrayShape(2, 2))
    with pytest.raises(DuplicateAngle):
        build_codebook_deg([0], [15, 15], ArrayShape(2, 2))
    with pytest.raises(ValueError):
        build_codebook([], [0.1], ArrayShape(2, 2))
