import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imuface.geom import (
    IDENTITY_QUAT,
    matrix_to_quat,
    quat_from_axis_angle,
    quat_inverse,
    quat_multiply,
    quat_to_matrix,
    random_quats,
    slerp,
)

S = np.sqrt(0.5)


def rz(deg):
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def same_rotation(a, b, tol=1e-9):
    return np.allclose(a, b, atol=tol) or np.allclose(a, -b, atol=tol)


unit_quats = arrays(np.float64, 4, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 1e-3).map(
    lambda v: v / np.linalg.norm(v)
)


def test_identity_product():
    q = np.array([0.5, 0.5, -0.5, 0.5])
    assert np.allclose(quat_multiply(IDENTITY_QUAT, q), q)


def test_inverse_product():
    q = random_quats(np.random.default_rng(0), 1)[0]
    assert np.allclose(quat_multiply(q, quat_inverse(q)), IDENTITY_QUAT, atol=1e-12)


def test_hamilton_basis():
    i, j, k = np.eye(4)[1], np.eye(4)[2], np.eye(4)[3]
    assert np.allclose(quat_multiply(i, j), k)
    assert np.allclose(quat_multiply(j, k), i)
    assert np.allclose(quat_multiply(k, i), j)


def test_quarter_turns_compose():
    q = np.array([S, 0, 0, S])  # 90 deg about z
    qq = quat_multiply(q, q)
    assert np.allclose(quat_to_matrix(qq), rz(90) @ rz(90), atol=1e-12)
    assert np.allclose(qq, [0, 0, 0, 1], atol=1e-12)


def test_to_matrix_examples():
    assert np.allclose(quat_to_matrix(IDENTITY_QUAT), np.eye(3))
    assert np.allclose(quat_to_matrix([S, 0, 0, S]), [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_to_matrix_rejects_non_unit():
    with pytest.raises(ValueError):
        quat_to_matrix([1.0, 0.1, 0.0, 0.0])


def test_matrix_to_quat_examples():
    assert np.allclose(matrix_to_quat(np.eye(3)), IDENTITY_QUAT)
    assert np.allclose(matrix_to_quat(np.diag([1.0, -1.0, -1.0])), [0, 1, 0, 0])


def test_matrix_to_quat_rejects_reflection():
    with pytest.raises(ValueError):
        matrix_to_quat(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        matrix_to_quat(np.eye(3) * 1.1)


def test_round_trip_1000():
    q = random_quats(np.random.default_rng(7), 1000)
    back = matrix_to_quat(quat_to_matrix(q))
    err = np.minimum(np.abs(back - q).max(axis=1), np.abs(back + q).max(axis=1))
    assert err.max() < 1e-9
    assert np.all(back[:, 0] >= 0)


def test_slerp_examples():
    a, b = IDENTITY_QUAT, np.array([S, 0, 0, S])
    assert np.allclose(slerp(a, b, 0.0), a)
    assert np.allclose(slerp(a, b, 1.0), b)
    assert np.allclose(slerp(a, b, 0.5), quat_from_axis_angle([0, 0, 1], np.pi / 4), atol=1e-12)


def test_slerp_antipodal_takes_short_path():
    b = np.array([S, 0, 0, S])
    mid = slerp(IDENTITY_QUAT, -b, 0.5)
    assert same_rotation(mid, quat_from_axis_angle([0, 0, 1], np.pi / 4), 1e-12)


@settings(max_examples=200, deadline=None)
@given(unit_quats, unit_quats)
def test_product_matches_matrix_product(a, b):
    ab = quat_multiply(a, b)
    assert np.allclose(quat_to_matrix(ab), quat_to_matrix(a) @ quat_to_matrix(b), atol=1e-9)
    assert abs(np.linalg.norm(ab) - 1.0) < 1e-9


@settings(max_examples=200, deadline=None)
@given(unit_quats)
def test_matrix_is_proper_rotation(q):
    R = quat_to_matrix(q)
    assert abs(np.linalg.det(R) - 1.0) < 1e-9
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-9)
    assert same_rotation(matrix_to_quat(R), q)


@settings(max_examples=100, deadline=None)
@given(unit_quats, unit_quats, st.floats(0, 1))
def test_slerp_unit(a, b, t):
    assert abs(np.linalg.norm(slerp(a, b, t)) - 1.0) < 1e-9
