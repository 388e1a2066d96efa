import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imuface.calib import (
    CalibrationProfile,
    MagCalibration,
    align_acceleration,
    apply_mag_calibration,
    calibrate_sequence,
    head_compensate_frame,
    mag_calibrate,
    relative_rotation,
)
from imuface.geom import matrix_to_quat, quat_to_matrix, random_quats, rotation_about
from imuface.sequence import ImuSequence


def corners(lo, hi):
    return np.array(list(itertools.product(*zip(lo, hi))), dtype=float)


def random_rotations(rng, n):
    return quat_to_matrix(random_quats(rng, n))


# ------------------------------------------------------------ magnetometer


def test_mag_symmetric():
    c = mag_calibrate(corners([-1, -1, -1], [1, 1, 1]))
    assert np.array_equal(c.offset, [0, 0, 0])
    assert np.array_equal(c.scale, [1, 1, 1])


def test_mag_range_example():
    c = mag_calibrate(corners([1, -2, -1], [3, 2, 1]))
    assert np.allclose(c.offset, [2, 0, 0], atol=1e-12)
    assert np.allclose(c.scale, [4 / 3, 2 / 3, 4 / 3], atol=1e-12)


def test_mag_outlier_ignored():
    base = corners([1, -2, -1], [3, 2, 1])
    with_outlier = np.vstack([base, [100.0, 100.0, 100.0]])
    a, b = mag_calibrate(base), mag_calibrate(with_outlier)
    assert np.allclose(a.offset, b.offset, atol=1e-12)
    assert np.allclose(a.scale, b.scale, atol=1e-12)


def test_mag_errors():
    with pytest.raises(ValueError, match="no magnetometer"):
        mag_calibrate(np.empty((0, 3)))
    flat_y = corners([0, 5, 0], [1, 5, 1])
    with pytest.raises(ValueError, match="axis y"):
        mag_calibrate(flat_y)
    with pytest.raises(ValueError):
        mag_calibrate([[1.0, 2.0, 3.0]])


def test_apply_mag_examples():
    c = MagCalibration([2, 0, 0], [4 / 3, 2 / 3, 4 / 3])
    assert np.allclose(apply_mag_calibration(c, [3, 2, 1]), [4 / 3, 4 / 3, 4 / 3], atol=1e-12)
    assert np.allclose(apply_mag_calibration(c, c.offset), 0)
    m = np.array([0.3, -2.0, 7.5])
    assert np.array_equal(apply_mag_calibration(MagCalibration.identity(), m), m)


def test_mag_scale_must_be_positive():
    with pytest.raises(ValueError):
        MagCalibration([0, 0, 0], [1, 0, 1])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (40, 3), elements=st.floats(-50, 50)))
def test_calibrated_ranges_equalized(samples):
    span = np.ptp(samples, axis=0)
    if np.any(span < 1e-3):
        return
    c = mag_calibrate(samples, outlier_k=np.inf)
    out = apply_mag_calibration(c, samples)
    assert np.allclose(np.ptp(out, axis=0), span.mean(), atol=1e-9)


# --------------------------------------------------------------- rotations


def test_relative_rotation(rng):
    N, R = random_rotations(rng, 2)
    assert np.allclose(relative_rotation(N, N), np.eye(3), atol=1e-12)
    assert np.allclose(relative_rotation(np.eye(3), R), R)
    assert np.allclose(relative_rotation(N, R), np.linalg.inv(N) @ R, atol=1e-12)


def test_align_acceleration(rng):
    assert np.allclose(align_acceleration(np.eye(3), [1, 2, 3]), [1, 2, 3])
    assert np.allclose(align_acceleration(rotation_about([0, 0, 1], np.pi / 2), [1, 0, 0]), [0, -1, 0], atol=1e-15)
    R = random_rotations(rng, 1)[0]
    a = rng.normal(size=3)
    assert np.isclose(np.linalg.norm(align_acceleration(R, a)), np.linalg.norm(a))


def profile_for(n, rng, aux=0):
    return CalibrationProfile(random_rotations(rng, n), aux)


def test_head_compensate_common_rotation(rng):
    prof = profile_for(4, rng)
    G = random_rotations(rng, 1)[0]
    R, a = head_compensate_frame(prof, [G] * 4, np.zeros((4, 3)))
    for i in range(1, 4):
        assert np.allclose(R[i], np.eye(3), atol=1e-12)
    assert np.allclose(R[0], G)
    assert np.allclose(a, 0)


def test_head_compensate_identity_aux(rng):
    prof = profile_for(4, rng)
    rels = random_rotations(rng, 4)
    rels[0] = np.eye(3)
    acc = rng.normal(size=(4, 3))
    R, a = head_compensate_frame(prof, rels, acc)
    assert np.allclose(R, rels)
    assert np.allclose(a, acc)


@pytest.mark.parametrize("mode", ["literal", "inverse"])
def test_head_compensate_oracle(rng, mode):
    prof = profile_for(5, rng, aux=2)
    rels = random_rotations(rng, 5)
    acc = rng.normal(size=(5, 3))
    R, a = head_compensate_frame(prof, rels, acc, mode)
    R0 = rels[2]
    head = np.linalg.inv(R0) if mode == "literal" else R0
    for i in range(5):
        if i == 2:
            assert np.array_equal(R[i], rels[i]) and np.array_equal(a[i], acc[i])
        else:
            assert np.allclose(R[i], np.linalg.inv(R0) @ rels[i], atol=1e-12)
            assert np.allclose(a[i], head @ acc[i], atol=1e-12)


def test_head_compensate_keyed_and_missing_aux(rng):
    prof = profile_for(3, rng)
    rels = dict(enumerate(random_rotations(rng, 3)))
    acc = {i: rng.normal(size=3) for i in range(3)}
    R, a = head_compensate_frame(prof, rels, acc)
    assert np.allclose(R[1], rels[0].T @ rels[1], atol=1e-12)
    del rels[0], acc[0]
    with pytest.raises(KeyError):
        head_compensate_frame(prof, rels, acc)
    with pytest.raises(ValueError):
        head_compensate_frame(prof, [np.eye(3)], [np.zeros(3)], "sideways")


# -------------------------------------------------------------- sequences


def seq_from_matrices(R, a):
    F, S = R.shape[:2]
    return ImuSequence(matrix_to_quat(R), a, tuple(range(S)))


def test_calibrate_neutral_pose(rng):
    prof = profile_for(6, rng)
    R = np.broadcast_to(prof.neutral, (5, 6, 3, 3)).copy()
    out = calibrate_sequence(prof, seq_from_matrices(R, np.zeros((5, 6, 3))))
    assert np.allclose(np.abs(out.quats[..., 0]), 1.0, atol=1e-12)
    assert np.allclose(out.accels, 0)


def test_calibrate_matches_frame_loop(rng):
    prof = profile_for(4, rng, aux=0)
    F = 7
    R = random_rotations(rng, F * 4).reshape(F, 4, 3, 3)
    acc = rng.normal(size=(F, 4, 3))
    out = calibrate_sequence(prof, seq_from_matrices(R, acc))
    for j in range(F):
        rels = [relative_rotation(prof.neutral[i], R[j, i]) for i in range(4)]
        aligned = [align_acceleration(R[j, i], acc[j, i]) for i in range(4)]
        Rc, ac = head_compensate_frame(prof, rels, aligned)
        assert np.allclose(quat_to_matrix(out.quats[j]), Rc, atol=1e-9)
        assert np.allclose(out.accels[j], ac, atol=1e-12)


def test_expression_passthrough(rng):
    prof = profile_for(3, rng)
    F = 4
    R = random_rotations(rng, F * 3).reshape(F, 3, 3, 3)
    R[:, 0] = prof.neutral[0]
    acc = rng.normal(size=(F, 3, 3))
    out = calibrate_sequence(prof, seq_from_matrices(R, acc))
    expect_R = relative_rotation(prof.neutral[None], R)
    expect_a = align_acceleration(R, acc)
    assert np.allclose(quat_to_matrix(out.quats), expect_R, atol=1e-9)
    assert np.allclose(out.accels, expect_a, atol=1e-12)


def test_calibrate_errors(rng):
    prof = profile_for(2, rng)
    seq = seq_from_matrices(random_rotations(rng, 3).reshape(1, 3, 3, 3), np.zeros((1, 3, 3)))
    with pytest.raises(KeyError):
        calibrate_sequence(prof, seq)
    no_aux = ImuSequence(seq.quats[:, 1:2], seq.accels[:, 1:2], (1,))
    with pytest.raises(KeyError):
        calibrate_sequence(prof, no_aux)


def test_profile_json_round_trip(tmp_path, rng):
    prof = CalibrationProfile(random_rotations(rng, 3), 0, [MagCalibration([1, 2, 3], [1, 0.5, 2])] * 3)
    path = tmp_path / "p.json"
    prof.save(path)
    back = CalibrationProfile.load(path)
    assert np.array_equal(back.neutral, prof.neutral)
    assert back.aux_index == 0 and back.mag[0].to_dict() == prof.mag[0].to_dict()
    d = prof.to_dict()
    assert d["convention"] == "world_to_sensor" and len(d["neutral"][0]) == 9


def test_profile_validation(rng):
    with pytest.raises(ValueError):
        CalibrationProfile(np.stack([np.eye(3), np.diag([1.0, 1, -1])]))
    with pytest.raises(ValueError):
        CalibrationProfile(random_rotations(rng, 2), aux_index=5)
