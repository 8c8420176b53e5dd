import math

import numpy as np
import pytest

import modfuse


def random_spd(rng, n):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q @ np.diag(10.0 ** rng.uniform(-1, 1, n)) @ q.T


def test_wrap_angle_and_names():
    assert modfuse.wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert modfuse.wrap_angle(3 * math.pi + 0.5) == pytest.approx(-math.pi + 0.5)
    assert modfuse.method_names() == ["joint", "fsafe", "fkalman", "safe", "kalman"]


def test_ci_fuse_against_numpy():
    rng = np.random.default_rng(1)
    pa, pb = random_spd(rng, 3), random_spd(rng, 3)
    xa, xb = rng.normal(size=3), rng.normal(size=3)
    x, p, a = modfuse.ci_fuse(xa, pa, xb, pb)
    ia, ib = np.linalg.inv(pa), np.linalg.inv(pb)
    info = a * ia + (1 - a) * ib
    np.testing.assert_allclose(np.linalg.inv(p), info, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(x, np.linalg.solve(info, a * ia @ xa + (1 - a) * ib @ xb), rtol=1e-9)
    grid = np.linspace(0, 1, 2001)
    best = min(-np.linalg.slogdet(g * ia + (1 - g) * ib)[1] for g in grid)
    assert -np.linalg.slogdet(info)[1] <= best + 1e-9


def test_inflated_kalman_update_against_numpy():
    rng = np.random.default_rng(2)
    p1, p2, w = random_spd(rng, 2), random_spd(rng, 2), random_spd(rng, 2)
    x1, x2, z = rng.normal(size=2), rng.normal(size=2), rng.normal(size=2)
    a1, a2 = np.eye(2), -np.eye(2)
    mean, cov, alpha = modfuse.modular_fusion_update(x1, p1, x2, p2, z, w, a1, a2, ci_weights=False)
    assert alpha == 1.0
    s = p1 + p2 + w
    k = p1 @ np.linalg.inv(s)
    np.testing.assert_allclose(mean, x1 + k @ (z - x1 + x2), rtol=1e-10)
    np.testing.assert_allclose(cov, p1 - k @ p1, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(modfuse.inflate_noise(a1, a2, x1, x2, p2, z, w), w + p2, rtol=1e-12)


def test_bearing_updates():
    pose = np.array([1.0, -2.0, 0.3])
    lm = pose[:2] + 6.0 * np.array([math.cos(0.7), math.sin(0.7)])
    angle = modfuse.true_bearing(pose, lm)
    assert angle == pytest.approx(0.4)
    for method in ["fsafe", "fkalman", "safe", "kalman"]:
        pos, cov, alpha, skipped = modfuse.landmark_bearing_update(lm, 40 * np.eye(2), pose, np.eye(3), angle, 0.05, method)
        assert not skipped
        np.testing.assert_allclose(pos, lm, atol=1e-12)
        assert np.linalg.det(cov) < 1600.0
        assert 0.0 <= alpha <= 1.0
        new_pose, pcov, _, _ = modfuse.robot_bearing_update(pose, np.eye(3), lm, 40 * np.eye(2), angle, 0.05, method)
        np.testing.assert_allclose(new_pose, pose, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(pcov) > 0)
    with pytest.raises(ValueError):
        modfuse.landmark_bearing_update(lm, np.eye(2), pose, np.eye(3), angle, 0.05, "joint")


def test_small_study_is_repeatable():
    cfg = {"n_trials": 6, "seed": 3}
    summary, rows = modfuse.run_study(cfg, threads=1)
    again, rows4 = modfuse.run_study(cfg, threads=4)
    assert len(rows) == 30
    assert rows == rows4
    assert summary == again
    assert [m["method"] for m in summary["methods"]] == modfuse.method_names()
    for m in summary["methods"]:
        assert m["n_trials"] == 6
        assert m["q1"] <= m["median"] <= m["q3"]


def test_config_errors():
    assert modfuse.default_config()["T"] == 100
    with pytest.raises(modfuse.ConfigError, match="stepz"):
        modfuse.run_study({"stepz": 3})
    with pytest.raises(ValueError):
        modfuse.run_study({"gps_period": 0})
