import math

import numpy as np
import pytest

import starquad as sq
from starquad.lemmas import (
    AuxConfig,
    fd_jacobian,
    p_map,
    phi_map,
    psi_map,
    random_aux_config,
    sample_point_pairs,
)


def _cfg(o, r, x_star, x=None, t=1.0, R=None):
    return AuxConfig(o=np.asarray(o, float), R=R if R is not None else r,
                     r=r, x_star=np.asarray(x_star, float),
                     x=None if x is None else np.asarray(x, float), t=t)


# -- determinant identity ---------------------------------------------------

def test_det_identity_scaled_identity():
    formula, direct = sq.det_identity(2.0, 0.0, np.zeros(3), np.zeros(3))
    assert formula == 8.0
    assert direct == pytest.approx(8.0, rel=1e-12)


def test_det_identity_nilpotent():
    formula, direct = sq.det_identity(1.0, 1.0, [1.0, 0.0], [0.0, 1.0])
    assert formula == pytest.approx(1.0)
    assert direct == pytest.approx(1.0)


def test_det_identity_worked_3d():
    formula, direct = sq.det_identity(2.0, 3.0, [1, 2, 0], [1, 1, 1])
    assert formula == pytest.approx(44.0)
    assert direct == pytest.approx(44.0, rel=1e-12)


def test_det_identity_random_sizes():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d = int(rng.integers(2, 7))
        alpha, beta = rng.normal(size=2)
        u, v = rng.normal(size=(2, d))
        formula, direct = sq.det_identity(alpha, beta, u, v)
        assert abs(formula - direct) <= 1e-9 * (1.0 + abs(direct))


# -- the pullback map ---------------------------------------------------------

def test_p_map_fixes_the_node():
    cfg = _cfg([0.0, 0.0], 1.0, [3.0, 0.0], x=[3.0, 0.0])
    assert np.allclose(p_map(cfg), [3.0, 0.0])


def test_p_map_symmetric_collinear():
    cfg = _cfg([0.0, 0.0], 1.0, [-2.0, 0.0], x=[2.0, 0.0])
    assert np.allclose(p_map(cfg), [0.0, 0.0], atol=1e-15)


def test_p_map_diagonal_example():
    cfg = _cfg([0.0, 0.0], 1.0, [0.0, 4.0], x=[4.0, 0.0])
    expected = np.array([4.0, 4.0]) / (2.0 + 4.0 * math.sqrt(2))
    assert np.allclose(p_map(cfg), expected, atol=1e-12)


def test_geometric_sense_on_example():
    cfg = _cfg([0.0, 0.0], 1.0, [0.0, 4.0], x=[4.0, 0.0])
    assert sq.geometric_sense_check(cfg) <= 1e-10


def test_geometric_sense_random():
    rng = np.random.default_rng(1)
    done = 0
    while done < 1000:
        cfg = random_aux_config(rng)
        try:
            residual = sq.geometric_sense_check(cfg)
        except sq.CollinearConfigError:
            continue
        assert residual <= 1e-10
        done += 1


def test_geometric_sense_collinear_branch():
    o = np.zeros(2)
    x = np.array([2.0, 0.0])
    angle = 1e-6
    x_star = 3.0 * np.array([math.cos(angle), math.sin(angle)])
    cfg = _cfg(o, 0.5, x_star, x=x)
    with pytest.raises(sq.CollinearConfigError):
        sq.geometric_sense_check(cfg)


# -- distance bound -----------------------------------------------------------

def test_distance_bound_on_cross(cross):
    rng = np.random.default_rng(2)
    diam = sq.diameter(cross)
    pairs = sample_point_pairs(cross, 2000, max_sep=cross.ball_radius, rng=rng)
    for x, x_star in pairs:
        cfg = _cfg(cross.center, cross.ball_radius, x_star, x=x)
        report = sq.distance_bound_check(cross, cfg, diam=diam)
        assert report.passed


def test_distance_bound_degenerate_pair(cross):
    x = np.array([2.0, 0.5])
    cfg = _cfg(cross.center, cross.ball_radius, x, x=x)
    report = sq.distance_bound_check(cross, cfg)
    assert report.passed
    assert report.worst_ratio == 0.0


def test_distance_bound_convex_margin(square):
    rng = np.random.default_rng(3)
    diam = sq.diameter(square)
    C = diam * math.sqrt(2) / (2 * square.ball_radius)
    pairs = sample_point_pairs(square, 500, max_sep=0.2, rng=rng)
    worst = 0.0
    for x, x_star in pairs:
        cfg = _cfg(square.center, square.ball_radius, x_star, x=x)
        report = sq.distance_bound_check(square, cfg, diam=diam)
        assert report.passed
        worst = max(worst, report.worst_ratio)
    assert worst < C / 2  # chords of a convex set leave a wide margin


# -- Jacobians ------------------------------------------------------------------

def test_jacobian_p_collinear_case():
    cfg = _cfg([0.0, 0.0], 1.0, [-4.0, 0.0], x=[4.0, 0.0])
    assert np.allclose(sq.jacobian_p(cfg), np.eye(2) / 10.0, atol=1e-15)


def test_jacobian_phi_worked_value():
    cfg = _cfg([0.0, 0.0], 1.0, [-4.0, 0.0], x=[4.0, 0.0], t=1.0)
    assert sq.jacobian_phi(cfg) == pytest.approx(0.01, rel=1e-12)


def test_jacobian_phi_vanishes_at_zero_time():
    cfg = _cfg([0.1, -0.2], 0.7, [2.0, 1.0], x=[1.0, 2.0], t=0.0)
    assert sq.jacobian_phi(cfg) == 0.0


def test_jacobian_phi_time_scaling():
    rng = np.random.default_rng(4)
    for _ in range(50):
        cfg = random_aux_config(rng)
        cfg1 = AuxConfig(o=cfg.o, R=cfg.R, r=cfg.r, x_star=cfg.x_star,
                         x=cfg.x, t=1.0)
        assert sq.jacobian_phi(cfg) == pytest.approx(
            cfg.t ** cfg.d * sq.jacobian_phi(cfg1), rel=1e-12, abs=1e-15
        )


def test_jacobian_matrix_against_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(100):
        cfg = random_aux_config(rng)
        fd = fd_jacobian(lambda z: p_map(cfg, z), cfg.x)
        scale = max(1.0, float(np.abs(fd).max()))
        assert np.abs(sq.jacobian_p(cfg) - fd).max() <= 1e-6 * scale


def test_jacobian_determinants_against_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(100):
        cfg = random_aux_config(rng)
        fd_phi = np.linalg.det(fd_jacobian(lambda z: phi_map(cfg, z), cfg.x))
        assert sq.jacobian_phi(cfg) == pytest.approx(fd_phi, rel=1e-6, abs=1e-10)
        fd_psi = np.linalg.det(fd_jacobian(lambda z: psi_map(cfg, z), cfg.x))
        assert sq.jacobian_psi(cfg) == pytest.approx(fd_psi, rel=1e-6, abs=1e-10)


def test_jacobian_psi_identity_at_t1():
    rng = np.random.default_rng(7)
    for _ in range(100):
        cfg = random_aux_config(rng)
        cfg1 = AuxConfig(o=cfg.o, R=cfg.R, r=cfg.r, x_star=cfg.x_star,
                         x=cfg.x, t=1.0)
        assert sq.jacobian_psi(cfg1) == 1.0


def test_jacobian_psi_t0_matches_p_matrix():
    rng = np.random.default_rng(8)
    for _ in range(100):
        cfg = random_aux_config(rng)
        cfg0 = AuxConfig(o=cfg.o, R=cfg.R, r=cfg.r, x_star=cfg.x_star,
                         x=cfg.x, t=0.0)
        det_p = np.linalg.det(sq.jacobian_p(cfg0))
        assert sq.jacobian_psi(cfg0) == pytest.approx(det_p, rel=1e-12)


def test_jacobian_phi_t1_matches_p_matrix():
    rng = np.random.default_rng(12)
    for _ in range(50):
        cfg = random_aux_config(rng)
        cfg1 = AuxConfig(o=cfg.o, R=cfg.R, r=cfg.r, x_star=cfg.x_star,
                         x=cfg.x, t=1.0)
        det_p = np.linalg.det(sq.jacobian_p(cfg1))
        assert sq.jacobian_phi(cfg1) == pytest.approx(det_p, rel=1e-12)


def test_aux_config_validation():
    with pytest.raises(ValueError):
        _cfg([0.0, 0.0], 1.0, [0.5, 0.0])  # node inside the ball
    with pytest.raises(ValueError):
        AuxConfig(o=np.zeros(2), R=1.0, r=1.5, x_star=np.array([3.0, 0.0]))


# -- preimages -------------------------------------------------------------------

def test_preimage_identity_time():
    o = np.array([0.2, -0.1])
    x_star = o + np.array([2.0, 1.0])
    q = o + np.array([0.5, 1.2])
    count, pts = sq.preimage_count(o, x_star, 0.8, 1.0, q)
    assert count == 1
    assert np.allclose(pts[0], q, atol=1e-9)


def test_preimage_forward_at_t0():
    o = np.array([0.0, 0.0])
    x_star = np.array([2.0, 1.0])
    x = np.array([1.5, -2.0])
    cfg = _cfg(o, 0.8, x_star, x=x, t=0.0)
    q = psi_map(cfg)
    count, pts = sq.preimage_count(o, x_star, 0.8, 0.0, q)
    assert count >= 1
    assert any(np.allclose(p, x, atol=1e-7) for p in pts)


def test_preimage_collinear_branch():
    o = np.zeros(2)
    x_star = np.array([2.0, 0.0])
    x = np.array([3.0, 0.0])
    cfg = _cfg(o, 0.5, x_star, x=x, t=0.4)
    q = psi_map(cfg)
    count, pts = sq.preimage_count(o, x_star, 0.5, 0.4, q)
    assert 1 <= count <= 4
    assert any(np.allclose(p, x, atol=1e-7) for p in pts)


def test_preimage_rejects_bad_time():
    with pytest.raises(ValueError):
        sq.preimage_count(np.zeros(2), np.array([2.0, 0.0]), 0.5, 1.5,
                          np.array([1.0, 1.0]))


def test_preimage_off_plane_count_zero():
    # a target whose ordinate violates the necessary condition has no preimage
    o = np.zeros(2)
    x_star = np.array([0.0, 2.0])
    count, pts = sq.preimage_count(o, x_star, 0.5, 0.0, np.array([5.0, 5.0]))
    assert (count, pts) == (0, []) or all(
        np.linalg.norm(psi_map(_cfg(o, 0.5, x_star, x=p, t=0.0)) -
                       np.array([5.0, 5.0])) < 1e-6 for p in pts
    )


def test_preimage_counts_and_scan_agree():
    rng = np.random.default_rng(10)
    checked = 0
    while checked < 300:
        cfg = random_aux_config(rng)
        q = psi_map(cfg)
        count, _ = sq.preimage_count(cfg.o, cfg.x_star, cfg.r, cfg.t, q)
        oracle = sq.scan_preimage_count(cfg.o, cfg.x_star, cfg.r, cfg.t, q)
        assert count <= 4
        assert count == oracle, (cfg, count, oracle)
        checked += 1


# -- remainder-region bounds -------------------------------------------------

def test_w_region_small_n_refuses(cross):
    rule = sq.build_rule(cross, 256, subgrid=4)
    with pytest.raises(sq.PreconditionError):
        sq.w_region_bounds(cross, rule)


def test_w_region_moderate_n_passes(cross):
    rule = sq.build_rule(cross, 8192, subgrid=4)
    report = sq.w_region_bounds(cross, rule, samples=5000)
    assert report.passed
    assert report.min_margin_13 > 0
    assert report.min_margin_2 > 0


def test_w_region_w3_monotone_bound():
    # a nonnegative band projection makes the radius-R Jacobian at least
    # 2 R^(d+1) / (2R + R/8)^(d+1), which clears the 3^-(d+1) threshold
    R = 0.5
    d = 2
    ell = R / 8
    value = R ** d / (2 * R + ell) ** (d + 1) * (2 * R + ell)
    assert value > 1.0 / 3 ** (d + 1)


def test_verify_lemmas_table_runs_quickly():
    rows = sq.verify_lemmas(seed=0, trials_scale=0.01)
    names = [r.check for r in rows]
    assert names == [
        "det-identity", "p-map-geometry", "distance-bound", "jacobian-p-fd",
        "jacobian-phi-fd", "jacobian-psi-fd", "psi-identity-t1",
        "preimage-quartic", "segment-identity", "w-region-bounds",
    ]
    assert all(r.passed for r in rows)
    assert rows[-1].skipped
