"""End-to-end acceptance gate.

One test per criterion; each prints a single `[acceptance] ... PASS` line
(run pytest with `-s` to see them live).  Tolerances and runtime limits are
asserted as stated, never loosened at run time.
"""

import math
import time

import numpy as np
import pytest

import starquad as sq
from starquad.lemmas import psi_map, random_aux_config, sample_point_pairs
from starquad.partition import rule_to_csv
from starquad.report import report_to_csv


def _pass(num, name, detail, elapsed, limit):
    assert elapsed < limit, f"criterion {num} exceeded {limit}s ({elapsed:.1f}s)"
    print(f"[acceptance] criterion {num:02d} {name}: PASS "
          f"({detail}; {elapsed:.2f}s < {limit:.0f}s)")


@pytest.fixture(scope="module")
def cross():
    return sq.example_domain("cross")


@pytest.fixture(scope="module")
def cross_bracket(cross):
    return sq.jordan_measure(cross, 1152)


@pytest.fixture(scope="module")
def cross_rule_65536(cross, cross_bracket):
    return sq.build_rule(cross, 65536, subgrid=4, bracket=cross_bracket)


def test_c01_constant_closed_form():
    t0 = time.perf_counter()
    c2 = sq.cdp_constant(2, "inf")
    c3 = sq.cdp_constant(3, "inf")
    assert abs(c2 - 8.0 / 3.0) <= 1e-9 * (8.0 / 3.0)
    assert abs(c3 - 6.0) <= 1e-9 * 6.0
    _pass(1, "constant closed form",
          f"c(2,inf)={c2:.12f}, c(3,inf)={c3:.12f}",
          time.perf_counter() - t0, 1.0)


def test_c02_constant_finite_p_monte_carlo():
    t0 = time.perf_counter()
    details = []
    for d, p in ((2, 3), (2, 4), (3, 4)):
        quad_val = sq.cdp_constant(d, p)
        mc_val = sq.mc_cdp_constant(d, p, samples=10_000_000, seed=0)
        rel = abs(quad_val - mc_val) / quad_val
        assert rel <= 5e-3, (d, p, quad_val, mc_val)
        details.append(f"({d},{p}): rel={rel:.2e}")
    _pass(2, "constant vs Monte Carlo", "; ".join(details),
          time.perf_counter() - t0, 30.0)


def test_c03_worked_rule_unit_square():
    t0 = time.perf_counter()
    square = sq.example_domain("square")
    rule = sq.build_rule(square, 4, subgrid=8)
    centers = sorted(map(tuple, rule.nodes.tolist()))
    assert centers == [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)]
    assert rule.weights.tolist() == [0.25, 0.25, 0.25, 0.25]
    assert rule.sum_weights == 1.0
    _pass(3, "worked rule n=4", "four grid centers, weights exactly 0.25",
          time.perf_counter() - t0, 1.0)


def test_c04_exact_worst_case_aligned_squares():
    t0 = time.perf_counter()
    square = sq.example_domain("square")
    exp = sq.Exponent.parse("inf")
    details = []
    for m in (2, 8, 32):
        n = m * m
        rule = sq.build_rule(square, n, subgrid=4)
        fool = sq.fooling_function(rule, exp)
        err = abs(sq.reference_integral(square, fool, 4096)
                  - sq.evaluate(rule, fool))
        exact = n ** -0.5 / 3.0
        bound = sq.theorem_bound(2, exp, 1.0, n)
        assert abs(err - exact) <= 5e-3 * exact, (m, err, exact)
        assert abs(err - bound) <= 5e-3 * bound, (m, err, bound)
        details.append(f"m={m}: rel={abs(err - exact) / exact:.1e}")
    _pass(4, "aligned-square worst case", "; ".join(details),
          time.perf_counter() - t0, 120.0)


def test_c05_nonconvex_rate(cross):
    t0 = time.perf_counter()
    report = sq.run_convergence(
        cross, "inf", [64, 128, 256, 5500, 16384],
        subgrid=4, resolution=4096, seed=0,
    )
    assert not report.failures
    assert -0.56 <= report.slope <= -0.44, report.slope
    final = report.rows[-1]
    assert final.n == 16384
    assert 0.80 <= final.ratio <= 1.20, final.ratio
    top3 = [row.ratio for row in report.rows[-3:]]
    assert top3[0] >= top3[1] >= top3[2], top3
    _pass(5, "non-convex rate",
          f"slope={report.slope:.4f}, ratio@16384={final.ratio:.4f}, "
          f"top3={[round(r, 4) for r in top3]}",
          time.perf_counter() - t0, 600.0)


def test_c06_node_and_cell_suite(cross, cross_bracket, cross_rule_65536):
    t0 = time.perf_counter()
    n_list = (256, 4096, 65536)
    remainders = {}
    for name in ("square", "disk", "cross", "star-polygon"):
        dom = cross if name == "cross" else sq.example_domain(name)
        bracket = cross_bracket if name == "cross" else sq.jordan_measure(dom, 1152)
        rems = []
        for n in n_list:
            if name == "cross" and n == 65536:
                rule = cross_rule_65536
            else:
                rule = sq.build_rule(dom, n, subgrid=4, bracket=bracket)
            assert len(rule) <= n, (name, n, len(rule))
            checks = sq.check_nodeset_invariants(dom, rule.nodeset)
            assert checks["one_per_small_cube"], (name, n)
            assert checks["all_inside"], (name, n)
            diag = rule.diagnostics.subcell_side * math.sqrt(dom.d)
            assert rule.diagnostics.max_assign_linf <= 6 * rule.h_n + diag, \
                (name, n)
            rems.append(rule.diagnostics.remainder)
        remainders[name] = rems
    for name in ("disk", "cross", "star-polygon"):  # non-aligned domains
        rems = remainders[name]
        assert rems[0] > rems[1] > rems[2], (name, rems)
    _pass(6, "node/cell suite",
          f"remainders {({k: [round(v, 4) for v in r] for k, r in remainders.items()})}",
          time.perf_counter() - t0, 300.0)


def test_c07_determinant_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(2, 7))
        alpha, beta = rng.normal(size=2)
        u, v = rng.normal(size=(2, d))
        formula, direct = sq.det_identity(alpha, beta, u, v)
        worst = max(worst, abs(formula - direct) / (1.0 + abs(direct)))
    assert worst <= 1e-9
    _pass(7, "determinant identity", f"worst rel err {worst:.2e}",
          time.perf_counter() - t0, 1.0)


def test_c08_jacobian_formulas():
    t0 = time.perf_counter()
    from starquad.lemmas import AuxConfig, fd_jacobian, p_map, phi_map, psi_map

    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        cfg = random_aux_config(rng)
        fd_mat = fd_jacobian(lambda z: p_map(cfg, z), cfg.x)
        scale = max(1.0, float(np.abs(fd_mat).max()))
        worst = max(worst,
                    float(np.abs(sq.jacobian_p(cfg) - fd_mat).max()) / scale)
        fd_phi = float(np.linalg.det(fd_jacobian(lambda z: phi_map(cfg, z), cfg.x)))
        worst = max(worst,
                    abs(sq.jacobian_phi(cfg) - fd_phi) / max(1e-12, abs(fd_phi)))
        fd_psi = float(np.linalg.det(fd_jacobian(lambda z: psi_map(cfg, z), cfg.x)))
        worst = max(worst,
                    abs(sq.jacobian_psi(cfg) - fd_psi) / max(1e-12, abs(fd_psi)))
        cfg1 = AuxConfig(o=cfg.o, R=cfg.R, r=cfg.r, x_star=cfg.x_star,
                         x=cfg.x, t=1.0)
        assert sq.jacobian_psi(cfg1) == 1.0
    assert worst <= 1e-6
    _pass(8, "Jacobian formulas", f"worst FD rel err {worst:.2e}",
          time.perf_counter() - t0, 5.0)


def test_c09_geometry_checks(cross):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    done = 0
    while done < 1000:
        cfg = random_aux_config(rng)
        try:
            worst = max(worst, sq.geometric_sense_check(cfg))
        except sq.CollinearConfigError:
            continue
        done += 1
    assert worst <= 1e-10

    diam = sq.diameter(cross)
    pairs = sample_point_pairs(cross, 10_000, max_sep=cross.ball_radius,
                               rng=rng)
    from starquad.lemmas import AuxConfig

    for x, x_star in pairs:
        cfg = AuxConfig(o=cross.center, R=cross.ball_radius,
                        r=cross.ball_radius, x_star=x_star, x=x)
        report = sq.distance_bound_check(cross, cfg, diam=diam)
        assert report.passed, report
    _pass(9, "geometry", f"construction residual {worst:.2e}; "
          "distance bound held on 10^4 cross pairs",
          time.perf_counter() - t0, 30.0)


def test_c10_preimage_cardinality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    max_count = 0
    mismatches = 0
    for _ in range(10_000):
        cfg = random_aux_config(rng)
        q = psi_map(cfg)
        count, _ = sq.preimage_count(cfg.o, cfg.x_star, cfg.r, cfg.t, q)
        max_count = max(max_count, count)
        assert count <= 4
        oracle = sq.scan_preimage_count(cfg.o, cfg.x_star, cfg.r, cfg.t, q,
                                        samples=100_000)
        if oracle != count:
            mismatches += 1
    assert mismatches == 0, f"{mismatches} scan disagreements"
    # the identity time has exactly one preimage
    o = np.array([0.4, -0.3])
    count, pts = sq.preimage_count(o, o + [2.0, 1.0], 0.6, 1.0, o + [0.3, 0.8])
    assert count == 1 and np.allclose(pts[0], o + [0.3, 0.8], atol=1e-9)
    _pass(10, "preimage cardinality",
          f"max count {max_count}, scan oracle agreed on 10^4 configs",
          time.perf_counter() - t0, 60.0)


def test_c11_w_region_bounds(cross, cross_rule_65536):
    t0 = time.perf_counter()
    report = sq.w_region_bounds(cross, cross_rule_65536)
    assert report.passed
    assert report.min_margin_13 > 0
    assert report.min_margin_2 > 0
    _pass(11, "remainder-region Jacobian bounds",
          f"checked {report.sampled} points, regions {report.counts}, "
          f"margins ({report.min_margin_13:.3f}, {report.min_margin_2:.3f}), "
          f"{report.beyond_premise} beyond the R/8 premise",
          time.perf_counter() - t0, 120.0)


def test_c12_determinism(cross, cross_bracket, monkeypatch):
    t0 = time.perf_counter()
    rule_blobs = []
    report_blobs = []
    for threads in ("1", "2", "4"):
        monkeypatch.setenv("STARQUAD_THREADS", threads)
        rule = sq.build_rule(cross, 500, subgrid=4, bracket=cross_bracket)
        rule_blobs.append(rule_to_csv(rule))
        report = sq.run_convergence(cross, "inf", [16, 64, 256], subgrid=4,
                                    resolution=512, seed=0)
        # wall-time is the one column that cannot be bit-stable; strip it
        rows = [line.rsplit(",", 1)[0] for line in
                report_to_csv(report).splitlines()]
        report_blobs.append("\n".join(rows))
    assert rule_blobs[0] == rule_blobs[1] == rule_blobs[2]
    assert report_blobs[0] == report_blobs[1] == report_blobs[2]
    rows_a = sq.verify_lemmas(seed=5, trials_scale=0.02)
    rows_b = sq.verify_lemmas(seed=5, trials_scale=0.02)
    assert rows_a == rows_b
    _pass(12, "determinism",
          "rule CSVs and reports bit-identical across thread counts 1/2/4 "
          "(wall-time column excluded)",
          time.perf_counter() - t0, 120.0)
