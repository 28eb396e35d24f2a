"""Numerical verification lab for the closed-form identities.

Everything here has two independent routes: a closed-form expression and a
constructive or finite-difference oracle.  The checks cover the rank-one
determinant identity, the ball-pullback map ``p(x) = (r (x + x*) + |x - x*| o)
/ (|x - x*| + 2r)`` together with its geometric construction, the Jacobians
of the two homotopies built from it, the degree-4 preimage equation, and the
Jacobian lower bounds on the remainder region of a rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import CLOSURE_TOL, StarDomain, diameter
from .errors import PreconditionError, StarquadError
from .partition import CubatureRule

_COLLINEAR_TOL = 1e-5


class CollinearConfigError(StarquadError):
    """The planar construction is degenerate; use the collinear branch."""


@dataclass(frozen=True)
class AuxConfig:
    """Geometry for one check: ball center/radii, node and probe point."""

    o: np.ndarray
    R: float
    r: float
    x_star: np.ndarray
    x: np.ndarray = None
    t: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "o", np.asarray(self.o, dtype=float))
        object.__setattr__(self, "x_star", np.asarray(self.x_star, dtype=float))
        if self.x is not None:
            object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if not 0 < self.r <= self.R:
            raise ValueError("need 0 < r <= R")
        if np.linalg.norm(self.x_star - self.o) <= self.R:
            raise ValueError("node must lie outside the inner ball")
        if self.x is not None and np.linalg.norm(self.x - self.o) <= self.R:
            raise ValueError("probe point must lie outside the inner ball")

    @property
    def d(self):
        return len(self.o)


# ---------------------------------------------------------------------------
# determinant identity
# ---------------------------------------------------------------------------

def det_identity(alpha: float, beta: float, u, v):
    """Rank-one update determinant: formula vs elimination.

    Returns ``(alpha^(d-1) (alpha + beta <u, v>), det(alpha I + beta u v^T))``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = len(u)
    if d < 2 or len(v) != d:
        raise ValueError("u and v must share a dimension of at least 2")
    formula = alpha ** (d - 1) * (alpha + beta * float(u @ v))
    direct = float(np.linalg.det(alpha * np.eye(d) + beta * np.outer(u, v)))
    return formula, direct


# ---------------------------------------------------------------------------
# the pullback map and its geometry
# ---------------------------------------------------------------------------

def p_map(cfg: AuxConfig, x=None):
    """Pull the probe point toward the inner ball along the node chord."""
    x = cfg.x if x is None else np.asarray(x, dtype=float)
    ell = float(np.linalg.norm(x - cfg.x_star))
    if ell == 0.0:
        return cfg.x_star.copy()
    return (cfg.r * (x + cfg.x_star) + ell * cfg.o) / (ell + 2.0 * cfg.r)


def psi_map(cfg: AuxConfig, x=None, t=None):
    """Homotopy from the pullback to the identity: ``t x + (1-t) p(x)``."""
    x = cfg.x if x is None else np.asarray(x, dtype=float)
    t = cfg.t if t is None else t
    return t * x + (1.0 - t) * p_map(cfg, x)


def phi_map(cfg: AuxConfig, x=None, t=None):
    """Homotopy from the node to the pullback: ``(1-t) x* + t p(x)``."""
    x = cfg.x if x is None else np.asarray(x, dtype=float)
    t = cfg.t if t is None else t
    return (1.0 - t) * cfg.x_star + t * p_map(cfg, x)


def geometric_sense_check(cfg: AuxConfig) -> float:
    """Distance between the formula value and the trapezoid construction.

    In the plane spanned by ``o x`` and ``o x*``, the diameter of the inner
    circle of radius ``r`` parallel to the chord ``x x*`` forms a trapezoid
    with the chord; the diagonals from ``x`` and ``x*`` to the opposite
    diameter ends intersect exactly at the pullback point.
    """
    x, xs, o, r = cfg.x, cfg.x_star, cfg.o, cfg.r
    v1 = x - o
    v2 = xs - o
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    perp = v2 - (v2 @ v1) / (n1 * n1) * v1
    if np.linalg.norm(perp) < _COLLINEAR_TOL * n2:
        raise CollinearConfigError("ox and ox* are (nearly) collinear")
    e1 = v1 / n1
    e2 = perp / np.linalg.norm(perp)

    def plane(p):
        return np.array([(p - o) @ e1, (p - o) @ e2])

    a = plane(x)
    b = plane(xs)
    w = (b - a) / np.linalg.norm(b - a)
    o_near = r * w          # diameter end displaced toward x*
    o_far = -r * w
    # intersect segments a -> o_near and b -> o_far
    mat = np.column_stack([o_near - a, -(o_far - b)])
    s, _ = np.linalg.solve(mat, b - a)
    inter2 = a + s * (o_near - a)
    intersection = o + inter2[0] * e1 + inter2[1] * e2
    return float(np.linalg.norm(intersection - p_map(cfg)))


@dataclass(frozen=True)
class DistanceBoundReport:
    passed: bool
    ratio_ok: bool
    segments_ok: bool
    worst_ratio: float
    witness: dict = None


def distance_bound_check(dom: StarDomain, cfg: AuxConfig,
                         segment_probes: int = 33,
                         diam: float = None) -> DistanceBoundReport:
    """Check the pullback distance inequality and segment containment.

    With ``C = diam(Q) sqrt(d) / (2r)`` both ``|x - p|_oo`` and
    ``|x* - p|_oo`` must stay below ``C |x - x*|_oo``, and the broken path
    ``x -> p -> x*`` must stay inside the domain (probed at a fixed
    subdivision, closure tolerance).  ``diam`` may be supplied to avoid
    recomputing the diameter across many checks.
    """
    p = p_map(cfg)
    dperp = diameter(dom) if diam is None else diam
    C = dperp * math.sqrt(cfg.d) / (2.0 * cfg.r)
    denom = float(np.abs(cfg.x - cfg.x_star).max())
    lhs = max(float(np.abs(cfg.x - p).max()), float(np.abs(cfg.x_star - p).max()))
    if denom == 0.0:
        ratio_ok = lhs == 0.0
        worst = 0.0
    else:
        worst = lhs / denom
        ratio_ok = lhs <= C * denom * (1.0 + 1e-12)

    ts = np.linspace(0.0, 1.0, segment_probes)
    seg1 = (1.0 - ts)[:, None] * cfg.x + ts[:, None] * p
    seg2 = (1.0 - ts)[:, None] * p + ts[:, None] * cfg.x_star
    inside = dom.contains(np.vstack([seg1, seg2]), tol=CLOSURE_TOL)
    segments_ok = bool(np.all(inside))
    witness = None
    if not segments_ok:
        bad = int(np.argmin(inside))
        witness = {"point": np.vstack([seg1, seg2])[bad].tolist()}
    if not ratio_ok:
        witness = {"ratio": worst, "allowed": C}
    return DistanceBoundReport(
        passed=ratio_ok and segments_ok,
        ratio_ok=ratio_ok,
        segments_ok=segments_ok,
        worst_ratio=worst,
        witness=witness,
    )


# ---------------------------------------------------------------------------
# Jacobians: closed forms and finite-difference oracles
# ---------------------------------------------------------------------------

def _geometry(cfg: AuxConfig):
    ell = float(np.linalg.norm(cfg.x - cfg.x_star))
    if ell == 0.0:
        raise ValueError("the Jacobian formulas need x != x*")
    mid = 0.5 * (cfg.x + cfg.x_star)
    mo = cfg.o - mid
    dx = (cfg.x - cfg.x_star) / ell
    return ell, mo, dx


def jacobian_p(cfg: AuxConfig) -> np.ndarray:
    """Jacobian matrix of the pullback map at the probe point."""
    ell, mo, dx = _geometry(cfg)
    r = cfg.r
    a = r / (2.0 * r + ell)
    b = 2.0 * r / (2.0 * r + ell) ** 2
    return a * np.eye(cfg.d) + b * np.outer(mo, dx)


def jacobian_phi(cfg: AuxConfig) -> float:
    """Jacobian determinant of the node-to-pullback homotopy at time t."""
    ell, mo, dx = _geometry(cfg)
    r, t, d = cfg.r, cfg.t, cfg.d
    return (
        t ** d
        * r ** d
        / (2.0 * r + ell) ** (d + 1)
        * (2.0 * r + ell + 2.0 * float(mo @ dx))
    )


def jacobian_psi(cfg: AuxConfig) -> float:
    """Jacobian determinant of the pullback-to-identity homotopy at time t."""
    ell, mo, dx = _geometry(cfg)
    r, t, d = cfg.r, cfg.t, cfg.d
    lead = (r * (1.0 - t) / (2.0 * r + ell) + t) ** (d - 1)
    amat = (
        2.0 * r * r + 3.0 * r * ell + ell * ell - 2.0 * r * float(mo @ dx)
    ) / (2.0 * r + ell) ** 2
    return lead * (amat * (t - 1.0) + 1.0)


def fd_jacobian(func, x, step_scale: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian matrix of a vector map."""
    x = np.asarray(x, dtype=float)
    h = step_scale * max(1.0, float(np.abs(x).max()))
    d = len(x)
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        cols.append((func(x + e) - func(x - e)) / (2.0 * h))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# preimages of the homotopy: the degree-4 equation
# ---------------------------------------------------------------------------

def _preimage_frame(o, x_star, t, q):
    """Planar coordinates in which all preimages lie on the abscissa.

    The ordinate direction is the in-plane unit vector orthogonal to
    ``(q - o) + t (x* - o)``; with it the node sits at ordinate ``2 y*``,
    the ball center at ``y*`` and the image point at ``(1 - t) y*``, which
    is exactly the necessary condition for a preimage on the abscissa.
    """
    v = x_star - o
    w = q - o
    nv = float(np.linalg.norm(v))
    wperp = w - (float(w @ v) / (nv * nv)) * v
    if np.linalg.norm(wperp) < 1e-12 * max(1.0, float(np.linalg.norm(w))):
        e1 = v / nv
        return o.copy(), e1, None, nv, 0.0, float(w @ e1)
    g = w + t * v
    ng = float(np.linalg.norm(g))
    if ng == 0.0:
        # q - o antiparallel to t(x* - o); any in-plane normal works
        gn = v / nv
    else:
        gn = g / ng
    e2 = v - float(v @ gn) * gn
    e2 = e2 / np.linalg.norm(e2)
    if float(v @ e2) < 0:
        e2 = -e2
    y_star = float(v @ e2)
    e1 = v - y_star * e2
    e1 = e1 / np.linalg.norm(e1)
    x_star_1 = float(v @ e1)
    origin = o - y_star * e2
    return origin, e1, e2, x_star_1, y_star, float(w @ e1)


def preimage_count(o, x_star, r: float, t: float, q,
                   residual_tol: float = 1e-9):
    """All solutions of ``t x + (1-t) p(x) = q`` via the squared quartic.

    Builds the degree-4 polynomial obtained by squaring the scalar radical
    equation in the planar frame, takes companion-matrix roots, polishes each
    with Newton steps on the unsquared residual and keeps the distinct real
    solutions that actually satisfy it.  Returns ``(count, points)`` with
    ``count <= 4``.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    o = np.asarray(o, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    q = np.asarray(q, dtype=float)
    origin, e1, e2, xs1, ys, xq = _preimage_frame(o, x_star, t, q)
    if e2 is not None:
        # a preimage must land at ordinate (1-t) y*; verify q is in the plane
        resid = q - (origin + xq * e1 + (1.0 - t) * ys * e2)
        if np.linalg.norm(resid) > 1e-9 * max(1.0, float(np.linalg.norm(q))):
            return 0, []

    P = np.polynomial.polynomial
    lin = np.array([(1.0 - t) * r * xs1 - 2.0 * r * xq, (1.0 - t) * r + 2.0 * r * t])
    rad = np.array([xq, -t])
    dist2 = np.array([xs1 * xs1 + 4.0 * ys * ys, -2.0 * xs1, 1.0])
    poly = P.polysub(P.polymul(lin, lin), P.polymul(P.polymul(rad, rad), dist2))
    scale = max(float(np.abs(poly).max()), 1e-300)
    coeffs = poly.copy()
    while len(coeffs) > 1 and abs(coeffs[-1]) < 1e-13 * scale:
        coeffs = coeffs[:-1]
    if len(coeffs) <= 1:
        return 0, []
    roots = P.polyroots(coeffs)

    def residual(z):
        denom = 2.0 * r + math.hypot(xs1 - z, 2.0 * ys)
        return (1.0 - t) * r * (z + xs1) / denom + t * z - xq

    def residual_prime(z):
        dist = math.hypot(xs1 - z, 2.0 * ys)
        denom = 2.0 * r + dist
        ddist = (z - xs1) / dist if dist > 0 else 0.0
        return (1.0 - t) * r * (denom - (z + xs1) * ddist) / denom ** 2 + t

    rscale = max(1.0, abs(xq), abs(xs1), 2.0 * abs(ys), 2.0 * r)
    accepted = []
    for root in roots:
        if abs(root.imag) > 1e-5 * rscale:
            continue
        z = float(root.real)
        for _ in range(6):
            deriv = residual_prime(z)
            if abs(deriv) < 1e-14:
                break
            step = residual(z) / deriv
            z -= step
            if abs(step) < 1e-14 * rscale:
                break
        if abs(residual(z)) > residual_tol * rscale:
            continue
        if any(abs(z - prev) < 1e-6 * rscale for prev in accepted):
            continue
        accepted.append(z)
    points = [origin + z * e1 for z in sorted(accepted)]
    return len(points), points


def scan_preimage_count(o, x_star, r: float, t: float, q,
                        samples: int = 100_000) -> int:
    """Dense-scan oracle: count zeros of the unsquared residual on a line.

    Evaluates the residual on a dense grid covering the Cauchy root bound of
    the squared polynomial and counts sign changes, also flagging near-zero
    local minima to catch tangential roots.  The grid is uniform on a core
    interval around the configuration scale and logarithmic on the tails
    (for small homotopy times one root escapes like 1/t and a purely
    uniform grid would under-resolve the core).  Independent of the
    companion matrix route.
    """
    o = np.asarray(o, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    q = np.asarray(q, dtype=float)
    origin, e1, e2, xs1, ys, xq = _preimage_frame(o, x_star, t, q)
    if e2 is not None:
        resid = q - (origin + xq * e1 + (1.0 - t) * ys * e2)
        if np.linalg.norm(resid) > 1e-9 * max(1.0, float(np.linalg.norm(q))):
            return 0

    P = np.polynomial.polynomial
    lin = np.array([(1.0 - t) * r * xs1 - 2.0 * r * xq, (1.0 - t) * r + 2.0 * r * t])
    rad = np.array([xq, -t])
    dist2 = np.array([xs1 * xs1 + 4.0 * ys * ys, -2.0 * xs1, 1.0])
    poly = P.polysub(P.polymul(lin, lin), P.polymul(P.polymul(rad, rad), dist2))
    scale = max(float(np.abs(poly).max()), 1e-300)
    coeffs = poly.copy()
    while len(coeffs) > 1 and abs(coeffs[-1]) < 1e-13 * scale:
        coeffs = coeffs[:-1]
    if len(coeffs) <= 1:
        return 0
    bound = 1.0 + float(np.abs(coeffs[:-1]).max()) / abs(coeffs[-1])
    core_half = min(bound, 10.0 * max(1.0, abs(xq), abs(xs1), 2.0 * abs(ys),
                                      2.0 * r))
    if core_half >= bound:
        grid = np.linspace(-bound, bound, samples)
    else:
        core = np.linspace(-core_half, core_half, (3 * samples) // 5)
        tail = np.geomspace(core_half, bound, samples // 5)
        grid = np.unique(np.concatenate([core, tail, -tail]))
    denom = 2.0 * r + np.hypot(xs1 - grid, 2.0 * ys)
    vals = (1.0 - t) * r * (grid + xs1) / denom + t * grid - xq

    signs = np.sign(vals)
    crossings = int(np.count_nonzero(np.diff(signs[signs != 0]) != 0))
    zeros_on_grid = int(np.count_nonzero(signs == 0))

    # tangential roots: local minima of |vals| that dip to numerical zero
    absv = np.abs(vals)
    interior = (absv[1:-1] <= absv[:-2]) & (absv[1:-1] <= absv[2:])
    tiny = absv[1:-1] < 1e-10 * max(1.0, abs(xq))
    candidates = np.flatnonzero(interior & tiny) + 1
    tangential = 0
    last = -10
    for idx in candidates:
        if signs[idx - 1] == signs[idx + 1] and signs[idx] != 0 and idx - last > 2:
            tangential += 1
            last = idx
    return crossings + zeros_on_grid + tangential


# ---------------------------------------------------------------------------
# remainder-region Jacobian lower bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WRegionReport:
    passed: bool
    sampled: int             # points checked (those within R/8 of their node)
    counts: tuple            # checked points per region 1..3
    min_margin_13: float     # min |J| - 1/3^(d+1) over regions 1 and 3
    min_margin_2: float      # min |J| - 4/3^(d+1) over region 2
    max_dist: float          # max |x - x*|_2 over the whole sample
    beyond_premise: int = 0  # sampled points with |x - x*|_2 >= R/8


def w_region_bounds(dom: StarDomain, rule: CubatureRule,
                    samples: int = 20_000) -> WRegionReport:
    """Check the homotopy Jacobian lower bounds on the remainder region.

    Splits sampled remainder points by ``(mo, dx)`` into the three bands
    (below ``-2R``, between ``-2R`` and ``-R/2``, above ``-R/2``) and
    verifies ``|J| > 3^-(d+1)`` with radius ``R`` on the outer bands and
    ``|J| > 4 * 3^-(d+1)`` with radius ``R/8`` on the middle band.  The
    bounds are claimed for points within ``R/8`` of their node, so only
    those are asserted; points beyond that premise (isolated corner cells
    keep a few at moderate n) are counted in ``beyond_premise``.

    Refuses with :class:`PreconditionError` when the rule is too coarse for
    the construction (``h_n >= R/8``) or when the remainder region touches
    the inner ball.
    """
    if rule.diagnostics is None or rule.nodeset is None:
        raise ValueError("rule must carry remainder diagnostics")
    R = dom.ball_radius
    if rule.h_n >= R / 8.0:
        raise PreconditionError(
            f"h_n = {rule.h_n:.4g} >= R/8 = {R / 8.0:.4g}; n too small for "
            "this ball radius"
        )
    pts = rule.diagnostics.u_points
    owners = rule.diagnostics.u_node
    if len(pts) == 0:
        return WRegionReport(True, 0, (0, 0, 0), math.inf, math.inf, 0.0)
    if samples < len(pts):
        sel = np.unique(np.linspace(0, len(pts) - 1, samples).astype(np.int64))
        pts = pts[sel]
        owners = owners[sel]
    node_pts = rule.nodes[owners]
    dist = np.linalg.norm(pts - node_pts, axis=1)
    max_dist = float(dist.max())
    ball_dist = np.linalg.norm(pts - dom.center, axis=1)
    node_ball = np.linalg.norm(node_pts - dom.center, axis=1)
    if float(ball_dist.min()) <= R or float(node_ball.min()) <= R:
        raise PreconditionError(
            "remainder region touches the inner ball; n too small"
        )

    premise = dist < R / 8.0
    beyond = int(np.count_nonzero(~premise))
    pts, node_pts, dist = pts[premise], node_pts[premise], dist[premise]
    if len(pts) == 0:
        return WRegionReport(True, 0, (0, 0, 0), math.inf, math.inf,
                             max_dist, beyond)

    mid = 0.5 * (pts + node_pts)
    mo = dom.center - mid
    dx = (pts - node_pts) / dist[:, None]
    proj = np.sum(mo * dx, axis=1)

    d = dom.d
    thresh = 1.0 / 3.0 ** (d + 1)

    def phi_jac(r, mask):
        ell = dist[mask]
        return (
            r ** d
            / (2.0 * r + ell) ** (d + 1)
            * np.abs(2.0 * r + ell + 2.0 * proj[mask])
        )

    m1 = proj < -2.0 * R
    m2 = (proj >= -2.0 * R) & (proj <= -R / 2.0)
    m3 = proj > -R / 2.0

    margin13 = math.inf
    outer = m1 | m3
    if np.any(outer):
        margin13 = float(np.min(phi_jac(R, outer)) - thresh)
    margin2 = math.inf
    if np.any(m2):
        margin2 = float(np.min(phi_jac(R / 8.0, m2)) - 4.0 * thresh)
    passed = margin13 > 0 and margin2 > 0
    return WRegionReport(
        passed=passed,
        sampled=len(pts),
        counts=(int(m1.sum()), int(m2.sum()), int(m3.sum())),
        min_margin_13=margin13,
        min_margin_2=margin2,
        max_dist=max_dist,
        beyond_premise=beyond,
    )


# ---------------------------------------------------------------------------
# segment mean-value identity
# ---------------------------------------------------------------------------

def segment_identity_residual(f, x, y, quad_points: int = 64) -> float:
    """Residual of ``f(y) - f(x) = \\int_0^1 <y - x, grad f((1-t)x + t y)> dt``.

    Uses Gauss-Legendre quadrature on the segment; the residual is at
    rounding level for functions with polynomially bounded derivatives.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    ts = 0.5 * (nodes + 1.0)
    pts = (1.0 - ts)[:, None] * x + ts[:, None] * y
    grads = f.gradient(pts)
    integral = 0.5 * float(np.sum(weights * (grads @ (y - x))))
    lhs = float(f(y[None, :])[0] - f(x[None, :])[0])
    return abs(lhs - integral)


# ---------------------------------------------------------------------------
# sampling helpers and the fixed verification table
# ---------------------------------------------------------------------------

def sample_points_in_domain(dom: StarDomain, count: int, rng,
                            outside_ball: bool = True) -> np.ndarray:
    """Rejection-sample points of the domain (optionally outside the ball)."""
    out = []
    lo, hi = dom.bbox_lo, dom.bbox_hi
    while len(out) < count:
        batch = rng.uniform(lo, hi, size=(max(4 * count, 256), dom.d))
        keep = dom.contains(batch)
        if outside_ball:
            keep &= np.linalg.norm(batch - dom.center, axis=1) > dom.ball_radius
        out.extend(batch[keep])
    return np.asarray(out[:count])


def sample_point_pairs(dom: StarDomain, count: int, max_sep: float, rng):
    """Pairs (x, x*) in the domain, outside the ball, with |x - x*|_oo bounded."""
    pairs = []
    while len(pairs) < count:
        xs = sample_points_in_domain(dom, count, rng)
        offs = rng.uniform(-max_sep, max_sep, size=xs.shape)
        ys = xs + offs
        keep = dom.contains(ys)
        keep &= np.linalg.norm(ys - dom.center, axis=1) > dom.ball_radius
        keep &= np.abs(ys - xs).max(axis=1) > 1e-9
        for x, y in zip(xs[keep], ys[keep]):
            pairs.append((x, y))
            if len(pairs) == count:
                break
    return pairs


def random_aux_config(rng, d: int = 2, with_x: bool = True,
                      r_choice: str = "uniform") -> AuxConfig:
    """Admissible random configuration: node and probe outside the ball."""
    o = rng.normal(size=d)
    R = rng.uniform(0.3, 1.0)
    if r_choice == "uniform":
        r = rng.uniform(0.25 * R, R)
    else:
        r = R if rng.uniform() < 0.5 else R / 8.0

    def outside():
        while True:
            pt = o + rng.normal(size=d) * 2.0 * R
            dist = np.linalg.norm(pt - o)
            if 1.2 * R < dist < 6.0 * R:
                return pt

    x_star = outside()
    x = None
    if with_x:
        while True:
            x = outside()
            if np.linalg.norm(x - x_star) > 0.05 * R:
                break
    return AuxConfig(o=o, R=R, r=r, x_star=x_star, x=x,
                     t=float(rng.uniform(0.0, 1.0)))


@dataclass(frozen=True)
class CheckRow:
    check: str
    trials: int
    worst: float
    tol: float
    passed: bool
    skipped: bool = False


def _poly_test_function():
    from .engine import TestFunction

    def f(pts):
        return pts[:, 0] ** 3 + 2.0 * pts[:, 0] * pts[:, 1] ** 2 - pts[:, 1]

    def grad(pts):
        g = np.empty_like(pts)
        g[:, 0] = 3.0 * pts[:, 0] ** 2 + 2.0 * pts[:, 1] ** 2
        g[:, 1] = 4.0 * pts[:, 0] * pts[:, 1] - 1.0
        return g

    return TestFunction(name="poly", f=f, grad=grad, certified_norm=math.inf)


def verify_lemmas(seed: int = 0, trials_scale: float = 1.0,
                  wregion: tuple = None) -> list:
    """Run the fixed-order verification table.

    ``wregion`` is an optional pair ``(domain, rule)``; when omitted the
    remainder-region row is reported as skipped with zero trials.
    Returns a list of :class:`CheckRow`.
    """
    rng = np.random.default_rng(seed)
    rows = []

    def scaled(n):
        return max(2, int(round(n * trials_scale)))

    # determinant identity over random sizes
    n_det = scaled(1000)
    worst = 0.0
    for _ in range(n_det):
        d = int(rng.integers(2, 7))
        alpha = float(rng.normal()) or 1.0
        beta = float(rng.normal())
        u = rng.normal(size=d)
        v = rng.normal(size=d)
        formula, direct = det_identity(alpha, beta, u, v)
        worst = max(worst, abs(formula - direct) / (1.0 + abs(direct)))
    rows.append(CheckRow("det-identity", n_det, worst, 1e-9, worst <= 1e-9))

    # pullback vs trapezoid construction
    n_geo = scaled(1000)
    worst = 0.0
    done = 0
    while done < n_geo:
        cfg = random_aux_config(rng)
        try:
            worst = max(worst, geometric_sense_check(cfg))
        except CollinearConfigError:
            continue
        done += 1
    rows.append(CheckRow("p-map-geometry", n_geo, worst, 1e-10, worst <= 1e-10))

    # pullback distance constant and segment containment on the cross
    from .domain import example_domain

    cross = example_domain("cross")
    cross_diam = diameter(cross)
    n_dist = scaled(10_000)
    pairs = sample_point_pairs(cross, n_dist, max_sep=cross.ball_radius,
                               rng=rng)
    worst = 0.0
    dist_ok = True
    for x, x_star in pairs:
        cfg = AuxConfig(o=cross.center, R=cross.ball_radius,
                        r=cross.ball_radius, x_star=x_star, x=x)
        rep = distance_bound_check(cross, cfg, diam=cross_diam)
        worst = max(worst, rep.worst_ratio)
        dist_ok = dist_ok and rep.passed
    allowed = cross_diam * math.sqrt(2) / (2.0 * cross.ball_radius)
    rows.append(CheckRow("distance-bound", len(pairs), worst, allowed, dist_ok))

    # Jacobian formulas against central differences
    n_jac = scaled(100)
    worst_p = worst_phi = worst_psi = 0.0
    worst_t1 = 0.0
    for _ in range(n_jac):
        cfg = random_aux_config(rng)
        mat = jacobian_p(cfg)
        fd_mat = fd_jacobian(lambda z: p_map(cfg, z), cfg.x)
        scale = max(1.0, float(np.abs(fd_mat).max()))
        worst_p = max(worst_p, float(np.abs(mat - fd_mat).max()) / scale)

        fd_phi = float(np.linalg.det(fd_jacobian(lambda z: phi_map(cfg, z), cfg.x)))
        worst_phi = max(
            worst_phi, abs(jacobian_phi(cfg) - fd_phi) / max(1e-12, abs(fd_phi))
        )
        fd_psi = float(np.linalg.det(fd_jacobian(lambda z: psi_map(cfg, z), cfg.x)))
        worst_psi = max(
            worst_psi, abs(jacobian_psi(cfg) - fd_psi) / max(1e-12, abs(fd_psi))
        )
        cfg1 = AuxConfig(o=cfg.o, R=cfg.R, r=cfg.r, x_star=cfg.x_star,
                         x=cfg.x, t=1.0)
        worst_t1 = max(worst_t1, abs(jacobian_psi(cfg1) - 1.0))
    rows.append(CheckRow("jacobian-p-fd", n_jac, worst_p, 1e-6, worst_p <= 1e-6))
    rows.append(CheckRow("jacobian-phi-fd", n_jac, worst_phi, 1e-6, worst_phi <= 1e-6))
    rows.append(CheckRow("jacobian-psi-fd", n_jac, worst_psi, 1e-6, worst_psi <= 1e-6))
    rows.append(CheckRow("psi-identity-t1", n_jac, worst_t1, 1e-12, worst_t1 <= 1e-12))

    # preimage counts: bound and scan agreement on a subsample
    n_pre = scaled(10_000)
    n_scan = scaled(200)
    worst_count = 0
    mismatches = 0
    for i in range(n_pre):
        cfg = random_aux_config(rng)
        q = psi_map(cfg)
        count, _ = preimage_count(cfg.o, cfg.x_star, cfg.r, cfg.t, q)
        worst_count = max(worst_count, count)
        if count < 1:
            mismatches += 1
        if i < n_scan:
            oracle = scan_preimage_count(cfg.o, cfg.x_star, cfg.r, cfg.t, q)
            if oracle != count:
                mismatches += 1
    ok = worst_count <= 4 and mismatches == 0
    rows.append(CheckRow("preimage-quartic", n_pre, float(worst_count), 4.0, ok))

    # segment mean-value identity for a polynomial
    n_seg = scaled(200)
    poly = _poly_test_function()
    worst = 0.0
    for _ in range(n_seg):
        x = rng.uniform(-1.0, 1.0, size=2)
        y = rng.uniform(-1.0, 1.0, size=2)
        worst = max(worst, segment_identity_residual(poly, x, y))
    rows.append(CheckRow("segment-identity", n_seg, worst, 1e-8, worst <= 1e-8))

    # remainder-region Jacobian bounds on a supplied rule
    if wregion is not None:
        dom, rule = wregion
        report = w_region_bounds(dom, rule)
        margin = min(report.min_margin_13, report.min_margin_2)
        rows.append(
            CheckRow("w-region-bounds", report.sampled, -margin, 0.0, report.passed)
        )
    else:
        rows.append(CheckRow("w-region-bounds", 0, 0.0, 0.0, True, skipped=True))
    return rows


def checks_to_tsv(rows) -> str:
    lines = ["check\ttrials\tworst\ttol\tstatus"]
    for row in rows:
        status = "skipped" if row.skipped else ("pass" if row.passed else "fail")
        lines.append(
            f"{row.check}\t{row.trials}\t{row.worst!r}\t{row.tol!r}\t{status}"
        )
    return "\n".join(lines) + "\n"
