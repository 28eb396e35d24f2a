"""Bounded star-shaped domains with a radial boundary model.

A domain is described by a center ``o``, an inner-ball radius ``R`` and a
radial extent function ``rho(u) > 0`` over unit directions ``u``: the domain
is the open set ``{o + s*u : 0 <= s < rho(u)}``.  Every bounded domain that is
star shaped with respect to a ball admits such a description around the ball
center, and the radial encoding makes the domain star shaped with respect to
``o`` by construction.  The stronger star-with-respect-to-a-ball property is
checked by randomized segment probing (:func:`validate_star_ball`), never
assumed.

Membership is strict (boundary points count as outside); grid classification
helpers use a small relative closure tolerance so that exactly aligned
boundary probes are classified stably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, PreconditionError

# Relative tolerance admitting exact-boundary probe points during grid
# classification.  Strict membership uses tolerance 0.
CLOSURE_TOL = 1e-12

_MAX_GRID_CELLS = 1 << 27


# ---------------------------------------------------------------------------
# radial shape models
# ---------------------------------------------------------------------------

class CubeShape:
    """Axis-aligned cube of given side, centered at the domain center."""

    name = "cube"

    def __init__(self, side):
        if side <= 0:
            raise DomainError("cube side must be positive")
        self.side = float(side)

    def rho(self, u):
        umax = np.abs(u).max(axis=-1)
        return (self.side / 2.0) / umax

    def bbox_halfwidth(self, d):
        return np.full(d, self.side / 2.0)

    def vertex_directions(self, d):
        corners = np.array(
            np.meshgrid(*([[-1.0, 1.0]] * d), indexing="ij")
        ).reshape(d, -1).T
        return corners / np.linalg.norm(corners, axis=1, keepdims=True)


class BallShape:
    """Euclidean ball of given radius."""

    name = "ball"

    def __init__(self, radius):
        if radius <= 0:
            raise DomainError("ball radius must be positive")
        self.radius = float(radius)

    def rho(self, u):
        return np.full(u.shape[:-1], self.radius)

    def bbox_halfwidth(self, d):
        return np.full(d, self.radius)

    def vertex_directions(self, d):
        return np.vstack([np.eye(d), -np.eye(d)])


class CrossShape:
    """Union of d axis-aligned slabs (a plus sign in 2-D).

    Arm ``i`` is the set ``{|x_i| < halflength, |x_j| < halfwidth for j != i}``.
    """

    name = "cross"

    def __init__(self, halfwidth, halflength):
        if not 0 < halfwidth <= halflength:
            raise DomainError("cross needs 0 < halfwidth <= halflength")
        self.halfwidth = float(halfwidth)
        self.halflength = float(halflength)

    def rho(self, u):
        w, ell = self.halfwidth, self.halflength
        au = np.abs(u)
        with np.errstate(divide="ignore"):
            m = np.where(au > 0, w / np.where(au > 0, au, 1.0), np.inf)
            long = np.where(au > 0, ell / np.where(au > 0, au, 1.0), np.inf)
        if u.shape[-1] == 2:
            ext0 = np.minimum(long[..., 0], m[..., 1])
            ext1 = np.minimum(m[..., 0], long[..., 1])
            return np.maximum(ext0, ext1)
        # per-row smallest and second smallest of m, to take min over j != i
        part = np.sort(m, axis=-1)
        smallest = part[..., 0]
        second = part[..., 1]
        excl = np.where(m == smallest[..., None], second[..., None], smallest[..., None])
        ext = np.minimum(long, excl)
        return ext.max(axis=-1)

    def bbox_halfwidth(self, d):
        return np.full(d, self.halflength)

    def vertex_directions(self, d):
        # arm-end corners: one coordinate +-halflength, the rest +-halfwidth
        dirs = []
        signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * (d - 1)), indexing="ij")).reshape(d - 1, -1).T
        for i in range(d):
            for s_axis in (-1.0, 1.0):
                for s in signs:
                    v = np.empty(d)
                    v[i] = s_axis * self.halflength
                    v[[j for j in range(d) if j != i]] = s * self.halfwidth
                    dirs.append(v)
        dirs = np.array(dirs)
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


class StarPolygonShape:
    """Regular 2-D star polygon with alternating outer/inner vertex radii."""

    name = "star-polygon"

    def __init__(self, spikes, r_in, r_out):
        if spikes < 3:
            raise DomainError("star polygon needs at least 3 spikes")
        if not 0 < r_in < r_out:
            raise DomainError("star polygon needs 0 < r_in < r_out")
        self.spikes = int(spikes)
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        half = math.pi / self.spikes
        a = np.array([self.r_out, 0.0])
        b = np.array([self.r_in * math.cos(half), self.r_in * math.sin(half)])
        edge = b - a
        normal = np.array([edge[1], -edge[0]])
        normal /= np.linalg.norm(normal)
        p = float(normal @ a)
        if p < 0:
            normal, p = -normal, -p
        self._normal = normal
        self._dist = p
        self._half = half

    def rho(self, u):
        theta = np.arctan2(u[..., 1], u[..., 0])
        period = 2.0 * self._half
        m = np.mod(theta, period)
        m = np.minimum(m, period - m)
        proj = self._normal[0] * np.cos(m) + self._normal[1] * np.sin(m)
        return self._dist / proj

    def vertices(self):
        k = self.spikes
        ang = np.arange(2 * k) * math.pi / k
        rad = np.where(np.arange(2 * k) % 2 == 0, self.r_out, self.r_in)
        return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])

    def bbox_halfwidth(self, d):
        v = self.vertices()
        return np.abs(v).max(axis=0)

    def vertex_directions(self, d):
        v = self.vertices()
        return v / np.linalg.norm(v, axis=1, keepdims=True)


class FourierRadialShape:
    """2-D radial boundary given by a truncated Fourier series in the angle."""

    name = "fourier-radial"

    def __init__(self, base, cos_coeffs=(), sin_coeffs=()):
        self.base = float(base)
        self.cos_coeffs = np.asarray(cos_coeffs, dtype=float)
        self.sin_coeffs = np.asarray(sin_coeffs, dtype=float)
        theta = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
        r = self._eval(theta)
        if r.min() <= 0:
            raise DomainError("fourier-radial boundary must stay positive")
        self._rmax = float(r.max())

    def _eval(self, theta):
        r = np.full_like(theta, self.base, dtype=float)
        for j, a in enumerate(self.cos_coeffs, start=1):
            r += a * np.cos(j * theta)
        for j, b in enumerate(self.sin_coeffs, start=1):
            r += b * np.sin(j * theta)
        return r

    def rho(self, u):
        theta = np.arctan2(u[..., 1], u[..., 0])
        return self._eval(theta)

    def bbox_halfwidth(self, d):
        # extent upper bound; a slightly loose box only enlarges the probe grid
        return np.full(d, self._rmax * (1.0 + 1e-9))

    def vertex_directions(self, d):
        theta = np.linspace(0.0, 2.0 * math.pi, 512, endpoint=False)
        return np.column_stack([np.cos(theta), np.sin(theta)])


class TabulatedShape:
    """2-D radial boundary interpolated linearly between angle samples."""

    name = "tabulated"

    def __init__(self, rho_samples):
        samples = np.asarray(rho_samples, dtype=float)
        if samples.ndim != 1 or samples.size < 3:
            raise DomainError("tabulated shape needs at least 3 rho samples")
        if samples.min() <= 0:
            raise DomainError("tabulated rho samples must be positive")
        self.samples = samples
        self._theta = np.linspace(0.0, 2.0 * math.pi, samples.size + 1)
        self._values = np.append(samples, samples[0])

    def rho(self, u):
        theta = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2.0 * math.pi)
        return np.interp(theta, self._theta, self._values)

    def bbox_halfwidth(self, d):
        return np.full(d, float(self.samples.max()) * (1.0 + 1e-9))

    def vertex_directions(self, d):
        theta = self._theta[:-1]
        return np.column_stack([np.cos(theta), np.sin(theta)])


_PLANAR_SHAPES = (StarPolygonShape, FourierRadialShape, TabulatedShape)


# ---------------------------------------------------------------------------
# the domain itself
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StarDomain:
    """Bounded star domain around center ``o`` with inner-ball radius ``R``."""

    d: int
    center: np.ndarray
    ball_radius: float
    shape: object
    name: str = "domain"
    bbox_lo: np.ndarray = field(default=None)
    bbox_hi: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.d < 2:
            raise DomainError("dimension must be at least 2")
        if isinstance(self.shape, _PLANAR_SHAPES) and self.d != 2:
            raise DomainError(f"shape '{self.shape.name}' supports d = 2 only")
        if self.ball_radius <= 0:
            raise DomainError("ball radius must be positive")
        o = np.asarray(self.center, dtype=float)
        if o.shape != (self.d,):
            raise DomainError(f"center must have {self.d} coordinates")
        object.__setattr__(self, "center", o)
        half = self.shape.bbox_halfwidth(self.d)
        object.__setattr__(self, "bbox_lo", o - half)
        object.__setattr__(self, "bbox_hi", o + half)

    # -- radial queries ----------------------------------------------------

    def rho(self, dirs):
        """Radial extent for unit directions, shape (..., d) -> (...)."""
        return self.shape.rho(np.asarray(dirs, dtype=float))

    def boundary_points(self, dirs):
        dirs = np.asarray(dirs, dtype=float)
        return self.center + self.rho(dirs)[..., None] * dirs

    def relative_margin(self, points):
        """Signed relative distance to the boundary along the ray from ``o``.

        Negative strictly inside, zero on the boundary, positive outside.
        Computed as ``|x - o| / rho(u) - 1``; the center maps to -1.
        """
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        v = pts - self.center
        r = np.sqrt(np.einsum("...i,...i->...", v, v))
        center_hit = r == 0
        if np.any(center_hit):
            v = v.copy()
            v[center_hit, 0] = 1.0  # arbitrary direction; rho stays finite
        u = v / np.where(center_hit, 1.0, r)[..., None]
        out = r / self.shape.rho(u) - 1.0
        return np.where(center_hit, -1.0, out)

    def contains(self, points, tol=0.0):
        """Vectorized membership; ``tol > 0`` admits a relative boundary band."""
        m = self.relative_margin(points)
        return m < 0 if tol == 0.0 else m <= tol

    def clearly_inside(self, points, band=CLOSURE_TOL):
        """Membership excluding a relative band around the boundary.

        Probe points that land exactly on the boundary have margins at
        rounding level and flip sign unpredictably; classification uses this
        banded test so aligned geometry stays stable.
        """
        return self.relative_margin(points) < -band

    def bbox_span(self):
        return self.bbox_hi - self.bbox_lo


def membership(dom: StarDomain, x) -> bool:
    """Strict membership of a single point (boundary points are outside)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("point must be finite")
    return bool(dom.contains(x[None, :])[0])


# ---------------------------------------------------------------------------
# Jordan measure bracket by grid counting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JordanBracket:
    """Inner/outer grid-volume bounds for the measure of the domain."""

    inner: float
    outer: float
    resolution: int

    @property
    def midpoint(self):
        return 0.5 * (self.inner + self.outer)

    @property
    def width(self):
        return self.outer - self.inner


def jordan_measure(dom: StarDomain, resolution: int) -> JordanBracket:
    """Bracket the measure of the domain by counting bbox grid cells.

    A cell counts as inner when all ``2**d`` corners and the center lie in the
    closure of the domain (relative tolerance ``CLOSURE_TOL``); it counts as
    meeting when any of those probes lies strictly inside.  Inner cells are
    always counted as meeting.

    Parameters
    ----------
    dom : StarDomain
    resolution : int
        Cells per axis of the bounding-box grid; must be at least 2.

    Returns
    -------
    JordanBracket
        ``inner <= mes Q <= outer`` up to probe-level accuracy.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    d = dom.d
    if resolution ** d > _MAX_GRID_CELLS:
        raise PreconditionError(
            f"resolution {resolution} too high for dimension {d}"
        )
    lo, hi = dom.bbox_lo, dom.bbox_hi
    axes = [np.linspace(lo[i], hi[i], resolution + 1) for i in range(d)]
    corners = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    margin = dom.relative_margin(corners.reshape(-1, d)).reshape(corners.shape[:-1])

    corner_closed = margin <= CLOSURE_TOL
    corner_strict = margin < -CLOSURE_TOL

    def cell_view(arr, offsets):
        sl = tuple(slice(o, o + resolution) for o in offsets)
        return arr[sl]

    offsets = np.array(np.meshgrid(*([[0, 1]] * d), indexing="ij")).reshape(d, -1).T
    all_closed = np.ones((resolution,) * d, dtype=bool)
    any_strict = np.zeros((resolution,) * d, dtype=bool)
    for off in offsets:
        all_closed &= cell_view(corner_closed, off)
        any_strict |= cell_view(corner_strict, off)

    centers_axes = [0.5 * (ax[:-1] + ax[1:]) for ax in axes]
    centers = np.stack(np.meshgrid(*centers_axes, indexing="ij"), axis=-1)
    cmargin = dom.relative_margin(centers.reshape(-1, d)).reshape((resolution,) * d)
    all_closed &= cmargin <= CLOSURE_TOL
    any_strict |= cmargin < -CLOSURE_TOL

    meeting = any_strict | all_closed
    cellvol = float(np.prod((hi - lo) / resolution))
    return JordanBracket(
        inner=float(np.count_nonzero(all_closed)) * cellvol,
        outer=float(np.count_nonzero(meeting)) * cellvol,
        resolution=resolution,
    )


# ---------------------------------------------------------------------------
# diameter and the star-with-respect-to-a-ball check
# ---------------------------------------------------------------------------

def _sample_directions(d, samples, seed=0):
    if d == 2:
        theta = np.linspace(0.0, math.pi, max(samples // 2, 2), endpoint=False)
        half = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((max(samples // 2, 2), d))
        half = g / np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([half, -half])


def diameter(dom: StarDomain, samples: int = 2048) -> float:
    """Lower estimate of the Euclidean diameter from boundary samples.

    The sampled direction set is symmetric and always includes the shape's
    vertex directions, so the estimate is exact for the built-in polytopal
    shapes (cube, cross, star-polygon) and for the ball; for fourier-radial
    and tabulated boundaries it is a dense lower bound.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    dirs = _sample_directions(dom.d, samples)
    verts = dom.shape.vertex_directions(dom.d)
    dirs = np.vstack([dirs, verts, -verts])
    pts = dom.boundary_points(dirs)
    best = 0.0
    block = 512
    for i in range(0, len(pts), block):
        chunk = pts[i : i + block]
        d2 = np.sum((chunk[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        best = max(best, float(d2.max()))
    return math.sqrt(best)


@dataclass(frozen=True)
class StarBallReport:
    """Outcome of the star-with-respect-to-a-ball segment probing."""

    passed: bool
    trials: int
    ball_inside: bool
    failure: dict = None


def validate_star_ball(dom: StarDomain, seed: int = 0, trials: int = 1000,
                       probes: int = 33, edge_eps: float = 1e-6) -> StarBallReport:
    """Probe segments from near-boundary points to the inner ball.

    Draws ``trials`` pairs (x, y) with ``x = o + (1 - edge_eps) rho(u) u`` and
    ``y`` in the closed ball of radius ``R`` around ``o``, then checks strict
    membership on a fixed dyadic subdivision of the segment ``xy``.  Returns a
    failure report with the first counterexample instead of raising.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    R = dom.ball_radius

    u = rng.standard_normal((trials, dom.d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    ball_ok = bool(np.all(dom.rho(u) > R))

    x = dom.center + (1.0 - edge_eps) * dom.rho(u)[:, None] * u
    v = rng.standard_normal((trials, dom.d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    s = rng.uniform(0.0, 1.0, trials) ** (1.0 / dom.d)
    s[::10] = 1.0  # include ball-boundary targets
    y = dom.center + R * s[:, None] * v

    ts = np.linspace(0.0, 1.0, probes)
    for k, t in enumerate(ts):
        pts = (1.0 - t) * x + t * y
        inside = dom.contains(pts, tol=CLOSURE_TOL)
        if not np.all(inside):
            i = int(np.argmin(inside))
            return StarBallReport(
                passed=False,
                trials=trials,
                ball_inside=ball_ok,
                failure={
                    "trial": i,
                    "t": float(t),
                    "point": pts[i].tolist(),
                    "x": x[i].tolist(),
                    "y": y[i].tolist(),
                },
            )
    return StarBallReport(passed=ball_ok, trials=trials, ball_inside=ball_ok)


# ---------------------------------------------------------------------------
# config files and example domains
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = ("dim", "center", "ball_radius", "shape")

_SHAPE_KEYS = {
    "cube": {"side"},
    "ball": {"radius"},
    "cross": {"arm_halfwidth", "arm_halflength"},
    "star-polygon": {"spikes", "r_in", "r_out"},
    "fourier-radial": {"base", "cos_coeffs", "sin_coeffs"},
    "tabulated": {"rho_samples"},
}

_LIST_KEYS = {"center", "cos_coeffs", "sin_coeffs", "rho_samples"}
_INT_KEYS = {"dim", "spikes"}


def parse_domain_config(text: str, name: str = "domain") -> StarDomain:
    """Parse the line-oriented ``key = value`` domain config format.

    Lines starting with ``#`` (and trailing ``#`` comments) are ignored.
    Raises :class:`ConfigError` carrying the offending line number.
    """
    values = {}
    lines_seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if not key or not val:
            raise ConfigError("empty key or value", line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", line=lineno)
        try:
            if key in _LIST_KEYS:
                parsed = [float(tok) for tok in val.replace(",", " ").split()]
            elif key in _INT_KEYS:
                parsed = int(val)
            elif key == "shape":
                parsed = val.lower()
            else:
                parsed = float(val)
        except ValueError:
            raise ConfigError(f"cannot parse value for '{key}': {val!r}", line=lineno)
        values[key] = parsed
        lines_seen[key] = lineno

    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing required key '{key}'")

    shape_name = values["shape"]
    if shape_name not in _SHAPE_KEYS:
        raise ConfigError(
            f"unknown shape '{shape_name}'", line=lines_seen.get("shape")
        )
    allowed = _SHAPE_KEYS[shape_name] | set(_REQUIRED_KEYS)
    for key in values:
        if key not in allowed:
            raise ConfigError(
                f"key '{key}' is not valid for shape '{shape_name}'",
                line=lines_seen[key],
            )

    def need(key):
        if key not in values:
            raise ConfigError(f"shape '{shape_name}' requires key '{key}'")
        return values[key]

    try:
        if shape_name == "cube":
            shape = CubeShape(need("side"))
        elif shape_name == "ball":
            shape = BallShape(need("radius"))
        elif shape_name == "cross":
            shape = CrossShape(need("arm_halfwidth"), need("arm_halflength"))
        elif shape_name == "star-polygon":
            shape = StarPolygonShape(need("spikes"), need("r_in"), need("r_out"))
        elif shape_name == "fourier-radial":
            shape = FourierRadialShape(
                need("base"),
                values.get("cos_coeffs", ()),
                values.get("sin_coeffs", ()),
            )
        else:
            shape = TabulatedShape(need("rho_samples"))
        return StarDomain(
            d=values["dim"],
            center=np.asarray(values["center"], dtype=float),
            ball_radius=values["ball_radius"],
            shape=shape,
            name=name,
        )
    except DomainError as exc:
        raise ConfigError(str(exc))


def load_domain(path) -> StarDomain:
    """Load a domain config file; the file stem becomes the domain name."""
    from pathlib import Path

    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}")
    return parse_domain_config(text, name=p.stem)


def example_domain(name: str) -> StarDomain:
    """Built-in example domains used by the tests and the docs."""
    if name == "square":
        return StarDomain(2, np.array([0.5, 0.5]), 0.25, CubeShape(1.0), name="square")
    if name == "disk":
        return StarDomain(2, np.zeros(2), 0.5, BallShape(1.0), name="disk")
    if name == "cross":
        return StarDomain(2, np.zeros(2), 0.5, CrossShape(1.0, 3.0), name="cross")
    if name == "star-polygon":
        return StarDomain(
            2, np.zeros(2), 0.4, StarPolygonShape(5, 0.7, 1.0), name="star-polygon"
        )
    if name == "fourier":
        return StarDomain(
            2, np.zeros(2), 0.5,
            FourierRadialShape(1.0, cos_coeffs=(0.12,), sin_coeffs=(0.0, 0.08)),
            name="fourier",
        )
    raise DomainError(f"unknown example domain '{name}'")


EXAMPLE_DOMAIN_NAMES = ("square", "disk", "cross", "star-polygon", "fourier")
