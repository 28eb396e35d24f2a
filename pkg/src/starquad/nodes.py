"""Construction of the evaluation-point set from a cubic lattice.

For a step ``h`` the lattice splits space into cubes of side ``2h`` anchored
at a fixed translation (the origin by default).  Cubes fully inside the
domain form the class ``A(h)`` (their centers ``a(h)`` are the preferred
node positions); cubes sharing interior points with the domain form ``B(h)``.

Given a requested point count ``n`` the step is ``h_n = (mes Q / n)^(1/d) / 2``
and the node set is assembled in two stages: one representative per big cube
of ``B(3 h_n)`` (side ``6 h_n``), then a lexicographic fill-up with unused
centers of ``a(h_n)`` until ``n`` points are reached.  All arbitrary choices
are resolved lexicographically so the construction is deterministic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import CLOSURE_TOL, StarDomain
from .errors import NodeConstructionError, PreconditionError

_MAX_CELLS = 1 << 26

PROVENANCE_CENTER = "S1-center"
PROVENANCE_LATTICE = "S1-lattice-point"
PROVENANCE_INTERIOR = "S1-interior"
PROVENANCE_FILL = "S2"


def step_size(mesQ: float, n: int, d: int) -> float:
    """Lattice half-step for n requested points: ``(mesQ / n)^(1/d) / 2``."""
    if mesQ <= 0:
        raise ValueError("mesQ must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    return 0.5 * (mesQ / n) ** (1.0 / d)


@dataclass(frozen=True)
class LatticeSpec:
    """Cubic lattice with cells ``anchor + [2h*i, 2h*(i+1)]`` per axis."""

    h: float
    d: int
    anchor: np.ndarray = None

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("lattice step must be positive")
        anchor = self.anchor
        if anchor is None:
            anchor = np.zeros(self.d)
        object.__setattr__(self, "anchor", np.asarray(anchor, dtype=float))

    @property
    def side(self):
        return 2.0 * self.h

    def cell_low(self, idx):
        return self.anchor + self.side * np.asarray(idx, dtype=float)

    def cell_center(self, idx):
        return self.anchor + self.side * (np.asarray(idx, dtype=float) + 0.5)

    def index_of(self, points):
        """Cell index of each point; points on faces go to the lower cell."""
        t = (np.atleast_2d(points) - self.anchor) / self.side
        idx = np.floor(t).astype(np.int64)
        on_face = (t - idx) < 1e-9
        return np.where(on_face, idx - 1, idx)

    def covering_range(self, lo, hi):
        """Per-axis index range of cells intersecting the open box (lo, hi)."""
        t_lo = (np.asarray(lo) - self.anchor) / self.side
        t_hi = (np.asarray(hi) - self.anchor) / self.side
        i_lo = np.floor(t_lo + 1e-9).astype(np.int64)
        i_hi = np.ceil(t_hi - 1e-9).astype(np.int64) - 1
        return i_lo, np.maximum(i_hi, i_lo)


def _cell_indices(lat: LatticeSpec, dom: StarDomain):
    i_lo, i_hi = lat.covering_range(dom.bbox_lo, dom.bbox_hi)
    counts = (i_hi - i_lo + 1).astype(np.int64)
    total = int(np.prod(counts))
    if total > _MAX_CELLS:
        raise PreconditionError(
            f"lattice with step {lat.h} needs {total} cells; too many for d={dom.d}"
        )
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(i_lo, i_hi)], indexing="ij")
    return np.stack(grids, axis=-1).reshape(-1, dom.d)


def _probe_offsets(side: float, probe_resolution: int, d: int):
    corners = np.array(np.meshgrid(*([[0.0, 1.0]] * d), indexing="ij"))
    corners = corners.reshape(d, -1).T * side
    sub = (np.arange(probe_resolution) + 0.5) * side / probe_resolution
    interior = np.stack(np.meshgrid(*([sub] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return corners, interior


def classify_cubes(dom: StarDomain, lat: LatticeSpec, probe_resolution: int = 3):
    """Split lattice cubes into fully-inside (A) and domain-meeting (B) sets.

    A cube belongs to A when every probe (the ``2^d`` corners and a
    ``probe_resolution^d`` midpoint subgrid) lies in the closure of the
    domain, and to B when any probe lies strictly inside.  A is always a
    subset of B.  Returns lexicographically sorted index arrays ``(A, B)``.
    """
    if probe_resolution < 1:
        raise ValueError("probe_resolution must be at least 1")
    idx = _cell_indices(lat, dom)
    lows = lat.anchor + lat.side * idx.astype(float)
    corners, interior = _probe_offsets(lat.side, probe_resolution, dom.d)

    all_closed = np.ones(len(idx), dtype=bool)
    any_strict = np.zeros(len(idx), dtype=bool)
    for off in itertools.chain(corners, interior):
        m = dom.relative_margin(lows + off)
        all_closed &= m <= CLOSURE_TOL
        any_strict |= m < -CLOSURE_TOL
    in_b = any_strict | all_closed

    def lex_sorted(mask):
        sel = idx[mask]
        order = np.lexsort(sel.T[::-1])
        return sel[order]

    return lex_sorted(all_closed), lex_sorted(in_b)


@dataclass(frozen=True)
class NodeSet:
    """The constructed evaluation points with provenance and cube ownership."""

    h_n: float
    d: int
    anchor: np.ndarray
    points: np.ndarray                 # (K, d) coordinates, all inside Q
    provenance: tuple                  # one tag per node
    big_cube: np.ndarray               # (K, d) index of the owning 6 h_n cube
    acell: tuple                       # per node: index tuple of its A(h_n) cell, or None
    n_requested: int
    s1_overflow: bool = False          # the big-cube stage alone exceeded n
    cube_nodes: dict = field(default=None, repr=False)

    def __post_init__(self):
        mapping = {}
        for k, cube in enumerate(map(tuple, self.big_cube.tolist())):
            mapping.setdefault(cube, []).append(k)
        object.__setattr__(self, "cube_nodes", mapping)

    def __len__(self):
        return len(self.points)

    @property
    def big_lattice(self):
        return LatticeSpec(3.0 * self.h_n, self.d, self.anchor)

    @property
    def small_lattice(self):
        return LatticeSpec(self.h_n, self.d, self.anchor)

    def covered_cells(self):
        """A(h_n) cell indices whose centers are nodes (the covered region)."""
        return {c for c in self.acell if c is not None}


def _scan_interior_point(dom, low, side, start_resolution, max_refine=3):
    """Deterministic interior point of the cube, with a clearance preference.

    Scans midpoint subgrids in lexicographic order and accepts the first
    point lying strictly inside with distance to the complement larger than
    one subcell diagonal (probed along the 3^d - 1 surrounding directions).
    The subgrid is doubled up to ``max_refine`` times.  When no point clears
    the margin (the cube meets the domain only in a thin sliver) the deepest
    strictly-inside scan point is used instead; when even the scans miss the
    sliver, a strictly-inside cube corner is pulled into the cube interior
    along a dyadic ladder toward the center.  Returns ``None`` only when no
    interior point is found at all.
    """
    d = len(low)
    ring = np.array(
        [v for v in itertools.product((-1.0, 0.0, 1.0), repeat=d) if any(v)]
    )
    ring /= np.linalg.norm(ring, axis=1, keepdims=True)
    res = start_resolution
    deepest = None
    deepest_margin = 0.0
    for _ in range(max_refine + 1):
        diag = side / res * math.sqrt(d)
        axes = [low[i] + (np.arange(res) + 0.5) * side / res for i in range(d)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        margin = dom.relative_margin(pts)
        inside = margin < -1e-12
        if np.any(inside):
            candidates = pts[inside]
            probes = candidates[:, None, :] + diag * ring[None, :, :]
            ok = dom.contains(probes.reshape(-1, d)).reshape(len(candidates), -1)
            clear = ok.all(axis=1)
            if np.any(clear):
                return candidates[int(np.argmax(clear))]
            best = int(np.argmin(margin[inside]))
            if margin[inside][best] < deepest_margin:
                deepest_margin = float(margin[inside][best])
                deepest = candidates[best]
        res *= 2
    if deepest is not None:
        return deepest
    # sliver caught only by a cube corner: pull it inward until inside
    center = low + 0.5 * side
    corners = low + side * np.array(
        np.meshgrid(*([[0.0, 1.0]] * d), indexing="ij")
    ).reshape(d, -1).T
    for corner in corners[np.flatnonzero(dom.contains(corners))]:
        for k in range(1, 50):
            pulled = corner + 2.0 ** (-k) * (center - corner)
            if dom.contains(pulled[None, :])[0]:
                return pulled
    return None


def build_S1(dom: StarDomain, h_n: float, probe_resolution: int = 8,
             anchor=None, _a_idx=None):
    """One node per big cube: centers first, lattice points next, then scans.

    For every cube of ``B(3 h_n)`` emit its center when that point is the
    center of an ``A(h_n)`` cube; otherwise the lexicographically smallest
    ``A(h_n)`` center inside the cube; otherwise the first interior point
    found by the clearance scan.  Raises :class:`NodeConstructionError` when
    a cube meets the domain only in slivers the scan cannot resolve.

    Returns ``(points, provenance, big_cube_idx, acell_idx)``.
    """
    if h_n <= 0:
        raise ValueError("h_n must be positive")
    d = dom.d
    lat_small = LatticeSpec(h_n, d, anchor)
    lat_big = LatticeSpec(3.0 * h_n, d, anchor)
    a_idx = _a_idx
    if a_idx is None:
        a_idx, _ = classify_cubes(dom, lat_small, probe_resolution)
    a_set = set(map(tuple, a_idx.tolist()))
    _, b_big = classify_cubes(dom, lat_big, probe_resolution)

    deltas = sorted(itertools.product(range(3), repeat=d))
    points, tags, cubes, acells = [], [], [], []
    for j in map(tuple, b_big.tolist()):
        base = tuple(3 * c for c in j)
        central = tuple(b + 1 for b in base)
        if central in a_set:
            points.append(lat_small.cell_center(central))
            tags.append(PROVENANCE_CENTER)
            acells.append(central)
        else:
            hit = None
            for delta in deltas:
                cell = tuple(b + t for b, t in zip(base, delta))
                if cell in a_set:
                    hit = cell
                    break
            if hit is not None:
                points.append(lat_small.cell_center(hit))
                tags.append(PROVENANCE_LATTICE)
                acells.append(hit)
            else:
                pt = _scan_interior_point(
                    dom, lat_big.cell_low(j), lat_big.side, probe_resolution
                )
                if pt is None:
                    raise NodeConstructionError(
                        f"no interior point found in cube {j} at step {h_n}; "
                        "probe_resolution too small for the domain features"
                    )
                points.append(pt)
                tags.append(PROVENANCE_INTERIOR)
                acells.append(None)
        cubes.append(j)
    return points, tags, cubes, acells


def build_nodeset(dom: StarDomain, n: int, mesQ: float,
                  probe_resolution: int = 8, anchor=None) -> NodeSet:
    """Assemble the full node set: big-cube stage plus lattice-center fill.

    The fill-up takes the first ``n - |S1|`` unused ``a(h_n)`` centers in
    lexicographic order (all of them when fewer remain).  If the big-cube
    stage alone yields ``n`` or more points the set is kept intact and the
    ``s1_overflow`` flag is raised instead of failing.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    h_n = step_size(mesQ, n, dom.d)
    lat_small = LatticeSpec(h_n, dom.d, anchor)

    a_idx, _ = classify_cubes(dom, lat_small, probe_resolution)
    s1_pts, s1_tags, s1_cubes, s1_acells = build_S1(
        dom, h_n, probe_resolution, anchor, _a_idx=a_idx
    )
    used = {c for c in s1_acells if c is not None}
    remaining = [tuple(c) for c in a_idx.tolist() if tuple(c) not in used]

    overflow = len(s1_pts) >= n
    fill_count = max(0, n - len(s1_pts))
    fill = remaining[:fill_count]

    points = list(s1_pts)
    tags = list(s1_tags)
    cubes = list(s1_cubes)
    acells = list(s1_acells)
    for cell in fill:
        points.append(lat_small.cell_center(cell))
        tags.append(PROVENANCE_FILL)
        cubes.append(tuple(c // 3 for c in cell))
        acells.append(cell)

    return NodeSet(
        h_n=h_n,
        d=dom.d,
        anchor=lat_small.anchor,
        points=np.asarray(points, dtype=float),
        provenance=tuple(tags),
        big_cube=np.asarray(cubes, dtype=np.int64),
        acell=tuple(acells),
        n_requested=n,
        s1_overflow=overflow,
    )


def check_nodeset_invariants(dom: StarDomain, nodes: NodeSet) -> dict:
    """Verify the structural node-set properties; returns a findings dict.

    Checks membership of every node, the per-cube uniqueness over the
    ``B(h_n)`` lattice, the size bound against the requested count, and the
    ownership consistency of the big-cube assignment.
    """
    inside = dom.contains(nodes.points)
    lat = nodes.small_lattice
    small_idx = lat.index_of(nodes.points)
    unique = len({tuple(i) for i in small_idx.tolist()}) == len(nodes)
    lows = nodes.big_cube.astype(float) * nodes.big_lattice.side + nodes.anchor
    rel = (nodes.points - lows) / nodes.big_lattice.side
    owned = bool(np.all((rel >= -1e-9) & (rel <= 1 + 1e-9)))
    return {
        "all_inside": bool(np.all(inside)),
        "size_ok": nodes.s1_overflow or len(nodes) <= nodes.n_requested,
        "one_per_small_cube": unique,
        "big_cube_owns_nodes": owned,
    }
