"""Chebyshev-distance cells, cubature weights and the remainder region.

Every point of the domain inside a node's big cube is attributed to the
nearest node of that cube in the max norm; the measure of a node's cell is
its cubature weight.  Measures are estimated by counting midpoint subcells
(``subgrid`` subcells per axis per ``h_n`` cell), which keeps the cell
estimates, the covered-region remainder and the weight sum mutually
consistent at probe level.

The per-cube work is pure, so cubes may be processed by a thread pool
(``STARQUAD_THREADS``, 0 or unset means auto); results are reduced in cube
order, making the output bit-identical for any thread count.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import JordanBracket, StarDomain
from .errors import ConfigError
from .nodes import (
    LatticeSpec,
    NodeSet,
    PROVENANCE_INTERIOR,
    _cell_indices,
)

RULE_FORMAT_TAG = "starquad-rule v1"


def thread_count() -> int:
    """Worker count from STARQUAD_THREADS; 0 or unset selects automatically."""
    raw = os.environ.get("STARQUAD_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value <= 0:
        return min(os.cpu_count() or 1, 8)
    return value


@dataclass(frozen=True)
class RuleDiagnostics:
    """Probe-level bookkeeping carried by a cubature rule."""

    sum_weights: float
    unassigned_volume: float
    remainder: float
    max_assign_linf: float
    per_node_max_linf: np.ndarray
    subcell_side: float
    zero_weight_nodes: int
    u_points: np.ndarray = field(repr=False)
    u_node: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CubatureRule:
    """Nodes, weights and diagnostics of one constructed rule."""

    h_n: float
    d: int
    anchor: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    provenance: tuple
    n_requested: int
    subgrid: int = None
    bracket: JordanBracket = None
    domain: StarDomain = None
    nodeset: NodeSet = None
    diagnostics: RuleDiagnostics = None

    def __len__(self):
        return len(self.nodes)

    @property
    def sum_weights(self):
        return float(self.weights.sum())


def _containing_cubes(x, lat: LatticeSpec, tol=1e-9):
    """Indices of all closed lattice cubes containing x, lex sorted."""
    t = (np.asarray(x, dtype=float) - lat.anchor) / lat.side
    base = np.floor(t).astype(np.int64)
    options = []
    for axis in range(len(t)):
        frac = t[axis] - base[axis]
        opts = [base[axis]]
        if frac < tol:
            opts.insert(0, base[axis] - 1)
        if frac > 1.0 - tol:
            opts.append(base[axis] + 1)
        options.append(opts)
    return sorted(itertools.product(*options))


def assign_cell(x, nodes: NodeSet):
    """Index of the max-norm nearest node whose big cube contains ``x``.

    Ties go to the smallest node index; returns ``None`` when no node's big
    cube contains the point.
    """
    lat = nodes.big_lattice
    candidates = []
    for cube in _containing_cubes(x, lat):
        candidates.extend(nodes.cube_nodes.get(cube, []))
    if not candidates:
        return None
    ks = sorted(set(candidates))
    pts = nodes.points[ks]
    dist = np.abs(pts - np.asarray(x, dtype=float)).max(axis=1)
    return ks[int(np.argmin(dist))]


def _subcell_layout(d, subgrid):
    """Subcell center offsets within a big cube and their local h-cell."""
    per_axis = 3 * subgrid
    grid = np.stack(
        np.meshgrid(*([np.arange(per_axis)] * d), indexing="ij"), axis=-1
    ).reshape(-1, d)
    local = grid // subgrid  # in {0, 1, 2}^d
    return grid, local


def compute_weights(dom: StarDomain, nodes: NodeSet, subgrid: int = 4,
                    bracket: JordanBracket = None) -> CubatureRule:
    """Measure every node's max-norm cell by midpoint subcell counting.

    Each big cube is split into ``(3 * subgrid)^d`` subcells; subcell centers
    inside the domain are assigned to the nearest node of the owning cube
    (ties to the smallest index).  Subcell centers inside the domain but in a
    cube without nodes are reported as unassigned volume rather than dropped.
    The remainder (assigned volume outside the covered lattice cells) is
    accumulated on the same subcells.
    """
    if subgrid < 2:
        raise ValueError("subgrid must be at least 2 subcells per axis")
    d = dom.d
    lat_big = nodes.big_lattice
    per_axis = 3 * subgrid
    subside = lat_big.side / per_axis
    subvol = subside ** d

    grid, local = _subcell_layout(d, subgrid)
    offsets = (grid + 0.5) * subside
    local_flat = np.ravel_multi_index(local.T, (3,) * d)
    deltas = list(itertools.product(range(3), repeat=d))

    covered = nodes.covered_cells()
    cube_idx = _cell_indices(lat_big, dom)
    cube_list = [tuple(c) for c in cube_idx.tolist()]

    k_count = len(nodes)
    node_pts = nodes.points
    m_sub = len(offsets)

    def process_block(start, stop):
        """Handle cubes [start, stop): one membership call, then per cube."""
        lows = lat_big.anchor + lat_big.side * cube_idx[start:stop].astype(float)
        pts = lows[:, None, :] + offsets[None, :, :]
        inside_blk = dom.contains(pts.reshape(-1, d)).reshape(len(lows), m_sub)
        out = []
        for i in range(len(lows)):
            cube = cube_list[start + i]
            inside = inside_blk[i]
            n_in = int(np.count_nonzero(inside))
            if n_in == 0:
                out.append(None)
                continue
            ks = nodes.cube_nodes.get(cube, [])
            if not ks:
                out.append((None, None, n_in, None, None, None))
                continue
            pin = pts[i][inside]
            dist = np.abs(pin[:, None, :] - node_pts[ks][None, :, :]).max(axis=2)
            j = np.argmin(dist, axis=1)
            chosen = dist[np.arange(len(pin)), j]
            w_local = np.bincount(j, minlength=len(ks)) * subvol
            max_local = np.zeros(len(ks))
            np.maximum.at(max_local, j, chosen)
            # remainder: assigned subcells whose h_n cell is not covered
            cov_local = np.array(
                [tuple(3 * c + t for c, t in zip(cube, delta)) in covered
                 for delta in deltas]
            )
            u_mask = ~cov_local[local_flat[inside]]
            u_pts = pin[u_mask]
            u_node = np.asarray(ks, dtype=np.int64)[j[u_mask]]
            out.append((ks, w_local, 0, max_local, u_pts, u_node))
        return out

    block = max(32, (1 << 19) // m_sub)
    spans = [(s, min(s + block, len(cube_list)))
             for s in range(0, len(cube_list), block)]
    workers = thread_count()
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda sp: process_block(*sp), spans))
    else:
        blocks = [process_block(*sp) for sp in spans]
    results = [res for blk in blocks for res in blk]

    weights = np.zeros(k_count)
    per_node_max = np.zeros(k_count)
    unassigned_cells = 0
    u_points_parts, u_node_parts = [], []
    for res in results:
        if res is None:
            continue
        ks, w_local, n_unassigned, max_local, u_pts, u_node = res
        if ks is None:
            unassigned_cells += n_unassigned
            continue
        weights[ks] += w_local
        np.maximum.at(per_node_max, ks, max_local)
        if len(u_pts):
            u_points_parts.append(u_pts)
            u_node_parts.append(u_node)

    u_points = (
        np.vstack(u_points_parts) if u_points_parts else np.empty((0, d))
    )
    u_node = (
        np.concatenate(u_node_parts) if u_node_parts else np.empty(0, np.int64)
    )
    zero_nodes = int(np.count_nonzero(weights == 0.0))
    if zero_nodes:
        warnings.warn(
            f"{zero_nodes} node(s) received zero weight at subgrid {subgrid}",
            stacklevel=2,
        )
    diag = RuleDiagnostics(
        sum_weights=float(weights.sum()),
        unassigned_volume=unassigned_cells * subvol,
        remainder=float(len(u_points)) * subvol,
        max_assign_linf=float(per_node_max.max()) if k_count else 0.0,
        per_node_max_linf=per_node_max,
        subcell_side=subside,
        zero_weight_nodes=zero_nodes,
        u_points=u_points,
        u_node=u_node,
    )
    return CubatureRule(
        h_n=nodes.h_n,
        d=d,
        anchor=nodes.anchor,
        nodes=nodes.points,
        weights=weights,
        provenance=nodes.provenance,
        n_requested=nodes.n_requested,
        subgrid=subgrid,
        bracket=bracket,
        domain=dom,
        nodeset=nodes,
        diagnostics=diag,
    )


def remainder_measure(dom: StarDomain, rule: CubatureRule) -> float:
    """Total assigned volume lying outside the covered lattice cells.

    The value is estimated on the same subgrid the weights were computed on;
    rules without stored diagnostics (for example loaded from CSV) are
    re-measured with a reconstructed node set.
    """
    if rule.diagnostics is not None:
        return rule.diagnostics.remainder
    nodes = rule.nodeset or rebuild_nodeset(rule)
    fresh = compute_weights(dom, nodes, subgrid=rule.subgrid or 4,
                            bracket=rule.bracket)
    return fresh.diagnostics.remainder


def rebuild_nodeset(rule: CubatureRule) -> NodeSet:
    """Reconstruct node ownership for a rule loaded from CSV.

    Assumes the default lattice anchor recorded on the rule.  Lattice-center
    provenance identifies the covered cells; big-cube ownership of points on
    shared faces resolves to the lexicographically smallest cube.
    """
    lat_small = LatticeSpec(rule.h_n, rule.d, rule.anchor)
    lat_big = LatticeSpec(3.0 * rule.h_n, rule.d, rule.anchor)
    big = lat_big.index_of(rule.nodes)
    acells = []
    for pt, tag in zip(rule.nodes, rule.provenance):
        if tag == PROVENANCE_INTERIOR:
            acells.append(None)
        else:
            cell = np.round((pt - lat_small.anchor) / lat_small.side - 0.5)
            acells.append(tuple(int(c) for c in cell))
    return NodeSet(
        h_n=rule.h_n,
        d=rule.d,
        anchor=lat_small.anchor,
        points=rule.nodes,
        provenance=rule.provenance,
        big_cube=np.asarray(big, dtype=np.int64),
        acell=tuple(acells),
        n_requested=rule.n_requested,
    )


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def rule_to_csv(rule: CubatureRule) -> str:
    """Serialize a rule; floats use repr so the round trip is exact."""
    inner = rule.bracket.inner if rule.bracket else math.nan
    outer = rule.bracket.outer if rule.bracket else math.nan
    lines = [
        f"# {RULE_FORMAT_TAG}",
        f"# d={rule.d}",
        f"# n={rule.n_requested}",
        f"# h_n={rule.h_n!r}",
        f"# mesQ_inner={inner!r}",
        f"# mesQ_outer={outer!r}",
        f"# sum_weights={rule.sum_weights!r}",
    ]
    for pt, w, tag in zip(rule.nodes, rule.weights, rule.provenance):
        coords = ",".join(repr(float(c)) for c in pt)
        lines.append(f"{coords},{float(w)!r},{tag}")
    return "\n".join(lines) + "\n"


def save_rule_csv(rule: CubatureRule, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(rule_to_csv(rule))


def rule_from_csv(text: str) -> CubatureRule:
    """Parse a rule CSV produced by :func:`rule_to_csv`."""
    header = {}
    pts, ws, tags = [], [], []
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {RULE_FORMAT_TAG}":
        raise ConfigError(f"not a {RULE_FORMAT_TAG} file")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                header[key.strip()] = val.strip()
            continue
        parts = line.split(",")
        if len(parts) < 3:
            raise ConfigError("node row needs coordinates, weight, provenance",
                              line=lineno)
        try:
            *coords, w = [float(tok) for tok in parts[:-1]]
        except ValueError:
            raise ConfigError(f"bad number in row: {line!r}", line=lineno)
        pts.append(coords)
        ws.append(w)
        tags.append(parts[-1])
    try:
        d = int(header["d"])
        n = int(header["n"])
        h_n = float(header["h_n"])
    except (KeyError, ValueError):
        raise ConfigError("missing or malformed d/n/h_n header")
    nodes = np.asarray(pts, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != d:
        raise ConfigError(f"node rows do not match d={d}")
    inner = float(header.get("mesQ_inner", "nan"))
    outer = float(header.get("mesQ_outer", "nan"))
    bracket = None
    if not math.isnan(inner) and not math.isnan(outer):
        bracket = JordanBracket(inner=inner, outer=outer, resolution=0)
    return CubatureRule(
        h_n=h_n,
        d=d,
        anchor=np.zeros(d),
        nodes=nodes,
        weights=np.asarray(ws, dtype=float),
        provenance=tuple(tags),
        n_requested=n,
        bracket=bracket,
    )


def load_rule_csv(path) -> CubatureRule:
    with open(path) as fh:
        return rule_from_csv(fh.read())
