"""Triangular meshes with vertex-centred median-dual control volumes.

Each vertex owns the polygon joining the centroids of its triangles to the
midpoints of its edges. For every mesh edge ``(i, j)`` with ``i < j`` the
integrated normal ``n_ij`` of the interface between the two cells (pointing
from ``i`` to ``j``) is stored once; ``n_ji = -n_ij``. Boundary edges are
split in two halves, one per end vertex, each keeping its tag and its
outward normal, so that per vertex

    sum_j n_ij + sum_halves n_b = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Invalid or non-conforming triangulation."""


class MeshParseError(MeshError):
    def __init__(self, line, msg):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class BoundaryTag(enum.IntEnum):
    SLIP_WALL = 1
    INFLOW_FREESTREAM = 2
    OUTFLOW_FREE = 3
    GROUND = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "BoundaryTag":
        if isinstance(value, BoundaryTag):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown boundary tag {value!r}") from None


# inflow > outflow > slip > ground
TAG_PRIORITY = (BoundaryTag.INFLOW_FREESTREAM, BoundaryTag.OUTFLOW_FREE,
                BoundaryTag.SLIP_WALL, BoundaryTag.GROUND)


def _rot_cw(d):
    return np.stack([d[..., 1], -d[..., 0]], axis=-1)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray            # (nv, 2)
    triangles: np.ndarray           # (nt, 3), counter-clockwise
    boundary_edges: np.ndarray      # (nbe, 3): v1, v2, tag; oriented with the domain on the left
    cell_volumes: np.ndarray        # (nv,)
    edges: np.ndarray               # (ne, 2), i < j
    edge_normals: np.ndarray        # (ne, 2), n_ij
    edge_triangles: np.ndarray      # (ne, 2), -1 when missing
    upwind: np.ndarray              # (ne, 2, 2): [K_ij, tie], [K_ji, tie]; -1 when none
    bnd_vertex: np.ndarray          # (2 nbe,) vertex of each boundary half-edge
    bnd_normal: np.ndarray          # (2 nbe, 2) integrated outward normal of the half-edge
    bnd_tag: np.ndarray             # (2 nbe,) BoundaryTag values
    bnd_edge: np.ndarray            # (2 nbe,) index into boundary_edges
    grad_coeff: np.ndarray          # (nt, 3, 2): gradients of the P1 hat functions
    areas: np.ndarray               # (nt,)
    lsq_coeff: np.ndarray           # (ne, 2, 2): nodal least-squares weights for i (row 0) and j (row 1)
    meta: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    def vertex_normals(self) -> np.ndarray:
        """Unit outward normal at boundary vertices (zero elsewhere)."""
        n = np.zeros((self.n_vertices, 2))
        np.add.at(n, self.bnd_vertex, self.bnd_normal)
        s = np.hypot(n[:, 0], n[:, 1])
        ok = s > 0
        n[ok] /= s[ok, None]
        return n

    def integrated_boundary_normals(self, tags=None) -> np.ndarray:
        n = np.zeros((self.n_vertices, 2))
        sel = self._tag_mask(tags)
        np.add.at(n, self.bnd_vertex[sel], self.bnd_normal[sel])
        return n

    def _tag_mask(self, tags):
        if tags is None:
            return np.ones(len(self.bnd_tag), dtype=bool)
        if isinstance(tags, (BoundaryTag, str, int)):
            tags = [tags]
        codes = [int(BoundaryTag.parse(t)) for t in tags]
        return np.isin(self.bnd_tag, codes)

    def boundary_vertices(self, tags=None) -> np.ndarray:
        return np.unique(self.bnd_vertex[self._tag_mask(tags)])

    def vertex_tags(self) -> np.ndarray:
        """Per-vertex tag by priority inflow > outflow > slip > ground; 0 inside."""
        out = np.zeros(self.n_vertices, dtype=int)
        for tag in reversed(TAG_PRIORITY):
            out[self.bnd_vertex[self.bnd_tag == int(tag)]] = int(tag)
        return out

    def boundary_weights(self, tags=None) -> np.ndarray:
        """Trapezoidal quadrature weight of each vertex on the tagged boundary."""
        w = np.zeros(self.n_vertices)
        sel = self._tag_mask(tags)
        np.add.at(w, self.bnd_vertex[sel], np.hypot(*self.bnd_normal[sel].T))
        return w

    def corner_vertices(self, angle=5.0) -> np.ndarray:
        """Boundary vertices where the tag changes or the boundary turns by
        more than ``angle`` degrees."""
        nv = self.n_vertices
        first = np.full(nv, -1)
        mixed = np.zeros(nv, dtype=bool)
        for v, t in zip(self.bnd_vertex, self.bnd_tag):
            if first[v] < 0:
                first[v] = t
            elif first[v] != t:
                mixed[v] = True
        n = np.zeros((nv, 2))
        nabs = np.zeros(nv)
        np.add.at(n, self.bnd_vertex, self.bnd_normal)
        np.add.at(nabs, self.bnd_vertex, np.hypot(*self.bnd_normal.T))
        on = nabs > 0
        ratio = np.ones(nv)
        ratio[on] = np.hypot(n[on, 0], n[on, 1]) / nabs[on]
        # two half-edges turning by phi give |sum| / sum|.| = cos(phi / 2)
        turned = ratio < math.cos(math.radians(angle) / 2.0)
        return np.nonzero(mixed | turned)[0]

    def neighbors(self, i) -> np.ndarray:
        m = (self.edges[:, 0] == i) | (self.edges[:, 1] == i)
        e = self.edges[m]
        return np.where(e[:, 0] == i, e[:, 1], e[:, 0])

    def closed_cell_residual(self) -> np.ndarray:
        r = np.zeros((self.n_vertices, 2))
        np.add.at(r, self.edges[:, 0], self.edge_normals)
        np.add.at(r, self.edges[:, 1], -self.edge_normals)
        np.add.at(r, self.bnd_vertex, self.bnd_normal)
        return r

    def upwind_triangles(self, i, j):
        """``(K_ij, K_ji)`` for the edge between vertices ``i`` and ``j``."""
        e = self.edge_index(i, j)
        a, b = self.upwind[e, 0, 0], self.upwind[e, 1, 0]
        return (int(a), int(b)) if self.edges[e, 0] == i else (int(b), int(a))

    def edge_index(self, i, j) -> int:
        lo, hi = min(i, j), max(i, j)
        m = np.nonzero((self.edges[:, 0] == lo) & (self.edges[:, 1] == hi))[0]
        if len(m) == 0:
            raise KeyError(f"no edge ({i}, {j})")
        return int(m[0])

    def triangle_gradients(self, values) -> np.ndarray:
        """P1 gradient per triangle; ``values`` is (nv, ...) -> (nt, 2, ...)."""
        v = np.asarray(values)[self.triangles]          # (nt, 3, ...)
        return np.einsum("tkd,tk...->td...", self.grad_coeff, v)

    def nodal_gradients(self, values) -> np.ndarray:
        """Least-squares gradient per vertex; (nv, ...) -> (nv, 2, ...)."""
        v = np.asarray(values)
        i, j = self.edges[:, 0], self.edges[:, 1]
        d = v[j] - v[i]
        g = np.zeros((self.n_vertices, 2) + v.shape[1:], dtype=v.dtype)
        np.add.at(g, i, np.einsum("ed,e...->ed...", self.lsq_coeff[:, 0], d))
        np.add.at(g, j, np.einsum("ed,e...->ed...", self.lsq_coeff[:, 1], -d))
        return g

    def boundary_polyline(self, tags) -> list:
        """Ordered vertex chains along the tagged boundary edges."""
        sel = np.isin(self.boundary_edges[:, 2], [int(BoundaryTag.parse(t)) for t in
                                                   ([tags] if isinstance(tags, (str, BoundaryTag, int)) else tags)])
        be = self.boundary_edges[sel]
        nxt = {int(a): int(b) for a, b, _ in be}
        starts = set(nxt) - set(nxt.values())
        chains, seen = [], set()
        for s in sorted(starts) + sorted(nxt):
            if s in seen or s not in nxt:
                continue
            chain = [s]
            seen.add(s)
            while chain[-1] in nxt and nxt[chain[-1]] not in seen:
                chain.append(nxt[chain[-1]])
                seen.add(chain[-1])
            if chain[-1] in nxt and nxt[chain[-1]] == chain[0]:
                chain.append(chain[0])
            chains.append(np.array(chain))
        return chains

    def permuted(self, perm) -> "Mesh2D":
        """Same mesh with vertex ``k`` renumbered ``perm[k]``."""
        perm = np.asarray(perm)
        verts = np.empty_like(self.vertices)
        verts[perm] = self.vertices
        be = self.boundary_edges.copy()
        be[:, :2] = perm[be[:, :2]]
        return build_dual(verts, perm[self.triangles], be, meta=dict(self.meta))

    def with_vertices(self, vertices) -> "Mesh2D":
        return build_dual(vertices, self.triangles, self.boundary_edges, meta=dict(self.meta))


def build_dual(vertices, triangles, boundary_edges, meta=None, area_tol=1e-14) -> Mesh2D:
    """Validate a triangulation and compute all median-dual quantities."""
    X = np.asarray(vertices, dtype=float)
    T = np.asarray(triangles, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise MeshError("vertices must be an (nv, 2) array")
    if T.ndim != 2 or T.shape[1] != 3:
        raise MeshError("triangles must be an (nt, 3) array")
    if T.min() < 0 or T.max() >= len(X):
        raise MeshError("triangle refers to a missing vertex")
    be_in = np.asarray(boundary_edges, dtype=object)
    if be_in.size == 0:
        be_in = np.zeros((0, 3), dtype=object)
    bev = np.array([[int(a), int(b)] for a, b, _ in be_in], dtype=np.int64).reshape(-1, 2)
    bet = np.array([int(BoundaryTag.parse(t)) for _, _, t in be_in], dtype=np.int64)

    P = X[T]
    area2 = _cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    scale = max(np.ptp(X[:, 0]), np.ptp(X[:, 1]), 1e-300) ** 2
    for t in np.nonzero(np.abs(area2) <= area_tol * scale)[0][:1]:
        raise MeshError(f"triangle {t} {T[t].tolist()} has zero area")
    neg = np.nonzero(area2 < 0)[0]
    if len(neg):
        raise MeshError(f"triangle {neg[0]} {T[neg[0]].tolist()} is clockwise "
                        "(inconsistent orientation)")
    areas = 0.5 * area2

    # oriented half-edges a->b of every triangle
    a = T.reshape(-1)
    b = T[:, [1, 2, 0]].reshape(-1)
    tri = np.repeat(np.arange(len(T)), 3)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    key = lo * len(X) + hi
    order = np.argsort(key, kind="stable")
    uniq, first, counts = np.unique(key[order], return_index=True, return_counts=True)
    if np.any(counts > 2):
        k = int(np.nonzero(counts > 2)[0][0])
        raise MeshError(f"edge ({uniq[k] // len(X)}, {uniq[k] % len(X)}) is shared by "
                        f"{counts[k]} triangles (non-conforming)")
    edges = np.stack([uniq // len(X), uniq % len(X)], axis=1)
    ne = len(edges)
    he_edge = np.empty(len(a), dtype=np.int64)
    he_edge[order] = np.repeat(np.arange(ne), counts)
    # orientation consistency: the two half-edges of an interior edge run opposite ways
    fwd = a < b
    nf = np.bincount(he_edge, weights=fwd, minlength=ne)
    bad = np.nonzero((counts == 2) & (nf != 1))[0]
    if len(bad):
        raise MeshError(f"edge {edges[bad[0]].tolist()} has inconsistent orientation")

    edge_tri = -np.ones((ne, 2), dtype=np.int64)
    # slot 0: triangle where the edge runs i->j (i<j), slot 1: j->i
    edge_tri[he_edge[fwd], 0] = tri[fwd]
    edge_tri[he_edge[~fwd], 1] = tri[~fwd]

    # dual-face normals
    G = P.mean(axis=1)
    Mid = 0.5 * (X[a] + X[b])
    contrib = _rot_cw(np.repeat(G, 3, axis=0) - Mid)      # outward of cell a, toward b
    sign = np.where(fwd, 1.0, -1.0)
    normals = np.zeros((ne, 2))
    np.add.at(normals, he_edge, contrib * sign[:, None])

    vol = np.zeros(len(X))
    np.add.at(vol, T.reshape(-1), np.repeat(areas / 3.0, 3))

    # boundary edges: orient along the triangle (domain on the left)
    is_bnd = counts == 1
    bnd_ids = np.nonzero(is_bnd)[0]
    be_key = np.minimum(bev[:, 0], bev[:, 1]) * len(X) + np.maximum(bev[:, 0], bev[:, 1])
    pos = np.searchsorted(uniq, be_key)
    pos = np.clip(pos, 0, ne - 1)
    found = (uniq[pos] == be_key) if len(be_key) else np.zeros(0, dtype=bool)
    if not np.all(found):
        k = int(np.nonzero(~found)[0][0])
        raise MeshError(f"boundary edge {bev[k].tolist()} is not a mesh edge")
    if len(be_key) and np.any(~is_bnd[pos]):
        k = int(np.nonzero(~is_bnd[pos])[0][0])
        raise MeshError(f"boundary edge {bev[k].tolist()} is interior")
    if len(np.unique(pos)) != len(pos):
        raise MeshError("duplicated boundary edge")
    missing = np.setdiff1d(bnd_ids, pos)
    if len(missing):
        raise MeshError(f"boundary edge {edges[missing[0]].tolist()} has no tag")
    e_lo, e_hi = edges[pos, 0], edges[pos, 1]
    runs_fwd = edge_tri[pos, 0] >= 0
    v1 = np.where(runs_fwd, e_lo, e_hi)
    v2 = np.where(runs_fwd, e_hi, e_lo)
    be = np.stack([v1, v2, bet], axis=1) if len(pos) else np.zeros((0, 3), dtype=np.int64)
    half_n = 0.5 * _rot_cw(X[v2] - X[v1])
    bnd_vertex = np.concatenate([v1, v2])
    bnd_normal = np.concatenate([half_n, half_n])
    bnd_tag = np.concatenate([bet, bet])
    bnd_edge = np.concatenate([np.arange(len(pos)), np.arange(len(pos))])

    # P1 hat-function gradients
    grad = np.empty((len(T), 3, 2))
    for k in range(3):
        p1, p2 = P[:, (k + 1) % 3], P[:, (k + 2) % 3]
        grad[:, k] = _rot_cw(p2 - p1) * -1.0 / area2[:, None]

    upwind = _upwind_triangles(X, T, edges)
    lsq = _lsq_coefficients(X, edges)

    return Mesh2D(X, T, be, vol, edges, normals, edge_tri, upwind, bnd_vertex, bnd_normal,
                  bnd_tag, bnd_edge, grad, areas, lsq, dict(meta or {}))


def _upwind_triangles(X, T, edges):
    nv = len(X)
    inc_v = T.reshape(-1)
    inc_t = np.repeat(np.arange(len(T)), 3)
    inc_b = T[:, [1, 2, 0]].reshape(-1)
    inc_c = T[:, [2, 0, 1]].reshape(-1)
    order = np.argsort(inc_v, kind="stable")
    inc_v, inc_t, inc_b, inc_c = inc_v[order], inc_t[order], inc_b[order], inc_c[order]
    deg = np.bincount(inc_v, minlength=nv)
    start = np.concatenate([[0], np.cumsum(deg)])
    maxdeg = int(deg.max()) if len(deg) else 0
    slot = np.arange(len(inc_v)) - start[inc_v]
    tab_t = -np.ones((nv, maxdeg), dtype=np.int64)
    tab_b = np.zeros((nv, maxdeg), dtype=np.int64)
    tab_c = np.zeros((nv, maxdeg), dtype=np.int64)
    tab_t[inc_v, slot] = inc_t
    tab_b[inc_v, slot] = inc_b
    tab_c[inc_v, slot] = inc_c

    out = -np.ones((len(edges), 2, 2), dtype=np.int64)
    for side in (0, 1):
        i = edges[:, side]
        j = edges[:, 1 - side]
        d = X[i] - X[j]
        dn = d / np.hypot(d[:, 0], d[:, 1])[:, None]
        tt = tab_t[i]
        eb = X[tab_b[i]] - X[i][:, None]
        ec = X[tab_c[i]] - X[i][:, None]
        scale = np.hypot(eb[..., 0], eb[..., 1]) * 1e-12
        c1 = _cross(eb, d[:, None, :])
        c2 = _cross(d[:, None, :], ec)
        inside = (c1 >= -scale) & (c2 >= -scale) & (tt >= 0)
        # fallback: triangle whose bisector is closest to the direction
        with np.errstate(invalid="ignore", divide="ignore"):
            bis = eb / np.hypot(eb[..., 0], eb[..., 1])[..., None] + ec / np.hypot(ec[..., 0], ec[..., 1])[..., None]
            bis /= np.maximum(np.hypot(bis[..., 0], bis[..., 1]), 1e-300)[..., None]
        score = np.where(tt >= 0, np.einsum("ekd,ed->ek", bis, dn), -np.inf)
        any_in = inside.any(axis=1)
        rank = np.where(inside, np.arange(maxdeg)[None, :], maxdeg)
        k1 = np.argmin(rank, axis=1)
        rank2 = np.where(np.arange(maxdeg)[None, :] == k1[:, None], maxdeg, rank)
        k2 = np.argmin(rank2, axis=1)
        has2 = any_in & (np.take_along_axis(rank2, k2[:, None], 1)[:, 0] < maxdeg)
        kf = np.argmax(score, axis=1)
        first = np.where(any_in, np.take_along_axis(tt, k1[:, None], 1)[:, 0],
                         np.take_along_axis(tt, kf[:, None], 1)[:, 0])
        second = np.where(has2, np.take_along_axis(tt, k2[:, None], 1)[:, 0], -1)
        # fallback ties (e.g. the backward ray leaves the domain symmetrically)
        sc2 = np.where(np.arange(maxdeg)[None, :] == kf[:, None], -np.inf, score)
        kf2 = np.argmax(sc2, axis=1)
        best = np.take_along_axis(score, kf[:, None], 1)[:, 0]
        tie = ~any_in & (np.take_along_axis(sc2, kf2[:, None], 1)[:, 0] >= best - 1e-12)
        second = np.where(tie, np.take_along_axis(tt, kf2[:, None], 1)[:, 0], second)
        out[:, side, 0] = first
        out[:, side, 1] = second
    return out


def _lsq_coefficients(X, edges):
    i, j = edges[:, 0], edges[:, 1]
    d = X[j] - X[i]
    M = np.zeros((len(X), 2, 2))
    dd = np.einsum("ea,eb->eab", d, d)
    np.add.at(M, i, dd)
    np.add.at(M, j, dd)
    Minv = np.linalg.inv(M)
    # grad_i = sum_j Minv_i (x_j - x_i)(W_j - W_i)
    ci = np.einsum("eab,eb->ea", Minv[i], d)
    cj = np.einsum("eab,eb->ea", Minv[j], -d)
    return np.stack([ci, cj], axis=1)


def structured_triangulation(nx, ny, diagonal="alternate"):
    """Triangles of an (nx+1) x (ny+1) vertex grid indexed ``j*(nx+1)+i``."""
    tris = []
    for jj in range(ny):
        for ii in range(nx):
            v00 = jj * (nx + 1) + ii
            v10, v01, v11 = v00 + 1, v00 + nx + 1, v00 + nx + 2
            flip = diagonal == "alternate" and (ii + jj) % 2 == 1
            if flip:
                tris.append((v00, v10, v01))
                tris.append((v10, v11, v01))
            else:
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
    return np.array(tris, dtype=np.int64)


def rectangle_mesh(nx, ny, lx=1.0, ly=1.0, tags=None, diagonal="alternate") -> Mesh2D:
    """Structured triangulation of [0,lx]x[0,ly]; ``tags`` maps
    bottom/right/top/left to boundary tags (slip walls by default)."""
    tags = {"bottom": "slip_wall", "right": "slip_wall", "top": "slip_wall",
            "left": "slip_wall", **(tags or {})}
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X = np.array([(x, y) for y in ys for x in xs])
    T = structured_triangulation(nx, ny, diagonal)
    return build_dual(X, T, _frame_edges(nx, ny, tags))


def _frame_edges(nx, ny, tags, bottom_tags=None, top_tags=None):
    vid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    be = []
    for i in range(nx):
        be.append((vid(i, 0), vid(i + 1, 0), bottom_tags[i] if bottom_tags else tags["bottom"]))
        be.append((vid(i + 1, ny), vid(i, ny), top_tags[i] if top_tags else tags["top"]))
    for j in range(ny):
        be.append((vid(nx, j), vid(nx, j + 1), tags["right"]))
        be.append((vid(0, j + 1), vid(0, j), tags["left"]))
    return be


@dataclass
class WedgeChannelParams:
    """Channel [0, length] x [0, height] with a body on one wall.

    ``profile``: ``"ramp"`` rises at ``wedge_angle`` from ``wedge_start``
    to the outlet; ``"wedge"`` rises then falls symmetrically over
    ``[wedge_start, wedge_end]``; ``"arc"`` is a circular-arc bump over the
    same chord whose end slopes are ``wedge_angle``.
    """

    length: float = 1.5
    height: float = 1.0
    wedge_angle: float = 10.0          # degrees
    wedge_start: float = 0.5
    wedge_end: float | None = None
    profile: str = "ramp"
    wall: str = "bottom"
    bottom_tag: str = "slip_wall"
    h: float = 0.02
    diagonal: str = "alternate"


def _wall_profile(p: WedgeChannelParams):
    th = math.radians(p.wedge_angle)
    x0 = p.wedge_start
    x1 = p.length if p.wedge_end is None else p.wedge_end
    if p.profile == "ramp":
        def f(x):
            return np.where(x > x0, (np.minimum(x, x1) - x0) * math.tan(th), 0.0)
        breaks = [x0] if x1 >= p.length else [x0, x1]
    elif p.profile == "wedge":
        xm = 0.5 * (x0 + x1)

        def f(x):
            r = np.where(x <= xm, x - x0, x1 - x) * math.tan(th)
            return np.where((x > x0) & (x < x1), r, 0.0)
        breaks = [x0, xm, x1]
    elif p.profile == "arc":
        c = x1 - x0
        R = 0.5 * c / math.sin(th)
        yc = -R * math.cos(th)
        xm = 0.5 * (x0 + x1)

        def f(x):
            inside = (x > x0) & (x < x1)
            r = yc + np.sqrt(np.maximum(R * R - (x - xm) ** 2, 0.0))
            return np.where(inside, np.maximum(r, 0.0), 0.0)
        breaks = [x0, x1]
    else:
        raise ValueError(f"unknown wedge profile {p.profile!r}")
    return f, [b for b in breaks if 0.0 < b < p.length]


def _axis_nodes(breaks, length, h):
    pts = [0.0] + sorted(breaks) + [length]
    xs = [0.0]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(round((b - a) / h)))
        xs.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(xs)


def generate_wedge_channel(params: WedgeChannelParams | None = None, **kw) -> Mesh2D:
    """Tagged structured mesh: left inflow, right outflow, top slip wall,
    bottom ``bottom_tag``; the body is a slip wall on ``params.wall``."""
    p = params or WedgeChannelParams()
    for k, v in kw.items():
        setattr(p, k, v)
    f, breaks = _wall_profile(p)
    xs = _axis_nodes(breaks, p.length, p.h)
    bump = f(xs)
    if np.any(bump >= p.height):
        raise MeshError("the wedge crosses the opposite wall (self-intersection)")
    ny = max(1, int(round(p.height / p.h)))
    nx = len(xs) - 1
    if p.wall == "bottom":
        ylo, yhi = bump, np.full_like(xs, p.height)
    elif p.wall == "top":
        ylo, yhi = np.zeros_like(xs), p.height - bump
    else:
        raise ValueError("wall must be 'bottom' or 'top'")
    eta = np.linspace(0.0, 1.0, ny + 1)
    X = np.array([(xs[i], ylo[i] + e * (yhi[i] - ylo[i])) for e in eta for i in range(nx + 1)])
    T = structured_triangulation(nx, ny, p.diagonal)
    on_body = (f(0.5 * (xs[:-1] + xs[1:])) > 0)
    body_tag = "slip_wall"
    bottom = [body_tag if (p.wall == "bottom" and on_body[i]) else p.bottom_tag for i in range(nx)]
    top = [body_tag if (p.wall == "top" and on_body[i]) else "slip_wall" for i in range(nx)]
    tags = {"left": "inflow_freestream", "right": "outflow_free", "top": "slip_wall",
            "bottom": p.bottom_tag}
    be = _frame_edges(nx, ny, tags, bottom, top)
    meta = {"generator": "wedge_channel", "nx": nx, "ny": ny, **vars(p)}
    return build_dual(X, T, be, meta=meta)


def body_vertices(mesh: Mesh2D) -> np.ndarray:
    """Vertices of the wedge surface of a generated channel (corners included)."""
    p = mesh.meta
    f, _ = _wall_profile(WedgeChannelParams(**{k: p[k] for k in vars(WedgeChannelParams()) if k in p}))
    X = mesh.vertices
    wall_y = 0.0 if p["wall"] == "bottom" else p["height"]
    sgn = 1.0 if p["wall"] == "bottom" else -1.0
    on = np.abs(X[:, 1] - (wall_y + sgn * f(X[:, 0]))) < 1e-12 * max(1.0, p["height"])
    x0 = p["wedge_start"]
    x1 = p["length"] if p["wedge_end"] is None else p["wedge_end"]
    inside = (X[:, 0] >= x0 - 1e-12) & (X[:, 0] <= x1 + 1e-12)
    return np.nonzero(on & inside)[0]


# ---------------------------------------------------------------------------
# text format: "nv nt nbe", nv lines "x y", nt lines "i j k", nbe lines "i j tag"
# (1-based indices); lines starting with '#' are comments.

def write_mesh(path, mesh: Mesh2D, comment=None):
    with open(path, "w") as fh:
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"{mesh.n_vertices} {len(mesh.triangles)} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices:
            fh.write("%.17g %.17g\n" % (x, y))
        for a, b, c in mesh.triangles + 1:
            fh.write(f"{a} {b} {c}\n")
        for a, b, t in mesh.boundary_edges:
            fh.write(f"{a + 1} {b + 1} {BoundaryTag(int(t)).label}\n")


def read_mesh(path) -> Mesh2D:
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(k + 1, ln.split()) for k, ln in enumerate(raw)
             if ln.strip() and not ln.lstrip().startswith("#")]
    it = iter(lines)

    def take(n_fields, kind, conv):
        try:
            ln, parts = next(it)
        except StopIteration:
            raise MeshParseError(len(raw) + 1, f"unexpected end of file, expected {kind}") from None
        if len(parts) != n_fields:
            raise MeshParseError(ln, f"expected {n_fields} fields for {kind}, got {len(parts)}")
        try:
            return [c(v) for c, v in zip(conv, parts)]
        except ValueError as exc:
            raise MeshParseError(ln, f"bad {kind}: {exc}") from None

    nv, nt, nbe = take(3, "header", (int, int, int))
    X = np.array([take(2, "vertex", (float, float)) for _ in range(nv)]).reshape(-1, 2)
    T = np.array([take(3, "triangle", (int, int, int)) for _ in range(nt)], dtype=np.int64).reshape(-1, 3) - 1
    be = []
    for _ in range(nbe):
        a, b, t = take(3, "boundary edge", (int, int, str))
        be.append((a - 1, b - 1, BoundaryTag.parse(t)))
    rest = next(it, None)
    if rest is not None:
        raise MeshParseError(rest[0], "trailing data after boundary edges")
    return build_dual(X, T, be)


def locate_points(mesh: Mesh2D, pts, tol=1e-12):
    """Containing triangle (or -1) and barycentric coordinates of each point."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    P = mesh.vertices[mesh.triangles]
    tri = -np.ones(len(pts), dtype=np.int64)
    bary = np.zeros((len(pts), 3))
    lo = P.min(axis=1)
    hi = P.max(axis=1)
    for k, x in enumerate(pts):
        cand = np.nonzero(np.all((lo - tol <= x) & (x <= hi + tol), axis=1))[0]
        if len(cand) == 0:
            continue
        a, b, c = P[cand, 0], P[cand, 1], P[cand, 2]
        d = _cross(b - a, c - a)
        l1 = _cross(b - x, c - x) / d
        l2 = _cross(c - x, a - x) / d
        l3 = 1.0 - l1 - l2
        L = np.stack([l1, l2, l3], axis=1)
        ok = np.nonzero(L.min(axis=1) >= -1e-10)[0]
        if len(ok):
            m = ok[np.argmax(L[ok].min(axis=1))]
            tri[k] = cand[m]
            bary[k] = L[m]
    return tri, bary
