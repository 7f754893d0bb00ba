"""Intrinsic flat geometry: Delaunay triangulations, systole, mesh distances, diameter."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .errors import InvalidSurface, MeshTooCoarse, NonTermination, StartTooClose
from .flow import COMPLETED, trace_flow
from .surface import (
    TAU_GEOM,
    TWO_PI,
    EdgeGluing,
    SurfacePoint,
    TranslationSurface,
    convexified,
    corner_classes,
    require_valid,
    triangulate_polygon,
)

MAX_FLIPS = 10**6


class Measurement(NamedTuple):
    value: float
    error: float


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


# triangulations ------------------------------------------------------------


class Triangulation:
    """Triangles in their own charts plus a side gluing map ``(t, s) -> (t', s')``.

    Side ``s`` of triangle ``t`` runs from corner ``s`` to corner ``s + 1``.
    """

    def __init__(self, pts, glue):
        self.pts = np.array(pts, dtype=float).reshape(-1, 3, 2)
        self.glue = dict(glue)

    def __len__(self):
        return len(self.pts)

    def copy(self) -> "Triangulation":
        return Triangulation(self.pts.copy(), self.glue)

    def edge_vector(self, t, s) -> np.ndarray:
        return self.pts[t, (s + 1) % 3] - self.pts[t, s]

    def translation(self, t, s) -> np.ndarray:
        u, k = self.glue[(t, s)]
        return self.pts[u, (k + 1) % 3] - self.pts[t, s]

    def corner_class(self) -> list[list[int]]:
        return corner_classes([3] * len(self.pts), self.glue)

    def edges(self) -> list[tuple[int, int]]:
        """One representative side per glued pair."""
        return sorted({min(k, v) for k, v in self.glue.items()})

    def edge_lengths(self) -> np.ndarray:
        return np.array([float(np.hypot(*self.edge_vector(t, s))) for t, s in self.edges()])

    def angle(self, t, j) -> float:
        p = self.pts[t]
        a = p[(j + 1) % 3] - p[j]
        b = p[(j + 2) % 3] - p[j]
        return math.atan2(abs(_cross(a[0], a[1], b[0], b[1])), float(np.dot(a, b)))

    def angle_sums(self) -> list[float]:
        cc = self.corner_class()
        sums = [0.0] * (1 + max(c for row in cc for c in row))
        for t in range(len(self.pts)):
            for j in range(3):
                sums[cc[t][j]] += self.angle(t, j)
        return sums

    def opposite_angle_sum(self, t, s) -> float:
        u, k = self.glue[(t, s)]
        return self.angle(t, (s + 2) % 3) + self.angle(u, (k + 2) % 3)

    def non_delaunay_edges(self, tol: float = TAU_GEOM) -> list[tuple[int, int]]:
        return [(t, s) for t, s in self.edges() if self.opposite_angle_sum(t, s) > math.pi + tol]

    def is_delaunay(self, tol: float = TAU_GEOM) -> bool:
        return not self.non_delaunay_edges(tol)

    def flip(self, t1: int, s1: int) -> bool:
        """Replace the diagonal of the quadrilateral formed by the two triangles at a side.

        Returns ``False`` (and does nothing) when the quadrilateral is not strictly convex.
        """
        t2, s2 = self.glue[(t1, s1)]
        p1 = self.pts[t1].copy()
        p2 = self.pts[t2].copy()
        a, b, c = p1[s1], p1[(s1 + 1) % 3], p1[(s1 + 2) % 3]
        d = p2[(s2 + 2) % 3] + (a - p2[(s2 + 1) % 3])
        quad = (a, d, b, c)
        for i in range(4):
            u, v, w = quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]
            if _cross(*(v - u), *(w - v)) <= TAU_GEOM * 1e-3:
                return False
        keymap = {
            (t2, (s2 + 1) % 3): (t1, 0),
            (t1, (s1 + 2) % 3): (t1, 2),
            (t2, (s2 + 2) % 3): (t2, 0),
            (t1, (s1 + 1) % 3): (t2, 1),
        }
        new_pairs = []
        for old, new in keymap.items():
            other = self.glue[old]
            new_pairs.append((new, keymap.get(other, other)))
        for t in (t1, t2):
            for s in range(3):
                self.glue.pop((t, s), None)
        for k, v in new_pairs:
            self.glue[k] = v
            self.glue[v] = k
        self.glue[(t1, 1)] = (t2, 2)
        self.glue[(t2, 2)] = (t1, 1)
        self.pts[t1] = [a, d, c]
        self.pts[t2] = [d, b, c]
        return True

    def to_surface(self, name: str = "") -> TranslationSurface:
        gl = [EdgeGluing(t, s, *self.glue[(t, s)]) for t, s in self.edges()]
        return TranslationSurface(list(self.pts), gl, name=name)

    def max_edge(self) -> float:
        return float(self.edge_lengths().max())


def initial_triangulation(surface: TranslationSurface) -> Triangulation:
    """Ear-clip every face and split triangles at interior marked points."""
    pts = []
    glue = {}
    edge_home = {}
    home = []
    for f, v in enumerate(surface.faces):
        n = len(v)
        diag = {}
        for a, b, c in triangulate_polygon(v):
            t = len(pts)
            pts.append(v[[a, b, c]])
            home.append(f)
            for s, (p, q) in enumerate(((a, b), (b, c), (c, a))):
                if (p + 1) % n == q:
                    edge_home[(f, p)] = (t, s)
                elif (q, p) in diag:
                    o = diag.pop((q, p))
                    glue[o] = (t, s)
                    glue[(t, s)] = o
                else:
                    diag[(p, q)] = (t, s)
    for g in surface.gluings:
        a, b = edge_home[(g.fa, g.ea)], edge_home[(g.fb, g.eb)]
        glue[a] = b
        glue[b] = a
    tri = Triangulation(pts, glue)
    for m in surface.marked:
        _insert_point(tri, home, m)
    return tri


def _insert_point(tri: Triangulation, home: list[int], m: SurfacePoint) -> None:
    p = np.array([m.x, m.y])
    for t in range(len(home)):
        if home[t] != m.face:
            continue
        q = tri.pts[t]
        crosses = [_cross(*(q[(s + 1) % 3] - q[s]), *(p - q[s])) for s in range(3)]
        if min(crosses) > TAU_GEOM:
            break
        if min(crosses) > -TAU_GEOM:
            raise InvalidSurface(f"marked point {tuple(m)} lies on a triangulation edge; move it into a face interior")
    else:
        raise InvalidSurface(f"marked point {tuple(m)} not found in its face")
    old = tri.pts[t].copy()
    base = len(tri.pts)
    ids = [t, base, base + 1]
    outer = {s: tri.glue.pop((t, s)) for s in range(3)}
    new_pts = list(tri.pts)
    new_pts += [None, None]
    for k in range(3):
        new_pts[ids[k]] = np.array([old[k], old[(k + 1) % 3], p])
    tri.pts = np.array(new_pts, dtype=float)
    home += [m.face, m.face]
    for k in range(3):
        o = outer[k]
        if o[0] == t:
            o = (ids[o[1]], 0)
        tri.glue[(ids[k], 0)] = o
        tri.glue[o] = (ids[k], 0)
        nxt = ids[(k + 1) % 3]
        tri.glue[(ids[k], 1)] = (nxt, 2)
        tri.glue[(nxt, 2)] = (ids[k], 1)


def delaunay_triangulate(surface: TranslationSurface, max_flips: int = MAX_FLIPS) -> Triangulation:
    """Flip non-Delaunay edges of an ear-clipping triangulation until none remain.

    Cocircular quadrilaterals (angle sum within tolerance of pi) are left as
    they are, so the output is a deterministic function of the input.
    """
    require_valid(surface)
    tri = initial_triangulation(surface)
    stack = list(reversed(tri.edges()))
    flips = 0
    while stack:
        t, s = stack.pop()
        if (t, s) not in tri.glue:
            continue
        if tri.opposite_angle_sum(t, s) <= math.pi + TAU_GEOM:
            continue
        u, k = tri.glue[(t, s)]
        if not tri.flip(t, s):
            continue
        flips += 1
        if flips > max_flips:
            raise NonTermination(f"Delaunay flips exceeded {max_flips}")
        for q in (t, u):
            for r in range(3):
                stack.append((q, r))
    return tri


# systole -------------------------------------------------------------------


def _endpoint_classes(tri: Triangulation, surface: TranslationSurface) -> tuple[list[list[int]], set[int]]:
    cc = tri.corner_class()
    sums = tri.angle_sums()
    cone = {c for c, a in enumerate(sums) if round(a / TWO_PI) > 1}
    return cc, (cone if cone else set(range(len(sums))))


def saddle_connections(tri: Triangulation, radius: float, classes=None):
    """Holonomy vectors of saddle connections of length < ``radius`` between vertices in ``classes``.

    Each is found by unfolding triangles across edges inside the visibility
    wedge of a corner.  Returns a list of (length, vector, start class, end class).
    """
    cc = tri.corner_class()
    if classes is None:
        classes = set(c for row in cc for c in row)
    found = []
    pts = tri.pts
    for t0 in range(len(pts)):
        for j in range(3):
            if cc[t0][j] not in classes:
                continue
            o = pts[t0, j]
            for jj in ((j + 1) % 3, (j + 2) % 3):
                if cc[t0][jj] in classes:
                    w = pts[t0, jj] - o
                    ln = float(np.hypot(*w))
                    if ln < radius:
                        found.append((ln, w, cc[t0][j], cc[t0][jj]))
            r = pts[t0, (j + 1) % 3] - o
            l = pts[t0, (j + 2) % 3] - o
            side = (j + 1) % 3
            tn, kn = tri.glue[(t0, side)]
            delta = pts[t0, side] - pts[tn, (kn + 1) % 3]
            stack = [(tn, kn, delta, r, l, 0)]
            while stack:
                tn, kn, delta, wr, wl, depth = stack.pop()
                if depth > 100000:
                    raise NonTermination("saddle connection search did not terminate")
                S = pts[tn, kn] + delta - o
                E = pts[tn, (kn + 1) % 3] + delta - o
                if _seg_dist(S, E) >= radius:
                    continue
                C = pts[tn, (kn + 2) % 3] + delta - o
                cls = cc[tn][(kn + 2) % 3]
                in_r = _cross(*wr, *C) > 1e-12 * (1 + abs(C).sum())
                in_l = _cross(*C, *wl) > 1e-12 * (1 + abs(C).sum())
                if in_r and in_l:
                    ln = float(np.hypot(*C))
                    if cls in classes and ln < radius:
                        found.append((ln, C.copy(), cc[t0][j], cls))
                # right part: edge E -> C, left part: edge C -> S
                for side_k, lo, hi in (((kn + 1) % 3, E, C), ((kn + 2) % 3, C, S)):
                    nr = wr if _cross(*wr, *lo) <= 0 else lo
                    nl = wl if _cross(*hi, *wl) <= 0 else hi
                    if _cross(*nr, *nl) <= 0:
                        continue
                    t2, k2 = tri.glue[(tn, side_k)]
                    d2 = delta + pts[tn, side_k] - pts[t2, (k2 + 1) % 3]
                    stack.append((t2, k2, d2, nr, nl, depth + 1))
    found.sort(key=lambda x: x[0])
    return found


def _seg_dist(a, b) -> float:
    """Distance from the origin to segment ab."""
    ab = b - a
    den = float(np.dot(ab, ab))
    s = 0.0 if den == 0 else min(1.0, max(0.0, -float(np.dot(a, ab)) / den))
    return float(np.hypot(*(a + s * ab)))


def systole_from_triangulation(tri: Triangulation, classes) -> float:
    cc = tri.corner_class()
    bound = math.inf
    for t, s in tri.edges():
        if cc[t][s] in classes and cc[t][(s + 1) % 3] in classes:
            bound = min(bound, float(np.hypot(*tri.edge_vector(t, s))))
    if not math.isfinite(bound):
        bound = 2 * tri.max_edge()
    while True:
        found = saddle_connections(tri, bound * (1 + 1e-9), classes)
        if found:
            return found[0][0]
        bound *= 2


def systole(surface: TranslationSurface) -> float:
    """Length of the shortest saddle connection (closed geodesic through the marked point on a torus).

    The search radius is the shortest Delaunay edge between endpoint vertices;
    such an edge is itself a saddle connection, so nothing shorter can lie
    outside the search ball.
    """
    cached = surface.__dict__.get("_systole")
    if cached is not None:
        return cached
    tri = delaunay_triangulate(surface)
    _, classes = _endpoint_classes(tri, surface)
    val = systole_from_triangulation(tri, classes)
    surface.__dict__["_systole"] = val
    return val


# mesh graph ---------------------------------------------------------------

# primitive template vectors with max(|a|, |b|) <= 3, one of each +/- pair
TEMPLATE = [
    (1, 0), (0, 1), (1, 1), (1, -1),
    (2, 1), (1, 2), (2, -1), (1, -2),
    (3, 1), (1, 3), (3, -1), (1, -3),
    (3, 2), (2, 3), (3, -2), (2, -3),
]


def template_stretch(template=TEMPLATE) -> float:
    """Worst ratio of template-path length to straight length: 1/cos(max angular gap / 2)."""
    angs = sorted(
        math.atan2(s * b, s * a) % TWO_PI for a, b in template for s in (1, -1)
    )
    gaps = [(angs[(i + 1) % len(angs)] - angs[i]) % TWO_PI for i in range(len(angs))]
    return 1.0 / math.cos(max(gaps) / 2)


@dataclass
class MeshGraph:
    surface: TranslationSurface
    h: float
    node_face: np.ndarray
    node_xy: np.ndarray
    node_ij: np.ndarray
    graph: csr_matrix
    stretch: float
    face_nodes: list = field(repr=False, default_factory=list)
    face_trees: list = field(repr=False, default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.node_face)

    def nearest_node(self, p: SurfacePoint) -> tuple[int, float]:
        tree = self.face_trees[p.face]
        if tree is None:
            raise MeshTooCoarse(f"face {p.face} has no mesh nodes")
        d, k = tree.query([p.x, p.y])
        return int(self.face_nodes[p.face][k]), float(d)

    def distances_from(self, sources, min_only=False):
        return dijkstra(self.graph, directed=False, indices=sources, min_only=min_only)

    def distance(self, p: SurfacePoint, q: SurfacePoint) -> float:
        a, da = self.nearest_node(p)
        b, db = self.nearest_node(q)
        return float(self.distances_from(a)[b]) + da + db


def _inside_strict(verts: np.ndarray, pts: np.ndarray, tol=1e-12) -> np.ndarray:
    n = len(verts)
    ok = np.ones(len(pts), dtype=bool)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        e = b - a
        ok &= (e[0] * (pts[:, 1] - a[1]) - e[1] * (pts[:, 0] - a[0])) > tol * max(1.0, float(np.hypot(*e)))
    return ok


def _face_tables(verts):
    n = len(verts)
    e = np.roll(verts, -1, axis=0) - verts
    ln = np.hypot(e[:, 0], e[:, 1])
    normal = np.stack([e[:, 1] / ln, -e[:, 0] / ln], axis=1)
    off = np.einsum("ij,ij->i", normal, verts)
    return normal, off


def _exit(normal, off, P, v):
    """Exit parameter (in units of v) and edge index for rays P + s v, vectorized over P."""
    nd = normal @ v
    num = off[None, :] - P @ normal.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(nd[None, :] > 1e-15, num / nd[None, :], np.inf)
    e = np.argmin(t, axis=1)
    return t[np.arange(len(P)), e], e


def build_mesh(surface: TranslationSurface, h: float, systole_value: float | None = None,
               check: bool = True) -> MeshGraph:
    """Sample the surface on a square grid of spacing ``h`` in every face chart.

    Nodes sit at ``((i + 1/2) h, (j + 1/2) h)`` strictly inside faces.  Each
    node connects to the 32 primitive grid offsets with |a|, |b| <= 3; offsets
    that leave the face are carried across the gluing and snapped to the
    nearest node there.  Every graph edge has the length of an actual path on
    the surface, so graph distances never undercut flat distances.
    """
    if check:
        require_valid(surface)
        sysv = systole(surface) if systole_value is None else systole_value
        if not (0 < h < sysv / 4):
            raise MeshTooCoarse(f"mesh spacing h={h} must satisfy 0 < h < systole/4 = {sysv / 4}")
    S = convexified(surface)
    node_face, node_xy, node_ij = [], [], []
    grids = []
    count = 0
    face_nodes = []
    for f, verts in enumerate(S.faces):
        lo = verts.min(axis=0)
        hi = verts.max(axis=0)
        i0 = int(math.ceil(lo[0] / h - 0.5))
        i1 = int(math.floor(hi[0] / h - 0.5))
        j0 = int(math.ceil(lo[1] / h - 0.5))
        j1 = int(math.floor(hi[1] / h - 0.5))
        grid = -np.ones((max(i1 - i0 + 1, 0), max(j1 - j0 + 1, 0)), dtype=np.int64)
        if grid.size:
            I, J = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
            I, J = I.ravel(), J.ravel()
            P = np.stack([(I + 0.5) * h, (J + 0.5) * h], axis=1)
            ok = _inside_strict(verts, P)
            I, J, P = I[ok], J[ok], P[ok]
            ids = np.arange(count, count + len(I))
            grid[I - i0, J - j0] = ids
            count += len(I)
            node_face.append(np.full(len(I), f))
            node_xy.append(P)
            node_ij.append(np.stack([I, J], axis=1))
            face_nodes.append(ids)
        else:
            face_nodes.append(np.zeros(0, dtype=np.int64))
        grids.append((i0, j0, grid))
    if count == 0:
        raise MeshTooCoarse("mesh has no nodes")
    node_face = np.concatenate(node_face)
    node_xy = np.concatenate(node_xy)
    node_ij = np.concatenate(node_ij)
    trees = [cKDTree(node_xy[ids]) if len(ids) else None for ids in face_nodes]
    tables = [_face_tables(v) for v in S.faces]

    rows, cols, wts = [], [], []
    fallback = []
    for f, verts in enumerate(S.faces):
        ids = face_nodes[f]
        if not len(ids):
            continue
        P = node_xy[ids]
        IJ = node_ij[ids]
        i0, j0, grid = grids[f]
        normal, off = tables[f]
        n = len(verts)
        for a, b in TEMPLATE:
            v = np.array([a * h, b * h])
            vlen = float(np.hypot(*v))
            ti = IJ[:, 0] + a - i0
            tj = IJ[:, 1] + b - j0
            inb = (ti >= 0) & (ti < grid.shape[0]) & (tj >= 0) & (tj < grid.shape[1])
            tgt = -np.ones(len(ids), dtype=np.int64)
            tgt[inb] = grid[ti[inb], tj[inb]]
            same = tgt >= 0
            rows.append(ids[same])
            cols.append(tgt[same])
            wts.append(np.full(int(same.sum()), vlen))
            cand = np.nonzero(~same)[0]
            if not len(cand):
                continue
            Pc = P[cand]
            t, e = _exit(normal, off, Pc, v)
            leaves = t < 1 - 1e-12
            cand, Pc, t, e = cand[leaves], Pc[leaves], t[leaves], e[leaves]
            if not len(cand):
                continue
            X = Pc + t[:, None] * v
            A = verts[e]
            B = verts[(e + 1) % n]
            EV = B - A
            u = np.einsum("ij,ij->i", X - A, EV) / np.einsum("ij,ij->i", EV, EV)
            near_corner = (np.minimum(u, 1 - u) * np.hypot(EV[:, 0], EV[:, 1])) < 1e-9
            part = np.array([S.partner[(f, int(k))] for k in e])
            G, K = part[:, 0], part[:, 1]
            for g in np.unique(G):
                sel = np.nonzero((G == g) & ~near_corner)[0]
                if not len(sel):
                    continue
                gv = S.faces[g]
                m = len(gv)
                Ks = K[sel]
                gs, ge = gv[Ks], gv[(Ks + 1) % m]
                Xg = ge + u[sel, None] * (gs - ge)
                R = Xg + (1 - t[sel, None]) * v
                inside = _inside_strict(gv, R)
                out_sel = sel[~inside]
                fallback.extend((f, int(ids[cand[q]]), a, b) for q in out_sel)
                sel, R = sel[inside], R[inside]
                if not len(sel) or trees[g] is None:
                    continue
                dsn, kk = trees[g].query(R)
                tgt_nodes = face_nodes[g][kk]
                # developed straight segment from the node to the snapped node
                W = v[None, :] + (node_xy[tgt_nodes] - R)
                src = ids[cand[sel]]
                tw, ew = _exit_rows(normal, off, P[cand[sel]], W)
                Aw = verts[ew]
                Bw = verts[(ew + 1) % n]
                EVw = Bw - Aw
                Xw = P[cand[sel]] + tw[:, None] * W
                uw = np.einsum("ij,ij->i", Xw - Aw, EVw) / np.einsum("ij,ij->i", EVw, EVw)
                straight = (ew == e[sel]) & (tw > 0) & (tw < 1) & (np.minimum(uw, 1 - uw) * np.hypot(EVw[:, 0], EVw[:, 1]) > 1e-9)
                wlen = np.where(straight, np.hypot(W[:, 0], W[:, 1]), vlen + dsn)
                rows.append(src)
                cols.append(tgt_nodes)
                wts.append(wlen)
            corner_sel = np.nonzero(near_corner)[0]
            fallback.extend((f, int(ids[cand[q]]), a, b) for q in corner_sel)

    for f, nid, a, b in fallback:
        v = (a * h, b * h)
        vlen = math.hypot(*v)
        x, y = node_xy[nid]
        try:
            seg = trace_flow(S, SurfacePoint(f, float(x), float(y)), v, vlen)
        except StartTooClose:
            continue
        if seg.termination != COMPLETED or trees[seg.end.face] is None:
            continue
        d, k = trees[seg.end.face].query([seg.end.x, seg.end.y])
        rows.append(np.array([nid]))
        cols.append(np.array([face_nodes[seg.end.face][k]]))
        wts.append(np.array([vlen + d]))

    r = np.concatenate(rows)
    c = np.concatenate(cols)
    w = np.concatenate(wts)
    keep = r != c
    r, c, w = r[keep], c[keep], w[keep]
    lo_, hi_ = np.minimum(r, c), np.maximum(r, c)
    key = lo_ * count + hi_
    order = np.lexsort((w, key))
    key, w = key[order], w[order]
    first = np.concatenate([[True], key[1:] != key[:-1]])
    key, w = key[first], w[first]
    graph = coo_matrix((np.maximum(w, 1e-300), (key // count, key % count)), shape=(count, count)).tocsr()
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp > 1:
        raise MeshTooCoarse(f"mesh graph at h={h} is disconnected ({ncomp} components)")
    return MeshGraph(S, h, node_face, node_xy, node_ij, graph, template_stretch(), face_nodes, trees)


def _exit_rows(normal, off, P, W):
    """Like :func:`_exit` with one direction per row."""
    nd = W @ normal.T
    num = off[None, :] - P @ normal.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(nd > 1e-15, num / nd, np.inf)
    e = np.argmin(t, axis=1)
    return t[np.arange(len(P)), e], e


def _source_subset(mesh: MeshGraph, max_sources: int) -> np.ndarray:
    """One node per occupied k-by-k block of the grid, k as small as the budget allows."""
    n = mesh.n_nodes
    if n <= max_sources:
        return np.arange(n)
    ij = mesh.node_ij - mesh.node_ij.min(axis=0)
    face = mesh.node_face.astype(np.int64)

    def blocks(k):
        b = ij // k
        w = int(b[:, 1].max()) + 1
        keys = (face * (int(b[:, 0].max()) + 1) + b[:, 0]) * w + b[:, 1]
        return np.unique(keys, return_index=True)[1]

    lo = max(1, int(math.sqrt(n / max_sources)))
    hi = lo
    while len(blocks(hi)) > max_sources:
        lo, hi = hi + 1, 2 * hi
    while lo < hi:
        mid = (lo + hi) // 2
        if len(blocks(mid)) <= max_sources:
            hi = mid
        else:
            lo = mid + 1
    first = blocks(hi)
    if len(first) > max_sources:
        first = blocks(2 * hi)
    return np.sort(first)


def eccentricities(mesh: MeshGraph, sources: np.ndarray, batch: int = 64) -> np.ndarray:
    out = np.empty(len(sources))
    for i in range(0, len(sources), batch):
        d = mesh.distances_from(sources[i:i + batch])
        out[i:i + batch] = d.max(axis=1)
    return out


def diameter(surface: TranslationSurface, h: float, mesh: MeshGraph | None = None,
             max_sources: int | None = None, systole_value: float | None = None) -> Measurement:
    """Largest graph eccentricity over a set of source nodes, with an error bound.

    The bound covers the template stretch, the sampling gap between nodes
    and, when not every node is a source, the graph distance from any node to
    the nearest source.  It is never smaller than ``5 h``.
    """
    if mesh is None:
        mesh = build_mesh(surface, h, systole_value=systole_value)
    n = mesh.n_nodes
    if max_sources is None:
        max_sources = int(max(8, min(400, 6e6 / n)))
    src = _source_subset(mesh, max_sources)
    ecc = eccentricities(mesh, src)
    value = float(ecc.max())
    if not math.isfinite(value):
        raise MeshTooCoarse("mesh graph is disconnected")
    gap = 0.0
    if len(src) < n:
        gap = float(mesh.distances_from(src, min_only=True).max())
    err = max(5 * h, (mesh.stretch - 1) * value + h, gap + h)
    return Measurement(value, err)


@dataclass(frozen=True)
class SurfaceMetrics:
    diameter: float
    diameter_error: float
    systole: float
    systole_error: float
    area: float
    mesh_spacing: float


def surface_metrics(surface: TranslationSurface, h: float | None = None) -> SurfaceMetrics:
    sysv = systole(surface)
    if h is None:
        h = 0.01 * sysv
    d = diameter(surface, h, systole_value=sysv)
    return SurfaceMetrics(d.value, d.error, sysv, TAU_GEOM, surface.area, h)


@dataclass
class DelaunayAudit:
    max_edge: float
    diameter: float
    diameter_error: float
    violations: int

    @property
    def ok(self) -> bool:
        return self.violations == 0


def delaunay_edge_audit(surface: TranslationSurface, h: float | None = None) -> DelaunayAudit:
    """Count Delaunay edges longer than twice the (upper-bounded) diameter."""
    tri = delaunay_triangulate(surface)
    m = surface_metrics(surface, h)
    lengths = tri.edge_lengths()
    bound = 2 * (m.diameter + m.diameter_error)
    return DelaunayAudit(float(lengths.max()), m.diameter, m.diameter_error, int((lengths > bound).sum()))
