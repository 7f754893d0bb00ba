"""Covering radii of flow segments, the superdensity constant and the two lemma checks."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .errors import MeshTooCoarse, NonPositiveC, NonPositiveInput
from .flow import SINGULAR_HIT, TrajectorySegment, trace_flow, unit
from .geometry import Measurement, MeshGraph, build_mesh, systole
from .moduli import DiameterTrack, geodesic_track
from .surface import SurfacePoint, TranslationSurface, convexified, random_surface_point, require_valid

C_MIN = 0.01
C_RATIO = 1.1
C_CAP = 100.0


def c_grid(c_cap: float = C_CAP, c_min: float = C_MIN, ratio: float = C_RATIO) -> np.ndarray:
    """Geometric candidates c_min * ratio^k up to c_cap, with c_cap itself appended."""
    if c_cap < c_min:
        return np.array([c_cap])
    n = int(math.floor(math.log(c_cap / c_min) / math.log(ratio) + 1e-9))
    g = [c_min * ratio**k for k in range(n + 1)]
    if c_cap > g[-1] * (1 + 1e-12):
        g.append(c_cap)
    return np.array(g)


def default_h(T: float, systole_value: float) -> float:
    return min(1.0 / (4.0 * T), systole_value / 5.0)


# ---------------------------------------------------------------- covering

@dataclass
class ChordSamples:
    """Points along a segment, at most ``spacing`` apart, with owning chord and arclength."""

    segment: TrajectorySegment
    faces: np.ndarray
    pts: np.ndarray
    owner: np.ndarray
    arc: np.ndarray
    spacing: float

    @classmethod
    def of(cls, segment: TrajectorySegment, spacing: float) -> "ChordSamples":
        faces = [np.array([segment.start.face])]
        pts = [np.array([[segment.start.x, segment.start.y]])]
        owner, arc = [np.zeros(1, dtype=np.int64)], [np.zeros(1)]
        before = 0.0
        for k, (f, a, b, cum) in enumerate(zip(segment.faces, segment.entries, segment.exits, segment.cum_length)):
            ln = cum - before
            m = max(1, int(math.ceil(ln / spacing)))
            s = np.linspace(0.0, 1.0, m + 1)[:, None]
            pts.append(a + s * (b - a))
            faces.append(np.full(m + 1, f, dtype=np.int64))
            owner.append(np.full(m + 1, k, dtype=np.int64))
            arc.append(before + s[:, 0] * ln)
            before = cum
        faces, pts = np.concatenate(faces), np.concatenate(pts)
        owner, arc = np.concatenate(owner), np.concatenate(arc)
        # a closed orbit retraces its chords; keep the first copy of each sample
        n = len(segment.faces)
        a = segment.entries[owner] if n else pts
        b = segment.exits[owner] if n else pts
        key = np.ascontiguousarray(np.round(np.column_stack([faces, pts, a, b]) * 1e9).astype(np.int64))
        _, first = np.unique(key.view(np.dtype((np.void, key.dtype.itemsize * key.shape[1]))).ravel(),
                             return_index=True)
        first.sort()
        return cls(segment, faces[first], pts[first], owner[first], arc[first], spacing)

    def count(self, length: float) -> int:
        """Number of leading samples inside the prefix of the given length."""
        return int(np.searchsorted(self.arc, length * (1 + 1e-12) + 1e-12, side="right"))

    def chords(self, length: float):
        """Chord faces, entries and exits of the prefix, and its end point."""
        seg = self.segment.prefix(length)
        if len(seg.faces):
            return seg.faces, seg.entries, seg.exits, seg.end
        p = self.segment.start
        ca = np.array([[p.x, p.y]])
        return np.array([p.face]), ca, ca, p


def _point_segment(P, A, B):
    """Distance from P[i] to segment A[i]B[i]."""
    AB = B - A
    L2 = np.einsum("ij,ij->i", AB, AB)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(L2 > 0, np.einsum("ij,ij->i", P - A, AB) / L2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    Q = A + t[:, None] * AB
    return np.hypot(*(P - Q).T), Q


class _Coverer:
    """Distances to a chord set on a fixed mesh, read off an evaluation lattice.

    Seed distances are exact distances to nearby chords in the point's own
    face or in a face glued to it, along a straight segment crossing at most
    that one edge.  Multi-source shortest paths on the mesh graph carry them
    farther.  The covering radius is the maximum over a lattice of spacing
    ``h / refine`` in every face, each lattice point taking the smaller of its
    own seed distance and the best relay through one of its nearest nodes.
    """

    def __init__(self, mesh: MeshGraph, k: int = 2, reach: float | None = None, refine: int = 2,
                 relays: int = 4):
        self.mesh = mesh
        self.k = k
        self.reach = 8 * mesh.h if reach is None else reach
        g = mesh.graph.tocoo()
        self.rows, self.cols, self.data = g.row, g.col, g.data
        self.n = mesh.n_nodes
        S = mesh.surface
        self.shifts, self.normals, self.lattice, self.relay = [], [], [], []
        step = mesh.h / refine
        # translations t(f, e) as a table
        self.trans = {(f, e): S.translation(f, e) for f, v in enumerate(S.faces) for e in range(len(v))}
        for f, v in enumerate(S.faces):
            # (face, crossed edges, shift from its chart to chart f)
            nb = [(f, (), np.zeros(2))]
            for e in range(len(v)):
                g1, k1 = S.partner[(f, e)]
                t1 = S.translation(f, e)
                nb.append((g1, ((f, e),), t1))
                for e2 in range(len(S.faces[g1])):
                    if e2 == k1:
                        continue
                    g2, _ = S.partner[(g1, e2)]
                    nb.append((g2, ((f, e), (g1, e2)), t1 + S.translation(g1, e2)))
            self.shifts.append(nb)
            ev = np.roll(v, -1, axis=0) - v
            ln = np.hypot(ev[:, 0], ev[:, 1])
            nor = np.stack([ev[:, 1] / ln, -ev[:, 0] / ln], axis=1)
            off = np.einsum("ij,ij->i", nor, v)
            self.normals.append((nor, off))
            lo, hi = v.min(axis=0), v.max(axis=0)
            i = np.arange(math.ceil(lo[0] / step - 0.5), math.floor(hi[0] / step - 0.5) + 1)
            j = np.arange(math.ceil(lo[1] / step - 0.5), math.floor(hi[1] / step - 0.5) + 1)
            X, Y = np.meshgrid((i + 0.5) * step, (j + 0.5) * step, indexing="ij")
            E = np.column_stack([X.ravel(), Y.ravel()])
            E = E[np.all(E @ nor.T - off[None, :] < 0, axis=1)]
            self.lattice.append(E)
            nodes = mesh.face_nodes[f]
            if nodes is None or len(nodes) == 0 or len(E) == 0:
                self.relay.append(None)
                continue
            r = min(relays, len(nodes))
            dd, kk = mesh.face_trees[f].query(E, k=r)
            self.relay.append((np.asarray(nodes)[kk.reshape(len(E), r)], dd.reshape(len(E), r)))

    def _exit_edge(self, f: int, P: np.ndarray, Q: np.ndarray):
        nor, off = self.normals[f]
        nd = (Q - P) @ nor.T
        num = off[None, :] - P @ nor.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(nd > 1e-15, num / nd, np.inf)
        e = np.argmin(t, axis=1)
        return e, t[np.arange(len(P)), e]

    def _valid(self, chain, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """Whether the straight segment P -> Q (chart of the first face) crosses exactly ``chain``."""
        ok = np.ones(len(P), dtype=bool)
        P = P.copy()
        Q = Q.copy()
        for face, edge in chain:
            xe, xt = self._exit_edge(face, P, Q)
            ok &= (xe == edge) & (xt <= 1 + 1e-12)
            P = P + np.clip(xt, 0.0, 1.0)[:, None] * (Q - P)
            t = self.trans[(face, edge)]
            P = P + t
            Q = Q + t
        return ok

    def _seeds(self, f: int, X: np.ndarray, cand, ca, cb) -> np.ndarray:
        devs = self.shifts[f]
        nor, off = self.normals[f]
        best = np.full(len(X), np.inf)
        for m, tree, own in cand:
            chain, sh = devs[m][1], devs[m][2]
            if chain:
                e0 = chain[0][1]
                rows = np.nonzero(off[e0] - X @ nor[e0] <= self.reach)[0]
            else:
                rows = np.arange(len(X))
            if len(rows) == 0:
                continue
            Xs = X[rows]
            k = min(self.k, tree.n)
            _, nn = tree.query(Xs, k=k)
            nn = nn.reshape(len(Xs), k)
            for j in range(k):
                ch = own[nn[:, j]]
                d, Q = _point_segment(Xs, ca[ch] - sh, cb[ch] - sh)
                if chain:
                    d = np.where(self._valid(chain, Xs, Q), d, np.inf)
                best[rows] = np.minimum(best[rows], d)
        return best

    def _prepare(self, samples: ChordSamples):
        """Per face and development, the sample indices that can matter, in arc order."""
        cached = samples.__dict__.get("_prep")
        if cached is not None and cached[0] is self:
            return cached[1]
        by_face = {int(f): np.nonzero(samples.faces == f)[0] for f in np.unique(samples.faces)}
        prep = []
        for f, devs in enumerate(self.shifts):
            nor, off = self.normals[f]
            rows = []
            for m, (g, chain, t) in enumerate(devs):
                idx = by_face.get(g)
                if idx is None:
                    continue
                if chain:
                    P = samples.pts[idx] - t
                    idx = idx[np.max(P @ nor.T - off[None, :], axis=1) <= self.reach]
                if len(idx):
                    rows.append((m, idx))
            prep.append(rows)
        samples.__dict__["_prep"] = (self, prep)
        return prep

    def _candidates(self, f: int, prep, samples: ChordSamples, n_keep: int, end, end_owner: int):
        """Sample trees, one per development of a neighbouring face into chart f."""
        nor, off = self.normals[f]
        out = []
        rows = dict(prep[f])
        for m, (g, chain, t) in enumerate(self.shifts[f]):
            P = np.zeros((0, 2))
            own = np.zeros(0, dtype=np.int64)
            idx = rows.get(m)
            if idx is not None:
                idx = idx[: np.searchsorted(idx, n_keep)]
                P, own = samples.pts[idx] - t, samples.owner[idx]
            if end.face == g:
                q = np.array([end.x, end.y]) - t
                if not chain or np.max(nor @ q - off) <= self.reach:
                    P = np.vstack([P, q])
                    own = np.append(own, end_owner)
            if len(P):
                out.append((m, cKDTree(P), own))
        return out or None

    def distances(self, samples: ChordSamples, length: float):
        """(node distances, per-face lattice distances) for the prefix of the given length."""
        prep = self._prepare(samples)
        n_keep = samples.count(length)
        cf, ca, cb, end = samples.chords(length)
        d0 = np.full(self.n, np.inf)
        lat_seed = []
        for f in range(len(self.shifts)):
            cand = self._candidates(f, prep, samples, n_keep, end, len(cf) - 1)
            E = self.lattice[f]
            if cand is None:
                lat_seed.append(np.full(len(E), np.inf))
                continue
            nodes = self.mesh.face_nodes[f]
            if nodes is not None and len(nodes):
                d0[nodes] = self._seeds(f, self.mesh.node_xy[nodes], cand, ca, cb)
            lat_seed.append(self._seeds(f, E, cand, ca, cb) if len(E) else np.zeros(0))
        hit = np.nonzero(np.isfinite(d0))[0]
        if len(hit) == 0:
            raise MeshTooCoarse("segment does not pass near any mesh node")
        n = self.n
        rows = np.concatenate([self.rows, np.full(len(hit), n)])
        cols = np.concatenate([self.cols, hit])
        # explicit zeros would read as missing edges
        data = np.concatenate([self.data, np.maximum(d0[hit], 1e-300)])
        g = coo_matrix((data, (rows, cols)), shape=(n + 1, n + 1)).tocsr()
        dist = dijkstra(g, directed=False, indices=n)[:n]
        lat = []
        for f, seed in enumerate(lat_seed):
            rel = self.relay[f]
            if rel is not None:
                nodes, dd = rel
                seed = np.minimum(seed, (dist[nodes] + dd).min(axis=1))
            lat.append(seed)
        return dist, lat

    def radius(self, samples: ChordSamples, length: float) -> float:
        dist, lat = self.distances(samples, length)
        vals = [v[np.isfinite(v)].max() for v in lat if np.isfinite(v).any()]
        if not vals:
            return float(dist.max())
        return float(max(vals))

    def error(self, r: float) -> float:
        h = self.mesh.h
        return max(5 * h, (self.mesh.stretch - 1) * r + h)


def covering_radius(surface: TranslationSurface, segment: TrajectorySegment, h: float,
                    mesh: MeshGraph | None = None) -> Measurement:
    """Largest distance from the surface to the segment, with an error bound.

    The segment must live on ``convexified(surface)``, which is the surface
    itself whenever all faces are convex.
    """
    if mesh is None:
        mesh = build_mesh(surface, h)
    cov = _Coverer(mesh)
    s = ChordSamples.of(segment, h / 2)
    r = cov.radius(s, segment.total_length)
    return Measurement(r, cov.error(r))


# ---------------------------------------------------------------- scan

@dataclass
class DensityProfile:
    direction: tuple[float, float]
    horizons: list[float]
    c_hat: dict[float, float]
    c_cap: float
    starts: dict[float, list[SurfacePoint]]
    h: dict[float, float]
    radius_at_chat: dict[float, float] = field(default_factory=dict)
    singular_hits: dict[float, int] = field(default_factory=dict)
    grid: np.ndarray = field(default=None, repr=False)

    def capped(self, T: float) -> bool:
        return not math.isfinite(self.c_hat[T])

    @property
    def all_finite(self) -> bool:
        return all(not self.capped(T) for T in self.horizons)

    @property
    def finite_values(self) -> list[float]:
        return [self.c_hat[T] for T in self.horizons if not self.capped(T)]

    @property
    def max_over_median(self) -> float:
        v = self.finite_values
        return max(v) / float(np.median(v)) if v else math.inf

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("T,c_hat,capped,radius_at_chat,starts_tested,h\n")
        for T in self.horizons:
            c = self.c_hat[T]
            cs = "inf" if not math.isfinite(c) else f"{c:.17g}"
            r = self.radius_at_chat.get(T, math.nan)
            rs = "nan" if not math.isfinite(r) else f"{r:.17g}"
            buf.write(f"{T:.17g},{cs},{str(self.capped(T)).lower()},{rs},{len(self.starts[T])},{self.h[T]:.17g}\n")
        return buf.getvalue()

    def to_json_dict(self) -> dict:
        return {str(T): (self.c_hat[T] if not self.capped(T) else None) for T in self.horizons}


POSITIVE = "superdense_evidence"
NEGATIVE = "not_superdense_evidence"


def density_verdict(profile: DensityProfile, spread: float = 1.5) -> str:
    """Positive when every horizon gives a finite, stable constant; negative when the largest horizon caps."""
    if profile.all_finite and profile.max_over_median <= spread:
        return POSITIVE
    if profile.capped(profile.horizons[-1]):
        return NEGATIVE
    return "inconclusive"


def default_starts(surface: TranslationSurface, rng: np.random.Generator, n_random: int = 5) -> list[SurfacePoint]:
    """``n_random`` area-uniform points plus two fixed points inside face 0."""
    v = surface.faces[0]
    cen = v.mean(axis=0)
    off = v[0] + 0.25 * (v[1] - v[0]) + 0.25 * (v[-1] - v[0])
    pts = [random_surface_point(surface, rng) for _ in range(n_random)]
    return pts + [SurfacePoint(0, float(cen[0]), float(cen[1])), SurfacePoint(0, float(off[0]), float(off[1]))]


def _least_c(cov: _Coverer, samples: ChordSamples, reach: float, T: float, grid: np.ndarray):
    """Index of the least grid value whose prefix covers to 1/T, or None.

    Prefixes are nested sample sets, so the radius is non-increasing in c
    and bisection finds the same index a linear scan would.
    """
    target = 1.0 / T
    cache: dict[int, float] = {}

    def ok(k: int) -> bool:
        L = grid[k] * T
        if L > reach * (1 + 1e-12):
            return False
        if k not in cache:
            cache[k] = cov.radius(samples, L)
        return cache[k] <= target

    hi = len(grid) - 1
    while hi >= 0 and grid[hi] * T > reach * (1 + 1e-12):
        hi -= 1
    if hi < 0 or not ok(hi):
        return None, math.nan
    lo = -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi, cache[hi]


def superdensity_scan(surface: TranslationSurface, direction, T_list, starts=None, c_cap: float = C_CAP,
                      h_policy=None, seed: int = 0, n_random: int = 5) -> DensityProfile:
    """Estimate the least c on the grid with every start's length-cT segment 1/T-dense.

    ``h_policy`` is a number, a callable ``T -> h`` or None for
    ``min(1/(4T), systole/5)``.  A start whose trace hits a cone point before
    length ``c_cap * T`` is replaced once by a fresh random point; if the
    replacement also stops early, only prefixes that fit are tested.
    """
    require_valid(surface)
    T_list = [float(T) for T in T_list]
    if not T_list or any(T <= 0 for T in T_list) or any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be positive and increasing")
    S = convexified(surface)
    d = unit(direction)
    rng = np.random.default_rng(seed)
    sysv = systole(S)
    grid = c_grid(c_cap)
    if starts is None:
        starts = default_starts(S, rng, n_random)
    starts = list(starts)

    prof = DensityProfile(d, T_list, {}, c_cap, {}, {}, grid=grid)
    for T in T_list:
        if h_policy is None:
            h = default_h(T, sysv)
        elif callable(h_policy):
            h = float(h_policy(T))
        else:
            h = float(h_policy)
        mesh = build_mesh(S, h, systole_value=sysv)
        cov = _Coverer(mesh)
        worst, worst_r, used, hits = -1, math.nan, [], 0
        for p in starts:
            seg = trace_flow(S, p, d, c_cap * T)
            if seg.termination == SINGULAR_HIT:
                hits += 1
                p = random_surface_point(S, rng)
                seg = trace_flow(S, p, d, c_cap * T)
                hits += seg.termination == SINGULAR_HIT
            used.append(p)
            k, r = _least_c(cov, ChordSamples.of(seg, h / 2), seg.total_length, T, grid)
            if k is None:
                worst = None
                break
            if k > worst:
                worst, worst_r = k, r
            elif k == worst:
                worst_r = max(worst_r, r)
        prof.h[T] = h
        prof.starts[T] = used
        prof.singular_hits[T] = hits
        if worst is None:
            prof.c_hat[T] = math.inf
            prof.radius_at_chat[T] = math.nan
        else:
            prof.c_hat[T] = float(grid[worst])
            prof.radius_at_chat[T] = worst_r
    return prof


# ---------------------------------------------------------------- lemmas

@dataclass(frozen=True)
class ForwardBudget:
    D: float
    eps: float
    N: float
    c: float


@dataclass(frozen=True)
class BackwardBudget:
    c: float
    T: float
    t_tilde: float
    D: float
    D_prime: float
    bound: float


@dataclass(frozen=True)
class LemmaBudget:
    forward: ForwardBudget | None = None
    backward: BackwardBudget | None = None


def forward_budget(D: float, T: float, eps: float = 0.0) -> ForwardBudget:
    return ForwardBudget(D, eps, D * T, 2 * D * D)


def lemma_backward_bound(c: float) -> float:
    if not (c > 0) or not math.isfinite(c):
        raise NonPositiveC(f"c must be a positive number, got {c}")
    return max(4 * c, c + 2)


def backward_diameter_candidates(c: float, T: float, t_tilde: float) -> tuple[float, float]:
    """The two diameter bounds sqrt((cT/t)^2 + (2t/T)^2) and cT/t + 2/(T t)."""
    for name, v in (("c", c), ("T", T), ("t_tilde", t_tilde)):
        if not (v > 0) or not math.isfinite(v):
            raise NonPositiveInput(f"{name} must be positive, got {v}")
    D = math.hypot(c * T / t_tilde, 2 * t_tilde / T)
    Dp = c * T / t_tilde + 2 / (T * t_tilde)
    return D, Dp


def backward_budget(c: float, t_tilde: float, T: float | None = None) -> BackwardBudget:
    """Budget at the scale T = sqrt(2) t / sqrt(c) unless T is given."""
    if T is None:
        if not (c > 0):
            raise NonPositiveC(f"c must be a positive number, got {c}")
        T = math.sqrt(2) * t_tilde / math.sqrt(c)
    D, Dp = backward_diameter_candidates(c, T, t_tilde)
    return BackwardBudget(c, T, t_tilde, D, Dp, lemma_backward_bound(c))


@dataclass
class ForwardReport:
    T: float
    D_max: float
    length: float
    radius: float
    error: float
    threshold: float
    passed: bool | None
    truncated: bool
    h: float
    budget: LemmaBudget

    def to_json_dict(self) -> dict:
        return {"T": self.T, "D_max": self.D_max, "c": self.budget.forward.c, "length": self.length,
                "radius": self.radius, "error": self.error, "threshold": self.threshold,
                "passed": self.passed, "truncated": self.truncated, "h": self.h}


def lemma_forward_verify(surface: TranslationSurface, direction, T: float, D_max: float,
                         h: float | None = None, start: SurfacePoint | None = None) -> ForwardReport:
    """Trace length 2 D_max^2 T and check the covering radius against 1/T + 5h.

    A trace cut short by a cone point is reported with ``truncated`` set and
    ``passed`` left as None.
    """
    if not (T > 0):
        raise NonPositiveInput(f"T must be positive, got {T}")
    S = convexified(surface)
    sysv = systole(S)
    if h is None:
        h = default_h(T, sysv)
    bud = forward_budget(D_max, T)
    L = bud.c * T
    if start is None:
        start = default_starts(S, np.random.default_rng(0), 0)[0]
    seg = trace_flow(S, start, direction, L)
    m = covering_radius(S, seg, h)
    thr = 1.0 / T + 5 * h
    truncated = seg.termination == SINGULAR_HIT
    passed = None if truncated else bool(m.value <= thr)
    return ForwardReport(T, D_max, seg.total_length, m.value, m.error, thr, passed, truncated, h, LemmaBudget(forward=bud))


@dataclass(frozen=True)
class BackwardSample:
    t: float
    diameter: float
    error: float
    passed: bool


@dataclass
class BackwardReport:
    c: float
    bound: float
    samples: list[BackwardSample]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.samples)

    @property
    def violations(self) -> list[BackwardSample]:
        return [s for s in self.samples if not s.passed]

    def to_json_dict(self) -> dict:
        return {"c": self.c, "bound": self.bound, "passed": self.passed,
                "violations": [s.t for s in self.violations]}


def check_track_against_bound(track: DiameterTrack, c: float) -> BackwardReport:
    bound = lemma_backward_bound(c)
    out = [BackwardSample(s.t, s.diameter, s.diameter_err, s.diameter <= bound + s.diameter_err)
           for s in track.samples]
    return BackwardReport(c, bound, out)


def empirical_backward_check(surface: TranslationSurface, direction, profile: DensityProfile,
                             t_max: float = 5.0, dt: float = 0.25, track: DiameterTrack | None = None) -> BackwardReport:
    """Every sampled diameter along g_t must respect max{4c, c+2} with c the largest finite estimate."""
    vals = profile.finite_values
    if not vals:
        raise ValueError("profile has no finite superdensity estimate")
    if track is None:
        track = geodesic_track(surface, direction, t_max, dt)
    return check_track_against_bound(track, max(vals))
