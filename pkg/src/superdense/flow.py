"""Straight-line flow on a translation surface.

Each chord is computed in the chart of the face it lies in.  When the line
leaves a face through an edge, the exit point is re-expressed on the partner
edge by its edge parameter, so only one rounding happens per crossing and the
trace does not drift over long runs.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidSurface, IrrationalSlope, NonTermination, StartTooClose
from .surface import TAU_GEOM, TWO_PI, SurfacePoint, TranslationSurface

EPS_SING = 1e-9
MAX_CHORDS = 10**7
_CORNER_TOL = 1e-9
_PARALLEL_TOL = 1e-13

COMPLETED = "completed"
SINGULAR_HIT = "singular_hit"


def unit(v) -> tuple[float, float]:
    x, y = float(v[0]), float(v[1])
    n = math.hypot(x, y)
    if n == 0 or not math.isfinite(n):
        raise ValueError("direction must be a finite nonzero vector")
    return (x / n, y / n)


def direction_from_slope(slope) -> tuple[float, float]:
    """Unit vector with dy/dx equal to ``slope``; ``math.inf`` gives vertical."""
    if isinstance(slope, Fraction):
        return unit((slope.denominator, slope.numerator))
    s = float(slope)
    if math.isinf(s):
        return (0.0, 1.0)
    return unit((1.0, s))


@dataclass
class TrajectorySegment:
    start: SurfacePoint
    direction: tuple[float, float]
    faces: np.ndarray
    entries: np.ndarray
    exits: np.ndarray
    total_length: float
    termination: str
    end: SurfacePoint
    cum_length: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.cum_length is None:
            lengths = np.hypot(*(self.exits - self.entries).T) if len(self.faces) else np.zeros(0)
            self.cum_length = np.cumsum(lengths)

    @property
    def chords(self) -> list[tuple[int, tuple[float, float], tuple[float, float]]]:
        return [
            (int(f), (float(a[0]), float(a[1])), (float(b[0]), float(b[1])))
            for f, a, b in zip(self.faces, self.entries, self.exits)
        ]

    def __len__(self):
        return len(self.faces)

    def prefix(self, length: float) -> "TrajectorySegment":
        """The initial piece of the given length (or the whole segment if shorter)."""
        if length >= self.total_length or (len(self.cum_length) and length >= self.cum_length[-1]):
            return self
        if length <= 0:
            return TrajectorySegment(self.start, self.direction, self.faces[:0], self.entries[:0],
                                     self.exits[:0], 0.0, COMPLETED, self.start, self.cum_length[:0])
        k = int(np.searchsorted(self.cum_length, length, side="left"))
        before = self.cum_length[k - 1] if k > 0 else 0.0
        d = np.array(self.direction)
        last = self.entries[k] + (length - before) * d
        exits = self.exits[: k + 1].copy()
        exits[k] = last
        cum = self.cum_length[: k + 1].copy()
        cum[k] = length
        end = SurfacePoint(int(self.faces[k]), float(last[0]), float(last[1]))
        return TrajectorySegment(self.start, self.direction, self.faces[: k + 1], self.entries[: k + 1],
                                 exits, float(length), COMPLETED, end, cum)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("face,entry_x,entry_y,exit_x,exit_y,cum_length\n")
        for f, a, b, c in zip(self.faces, self.entries, self.exits, self.cum_length):
            buf.write(f"{int(f)},{a[0]:.17g},{a[1]:.17g},{b[0]:.17g},{b[1]:.17g},{c:.17g}\n")
        return buf.getvalue()


class _FlowData:
    """Per-face lookup tables in plain Python floats for the tracing loop."""

    def __init__(self, surface: TranslationSurface):
        if not surface.convex:
            raise InvalidSurface("the flow tracer needs convex faces; apply surface.convexified() first")
        self.verts = []
        self.normals = []
        self.offsets = []
        self.cones = []
        for f, v in enumerate(surface.faces):
            vs = [(float(x), float(y)) for x, y in v]
            n = len(vs)
            nor, off = [], []
            for i in range(n):
                ax, ay = vs[i]
                bx, by = vs[(i + 1) % n]
                ex, ey = bx - ax, by - ay
                ln = math.hypot(ex, ey)
                nx, ny = ey / ln, -ex / ln
                nor.append((nx, ny))
                off.append(nx * ax + ny * ay)
            self.verts.append(vs)
            self.normals.append(nor)
            self.offsets.append(off)
            self.cones.append([j for j in range(n) if surface.is_cone_corner(f, j)])
        self.partner = surface.partner
        self.corner_class = surface.corner_class
        self.singular = surface.singular_classes
        self.sectors: dict[int, list[tuple[int, int, float, float]]] = {}
        for f, v in enumerate(self.verts):
            n = len(v)
            for j in range(n):
                c = self.corner_class[f][j]
                ox, oy = v[j]
                ux, uy = v[(j + 1) % n]
                wx, wy = v[(j - 1) % n]
                a_out = math.atan2(uy - oy, ux - ox)
                a_in = math.atan2(wy - oy, wx - ox)
                self.sectors.setdefault(c, []).append((f, j, a_out, (a_in - a_out) % TWO_PI))

    def continue_through(self, cls: int, dx: float, dy: float) -> tuple[int, int]:
        """Corner whose sector contains the direction, at a regular vertex class."""
        theta = math.atan2(dy, dx)
        best, best_bad = None, math.inf
        for f, j, a_out, width in self.sectors[cls]:
            rel = (theta - a_out) % TWO_PI
            if rel > TWO_PI - 1e-12:
                rel = 0.0
            bad = 0.0 if rel < width - 1e-12 else min(rel - width + 1e-12, TWO_PI - rel)
            if bad < best_bad:
                best, best_bad = (f, j), bad
        return best


def _flow_data(surface: TranslationSurface) -> _FlowData:
    fd = surface.__dict__.get("_flow_data")
    if fd is None:
        fd = _FlowData(surface)
        surface.__dict__["_flow_data"] = fd
    return fd


def trace_flow(
    surface: TranslationSurface,
    start: SurfacePoint,
    direction,
    length: float,
    eps_sing: float = EPS_SING,
    max_chords: int = MAX_CHORDS,
) -> TrajectorySegment:
    """Follow the straight line from ``start`` in ``direction`` for ``length``.

    Stops early (termination ``"singular_hit"``) when the line passes within
    ``eps_sing`` of a cone point.  Regular vertices, including the marked
    point of a torus, are passed straight through.
    """
    if length < 0:
        raise ValueError("length must be non-negative")
    fd = _flow_data(surface)
    dx, dy = unit(direction)
    f = int(start.face)
    px, py = float(start.x), float(start.y)

    for j in fd.cones[f]:
        wx, wy = fd.verts[f][j]
        if math.hypot(px - wx, py - wy) < max(eps_sing, _CORNER_TOL):
            raise StartTooClose(f"start {tuple(start)} is within {eps_sing} of a cone point")
    for j, (wx, wy) in enumerate(fd.verts[f]):
        if math.hypot(px - wx, py - wy) < _CORNER_TOL:
            f, j = fd.continue_through(fd.corner_class[f][j], dx, dy)
            px, py = fd.verts[f][j]
            break

    faces: list[int] = []
    ent: list[tuple[float, float]] = []
    ext: list[tuple[float, float]] = []
    total = 0.0
    rem = float(length)
    termination = COMPLETED
    steps = 0
    while True:
        steps += 1
        if steps > max_chords:
            raise NonTermination(f"trace exceeded {max_chords} chords")
        verts = fd.verts[f]
        nor = fd.normals[f]
        off = fd.offsets[f]
        best_t, best_i = math.inf, -1
        for i in range(len(verts)):
            nx, ny = nor[i]
            nd = nx * dx + ny * dy
            if nd > _PARALLEL_TOL:
                t = (off[i] - (nx * px + ny * py)) / nd
                if t < best_t:
                    best_t, best_i = t, i
        if best_i < 0:
            raise InvalidSurface(f"face {f} is unbounded in the flow direction")
        if best_t < 0:
            best_t = 0.0
        step = min(best_t, rem)

        hit = math.inf
        for j in fd.cones[f]:
            wx, wy = verts[j]
            s = (wx - px) * dx + (wy - py) * dy
            s = min(max(s, 0.0), step)
            cx, cy = px + s * dx - wx, py + s * dy - wy
            if cx * cx + cy * cy < eps_sing * eps_sing and s < hit:
                hit = s
        if hit < math.inf:
            if hit > 0:
                faces.append(f)
                ent.append((px, py))
                ext.append((px + hit * dx, py + hit * dy))
            total += hit
            px, py = px + hit * dx, py + hit * dy
            termination = SINGULAR_HIT
            break

        qx, qy = px + step * dx, py + step * dy
        if step > 0:
            faces.append(f)
            ent.append((px, py))
            ext.append((qx, qy))
        total += step
        if best_t >= rem:
            px, py = qx, qy
            break
        rem -= step

        n = len(verts)
        corner = -1
        for j in (best_i, (best_i + 1) % n):
            wx, wy = verts[j]
            if math.hypot(qx - wx, qy - wy) < _CORNER_TOL:
                corner = j
                break
        if corner >= 0:
            cls = fd.corner_class[f][corner]
            if cls in fd.singular:
                termination = SINGULAR_HIT
                px, py = verts[corner]
                break
            f, j = fd.continue_through(cls, dx, dy)
            px, py = fd.verts[f][j]
            continue

        ax, ay = verts[best_i]
        bx, by = verts[(best_i + 1) % n]
        ex, ey = bx - ax, by - ay
        u = ((qx - ax) * ex + (qy - ay) * ey) / (ex * ex + ey * ey)
        g, k = fd.partner[(f, best_i)]
        gv = fd.verts[g]
        sx, sy = gv[k]
        tx, ty = gv[(k + 1) % len(gv)]
        px, py = tx + u * (sx - tx), ty + u * (sy - ty)
        f = g

    if faces:
        fa = np.array(faces, dtype=np.int64)
        ea = np.array(ent, dtype=float)
        xa = np.array(ext, dtype=float)
    else:
        fa = np.zeros(0, dtype=np.int64)
        ea = np.zeros((0, 2))
        xa = np.zeros((0, 2))
    return TrajectorySegment(SurfacePoint(int(start.face), float(start.x), float(start.y)), (dx, dy),
                             fa, ea, xa, total, termination, SurfacePoint(f, px, py))


def rational_slope(slope, max_den: int = 10**6) -> Fraction:
    if isinstance(slope, Fraction):
        return slope
    if isinstance(slope, int):
        return Fraction(slope)
    x = float(slope)
    if not math.isfinite(x):
        raise IrrationalSlope("slope is not finite")
    fr = Fraction(x).limit_denominator(max_den)
    if abs(float(fr) - x) > 1e-12 * max(1.0, abs(x)):
        raise IrrationalSlope(f"slope {x!r} is not rational with denominator <= {max_den}")
    return fr


def closed_orbit_length(surface: TranslationSurface, slope) -> float:
    """Period of the closed orbits of rational slope p/q on the unit square torus."""
    v = surface.faces[0] if len(surface.faces) == 1 else None
    if v is None or len(v) != 4 or not np.allclose(v - v[0], [[0, 0], [1, 0], [1, 1], [0, 1]], atol=TAU_GEOM):
        raise InvalidSurface("closed_orbit_length expects the unit square torus")
    fr = rational_slope(slope)
    p, q = fr.numerator, fr.denominator
    return math.hypot(p, q)


def concatenate(a: TrajectorySegment, b: TrajectorySegment) -> TrajectorySegment:
    cum = np.concatenate([a.cum_length, a.total_length + b.cum_length])
    return TrajectorySegment(a.start, a.direction, np.concatenate([a.faces, b.faces]),
                             np.concatenate([a.entries, b.entries]), np.concatenate([a.exits, b.exits]),
                             a.total_length + b.total_length, b.termination, b.end, cum)


def chord_points(segment: TrajectorySegment, spacing: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample points along every chord at most ``spacing`` apart (endpoints included).

    Returns (faces, points, chord index).
    """
    faces, pts, owner = [], [], []
    for k, (f, a, b) in enumerate(zip(segment.faces, segment.entries, segment.exits)):
        ln = math.hypot(b[0] - a[0], b[1] - a[1])
        m = max(1, int(math.ceil(ln / spacing)))
        s = np.linspace(0.0, 1.0, m + 1)[:, None]
        pts.append(a + s * (b - a))
        faces.append(np.full(m + 1, f, dtype=np.int64))
        owner.append(np.full(m + 1, k, dtype=np.int64))
    if not pts:
        p = segment.start
        return np.array([p.face]), np.array([[p.x, p.y]]), np.array([-1])
    return np.concatenate(faces), np.concatenate(pts), np.concatenate(owner)


def trace_many(surface, starts: Sequence[SurfacePoint], direction, length, eps_sing=EPS_SING):
    return [trace_flow(surface, s, direction, length, eps_sing) for s in starts]
