"""Translation surfaces as finite sets of planar polygons glued by translations.

A surface is a list of counterclockwise polygons (one chart per polygon) and a
list of gluings.  Edge ``i`` of a face runs from vertex ``i`` to vertex
``i + 1``; two glued edges must be parallel with opposite orientation and
equal length, so a pure translation carries one onto the other.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateBasis,
    DisconnectedSurface,
    InvalidSurface,
    ParseError,
    UnsupportedTable,
)

TAU_GEOM = 1e-9
TAU_ANGLE = 1e-9
TWO_PI = 2.0 * math.pi


class SurfacePoint(NamedTuple):
    face: int
    x: float
    y: float

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class EdgeGluing:
    fa: int
    ea: int
    fb: int
    eb: int


@dataclass(frozen=True)
class ConePoint:
    vertex_class: int
    total_angle: float
    order: int

    @property
    def is_singular(self) -> bool:
        return self.order > 0


@dataclass(frozen=True)
class StratumSignature:
    kappa: tuple[int, ...]

    def __str__(self):
        return "H(" + ", ".join(str(k) for k in self.kappa) + ")"


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]

    def __bool__(self):
        return self.ok


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def corner_angle(vertices: np.ndarray, j: int) -> float:
    """Interior angle at vertex ``j`` of a counterclockwise polygon, in (0, 2pi)."""
    n = len(vertices)
    out = vertices[(j + 1) % n] - vertices[j]
    back = vertices[(j - 1) % n] - vertices[j]
    ang = math.atan2(out[0] * back[1] - out[1] * back[0], out[0] * back[0] + out[1] * back[1])
    return ang % TWO_PI


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = _cross(p2 - p1, q1 - p1)
    d2 = _cross(p2 - p1, q2 - p1)
    d3 = _cross(q2 - q1, p1 - q1)
    d4 = _cross(q2 - q1, p2 - q1)
    return d1 * d2 < 0 and d3 * d4 < 0


def is_simple(vertices: np.ndarray) -> bool:
    n = len(vertices)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]):
                return False
    return True


def is_convex(vertices: np.ndarray, tol: float = TAU_GEOM) -> bool:
    n = len(vertices)
    for j in range(n):
        a, b, c = vertices[j - 1], vertices[j], vertices[(j + 1) % n]
        if _cross(b - a, c - b) < -tol:
            return False
    return True


def corner_classes(face_sizes: Sequence[int], partner: dict) -> list[list[int]]:
    """Group polygon corners into vertex classes.

    ``partner`` maps ``(face, edge)`` to ``(face, edge)``.  Returns, per face,
    the class id of each corner (corner ``j`` is the start of edge ``j``).
    Class ids are numbered in order of first appearance.
    """
    offsets = np.concatenate([[0], np.cumsum(face_sizes)]).astype(int)
    uf = _UnionFind(int(offsets[-1]))
    for (f, i), (g, k) in partner.items():
        nf, ng = face_sizes[f], face_sizes[g]
        uf.union(offsets[f] + i, offsets[g] + (k + 1) % ng)
        uf.union(offsets[f] + (i + 1) % nf, offsets[g] + k)
    relabel: dict[int, int] = {}
    out = []
    for f, n in enumerate(face_sizes):
        row = []
        for j in range(n):
            root = uf.find(offsets[f] + j)
            row.append(relabel.setdefault(root, len(relabel)))
        out.append(row)
    return out


class TranslationSurface:
    """Polygons with translation gluings.

    Construction never fails on geometric grounds so that broken inputs can be
    passed to :func:`validate`; derived data (vertex classes, cone points) is
    computed lazily and assumes a valid surface.
    """

    def __init__(self, faces, gluings, marked=(), name=""):
        arrs = []
        for f in faces:
            a = np.array(f, dtype=float).reshape(-1, 2)
            a.setflags(write=False)
            arrs.append(a)
        self.faces: tuple[np.ndarray, ...] = tuple(arrs)
        self.gluings: tuple[EdgeGluing, ...] = tuple(
            g if isinstance(g, EdgeGluing) else EdgeGluing(*g) for g in gluings
        )
        self.marked: tuple[SurfacePoint, ...] = tuple(SurfacePoint(int(m[0]), float(m[1]), float(m[2])) for m in marked)
        self.name = name

    def __repr__(self):
        return f"TranslationSurface({self.name or '?'}: {len(self.faces)} faces, {len(self.gluings)} gluings)"

    # combinatorics ------------------------------------------------------

    @cached_property
    def partner(self) -> dict[tuple[int, int], tuple[int, int]]:
        p = {}
        for g in self.gluings:
            p[(g.fa, g.ea)] = (g.fb, g.eb)
            p[(g.fb, g.eb)] = (g.fa, g.ea)
        return p

    def edge_vector(self, f: int, i: int) -> np.ndarray:
        v = self.faces[f]
        return v[(i + 1) % len(v)] - v[i]

    def translation(self, f: int, i: int) -> np.ndarray:
        """Vector carrying edge ``(f, i)`` in chart ``f`` onto its partner's chart."""
        g, k = self.partner[(f, i)]
        return self.faces[g][(k + 1) % len(self.faces[g])] - self.faces[f][i]

    @cached_property
    def corner_class(self) -> list[list[int]]:
        return corner_classes([len(v) for v in self.faces], self.partner)

    @cached_property
    def num_vertex_classes(self) -> int:
        return 1 + max(c for row in self.corner_class for c in row)

    @cached_property
    def class_angles(self) -> list[float]:
        angles = [0.0] * self.num_vertex_classes
        for f, v in enumerate(self.faces):
            for j, c in enumerate(self.corner_class[f]):
                angles[c] += corner_angle(v, j)
        return angles

    @cached_property
    def cone_points(self) -> tuple[ConePoint, ...]:
        """One entry per vertex class; order 0 entries are regular marked points."""
        return tuple(
            ConePoint(c, a, int(round(a / TWO_PI)) - 1) for c, a in enumerate(self.class_angles)
        )

    @cached_property
    def singular_classes(self) -> frozenset[int]:
        return frozenset(c.vertex_class for c in self.cone_points if c.order > 0)

    def is_cone_corner(self, f: int, j: int) -> bool:
        return self.corner_class[f][j] in self.singular_classes

    @cached_property
    def stratum(self) -> StratumSignature:
        return StratumSignature(tuple(sorted((c.order for c in self.cone_points if c.order > 0), reverse=True)))

    @cached_property
    def genus(self) -> int:
        chi = self.num_vertex_classes - len(self.gluings) + len(self.faces)
        return (2 - chi) // 2

    @cached_property
    def area(self) -> float:
        return float(sum(signed_area(v) for v in self.faces))

    @cached_property
    def convex(self) -> bool:
        return all(is_convex(v) for v in self.faces)

    # transforms ---------------------------------------------------------

    def transformed(self, m) -> "TranslationSurface":
        m = np.asarray(m, dtype=float)
        faces = [v @ m.T for v in self.faces]
        marked = []
        for p in self.marked:
            q = m @ np.array([p.x, p.y])
            marked.append((p.face, q[0], q[1]))
        return TranslationSurface(faces, self.gluings, marked, self.name)

    def edge_vectors(self) -> list[np.ndarray]:
        return [self.edge_vector(f, i) for f, v in enumerate(self.faces) for i in range(len(v))]

    # serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "faces": [[[float(x), float(y)] for x, y in v] for v in self.faces],
            "gluings": [{"fa": g.fa, "ea": g.ea, "fb": g.fb, "eb": g.eb} for g in self.gluings],
            "marked": [[p.face, p.x, p.y] for p in self.marked],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TranslationSurface":
        try:
            faces = d["faces"]
            glu = [EdgeGluing(int(g["fa"]), int(g["ea"]), int(g["fb"]), int(g["eb"])) for g in d.get("gluings", [])]
            marked = d.get("marked", [])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed surface JSON: missing or bad field {exc}") from exc
        return cls(faces, glu, marked, d.get("name", ""))


def dumps_surface(surface: TranslationSurface) -> str:
    """Serialize with 17 significant digits so floats round-trip exactly."""
    d = surface.to_json_dict()

    def fmt(x):
        return format(float(x), ".17g")

    faces = "[" + ", ".join("[" + ", ".join(f"[{fmt(x)}, {fmt(y)}]" for x, y in v) + "]" for v in d["faces"]) + "]"
    glu = "[" + ", ".join(json.dumps(g) for g in d["gluings"]) + "]"
    marked = "[" + ", ".join(f"[{m[0]}, {fmt(m[1])}, {fmt(m[2])}]" for m in d["marked"]) + "]"
    return f'{{"name": {json.dumps(d["name"])}, "faces": {faces}, "gluings": {glu}, "marked": {marked}}}\n'


def loads_surface(text: str) -> TranslationSurface:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise ParseError("surface JSON must be an object")
    return TranslationSurface.from_json_dict(d)


# validation -------------------------------------------------------------


def validate(surface: TranslationSurface) -> ValidationReport:
    """Check every defining invariant; never raises."""
    out: list[Violation] = []
    faces = surface.faces
    if not faces:
        return ValidationReport([Violation("no faces", "surface has no faces")])

    geometric_ok = True
    for f, v in enumerate(faces):
        if len(v) < 3:
            out.append(Violation("degenerate face", f"face {f} has fewer than 3 vertices"))
            geometric_ok = False
            continue
        if not np.all(np.isfinite(v)):
            out.append(Violation("non-finite coordinate", f"face {f} has a NaN or infinite coordinate"))
            geometric_ok = False
            continue
        if signed_area(v) <= TAU_GEOM:
            out.append(Violation("non-positive area", f"face {f} is not counterclockwise with positive area"))
            geometric_ok = False
        if not is_simple(v):
            out.append(Violation("non-simple face", f"face {f} self-intersects"))
            geometric_ok = False

    seen: dict[tuple[int, int], int] = {}
    index_ok = True
    for n, g in enumerate(surface.gluings):
        for f, e in ((g.fa, g.ea), (g.fb, g.eb)):
            if not (0 <= f < len(faces)) or not (0 <= e < len(faces[f])):
                out.append(Violation("bad index", f"gluing {n} references missing edge (face {f}, edge {e})"))
                index_ok = False
                continue
            if (f, e) in seen:
                out.append(Violation("duplicate gluing", f"edge (face {f}, edge {e}) appears in more than one gluing"))
                index_ok = False
            seen[(f, e)] = n
        if (g.fa, g.ea) == (g.fb, g.eb):
            out.append(Violation("self gluing", f"edge (face {g.fa}, edge {g.ea}) glued to itself"))
            index_ok = False

    for f, v in enumerate(faces):
        for e in range(len(v)):
            if (f, e) not in seen:
                out.append(Violation("unpaired edge", f"unpaired edge (face {f}, edge {e})"))
                index_ok = False

    if geometric_ok:
        for g in surface.gluings:
            try:
                a = surface.edge_vector(g.fa, g.ea)
                b = surface.edge_vector(g.fb, g.eb)
            except IndexError:
                continue
            la, lb = float(np.hypot(*a)), float(np.hypot(*b))
            where = f"(face {g.fa}, edge {g.ea}) ~ (face {g.fb}, edge {g.eb})"
            if abs(la - lb) > TAU_GEOM:
                out.append(Violation("edge length mismatch", f"edge length mismatch {where}: {la:.12g} vs {lb:.12g}"))
            elif float(np.hypot(*(a + b))) > TAU_GEOM:
                out.append(Violation("non-parallel gluing", f"non-parallel gluing {where}"))

    if index_ok:
        uf = _UnionFind(len(faces))
        for g in surface.gluings:
            uf.union(g.fa, g.fb)
        if len({uf.find(f) for f in range(len(faces))}) > 1:
            out.append(Violation("disconnected", "gluing graph is disconnected"))

    if index_ok and geometric_ok and not out:
        for c in surface.cone_points:
            k = c.total_angle / TWO_PI
            if abs(k - round(k)) * TWO_PI > TAU_ANGLE * 10 or round(k) < 1:
                out.append(
                    Violation("angle not multiple of 2pi", f"vertex class {c.vertex_class} has angle {c.total_angle:.12g}")
                )
        for p in surface.marked:
            if not (0 <= p.face < len(faces)) or not point_in_polygon(faces[p.face], np.array([p.x, p.y])):
                out.append(Violation("bad marked point", f"marked point {tuple(p)} is not inside its face"))
    return ValidationReport(out)


def require_valid(surface: TranslationSurface) -> TranslationSurface:
    rep = validate(surface)
    if not rep.ok:
        raise InvalidSurface("; ".join(v.message for v in rep.violations[:10]), rep.violations)
    return surface


def point_in_polygon(vertices: np.ndarray, p: np.ndarray, tol: float = TAU_GEOM) -> bool:
    """Closed containment test (boundary counts as inside)."""
    n = len(vertices)
    inside = False
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        ab = b - a
        t = np.dot(p - a, ab) / np.dot(ab, ab)
        if 0 <= t <= 1 and np.hypot(*(a + t * ab - p)) <= tol:
            return True
        if (a[1] > p[1]) != (b[1] > p[1]):
            xc = a[0] + (p[1] - a[1]) * ab[0] / ab[1]
            if xc > p[0]:
                inside = not inside
    return inside


def stratum_and_genus(surface: TranslationSurface) -> tuple[StratumSignature, int]:
    require_valid(surface)
    return surface.stratum, surface.genus


def area(surface: TranslationSurface) -> float:
    require_valid(surface)
    return surface.area


# builders ---------------------------------------------------------------


def build_torus(e1, e2, name: str = "") -> TranslationSurface:
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    det = _cross(e1, e2)
    if det <= TAU_GEOM:
        raise DegenerateBasis(f"basis {e1.tolist()}, {e2.tolist()} has determinant {det}")
    o = np.zeros(2)
    face = [o, e1, e1 + e2, e2]
    return TranslationSurface([face], [EdgeGluing(0, 0, 0, 2), EdgeGluing(0, 1, 0, 3)], name=name or "torus")


def _as_images(perm, n=None) -> list[int]:
    if isinstance(perm, str):
        return parse_permutation(perm, n)
    return [int(x) for x in perm]


def build_square_tiled(horizontal_perm, vertical_perm, name: str = "") -> TranslationSurface:
    """Unit squares; square i's right edge meets square h(i)'s left edge and its top meets v(i)'s bottom.

    Permutations are 0-based image lists, or strings accepted by
    :func:`parse_permutation`.
    """
    h = _as_images(horizontal_perm)
    n = len(h)
    v = _as_images(vertical_perm, n)
    if len(v) != n or sorted(h) != list(range(n)) or sorted(v) != list(range(n)):
        raise ValueError("permutations must be bijections of the same set")
    uf = _UnionFind(n)
    for i in range(n):
        uf.union(i, h[i])
        uf.union(i, v[i])
    if len({uf.find(i) for i in range(n)}) > 1:
        raise DisconnectedSurface("permutation group does not act transitively")
    square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    gluings = []
    for i in range(n):
        gluings.append(EdgeGluing(i, 1, h[i], 3))
        gluings.append(EdgeGluing(i, 2, v[i], 0))
    return TranslationSurface([square] * n, gluings, name=name or f"st:{n}")


def parse_permutation(text: str, n: int | None = None) -> list[int]:
    """Parse ``"(1 2)(3)"`` / ``"(1,2)(3)"`` cycle notation or ``"2,1,3"`` image notation (1-based)."""
    text = text.strip()
    if not text or text.lower() in ("id", "identity", "()"):
        if n is None:
            raise ParseError("identity permutation needs a size")
        return list(range(n))
    if text.startswith("("):
        cycles = re.findall(r"\(([^)]*)\)", text)
        elems = [[int(x) - 1 for x in re.split(r"[\s,]+", c.strip()) if x] for c in cycles]
        size = max([x + 1 for c in elems for x in c] + [n or 0])
        img = list(range(size))
        for c in elems:
            for a, b in zip(c, c[1:] + c[:1]):
                img[a] = b
        return img
    try:
        return [int(x) - 1 for x in re.split(r"[\s,]+", text) if x]
    except ValueError as exc:
        raise ParseError(f"cannot parse permutation {text!r}") from exc


def l_surface() -> TranslationSurface:
    return build_square_tiled([1, 0, 2], [2, 1, 0], name="st-L3")


def regular_octagon(side: float = 1.0) -> TranslationSurface:
    verts = []
    p = np.zeros(2)
    for k in range(8):
        verts.append(p.copy())
        p = p + side * np.array([math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)])
    gluings = [EdgeGluing(0, i, 0, i + 4) for i in range(4)]
    return TranslationSurface([verts], gluings, name="octagon")


@dataclass(frozen=True)
class RectangleTable:
    a: float
    b: float


@dataclass(frozen=True)
class RightTriangleTable:
    """Right triangle with legs along the axes and acute angle pi/q at the origin."""

    q: int


def _table_polygon(table):
    """Vertices and side directions (as fractions of pi) for a supported table."""
    if isinstance(table, RectangleTable):
        if table.a <= 0 or table.b <= 0:
            raise UnsupportedTable("rectangle sides must be positive")
        a, b = float(table.a), float(table.b)
        verts = [(0.0, 0.0), (a, 0.0), (a, b), (0.0, b)]
        dirs = [Fraction(0), Fraction(1, 2), Fraction(1), Fraction(3, 2)]
        return verts, dirs
    if isinstance(table, RightTriangleTable):
        q = int(table.q)
        if q < 3:
            raise UnsupportedTable("right triangle needs q >= 3")
        verts = [(0.0, 0.0), (1.0, 0.0), (1.0, math.tan(math.pi / q))]
        dirs = [Fraction(0), Fraction(1, 2), Fraction(1) + Fraction(1, q)]
        return verts, dirs
    raise UnsupportedTable(f"unsupported billiard table {table!r}")


def _clean(x: float) -> float:
    r = round(x)
    return float(r) if abs(x - r) < 1e-14 else x


def unfold_billiard(table) -> TranslationSurface:
    """Glue together the reflected copies of a rational billiard table.

    Copies are indexed by the dihedral group generated by the reflections in
    the table's sides; side ``i`` of copy ``g`` meets side ``i`` of copy
    ``g * r_i``.
    """
    verts, dirs = _table_polygon(table)
    n = len(verts)
    # reflection in a line with direction theta is z -> e^{2 i theta} conj(z)
    N = 1
    for d in dirs:
        N = math.lcm(N, d.denominator)
    refl = [int((d * N) % N) for d in dirs]  # exponent of omega = e^{2 pi i / N}

    def compose(g1, g2):
        k1, f1 = g1
        k2, f2 = g2
        return ((k1 + (-k2 if f1 else k2)) % N, f1 ^ f2)

    elements = [(0, 0)]
    index = {(0, 0): 0}
    queue = [(0, 0)]
    while queue:
        g = queue.pop(0)
        for m in refl:
            h = compose(g, (m, 1))
            if h not in index:
                index[h] = len(elements)
                elements.append(h)
                queue.append(h)

    def apply(g, p):
        k, f = g
        z = complex(p[0], -p[1] if f else p[1])
        z *= complex(math.cos(2 * math.pi * k / N), math.sin(2 * math.pi * k / N))
        return (_clean(z.real), _clean(z.imag))

    faces = []
    for g in elements:
        img = [apply(g, p) for p in verts]
        if g[1]:
            img = [img[(-j) % n] for j in range(n)]
        faces.append(img)

    def side_index(g, i):
        return i if not g[1] else (-i - 1) % n

    gluings = []
    done = set()
    for gi, g in enumerate(elements):
        for i, m in enumerate(refl):
            h = compose(g, (m, 1))
            hi = index[h]
            key = frozenset([(gi, i), (hi, i)])
            if key in done:
                continue
            done.add(key)
            gluings.append(EdgeGluing(gi, side_index(g, i), hi, side_index(h, i)))
    if isinstance(table, RectangleTable):
        name = f"billiard-rect:{table.a:g}:{table.b:g}"
    else:
        name = f"billiard-tri:{table.q}"
    return TranslationSurface(faces, gluings, name=name)


def is_square_tiled(surface: TranslationSurface, tol: float = 1e-9) -> bool:
    """All faces are axis-parallel unit squares with integer corners."""
    for v in surface.faces:
        if len(v) != 4:
            return False
        if np.max(np.abs(v - np.round(v))) > tol:
            return False
        lo = v.min(axis=0)
        if not np.allclose(np.sort(v - lo, axis=0), [[0, 0], [0, 0], [1, 1], [1, 1]], atol=tol):
            return False
        if abs(signed_area(v) - 1.0) > tol:
            return False
    return True


def same_surface(a: TranslationSurface, b: TranslationSurface, tol: float = 1e-9) -> bool:
    """Equality up to translation and face relabeling, via edge-vector multisets and invariants."""

    def key(s):
        vecs = sorted((round(x / tol) * tol, round(y / tol) * tol) for x, y in s.edge_vectors())
        return vecs

    if len(a.faces) != len(b.faces) or abs(a.area - b.area) > tol:
        return False
    if a.stratum != b.stratum or a.genus != b.genus:
        return False
    va, vb = key(a), key(b)
    return len(va) == len(vb) and all(abs(p[0] - q[0]) <= 2 * tol and abs(p[1] - q[1]) <= 2 * tol for p, q in zip(va, vb))


# convexification ---------------------------------------------------------


def _ear_clip(vertices: np.ndarray) -> list[tuple[int, int, int]]:
    idx = list(range(len(vertices)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(vertices) ** 2:
            raise InvalidSurface("ear clipping failed; polygon is not simple")
        m = len(idx)
        for k in range(m):
            a, b, c = idx[k - 1], idx[k], idx[(k + 1) % m]
            pa, pb, pc = vertices[a], vertices[b], vertices[c]
            if _cross(pb - pa, pc - pb) <= TAU_GEOM:
                continue
            ear = True
            for o in idx:
                if o in (a, b, c):
                    continue
                po = vertices[o]
                if (_cross(pb - pa, po - pa) >= -TAU_GEOM and _cross(pc - pb, po - pb) >= -TAU_GEOM
                        and _cross(pa - pc, po - pc) >= -TAU_GEOM):
                    ear = False
                    break
            if ear:
                tris.append((a, b, c))
                idx.pop(k)
                break
    tris.append(tuple(idx))
    return tris


def triangulate_polygon(vertices: np.ndarray) -> list[tuple[int, int, int]]:
    """Ear-clipping triangulation returning vertex index triples (counterclockwise)."""
    return _ear_clip(np.asarray(vertices, dtype=float))


def convexified(surface: TranslationSurface) -> TranslationSurface:
    """Same surface with every non-convex face split into triangles."""
    if surface.convex:
        return surface
    new_faces = []
    edge_map: dict[tuple[int, int], tuple[int, int]] = {}
    internal = []
    face_map: dict[int, list[int]] = {}
    for f, v in enumerate(surface.faces):
        if is_convex(v):
            face_map[f] = [len(new_faces)]
            for i in range(len(v)):
                edge_map[(f, i)] = (len(new_faces), i)
            new_faces.append(v)
            continue
        tris = _ear_clip(v)
        n = len(v)
        diag: dict[tuple[int, int], tuple[int, int]] = {}
        face_map[f] = []
        for a, b, c in tris:
            t = len(new_faces)
            face_map[f].append(t)
            new_faces.append(v[[a, b, c]])
            for s, (p, q) in enumerate(((a, b), (b, c), (c, a))):
                if (p + 1) % n == q:
                    edge_map[(f, p)] = (t, s)
                elif (q, p) in diag:
                    internal.append(EdgeGluing(*diag.pop((q, p)), t, s))
                else:
                    diag[(p, q)] = (t, s)
    gluings = [EdgeGluing(*edge_map[(g.fa, g.ea)], *edge_map[(g.fb, g.eb)]) for g in surface.gluings] + internal
    marked = []
    for p in surface.marked:
        for t in face_map[p.face]:
            if point_in_polygon(new_faces[t], np.array([p.x, p.y])):
                marked.append((t, p.x, p.y))
                break
    return TranslationSurface(new_faces, gluings, marked, surface.name)


def points_equal(surface: TranslationSurface, p: SurfacePoint, q: SurfacePoint, tol: float = 1e-8) -> bool:
    """Compare surface points, allowing for points on glued edges or at identified vertices."""
    if p.face == q.face and math.hypot(p.x - q.x, p.y - q.y) <= tol:
        return True
    for alt in equivalent_points(surface, p, tol):
        if alt.face == q.face and math.hypot(alt.x - q.x, alt.y - q.y) <= tol:
            return True
    return False


def equivalent_points(surface: TranslationSurface, p: SurfacePoint, tol: float = 1e-8) -> list[SurfacePoint]:
    """Other chart representations of a point lying on an edge or at a vertex."""
    out = []
    v = surface.faces[p.face]
    xy = np.array([p.x, p.y])
    n = len(v)
    for j in range(n):
        if math.hypot(*(v[j] - xy)) <= tol:
            c = surface.corner_class[p.face][j]
            for g, row in enumerate(surface.corner_class):
                for k, cc in enumerate(row):
                    if cc == c:
                        w = surface.faces[g][k]
                        out.append(SurfacePoint(g, float(w[0]), float(w[1])))
            return out
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        ab = b - a
        t = float(np.dot(xy - a, ab) / np.dot(ab, ab))
        if 0 <= t <= 1 and math.hypot(*(a + t * ab - xy)) <= tol:
            q = xy + surface.translation(p.face, i)
            g, _ = surface.partner[(p.face, i)]
            out.append(SurfacePoint(g, float(q[0]), float(q[1])))
    return out


def random_surface_point(surface: TranslationSurface, rng: np.random.Generator) -> SurfacePoint:
    """Uniform point with respect to area."""
    tris = []
    weights = []
    for f, v in enumerate(surface.faces):
        for a, b, c in triangulate_polygon(v):
            tris.append((f, v[a], v[b], v[c]))
            weights.append(abs(_cross(v[b] - v[a], v[c] - v[a])) / 2)
    w = np.array(weights) / sum(weights)
    k = int(rng.choice(len(tris), p=w))
    f, a, b, c = tris[k]
    r1, r2 = rng.random(2)
    if r1 + r2 > 1:
        r1, r2 = 1 - r1, 1 - r2
    p = a + r1 * (b - a) + r2 * (c - a)
    return SurfacePoint(f, float(p[0]), float(p[1]))


def iter_builtin_names() -> Iterable[str]:
    return ("torus", "torus:2x0.5", "st-L3", "octagon", "billiard-rect:1:1", "billiard-tri:8", "st:(1,2):id")
