"""SL(2,R) action, cut-and-paste renormalization and diameter tracking along g_t."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import MeshTooCoarse, OrientationReversing, TooFewSamples
from .flow import unit
from .geometry import delaunay_triangulate, diameter, systole
from .surface import TranslationSurface, build_torus, require_valid


@dataclass(frozen=True)
class MatrixAction:
    m: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        if self.det == 0:
            raise ValueError("matrix must be invertible")

    @classmethod
    def of(cls, m) -> "MatrixAction":
        a = np.asarray(m, dtype=float)
        return cls(((float(a[0, 0]), float(a[0, 1])), (float(a[1, 0]), float(a[1, 1]))))

    @classmethod
    def geodesic(cls, t: float) -> "MatrixAction":
        """The Teichmuller geodesic flow element diag(e^t, e^-t)."""
        return cls(((math.exp(t), 0.0), (0.0, math.exp(-t))))

    @classmethod
    def rotation(cls, theta: float) -> "MatrixAction":
        c, s = math.cos(theta), math.sin(theta)
        return cls(((c, -s), (s, c)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.m)

    @property
    def det(self) -> float:
        (a, b), (c, d) = self.m
        return a * d - b * c

    def __matmul__(self, other: "MatrixAction") -> "MatrixAction":
        return MatrixAction.of(self.array @ other.array)


def g_t(t: float) -> MatrixAction:
    return MatrixAction.geodesic(t)


def apply_matrix(surface: TranslationSurface, m) -> TranslationSurface:
    """Push every chart forward by a linear map; gluings are unchanged."""
    if not isinstance(m, MatrixAction):
        m = MatrixAction.of(m)
    if m.det <= 0:
        raise OrientationReversing(f"matrix with determinant {m.det} does not preserve orientation")
    out = surface.transformed(m.array)
    return out


def rotate_to_vertical(direction) -> MatrixAction:
    """Rotation taking ``direction`` to (0, 1)."""
    dx, dy = unit(direction)
    # rows are the images of e1, e2: R d = (0, 1)
    return MatrixAction(((dy, -dx), (dx, dy)))


def lagrange_reduce(b1, b2) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lagrange reduction of a planar lattice basis.

    The result has det > 0, b1.b2 >= 0 and |b1.b2| <= min(|b1|, |b2|)^2 / 2,
    and its shorter vector is a shortest lattice vector.  When the reduced
    pair makes an obtuse angle it is turned to (b2, -b1), so the shorter
    vector may come second.
    """
    b1 = np.array(b1, dtype=float)
    b2 = np.array(b2, dtype=float)
    for _ in range(10000):
        if b1 @ b1 > b2 @ b2:
            b1, b2 = b2, b1
        mu = round(float(b1 @ b2) / float(b1 @ b1))
        if mu == 0:
            break
        b2 = b2 - mu * b1
    det = b1[0] * b2[1] - b1[1] * b2[0]
    if det < 0:
        b2 = -b2
    if b1 @ b2 < 0:
        b1, b2 = b2, -b1
    return b1, b2


def _is_lattice_torus(surface: TranslationSurface) -> bool:
    return surface.genus == 1 and surface.num_vertex_classes == 1 and not surface.marked


def torus_lattice_basis(surface: TranslationSurface) -> tuple[np.ndarray, np.ndarray]:
    tri = delaunay_triangulate(surface)
    p = tri.pts[0]
    return p[1] - p[0], p[2] - p[0]


def renormalize(surface: TranslationSurface) -> TranslationSurface:
    """An isometric representative with short edges.

    One-vertex tori become the parallelogram of a reduced lattice basis;
    everything else is re-cut along its Delaunay triangulation.
    """
    require_valid(surface)
    if _is_lattice_torus(surface):
        b1, b2 = lagrange_reduce(*torus_lattice_basis(surface))
        return build_torus(b1, b2, name=surface.name)
    tri = delaunay_triangulate(surface)
    return tri.to_surface(name=surface.name)


@dataclass(frozen=True)
class TrackSample:
    t: float
    diameter: float
    diameter_err: float
    systole: float
    h: float


@dataclass
class DiameterTrack:
    samples: list[TrackSample]
    t_max: float
    dt: float
    h: float

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def diameters(self) -> np.ndarray:
        return np.array([s.diameter for s in self.samples])

    @property
    def D_max(self) -> float:
        return float(self.diameters.max())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,diameter,diameter_err,systole\n")
        for s in self.samples:
            buf.write(f"{s.t:.17g},{s.diameter:.17g},{s.diameter_err:.17g},{s.systole:.17g}\n")
        return buf.getvalue()

    @classmethod
    def synthetic(cls, t, diameters, systoles=None, err=0.0) -> "DiameterTrack":
        t = list(map(float, t))
        if systoles is None:
            systoles = [min(d, 1.0) for d in diameters]
        samples = [TrackSample(a, float(d), err, float(s), 0.0) for a, d, s in zip(t, diameters, systoles)]
        dt = t[1] - t[0] if len(t) > 1 else 0.0
        return cls(samples, t[-1], dt, 0.0)


def time_grid(t_max: float, dt: float) -> list[float]:
    if dt <= 0 or t_max < 0:
        raise ValueError("need dt > 0 and t_max >= 0")
    n = int(math.floor(t_max / dt + 1e-9))
    return [k * dt for k in range(n + 1)]


def geodesic_track(surface: TranslationSurface, direction, t_max: float = 5.0, dt: float = 0.25,
                   h: float | None = None, h_factor: float = 0.01, max_nodes: int = 600_000) -> DiameterTrack:
    """Diameter and systole of renormalized g_t R surface on the grid t = 0, dt, ..., t_max.

    ``R`` rotates ``direction`` to vertical.  Samples are produced by
    repeatedly applying g_dt and renormalizing, so coordinates never grow.
    When the fixed spacing ``h`` cannot resolve a thin sample (h >= systole/4)
    that sample is measured at systole/4.5 instead and the spacing used is
    recorded on the sample.
    """
    R = rotate_to_vertical(direction)
    omega = renormalize(apply_matrix(surface, R))
    if h is None:
        h = h_factor * systole(omega)
    step = g_t(dt)
    samples = []
    for k, t in enumerate(time_grid(t_max, dt)):
        if k:
            omega = renormalize(apply_matrix(omega, step))
        sysv = systole(omega)
        hk = h if h < sysv / 4 else sysv / 4.5
        if omega.area / hk**2 > max_nodes:
            raise MeshTooCoarse(f"sample t={t:g} needs spacing {hk:.3g}; mesh would exceed {max_nodes} nodes")
        d = diameter(omega, hk, systole_value=sysv)
        samples.append(TrackSample(t, d.value, d.error, sysv, hk))
    return DiameterTrack(samples, t_max, dt, h)


BOUNDED = "bounded_evidence"
DIVERGENT = "divergence_evidence"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class BoundednessVerdict:
    verdict: str
    D_max: float
    growth_rate: float


def boundedness_diagnostic(track: DiameterTrack, divergence_rate: float = 0.5,
                           plateau_ratio: float = 1.2) -> BoundednessVerdict:
    """Finite-horizon evidence for a bounded or divergent forward geodesic.

    The growth rate is the least-squares slope of log(diameter) against t
    over the last half of the samples.
    """
    n = len(track.samples)
    if n < 8:
        raise TooFewSamples(f"need at least 8 samples, got {n}")
    t = track.t
    d = track.diameters
    tail = slice(n // 2, n)
    rate = float(np.polyfit(t[tail], np.log(d[tail]), 1)[0])
    if rate >= divergence_rate:
        verdict = DIVERGENT
    elif d[tail].max() <= plateau_ratio * float(np.median(d)):
        verdict = BOUNDED
    else:
        verdict = INCONCLUSIVE
    return BoundednessVerdict(verdict, float(d.max()), rate)
