"""Scenario plumbing: surface loading, direction parsing, the end-to-end check and report files."""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .density import (
    NEGATIVE,
    POSITIVE,
    BackwardReport,
    DensityProfile,
    ForwardReport,
    check_track_against_bound,
    density_verdict,
    lemma_forward_verify,
    superdensity_scan,
)
from .diophantine import NOT_BADLY, NamedConstant, is_badly_approximable, slope_value
from .errors import IoError, ParseError, SuperdenseError, ValidationFailed
from .flow import direction_from_slope, unit
from .moduli import BOUNDED, DIVERGENT, BoundednessVerdict, DiameterTrack, boundedness_diagnostic, geodesic_track
from .surface import (
    RectangleTable,
    RightTriangleTable,
    TranslationSurface,
    build_square_tiled,
    build_torus,
    dumps_surface,
    l_surface,
    loads_surface,
    parse_permutation,
    regular_octagon,
    unfold_billiard,
    validate,
)

CONSISTENT = "consistent"
INCONSISTENT = "inconsistent"
INCONCLUSIVE = "inconclusive"

SURFACE_FILE = "surface.json"
TRACK_FILE = "track.csv"
PROFILE_FILE = "profile.csv"
THEOREM_FILE = "theorem.json"
META_FILE = "run-meta.json"


# ---------------------------------------------------------------- surfaces

def _positive_float(text: str, what: str) -> float:
    try:
        v = float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad {what} {text!r}") from None
    if not v > 0:
        raise ParseError(f"{what} must be positive, got {text!r}")
    return v


def builtin_surface(name: str) -> TranslationSurface:
    """Surfaces from the built-in registry.

    ``torus``, ``torus:WxH``, ``st-L3``, ``octagon``, ``billiard-rect:a:b``,
    ``billiard-tri:q`` (right triangle with angle pi/q) and
    ``st:hperm:vperm`` (square-tiled, permutations in cycle or image notation,
    ``id`` for the identity).
    """
    s = name.strip()
    if s == "torus":
        return build_torus((1.0, 0.0), (0.0, 1.0), name="torus")
    if s in ("st-L3", "L3", "l-surface"):
        return l_surface()
    if s == "octagon":
        return regular_octagon()
    m = re.fullmatch(r"torus:([^x]+)x(.+)", s)
    if m:
        w = _positive_float(m.group(1), "torus width")
        h = _positive_float(m.group(2), "torus height")
        return build_torus((w, 0.0), (0.0, h), name=s)
    m = re.fullmatch(r"billiard-rect:([^:]+):([^:]+)", s)
    if m:
        a = _positive_float(m.group(1), "rectangle side")
        b = _positive_float(m.group(2), "rectangle side")
        return unfold_billiard(RectangleTable(a, b))
    m = re.fullmatch(r"billiard-tri:(\d+)", s)
    if m:
        return unfold_billiard(RightTriangleTable(int(m.group(1))))
    m = re.fullmatch(r"st:([^:]+):([^:]+)", s)
    if m:
        hp, vp = m.group(1), m.group(2)
        n = None
        for p in (hp, vp):
            if p != "id":
                n = max(n or 0, len(parse_permutation(p)))
        n = n or 1
        h = list(range(n)) if hp == "id" else parse_permutation(hp, n)
        v = list(range(n)) if vp == "id" else parse_permutation(vp, n)
        return build_square_tiled(h, v, name=s)
    raise ParseError(f"unknown surface {name!r}")


def load_surface(spec: str | os.PathLike) -> TranslationSurface:
    """A validated surface from a JSON file path or a built-in name."""
    p = Path(spec)
    if p.suffix == ".json" or p.is_file():
        try:
            text = p.read_text()
        except OSError as e:
            raise IoError(f"cannot read {p}: {e.strerror}") from e
        try:
            surface = loads_surface(text)
        except ParseError as e:
            raise ParseError(f"{p}: {e}") from e
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ParseError(f"{p}: malformed surface field: {e}") from e
    else:
        surface = builtin_surface(str(spec))
    rep = validate(surface)
    if not rep.ok:
        first = rep.violations[:10]
        msg = "; ".join(v.message for v in first)
        more = len(rep.violations) - len(first)
        if more > 0:
            msg += f"; and {more} more"
        raise ValidationFailed(msg, first)
    return surface


# ---------------------------------------------------------------- directions

@dataclass(frozen=True)
class Direction:
    """A flow direction with the slope it came from, when there is one."""

    label: str
    vector: tuple[float, float]
    slope: object = None

    @property
    def is_vertical(self) -> bool:
        return self.vector[0] == 0.0


def parse_direction(text: str) -> Direction:
    """Slopes are dy/dx: ``p/q`` is the vector (q, p), ``vertical`` is (0, 1),
    ``a,b`` is a literal vector, names such as ``phi`` give (1, slope)."""
    s = text.strip()
    low = s.lower()
    if low in ("vertical", "inf", "infinity"):
        return Direction(s, (0.0, 1.0), math.inf)
    if "," in s and not low.startswith("cf:"):
        parts = s.strip("()[] ").split(",")
        if len(parts) != 2:
            raise ParseError(f"direction vector needs two components: {text!r}")
        try:
            v = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise ParseError(f"bad direction vector {text!r}") from None
        if not all(map(math.isfinite, v)) or v == (0.0, 0.0):
            raise ParseError(f"direction vector must be finite and nonzero: {text!r}")
        return Direction(s, unit(v), Fraction(v[1]) / Fraction(v[0]) if v[0] else math.inf)
    x = slope_value(s)
    if isinstance(x, NamedConstant):
        return Direction(s, unit((1.0, float(x))), x)
    return Direction(s, direction_from_slope(x), x)


# ---------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class ScenarioConfig:
    surface: str
    direction: str
    T_list: tuple[float, ...] = (4.0, 8.0, 16.0, 32.0)
    t_max: float = 5.0
    dt: float = 0.25
    c_cap: float = 100.0
    seed: int = 0
    out: str | None = None
    h: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "T_list", tuple(float(T) for T in self.T_list))
        if not self.T_list or any(not T > 0 for T in self.T_list):
            raise ValueError("every horizon T must be positive")
        if list(self.T_list) != sorted(set(self.T_list)):
            raise ValueError("horizons must be strictly increasing")
        for name in ("t_max", "dt", "c_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["T_list"] = list(self.T_list)
        return d


def agreement(density_side: str, geodesic_side: str) -> str:
    """Both halves of the equivalence count: positive with bounded and negative with divergent agree."""
    if density_side not in (POSITIVE, NEGATIVE) or geodesic_side not in (BOUNDED, DIVERGENT):
        return INCONCLUSIVE
    if (density_side == POSITIVE) == (geodesic_side == BOUNDED):
        return CONSISTENT
    return INCONSISTENT


@dataclass
class TheoremReport:
    config: ScenarioConfig
    surface: TranslationSurface
    direction: Direction
    profile: DensityProfile
    density_verdict: str
    track: DiameterTrack
    boundedness: BoundednessVerdict
    agreement: str
    forward: list[ForwardReport] = field(default_factory=list)
    backward: BackwardReport | None = None
    caveats: list[str] = field(default_factory=list)

    @property
    def superdense_evidence(self) -> bool:
        return self.density_verdict == POSITIVE

    @property
    def lemma_forward_pass(self) -> bool | None:
        if not self.forward:
            return None
        vals = [r.passed for r in self.forward]
        if False in vals:
            return False
        return None if None in vals else True

    def to_json_dict(self) -> dict:
        return {
            "direction": self.direction.label,
            "direction_vector": list(self.direction.vector),
            "superdense_evidence": self.superdense_evidence,
            "density_verdict": self.density_verdict,
            "c_hat_by_T": self.profile.to_json_dict(),
            "bounded_verdict": self.boundedness.verdict,
            "growth_rate": self.boundedness.growth_rate,
            "D_max": self.boundedness.D_max,
            "lemma_forward_pass": self.lemma_forward_pass,
            "lemma_forward": [r.to_json_dict() for r in self.forward],
            "backward_bound": self.backward.bound if self.backward else None,
            "backward_check": self.backward.to_json_dict() if self.backward else None,
            "agreement": self.agreement,
            "caveats": list(self.caveats),
        }


def _rethrow(e: Exception, context: str):
    try:
        new = type(e)(f"{context}: {e}")
    except TypeError:
        raise e
    raise new from e


def verify_theorem(config: ScenarioConfig, surface: TranslationSurface | None = None) -> TheoremReport:
    """Run both sides of the superdense-iff-bounded equivalence on one direction.

    The lemma checks run only where they apply: the forward budget needs a
    bounded track and a positive density side, the backward bound needs a
    finite superdensity constant.
    """
    S = surface if surface is not None else load_surface(config.surface)
    d = parse_direction(config.direction)
    where = f"{config.surface} / {config.direction}"
    try:
        prof = superdensity_scan(S, d.vector, config.T_list, c_cap=config.c_cap, seed=config.seed)
    except SuperdenseError as e:
        _rethrow(e, f"density side failed for {where}")
    dv = density_verdict(prof)
    try:
        track = geodesic_track(S, d.vector, config.t_max, config.dt, h=config.h)
        bv = boundedness_diagnostic(track)
    except SuperdenseError as e:
        _rethrow(e, f"geodesic side failed for {where}")

    forward = []
    if dv == POSITIVE and bv.verdict == BOUNDED:
        forward = [lemma_forward_verify(S, d.vector, T, bv.D_max) for T in config.T_list]
    backward = check_track_against_bound(track, max(prof.finite_values)) if dv == POSITIVE else None

    ag = agreement(dv, bv.verdict)
    caveats = []
    if ag != CONSISTENT:
        caveats.append("finite_horizon: verdicts rest on horizons up to "
                       f"T={config.T_list[-1]:g} and t={config.t_max:g}")
    if d.slope is not None and d.slope is not math.inf and dv != NEGATIVE:
        try:
            cls = is_badly_approximable(d.slope)
        except (TypeError, ValueError):
            cls = None
        if cls is not None and cls.verdict == NOT_BADLY:
            caveats.append(f"large_partial_quotient: slope has a partial quotient {cls.max_quotient_seen}; "
                           "longer horizons may be needed to see the loss of density")
    return TheoremReport(config, S, d, prof, dv, track, bv, ag, forward, backward, caveats)


# ---------------------------------------------------------------- reports

def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e.strerror}") from e
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as e:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise IoError(f"cannot write {path}: {e.strerror}") from e


def run_meta(report: TheoremReport) -> dict:
    params = report.config.to_json_dict()
    params.pop("out")
    return {"version": __version__, "seed": report.config.seed, "parameters": params,
            "files": [SURFACE_FILE, TRACK_FILE, PROFILE_FILE, THEOREM_FILE, META_FILE]}


def emit_reports(report: TheoremReport, outdir: str | os.PathLike) -> list[Path]:
    """Write the five report files into ``outdir``, each one atomically."""
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create {out}: {e.strerror}") from e
    files = {
        SURFACE_FILE: dumps_surface(report.surface),
        TRACK_FILE: report.track.to_csv(),
        PROFILE_FILE: report.profile.to_csv(),
        THEOREM_FILE: _json_text(report.to_json_dict()),
        META_FILE: _json_text(run_meta(report)),
    }
    paths = []
    for name, text in files.items():
        _atomic_write(out / name, text)
        paths.append(out / name)
    return paths
