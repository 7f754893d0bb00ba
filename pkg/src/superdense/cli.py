"""Command-line front end; every subcommand prints one JSON document on stdout."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .density import default_starts, density_verdict, superdensity_scan
from .diophantine import DEFAULT_BOUND, DEFAULT_DEPTH, beck_chen_predict, continued_fraction, slope_report
from .errors import PrecisionExhausted, SuperdenseError
from .experiments import (
    ScenarioConfig,
    _atomic_write,
    builtin_surface,
    emit_reports,
    load_surface,
    parse_direction,
    verify_theorem,
)
from .flow import trace_flow
from .geometry import surface_metrics
from .moduli import boundedness_diagnostic, geodesic_track
from .surface import SurfacePoint, convexified, loads_surface, validate


def _finite(x):
    """inf/nan become null so the output is strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def _emit(obj) -> str:
    return json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False)


def _horizons(tokens) -> list[float]:
    out = []
    for tok in tokens:
        out.extend(float(x) for x in str(tok).split(",") if x.strip())
    return out


def _write_text(path: str, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(p, text)


def cmd_validate(args) -> tuple[dict, int]:
    p = Path(args.surface)
    S = loads_surface(p.read_text()) if p.suffix == ".json" else builtin_surface(args.surface)
    rep = validate(S)
    out = {"surface": args.surface, "ok": rep.ok,
           "violations": [{"kind": v.kind, "message": v.message} for v in rep.violations]}
    if rep.ok:
        out.update(genus=S.genus, stratum=str(S.stratum), faces=len(S.faces), area=S.area)
    return out, 0 if rep.ok else 1


def cmd_metrics(args) -> tuple[dict, int]:
    S = load_surface(args.surface)
    m = surface_metrics(S, args.h)
    return {"surface": args.surface, "genus": S.genus, "stratum": str(S.stratum), "area": m.area,
            "diameter": m.diameter, "diameter_error": m.diameter_error, "systole": m.systole,
            "systole_error": m.systole_error, "h": m.mesh_spacing}, 0


def cmd_flow(args) -> tuple[dict, int]:
    S = convexified(load_surface(args.surface))
    d = parse_direction(args.direction)
    if args.start:
        f, x, y = args.start.split(",")
        start = SurfacePoint(int(f), float(x), float(y))
    else:
        start = default_starts(S, np.random.default_rng(args.seed), 0)[0]
    seg = trace_flow(S, start, d.vector, args.length)
    chords = [[int(f), *map(float, a), *map(float, b)] for f, a, b in zip(seg.faces, seg.entries, seg.exits)]
    out = {"surface": args.surface, "direction": list(d.vector), "start": [int(start.face), start.x, start.y],
           "length": args.length, "total_length": seg.total_length, "termination": seg.termination,
           "end": [int(seg.end.face), float(seg.end.x), float(seg.end.y)], "chords": chords}
    if args.out:
        lines = ["face,x0,y0,x1,y1"] + [",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in c)
                                        for c in chords]
        _write_text(args.out, "\n".join(lines) + "\n")
    return out, 0


def cmd_track(args) -> tuple[dict, int]:
    S = load_surface(args.surface)
    d = parse_direction(args.direction)
    tr = geodesic_track(S, d.vector, args.t_max, args.dt, h=args.h)
    out = {"surface": args.surface, "direction": args.direction, "t": tr.t.tolist(),
           "diameter": tr.diameters.tolist(), "D_max": tr.D_max,
           "diameter_err": [s.diameter_err for s in tr.samples], "systole": [s.systole for s in tr.samples]}
    if len(tr.samples) >= 8:
        v = boundedness_diagnostic(tr)
        out.update(verdict=v.verdict, growth_rate=v.growth_rate)
    if args.out:
        _write_text(args.out, tr.to_csv())
    return out, 0


def cmd_density(args) -> tuple[dict, int]:
    S = load_surface(args.surface)
    d = parse_direction(args.direction)
    prof = superdensity_scan(S, d.vector, _horizons(args.T), c_cap=args.c_cap, seed=args.seed,
                             h_policy=args.h)
    if args.out:
        _write_text(args.out, prof.to_csv())
    return {"surface": args.surface, "direction": args.direction, "c_hat_by_T": prof.to_json_dict(),
            "verdict": density_verdict(prof), "max_over_median": prof.max_over_median,
            "h_by_T": {str(T): prof.h[T] for T in prof.horizons}}, 0


def cmd_cf(args) -> tuple[dict, int]:
    d = parse_direction(args.direction)
    out = slope_report(d.slope, args.depth, args.bound)
    out["slope"] = args.direction
    try:
        exp = continued_fraction(d.slope, args.depth)
    except PrecisionExhausted as e:
        exp = e.expansion
    out["convergents"] = [list(pq) for pq in exp.convergents()] if exp else []
    return out, 0


def cmd_predict(args) -> tuple[dict, int]:
    S = load_surface(args.surface)
    d = parse_direction(args.direction)
    return {"surface": args.surface, "direction": args.direction,
            "prediction": beck_chen_predict(S, d.slope, args.depth)}, 0


def cmd_verify(args) -> tuple[dict, int]:
    cfg = ScenarioConfig(args.surface, args.direction, tuple(_horizons(args.T)), args.t_max, args.dt,
                         args.c_cap, args.seed, args.out, args.h)
    rep = verify_theorem(cfg)
    if args.out:
        emit_reports(rep, args.out)
    return rep.to_json_dict(), 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superdense", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext, *flags):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--surface", default="torus", help="built-in name or surface JSON path")
        if "direction" in flags:
            p.add_argument("--direction", default="phi", help="slope name, p/q, 'vertical' or 'a,b'")
        if "h" in flags:
            p.add_argument("--h", type=float, default=None, help="mesh spacing")
        if "seed" in flags:
            p.add_argument("--seed", type=int, default=0)
        if "out" in flags:
            p.add_argument("--out", default=None)
        if "track" in flags:
            p.add_argument("--t-max", type=float, default=5.0)
            p.add_argument("--dt", type=float, default=0.25)
        if "density" in flags:
            p.add_argument("--T", nargs="+", default=["4,8,16,32"], help="horizons, e.g. 4 8 16 or 4,8,16")
            p.add_argument("--c-cap", type=float, default=100.0)
        if "depth" in flags:
            p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
        p.set_defaults(fn=fn)
        return p

    add("validate", cmd_validate, "check a surface")
    add("metrics", cmd_metrics, "diameter and systole", "h")
    fl = add("flow", cmd_flow, "trace a straight-line trajectory", "direction", "seed", "out")
    fl.add_argument("--length", type=float, default=10.0)
    fl.add_argument("--start", default=None, help="face,x,y in that face's chart")
    add("geodesic-track", cmd_track, "diameters along the Teichmuller geodesic", "direction", "h", "out", "track")
    add("density", cmd_density, "superdensity constant per horizon", "direction", "h", "seed", "out", "density")
    cf = add("cf", cmd_cf, "continued fraction of a slope", "direction", "depth")
    cf.add_argument("--bound", type=int, default=DEFAULT_BOUND)
    add("predict", cmd_predict, "superdensity prediction on square-tiled surfaces", "direction", "depth")
    add("verify-theorem", cmd_verify, "run both sides and compare", "direction", "h", "seed", "out", "track",
        "density")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out, code = args.fn(args)
    except (SuperdenseError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(_emit(out))
    return code


if __name__ == "__main__":
    sys.exit(main())
