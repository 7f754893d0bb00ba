"""Superdensity of translation flows and boundedness of the associated Teichmuller geodesic."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .surface import (  # noqa: F401
    RectangleTable,
    RightTriangleTable,
    SurfacePoint,
    TranslationSurface,
    build_square_tiled,
    build_torus,
    convexified,
    dumps_surface,
    l_surface,
    loads_surface,
    regular_octagon,
    unfold_billiard,
    validate,
)
from .flow import TrajectorySegment, direction_from_slope, trace_flow  # noqa: F401
from .geometry import Measurement, build_mesh, delaunay_triangulate, diameter, systole  # noqa: F401
from .moduli import MatrixAction, apply_matrix, boundedness_diagnostic, geodesic_track, renormalize  # noqa: F401
from .density import (  # noqa: F401
    covering_radius,
    empirical_backward_check,
    lemma_backward_bound,
    lemma_forward_verify,
    superdensity_scan,
)
from .diophantine import beck_chen_predict, continued_fraction, is_badly_approximable  # noqa: F401
from .experiments import ScenarioConfig, emit_reports, load_surface, verify_theorem  # noqa: F401
