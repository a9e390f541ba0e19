"""Equilibrium problems on Hadamard spaces: geometry, bifunctions, resolvents and solvers."""

__version__ = "0.1.0"

from .spaces import (  # noqa: E402
    Euclidean,
    Hyperboloid,
    Kind,
    Point,
    Space,
    SpaceMismatchError,
    StarTree,
    UnsupportedOperationError,
    estimate_asymptotic_center,
)
from .sets import Ball, ConvexSet, InvalidSetError, Segment, Subtree, WholeSpace, project  # noqa: E402
from .axioms import check_cat0_inequality, check_cauchy_schwarz, sweep_axioms  # noqa: E402
from .bifunctions import (  # noqa: E402
    Bifunction,
    Property,
    PropertyReport,
    SamplerConfig,
    check_property,
    frechet_bifunction,
    half_squared_distance,
    make_minimization_bifunction,
    make_vi_bifunction,
    segment_distance_bifunction,
    zero_bifunction,
)
from .resolvent import (  # noqa: E402
    ResolventRequest,
    ResolventResult,
    Strategy,
    check_firmly_nonexpansive,
    residual,
    resolvent_path,
    solve_resolvent,
)
from .solvers import (  # noqa: E402
    IterateTrace,
    Schedule,
    SolveConfig,
    Status,
    fejer_report,
    run_halpern,
    run_ppa,
    run_resolvent_path,
    strong_mode_check,
)
