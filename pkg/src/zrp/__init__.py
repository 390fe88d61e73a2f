"""Bound and resonance states of a 2D electron at a zero-range impurity in
crossed magnetic and electric fields.

The central object is the renormalized denominator D(E) of the impurity
Green's function; its zeros in the complex scaled-energy plane are the bound
states (real) and resonances (Im E < 0).
"""

from .denominator import (
    Contour,
    DenomResult,
    QuadOptions,
    build_contour,
    d_field,
    d_free,
    d_zero_field,
    phase_phi,
    tail_sum,
)
from .errors import (
    AccuracyError,
    ConvergenceError,
    DegenerateError,
    DomainError,
    DomainExitError,
    FieldTooWeakError,
    InfiniteLifetimeError,
    LandauPoleError,
    PoleError,
    ScanError,
    ZrpError,
)
from .rootfind import (
    RootResult,
    SolveOptions,
    grid_scan,
    newton_complex,
    solve_fixed_im,
    zero_field_roots,
)
from .specfun import EULER_GAMMA, SeriesResult, digamma, landau_series
from .trace import (
    Branch,
    BranchPoint,
    census,
    compare_sheets,
    field_zero_limits,
    lifetime_profile,
    max_field,
    trace_fixed_ebind,
    trace_fixed_im,
    trace_locus,
)
from .units import (
    MaterialParams,
    PhysicalScenario,
    ScaledPoint,
    cyclotron_frequency,
    from_scaled,
    realize_scenario,
    to_scaled,
)

__version__ = "0.1.0"
