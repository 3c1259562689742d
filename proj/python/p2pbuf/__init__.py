"""Buffer sizing for mesh-based P2P live streaming.

Thin wrapper over the C++ core: mean-field occupancy profiles, fluid closed
forms, analytical bounds, the slotted-time simulator and minimum-buffer search.
"""

from ._core import (  # noqa: F401
    ConvergenceError,
    EmptySet,
    Error,
    InvalidArgument,
    SimResult,
    UnreachableTarget,
    greedy_fluid_size_lower,
    greedy_fluid_size_upper,
    greedy_lower_bound,
    greedy_profile,
    hybrid_context,
    hybrid_profile,
    hybrid_sufficient_size,
    min_buffer,
    rarest_first_fluid_size,
    rarest_first_lower_bound,
    rarest_first_profile,
    residual,
    run_churn,
    run_fixed,
    select_chunk,
    sweep,
    threshold_above,
    threshold_below,
    universal_lower_bound,
)

__version__ = "0.1.0"
