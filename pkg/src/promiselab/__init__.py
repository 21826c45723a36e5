"""Promise graphs, scale composition, state classification and a
deterministic simulator."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Agent,
    Assessment,
    Binding,
    Body,
    ModelValidationError,
    PartitionError,
    Polarity,
    Promise,
    PromiseGraph,
    Resolution,
    SuperAgent,
    Variable,
    Verdict,
    accept,
    bind_promises,
    collapse_assisted,
    offer,
    remove_agent,
    resolve_conditionals,
)
from .scale import (  # noqa: E402
    InvarianceResult,
    Redundancy,
    SharedNothingResult,
    StateClass,
    check_invariant,
    check_redundant,
    check_shared_nothing,
    classify_state,
    compose,
)
