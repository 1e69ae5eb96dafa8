"""Agent-based simulation of organizations searching rugged task landscapes.

Organizations of boundedly rational agents search NK-style performance
landscapes under either a fixed top-down task allocation or a periodic
bottom-up reallocation protocol, and are hit by a correlated environmental
shock partway through. The package reproduces the absorb/recover analysis
from the command line: ``orgsim sweep`` runs the scenario grid and writes
summary tables.
"""

from .landscape import (
    InteractionPattern,
    Landscape,
    apply_shock,
    beta_shape,
    build_pattern,
    generate_landscape,
    load_pattern_file,
)
from .organization import (
    Allocation,
    BeliefState,
    OrgState,
    agent_search_step,
    top_down_allocation,
    update_beliefs,
    utility,
)
from .reallocation import reallocation_round
from .simulation import ScenarioConfig, RunTrace, simulate_run

__version__ = "0.1.0"

__all__ = [
    "InteractionPattern",
    "Landscape",
    "apply_shock",
    "beta_shape",
    "build_pattern",
    "generate_landscape",
    "load_pattern_file",
    "Allocation",
    "BeliefState",
    "OrgState",
    "agent_search_step",
    "top_down_allocation",
    "update_beliefs",
    "utility",
    "reallocation_round",
    "ScenarioConfig",
    "RunTrace",
    "simulate_run",
    "__version__",
]
