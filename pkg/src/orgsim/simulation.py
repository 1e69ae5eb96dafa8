"""Single-run orchestration: timeline, shock event, reallocation, tracing."""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .landscape import apply_shock, build_pattern, generate_landscape
from .organization import (
    BELIEF_UPDATE_MODES,
    SEARCH_MODES,
    BeliefState,
    OrgState,
    agent_search_step,
    top_down_allocation,
    update_beliefs,
)
from .reallocation import reallocation_round

MODES = ("top-down", "bottom-up")
PATTERN_KINDS = ("modular", "non-modular", "custom")
REALLOC_POSITIONS = ("before_search", "after_search")


@dataclass(frozen=True)
class ScenarioConfig:
    """All parameters of one scenario. Frozen; validated on construction."""

    mode: str = "top-down"
    rho: float = 0.5
    pattern: str = "modular"
    pattern_file: str | None = None
    gamma: float = 0.0
    lam: float = 1.0
    n_tasks: int = 15
    n_agents: int = 5
    capacity: int = 7
    realloc_interval: int = 20
    shock_period: int = 50
    horizon: int = 200
    runs: int = 600
    master_seed: int = 42
    belief_update: str = "per_bit"
    search: str = "single_flip"
    realloc_position: str = "before_search"
    shock_enabled: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.pattern not in PATTERN_KINDS:
            raise ValueError(f"pattern must be one of {', '.join(PATTERN_KINDS)}, "
                             f"got {self.pattern!r}")
        if self.pattern == "custom" and not self.pattern_file:
            raise ValueError("custom pattern requires pattern_file")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        if self.n_agents < 2:
            raise ValueError(f"need at least 2 agents (utility weighs a residual area), "
                             f"got {self.n_agents}")
        if self.n_tasks < self.n_agents or self.n_tasks % self.n_agents != 0:
            raise ValueError(f"n_agents must divide n_tasks, got {self.n_tasks}/{self.n_agents}")
        if self.capacity < 1:
            raise ValueError(f"capacity must be at least 1, got {self.capacity}")
        if self.mode == "bottom-up" and self.capacity < self.n_tasks // self.n_agents:
            raise ValueError(f"capacity {self.capacity} below the initial area size "
                             f"{self.n_tasks // self.n_agents}")
        if self.realloc_interval < 1:
            raise ValueError(f"realloc_interval must be at least 1, got {self.realloc_interval}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")
        if not 0 <= self.shock_period < self.horizon:
            raise ValueError(f"shock_period must lie in [0, horizon), got {self.shock_period} "
                             f"with horizon {self.horizon}")
        if self.runs < 1:
            raise ValueError(f"runs must be at least 1, got {self.runs}")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError(f"master seed must fit in 64 bits, got {self.master_seed}")
        if self.belief_update not in BELIEF_UPDATE_MODES:
            raise ValueError(f"belief_update must be one of {', '.join(BELIEF_UPDATE_MODES)}, "
                             f"got {self.belief_update!r}")
        if self.search not in SEARCH_MODES:
            raise ValueError(f"search must be one of {', '.join(SEARCH_MODES)}, "
                             f"got {self.search!r}")
        if self.realloc_position not in REALLOC_POSITIONS:
            raise ValueError(f"realloc_position must be one of {', '.join(REALLOC_POSITIONS)}, "
                             f"got {self.realloc_position!r}")

    @property
    def scenario_id(self) -> str:
        """Canonical string of every parameter that shapes a run's dynamics.

        Horizon, run count, and master seed are deliberately excluded: the
        random stream of a run depends only on the physics, so shorter
        horizons give prefixes of longer traces and adding runs never
        reshuffles existing ones.
        """
        return "|".join([
            self.mode,
            self.pattern,
            self.pattern_file or "-",
            f"rho={self.rho!r}",
            f"gamma={self.gamma!r}",
            f"lambda={self.lam!r}",
            f"n={self.n_tasks}",
            f"m={self.n_agents}",
            f"cap={self.capacity}",
            f"tau={self.realloc_interval}",
            f"shock={self.shock_period}" if self.shock_enabled else "shock=off",
            self.belief_update,
            self.search,
            self.realloc_position,
        ])

    @property
    def anchor_periods(self):
        """Reporting anchors: pre-shock, post-shock, mid recovery, end."""
        s = self.shock_period
        return (s, s + 1, min(2 * s, self.horizon), self.horizon)


def _seed_sequence(master_seed, scenario_id, run_index):
    digest = hashlib.sha256(scenario_id.encode("utf-8")).digest()
    hi = int.from_bytes(digest[:4], "big")
    lo = int.from_bytes(digest[4:8], "big")
    return np.random.SeedSequence(entropy=int(master_seed),
                                  spawn_key=(hi, lo, int(run_index)))


def derive_stream(master_seed, scenario_id, run_index):
    """Independent, reproducible random stream for one (scenario, run) pair.

    The scenario id is hashed into the seed-sequence spawn key together
    with the run index, so streams never collide across scenarios or runs
    and stay stable across releases.
    """
    return np.random.default_rng(_seed_sequence(master_seed, scenario_id, run_index))


def derive_seed(master_seed, scenario_id, run_index) -> int:
    """64-bit bookkeeping word identifying the stream (recorded in runs.csv)."""
    return int(_seed_sequence(master_seed, scenario_id, run_index)
               .generate_state(1, np.uint64)[0])


@dataclass
class RunTrace:
    """Per-period record of one run."""

    run_index: int
    seed: int
    raw: list = field(default_factory=list)         # organizational performance
    pmax: list = field(default_factory=list)        # optimum in force
    normalized: list = field(default_factory=list)  # raw / pmax
    events: list = field(default_factory=list)      # (t, kind, *details)


def simulate_run(config: ScenarioConfig, run_index: int) -> RunTrace:
    """Execute one run; a deterministic function of (config, run_index).

    Timeline: period 0 draws the landscape and a uniform random decision
    vector, assigns contiguous equal areas (both modes start identically),
    and records. Each later period, in order: bottom-up reallocation when
    the period is a multiple of the interval (when configured before
    search), the one-off shock at shock_period + 1 (new landscape and new
    optimum before any decisions, so the shock-period recording is
    pre-shock and the next one post-shock), simultaneous single-agent
    search steps against the frozen previous vector, composition of the new
    vector, belief updates from own-area contribution changes, recording.
    """
    rng = derive_stream(config.master_seed, config.scenario_id, run_index)
    seed_word = derive_seed(config.master_seed, config.scenario_id, run_index)
    n = config.n_tasks

    pattern = build_pattern(config.pattern, n, config.n_agents, config.pattern_file)
    landscape = generate_landscape(pattern, rng)
    pmax, _ = landscape.global_max()
    vector = [int(b) for b in rng.integers(0, 2, n)]
    state = OrgState(
        config=vector,
        previous=list(vector),
        allocation=top_down_allocation(n, config.n_agents),
        beliefs=[BeliefState(n) for _ in range(config.n_agents)],
    )

    trace = RunTrace(run_index=run_index, seed=seed_word)
    observed = [landscape.contribution(vector, i) for i in range(n)]
    trace.raw.append(sum(observed) / n)
    trace.pmax.append(pmax)
    trace.normalized.append(trace.raw[0] / pmax)

    bottom_up = config.mode == "bottom-up"
    for t in range(1, config.horizon + 1):
        state.period = t
        realloc_due = bottom_up and t % config.realloc_interval == 0

        if realloc_due and config.realloc_position == "before_search":
            _run_reallocation(landscape, state, config, rng, trace, t)

        if config.shock_enabled and t == config.shock_period + 1:
            landscape = apply_shock(landscape, config.rho, rng)
            pmax, _ = landscape.global_max()
            trace.events.append((t, "shock", config.rho))
            # beliefs compare against what agents saw at t-1, on the old
            # terrain; those stored values stay as observed

        previous = state.config
        moves = [
            agent_search_step(landscape, state, m, config.lam, rng, config.search)
            for m in range(config.n_agents)
        ]
        vector = list(previous)
        for move in moves:
            for task, bit in move.items():
                vector[task] = bit
        state.previous = previous
        state.config = vector

        if realloc_due and config.realloc_position == "after_search":
            _run_reallocation(landscape, state, config, rng, trace, t)

        contribs = [landscape.contribution(vector, i) for i in range(n)]
        for m in range(config.n_agents):
            area = state.allocation.area(m)
            update_beliefs(
                state.beliefs[m],
                vector,
                previous,
                {i: contribs[i] for i in area},
                {i: observed[i] for i in area},
                config.belief_update,
            )
        observed = contribs

        trace.raw.append(sum(contribs) / n)
        trace.pmax.append(pmax)
        trace.normalized.append(trace.raw[-1] / pmax)

    return trace


def _run_reallocation(landscape, state, config, rng, trace, t):
    allocation, board = reallocation_round(
        landscape, state, config.gamma, config.lam, config.capacity, rng)
    for m, task in board.offers:
        trace.events.append((t, "offer", m, task))
    for task, src, dst in board.transfers:
        trace.events.append((t, "transfer", task, src, dst))
    state.allocation = allocation
