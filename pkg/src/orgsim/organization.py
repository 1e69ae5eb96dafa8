"""Agents, task ownership, myopic search, and interdependence beliefs."""

from dataclasses import dataclass, field

SEARCH_MODES = ("single_flip", "best_of_neighborhood")
BELIEF_UPDATE_MODES = ("per_bit", "literal")


class Allocation:
    """Assignment of every task to exactly one agent.

    ``owner[i]`` is the agent holding task ``i``. Every agent must hold at
    least one task. Instances are immutable; reallocation builds new ones.
    """

    def __init__(self, owner, n_agents: int):
        owner = tuple(int(m) for m in owner)
        if n_agents < 1:
            raise ValueError(f"need at least one agent, got {n_agents}")
        for i, m in enumerate(owner):
            if not 0 <= m < n_agents:
                raise ValueError(f"task {i} assigned to agent {m}, valid range is 0..{n_agents - 1}")
        self.owner = owner
        self.n_agents = n_agents
        self.n_tasks = len(owner)
        areas = [[] for _ in range(n_agents)]
        for i, m in enumerate(owner):
            areas[m].append(i)
        for m, area in enumerate(areas):
            if not area:
                raise ValueError(f"agent {m} holds no tasks; every agent needs at least one")
        self._areas = tuple(tuple(a) for a in areas)
        all_tasks = range(self.n_tasks)
        self._residuals = tuple(
            tuple(i for i in all_tasks if owner[i] != m) for m in range(n_agents)
        )

    def area(self, m: int):
        """Tasks owned by agent m, ascending."""
        return self._areas[m]

    def residual(self, m: int):
        """Tasks owned by everyone else, ascending."""
        return self._residuals[m]

    def __eq__(self, other):
        return (isinstance(other, Allocation)
                and self.owner == other.owner
                and self.n_agents == other.n_agents)

    def __repr__(self):
        return f"Allocation(owner={self.owner}, n_agents={self.n_agents})"


def top_down_allocation(n_tasks: int, n_agents: int) -> Allocation:
    """Contiguous equal blocks: agent m owns tasks [m*B, (m+1)*B)."""
    if n_tasks % n_agents != 0:
        raise ValueError(f"top-down allocation needs n_agents to divide n_tasks "
                         f"({n_agents} does not divide {n_tasks})")
    block = n_tasks // n_agents
    return Allocation([i // block for i in range(n_tasks)], n_agents)


class BeliefState:
    """Beta-Bernoulli counts over pairwise task interdependence.

    ``alpha[i][j]`` counts observations suggesting task i's contribution
    reacts to decision j; ``beta[i][j]`` counts the opposite. Both start at
    1 (uniform prior). The believed interdependence probability is the
    posterior mean alpha / (alpha + beta).
    """

    def __init__(self, n_tasks: int):
        self.n_tasks = n_tasks
        self.alpha = [[1] * n_tasks for _ in range(n_tasks)]
        self.beta = [[1] * n_tasks for _ in range(n_tasks)]

    def mean(self, i: int, j: int) -> float:
        if i == j:
            raise ValueError("self-dependence is not tracked")
        a = self.alpha[i][j]
        return a / (a + self.beta[i][j])


@dataclass
class OrgState:
    """Mutable per-run state threaded through the simulation loop.

    ``config`` is the latest implemented decision vector (d_{t-1} while
    period t's moves are being chosen), ``previous`` the one before it.
    """

    config: list
    previous: list
    allocation: Allocation
    beliefs: list  # one BeliefState per agent
    period: int = 0
    events: list = field(default_factory=list)


def utility(landscape, allocation: Allocation, m: int, config, lam: float) -> float:
    """Agent m's objective at a standing configuration.

    lam * own-area mean + (1 - lam) * residual-area mean, both evaluated at
    ``config``. At the standing configuration the residual term equals what
    the agent actually observes of everyone else's realized contributions,
    so this is both the true objective and the agent's information set.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"own-performance weight must lie in (0, 1], got {lam}")
    own = landscape.performance(config, allocation.area(m))
    if lam == 1.0:
        return own
    rest = landscape.performance(config, allocation.residual(m))
    return lam * own + (1.0 - lam) * rest


def agent_search_step(landscape, state: OrgState, m: int, lam: float, rng,
                      mode: str = "single_flip") -> dict:
    """Agent m's proposed decision changes for the coming period.

    All agents move simultaneously against the standing vector
    ``state.config``; the returned dict maps task index -> new bit for the
    tasks this agent chooses to change (empty dict keeps the status quo).
    ``single_flip`` evaluates one uniformly chosen own bit; ties keep the
    status quo.

    An agent knows its own lookup tables but can only observe other
    agents' realized contributions, so when it weighs a hypothetical flip
    it re-evaluates its own area and carries the residual area at the last
    observed value. The residual term is therefore the same constant on
    both sides of the comparison, and a flip is accepted exactly when the
    own-area mean strictly improves — the weight ``lam`` shapes what agents
    want from task reallocation, not which of their own bits they flip.
    """
    if mode not in SEARCH_MODES:
        raise ValueError(f"unknown search mode {mode!r}; expected one of {', '.join(SEARCH_MODES)}")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"own-performance weight must lie in (0, 1], got {lam}")
    allocation = state.allocation
    own = allocation.area(m)
    base = landscape.performance(state.config, own)
    if mode == "single_flip":
        flip = own[rng.integers(len(own))]
        candidate = list(state.config)
        candidate[flip] = 1 - candidate[flip]
        if landscape.performance(candidate, own) > base:
            return {flip: candidate[flip]}
        return {}
    # best_of_neighborhood: evaluate each single own-bit flip, keep the best
    # strictly improving one; ties among flips resolve to the lowest index.
    best_gain = 0.0
    best = {}
    for flip in own:
        candidate = list(state.config)
        candidate[flip] = 1 - candidate[flip]
        gain = landscape.performance(candidate, own) - base
        if gain > best_gain:
            best_gain = gain
            best = {flip: candidate[flip]}
    return best


def update_beliefs(beliefs: BeliefState, d_now, d_prev, f_now: dict, f_prev: dict,
                   mode: str = "per_bit") -> None:
    """Reinforce or weaken interdependence beliefs after a period.

    ``f_now``/``f_prev`` map each of the observing agent's own tasks to its
    contribution after/before the move. For every own task i, the belief
    about decision j firms up (alpha + 1) when i's contribution changed and
    decays (beta + 1) when it did not — restricted to the bits j that
    actually changed under ``per_bit``, or applied to every other bit under
    ``literal`` whenever the vector changed at all. No change in the
    decision vector means nothing is learned.
    """
    if mode not in BELIEF_UPDATE_MODES:
        raise ValueError(f"unknown belief update mode {mode!r}; expected one of "
                         f"{', '.join(BELIEF_UPDATE_MODES)}")
    changed = [j for j in range(len(d_now)) if d_now[j] != d_prev[j]]
    if not changed:
        return
    for i, now in f_now.items():
        reacted = now != f_prev[i]
        cols = changed if mode == "per_bit" else range(len(d_now))
        for j in cols:
            if j == i:
                continue
            if reacted:
                beliefs.alpha[i][j] += 1
            else:
                beliefs.beta[i][j] += 1
