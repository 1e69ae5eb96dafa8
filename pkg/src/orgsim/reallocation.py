"""Bottom-up task reallocation: offers, noisy signals, capacity-checked transfers.

Periodically, every agent holding more than one task puts one of them up
for transfer. Agents with spare capacity bid for offered tasks with noisy
signals, the current owner bids to retain, and each task goes to the
strongest bidder that still has room.
"""

from dataclasses import dataclass, field

from .organization import Allocation

SIGNAL_NOISE_SD = 0.1  # standard deviation of the bid noise (variance 0.01)


@dataclass
class OfferBoard:
    """Everything one reallocation round produced, for event logs and tests."""

    offers: list = field(default_factory=list)     # (offering agent, task)
    signals: dict = field(default_factory=dict)    # (task, agent) -> signal value
    epsilons: dict = field(default_factory=dict)   # (task, agent) -> noise draw
    transfers: list = field(default_factory=list)  # (task, from agent, to agent)


def _split_utility(landscape, own, rest, config, lam):
    # Utility over explicit own/residual sets (reallocation evaluates
    # hypothetical set changes that no Allocation object exists for).
    if lam == 1.0:
        return landscape.performance(config, own)
    return (lam * landscape.performance(config, own)
            + (1.0 - lam) * landscape.performance(config, rest))


def drop_gain(landscape, allocation, m, task, config, lam):
    """Utility change for agent m from handing ``task`` over to the residual."""
    own = allocation.area(m)
    if task not in own:
        raise ValueError(f"agent {m} does not own task {task}")
    before = _split_utility(landscape, own, allocation.residual(m), config, lam)
    own_after = tuple(i for i in own if i != task)
    rest_after = tuple(sorted(allocation.residual(m) + (task,)))
    after = _split_utility(landscape, own_after, rest_after, config, lam)
    return after - before


def coupling_score(beliefs, area, task):
    """Believed interdependence between ``task`` and the tasks in ``area``.

    Sum of the posterior-mean beliefs that each area task's contribution
    reacts to ``task``'s decision; ``task`` itself is skipped when it sits
    inside the area, so the score works both for own and for externally
    offered tasks.
    """
    if not area:
        raise ValueError("coupling over an empty area is undefined")
    return sum(beliefs.mean(j, task) for j in area if j != task)


def select_offer(landscape, state, m, gamma, lam, rng):
    """The task agent m puts up for transfer, or None when it holds only one.

    Picks the own task minimizing gamma * (1 - drop_gain) + (1 - gamma) *
    coupling_score — cheap to give up and believed weakly coupled to the
    rest of the area. Exact score ties break uniformly at random.
    """
    allocation = state.allocation
    own = allocation.area(m)
    if len(own) < 2:
        return None
    beliefs = state.beliefs[m]
    scores = []
    for i in own:
        if gamma == 0.0:
            score = coupling_score(beliefs, own, i)
        elif gamma == 1.0:
            score = 1.0 - drop_gain(landscape, allocation, m, i, state.config, lam)
        else:
            score = (gamma * (1.0 - drop_gain(landscape, allocation, m, i, state.config, lam))
                     + (1.0 - gamma) * coupling_score(beliefs, own, i))
        scores.append(score)
    best = min(scores)
    tied = [i for i, s in zip(own, scores) if s == best]
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def acquire_gain(landscape, allocation, m, task, config, lam, epsilon):
    """Noisy utility change for agent m from taking ``task`` over.

    When m already owns the task, the before/after sets coincide and the
    result is exactly the noise draw — that is the owner's retention bid.
    """
    own = allocation.area(m)
    if task in own:
        return epsilon
    before = _split_utility(landscape, own, allocation.residual(m), config, lam)
    own_after = tuple(sorted(own + (task,)))
    rest_after = tuple(i for i in allocation.residual(m) if i != task)
    after = _split_utility(landscape, own_after, rest_after, config, lam)
    return after - before + epsilon


def signal_for_task(gamma, utility_gain, coupling):
    """Bid strength: gamma weighs the noisy utility gain, 1 - gamma the coupling."""
    return gamma * utility_gain + (1.0 - gamma) * coupling


def reallocation_round(landscape, state, gamma, lam, capacity, rng):
    """One offer/signal/transfer pass; returns (new Allocation, OfferBoard).

    Protocol: (1) every agent with at least two tasks posts one offer;
    (2) for each offered task, every other agent below capacity bids with a
    fresh noise draw, and the owner always bids to retain (its utility term
    collapses to the noise); (3) tasks resolve in descending order of their
    strongest bid — a task moves to its strongest bidder that still has
    room, capacity being re-checked as this round's transfers accumulate,
    and stays with the owner otherwise; (4) exact bid ties break uniformly
    at random. The input allocation is never mutated.

    Noise draws happen in a fixed order — offers in agent order, then per
    offered task (in posting order) one draw per bidding agent in agent
    order — so identical streams give identical rounds.
    """
    allocation = state.allocation
    n_agents = allocation.n_agents
    for m in range(n_agents):
        held = len(allocation.area(m))
        if not 1 <= held <= capacity:
            raise ValueError(f"agent {m} holds {held} tasks, outside 1..{capacity}")

    board = OfferBoard()
    for m in range(n_agents):
        task = select_offer(landscape, state, m, gamma, lam, rng)
        if task is not None:
            board.offers.append((m, task))

    config = state.config
    for offerer, task in board.offers:
        for m in range(n_agents):
            if m != offerer and len(allocation.area(m)) >= capacity:
                continue  # no free resources; the owner always bids
            eps = float(rng.normal(0.0, SIGNAL_NOISE_SD))
            if gamma == 0.0:
                gain = eps  # weighted out below; skip the utility arithmetic
            else:
                gain = acquire_gain(landscape, allocation, m, task, config, lam, eps)
            coupling = coupling_score(state.beliefs[m], allocation.area(m), task)
            board.epsilons[(task, m)] = eps
            board.signals[(task, m)] = signal_for_task(gamma, gain, coupling)

    # Resolve offers in descending order of each task's strongest bid
    # (ties in that ordering fall back to ascending task index).
    bids_by_task = {}
    for (task, m), s in board.signals.items():
        bids_by_task.setdefault(task, []).append((s, m))
    order = sorted(board.offers,
                   key=lambda om: (-max(s for s, _ in bids_by_task[om[1]]), om[1]))

    owner = list(allocation.owner)
    sizes = [len(allocation.area(m)) for m in range(n_agents)]
    for _, task in order:
        bids = sorted(bids_by_task[task], key=lambda sm: -sm[0])
        winner = None
        idx = 0
        while idx < len(bids) and winner is None:
            stop = idx
            while stop < len(bids) and bids[stop][0] == bids[idx][0]:
                stop += 1
            group = [m for _, m in bids[idx:stop]]
            while group:
                pick = group.pop(0) if len(group) == 1 else group.pop(int(rng.integers(len(group))))
                if pick == owner[task] or sizes[pick] < capacity:
                    winner = pick
                    break
            idx = stop
        if winner is None or winner == owner[task]:
            continue
        sizes[owner[task]] -= 1
        sizes[winner] += 1
        board.transfers.append((task, owner[task], winner))
        owner[task] = winner

    return Allocation(owner, n_agents), board
