"""NK-style performance landscapes with correlated shocks.

A landscape holds, for every task, a lookup table of performance
contributions indexed by the task's own decision bit and the decision bits
it depends on. Shocks redraw every table entry so that the new entries have
a controlled Pearson correlation with the old ones.
"""

import math
from dataclasses import dataclass

import numpy as np

BUILTIN_PATTERNS = ("modular", "non-modular")
GLOBAL_MAX_GUARD = 25  # exhaustive scan refuses beyond 2^25 configurations


class InteractionPattern:
    """Which decisions feed each task's performance contribution.

    ``depends[i, j]`` is true iff the contribution of task ``i`` depends on
    decision ``j``. The diagonal is always true: a task's own decision
    always matters.
    """

    def __init__(self, depends):
        depends = np.array(depends, dtype=bool)
        if depends.ndim != 2 or depends.shape[0] != depends.shape[1]:
            raise ValueError(f"dependency matrix must be square, got shape {depends.shape}")
        n = depends.shape[0]
        if not depends[np.diag_indices(n)].all():
            raise ValueError("every task must depend on its own decision (diagonal must be true)")
        depends.setflags(write=False)
        self.depends = depends
        self.n_tasks = n
        # Off-diagonal dependencies, ascending task index. This order, with
        # the own bit most significant, fixes the table indexing for good.
        self.dependencies = tuple(
            tuple(j for j in range(n) if depends[i, j] and j != i) for i in range(n)
        )

    def table_size(self, i: int) -> int:
        return 1 << (1 + len(self.dependencies[i]))

    def __eq__(self, other):
        return isinstance(other, InteractionPattern) and np.array_equal(self.depends, other.depends)


def load_pattern_file(path) -> InteractionPattern:
    """Read a pattern matrix: first line N, then N rows of N 0/1 entries.

    ``#`` starts a comment; blank lines are skipped. Diagonal entries are
    forced to true on load.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [stripped.split() for line in fh
                 if (stripped := line.split("#", 1)[0].strip())]
    if not lines or len(lines[0]) != 1:
        raise ValueError(f"{path}: first line must hold the task count")
    try:
        n = int(lines[0][0])
    except ValueError:
        raise ValueError(f"{path}: first line must hold the task count") from None
    rows = lines[1:]
    if len(rows) != n or any(len(row) != n for row in rows):
        raise ValueError(f"{path}: expected {n} rows of {n} entries")
    matrix = []
    for row in rows:
        if any(cell not in ("0", "1") for cell in row):
            raise ValueError(f"{path}: entries must be 0 or 1")
        matrix.append([cell == "1" for cell in row])
    for i in range(n):
        matrix[i][i] = True
    return InteractionPattern(matrix)


def build_pattern(kind: str, n_tasks: int, n_agents: int, source=None) -> InteractionPattern:
    """Construct an interaction pattern.

    ``modular``: aligned diagonal blocks of size ``n_tasks / n_agents`` with
    full within-block dependence and nothing across blocks.
    ``non-modular``: symmetric long-range couplings, task i depends on
    i±4 and i±5 mod N. The reach of the couplings exceeds any contiguous
    block, so every block allocation leaves each task tied to other
    agents' decisions and no reshuffling can cut all cross-area ties.
    ``custom``: matrix read verbatim from ``source`` (diagonal forced true).

    For very small task counts the non-modular offsets can wrap onto each
    other; coinciding cells merge, which only lowers the effective
    dependency count.
    """
    if kind == "custom":
        if source is None:
            raise ValueError("custom pattern requires a pattern file")
        return load_pattern_file(source)
    if kind not in BUILTIN_PATTERNS:
        raise ValueError(f"unknown pattern kind {kind!r}; expected one of "
                         f"{', '.join(BUILTIN_PATTERNS)} or custom")
    if n_tasks % n_agents != 0:
        raise ValueError(f"built-in patterns need n_agents to divide n_tasks "
                         f"({n_agents} does not divide {n_tasks})")
    n = n_tasks
    depends = np.zeros((n, n), dtype=bool)
    if kind == "modular":
        block = n_tasks // n_agents
        for start in range(0, n, block):
            depends[start:start + block, start:start + block] = True
    else:
        for i in range(n):
            depends[i, i] = True
            for off in (4, 5):
                depends[i, (i - off) % n] = True
                depends[i, (i + off) % n] = True
    return InteractionPattern(depends)


def beta_shape(rho: float) -> float:
    """Shape parameter of the Beta(a, 1) draw that yields correlation rho."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"shock correlation must lie in (-1, 1), got {rho}")
    return 0.5 * (math.sqrt((49.0 + rho) / (1.0 + rho)) - 5.0)


def shock_transform(f, v, w):
    """Map an old contribution f to its shocked value given draws v, w.

    Reflects f around w (or its complement), which keeps the result in
    [0, 1] and makes the new value correlate with the old one at the level
    encoded in w's Beta shape. Works elementwise on arrays.
    """
    return np.where(v < 0.5, np.abs(w - f), 1.0 - np.abs(1.0 - w - f))


@dataclass(frozen=True)
class ShockSample:
    """One (v, w) draw used to re-draw a single contribution value."""

    v: float
    w: float
    a: float

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError(f"Beta shape must be positive, got {self.a}")
        if not (0.0 <= self.v <= 1.0 and 0.0 <= self.w <= 1.0):
            raise ValueError("v and w must lie in [0, 1]")

    def apply(self, f: float) -> float:
        return float(shock_transform(f, self.v, self.w))


class Landscape:
    """Per-task contribution lookup tables over the pattern's dependencies.

    For task ``i`` with dependencies ``(j_1 < j_2 < ...)``, the table index
    of a configuration is ``d_i`` as the most significant bit followed by
    ``d_{j_1}, d_{j_2}, ...``. Instances are treated as immutable; shocks
    produce new landscapes.
    """

    def __init__(self, pattern: InteractionPattern, tables):
        self.pattern = pattern
        tables = [list(map(float, t)) for t in tables]
        if len(tables) != pattern.n_tasks:
            raise ValueError(f"expected {pattern.n_tasks} tables, got {len(tables)}")
        for i, table in enumerate(tables):
            if len(table) != pattern.table_size(i):
                raise ValueError(f"task {i}: table length {len(table)} != {pattern.table_size(i)}")
            if any(not 0.0 <= x <= 1.0 for x in table):
                raise ValueError(f"task {i}: contributions must lie in [0, 1]")
        self.tables = tables
        deps = pattern.dependencies
        # Bit weights for the canonical index: own bit most significant.
        self._own_mult = [1 << len(deps[i]) for i in range(pattern.n_tasks)]
        self._weights = [
            tuple(1 << (len(deps[i]) - 1 - pos) for pos in range(len(deps[i])))
            for i in range(pattern.n_tasks)
        ]

    @property
    def n_tasks(self) -> int:
        return self.pattern.n_tasks

    def contribution(self, config, i: int) -> float:
        """Contribution of task i under the given decision vector."""
        idx = config[i] * self._own_mult[i]
        for j, w in zip(self.pattern.dependencies[i], self._weights[i]):
            if config[j]:
                idx += w
        return self.tables[i][idx]

    def performance(self, config, tasks=None) -> float:
        """Mean contribution over ``tasks`` (all tasks when omitted)."""
        if tasks is None:
            tasks = range(self.pattern.n_tasks)
        total = 0.0
        count = 0
        for i in tasks:
            total += self.contribution(config, i)
            count += 1
        if count == 0:
            raise ValueError("performance over an empty task set is undefined")
        return total / count

    def global_max(self):
        """Exhaustive optimum: (best performance, one attaining config)."""
        n = self.pattern.n_tasks
        if n > GLOBAL_MAX_GUARD:
            raise ValueError(f"exhaustive scan supports at most {GLOBAL_MAX_GUARD} tasks, got {n}")
        codes = np.arange(1 << n, dtype=np.int64)
        bits = [(codes >> j) & 1 for j in range(n)]
        total = np.zeros(1 << n)
        for i in range(n):
            idx = bits[i] * self._own_mult[i]
            for j, w in zip(self.pattern.dependencies[i], self._weights[i]):
                idx = idx + bits[j] * w
            total += np.asarray(self.tables[i])[idx]
        best = int(np.argmax(total))
        config = [(best >> j) & 1 for j in range(n)]
        return float(total[best]) / n, config


def generate_landscape(pattern: InteractionPattern, rng) -> Landscape:
    """Draw every table entry independently uniform on [0, 1].

    Entries are drawn task by task in ascending order, one vector per task,
    so identical stream state yields identical tables.
    """
    tables = [rng.random(pattern.table_size(i)) for i in range(pattern.n_tasks)]
    return Landscape(pattern, tables)


def apply_shock(landscape: Landscape, rho: float, rng) -> Landscape:
    """Redraw all contributions correlated at level rho with the old ones.

    Per task (ascending), draws a vector of v then a vector of w (Beta(a, 1)
    via inverse CDF u^(1/a)) and maps every entry through shock_transform.
    Returns a new landscape sharing the pattern; the input stays untouched.
    """
    a = beta_shape(rho)
    tables = []
    for table in landscape.tables:
        old = np.asarray(table)
        v = rng.random(old.size)
        w = rng.random(old.size) ** (1.0 / a)
        tables.append(shock_transform(old, v, w))
    return Landscape(landscape.pattern, tables)
