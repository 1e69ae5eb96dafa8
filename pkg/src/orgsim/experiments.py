"""Scenario grid, aggregation, significance tests, and results rendering."""

import csv
import io
import json
import math
import os
from collections import namedtuple
from dataclasses import dataclass

from .simulation import ScenarioConfig, simulate_run

DEFAULT_AXES = {
    "rho": (0.5, -0.5),
    "pattern": ("modular", "non-modular"),
    "gamma": (0.0, 1.0),
    "lam": (0.33, 1.0),
    "mode": ("bottom-up", "top-down"),
}

RHO_NAMES = {0.5: "positive", -0.5: "negative"}
GAMMA_NAMES = {0.0: "mirroring", 1.0: "utility"}
LAM_NAMES = {0.33: "altruistic", 1.0: "individual"}

LabeledScenario = namedtuple("LabeledScenario", ["label", "config"])


def _rho_name(rho):
    return RHO_NAMES.get(rho, f"rho{rho:+g}")


def _alloc_name(mode, gamma):
    if mode == "top-down":
        return "benchmark"
    return GAMMA_NAMES.get(gamma, f"gamma{gamma:g}")


def _lam_name(lam):
    return LAM_NAMES.get(lam, f"lambda{lam:g}")


def scenario_label(config: ScenarioConfig) -> str:
    """Directory-safe name: shock sign, pattern, allocation mode, incentive."""
    return "-".join([
        _rho_name(config.rho),
        config.pattern,
        _alloc_name(config.mode, config.gamma),
        _lam_name(config.lam),
    ])


def build_grid(axes=None, **shared):
    """The scenario grid: bottom-up block first, then top-down benchmarks.

    ``axes`` may restrict any of rho / pattern / gamma / lam / mode to a
    subset (or to other legal values); ``shared`` fields (seed, runs,
    horizon, switches, ...) are passed through to every ScenarioConfig.
    Defaults give 16 bottom-up + 8 benchmark scenarios.
    """
    merged = dict(DEFAULT_AXES)
    for key, values in (axes or {}).items():
        if key not in DEFAULT_AXES:
            raise ValueError(f"unknown grid axis {key!r}; expected one of "
                             f"{', '.join(DEFAULT_AXES)}")
        values = tuple(values)
        if not values:
            raise ValueError(f"grid axis {key!r} must keep at least one value")
        merged[key] = values
    grid = []
    seen = set()
    if "bottom-up" in merged["mode"]:
        for rho in merged["rho"]:
            for pattern in merged["pattern"]:
                for gamma in merged["gamma"]:
                    for lam in merged["lam"]:
                        config = ScenarioConfig(mode="bottom-up", rho=rho, pattern=pattern,
                                                gamma=gamma, lam=lam, **shared)
                        grid.append(LabeledScenario(scenario_label(config), config))
    if "top-down" in merged["mode"]:
        for rho in merged["rho"]:
            for pattern in merged["pattern"]:
                for lam in merged["lam"]:
                    config = ScenarioConfig(mode="top-down", rho=rho, pattern=pattern,
                                            gamma=0.0, lam=lam, **shared)
                    grid.append(LabeledScenario(scenario_label(config), config))
    for label, _ in grid:
        if label in seen:
            raise ValueError(f"grid produced duplicate scenario label {label!r}")
        seen.add(label)
    return grid


@dataclass
class RunSummary:
    """Anchor-period values of one run (what runs.csv persists)."""

    run_index: int
    seed: int
    anchors: tuple  # normalized performance at the four anchor periods


@dataclass
class ScenarioResult:
    """One scenario's aggregate: per-run summaries plus the mean series."""

    label: str
    config: ScenarioConfig
    summaries: list
    series: list | None = None  # mean normalized per period; None when reloaded

    def mean_anchor(self, k: int) -> float:
        if not self.summaries:
            raise ValueError("no runs to average")
        return sum(s.anchors[k] for s in self.summaries) / len(self.summaries)

    def delta_samples(self) -> list:
        """Per-run shock drop: normalized post-shock minus pre-shock."""
        return [s.anchors[1] - s.anchors[0] for s in self.summaries]


def simulate_one(job):
    """Worker entry point: one run, reduced to what aggregation needs."""
    config, run_index = job
    trace = simulate_run(config, run_index)
    anchors = tuple(trace.normalized[p] for p in config.anchor_periods)
    return run_index, trace.seed, anchors, trace.normalized


def run_scenario(config: ScenarioConfig, label=None, pool=None, chunksize=1) -> ScenarioResult:
    """Execute all runs of one scenario (serially or on an executor pool).

    Results are folded in ascending run order whatever the completion
    order, so outputs are identical for any worker count.
    """
    if label is None:
        label = scenario_label(config)
    jobs = [(config, r) for r in range(config.runs)]
    if pool is None:
        outputs = [simulate_one(job) for job in jobs]
    else:
        outputs = list(pool.map(simulate_one, jobs, chunksize=chunksize))
    outputs.sort(key=lambda out: out[0])
    series = [0.0] * (config.horizon + 1)
    summaries = []
    for run_index, seed, anchors, normalized in outputs:
        summaries.append(RunSummary(run_index, seed, anchors))
        for t, value in enumerate(normalized):
            series[t] += value
    series = [value / config.runs for value in series]
    return ScenarioResult(label, config, summaries, series)


def mean_normalized(traces, t: int) -> float:
    """Average normalized performance across runs at period t."""
    if not traces:
        raise ValueError("no runs to average")
    return sum(trace.normalized[t] for trace in traces) / len(traces)


def deltas(series, tau: int, t: int):
    """(absolute, relative) change of the mean series between two periods."""
    diff = series[t] - series[tau]
    return diff, diff / series[tau]


# --- significance tests -------------------------------------------------
# p-values come from the regularized incomplete beta function, evaluated
# with a modified-Lentz continued fraction; no statistics package needed at
# runtime (one is used as an oracle in the tests).

TTestResult = namedtuple("TTestResult", ["statistic", "df", "pvalue", "degenerate"])


def _betacf(a, b, x, max_iter=300, eps=3e-14):
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for T Student-distributed with df degrees of freedom."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t))


def _mean_var(values):
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, var


def t_test_independent(sample_a, sample_b, equal_var=True) -> TTestResult:
    """Two-sample t-test, pooled variance by default (Welch behind the flag).

    Zero-variance degenerate inputs resolve by convention: equal means give
    p=1, unequal means p=0, both flagged.
    """
    na, nb = len(sample_a), len(sample_b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least two values")
    mean_a, var_a = _mean_var(sample_a)
    mean_b, var_b = _mean_var(sample_b)
    if equal_var:
        df = na + nb - 2.0
        pooled = ((na - 1) * var_a + (nb - 1) * var_b) / df
        se = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    else:
        se = math.sqrt(var_a / na + var_b / nb)
        df = na + nb - 2.0  # replaced below when the variances allow it
        if se > 0.0:
            df = (var_a / na + var_b / nb) ** 2 / (
                (var_a / na) ** 2 / (na - 1) + (var_b / nb) ** 2 / (nb - 1))
    if se == 0.0:
        if mean_a == mean_b:
            return TTestResult(0.0, df, 1.0, True)
        return TTestResult(math.copysign(math.inf, mean_a - mean_b), df, 0.0, True)
    statistic = (mean_a - mean_b) / se
    return TTestResult(statistic, df, student_t_two_sided_p(statistic, df), False)


def t_test_paired(before, after) -> TTestResult:
    """One-sample t-test on paired differences (after minus before)."""
    if len(before) != len(after):
        raise ValueError(f"paired samples must match in length, "
                         f"got {len(before)} and {len(after)}")
    n = len(before)
    if n < 2:
        raise ValueError("paired test needs at least two pairs")
    diffs = [a - b for b, a in zip(before, after)]
    mean, var = _mean_var(diffs)
    df = n - 1.0
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, df, 1.0, True)
        return TTestResult(math.copysign(math.inf, mean), df, 0.0, True)
    statistic = mean / math.sqrt(var / n)
    return TTestResult(statistic, df, student_t_two_sided_p(statistic, df), False)


def star(pvalue: float) -> str:
    if pvalue <= 0.01:
        return "**"
    if pvalue <= 0.05:
        return "*"
    return "n.s."


# --- table rendering ----------------------------------------------------

TABLE2_HEADER = ["shock", "pattern", "reallocation", "incentive",
                 "p50", "p51", "delta_50_51",
                 "benchmark_p50", "benchmark_p51", "benchmark_delta_50_51",
                 "significance"]
TABLE3_HEADER = ["shock", "pattern", "reallocation", "incentive",
                 "p50", "p100", "rel_50_100", "sig_100",
                 "p200", "rel_50_200", "sig_200"]


def _benchmark_key(config):
    return (config.rho, config.pattern, config.lam)


def _split_results(results):
    bottom_up = [r for r in results if r.config.mode == "bottom-up"]
    benchmarks = {_benchmark_key(r.config): r for r in results
                  if r.config.mode == "top-down"}
    return bottom_up, benchmarks


def _require_benchmark(benchmarks, result):
    key = _benchmark_key(result.config)
    if key not in benchmarks:
        raise ValueError(f"incomplete grid: no benchmark scenario matches {result.label!r} "
                         f"(rho={result.config.rho}, pattern={result.config.pattern}, "
                         f"lambda={result.config.lam})")
    return benchmarks[key]


def _name_cells(result):
    c = result.config
    return [_rho_name(c.rho), c.pattern, _alloc_name(c.mode, c.gamma), _lam_name(c.lam)]


def _table2_rows(results):
    bottom_up, benchmarks = _split_results(results)
    rows = []
    for result in bottom_up:
        bench = _require_benchmark(benchmarks, result)
        p50, p51 = result.mean_anchor(0), result.mean_anchor(1)
        b50, b51 = bench.mean_anchor(0), bench.mean_anchor(1)
        test = t_test_independent(result.delta_samples(), bench.delta_samples())
        rows.append(_name_cells(result) + [
            f"{p50:.3f}", f"{p51:.3f}", f"{p51 - p50:+.3f}",
            f"{b50:.3f}", f"{b51:.3f}", f"{b51 - b50:+.3f}",
            star(test.pvalue),
        ])
    return rows


def _table3_rows(results):
    # bottom-up section first, then benchmarks, each in grid order
    ordered = ([r for r in results if r.config.mode == "bottom-up"]
               + [r for r in results if r.config.mode == "top-down"])
    rows = []
    for result in ordered:
        p50, p100, p200 = (result.mean_anchor(0), result.mean_anchor(2),
                           result.mean_anchor(3))
        before = [s.anchors[0] for s in result.summaries]
        test100 = t_test_paired(before, [s.anchors[2] for s in result.summaries])
        test200 = t_test_paired(before, [s.anchors[3] for s in result.summaries])
        rows.append(_name_cells(result) + [
            f"{p50:.3f}",
            f"{p100:.3f}", f"{(p100 - p50) / p50:+.2%}", star(test100.pvalue),
            f"{p200:.3f}", f"{(p200 - p50) / p50:+.2%}", star(test200.pvalue),
        ])
    return rows


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _md_text(header, rows):
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join(" --- " for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(str(cell) for cell in row) + " |")
    return "\n".join(lines) + "\n"


def render_tables(results) -> dict:
    """Render the absorb and recover tables as CSV and markdown texts.

    ``results``: iterable of ScenarioResult covering every bottom-up
    scenario together with its top-down benchmark (same rho, pattern,
    lambda). Returns {filename: content}. Benchmark columns in the absorb
    table are read from the one shared benchmark aggregate.
    """
    results = list(results)
    rows2 = _table2_rows(results)
    rows3 = _table3_rows(results)
    return {
        "table2.csv": _csv_text(TABLE2_HEADER, rows2),
        "table2.md": _md_text(TABLE2_HEADER, rows2),
        "table3.csv": _csv_text(TABLE3_HEADER, rows3),
        "table3.md": _md_text(TABLE3_HEADER, rows3),
    }


# --- results directory --------------------------------------------------

def write_scenario(out_dir: str, result: ScenarioResult) -> None:
    """Write <out>/<label>/runs.csv and series.csv at full float precision."""
    folder = os.path.join(out_dir, result.label)
    os.makedirs(folder, exist_ok=True)
    with open(os.path.join(folder, "runs.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run", "seed", "p50", "p51", "p100", "p200"])
        for s in result.summaries:
            writer.writerow([s.run_index, s.seed] + [repr(v) for v in s.anchors])
    if result.series is not None:
        with open(os.path.join(folder, "series.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "mean_normalized"])
            for t, value in enumerate(result.series):
                writer.writerow([t, repr(value)])


def build_manifest(grid, master_seed: int) -> dict:
    from . import __version__

    scenarios = []
    for label, config in grid:
        entry = {"label": label}
        entry.update({
            "mode": config.mode, "rho": config.rho, "pattern": config.pattern,
            "pattern_file": config.pattern_file, "gamma": config.gamma,
            "lam": config.lam, "n_tasks": config.n_tasks, "n_agents": config.n_agents,
            "capacity": config.capacity, "realloc_interval": config.realloc_interval,
            "shock_period": config.shock_period, "horizon": config.horizon,
            "runs": config.runs, "master_seed": config.master_seed,
            "belief_update": config.belief_update, "search": config.search,
            "realloc_position": config.realloc_position,
            "shock_enabled": config.shock_enabled,
            "anchors": list(config.anchor_periods),
        })
        scenarios.append(entry)
    return {
        "master_seed": master_seed,
        "code_version": __version__,
        "scenarios": scenarios,
    }


def write_manifest(out_dir: str, manifest: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_tables(out_dir: str, results) -> None:
    for name, content in render_tables(results).items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(content)


def load_results(out_dir: str):
    """Re-load persisted scenario results for re-rendering; never simulates.

    Requires manifest.json plus every scenario's runs.csv; raises
    FileNotFoundError with a pointed message otherwise.
    """
    manifest_path = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"{manifest_path} not found; run a sweep first")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    results = []
    for entry in manifest["scenarios"]:
        label = entry["label"]
        config = ScenarioConfig(**{k: v for k, v in entry.items()
                                   if k not in ("label", "anchors")})
        runs_path = os.path.join(out_dir, label, "runs.csv")
        if not os.path.exists(runs_path):
            raise FileNotFoundError(f"{runs_path} not found; run a sweep first")
        summaries = []
        with open(runs_path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                summaries.append(RunSummary(
                    int(row["run"]), int(row["seed"]),
                    (float(row["p50"]), float(row["p51"]),
                     float(row["p100"]), float(row["p200"])),
                ))
        summaries.sort(key=lambda s: s.run_index)
        results.append(ScenarioResult(label, config, summaries, None))
    return results, manifest
