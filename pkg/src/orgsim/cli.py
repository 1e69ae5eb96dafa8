"""Command-line interface: runs, sweeps, reports, validation, inspection.

Configuration is a flat ``key = value`` text file (``#`` comments allowed).
Axis keys (rho, pattern, gamma, lambda, mode) accept one or more values and
span the scenario grid; scalar keys set shared parameters. One level of
``[scenario-label]`` sections overrides fields of a single grid scenario.
Flags override file values; ``ORGSIM_OUT`` supplies the output directory
when neither flag nor file does.
"""

import argparse
import csv
import dataclasses
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .experiments import (
    build_grid,
    build_manifest,
    load_results,
    run_scenario,
    write_manifest,
    write_scenario,
    write_tables,
)
from .landscape import (
    InteractionPattern,
    beta_shape,
    build_pattern,
    generate_landscape,
    shock_transform,
)
from .simulation import ScenarioConfig, derive_stream, simulate_run

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2

AXIS_KEYS = ("rho", "pattern", "gamma", "lambda", "mode")
# config key -> (ScenarioConfig field, parser)
FIELD_KEYS = {
    "rho": ("rho", float),
    "pattern": ("pattern", str),
    "gamma": ("gamma", float),
    "lambda": ("lam", float),
    "mode": ("mode", str),
    "pattern_file": ("pattern_file", str),
    "n_tasks": ("n_tasks", int),
    "n_agents": ("n_agents", int),
    "capacity": ("capacity", int),
    "realloc_interval": ("realloc_interval", int),
    "shock_period": ("shock_period", int),
    "horizon": ("horizon", int),
    "runs": ("runs", int),
    "seed": ("master_seed", int),
    "belief_update": ("belief_update", str),
    "search": ("search", str),
    "realloc_position": ("realloc_position", str),
    "shock": ("shock_enabled", None),  # boolean, parsed specially
}
SETTING_KEYS = ("out", "workers")
BOOL_WORDS = {"on": True, "true": True, "yes": True, "1": True,
              "off": False, "false": False, "no": False, "0": False}


class ConfigError(Exception):
    pass


def _parse_bool(text, where):
    try:
        return BOOL_WORDS[text.lower()]
    except KeyError:
        raise ConfigError(f"{where}: expected on/off, got {text!r}") from None


def _parse_scalar(key, text, where):
    field, conv = FIELD_KEYS[key]
    if conv is None:
        return field, _parse_bool(text, where)
    try:
        return field, conv(text)
    except ValueError:
        raise ConfigError(f"{where}: could not parse {key} value {text!r}") from None


def parse_config_text(text, source="<config>"):
    """Parse config text into (axes, shared, settings, sections)."""
    axes, shared, settings, sections = {}, {}, {}, {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ConfigError(f"{where}: empty section label")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not value:
            raise ConfigError(f"{where}: empty value for {key!r}")
        if current is not None:
            if key in SETTING_KEYS or key == "seed":
                raise ConfigError(f"{where}: {key!r} is global and cannot be set "
                                  f"inside a scenario section")
            if key not in FIELD_KEYS:
                raise ConfigError(f"{where}: unknown key {key!r}")
            field, parsed = _parse_scalar(key, value, where)
            sections[current][field] = parsed
            continue
        if key in SETTING_KEYS:
            if key == "workers":
                try:
                    settings["workers"] = int(value)
                except ValueError:
                    raise ConfigError(f"{where}: could not parse workers value "
                                      f"{value!r}") from None
            else:
                settings["out"] = value
            continue
        if key in AXIS_KEYS:
            tokens = [tok for tok in value.replace(",", " ").split() if tok]
            parsed = []
            for tok in tokens:
                _, one = _parse_scalar(key, tok, where)
                parsed.append(one)
            axes["lam" if key == "lambda" else key] = parsed
            continue
        if key in FIELD_KEYS:
            field, parsed = _parse_scalar(key, value, where)
            shared[field] = parsed
            continue
        raise ConfigError(f"{where}: unknown key {key!r}")
    return axes, shared, settings, sections


def load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, source=path)


@dataclasses.dataclass
class Settings:
    grid: list
    out: str
    workers: int
    master_seed: int


def resolve_settings(args) -> Settings:
    """Merge config file, flags, and environment into an executable plan."""
    axes, shared, settings, sections = {}, {}, {}, {}
    if args.config:
        axes, shared, settings, sections = load_config_file(args.config)
    if args.seed is not None:
        shared["master_seed"] = args.seed
    if args.runs is not None:
        shared["runs"] = args.runs
    grid = build_grid(axes, **shared)
    for label, overrides in sections.items():
        index = next((k for k, sc in enumerate(grid) if sc.label == label), None)
        if index is None:
            raise ConfigError(f"section [{label}] matches no scenario in the grid; "
                              f"labels look like {grid[0].label!r}")
        patched = dataclasses.replace(grid[index].config, **overrides)
        if args.seed is not None:
            patched = dataclasses.replace(patched, master_seed=args.seed)
        if args.runs is not None:
            patched = dataclasses.replace(patched, runs=args.runs)
        grid[index] = grid[index]._replace(config=patched)
    out = args.out or settings.get("out") or os.environ.get("ORGSIM_OUT") or "results"
    workers = args.workers if args.workers is not None else settings.get("workers")
    if workers is None:
        workers = os.cpu_count() or 1
    if workers < 1:
        raise ConfigError(f"workers must be at least 1, got {workers}")
    master_seed = grid[0].config.master_seed if grid else shared.get("master_seed", 42)
    return Settings(grid=grid, out=out, workers=workers, master_seed=master_seed)


def _select_scenario(settings, args, default_first=False):
    grid = settings.grid
    if args.filter:
        matches = [sc for sc in grid if sc.label == args.filter]
        if not matches:
            known = ", ".join(sc.label for sc in grid[:4])
            raise ConfigError(f"--filter {args.filter!r} matches no scenario "
                              f"(grid starts with: {known}, ...)")
        return matches[0]
    if len(grid) == 1 or default_first:
        return grid[0]
    raise ConfigError(f"the grid holds {len(grid)} scenarios; pick one with --filter LABEL")


def _scenario_line(result):
    p50, p51 = result.mean_anchor(0), result.mean_anchor(1)
    p100, p200 = result.mean_anchor(2), result.mean_anchor(3)
    return (f"{result.label}: runs={len(result.summaries)} "
            f"p50={p50:.3f} p51={p51:.3f} p100={p100:.3f} p200={p200:.3f}")


def cmd_run(settings, args) -> int:
    scenario = _select_scenario(settings, args)
    if args.trace:
        trace = simulate_run(scenario.config, 0)
        folder = os.path.join(settings.out, scenario.label)
        os.makedirs(folder, exist_ok=True)
        path = os.path.join(folder, "trace_run0.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "raw", "pmax", "normalized"])
            for t in range(len(trace.raw)):
                writer.writerow([t, repr(trace.raw[t]), repr(trace.pmax[t]),
                                 repr(trace.normalized[t])])
        print(f"wrote {path} ({len(trace.raw)} periods)")
        return EXIT_OK
    result = _execute([scenario], settings)[0]
    write_scenario(settings.out, result)
    print(_scenario_line(result))
    print(f"wrote {os.path.join(settings.out, result.label)}/runs.csv")
    return EXIT_OK


def _execute(grid, settings):
    results = []
    if settings.workers > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            for label, config in grid:
                chunk = max(1, config.runs // (settings.workers * 8))
                results.append(run_scenario(config, label, pool=pool, chunksize=chunk))
                print(_scenario_line(results[-1]), flush=True)
    else:
        for label, config in grid:
            results.append(run_scenario(config, label))
            print(_scenario_line(results[-1]), flush=True)
    return results


def cmd_sweep(settings, args) -> int:
    results = _execute(settings.grid, settings)
    for result in results:
        write_scenario(settings.out, result)
    write_manifest(settings.out, build_manifest(settings.grid, settings.master_seed))
    write_tables(settings.out, results)
    print(f"wrote {len(results)} scenario directories, tables, and manifest "
          f"under {settings.out}")
    return EXIT_OK


def cmd_report(settings, args) -> int:
    try:
        results, _ = load_results(settings.out)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    write_tables(settings.out, results)
    print(f"re-rendered tables under {settings.out} from {len(results)} scenarios")
    return EXIT_OK


# --- validate -----------------------------------------------------------

KS_CRITICAL_1PCT = 1.62762  # asymptotic one-sample Kolmogorov-Smirnov, alpha=0.01


def _check(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


def _shock_correlation_checks(seed, samples):
    ok = True
    for rho in (-0.5, 0.0, 0.5):
        rng = derive_stream(seed, f"validate|shock|rho={rho!r}", 0)
        f = rng.random(samples)
        v = rng.random(samples)
        w = rng.random(samples) ** (1.0 / beta_shape(rho))
        fc = shock_transform(f, v, w)
        r = float(np.corrcoef(f, fc)[0, 1])
        ok &= _check(f"shock correlation rho={rho:+.1f}", abs(r - rho) <= 0.05,
                     f"empirical r={r:+.4f}, want within 0.05")
        if rho == 0.0:
            x = np.sort(fc)
            n = len(x)
            grid_hi = np.arange(1, n + 1) / n
            grid_lo = np.arange(0, n) / n
            d = float(max(np.max(grid_hi - x), np.max(x - grid_lo)))
            crit = KS_CRITICAL_1PCT / math.sqrt(n)
            ok &= _check("shock uniformity at rho=0 (KS)", d < crit,
                         f"D={d:.5f}, 1% critical {crit:.5f}")
    return ok


def _brute_force_max(landscape):
    n = landscape.n_tasks
    best_value, best_config = -1.0, None
    for code in range(1 << n):
        config = [(code >> j) & 1 for j in range(n)]
        value = landscape.performance(config)
        if value > best_value:
            best_value, best_config = value, config
    return best_value, best_config


def _global_max_checks(seed, cases):
    rng = derive_stream(seed, "validate|global-max", 0)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(2, 11))
        depends = rng.random((n, n)) < 0.3
        np.fill_diagonal(depends, True)
        landscape = generate_landscape(InteractionPattern(depends), rng)
        fast_value, fast_config = landscape.global_max()
        slow_value, _ = _brute_force_max(landscape)
        if fast_value != slow_value or landscape.performance(fast_config) != fast_value:
            return _check("exhaustive optimum vs brute force", False,
                          f"mismatch at n={n}: {fast_value!r} vs {slow_value!r}")
        worst = max(worst, abs(fast_value - slow_value))
    return _check("exhaustive optimum vs brute force", True,
                  f"{cases} random landscapes, exact agreement")


def cmd_validate(settings, args) -> int:
    samples = 100_000
    ok = _shock_correlation_checks(settings.master_seed, samples)
    ok &= _global_max_checks(settings.master_seed, 200)
    print("validation " + ("passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_dump_landscape(settings, args) -> int:
    scenario = _select_scenario(settings, args, default_first=True)
    config = scenario.config
    rng = derive_stream(config.master_seed, config.scenario_id, 0)
    pattern = build_pattern(config.pattern, config.n_tasks, config.n_agents,
                            config.pattern_file)
    landscape = generate_landscape(pattern, rng)
    print(pattern.n_tasks)
    for i in range(pattern.n_tasks):
        print(" ".join("1" if pattern.depends[i, j] else "0"
                       for j in range(pattern.n_tasks)))
    print(f"# scenario {scenario.label}, run 0 tables")
    for i, table in enumerate(landscape.tables):
        print(f"# task {i}: " + " ".join(repr(v) for v in table))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "validate": cmd_validate,
    "dump-landscape": cmd_dump_landscape,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="orgsim",
        description="Simulate organizations searching rugged task landscapes "
                    "under top-down vs. bottom-up task allocation with "
                    "correlated environmental shocks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default: ORGSIM_OUT or ./results)")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed")
    common.add_argument("--workers", type=int, metavar="N",
                        help="worker processes (default: logical CPUs)")
    common.add_argument("--runs", type=int, metavar="N", help="runs per scenario")
    common.add_argument("--filter", metavar="LABEL", help="select one scenario by label")
    common.add_argument("--trace", action="store_true",
                        help="with run: simulate run 0 only and dump its per-period trace")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="execute one scenario")
    sub.add_parser("sweep", parents=[common], help="execute the whole grid and render tables")
    sub.add_parser("report", parents=[common], help="re-render tables from persisted results")
    sub.add_parser("validate", parents=[common],
                   help="Monte Carlo shock checks and exhaustive-optimum oracle")
    sub.add_parser("dump-landscape", parents=[common],
                   help="print a scenario's pattern matrix and run-0 tables")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](settings, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
