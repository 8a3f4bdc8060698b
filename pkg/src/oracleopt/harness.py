"""Experiment driver: instance construction, run orchestration, summary tables.

Reproduces the benchmark protocol at desk scale: triangle-union matching
instances and random stable-set graphs (plus synthetic ball/box bodies),
solver variants against the reference cut loop, standard versus optimal
initialization, and the shared stopping rule that checks the LP over the
initial plus separated constraints against the true optimum.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import combinatorial as comb
from . import corrective as corr
from .lp_baseline import LPStopContext, cut_loop
from .oracle import BallOracle, Constraint, box_oracle
from .solver_general import run_general
from .solver_polar import PolarMode, run_polar
from .trace import CapOnly, GapStop, LPStop, RunResult, StopRule

ENV_PREFIX = "ORACLEOPT_"

PROBLEMS = ("matching", "stableset", "synthetic-ball", "synthetic-polytope")
METHODS = ("polar", "general", "cutloop")
INITS = ("standard", "optimal")
PRESETS = ("upper_bound", "basic")
STOPS = ("auto", "lp1pct", "gap", "cap")


@dataclass
class ExperimentConfig:
    problem: str = "synthetic-ball"
    method: str = "polar"
    frequency: int = 0  # 0 disables corrective steps; k >= 1 corrects every k-th iteration
    init: str = "standard"
    initial_constraints: str = "basic"
    iters: int = 1000
    stop: str = "auto"
    epsilon: float = 0.01
    seed: int = 0
    out: str = "."
    nodes: int = 30
    triangles: int = 8
    density: float = 0.4
    dim: int = 2
    radius: float = 1.0
    center_offset: float = 0.0
    max_set_size: int = 9
    lp_check_every: int = 1
    graph_file: str = ""

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.init not in INITS:
            raise ValueError(f"unknown initialization {self.init!r}")
        if self.initial_constraints not in PRESETS:
            raise ValueError(f"unknown constraint preset {self.initial_constraints!r}")
        if self.stop not in STOPS:
            raise ValueError(f"unknown stop rule {self.stop!r}")
        if self.frequency < 0:
            raise ValueError("frequency must be >= 0")
        if self.iters < 1:
            raise ValueError("iteration cap must be positive")
        if self.lp_check_every < 1:
            raise ValueError("lp_check_every must be >= 1")


_BOOLISH = {"true": True, "false": False}


def _coerce(name: str, raw: str, current):
    if isinstance(current, bool):
        return _BOOLISH[raw.lower()]
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Build a config from a flat key=value file, the environment, and overrides.

    Precedence: explicit overrides > ORACLEOPT_* environment variables >
    config file > defaults.
    """
    config = ExperimentConfig()
    known = {f.name: getattr(config, f.name) for f in fields(config)}

    def apply(name: str, raw: str, source: str):
        nonlocal config
        if name not in known:
            raise ValueError(f"unknown config key {name!r} ({source})")
        config = replace(config, **{name: _coerce(name, raw, known[name])})

    if path:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, _, value = line.partition("=")
                apply(key.strip(), value.strip(), f"{path}:{lineno}")
    for name in known:
        env_key = ENV_PREFIX + name.upper()
        if env_key in os.environ:
            apply(name, os.environ[env_key], env_key)
    for name, value in (overrides or {}).items():
        if value is None:
            continue
        apply(name, str(value), "override")
    config.validate()
    return config


@dataclass
class ExperimentSummary:
    problem: str
    method: str
    frequency: int
    init: str
    initial_constraints: str
    seed: int
    iterations: int
    gamma: float
    bound: float
    converged: bool


@dataclass
class Instance:
    """Everything a run needs: oracle, objective, rows, bounds, reference OPT."""

    oracle: object
    c: np.ndarray
    initial_rows: list[Constraint]
    lb: Optional[np.ndarray]
    ub: Optional[np.ndarray]
    opt_ref: Optional[float]
    polar_mode: PolarMode
    gamma_standard: float


def build_instance(config: ExperimentConfig, need_opt: bool) -> Instance:
    if config.problem == "matching":
        graph = _load_graph(config)
        d = graph.n_edges
        if d == 0:
            raise ValueError("matching instance has no edges")
        oracle = comb.MatchingOracle(graph, max_set_size=config.max_set_size)
        rows = comb.matching_initial_rows(graph, config.initial_constraints)
        opt = float(comb.brute_force_matching_opt(graph)) if need_opt else None
        # The feasible region contains the standard simplex, hence the ball
        # of radius 1/sqrt(d) meets it in the orthant: gamma = r ||c|| = 1.
        return Instance(
            oracle, np.ones(d), rows, np.zeros(d), np.ones(d), opt, PolarMode.PACKING, 1.0
        )
    if config.problem == "stableset":
        graph = _load_graph(config)
        n = graph.n_nodes
        oracle = comb.StableSetOracle(graph)
        rows = comb.stableset_initial_rows(graph, config.initial_constraints)
        opt = comb.clique_relaxation_opt(graph) if need_opt else None
        return Instance(
            oracle, np.ones(n), rows, np.zeros(n), np.ones(n), opt, PolarMode.PACKING, 1.0
        )
    if config.problem == "synthetic-ball":
        d = config.dim
        center = np.zeros(d)
        center[0] = config.center_offset
        oracle = BallOracle(center, config.radius)
        c = np.ones(d)
        opt = float(c @ center) + config.radius * float(np.linalg.norm(c))
        rows = _box_rows(d, oracle.radius_outer)
        r_in = oracle.radius_inner
        gamma_std = (r_in if r_in else config.radius / 2) * float(np.linalg.norm(c))
        return Instance(oracle, c, rows, None, None, opt, PolarMode.STANDARD, gamma_std)
    if config.problem == "synthetic-polytope":
        d = config.dim
        oracle = box_oracle(-np.ones(d), np.ones(d), radius_inner=1.0)
        c = np.ones(d)
        rows = _box_rows(d, 1.0)
        return Instance(oracle, c, rows, None, None, float(d), PolarMode.STANDARD, np.sqrt(d))
    raise ValueError(f"unknown problem {config.problem!r}")


def _box_rows(dim: int, half_width: float) -> list[Constraint]:
    rows = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        rows.append(Constraint(e.copy(), half_width, name=f"boxhi:{i}"))
        rows.append(Constraint(-e, half_width, name=f"boxlo:{i}"))
    return rows


def _load_graph(config: ExperimentConfig) -> comb.Graph:
    if config.graph_file:
        with open(config.graph_file, encoding="utf-8") as fh:
            return comb.parse_dimacs(fh.read())
    if config.problem == "matching":
        return comb.generate_triangle_instance(config.nodes, config.triangles, config.seed)
    return comb.random_gnp(config.nodes, config.density, config.seed)


def _resolve_stop(config: ExperimentConfig, instance: Instance) -> StopRule:
    kind = config.stop
    if kind == "auto":
        kind = "lp1pct" if config.problem in ("matching", "stableset") else "gap"
    if kind == "lp1pct":
        if instance.opt_ref is None:
            raise ValueError("the 1% LP rule needs a computable reference optimum")
        return LPStop(opt_ref=instance.opt_ref, every=config.lp_check_every)
    if kind == "gap":
        return GapStop(rel=config.epsilon)
    return CapOnly()


def run_experiment(config: ExperimentConfig) -> tuple[ExperimentSummary, Optional[str]]:
    """Execute one configured run; returns its summary and the trace path."""
    config.validate()
    stop_kind = config.stop
    if stop_kind == "auto":
        stop_kind = "lp1pct" if config.problem in ("matching", "stableset") else "gap"
    need_opt = config.init == "optimal" or stop_kind == "lp1pct"
    instance = build_instance(config, need_opt)
    if config.init == "optimal" and instance.opt_ref is None:
        raise ValueError("optimal initialization needs a computable reference optimum")
    stop = _resolve_stop(replace(config, stop=stop_kind), instance)
    lp_context = LPStopContext(rows=instance.initial_rows, lb=instance.lb, ub=instance.ub)

    if config.method == "cutloop":
        result = cut_loop(
            instance.oracle,
            instance.c,
            instance.initial_rows,
            lb=instance.lb if instance.lb is not None else np.full(len(instance.c), -np.inf),
            ub=instance.ub,
            stop=stop,
            max_iters=config.iters,
        )
        iterations = len(result.cuts)
        summary = ExperimentSummary(
            problem=config.problem,
            method=config.method,
            frequency=config.frequency,
            init=config.init,
            initial_constraints=config.initial_constraints,
            seed=config.seed,
            iterations=iterations,
            gamma=result.value,
            bound=result.value,
            converged=result.converged,
        )
        trace = result.trace
    else:
        strategy = (
            corr.segment_only()
            if config.frequency == 0
            else corr.fully_corrective(config.frequency)
        )
        if config.method == "polar":
            gamma1 = instance.opt_ref if config.init == "optimal" else instance.gamma_standard
            result: RunResult = run_polar(
                instance.oracle,
                instance.c,
                gamma1=gamma1,
                stop=stop,
                max_iters=config.iters,
                strategy=strategy,
                mode=instance.polar_mode,
                initial_constraints=instance.initial_rows,
                lp_context=lp_context,
            )
        else:
            result = run_general(
                instance.oracle,
                instance.c,
                stop=stop,
                max_iters=config.iters,
                strategy=strategy,
                initial_constraints=[
                    c for c in instance.initial_rows if float(np.linalg.norm(c.a)) > 0
                ],
                lp_context=lp_context,
            )
        summary = ExperimentSummary(
            problem=config.problem,
            method=config.method,
            frequency=config.frequency,
            init=config.init,
            initial_constraints=config.initial_constraints,
            seed=config.seed,
            iterations=result.iterations,
            gamma=result.gamma,
            bound=result.bound,
            converged=result.converged,
        )
        trace = result.trace

    trace_path = None
    if config.out:
        os.makedirs(config.out, exist_ok=True)
        trace_path = os.path.join(
            config.out, f"{config.problem}_{config.method}_{config.seed}.csv"
        )
        trace.write_csv(trace_path)
    return summary, trace_path


def emit_table(summaries) -> tuple[str, str]:
    """Aggregate summaries into an aligned text table plus CSV.

    Groups by (method, frequency, initialization); unconverged runs are
    flagged, excluded from the means, and footnoted.
    """
    summaries = list(summaries)
    if not summaries:
        raise ValueError("no summaries to tabulate")
    groups: dict[tuple, list[ExperimentSummary]] = {}
    for s in summaries:
        groups.setdefault((s.method, s.frequency, s.init), []).append(s)

    header = ("method", "frequency", "init", "runs", "converged", "mean_iterations")
    rows = []
    footnotes = []
    for key in sorted(groups):
        method, freq, init = key
        bucket = groups[key]
        done = [s for s in bucket if s.converged]
        if done:
            mean = sum(s.iterations for s in done) / len(done)
            mean_txt = f"{mean:.2f}"
        else:
            mean_txt = "no converged runs"
        if len(done) < len(bucket):
            mean_txt += " *"
            footnotes.append(
                f"* {method}/frequency {freq}/{init}: "
                f"{len(bucket) - len(done)} unconverged run(s) excluded"
            )
        rows.append(
            (method, str(freq), init, str(len(bucket)), str(len(done)), mean_txt)
        )

    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    lines.extend(footnotes)
    text = "\n".join(lines) + "\n"

    csv_lines = [",".join(header)]
    for r in rows:
        csv_lines.append(",".join(v.replace(" *", "*") for v in r))
    return text, "\n".join(csv_lines) + "\n"
