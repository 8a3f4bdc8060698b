"""Per-iteration convergence records and stopping rules shared by all methods."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class TraceRow:
    t: int
    step: str
    gamma: float
    bound: float
    residual: float
    oracle_calls: int
    lp_bound: Optional[float] = None


class ConvergenceTrace:
    """Ordered per-iteration rows; serializes to a plot-ready CSV."""

    HEADER = "t,step,gamma,dual_bound,residual,oracle_calls,lp_bound"

    def __init__(self):
        self.rows: list[TraceRow] = []

    def append(self, row: TraceRow) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError("trace iterations must be strictly increasing")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def to_csv(self) -> str:
        lines = [self.HEADER]
        for r in self.rows:
            lp = "" if r.lp_bound is None else _fmt(r.lp_bound)
            lines.append(
                f"{r.t},{r.step},{_fmt(r.gamma)},{_fmt(r.bound)},"
                f"{_fmt(r.residual)},{r.oracle_calls},{lp}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())


class StopRule:
    """Base stop rule: run until the iteration cap."""

    def lp_due(self, t: int) -> bool:
        return False

    def satisfied(self, *, gamma: float, bound: float, lp_value: Optional[float]) -> bool:
        return False


class CapOnly(StopRule):
    pass


@dataclass
class GapStop(StopRule):
    """Stop once the certified bound is within a relative gap of the incumbent."""

    rel: float = 0.01

    def satisfied(self, *, gamma, bound, lp_value) -> bool:
        return gamma > 0 and bound <= (1.0 + self.rel) * gamma + 1e-12


@dataclass
class LPStop(StopRule):
    """Stop once the LP over initial plus separated rows is near the optimum.

    Mirrors the shared experimental criterion: the relaxation value must be
    at most `factor` times the reference optimum (1% above it by default).
    """

    opt_ref: float
    factor: float = 1.01
    every: int = 1

    def lp_due(self, t: int) -> bool:
        return t % self.every == 0

    def satisfied(self, *, gamma, bound, lp_value) -> bool:
        if lp_value is None:
            return False
        return lp_value <= self.factor * self.opt_ref + 1e-9


@dataclass
class RunResult:
    """Outcome of a solver run: primal point, value, certificate, trace."""

    incumbent: Optional[object]
    gamma: float
    bound: float
    certificate: Optional[object]
    trace: ConvergenceTrace
    converged: bool
    iterations: int
    state: object = None
