"""Iterative solver for convex sets containing the origin in their interior.

Maintains a target vector f = c / gamma encoding the incumbent-value
inequality <c, x> <= gamma and an aggregated valid inequality <q, x> <= 1
kept as a convex combination of oracle-returned constraints.  Each
iteration either improves the incumbent, shortens the aggregate, or pulls
the aggregate toward the target with a freshly separated constraint.  The
distance ||f - q|| directly certifies an upper bound on the optimum.

The packing variant handles down-closed bodies in the nonnegative orthant:
after every update the aggregate is clipped at the target component-wise,
and a shadow point inside the convex hull of the constraints keeps the dual
certificate intact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import corrective as corr
from .certificates import build_polar_certificate
from .geometry import as_vector, project_point_to_segment
from .lp_baseline import LPStopContext, lp_stop_bound
from .oracle import Constraint, ConstraintForm, Inside, SeparationOracle, normalize_polar
from .trace import CapOnly, ConvergenceTrace, RunResult, StopRule, TraceRow

# Threshold under which the separating direction is considered degenerate
# and the aggregate is shortened instead; the algorithm's own rule is <= 0,
# and near-zero positive denominators would only produce enormous candidate
# points the oracle rejects anyway.
SHRINK_TOL = 1e-12

_RENORM_EVERY = 100


class PolarMode(Enum):
    STANDARD = "standard"
    PACKING = "packing"


class StepKind(Enum):
    SHRINK = "shrink"
    PRIMAL_IMPROVE = "primal"
    DUAL_CUT = "cut"


@dataclass
class PolarState:
    """Full iterate of the origin-centered solver."""

    t: int
    gamma: float
    c: np.ndarray
    target: np.ndarray  # f = c / gamma
    aggregate: np.ndarray  # q, the maintained valid-inequality vector
    atoms: list[Constraint]  # polar-normalized rows; atoms[0] is the zero row
    weights: np.ndarray  # simplex weights over atoms
    mode: PolarMode
    shadow: Optional[np.ndarray] = None  # packing: weights @ atoms >= aggregate
    oracle_calls: int = 0
    incumbent: Optional[np.ndarray] = None
    cuts: list[Constraint] = field(default_factory=list)
    atom_index: dict[str, int] = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return float(np.linalg.norm(self.target - self.aggregate))

    def atom_matrix(self) -> np.ndarray:
        return np.array([a.a for a in self.atoms])


@dataclass
class GammaInit:
    gamma1: float
    point: Optional[np.ndarray]
    oracle_calls: int


def initialize_gamma(oracle: SeparationOracle, c, R: float, r_known=None) -> GammaInit:
    """Find a starting objective value backed by a feasible point.

    With a known inner radius the value (r/2)||c|| is certified by the point
    (r / (2 ||c||)) c.  Otherwise scaled-down multiples of c are tested,
    halving the scale each time; the first point inside K has value at least
    (r/2)||c|| even though r stays unknown.
    """
    c = as_vector(c)
    cnorm = float(np.linalg.norm(c))
    if cnorm == 0:
        raise ValueError("objective must be nonzero")
    if r_known is not None:
        gamma1 = 0.5 * r_known * cnorm
        return GammaInit(gamma1, (gamma1 / cnorm**2) * c, 0)
    max_halvings = math.ceil(math.log2(R / 1e-12))
    calls = 0
    for i in range(1, max_halvings + 1):
        x = (R / (2**i * cnorm)) * c
        calls += 1
        if isinstance(oracle.separate(x), Inside):
            return GammaInit(float(c @ x), x, calls)
    raise RuntimeError("no feasible scaled objective point found; K appears empty or R wrong")


def candidate_point(state: PolarState) -> Optional[np.ndarray]:
    """Candidate primal point, or None when the shrink branch must fire."""
    diff = state.target - state.aggregate
    denom = float(diff @ (state.target + state.aggregate))
    if denom <= SHRINK_TOL:
        return None
    return (2.0 / denom) * diff


def dual_bound(state: PolarState, R: float) -> float:
    """Certified upper bound gamma * (1 + ||f - q|| R) on the optimum.

    Valid in packing mode as well: there the aggregate sits below a point of
    the constraint hull and the difference is charged to the nonnegativity
    rows, which leaves the bound unchanged.
    """
    return state.gamma * (1.0 + state.residual * R)


def _ingest_cut(state: PolarState, cons: Constraint) -> int:
    if cons.form is not ConstraintForm.POLAR:
        cons = normalize_polar(cons.a, cons.b, name=cons.name)
    if state.mode is PolarMode.PACKING and np.any(cons.a < 0):
        # Down-closed bodies admit the positive part of any valid row, and
        # clipping keeps the constraint norms bounded by 1/r.
        cons = Constraint(np.maximum(cons.a, 0.0), 1.0, ConstraintForm.POLAR, cons.name)
    if cons.name:
        existing = state.atom_index.get(cons.name)
        if existing is not None:
            return existing
        state.atom_index[cons.name] = len(state.atoms)
    state.atoms.append(cons)
    state.weights = np.append(state.weights, 0.0)
    state.cuts.append(cons)
    return len(state.atoms) - 1


def polar_step(
    state: PolarState,
    oracle: SeparationOracle,
    strategy: corr.UpdateStrategy | None = None,
    check: bool = True,
) -> StepKind:
    """Advance the state by one iteration; returns which branch fired."""
    strategy = strategy or corr.segment_only()
    state.t += 1
    gamma_before = state.gamma
    residual_before = state.residual

    x = candidate_point(state)
    if x is None:
        kind = StepKind.SHRINK
        anchor = 0
    else:
        if state.mode is PolarMode.PACKING and check:
            assert np.min(x) >= -1e-9, "packing query point left the nonnegative orthant"
        result = oracle.separate(x)
        state.oracle_calls += 1
        if isinstance(result, Inside):
            kind = StepKind.PRIMAL_IMPROVE
            gamma_new = float(state.c @ x)
            if check:
                assert gamma_new >= state.gamma - 1e-9 * (1 + abs(state.gamma))
            state.gamma = gamma_new
            state.target = state.c / gamma_new
            state.incumbent = x
            anchor = 0
        else:
            kind = StepKind.DUAL_CUT
            anchor = _ingest_cut(state, result.constraint)

    _update_aggregate(state, anchor, strategy)

    if strategy.sparsify_every and state.t % strategy.sparsify_every == 0:
        if state.mode is PolarMode.PACKING:
            raise ValueError("sparsification is not supported in packing mode")
        res = corr.sparsify(state.aggregate, state.target, state.atom_matrix(), state.weights)
        if np.linalg.norm(state.target - res.point) <= state.residual + 1e-9:
            state.aggregate = res.point
            state.weights = res.weights

    if state.t % _RENORM_EVERY == 0:
        w = np.maximum(state.weights, 0.0)
        state.weights = w / w.sum()

    if check:
        assert state.gamma >= gamma_before - 1e-9 * (1 + abs(gamma_before))
        assert state.residual <= residual_before + 1e-9 * (1 + residual_before)
    return kind


def _update_aggregate(state: PolarState, anchor: int, strategy: corr.UpdateStrategy) -> None:
    f = state.target
    anchor_vec = state.atoms[anchor].a
    packing = state.mode is PolarMode.PACKING

    seg_point, lam = project_point_to_segment(anchor_vec, state.aggregate, f)
    seg_weights = lam * state.weights
    seg_weights[anchor] += 1.0 - lam
    seg_shadow = None
    if packing:
        seg_shadow = lam * state.shadow + (1.0 - lam) * anchor_vec
        seg_result = np.minimum(f, seg_point)
    else:
        seg_result = seg_point
    seg_dist = float(np.linalg.norm(f - seg_result))

    if strategy.kind is corr.StrategyKind.SEGMENT_PLUS_NONNEG:
        if not packing:
            raise ValueError("the nonnegativity-aware update requires packing mode")
        q_new, seg_lam = corr.nonneg_corrective_update(f, state.aggregate, anchor_vec)
        if float(np.linalg.norm(f - q_new)) <= seg_dist + 1e-9:
            state.weights = (1.0 - seg_lam) * state.weights
            state.weights[anchor] += seg_lam
            state.shadow = (1.0 - seg_lam) * state.shadow + seg_lam * anchor_vec
            state.aggregate = q_new
            return
    elif strategy.corrective_due(state.t):
        matrix = state.atom_matrix()
        if strategy.kind is corr.StrategyKind.PARTIALLY_CORRECTIVE:
            cap = strategy.support_cap or 2 * f.shape[0]
            res = corr.partially_corrective_update(
                f, matrix, seg_weights, anchor, cap, recession_nonneg=packing
            )
        else:
            res = corr.min_norm_point(f, matrix, recession_nonneg=packing)
        cand_point = np.minimum(f, res.point) if packing else res.point
        cand_dist = float(np.linalg.norm(f - cand_point))
        if cand_dist <= seg_dist + 1e-9:
            state.aggregate = cand_point
            state.weights = res.weights
            if packing:
                state.shadow = res.point + res.slack
            return
        # A safeguarded fallback from the subproblem can come back worse;
        # the segment update keeps the convergence guarantee.

    state.aggregate = seg_result
    state.weights = seg_weights
    if packing:
        state.shadow = seg_shadow


def run_polar(
    oracle: SeparationOracle,
    c,
    *,
    R: Optional[float] = None,
    gamma1: Optional[float] = None,
    r: Optional[float] = None,
    stop: Optional[StopRule] = None,
    max_iters: int = 1000,
    strategy: corr.UpdateStrategy | None = None,
    mode: PolarMode = PolarMode.STANDARD,
    initial_constraints=(),
    lp_context: Optional[LPStopContext] = None,
    check: bool = True,
) -> RunResult:
    """Run the solver until the stop rule fires or the iteration cap hits.

    gamma1 may be given directly (it must be a value attained by some point
    of K), derived from a known inner radius r, or found by the halving
    search against the oracle.  Initial constraints join the atom set so
    corrective steps and certificates can use them.
    """
    c = as_vector(c)
    cnorm = float(np.linalg.norm(c))
    if cnorm == 0:
        raise ValueError("objective must be nonzero")
    if R is None:
        R = oracle.radius_outer
    strategy = strategy or corr.segment_only()
    stop = stop or CapOnly()
    if mode is PolarMode.PACKING and np.min(c) < 0:
        raise ValueError("packing mode requires a nonnegative objective")

    incumbent0 = None
    init_calls = 0
    if gamma1 is None:
        init = initialize_gamma(oracle, c, R, r_known=r if r is not None else oracle.radius_inner)
        gamma1, incumbent0, init_calls = init.gamma1, init.point, init.oracle_calls
    if gamma1 <= 0:
        raise ValueError("initial objective value must be positive")

    dim = c.shape[0]
    atoms = [Constraint(np.zeros(dim), 1.0, ConstraintForm.POLAR, "zero")]
    for cons in initial_constraints:
        if cons.form is not ConstraintForm.POLAR:
            cons = normalize_polar(cons.a, cons.b, name=cons.name)
        if mode is PolarMode.PACKING and np.any(cons.a < 0):
            cons = Constraint(np.maximum(cons.a, 0.0), 1.0, ConstraintForm.POLAR, cons.name)
        atoms.append(cons)
    weights = np.zeros(len(atoms))
    weights[0] = 1.0
    atom_index = {cons.name: i for i, cons in enumerate(atoms) if cons.name}

    state = PolarState(
        t=0,
        gamma=float(gamma1),
        c=c,
        target=c / gamma1,
        aggregate=np.zeros(dim),
        atoms=atoms,
        weights=weights,
        mode=mode,
        shadow=np.zeros(dim) if mode is PolarMode.PACKING else None,
        oracle_calls=init_calls,
        incumbent=incumbent0,
        atom_index=atom_index,
    )

    trace = ConvergenceTrace()
    converged = False
    if stop.lp_due(0):
        # The shared criterion may already hold on the initial rows alone,
        # in which case the run costs zero iterations, like the cut loop.
        if lp_context is None:
            raise ValueError("this stop rule needs an LP context")
        lp0 = lp_stop_bound(lp_context.rows, [], c, lb=lp_context.lb, ub=lp_context.ub)
        converged = stop.satisfied(gamma=state.gamma, bound=dual_bound(state, R), lp_value=lp0)
    for t in range(1, max_iters + 1):
        if converged:
            break
        kind = polar_step(state, oracle, strategy, check=check)
        bound = dual_bound(state, R)
        lp_value = None
        if stop.lp_due(t):
            if lp_context is None:
                raise ValueError("this stop rule needs an LP context")
            lp_value = lp_stop_bound(
                lp_context.rows, state.cuts, c, lb=lp_context.lb, ub=lp_context.ub
            )
        trace.append(
            TraceRow(
                t=t,
                step=kind.value,
                gamma=state.gamma,
                bound=bound,
                residual=state.residual,
                oracle_calls=state.oracle_calls,
                lp_bound=lp_value,
            )
        )
        if stop.satisfied(gamma=state.gamma, bound=bound, lp_value=lp_value):
            converged = True
            break

    certificate = build_polar_certificate(state, R)
    return RunResult(
        incumbent=state.incumbent,
        gamma=state.gamma,
        bound=dual_bound(state, R),
        certificate=certificate,
        trace=trace,
        converged=converged,
        iterations=state.t,
        state=state,
    )
