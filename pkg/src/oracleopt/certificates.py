"""Construction, verification, and serialization of primal-dual certificates.

A certificate is a nonnegative combination of oracle-returned inequalities
plus one inequality valid for the enclosing ball whose aggregation
dominates the objective and therefore proves an upper bound on the optimum.
Verification recomputes the aggregation from scratch and never trusts
solver internals; serialized certificates carry their rows so a third party
can check them with no solver code.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import as_vector
from .oracle import Constraint, ConstraintForm

_DECOMP_TOL = 1e-6


class StaleDecompositionError(Exception):
    """The maintained point no longer matches its stored convex combination."""


class CertificateUnavailableError(Exception):
    """The solver state does not certify any bound yet."""


@dataclass
class DualCertificate:
    """Explicit proof that <c, x> <= claimed_bound holds on K."""

    setting: str  # "polar" | "packing" | "general"
    objective: np.ndarray
    rows: list[tuple[Constraint, float]]
    ball_normal: np.ndarray  # unit vector
    ball_rhs: float  # <ball_normal, x> <= ball_rhs, valid for R*B2
    ball_coefficient: float
    claimed_bound: float
    gamma: float
    R: float
    nonneg_slack: Optional[np.ndarray] = None  # packing: weights on -x_i <= 0 rows


@dataclass
class VerifyReport:
    multipliers_nonneg: bool
    normal_matches: bool
    rhs_within_bound: bool
    bound_above_gamma: bool
    ball_row_valid: bool
    slack_nonneg: bool = True
    rows_in_history: bool = True
    max_normal_error: float = 0.0
    rhs_margin: float = 0.0

    @property
    def passed(self) -> bool:
        return (
            self.multipliers_nonneg
            and self.normal_matches
            and self.rhs_within_bound
            and self.bound_above_gamma
            and self.ball_row_valid
            and self.slack_nonneg
            and self.rows_in_history
        )

    def failures(self) -> list[str]:
        names = [
            "multipliers_nonneg",
            "normal_matches",
            "rhs_within_bound",
            "bound_above_gamma",
            "ball_row_valid",
            "slack_nonneg",
            "rows_in_history",
        ]
        return [n for n in names if not getattr(self, n)]


def build_polar_certificate(state, R: float) -> DualCertificate:
    """Certificate from an origin-centered solver state (standard or packing).

    Multipliers are gamma times the maintained simplex weights; the residual
    direction (f - q) becomes the single enclosing-ball inequality.  In
    packing mode the gap between the aggregate and its in-hull shadow is
    charged to the nonnegativity rows.
    """
    from .solver_polar import PolarMode  # local import to avoid a cycle

    gamma = state.gamma
    weights = np.asarray(state.weights, dtype=float)
    matrix = state.atom_matrix()
    combo = weights @ matrix
    packing = state.mode is PolarMode.PACKING
    reference = state.shadow if packing else state.aggregate

    if abs(weights.sum() - 1.0) > _DECOMP_TOL or np.min(weights) < -_DECOMP_TOL:
        raise StaleDecompositionError("weights left the simplex")
    if np.max(np.abs(combo - reference)) > _DECOMP_TOL:
        raise StaleDecompositionError("stale decomposition")

    diff = state.target - state.aggregate
    norm = float(np.linalg.norm(diff))
    if norm > 1e-15:
        ball_normal = diff / norm
        ball_coeff = gamma * norm
    else:
        ball_normal = np.zeros_like(diff)
        ball_normal[0] = 1.0
        ball_coeff = 0.0

    slack = None
    if packing:
        slack = gamma * (state.shadow - state.aggregate)

    return DualCertificate(
        setting="packing" if packing else "polar",
        objective=state.c.copy(),
        rows=[(atom, gamma * w) for atom, w in zip(state.atoms, weights)],
        ball_normal=ball_normal,
        ball_rhs=float(R),
        ball_coefficient=ball_coeff,
        claimed_bound=gamma * (1.0 + norm * R),
        gamma=gamma,
        R=float(R),
        nonneg_slack=slack,
    )


def build_general_certificate(state, R: float) -> DualCertificate:
    """Certificate from a general-case solver state.

    Requires a positive mixing weight on the target; the bound degrades as
    its reciprocal.  The head of the maintained gap vector supplies the
    ball inequality, with its right-hand side inflated so that the
    aggregation reproduces the claimed bound exactly.
    """
    lam = state.lam
    if lam <= 1e-9:
        raise CertificateUnavailableError("no certificate yet: target weight is zero")
    cnorm = state.cnorm
    gap = state.gap_vec
    gamma_out = state.gamma_out
    rnorm_p = float(np.linalg.norm(gap))
    claimed = gamma_out + (2.0 * R / lam) * cnorm * rnorm_p

    rows = [(atom, cnorm * nu_i / lam) for atom, nu_i in zip(state.atoms, state.nu)]

    head = -gap[:-1]
    head_norm = float(np.linalg.norm(head))
    if head_norm > 1e-15:
        ball_normal = head / head_norm
        # Inflate the right-hand side so the ball row absorbs the tail of the
        # gap vector; validity needs rhs >= R, which the norm inequality
        # ||head|| + tail <= 2 ||gap|| guarantees.
        ball_rhs = R * (2.0 * rnorm_p - gap[-1]) / head_norm
        ball_coeff = cnorm * head_norm / lam
    else:
        ball_normal = np.zeros(gap.shape[0] - 1)
        ball_normal[0] = 1.0
        ball_rhs = float(R)
        ball_coeff = 0.0

    return DualCertificate(
        setting="general",
        objective=cnorm * state.c_unit,
        rows=rows,
        ball_normal=ball_normal,
        ball_rhs=float(ball_rhs),
        ball_coefficient=float(ball_coeff),
        claimed_bound=float(claimed),
        gamma=float(gamma_out),
        R=float(R),
    )


def verify_certificate(
    cert: DualCertificate,
    constraint_history=None,
    c=None,
    R: Optional[float] = None,
    gamma: Optional[float] = None,
) -> VerifyReport:
    """Re-derive the aggregated inequality and check it proves the bound.

    Checks: all multipliers are nonnegative, the aggregated normal equals the
    objective, the aggregated right-hand side stays below the claimed bound,
    the bound dominates the reported incumbent value, and the ball row is
    valid for the enclosing ball.  Optionally confirms that every used row
    appears in the supplied constraint history.
    """
    c = as_vector(c) if c is not None else cert.objective
    R = cert.R if R is None else R
    gamma = cert.gamma if gamma is None else gamma

    mults = np.array([m for _, m in cert.rows], dtype=float)
    multipliers_nonneg = bool(
        (mults >= -1e-9).all() and cert.ball_coefficient >= -1e-9
    )
    normal = cert.ball_coefficient * cert.ball_normal
    rhs = cert.ball_coefficient * cert.ball_rhs
    for cons, m in cert.rows:
        normal = normal + m * cons.a
        rhs += m * cons.b
    slack_nonneg = True
    if cert.nonneg_slack is not None:
        slack_nonneg = bool(np.min(cert.nonneg_slack) >= -1e-9)
        normal = normal - cert.nonneg_slack  # multipliers on -x_i <= 0 rows

    max_err = float(np.max(np.abs(normal - c))) if c.size else 0.0
    normal_matches = max_err <= 1e-6
    rhs_margin = cert.claimed_bound - rhs
    rhs_within_bound = rhs <= cert.claimed_bound + 1e-6
    bound_above_gamma = cert.claimed_bound >= gamma - 1e-9
    ball_norm = float(np.linalg.norm(cert.ball_normal))
    ball_row_valid = cert.ball_rhs >= R * ball_norm - 1e-9

    rows_in_history = True
    if constraint_history is not None:
        history = [(as_vector(h.a), float(h.b)) for h in constraint_history]
        for cons, m in cert.rows:
            if abs(m) <= 1e-12:
                continue
            if not any(
                np.allclose(cons.a, ha, atol=1e-9) and abs(cons.b - hb) <= 1e-9
                for ha, hb in history
            ):
                rows_in_history = False
                break

    return VerifyReport(
        multipliers_nonneg=multipliers_nonneg,
        normal_matches=normal_matches,
        rhs_within_bound=rhs_within_bound,
        bound_above_gamma=bound_above_gamma,
        ball_row_valid=ball_row_valid,
        slack_nonneg=slack_nonneg,
        rows_in_history=rows_in_history,
        max_normal_error=max_err,
        rhs_margin=float(rhs_margin),
    )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _fmt_vec(v: np.ndarray) -> str:
    return " ".join(_fmt(x) for x in v)


def certificate_to_text(cert: DualCertificate) -> str:
    """Flat-text serialization: multipliers by constraint id plus the rows."""
    out = io.StringIO()
    dim = cert.objective.shape[0]
    out.write("oracle-opt-certificate 1\n")
    out.write(f"setting {cert.setting}\n")
    out.write(f"dimension {dim}\n")
    out.write(f"objective {_fmt_vec(cert.objective)}\n")
    out.write(f"R {_fmt(cert.R)}\n")
    out.write(f"gamma {_fmt(cert.gamma)}\n")
    out.write(f"claimed-bound {_fmt(cert.claimed_bound)}\n")
    out.write(f"ball-normal {_fmt_vec(cert.ball_normal)}\n")
    out.write(f"ball-rhs {_fmt(cert.ball_rhs)}\n")
    out.write(f"ball-coefficient {_fmt(cert.ball_coefficient)}\n")
    named = {}
    for i, (cons, mult) in enumerate(cert.rows):
        name = cons.name or f"row{i}"
        named[name] = cons
        out.write(f"multiplier {name} {_fmt(mult)}\n")
    if cert.nonneg_slack is not None:
        for i, s in enumerate(cert.nonneg_slack):
            out.write(f"slack {i} {_fmt(s)}\n")
    for name, cons in named.items():
        out.write(f"row {name} {_fmt(cons.b)} {_fmt_vec(cons.a)}\n")
    return out.getvalue()


def certificate_from_text(text: str) -> DualCertificate:
    fields: dict[str, str] = {}
    multipliers: list[tuple[str, float]] = []
    rows: dict[str, Constraint] = {}
    slack_entries: list[tuple[int, float]] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        if key == "multiplier":
            name, val = rest.rsplit(" ", 1)
            multipliers.append((name, float(val)))
        elif key == "slack":
            idx, val = rest.split()
            slack_entries.append((int(idx), float(val)))
        elif key == "row":
            parts = rest.split()
            name = parts[0]
            b = float(parts[1])
            a = np.array([float(x) for x in parts[2:]])
            rows[name] = Constraint(a, b, ConstraintForm.RAW, name)
        else:
            fields[key] = rest
    dim = int(fields["dimension"])
    slack = None
    if slack_entries or fields["setting"] == "packing":
        slack = np.zeros(dim)
        for i, s in slack_entries:
            slack[i] = s
    return DualCertificate(
        setting=fields["setting"],
        objective=np.array([float(x) for x in fields["objective"].split()]),
        rows=[(rows[name], mult) for name, mult in multipliers],
        ball_normal=np.array([float(x) for x in fields["ball-normal"].split()]),
        ball_rhs=float(fields["ball-rhs"]),
        ball_coefficient=float(fields["ball-coefficient"]),
        claimed_bound=float(fields["claimed-bound"]),
        gamma=float(fields["gamma"]),
        R=float(fields["R"]),
        nonneg_slack=slack,
    )
