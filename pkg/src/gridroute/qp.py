"""Dense active-set solver for convex quadratic programs.

Solves min 0.5 x'Qx + c'x subject to A_eq x = b_eq and A_in x <= b_in.
A feasibility LP supplies the starting point; from there the classic
primal active-set iteration (equality-constrained KKT solves, add the
blocking constraint, drop the most negative multiplier) runs with a fixed
constraint ordering so results are deterministic. Equality multipliers come
out exact, which is what the price extraction needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import SingularKktError, SolverError

ACTIVE_TOL = 1e-7
MULT_TOL = 1e-9
# Steps below this are numerical noise (the degenerate-vertex KKT solve via
# least squares leaves ~1e-11 residual directions).
P_ZERO_TOL = 1e-9
DENOM_TOL = 1e-11


@dataclass
class QpResult:
    status: str  # optimal | infeasible
    x: Optional[np.ndarray]
    objective: Optional[float]
    eq_multipliers: Optional[np.ndarray]
    in_multipliers: Optional[np.ndarray]
    active: Tuple[int, ...]
    iterations: int


def _feasible_point(
    n: int,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    a_in: np.ndarray,
    b_in: np.ndarray,
) -> Optional[np.ndarray]:
    # Zero objective: any feasible basic solution will do. Variables are free.
    res = linprog(
        c=np.zeros(n),
        A_ub=a_in if a_in.size else None,
        b_ub=b_in if a_in.size else None,
        A_eq=a_eq if a_eq.size else None,
        b_eq=b_eq if a_eq.size else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if not res.success:
        return None
    return np.asarray(res.x, dtype=float)


def solve_qp(
    q: np.ndarray,
    c: np.ndarray,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    a_in: np.ndarray,
    b_in: np.ndarray,
    max_iterations: int = 500,
) -> QpResult:
    q = np.asarray(q, dtype=float)
    c = np.asarray(c, dtype=float)
    a_eq = np.asarray(a_eq, dtype=float).reshape(-1, c.size)
    b_eq = np.asarray(b_eq, dtype=float)
    a_in = np.asarray(a_in, dtype=float).reshape(-1, c.size)
    b_in = np.asarray(b_in, dtype=float)
    n = c.size
    n_in = b_in.size

    x = _feasible_point(n, a_eq, b_eq, a_in, b_in)
    if x is None:
        return QpResult("infeasible", None, None, None, None, (), 0)
    if n_in and np.max(a_in @ x - b_in) > 1e-6:
        return QpResult("infeasible", None, None, None, None, (), 0)

    working: List[int] = (
        [int(i) for i in np.flatnonzero(np.abs(a_in @ x - b_in) <= ACTIVE_TOL)] if n_in else []
    )

    lam_eq = np.zeros(b_eq.size)
    lam_in = np.zeros(n_in)
    for iteration in range(1, max_iterations + 1):
        a_w = a_in[working] if working else np.zeros((0, n))
        m_eq, m_w = a_eq.shape[0], a_w.shape[0]
        kkt = np.zeros((n + m_eq + m_w, n + m_eq + m_w))
        kkt[:n, :n] = q
        kkt[:n, n : n + m_eq] = a_eq.T
        kkt[:n, n + m_eq :] = a_w.T
        kkt[n : n + m_eq, :n] = a_eq
        kkt[n + m_eq :, :n] = a_w
        rhs = np.concatenate([-(q @ x + c), np.zeros(m_eq + m_w)])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            # Dependent working set: retry via least squares, otherwise a
            # genuinely singular system is a distinct failure mode.
            sol, residual, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            if np.linalg.norm(kkt @ sol - rhs) > 1e-6 * max(1.0, np.linalg.norm(rhs)):
                raise SingularKktError("singular KKT system in active-set iteration") from None
        p = sol[:n]
        lam_eq = sol[n : n + m_eq]
        lam_w = sol[n + m_eq :]

        if np.linalg.norm(p, ord=np.inf) <= P_ZERO_TOL:
            lam_in = np.zeros(n_in)
            for idx, mult in zip(working, lam_w):
                lam_in[idx] = mult
            if not working or np.min(lam_w) >= -MULT_TOL:
                obj = float(0.5 * x @ (q @ x) + c @ x)
                active = tuple(sorted(working))
                return QpResult("optimal", x, obj, lam_eq, lam_in, active, iteration)
            # Drop the most negative multiplier; ties go to the lowest index.
            drop_pos = int(np.argmin(lam_w))
            working.pop(drop_pos)
            working.sort()
            continue

        # Longest feasible step along p before a new inequality binds.
        alpha = 1.0
        blocking = -1
        if n_in:
            ap = a_in @ p
            resid = b_in - a_in @ x
            for i in range(n_in):
                if i in working or ap[i] <= DENOM_TOL:
                    continue
                step = resid[i] / ap[i]
                if step < alpha - 1e-12:
                    alpha = max(step, 0.0)
                    blocking = i
        x = x + alpha * p
        if blocking >= 0:
            working.append(blocking)
            working.sort()

    raise SolverError(f"active-set iteration did not converge in {max_iterations} steps")


def kkt_residuals(
    q: np.ndarray,
    c: np.ndarray,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    a_in: np.ndarray,
    b_in: np.ndarray,
    result: QpResult,
) -> dict:
    """Stationarity, feasibility, and complementary-slackness norms."""
    x, lam_eq, lam_in = result.x, result.eq_multipliers, result.in_multipliers
    a_eq = np.asarray(a_eq, dtype=float).reshape(-1, x.size)
    a_in = np.asarray(a_in, dtype=float).reshape(-1, x.size)
    stationarity = q @ x + c
    if a_eq.size:
        stationarity = stationarity + a_eq.T @ lam_eq
    if a_in.size:
        stationarity = stationarity + a_in.T @ lam_in
    slack = b_in - a_in @ x if a_in.size else np.zeros(0)
    return {
        "stationarity": float(np.linalg.norm(stationarity, ord=np.inf)),
        "primal_eq": float(np.linalg.norm(a_eq @ x - b_eq, ord=np.inf)) if a_eq.size else 0.0,
        "primal_in": float(max(0.0, np.max(a_in @ x - b_in))) if a_in.size else 0.0,
        "comp_slack": float(np.linalg.norm(lam_in * slack, ord=np.inf)) if a_in.size else 0.0,
        "dual_in": float(max(0.0, -np.min(lam_in))) if a_in.size else 0.0,
    }
