"""Dense convex QP solver.

Solves::

    minimize    1/2 z^T P z + q^T z
    subject to  A_eq z  = b_eq
                lb <= A_in z <= ub

with a primal active-set method. Each iteration takes a null-space step for
the equality-constrained subproblem defined by the working set; the QR
factorization of the working-set matrix is updated column by column as
constraints enter and leave. A phase-1 elastic problem supplies the first
feasible point when the warm start cannot.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import (
    LinAlgError,
    cho_factor,
    cho_solve,
    lu_factor,
    lu_solve,
    qr,
    qr_delete,
    qr_insert,
    solve_triangular,
)

from dynamics.errors import QpDimensionError
from dynamics.spatial_math import FloatArray

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
TIKHONOV = 1e-9
_PHASE1_WEIGHT = 1e-10

Key = Tuple[int, int]  # (row of A_in, +1 upper / -1 lower)


class QpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


@dataclass
class QpProblem:
    P: FloatArray
    q: FloatArray
    A_eq: Optional[FloatArray] = None
    b_eq: Optional[FloatArray] = None
    A_in: Optional[FloatArray] = None
    lb: Optional[FloatArray] = None
    ub: Optional[FloatArray] = None
    labels_eq: Optional[Sequence[str]] = None
    labels_in: Optional[Sequence[str]] = None

    def __post_init__(self) -> None:
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.q.size
        if self.P.shape != (n, n):
            raise QpDimensionError(f"P must be {n}x{n}, got {self.P.shape}")
        self.P = 0.5 * (self.P + self.P.T)

        self.A_eq = np.zeros((0, n)) if self.A_eq is None else np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).reshape(-1)
        if self.A_eq.shape[1] != n or self.A_eq.shape[0] != self.b_eq.size:
            raise QpDimensionError("A_eq / b_eq dimensions do not match")

        self.A_in = np.zeros((0, n)) if self.A_in is None else np.atleast_2d(np.asarray(self.A_in, dtype=float))
        m = self.A_in.shape[0]
        if self.A_in.shape[1] != n:
            raise QpDimensionError("A_in has the wrong number of columns")
        self.lb = np.full(m, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.full(m, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)
        if self.lb.size != m or self.ub.size != m:
            raise QpDimensionError("lb / ub must have one entry per row of A_in")

        for name in ("P", "q", "A_eq", "b_eq", "A_in"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise QpDimensionError(f"{name} contains NaN or infinite entries")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise QpDimensionError("bounds contain NaN")

        if self.labels_eq is not None and len(self.labels_eq) != self.A_eq.shape[0]:
            raise QpDimensionError("labels_eq must label every equality row")
        if self.labels_in is not None and len(self.labels_in) != m:
            raise QpDimensionError("labels_in must label every inequality row")

    @property
    def n(self) -> int:
        return self.q.size

    def objective(self, z: FloatArray) -> float:
        return float(0.5 * z @ self.P @ z + self.q @ z)

    def label_in(self, row: int) -> str:
        return self.labels_in[row] if self.labels_in is not None else f"in[{row}]"

    def label_eq(self, row: int) -> str:
        return self.labels_eq[row] if self.labels_eq is not None else f"eq[{row}]"


@dataclass
class Multipliers:
    eq: FloatArray
    upper: FloatArray
    lower: FloatArray


@dataclass
class KktResiduals:
    stationarity: float
    primal: float
    complementarity: float
    dual_feasibility: float  # min multiplier; >= 0 when dual feasible

    def within(self, tol: float) -> bool:
        return (
            self.stationarity <= tol
            and self.primal <= tol
            and self.complementarity <= tol
            and self.dual_feasibility >= -tol
        )


@dataclass
class InfeasibilityCertificate:
    residual: float
    eq_rows: Tuple[int, ...] = ()
    in_rows: Tuple[int, ...] = ()
    classes: Tuple[str, ...] = ()


@dataclass(frozen=True)
class WarmStart:
    z: FloatArray
    active: Tuple[Key, ...]


@dataclass
class QpSolution:
    z: FloatArray
    objective: float
    status: QpStatus
    iterations: int
    residuals: KktResiduals
    multipliers: Multipliers
    active: Tuple[Key, ...] = ()
    certificate: Optional[InfeasibilityCertificate] = None
    solve_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL

    def warm_start(self) -> WarmStart:
        return WarmStart(z=self.z.copy(), active=self.active)


def check_kkt(problem: QpProblem, z: FloatArray, multipliers: Multipliers) -> KktResiduals:
    """Absolute KKT residuals of ``z`` with the given multipliers."""

    z = np.asarray(z, dtype=float)
    grad = problem.P @ z + problem.q
    grad = grad + problem.A_eq.T @ multipliers.eq + problem.A_in.T @ (multipliers.upper - multipliers.lower)
    stationarity = float(np.max(np.abs(grad))) if grad.size else 0.0

    primal = 0.0
    if problem.A_eq.shape[0]:
        primal = max(primal, float(np.max(np.abs(problem.A_eq @ z - problem.b_eq))))
    complementarity = 0.0
    dual = 0.0
    if problem.A_in.shape[0]:
        Az = problem.A_in @ z
        violation = np.maximum(np.maximum(Az - problem.ub, problem.lb - Az), 0.0)
        primal = max(primal, float(np.max(violation)))
        upper_slack = np.where(np.isfinite(problem.ub), problem.ub - Az, 0.0)
        lower_slack = np.where(np.isfinite(problem.lb), Az - problem.lb, 0.0)
        upper_gap = np.where(np.isfinite(problem.ub), multipliers.upper * upper_slack, np.abs(multipliers.upper))
        lower_gap = np.where(np.isfinite(problem.lb), multipliers.lower * lower_slack, np.abs(multipliers.lower))
        complementarity = float(max(np.max(np.abs(upper_gap)), np.max(np.abs(lower_gap))))
        dual = float(min(multipliers.upper.min(), multipliers.lower.min()))
    return KktResiduals(
        stationarity=stationarity, primal=primal, complementarity=complementarity, dual_feasibility=dual
    )


def _problem_scale(problem: QpProblem, z: FloatArray) -> float:
    terms = [1.0, float(np.max(np.abs(problem.q))) if problem.n else 0.0]
    if problem.n:
        terms.append(float(np.max(np.abs(problem.P @ z))))
    return max(terms)


# ---------------------------------------------------------------------------
# Working-set factorization
# ---------------------------------------------------------------------------


class _WorkingSetQR:
    """QR factorization of the working-set matrix transpose, updated in place."""

    def __init__(self, columns: FloatArray) -> None:
        self.n = columns.shape[0]
        self.m = columns.shape[1]
        self._refactor(columns)

    def _refactor(self, columns: FloatArray) -> None:
        if columns.shape[1] == 0:
            self.Q = np.eye(self.n)
            self.R = np.zeros((self.n, 0))
        else:
            self.Q, self.R = qr(columns, mode="full")
        self.m = columns.shape[1]

    def columns(self) -> FloatArray:
        return self.Q @ self.R

    def insert(self, column: FloatArray) -> None:
        if self.m == 0:
            self._refactor(column.reshape(-1, 1))
            return
        self.Q, self.R = qr_insert(self.Q, self.R, column, self.m, which="col", check_finite=False)
        self.m += 1

    def delete(self, position: int) -> None:
        if self.m == 1:
            self._refactor(np.zeros((self.n, 0)))
            return
        self.Q, self.R = qr_delete(self.Q, self.R, position, 1, which="col", check_finite=False)
        self.m -= 1

    def rank_ok(self, tol: float = 1e-10) -> bool:
        if self.m == 0:
            return True
        diag = np.abs(np.diag(self.R[: self.m, : self.m]))
        return bool(diag.min() > tol * max(1.0, diag.max()))

    @property
    def Y(self) -> FloatArray:
        return self.Q[:, : self.m]

    @property
    def Z(self) -> FloatArray:
        return self.Q[:, self.m :]

    def multipliers(self, gradient: FloatArray) -> FloatArray:
        if self.m == 0:
            return np.zeros(0)
        return solve_triangular(self.R[: self.m, : self.m], -(self.Y.T @ gradient))


@dataclass
class _Standardized:
    E: FloatArray
    e: FloatArray
    eq_sources: List[Tuple[str, int]]  # ("eq", row) or ("in", row)
    G: FloatArray
    h: FloatArray
    keys: List[Key]
    dropped_eq: List[Tuple[str, int]] = field(default_factory=list)


def _standardize(problem: QpProblem) -> _Standardized:
    E_rows = [row for row in problem.A_eq]
    e_vals = list(problem.b_eq)
    sources: List[Tuple[str, int]] = [("eq", i) for i in range(problem.A_eq.shape[0])]
    G_rows: List[FloatArray] = []
    h_vals: List[float] = []
    keys: List[Key] = []
    for i, row in enumerate(problem.A_in):
        lo, hi = problem.lb[i], problem.ub[i]
        if np.isfinite(lo) and np.isfinite(hi) and lo == hi:
            E_rows.append(row)
            e_vals.append(hi)
            sources.append(("in", i))
            continue
        if np.isfinite(hi):
            G_rows.append(row)
            h_vals.append(hi)
            keys.append((i, 1))
        if np.isfinite(lo):
            G_rows.append(-row)
            h_vals.append(-lo)
            keys.append((i, -1))
    n = problem.n
    return _Standardized(
        E=np.array(E_rows).reshape(-1, n),
        e=np.array(e_vals, dtype=float),
        eq_sources=sources,
        G=np.array(G_rows).reshape(-1, n),
        h=np.array(h_vals, dtype=float),
        keys=keys,
    )


def _independent_equalities(std: _Standardized, tol: float) -> Optional[InfeasibilityCertificate]:
    """Drop dependent equality rows; certificate if they are inconsistent."""

    if std.E.shape[0] == 0:
        return None
    _, R, perm = qr(std.E.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * max(1.0, diag.max() if diag.size else 0.0)))
    if rank == std.E.shape[0]:
        return None
    keep = np.sort(perm[:rank])
    drop = np.sort(perm[rank:])
    z_ls = np.linalg.lstsq(std.E[keep], std.e[keep], rcond=None)[0]
    residual = np.abs(std.E[drop] @ z_ls - std.e[drop])
    std.dropped_eq = [std.eq_sources[i] for i in drop]
    if residual.size and residual.max() > tol * max(1.0, float(np.abs(std.e).max())):
        bad = [std.eq_sources[i] for i, r in zip(drop, residual) if r > tol]
        return InfeasibilityCertificate(
            residual=float(residual.max()),
            eq_rows=tuple(row for kind, row in bad if kind == "eq"),
            in_rows=tuple(row for kind, row in bad if kind == "in"),
        )
    std.E = std.E[keep]
    std.e = std.e[keep]
    std.eq_sources = [std.eq_sources[i] for i in keep]
    return None


# ---------------------------------------------------------------------------
# Active-set iterations
# ---------------------------------------------------------------------------


@dataclass
class _ActiveSetResult:
    z: FloatArray
    working: List[int]
    lam: FloatArray
    iterations: int
    converged: bool


def _active_set(
    P: FloatArray,
    c: FloatArray,
    E: FloatArray,
    G: FloatArray,
    h: FloatArray,
    z: FloatArray,
    working: List[int],
    tol: float,
    max_iter: int,
) -> _ActiveSetResult:
    """Primal active-set iterations from a feasible ``z``; ``working`` rows of ``G`` are active."""

    n = z.size
    mE = E.shape[0]
    columns = np.hstack([E.T, G[working].T]) if working else E.T.reshape(n, mE)
    factor = _WorkingSetQR(columns)
    working = list(working)
    lam = np.zeros(mE + len(working))
    scale = max(1.0, float(np.max(np.abs(c))) if c.size else 0.0)

    for iteration in range(1, max_iter + 1):
        gradient = P @ z + c
        Z = factor.Z
        if Z.shape[1]:
            reduced = Z.T @ P @ Z
            step = -Z @ cho_solve(cho_factor(reduced), Z.T @ gradient)
        else:
            step = np.zeros(n)

        step_size = float(np.max(np.abs(step))) if n else 0.0
        if step_size <= 1e-11 * (1.0 + float(np.max(np.abs(z)))):
            z = z + step
            lam = factor.multipliers(P @ z + c)
            mu = lam[mE:]
            if mu.size == 0 or mu.min() >= -tol * scale:
                return _ActiveSetResult(z=z, working=working, lam=lam, iterations=iteration, converged=True)
            leaving = int(np.argmin(mu))
            factor.delete(mE + leaving)
            working.pop(leaving)
            continue

        alpha = 1.0
        blocking = -1
        if G.shape[0]:
            Gp = G @ step
            slack = np.maximum(h - G @ z, 0.0)
            row_norms = np.linalg.norm(G, axis=1)
            candidates = np.flatnonzero(Gp > 1e-12 * row_norms * step_size)
            in_working = set(working)
            for i in candidates:
                if i in in_working:
                    continue
                ratio = slack[i] / Gp[i]
                if ratio < alpha:
                    alpha = float(ratio)
                    blocking = int(i)
        z = z + alpha * step
        if blocking >= 0:
            factor.insert(G[blocking])
            if not factor.rank_ok():
                # numerically dependent on the working set: cannot block a null-space step
                factor.delete(factor.m - 1)
            else:
                working.append(blocking)

    lam = factor.multipliers(P @ z + c)
    return _ActiveSetResult(z=z, working=working, lam=lam, iterations=max_iter, converged=False)


def _polish(
    P: FloatArray, c: FloatArray, std: _Standardized, z: FloatArray, working: List[int], tol: float
) -> Optional[Tuple[FloatArray, FloatArray]]:
    """Exact KKT point of the final working set, with one step of iterative refinement.

    ``None`` when the polished point leaves the feasible set or a working-set
    multiplier turns negative; the iterate is kept in that case.
    """

    n = z.size
    mE = std.E.shape[0]
    A = np.vstack([std.E, std.G[working]]) if working else std.E.reshape(mE, n)
    b = np.concatenate([std.e, std.h[working]]) if working else std.e
    m = A.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = P
    kkt[:n, n:] = A.T
    kkt[n:, :n] = A
    rhs = np.concatenate([-c, b])
    try:
        factor = lu_factor(kkt, check_finite=False)
    except (LinAlgError, ValueError):
        return None
    sol = lu_solve(factor, rhs)
    sol = sol + lu_solve(factor, rhs - kkt @ sol)
    if not np.all(np.isfinite(sol)):
        return None
    z_new, lam = sol[:n], sol[n:]
    scale = max(1.0, float(np.max(np.abs(c))) if c.size else 0.0)
    if lam[mE:].size and lam[mE:].min() < -tol * scale:
        return None
    if std.G.shape[0]:
        slack_tol = tol * max(1.0, float(np.max(np.abs(z_new))))
        if np.max(std.G @ z_new - std.h) > slack_tol:
            return None
    return z_new, lam


def _phase_one(
    std: _Standardized, z_start: FloatArray, tol: float, max_iter: int
) -> Tuple[FloatArray, float, int]:
    """Minimize the largest inequality violation subject to the equalities."""

    n = z_start.size
    mG = std.G.shape[0]
    P1 = np.eye(n + 1) * _PHASE1_WEIGHT
    c1 = np.zeros(n + 1)
    c1[n] = 1.0
    c1[:n] = -_PHASE1_WEIGHT * z_start
    E1 = np.hstack([std.E, np.zeros((std.E.shape[0], 1))])
    G1 = np.zeros((mG + 1, n + 1))
    G1[:mG, :n] = std.G
    G1[:mG, n] = -1.0
    G1[mG, n] = -1.0
    h1 = np.concatenate([std.h, [0.0]])
    violation = float(np.max(std.G @ z_start - std.h)) if mG else 0.0
    start = np.concatenate([z_start, [max(violation, 0.0) + 1.0]])
    result = _active_set(P1, c1, E1, G1, h1, start, [], tol, max_iter)
    return result.z[:n], float(result.z[n]), result.iterations


def _feasible(std: _Standardized, z: FloatArray, tol: float) -> bool:
    scale = max(1.0, float(np.max(np.abs(z))) if z.size else 0.0)
    if std.E.shape[0] and np.max(np.abs(std.E @ z - std.e)) > tol * scale:
        return False
    if std.G.shape[0] and np.max(std.G @ z - std.h) > tol * scale:
        return False
    return True


def _eqp_point(P: FloatArray, c: FloatArray, A: FloatArray, b: FloatArray) -> Optional[FloatArray]:
    """Minimizer of the objective on ``A z = b`` via the KKT system."""

    n, m = P.shape[0], A.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = P
    kkt[:n, n:] = A.T
    kkt[n:, :n] = A
    try:
        sol = np.linalg.solve(kkt, np.concatenate([-c, b]))
    except LinAlgError:
        return None
    return sol[:n]


def solve(
    problem: QpProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: Optional[WarmStart] = None,
) -> QpSolution:
    started = time.perf_counter()
    n = problem.n
    P = problem.P
    try:
        cho_factor(P)
    except LinAlgError:
        P = P + TIKHONOV * np.eye(n)

    std = _standardize(problem)
    certificate = _independent_equalities(std, tol)
    if certificate is not None:
        labels = {problem.label_eq(r) for r in certificate.eq_rows} | {problem.label_in(r) for r in certificate.in_rows}
        certificate.classes = tuple(sorted(labels))
        return _infeasible(problem, certificate, 0, started)

    key_index: Dict[Key, int] = {key: i for i, key in enumerate(std.keys)}
    iterations = 0
    z0: Optional[FloatArray] = None
    working: List[int] = []

    if warm_start is not None and warm_start.z.shape == (n,):
        candidate_working = [key_index[key] for key in warm_start.active if key in key_index]
        if _feasible(std, warm_start.z, tol) and _working_set_tight(std, warm_start.z, candidate_working, tol):
            z0, working = warm_start.z.copy(), candidate_working
        elif candidate_working:
            A = np.vstack([std.E, std.G[candidate_working]])
            b = np.concatenate([std.e, std.h[candidate_working]])
            point = _eqp_point(P, problem.q, A, b)
            if point is not None and _feasible(std, point, tol):
                z0, working = point, candidate_working

    if z0 is None:
        if std.E.shape[0]:
            z_ls = np.linalg.lstsq(std.E, std.e, rcond=None)[0]
        else:
            z_ls = np.zeros(n)
        if _feasible(std, z_ls, tol):
            z0 = z_ls
        else:
            z_phase, residual, phase_iterations = _phase_one(std, z_ls, tol, max_iter)
            iterations += phase_iterations
            scale = max(1.0, float(np.max(np.abs(std.h))) if std.h.size else 0.0)
            if residual > tol * scale:
                violations = std.G @ z_phase - std.h
                rows = sorted({std.keys[i][0] for i in np.flatnonzero(violations > 0.5 * residual)})
                certificate = InfeasibilityCertificate(
                    residual=residual,
                    in_rows=tuple(rows),
                    classes=tuple(sorted({problem.label_in(r) for r in rows})),
                )
                return _infeasible(problem, certificate, iterations, started)
            z0 = z_phase

    if working:
        columns = np.hstack([std.E.T, std.G[working].T])
        if not _WorkingSetQR(columns).rank_ok():
            working = []

    result = _active_set(P, problem.q, std.E, std.G, std.h, z0, working, tol, max(max_iter - iterations, 1))
    iterations += result.iterations
    if result.converged:
        polished = _polish(P, problem.q, std, result.z, result.working, tol)
        if polished is not None:
            result = replace(result, z=polished[0], lam=polished[1])
    multipliers = _unpack_multipliers(problem, std, result)
    z = result.z
    residuals = check_kkt(problem, z, multipliers)
    scale = _problem_scale(problem, z)
    scaled = KktResiduals(
        stationarity=residuals.stationarity / scale,
        primal=residuals.primal / scale,
        complementarity=residuals.complementarity / scale,
        dual_feasibility=residuals.dual_feasibility / scale,
    )
    # max_iter only when the iteration cap ran out
    status = QpStatus.OPTIMAL if result.converged else QpStatus.MAX_ITER
    if result.converged and not scaled.within(tol):
        logger.warning(
            "QP converged with KKT residuals above tolerance",
            extra={"stationarity": scaled.stationarity, "primal": scaled.primal, "n": n},
        )
    return QpSolution(
        z=z,
        objective=problem.objective(z),
        status=status,
        iterations=iterations,
        residuals=scaled,
        multipliers=multipliers,
        active=tuple(std.keys[i] for i in result.working),
        solve_time=time.perf_counter() - started,
    )


def _working_set_tight(std: _Standardized, z: FloatArray, working: Sequence[int], tol: float) -> bool:
    if not working:
        return True
    slack = std.h[list(working)] - std.G[list(working)] @ z
    return bool(np.all(np.abs(slack) <= tol * max(1.0, float(np.max(np.abs(z))))))


def _unpack_multipliers(problem: QpProblem, std: _Standardized, result: _ActiveSetResult) -> Multipliers:
    m_in = problem.A_in.shape[0]
    eq = np.zeros(problem.A_eq.shape[0])
    upper = np.zeros(m_in)
    lower = np.zeros(m_in)
    mE = std.E.shape[0]
    for value, (kind, row) in zip(result.lam[:mE], std.eq_sources):
        if kind == "eq":
            eq[row] = value
        elif value >= 0.0:
            upper[row] = value
        else:
            lower[row] = -value
    for value, index in zip(result.lam[mE:], result.working):
        row, side = std.keys[index]
        if side > 0:
            upper[row] += value
        else:
            lower[row] += value
    return Multipliers(eq=eq, upper=upper, lower=lower)


def _infeasible(
    problem: QpProblem, certificate: InfeasibilityCertificate, iterations: int, started: float
) -> QpSolution:
    n = problem.n
    logger.debug("QP infeasible", extra={"classes": certificate.classes, "residual": certificate.residual})
    return QpSolution(
        z=np.zeros(n),
        objective=float("nan"),
        status=QpStatus.INFEASIBLE,
        iterations=iterations,
        residuals=KktResiduals(np.inf, certificate.residual, np.inf, -np.inf),
        multipliers=Multipliers(
            eq=np.zeros(problem.A_eq.shape[0]),
            upper=np.zeros(problem.A_in.shape[0]),
            lower=np.zeros(problem.A_in.shape[0]),
        ),
        certificate=certificate,
        solve_time=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# Offline debugging
# ---------------------------------------------------------------------------

_DUMP_BLOCKS = ("P", "q", "A_eq", "b_eq", "A_in", "lb", "ub")


def dump_problem(problem: QpProblem, path: Path | str) -> Path:
    """Write the problem as ``# name rows cols`` headers followed by whitespace matrices."""

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as handle:
        for name in _DUMP_BLOCKS:
            block = np.atleast_2d(getattr(problem, name))
            if getattr(problem, name).ndim == 1:
                block = block.reshape(1, -1)
            handle.write(f"# {name} {block.shape[0]} {block.shape[1]}\n")
            if block.size:
                np.savetxt(handle, block, fmt="%.17g")
    return target


def load_problem(path: Path | str) -> QpProblem:
    blocks: Dict[str, FloatArray] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    i = 0
    while i < len(lines):
        header = lines[i].split()
        if not header or header[0] != "#":
            i += 1
            continue
        name, rows, cols = header[1], int(header[2]), int(header[3])
        data = [np.array(lines[i + 1 + r].split(), dtype=float) for r in range(rows if rows * cols else 0)]
        blocks[name] = np.array(data).reshape(rows, cols) if data else np.zeros((rows, cols))
        i += 1 + (rows if rows * cols else 0)
    vectors = {name: blocks[name].reshape(-1) for name in ("q", "b_eq", "lb", "ub")}
    return QpProblem(P=blocks["P"], A_eq=blocks["A_eq"], A_in=blocks["A_in"], **vectors)
