"""Equality-constrained basis pursuit, BPDN, and a toy-scale l0 oracle.

Solves the real-valued problems

    BP:    min ||x||_1  subject to  A x = b
    BPDN:  min ||x||_1  subject to  ||A x - b||_2 <= radius

with an alternating-direction (ADMM) scheme with over-relaxation.  Both
variants need only matrix-vector products plus one cached Cholesky
factorization of an m x m row Gram per problem:

* BP alternates a Euclidean projection onto {x : A x = b} (through the
  factorization of A A') with soft thresholding, so the returned iterate
  is feasible to machine precision.
* BPDN splits as x = z, A x = s with s constrained to the l2 ball of
  radius ``radius`` around b; the x-update solves (I + A'A) x = r via
  the Woodbury identity using the factorization of (I + A A').

Problems are normalized by ||b|| internally so that convergence speed
does not depend on the measurement scale.  All updates are plain numpy
arithmetic: identical problems and tolerances give identical results
bit-for-bit on one platform.

The l0 oracle enumerates supports by increasing cardinality and solves
least squares on each; it is intentionally guarded to toy sizes and
exists to certify the l1 route on small instances.
"""

from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

__all__ = [
    "Tolerances",
    "L1Problem",
    "SolverResult",
    "OracleResult",
    "solve_bp",
    "solve_bpdn",
    "l0_oracle",
    "enumerate_feasible_supports",
    "problem_to_json",
    "problem_from_json",
    "result_to_json",
    "result_from_json",
]

OVER_RELAXATION = 1.8
RHO_PERIOD = 64          # iterations between penalty rebalancing checks
RHO_RATIO = 10.0
RHO_SCALE = 2.0
ABS_STOP = 1e-12


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerances.

    ``feasibility_tol`` is relative to (1 + ||b||); ``optimality_tol``
    bounds the accepted gap in the l1 objective relative to the true
    constrained optimum.
    """

    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-6
    max_iterations: int = 50000


@dataclass(frozen=True)
class L1Problem:
    """A basis-pursuit instance; ``noise_radius = 0`` means equality BP."""

    matrix: np.ndarray
    rhs: np.ndarray
    noise_radius: float = 0.0
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        b = np.asarray(self.rhs, dtype=float).ravel()
        if a.shape[0] != b.size:
            raise ValueError("matrix and rhs dimensions disagree")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("matrix must be at least 1 x 1")
        if self.noise_radius < 0:
            raise ValueError("noise_radius must be nonnegative")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rhs", b)


@dataclass(frozen=True)
class SolverResult:
    solution: np.ndarray
    l1_value: float
    residual_norm: float
    iterations: int
    status: str  # 'converged' | 'max_iter' | 'infeasible'


@dataclass(frozen=True)
class OracleResult:
    solution: np.ndarray
    support: tuple[int, ...]
    residual_norm: float
    cardinality: int


def _soft(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _row_gram_solver(a: np.ndarray, shift: float):
    """Return v -> (shift*I + A A')^-1 v via Cholesky, or pinv fallback."""
    gram = a @ a.T
    if shift:
        gram = gram + shift * np.eye(a.shape[0])
    try:
        factor = linalg.cho_factor(gram, check_finite=False)
        return lambda v: linalg.cho_solve(factor, v, check_finite=False)
    except linalg.LinAlgError:
        pinv = np.linalg.pinv(gram, rcond=1e-13)
        return lambda v: pinv @ v


def _zero_solution(problem: L1Problem) -> SolverResult:
    n = problem.matrix.shape[1]
    return SolverResult(solution=np.zeros(n), l1_value=0.0, residual_norm=0.0,
                        iterations=0, status="converged")


def solve_bp(problem: L1Problem) -> SolverResult:
    """Minimize ||x||_1 subject to A x = b.

    The x-iterate is the projection onto the constraint set, so it is
    feasible at every step; iteration stops when the primal and dual
    ADMM residuals fall below tolerances tied to ``optimality_tol``.
    Returns status ``infeasible`` when even the least-squares residual
    of the system exceeds the feasibility tolerance.
    """
    if problem.noise_radius != 0.0:
        raise ValueError("solve_bp expects noise_radius == 0")
    a, b, tol = problem.matrix, problem.rhs, problem.tolerances
    n = a.shape[1]
    scale = float(np.linalg.norm(b))
    if scale == 0.0:
        return _zero_solution(problem)
    bs = b / scale
    solve_gram = _row_gram_solver(a, 0.0)

    least_norm = a.T @ solve_gram(bs)
    feas = float(np.linalg.norm(a @ least_norm - bs))
    if feas > tol.feasibility_tol * (1.0 + 1.0):
        return SolverResult(solution=least_norm * scale,
                            l1_value=float(np.abs(least_norm).sum()) * scale,
                            residual_norm=feas * scale,
                            iterations=0, status="infeasible")

    rho = 1.0
    rel_stop = 0.1 * tol.optimality_tol
    z = least_norm.copy()
    u = np.zeros(n)
    x = least_norm
    status = "max_iter"
    it = 0
    for it in range(1, tol.max_iterations + 1):
        v = z - u
        x = v - a.T @ solve_gram(a @ v - bs)
        xr = OVER_RELAXATION * x + (1.0 - OVER_RELAXATION) * z
        z_new = _soft(xr + u, 1.0 / rho)
        u += xr - z_new
        r_norm = float(np.linalg.norm(x - z_new))
        s_norm = rho * float(np.linalg.norm(z_new - z))
        z = z_new
        eps_pri = math.sqrt(n) * ABS_STOP + rel_stop * max(
            float(np.linalg.norm(x)), float(np.linalg.norm(z)))
        eps_dual = math.sqrt(n) * ABS_STOP + rel_stop * rho * float(np.linalg.norm(u))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            status = "converged"
            break
        if it % RHO_PERIOD == 0:
            if r_norm > RHO_RATIO * s_norm:
                rho *= RHO_SCALE
                u /= RHO_SCALE
            elif s_norm > RHO_RATIO * r_norm:
                rho /= RHO_SCALE
                u *= RHO_SCALE

    solution = x * scale
    residual = float(np.linalg.norm(a @ solution - b))
    return SolverResult(solution=solution,
                        l1_value=float(np.abs(solution).sum()),
                        residual_norm=residual, iterations=it, status=status)


def solve_bpdn(problem: L1Problem) -> SolverResult:
    """Minimize ||x||_1 subject to ||A x - b||_2 <= noise_radius.

    Splits as x = z, A x = s with s projected onto the residual ball;
    the constrained set must be reachable, i.e. the least-squares
    residual of the full system must not exceed the radius.
    """
    radius = problem.noise_radius
    if radius <= 0.0:
        raise ValueError("solve_bpdn expects noise_radius > 0")
    a, b, tol = problem.matrix, problem.rhs, problem.tolerances
    m, n = a.shape
    scale = float(np.linalg.norm(b))
    if scale == 0.0:
        return _zero_solution(problem)
    bs = b / scale
    eps = radius / scale

    lstsq_resid = float(np.linalg.norm(a @ np.linalg.lstsq(a, bs, rcond=None)[0] - bs))
    if lstsq_resid > eps * (1.0 + tol.feasibility_tol) + ABS_STOP:
        return SolverResult(solution=np.zeros(n), l1_value=0.0,
                            residual_norm=lstsq_resid * scale,
                            iterations=0, status="infeasible")

    solve_gram = _row_gram_solver(a, 1.0)

    def x_update(r):
        return r - a.T @ solve_gram(a @ r)

    def ball(v):
        d = v - bs
        nrm = float(np.linalg.norm(d))
        if nrm <= eps:
            return v
        return bs + d * (eps / nrm)

    rho = 1.0
    rel_stop = 0.1 * tol.optimality_tol
    z = np.zeros(n)
    s = bs.copy()
    u1 = np.zeros(n)
    u2 = np.zeros(m)
    x = np.zeros(n)
    status = "max_iter"
    it = 0
    for it in range(1, tol.max_iterations + 1):
        x = x_update((z - u1) + a.T @ (s - u2))
        ax = a @ x
        xr = OVER_RELAXATION * x + (1.0 - OVER_RELAXATION) * z
        axr = OVER_RELAXATION * ax + (1.0 - OVER_RELAXATION) * s
        z_new = _soft(xr + u1, 1.0 / rho)
        s_new = ball(axr + u2)
        u1 += xr - z_new
        u2 += axr - s_new
        r_norm = math.hypot(float(np.linalg.norm(x - z_new)),
                            float(np.linalg.norm(ax - s_new)))
        s_norm = rho * math.hypot(float(np.linalg.norm(z_new - z)),
                                  float(np.linalg.norm(a.T @ (s_new - s))))
        z, s = z_new, s_new
        eps_pri = math.sqrt(n + m) * ABS_STOP + rel_stop * max(
            float(np.linalg.norm(x)), float(np.linalg.norm(z)),
            float(np.linalg.norm(s)))
        eps_dual = math.sqrt(n) * ABS_STOP + rel_stop * rho * math.hypot(
            float(np.linalg.norm(u1)), float(np.linalg.norm(u2)))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            resid = float(np.linalg.norm(ax - bs))
            if resid <= eps * (1.0 + tol.feasibility_tol) + ABS_STOP:
                status = "converged"
                break
        if it % RHO_PERIOD == 0:
            if r_norm > RHO_RATIO * s_norm:
                rho *= RHO_SCALE
                u1 /= RHO_SCALE
                u2 /= RHO_SCALE
            elif s_norm > RHO_RATIO * r_norm:
                rho /= RHO_SCALE
                u1 *= RHO_SCALE
                u2 *= RHO_SCALE

    solution = x * scale
    residual = float(np.linalg.norm(a @ solution - b))
    return SolverResult(solution=solution,
                        l1_value=float(np.abs(solution).sum()),
                        residual_norm=residual, iterations=it, status=status)


def _support_fit(a: np.ndarray, b: np.ndarray, support: tuple[int, ...]) -> tuple[np.ndarray, float]:
    x = np.zeros(a.shape[1])
    if support:
        cols = list(support)
        coef, *_ = np.linalg.lstsq(a[:, cols], b, rcond=None)
        x[cols] = coef
    resid = float(np.linalg.norm(a @ x - b))
    return x, resid


def l0_oracle(matrix: np.ndarray, rhs: np.ndarray, max_support: int,
              feasibility_tol: float = 1e-7) -> OracleResult:
    """Sparsest solution by exhaustive support enumeration (toy scale).

    Enumerates supports of cardinality 0, 1, ... up to ``max_support``
    and returns the first whose least-squares residual is within
    ``feasibility_tol * (1 + ||b||)``; the cardinality of that support
    is certifiably minimal.  Guarded to n <= 20, max_support <= 6.
    """
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    b = np.asarray(rhs, dtype=float).ravel()
    n = a.shape[1]
    if n > 20:
        raise ValueError("l0 oracle is limited to n <= 20 columns")
    if max_support > 6:
        raise ValueError("l0 oracle is limited to max_support <= 6")
    tol = feasibility_tol * (1.0 + float(np.linalg.norm(b)))
    for card in range(max_support + 1):
        for support in itertools.combinations(range(n), card):
            x, resid = _support_fit(a, b, support)
            if resid <= tol:
                return OracleResult(solution=x, support=support,
                                    residual_norm=resid, cardinality=card)
    raise ValueError(f"no solution with support size <= {max_support}")


def enumerate_feasible_supports(matrix: np.ndarray, rhs: np.ndarray,
                                max_support: int,
                                feasibility_tol: float = 1e-7) -> list[OracleResult]:
    """All feasible supports up to ``max_support``, smallest first.

    Companion to :func:`l0_oracle` for tests that need to reason about
    uniqueness of the sparsest solution or compare l1 norms across every
    enumerated feasible support.
    """
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    b = np.asarray(rhs, dtype=float).ravel()
    n = a.shape[1]
    if n > 20:
        raise ValueError("enumeration is limited to n <= 20 columns")
    if max_support > 6:
        raise ValueError("enumeration is limited to max_support <= 6")
    tol = feasibility_tol * (1.0 + float(np.linalg.norm(b)))
    found = []
    for card in range(max_support + 1):
        for support in itertools.combinations(range(n), card):
            x, resid = _support_fit(a, b, support)
            if resid <= tol:
                found.append(OracleResult(solution=x, support=support,
                                          residual_norm=resid, cardinality=card))
    return found


# --- JSON fixtures -------------------------------------------------------
#
# Regression fixtures store floats as decimal literals with 17 significant
# digits, which round-trips float64 exactly.

def _dump(value, out: io.StringIO) -> None:
    if isinstance(value, float):
        out.write(format(value, ".17g"))
    elif isinstance(value, (int, np.integer)):
        out.write(str(int(value)))
    elif isinstance(value, str):
        out.write(json.dumps(value))
    elif isinstance(value, (list, tuple, np.ndarray)):
        out.write("[")
        for i, item in enumerate(np.asarray(value).tolist() if isinstance(value, np.ndarray) else value):
            if i:
                out.write(", ")
            _dump(item, out)
        out.write("]")
    elif isinstance(value, dict):
        out.write("{")
        for i, (k, v) in enumerate(value.items()):
            if i:
                out.write(", ")
            out.write(json.dumps(k))
            out.write(": ")
            _dump(v, out)
        out.write("}")
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def _dumps(value) -> str:
    out = io.StringIO()
    _dump(value, out)
    return out.getvalue()


def problem_to_json(problem: L1Problem) -> str:
    return _dumps({
        "matrix": [[float(v) for v in row] for row in problem.matrix],
        "rhs": [float(v) for v in problem.rhs],
        "noise_radius": float(problem.noise_radius),
        "tolerances": {
            "feasibility_tol": problem.tolerances.feasibility_tol,
            "optimality_tol": problem.tolerances.optimality_tol,
            "max_iterations": problem.tolerances.max_iterations,
        },
    })


def problem_from_json(text: str) -> L1Problem:
    doc = json.loads(text)
    tols = doc.get("tolerances", {})
    return L1Problem(
        matrix=np.asarray(doc["matrix"], dtype=float),
        rhs=np.asarray(doc["rhs"], dtype=float),
        noise_radius=float(doc.get("noise_radius", 0.0)),
        tolerances=replace(Tolerances(), **tols),
    )


def result_to_json(result: SolverResult) -> str:
    return _dumps({
        "solution": [float(v) for v in result.solution],
        "l1_value": float(result.l1_value),
        "residual_norm": float(result.residual_norm),
        "iterations": int(result.iterations),
        "status": result.status,
    })


def result_from_json(text: str) -> SolverResult:
    doc = json.loads(text)
    return SolverResult(
        solution=np.asarray(doc["solution"], dtype=float),
        l1_value=float(doc["l1_value"]),
        residual_norm=float(doc["residual_norm"]),
        iterations=int(doc["iterations"]),
        status=str(doc["status"]),
    )
