"""Self-contained numerical kernels used by the estimators and solvers.

Four kernels live here: weighted least squares on a rank-revealing
orthogonal decomposition, iteratively reweighted logistic regression,
simplex-constrained quadratic minimization, and bisection root finding.
Every kernel is deterministic and dense; each has an independent
brute-force counterpart in the test suite (closed forms, finite
differences, grid enumeration), so nothing here may delegate the actual
optimization to a black box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.special


class CollinearityError(ValueError):
    """Design matrix is numerically rank deficient.

    ``column`` is the index of the first column that adds no new
    direction to the pivoted basis.
    """

    def __init__(self, column: int, message: str):
        self.column = int(column)
        super().__init__(message)


class SeparationError(RuntimeError):
    """Logistic outcome is (quasi-)perfectly predicted; no finite optimum."""


class ConvergenceError(RuntimeError):
    """An iterative kernel ran out of iterations before meeting its tolerance."""


def _as_matrix(x, name):
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _as_vector(x, name):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d array, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


@dataclass(frozen=True)
class WlsProblem:
    """Weighted least squares instance ``min_b sum_i w_i (y_i - x_i'b)^2``.

    Parameters
    ----------
    regressors : ndarray, shape (n, k)
        Design matrix, finite values only.
    outcome : ndarray, shape (n,)
        Response vector.
    weights : ndarray, shape (n,)
        Strictly positive observation weights.
    """

    regressors: np.ndarray
    outcome: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        X = _as_matrix(self.regressors, "regressors")
        y = _as_vector(self.outcome, "outcome")
        w = _as_vector(self.weights, "weights")
        n, k = X.shape
        if k < 1:
            raise ValueError("regressors must have at least one column")
        if y.shape[0] != n or w.shape[0] != n:
            raise ValueError("regressors, outcome and weights must share length")
        if n < k:
            raise ValueError(f"need at least as many rows ({n}) as columns ({k})")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "regressors", X)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class WlsSolution:
    """Solution of a :class:`WlsProblem`.

    ``residuals`` are on the original (unweighted) scale; the normal
    equations hold in the weighted metric, i.e. ``X' diag(w) residuals``
    vanishes to solver precision.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    rank: int


def wls_solve(problem: WlsProblem, rcond: float = 1e-12) -> WlsSolution:
    """Solve weighted least squares via pivoted QR on the scaled design.

    The design is scaled by ``sqrt(w)`` row-wise and factored with a
    rank-revealing (column-pivoted) QR decomposition; normal equations
    are never formed. A relative diagonal drop below ``rcond`` flags the
    pivoted column as collinear.

    Raises
    ------
    CollinearityError
        If the weighted design is numerically rank deficient. The error
        carries the offending column index.
    """
    X, y, w = problem.regressors, problem.outcome, problem.weights
    n, k = X.shape
    sw = np.sqrt(w)
    Q, R, piv = scipy.linalg.qr(X * sw[:, None], mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] <= 0.0:
        raise CollinearityError(piv[0], f"design is identically zero (column {piv[0]})")
    rank = int(np.sum(diag > rcond * diag[0]))
    if rank < k:
        bad = int(piv[rank])
        raise CollinearityError(
            bad, f"design is rank deficient (rank {rank} < {k}); column {bad} is collinear"
        )
    rhs = Q.T @ (y * sw)
    coef_pivoted = scipy.linalg.solve_triangular(R, rhs)
    coefficients = np.empty(k)
    coefficients[piv] = coef_pivoted
    fitted = X @ coefficients
    residuals = y - fitted
    return WlsSolution(coefficients=coefficients, residuals=residuals, fitted=fitted, rank=rank)


@dataclass(frozen=True)
class LogitFit:
    """Result of :func:`logit_fit`.

    ``ll_trace`` holds the log-likelihood after each accepted Newton
    step (starting value first); step halving keeps it nondecreasing.
    """

    coefficients: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    ll_trace: np.ndarray


def _logit_loglik(eta: np.ndarray, z: np.ndarray) -> float:
    # log L = sum z*eta - log(1 + exp(eta)), computed stably.
    return float(np.sum(z * eta - np.logaddexp(0.0, eta)))


def logit_gradient(design: np.ndarray, outcomes: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
    """Analytic score of the logistic log-likelihood.

    Parameters
    ----------
    design : ndarray, shape (n, k)
        Covariate matrix including any intercept column.
    outcomes : ndarray, shape (n,)
        Binary outcomes in {0, 1}.
    coefficients : ndarray, shape (k,)
        Point at which to evaluate the score.

    Returns
    -------
    ndarray, shape (k,)
        ``X' (z - p)`` with ``p`` the fitted probabilities, the exact
        gradient of the log-likelihood at ``coefficients``.
    """
    X = _as_matrix(design, "design")
    z = _as_vector(outcomes, "outcomes")
    theta = _as_vector(coefficients, "coefficients")
    p = scipy.special.expit(X @ theta)
    return X.T @ (z - p)


def logit_fit(
    design: np.ndarray,
    outcomes: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100,
    ridge: float = 1e-10,
) -> LogitFit:
    """Fit a logistic regression by damped Newton iteration (IRLS).

    Parameters
    ----------
    design : ndarray, shape (n, k)
        Covariate matrix including any intercept column.
    outcomes : ndarray, shape (n,)
        Binary outcomes in {0, 1}; both classes must be present.
    tol : float
        Convergence threshold on the accepted Newton step relative to
        the coefficient magnitude, ``max|step| <= tol * (1 + max|coef|)``.
        The step criterion is invariant to covariate scaling, unlike a
        raw score threshold, and under the quadratic convergence of
        Newton's method it bounds the remaining coefficient error by
        roughly ``tol`` itself.
    max_iter : int
        Maximum Newton steps.
    ridge : float
        Floor added to the weighted Hessian diagonal; guards
        quasi-separated designs where the curvature collapses.

    Raises
    ------
    SeparationError
        If the outcome takes a single value, if any iterate classifies
        every observation strictly correctly (a certificate that no
        finite optimum exists), or if the fit saturates every
        observation.
    ConvergenceError
        If ``max_iter`` Newton steps do not reach ``tol``.
    """
    X = _as_matrix(design, "design")
    z = _as_vector(outcomes, "outcomes")
    n, k = X.shape
    if z.shape[0] != n:
        raise ValueError("design and outcomes must share length")
    if not np.all((z == 0.0) | (z == 1.0)):
        raise ValueError("outcomes must be 0/1")
    if z.min() == z.max():
        raise SeparationError("outcome takes a single value; log odds are unbounded")

    theta = np.zeros(k)
    eta = X @ theta
    ll = _logit_loglik(eta, z)
    ll_trace = [ll]
    gradient_norm = np.inf

    for iteration in range(1, max_iter + 1):
        p = scipy.special.expit(eta)
        grad = logit_gradient(X, z, theta)
        gradient_norm = float(np.max(np.abs(grad)))
        curvature = p * (1.0 - p)
        hessian = X.T @ (X * curvature[:, None])
        hessian[np.diag_indices(k)] += ridge
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - ridge prevents this
            raise ConvergenceError(f"Newton system is singular: {exc}") from exc

        scale = 1.0
        for _ in range(60):
            candidate = theta + scale * step
            cand_eta = X @ candidate
            cand_ll = _logit_loglik(cand_eta, z)
            if cand_ll >= ll:
                break
            scale *= 0.5
        else:
            raise ConvergenceError("step halving failed to improve the log-likelihood")
        theta, eta, ll = candidate, cand_eta, cand_ll
        ll_trace.append(ll)
        # a point classifying every observation strictly correctly certifies
        # separation: scaling it up increases the likelihood without bound,
        # while any finite optimum must leave some margin nonpositive
        if np.all((2.0 * z - 1.0) * eta > 0.0):
            raise SeparationError(
                "a direction classifies every observation correctly; "
                "the design separates the classes"
            )
        if np.max(np.abs(theta)) > 1e6:
            raise SeparationError("coefficients diverged; the design separates the classes")
        if scale * float(np.max(np.abs(step))) <= tol * (1.0 + float(np.max(np.abs(theta)))):
            if np.all(np.abs(eta) > 30.0):
                raise SeparationError(
                    "every observation is fitted at a saturated probability; "
                    "the design separates the classes"
                )
            gradient_norm = float(np.max(np.abs(logit_gradient(X, z, theta))))
            return LogitFit(
                coefficients=theta,
                converged=True,
                iterations=iteration,
                gradient_norm=gradient_norm,
                ll_trace=np.asarray(ll_trace),
            )

    raise ConvergenceError(
        f"logistic fit did not reach tol={tol:g} in {max_iter} iterations "
        f"(gradient norm {gradient_norm:.3e})"
    )


@dataclass(frozen=True)
class SimplexQpProblem:
    """Least squares over the probability simplex.

    Find ``W`` minimizing ``|| target - donors @ W ||^2`` subject to
    ``W >= 0`` and ``sum(W) == 1``.

    Parameters
    ----------
    target : ndarray, shape (m,)
        Vector to match.
    donors : ndarray, shape (m, j)
        One column per donor.
    """

    target: np.ndarray
    donors: np.ndarray

    def __post_init__(self):
        X1 = _as_vector(self.target, "target")
        X0 = _as_matrix(self.donors, "donors")
        if X0.shape[0] != X1.shape[0]:
            raise ValueError("target and donors must share row dimension")
        if X0.shape[1] < 1:
            raise ValueError("need at least one donor column")
        object.__setattr__(self, "target", X1)
        object.__setattr__(self, "donors", X0)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Exact Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.shape[0] + 1)
    keep = u + (1.0 - css) / idx > 0
    rho = idx[keep][-1]
    shift = (1.0 - css[rho - 1]) / rho
    w = np.maximum(v + shift, 0.0)
    total = w.sum()
    if total > 0:
        w /= total
    return w


def _qp_loss(G, b, c, w):
    return float(w @ (G @ w) - 2.0 * (b @ w) + c)


def _kkt_gap(grad: np.ndarray, w: np.ndarray, support_eps: float = 1e-12) -> float:
    """Multiplier-form optimality gap on the simplex (0 at a KKT point)."""
    support = w > support_eps
    return float(max(0.0, np.max(grad[support]) - np.min(grad)))


def _solve_on_support(G, b, support):
    """Minimum-norm solve of the sum-to-one equality system on a support set."""
    s = support.size
    kkt = np.zeros((s + 1, s + 1))
    kkt[:s, :s] = 2.0 * G[np.ix_(support, support)]
    kkt[:s, s] = 1.0
    kkt[s, :s] = 1.0
    rhs = np.concatenate([2.0 * b[support], [1.0]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    return sol[:s]


def _fully_corrective(G, b, c, w, loss):
    """Re-solve exactly on the current support, keeping the better point.

    The equality-constrained system on the support is solved by minimum
    norm least squares, which is what breaks ties between degenerate
    donors deterministically. When that solve leaves a weight negative,
    the point moves toward it only until the first weight hits zero,
    that donor leaves the support, and the solve repeats: the usual
    active-set inner step. Each pass drops at least one donor, so the
    loop is finite and ends on the exact minimizer over the face it
    reaches.
    """
    support = np.flatnonzero(w > 1e-12)
    if support.size == 0:
        return w, loss
    current = np.asarray(w[support], dtype=float)
    total = current.sum()
    if total <= 0.0:
        return w, loss
    current = current / total
    for _ in range(support.size):
        ws = _solve_on_support(G, b, support)
        if np.min(ws) >= -1e-10:
            current = np.maximum(ws, 0.0)
            break
        negative = ws < 0.0
        denom = current[negative] - ws[negative]
        alpha = float(np.min(current[negative] / denom))
        alpha = min(1.0, max(0.0, alpha))
        current = current + alpha * (ws - current)
        keep = current > 1e-12
        if keep.all() or not keep.any():
            current = np.maximum(current, 0.0)
            break
        support = support[keep]
        current = np.maximum(current[keep], 0.0)
        current /= current.sum()
    candidate = np.zeros_like(w)
    candidate[support] = current
    total = candidate.sum()
    if total <= 0.0:
        return w, loss
    candidate /= total
    cand_loss = _qp_loss(G, b, c, candidate)
    if cand_loss <= loss + 1e-12 * max(1.0, abs(loss)):
        return candidate, cand_loss
    return w, loss


def simplex_qp_solve(
    problem: SimplexQpProblem, tol: float = 1e-10, max_iter: int = 100000
) -> np.ndarray:
    """Minimize ``||target - donors @ W||^2`` over the probability simplex.

    Projected gradient steps with the exact simplex projection identify
    the active face; a fully corrective equality-constrained solve on
    that face then lands on the exact minimizer. Ties between degenerate
    donors resolve to the minimum-norm solution.

    Returns
    -------
    ndarray, shape (j,)
        Nonnegative weights summing to one exactly (renormalized at
        tolerance scale).
    """
    X1, X0 = problem.target, problem.donors
    j = X0.shape[1]
    if j == 1:
        return np.array([1.0])
    G = X0.T @ X0
    b = X0.T @ X1
    c = float(X1 @ X1)
    scale = 1.0 + float(np.max(np.abs(G))) + float(np.max(np.abs(b)))
    eigmax = float(np.linalg.eigvalsh(G)[-1])
    w = np.full(j, 1.0 / j)
    if eigmax <= 0.0:
        return w  # all donors identically zero; any point is optimal, pick min norm
    step = 1.0 / (2.0 * eigmax)
    loss = _qp_loss(G, b, c, w)

    for iteration in range(1, max_iter + 1):
        grad = 2.0 * (G @ w - b)
        if _kkt_gap(grad, w) <= tol * scale:
            w, loss = _fully_corrective(G, b, c, w, loss)
            return w
        w_next = _project_simplex(w - step * grad)
        loss_next = _qp_loss(G, b, c, w_next)
        if loss_next <= loss:
            w, loss = w_next, loss_next
        else:
            # rounding at a fixed point; polish and stop
            break
        if iteration % 200 == 0:
            w, loss = _fully_corrective(G, b, c, w, loss)

    w, loss = _fully_corrective(G, b, c, w, loss)
    for _ in range(j):
        grad = 2.0 * (G @ w - b)
        if _kkt_gap(grad, w) <= tol * scale:
            return w
        entering = int(np.argmin(grad))
        if w[entering] > 1e-12:
            break
        trial = w.copy()
        trial[entering] = 1e-6
        trial /= trial.sum()
        w_next, loss_next = _fully_corrective(
            G, b, c, trial, _qp_loss(G, b, c, trial)
        )
        if loss_next >= loss - 1e-15 * max(1.0, abs(loss)):
            break
        w, loss = w_next, loss_next
    grad = 2.0 * (G @ w - b)
    if _kkt_gap(grad, w) > 1e-6 * scale:
        raise ConvergenceError(
            f"simplex QP stalled with optimality gap {_kkt_gap(grad, w):.3e}"
        )
    return w


def bisect_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> float:
    """Locate a root of ``fn`` on ``[lo, hi]`` by bisection.

    ``fn(lo)`` and ``fn(hi)`` must bracket a sign change (an exact zero
    at either endpoint is returned directly). The interval is halved
    until its width drops below ``tol * max(1, |midpoint|)``.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    f_lo = fn(lo)
    f_hi = fn(hi)
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)):
        raise ValueError("function is not finite at the bracket endpoints")
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValueError("bracket endpoints do not straddle a sign change")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if (hi - lo) <= tol * max(1.0, abs(mid)):
            return mid
        f_mid = fn(mid)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)
