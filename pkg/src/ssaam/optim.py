"""Entropic value at risk and the portfolio allocation programs.

The entropic value at risk of a loss sample ``x_1..x_T`` at level alpha is

    EVaR_alpha = min_{z > 0}  z * log( (1 / (T * alpha)) * sum_j exp(x_j / z) )

an upper bound on both the alpha-quantile (VaR) and the alpha-tail mean
(CVaR) of the sample. Two allocation programs are solved over the long-only
simplex:

* risk minimization: minimize EVaR of the portfolio loss series, optionally
  subject to a floor on the mean return (``mu @ w >= mu_target``),
* return maximization: maximize the mean return subject to a ceiling on the
  portfolio EVaR (``EVaR(w) <= evar_cap``).

Both are expressed as exponential-cone programs in variables (w, q, z, u):

    minimize   q + z * log(1 / (T * alpha))        (resp. maximize mu @ w)
    subject to sum(w) = 1,  w >= 0,  z >= sum(u)
               (-r_j @ w - q, z, u_j) in K_exp     for j = 1..T

and handed to a conic solver through cvxpy (Clarabel preferred, SCS as the
fallback). A solver-independent Frank-Wolfe fallback that nests the scalar
EVaR minimization inside a simplex line search is provided for
cross-validation; tests compare both routes against grid enumeration.

Comparators: the sample-CVaR program in its linear epigraph form (solved as
an LP) and long-only minimum variance (solved by SLSQP).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import ConfigError, InsufficientSamplesError, SsaamError

logger = logging.getLogger(__name__)

_FEAS_TOL = 1e-6
_MAX_SOLVER_ITER = 10_000


class InfeasibleTargetError(SsaamError):
    """Return target or risk cap is unattainable."""


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class RiskSpec:
    """Level and target for one allocation program.

    Exactly the target needed by the chosen program may be set:
    ``mu_target`` for risk minimization (None drops the return constraint),
    ``evar_cap`` for return maximization.
    """

    alpha: float = 0.05
    mu_target: float | None = None
    evar_cap: float | None = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class ConeSolution:
    """Primal solution of one cone program.

    ``w``/``q``/``z``/``u`` are None when the status is not OPTIMAL (or the
    solver produced no iterate). ``objective`` is the program objective:
    the portfolio EVaR for risk minimization, the mean return for return
    maximization.
    """

    w: np.ndarray | None
    q: float | None
    z: float | None
    u: np.ndarray | None
    objective: float
    status: SolveStatus
    iterations: int | None = None


def _validate_returns(returns: np.ndarray) -> np.ndarray:
    r = np.asarray(returns, dtype=np.float64)
    if r.ndim != 2:
        raise ConfigError("returns must be a T x N matrix")
    t, n = r.shape
    if n < 1 or t < n:
        raise InsufficientSamplesError(f"need T >= N >= 1, got T={t}, N={n}")
    if not np.isfinite(r).all():
        raise ConfigError("returns must be finite")
    return r


def _validate_losses(losses, alpha: float) -> np.ndarray:
    arr = np.asarray(losses, dtype=np.float64).ravel()
    if arr.size < 1:
        raise InsufficientSamplesError("need at least one loss observation")
    if not np.isfinite(arr).all():
        raise ConfigError("losses must be finite")
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    return arr


# ---------------------------------------------------------------------------
# scalar risk measures
# ---------------------------------------------------------------------------


def var_scalar(losses, alpha: float) -> float:
    """Empirical value at risk: the lower (1 - alpha) sample quantile.

    With losses sorted ascending this is the ceil((1 - alpha) * T)-th order
    statistic, the smallest threshold with at least (1 - alpha) of the mass
    at or below it.
    """
    arr = _validate_losses(losses, alpha)
    t = arr.size
    k = int(math.ceil((1.0 - alpha) * t))
    k = min(max(k, 1), t)
    return float(np.partition(arr, k - 1)[k - 1])


def cvar_scalar(losses, alpha: float) -> float:
    """Empirical conditional value at risk (alpha-tail mean).

    Evaluated as the Rockafellar-Uryasev minimum eta + mean((x - eta)+) / alpha
    at eta = VaR_alpha, where it is attained for discrete samples.
    """
    arr = _validate_losses(losses, alpha)
    eta = var_scalar(arr, alpha)
    excess = np.clip(arr - eta, 0.0, None)
    return float(eta + excess.sum() / (alpha * arr.size))


def evar_scalar(losses, alpha: float) -> tuple[float, float]:
    """Empirical entropic value at risk and its optimal z.

    Safeguarded one-dimensional minimization of the convex objective
    ``z * log(mean(exp(x / z)) / alpha)`` with log-sum-exp overflow
    protection; ``z == 0.0`` in the result marks a boundary optimum where
    the value equals ``max(losses)``.
    """
    arr = _validate_losses(losses, alpha)
    value, z_star = kernels.evar_value(arr, alpha)
    return float(value), float(z_star)


# ---------------------------------------------------------------------------
# cone programs (cvxpy route)
# ---------------------------------------------------------------------------

_PROBLEM_CACHE: dict[tuple, tuple] = {}


def _pick_solver() -> str:
    import cvxpy as cp

    installed = cp.installed_solvers()
    for name in ("CLARABEL", "ECOS", "SCS"):
        if name in installed:
            return name
    raise ConfigError("no exponential-cone capable solver installed")


def _get_problem(t: int, n: int, alpha: float, mode: str, with_target: bool):
    """Build (or fetch) the parametrized cone program for one shape.

    Problems are parametrized in the returns matrix and targets so repeated
    solves on new data skip canonicalization. The cache is per process; do
    not share across threads.
    """
    import cvxpy as cp

    key = (t, n, alpha, mode, with_target)
    cached = _PROBLEM_CACHE.get(key)
    if cached is not None:
        return cached

    r_param = cp.Parameter((t, n), name="returns")
    mu_param = cp.Parameter(n, name="mu")
    target_param = cp.Parameter(name="target") if (with_target or mode == "max_return") else None

    w = cp.Variable(n, nonneg=True)
    q = cp.Variable()
    z = cp.Variable(nonneg=True)
    u = cp.Variable(t)
    k = math.log(1.0 / (t * alpha))
    risk_expr = q + z * k

    constraints = [
        cp.sum(w) == 1,
        z >= cp.sum(u),
        cp.constraints.ExpCone(-r_param @ w - q, cp.multiply(z, np.ones(t)), u),
    ]
    if mode == "min_evar":
        if with_target:
            constraints.append(mu_param @ w >= target_param)
        objective = cp.Minimize(risk_expr)
    elif mode == "max_return":
        constraints.append(risk_expr <= target_param)
        objective = cp.Maximize(mu_param @ w)
    else:  # pragma: no cover
        raise ValueError(mode)

    problem = cp.Problem(objective, constraints)
    entry = (problem, r_param, mu_param, target_param, w, q, z, u)
    _PROBLEM_CACHE[key] = entry
    return entry


def _solve_cone(returns: np.ndarray, alpha: float, mode: str, target: float | None,
                solver: str | None) -> ConeSolution:
    import cvxpy as cp

    t, n = returns.shape
    with_target = target is not None and mode == "min_evar"
    problem, r_param, mu_param, target_param, w, q, z, u = _get_problem(
        t, n, alpha, mode, with_target
    )
    r_param.value = returns
    mu_param.value = returns.mean(axis=0)
    if target_param is not None:
        target_param.value = float(target)  # type: ignore[arg-type]

    # deterministic fallback chain: an ill-conditioned window can trip one
    # interior-point method without being genuinely unsolvable
    chain = [solver] if solver else [_pick_solver()]
    if chain[0] != "SCS":
        chain.append("SCS")
    last = ConeSolution(None, None, None, None, math.nan, SolveStatus.MAX_ITER)
    for name in chain:
        try:
            problem.solve(solver=name)
        except cp.error.SolverError as exc:
            logger.warning("cone solve with %s failed: %s", name, exc)
            continue
        stats = problem.solver_stats
        iters = getattr(stats, "num_iters", None) if stats is not None else None
        if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            status = SolveStatus.OPTIMAL if problem.status == cp.OPTIMAL else SolveStatus.MAX_ITER
            return ConeSolution(
                w=np.asarray(w.value, dtype=np.float64),
                q=float(q.value),
                z=float(z.value),
                u=np.asarray(u.value, dtype=np.float64),
                objective=float(problem.value),
                status=status,
                iterations=iters,
            )
        if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return ConeSolution(None, None, None, None, math.nan, SolveStatus.INFEASIBLE, iters)
        last = ConeSolution(None, None, None, None, math.nan, SolveStatus.MAX_ITER, iters)
    return last


def min_evar_portfolio(returns, spec: RiskSpec, solver: str | None = None) -> ConeSolution:
    """Minimize portfolio EVaR on the long-only simplex.

    ``spec.mu_target`` adds the return floor ``mu @ w >= mu_target``; None
    solves the unrestricted program. The objective of an OPTIMAL solution
    equals the scalar EVaR of the realized loss series ``-returns @ w``.
    """
    r = _validate_returns(returns)
    if spec.evar_cap is not None:
        raise ConfigError("evar_cap is not used by risk minimization")
    if spec.mu_target is not None and spec.mu_target > r.mean(axis=0).max() + 1e-12:
        return ConeSolution(None, None, None, None, math.nan, SolveStatus.INFEASIBLE)
    return _solve_cone(r, spec.alpha, "min_evar", spec.mu_target, solver)


def max_return_evar_portfolio(returns, spec: RiskSpec, solver: str | None = None) -> ConeSolution:
    """Maximize mean return subject to ``EVaR(w) <= spec.evar_cap``.

    Infeasible when the cap lies below the minimal attainable EVaR. At the
    optimum the cap binds unless the highest-mean vertex already satisfies
    it.
    """
    r = _validate_returns(returns)
    if spec.evar_cap is None:
        raise ConfigError("return maximization needs evar_cap")
    if spec.mu_target is not None:
        raise ConfigError("mu_target is not used by return maximization")
    if not math.isfinite(spec.evar_cap):
        # unconstrained linear objective on the simplex: best-mean vertex
        mu = r.mean(axis=0)
        i = int(np.argmax(mu))
        w = np.zeros(r.shape[1])
        w[i] = 1.0
        value, z_star = evar_scalar(-r[:, i], spec.alpha)
        q = value - (z_star if z_star > 0 else 0.0) * math.log(1.0 / (r.shape[0] * spec.alpha))
        return ConeSolution(w, q, z_star, None, float(mu[i]), SolveStatus.OPTIMAL)
    return _solve_cone(r, spec.alpha, "max_return", spec.evar_cap, solver)


def sanitize_weights(w: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Clip solver noise off a simplex point and renormalize."""
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < -tol):
        raise ConfigError(f"weights violate the long-only bound by more than {tol}")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise ConfigError("weights sum to zero")
    return w / total


def default_mu_target(returns) -> float:
    """Mean of the per-asset mean returns; attainable by construction."""
    r = _validate_returns(returns)
    return float(r.mean(axis=0).mean())


def default_evar_cap(returns, alpha: float = 0.05, solver: str | None = None) -> float:
    """A feasible risk budget: minimal EVaR plus half its magnitude."""
    r = _validate_returns(returns)
    base = min_evar_portfolio(r, RiskSpec(alpha=alpha), solver=solver)
    if base.status is not SolveStatus.OPTIMAL:
        raise SsaamError("could not establish the minimal EVaR for the default cap")
    g0 = base.objective
    return g0 + 0.5 * abs(g0) + 1e-9


# ---------------------------------------------------------------------------
# comparators
# ---------------------------------------------------------------------------


def min_cvar_portfolio(returns, alpha: float = 0.05, mu_target: float | None = None) -> np.ndarray:
    """Long-only minimum sample CVaR via the linear epigraph program.

    Variables (w, eta, zeta): minimize eta + sum(zeta) / (alpha * T) with
    zeta_j >= -r_j @ w - eta, zeta >= 0, plus the simplex and optional
    return-floor constraints.
    """
    from scipy.optimize import linprog

    r = _validate_returns(returns)
    t, n = r.shape
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    mu = r.mean(axis=0)
    if mu_target is not None and mu_target > mu.max() + 1e-12:
        raise InfeasibleTargetError(f"mu_target {mu_target} exceeds best asset mean {mu.max()}")
    if n == 1:
        return np.array([1.0])

    c = np.concatenate([np.zeros(n), [1.0], np.full(t, 1.0 / (alpha * t))])
    a_ub = np.zeros((t + (1 if mu_target is not None else 0), n + 1 + t))
    a_ub[:t, :n] = -r
    a_ub[:t, n] = -1.0
    a_ub[:t, n + 1 :] = -np.eye(t)
    b_ub = np.zeros(t)
    if mu_target is not None:
        a_ub[t, :n] = -mu
        b_ub = np.concatenate([b_ub, [-mu_target]])
    a_eq = np.zeros((1, n + 1 + t))
    a_eq[0, :n] = 1.0
    bounds = [(0.0, None)] * n + [(None, None)] + [(0.0, None)] * t
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleTargetError("CVaR program infeasible")
    if not res.success:
        raise SsaamError(f"CVaR LP failed: {res.message}")
    return sanitize_weights(res.x[:n])


def min_variance_portfolio(returns, mu_target: float | None = None) -> np.ndarray:
    """Long-only minimum variance, optionally with a return floor."""
    from scipy.optimize import minimize

    r = _validate_returns(returns)
    t, n = r.shape
    if n == 1:
        return np.array([1.0])
    mu = r.mean(axis=0)
    if mu_target is not None and mu_target > mu.max() + 1e-12:
        raise InfeasibleTargetError(f"mu_target {mu_target} exceeds best asset mean {mu.max()}")
    cov = np.cov(r, rowvar=False)

    x0 = np.full(n, 1.0 / n)
    if mu_target is not None and mu @ x0 < mu_target:
        # blend toward the best-mean vertex until the floor holds
        best = np.zeros(n)
        best[int(np.argmax(mu))] = 1.0
        lam = (mu_target - mu @ x0) / (mu @ best - mu @ x0)
        x0 = (1 - lam) * x0 + lam * best

    constraints = [{"type": "eq", "fun": lambda w: w.sum() - 1.0, "jac": lambda w: np.ones(n)}]
    if mu_target is not None:
        constraints.append(
            {"type": "ineq", "fun": lambda w: mu @ w - mu_target, "jac": lambda w: mu}
        )
    res = minimize(
        lambda w: w @ cov @ w,
        x0,
        jac=lambda w: 2.0 * cov @ w,
        bounds=[(0.0, 1.0)] * n,
        constraints=constraints,
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-14},
    )
    if not res.success and np.abs(res.x.sum() - 1.0) > 1e-6:
        raise SsaamError(f"variance QP failed: {res.message}")
    w = sanitize_weights(res.x)
    if mu_target is not None and mu @ w < mu_target - 1e-7:
        raise InfeasibleTargetError("variance program could not meet the return floor")
    return w


# ---------------------------------------------------------------------------
# Frank-Wolfe fallback (solver-independent cross-check)
# ---------------------------------------------------------------------------


def _portfolio_evar(r: np.ndarray, w: np.ndarray, alpha: float) -> tuple[float, float]:
    value, z_star = kernels.evar_value(np.ascontiguousarray(-(r @ w)), alpha)
    return float(value), float(z_star)


def _evar_gradient(r: np.ndarray, w: np.ndarray, alpha: float) -> np.ndarray:
    """Envelope gradient: softmax-weighted average of -r_j at the optimal z."""
    losses = -(r @ w)
    _, z_star = kernels.evar_value(np.ascontiguousarray(losses), alpha)
    if z_star <= 0.0:
        # boundary optimum: subgradient of max(losses)
        mask = losses >= losses.max() - 1e-12
        p = mask / mask.sum()
    else:
        e = losses / z_star
        e -= e.max()
        p = np.exp(e)
        p /= p.sum()
    return -(r.T @ p)


def _constrained_vertices(mu: np.ndarray, mu_target: float | None) -> np.ndarray:
    """Vertices of the simplex intersected with {mu @ w >= mu_target}."""
    n = mu.size
    eye = np.eye(n)
    if mu_target is None:
        return eye
    keep = [eye[i] for i in range(n) if mu[i] >= mu_target - 1e-12]
    if not keep:
        raise InfeasibleTargetError("return floor above every asset mean")
    for i in range(n):
        if mu[i] < mu_target:
            continue
        for k in range(n):
            if mu[k] >= mu_target:
                continue
            theta = (mu_target - mu[k]) / (mu[i] - mu[k])
            keep.append(theta * eye[i] + (1 - theta) * eye[k])
    return np.array(keep)


def min_evar_frank_wolfe(
    returns,
    spec: RiskSpec,
    max_iter: int = 2000,
    gap_tol: float = 1e-6,
    w0: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Risk minimization by Frank-Wolfe over the constrained simplex.

    Nests the scalar EVaR evaluation inside an exact golden-section line
    search; the linear subproblem is solved by enumerating the polytope
    vertices (the feasible set has at most N + N^2 of them). Used as the
    solver-independent cross-check of the cone route.
    """
    r = _validate_returns(returns)
    mu = r.mean(axis=0)
    vertices = _constrained_vertices(mu, spec.mu_target)
    n = r.shape[1]

    w = np.asarray(w0, dtype=np.float64).copy() if w0 is not None else np.full(n, 1.0 / n)
    if spec.mu_target is not None and mu @ w < spec.mu_target:
        # repair the start onto the feasible set by blending toward the
        # best-mean vertex
        best = np.zeros(n)
        best[int(np.argmax(mu))] = 1.0
        lam = (spec.mu_target - mu @ w) / (mu @ best - mu @ w)
        lam = min(max(lam, 0.0), 1.0)
        w = (1 - lam) * w + lam * best

    value, _ = _portfolio_evar(r, w, spec.alpha)
    for _ in range(max_iter):
        grad = _evar_gradient(r, w, spec.alpha)
        s = vertices[int(np.argmin(vertices @ grad))]
        gap = float(grad @ (w - s))
        if gap <= gap_tol * max(1.0, abs(value)):
            break
        # golden-section line search on the segment toward s
        lo, hi = 0.0, 1.0
        invphi = 0.6180339887498949
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        f1, _ = _portfolio_evar(r, w + x1 * (s - w), spec.alpha)
        f2, _ = _portfolio_evar(r, w + x2 * (s - w), spec.alpha)
        for _ in range(60):
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - invphi * (hi - lo)
                f1, _ = _portfolio_evar(r, w + x1 * (s - w), spec.alpha)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + invphi * (hi - lo)
                f2, _ = _portfolio_evar(r, w + x2 * (s - w), spec.alpha)
        gamma = 0.5 * (lo + hi)
        w = w + gamma * (s - w)
        value, _ = _portfolio_evar(r, w, spec.alpha)
    return w, value


def max_return_frank_wolfe(
    returns,
    spec: RiskSpec,
    max_iter: int = 1500,
    bisect_iter: int = 40,
) -> tuple[np.ndarray, float]:
    """Return maximization by inverting the risk frontier.

    The minimal-EVaR value g(m) under a return floor m is nondecreasing in
    m, so the largest mean with g(m) <= cap is found by bisection, nesting
    the Frank-Wolfe risk minimizer. Returns (weights, mean return); raises
    InfeasibleTargetError when the cap is below the minimal EVaR.
    """
    r = _validate_returns(returns)
    if spec.evar_cap is None:
        raise ConfigError("return maximization needs evar_cap")
    cap = float(spec.evar_cap)
    alpha = spec.alpha
    mu = r.mean(axis=0)

    base_spec = RiskSpec(alpha=alpha)
    w_min, g0 = min_evar_frank_wolfe(r, base_spec, max_iter=max_iter)
    if g0 > cap + _FEAS_TOL:
        raise InfeasibleTargetError(f"risk cap {cap} below minimal EVaR {g0}")

    i_best = int(np.argmax(mu))
    best_vertex = np.zeros(mu.size)
    best_vertex[i_best] = 1.0
    g_best, _ = _portfolio_evar(r, best_vertex, alpha)
    if g_best <= cap + _FEAS_TOL:
        return best_vertex, float(mu[i_best])

    m_lo = float(mu @ w_min)
    m_hi = float(mu[i_best])
    w = w_min
    for _ in range(bisect_iter):
        m_mid = 0.5 * (m_lo + m_hi)
        w_mid, g_mid = min_evar_frank_wolfe(
            r, RiskSpec(alpha=alpha, mu_target=m_mid), max_iter=max_iter, w0=w
        )
        if g_mid <= cap:
            m_lo, w = m_mid, w_mid
        else:
            m_hi = m_mid
        if m_hi - m_lo < 1e-9 * max(1.0, abs(m_hi)):
            break
    return w, float(mu @ w)


# ---------------------------------------------------------------------------
# solution checking
# ---------------------------------------------------------------------------


def cone_feasibility_violations(
    sol: ConeSolution, returns, spec: RiskSpec, mode: str = "min_evar"
) -> dict[str, float]:
    """Worst violation of every primal constraint (all <= tol for a cert).

    Keys: simplex_sum, long_only, z_positive, u_budget, exp_cone, and the
    mode's target constraint (return_floor or risk_cap).
    """
    r = _validate_returns(returns)
    if sol.w is None or sol.q is None or sol.z is None:
        raise SsaamError("solution carries no iterate to check")
    t = r.shape[0]
    w, q, z = sol.w, sol.q, sol.z
    u = sol.u if sol.u is not None else np.array([])
    out = {
        "simplex_sum": abs(float(w.sum()) - 1.0),
        "long_only": max(0.0, -float(w.min())),
        "z_positive": max(0.0, -z),
    }
    if u.size:
        out["u_budget"] = max(0.0, float(u.sum()) - z)
        x = -(r @ w) - q
        if z > 0:
            exponent = np.minimum(x / z, 500.0)
            out["exp_cone"] = max(0.0, float((z * np.exp(exponent) - u).max()))
        else:
            out["exp_cone"] = max(0.0, float(x.max()))
    mu = r.mean(axis=0)
    if mode == "min_evar" and spec.mu_target is not None:
        out["return_floor"] = max(0.0, spec.mu_target - float(mu @ w))
    if mode == "max_return" and spec.evar_cap is not None:
        k = math.log(1.0 / (t * spec.alpha))
        out["risk_cap"] = max(0.0, (q + z * k) - spec.evar_cap)
    return out
