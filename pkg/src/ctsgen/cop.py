"""Constrained-optimization generation and fine-tuning of time series.

Each sample is produced by perturbing a seed series inside sliding windows:
every remaining window position is solved as a small box-bounded nonlinear
program (objective pushes away from / toward the seed, hard constraints and
a realism budget restrict the move), the best successful window is kept,
and the process repeats.  If no retry produces a change that passes
verification, the budget doubles and the search restarts from the seed.

The realism budget bounds the L2 distance between a statistical property
of the candidate and of the seed: per-feature autocorrelation of returns
(price-like data) or of raw values, concatenated across features.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import constraints as con
from . import tensor as T
from .data import TimeSeries
from .errors import NumericError, UsageError
from .solver import nlp_solve


def returns(x: TimeSeries | np.ndarray) -> TimeSeries:
    """Per-step percentage change, one row shorter than the input."""
    arr = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    denom = arr[:-1]
    zero = np.argwhere(denom == 0.0)
    if zero.size:
        t, j = zero[0]
        raise NumericError(f"returns: zero value at (t={t}, feature={j})")
    return TimeSeries((arr[1:] - arr[:-1]) / denom)


def autocorr(x, lag: int) -> np.ndarray:
    """Discrete autocorrelation rho(tau) for tau = 1..lag of a univariate series."""
    arr = np.asarray(x.values if isinstance(x, TimeSeries) else x, dtype=np.float64).reshape(-1)
    n = arr.size
    if lag < 1 or lag > n - 2:
        raise UsageError(f"lag must be in [1, {n - 2}] for a series of length {n}")
    mu = arr.mean()
    var = np.mean((arr - mu) ** 2)
    if var == 0.0:
        raise NumericError("autocorr: zero variance")
    centered = arr - mu
    out = np.empty(lag)
    for tau in range(1, lag + 1):
        out[tau - 1] = np.mean(centered[tau:] * centered[:-tau]) / var
    return out


@dataclass(frozen=True)
class RealismSpec:
    """Which property the candidate must keep close to the seed's."""

    kind: str = "autocorr_of_returns"  # or "autocorr_of_values"
    lag: int = 5

    def vector(self, values: np.ndarray) -> np.ndarray:
        if self.kind == "autocorr_of_returns":
            base = returns(values).values
        elif self.kind == "autocorr_of_values":
            base = values if values.ndim == 2 else values[:, None]
        else:
            raise UsageError(f"unknown realism property '{self.kind}'")
        return np.concatenate([autocorr(base[:, j], self.lag)
                               for j in range(base.shape[1])])


@dataclass(frozen=True)
class CopConfig:
    budget: float = 0.1
    window: int = 3
    overlap: float = 0.5
    retries: int = 10
    iterations: int = 2
    trend_weight: float = 1.0
    lag: int = 5
    mode: str = "generate"  # or "finetune"
    solver_tol: float = 1e-6
    solver_max_iter: int = 200
    report_tol: float = 1e-4

    def __post_init__(self):
        if self.budget <= 0 or self.window < 2 or not (0 <= self.overlap < 1):
            raise UsageError("need budget > 0, window >= 2, overlap in [0,1)")
        if self.retries < 1 or self.iterations < 1:
            raise UsageError("retries and iterations must be >= 1")
        if not 0.0 <= self.trend_weight <= 1.0:
            raise UsageError("trend weight must lie in [0,1]")
        if self.mode not in ("generate", "finetune"):
            raise UsageError(f"unknown mode '{self.mode}'")


@dataclass
class SolveReport:
    status: str = "max-retries"  # success | infeasible | max-retries
    retry: int = 0
    budget: float = 0.0
    objective: float = float("nan")
    realism_residual: float = float("nan")
    hard_residuals: list[tuple[str, float]] = field(default_factory=list)
    windows_solved: int = 0
    wall_time: float = 0.0
    window_size: int = 0
    notes: str = ""


def window_positions(length: int, window: int, overlap: float) -> list[tuple[int, int]]:
    """Half-open window ranges covering the series, e.g. (0,4), (2,6), ..."""
    stride = max(1, int(round(window * (1.0 - overlap))))
    starts = list(range(0, length - window + 1, stride))
    if starts[-1] != length - window:
        starts.append(length - window)
    return [(s, s + window) for s in starts]


def _needs_full_window(cset: con.ConstraintSet, length: int, window: int) -> bool:
    """Whole-series solves for couplings a sliding window cannot see."""
    for c in cset.constraints:
        if c.kind is con.Kind.TREND:
            return True
        if c.kind in (con.Kind.EQ, con.Kind.FIXED_POINT):
            return True
        if c.kind is con.Kind.INEQ:
            refs = con.expr_time_refs(c.expr, length)
            if refs and (max(refs) - min(refs) + 1) > window:
                return True
    return False


def _constraint_refs(c: con.Constraint, length: int) -> set[int]:
    if c.kind is con.Kind.FIXED_POINT:
        return {c.i}
    if c.expr is not None:
        return con.expr_time_refs(c.expr, length)
    return set(range(length))


def _expr_value_and_windowed_grad(expr, full: np.ndarray, window: tuple[int, int]):
    """Value of an expression and its gradient w.r.t. the window's variables."""
    graph = T.Graph()
    node = graph.leaf(full)
    root = con.compile_expr(expr, node)
    grad = graph.backward(root)[node].data
    s, e = window
    return float(root.data), grad[s:e, :].reshape(-1)


def cop_solve(seed_ts: TimeSeries, cset: con.ConstraintSet,
              realism: RealismSpec | None, cfg: CopConfig) -> tuple[TimeSeries | None, SolveReport]:
    start_time = time.perf_counter()
    seed = seed_ts.values
    length, feats = seed.shape
    window = min(cfg.window, length)
    if _needs_full_window(cset, length, window):
        window = length

    lo = 0.98 * float(seed.min())
    hi = 1.02 * float(seed.max())
    if lo > hi:  # all-negative data flips the scaled bounds
        lo, hi = hi, lo

    trends = cset.trends()
    trend_arr = trends[0].series.values if trends else None
    omega = cfg.trend_weight if trend_arr is not None else 0.0
    hard = cset.hard()
    soft_extras = [c for c in cset.constraints
                   if c.hardness == "soft" and c.kind is not con.Kind.TREND]

    target = realism.vector(seed) if realism is not None else None

    def realism_residual(values: np.ndarray) -> float:
        if realism is None:
            return 0.0
        return float(np.linalg.norm(realism.vector(values) - target))

    def verify(values: np.ndarray, budget: float) -> tuple[bool, list[tuple[str, float]], float]:
        ok, violations = con.is_satisfied(cset, values, tol=cfg.report_tol)
        res = realism_residual(values)
        if realism is not None and res > budget:
            ok = False
        return ok, violations, res

    def record_report(rep: SolveReport, values: np.ndarray, budget: float, retry: int):
        rep.retry = retry
        rep.budget = budget
        rep.realism_residual = realism_residual(values)
        rep.window_size = window
        residuals = []
        arr = values
        for c in hard:
            if c.kind is con.Kind.FIXED_POINT:
                residuals.append((c.describe(), abs(arr[c.i, c.j] - c.value)))
            elif c.kind is con.Kind.EQ:
                residuals.append((c.describe(), abs(con.eval_expr(c.expr, arr))))
            else:
                residuals.append((c.describe(), max(0.0, con.eval_expr(c.expr, arr))))
        rep.hard_residuals = residuals
        rep.wall_time = time.perf_counter() - start_time

    report = SolveReport()

    # fine-tuning an already-feasible candidate is a no-op by construction:
    # the L2 objective is minimized at zero change
    if cfg.mode == "finetune":
        ok, _, res = verify(seed, cfg.budget * 2.0)
        if ok:
            report.status = "success"
            report.objective = 0.0
            record_report(report, seed, cfg.budget * 2.0, retry=0)
            report.notes = "seed already feasible"
            return TimeSeries(seed.copy()), report

    any_window_success = False
    for retry in range(1, cfg.retries + 1):
        budget = cfg.budget * (2.0 ** retry)
        current = seed.copy()
        positions = window_positions(length, window, cfg.overlap)
        remaining = list(positions)
        best_objective = float("nan")

        for _ in range(cfg.iterations):
            if not remaining:
                break
            best = None
            for pos in remaining:
                result = _solve_window(current, seed, pos, hard, soft_extras,
                                       (cset.weights.lambda_g, cset.weights.lambda_h),
                                       trend_arr, omega, realism, target,
                                       budget, (lo, hi), cfg)
                if result is None:
                    continue
                value, candidate = result
                if best is None or value < best[0]:
                    best = (value, candidate, pos)
            if best is None:
                continue
            any_window_success = True
            best_objective = best[0]
            current = best[1]
            remaining.remove(best[2])
            report.windows_solved += 1

        if not np.array_equal(current, seed):
            ok, violations, _ = verify(current, budget)
            if ok:
                report.status = "success"
                report.objective = best_objective
                record_report(report, current, budget, retry)
                return TimeSeries(current), report
            report.notes = "; ".join(f"{label}: {residual:.3g}"
                                     for label, residual in violations[:4])

    report.status = "max-retries" if any_window_success else "infeasible"
    record_report(report, seed, cfg.budget * (2.0 ** cfg.retries), cfg.retries)
    report.objective = float("nan")
    return None, report


def _solve_window(current: np.ndarray, seed: np.ndarray, pos: tuple[int, int],
                  hard, soft_extras, soft_weights, trend_arr, omega,
                  realism, target, budget, box, cfg: CopConfig):
    """One window sub-problem; returns (objective value, composed series) on success."""
    s, e = pos
    length = current.shape[0]
    n_feats = current.shape[1]

    def compose(v: np.ndarray) -> np.ndarray:
        full = current.copy()
        full[s:e, :] = v.reshape(e - s, n_feats)
        return full

    sign = -1.0 if cfg.mode == "generate" else 1.0
    lam_g, lam_h = soft_weights

    def objective(v: np.ndarray) -> float:
        full = compose(v)
        val = sign * (1.0 - omega) * float(np.sum((seed - full) ** 2))
        if trend_arr is not None:
            val += omega * float(np.sum((trend_arr - full) ** 2))
        for c in soft_extras:
            g = con.eval_expr(c.expr, full)
            if c.kind is con.Kind.INEQ:
                val += lam_g * max(0.0, g)
            else:
                val += lam_h * g * g
        return val

    def objective_grad(v: np.ndarray) -> np.ndarray:
        full = compose(v)
        grad = sign * (1.0 - omega) * 2.0 * (full - seed)
        if trend_arr is not None:
            grad = grad + omega * 2.0 * (full - trend_arr)
        grad_w = grad[s:e, :].reshape(-1)
        if soft_extras:
            for c in soft_extras:
                val, g_w = _expr_value_and_windowed_grad(c.expr, full, pos)
                if c.kind is con.Kind.INEQ:
                    if val > 0:
                        grad_w = grad_w + lam_g * g_w
                else:
                    grad_w = grad_w + lam_h * 2.0 * val * g_w
        return grad_w

    eq_fns, eq_grads = [], []
    ineq_fns, ineq_grads = [], []
    window_times = set(range(s, e))
    for c in hard:
        refs = _constraint_refs(c, length)
        if refs and not (refs & window_times):
            continue  # constant w.r.t. this window's variables
        if c.kind is con.Kind.FIXED_POINT:
            i, j, r = c.i, c.j, c.value

            def h_fn(v, i=i, j=j, r=r):
                return float(compose(v)[i, j] - r)

            def h_grad(v, i=i, j=j):
                g = np.zeros((e - s, n_feats))
                if s <= i < e:
                    g[i - s, j] = 1.0
                return g.reshape(-1)

            eq_fns.append(h_fn)
            eq_grads.append(h_grad)
        elif c.kind is con.Kind.EQ:
            expr = c.expr

            def h_fn(v, expr=expr):
                return con.eval_expr(expr, compose(v))

            def h_grad(v, expr=expr):
                return _expr_value_and_windowed_grad(expr, compose(v), pos)[1]

            eq_fns.append(h_fn)
            eq_grads.append(h_grad)
        else:
            expr = c.expr

            def g_fn(v, expr=expr):
                return con.eval_expr(expr, compose(v))

            def g_grad(v, expr=expr):
                return _expr_value_and_windowed_grad(expr, compose(v), pos)[1]

            ineq_fns.append(g_fn)
            ineq_grads.append(g_grad)

    if realism is not None:
        budget_sq = budget * budget

        def realism_fn(v: np.ndarray) -> float:
            try:
                diff = realism.vector(compose(v)) - target
            except NumericError:
                return 1e6  # degenerate probe (zero variance/denominator)
            return float(diff @ diff - budget_sq)

        ineq_fns.append(realism_fn)
        ineq_grads.append(None)  # finite differences

    x0 = current[s:e, :].reshape(-1)
    if cfg.mode == "generate":
        # the seed is a stationary point of the maximize-distance objective;
        # nudge each variable toward its farther box edge to break symmetry
        farther = np.where(np.abs(x0 - box[0]) > np.abs(x0 - box[1]), box[0], box[1])
        x0 = x0 + 0.05 * (farther - x0)
    result = nlp_solve(x0, objective, eq_cons=eq_fns, ineq_cons=ineq_fns,
                       bounds=(np.full(x0.size, box[0]), np.full(x0.size, box[1])),
                       tol=cfg.solver_tol, max_iter=cfg.solver_max_iter,
                       objective_grad=objective_grad,
                       eq_grads=eq_grads, ineq_grads=ineq_grads)
    if result.status != "success":
        return None
    return result.objective, compose(result.x)
