"""Small dense nonlinear constrained solver.

Sequential quadratic approximation: at each iterate the objective is modeled
with a damped-BFGS quadratic and the constraints are linearized; an
active-set KKT step (near-active inequalities treated as equalities, with
multiplier-sign pruning) is taken under an l1 merit line search.  When that
stalls, an augmented-Lagrangian loop over a projected-gradient inner solver
takes over.  Box bounds are enforced exactly by projection throughout.

Success means: all equality residuals and inequality violations within
`tol`, bounds exact, and either a near-zero projected KKT residual or a
converged step.  Callables may carry analytic gradients; otherwise central
finite differences are used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Fn = Callable[[np.ndarray], float]
GradFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class NlpResult:
    x: np.ndarray
    status: str  # "success" | "infeasible"
    objective: float
    iterations: int
    eq_residual: float
    ineq_residual: float


def _fd_grad(fn: Fn, x: np.ndarray, h0: float = 1e-6) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        h = h0 * max(1.0, abs(x[i]))
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2.0 * h)
    return g


class _Problem:
    def __init__(self, objective, eq_cons, ineq_cons, bounds, n,
                 objective_grad=None, eq_grads=None, ineq_grads=None):
        self.f = objective
        self.h = list(eq_cons)
        self.g = list(ineq_cons)
        self.fg = objective_grad or (lambda x: _fd_grad(self.f, x))
        self.hg = list(eq_grads) if eq_grads else [None] * len(self.h)
        self.gg = list(ineq_grads) if ineq_grads else [None] * len(self.g)
        if bounds is None:
            self.lb = np.full(n, -np.inf)
            self.ub = np.full(n, np.inf)
        else:
            self.lb = np.asarray(bounds[0], dtype=np.float64) * np.ones(n)
            self.ub = np.asarray(bounds[1], dtype=np.float64) * np.ones(n)

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lb, self.ub)

    def eval_cons(self, x):
        hv = np.array([fn(x) for fn in self.h])
        gv = np.array([fn(x) for fn in self.g])
        return hv, gv

    def jac(self, fns, grads, x):
        rows = []
        for fn, gfn in zip(fns, grads):
            rows.append(gfn(x) if gfn is not None else _fd_grad(fn, x))
        return np.array(rows) if rows else np.zeros((0, x.size))

    def infeasibility(self, hv, gv) -> float:
        eq = np.max(np.abs(hv)) if hv.size else 0.0
        ineq = np.max(np.maximum(gv, 0.0)) if gv.size else 0.0
        return max(eq, ineq)

    def merit(self, x, nu) -> float:
        hv, gv = self.eval_cons(x)
        viol = (np.sum(np.abs(hv)) if hv.size else 0.0) + \
               (np.sum(np.maximum(gv, 0.0)) if gv.size else 0.0)
        return self.f(x) + nu * viol


def _kkt_step(B, grad_f, rows, rhs):
    """Solve the equality-constrained QP KKT system, regularizing if needed."""
    n = grad_f.size
    m = rows.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = B
    if m:
        kkt[:n, n:] = rows.T
        kkt[n:, :n] = rows
        kkt[n:, n:] = -1e-10 * np.eye(m)
    vec = np.concatenate([-grad_f, rhs])
    try:
        sol = np.linalg.solve(kkt, vec)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, vec, rcond=None)[0]
    if not np.all(np.isfinite(sol)):
        sol = np.linalg.lstsq(kkt, vec, rcond=None)[0]
        sol = np.nan_to_num(sol)
    return sol[:n], sol[n:]


def _projected_kkt_residual(x, grad_l, lb, ub) -> float:
    r = grad_l.copy()
    at_lb = x <= lb + 1e-12
    at_ub = x >= ub - 1e-12
    r[at_lb] = np.minimum(r[at_lb], 0.0)
    r[at_ub] = np.maximum(r[at_ub], 0.0)
    return float(np.max(np.abs(r))) if r.size else 0.0


def _sqp(prob: _Problem, x0: np.ndarray, tol: float, max_iter: int):
    n = x0.size
    x = prob.clip(x0.astype(np.float64).copy())
    B = np.eye(n)
    nu = 1.0
    grad_f = prob.fg(x)
    tiny_steps = 0
    best = None

    for it in range(max_iter):
        hv, gv = prob.eval_cons(x)
        infeas = prob.infeasibility(hv, gv)
        fx = prob.f(x)
        if best is None or (infeas <= tol and fx < best[1]) or \
           (best[2] > tol and infeas < best[2]):
            best = (x.copy(), fx, infeas)

        jac_h = prob.jac(prob.h, prob.hg, x)
        jac_g = prob.jac(prob.g, prob.gg, x)

        # active set: all equalities plus near-active/violated inequalities
        act = [j for j in range(len(prob.g)) if gv[j] >= -max(10 * tol, 1e-6)]
        lam_g = np.zeros(len(prob.g))
        for _ in range(len(act) + 1):
            rows = np.vstack([jac_h] + [jac_g[j:j + 1] for j in act]) \
                if (jac_h.size or act) else np.zeros((0, n))
            rhs = np.concatenate([-hv, [-gv[j] for j in act]]) if rows.shape[0] else np.zeros(0)
            d, mults = _kkt_step(B, grad_f, rows, rhs)
            lam_g[:] = 0.0
            ineq_mults = mults[len(prob.h):]
            if not act:
                break
            worst, worst_j = 0.0, -1
            for pos, j in enumerate(act):
                lam_g[j] = ineq_mults[pos]
                if gv[j] < tol and ineq_mults[pos] < worst:  # keep violated rows active
                    worst, worst_j = ineq_mults[pos], j
            if worst_j < 0 or worst > -1e-10:
                break
            act.remove(worst_j)

        lam_h = mults[:len(prob.h)] if len(prob.h) else np.zeros(0)
        # exact box handling via projection of the trial point
        step_scale = max(np.max(np.abs(mults)) if mults.size else 0.0, 0.0)
        nu = max(nu, 1.1 * step_scale + 1e-3)

        # stationarity check before stepping
        grad_l = grad_f.copy()
        if jac_h.size:
            grad_l += jac_h.T @ lam_h
        if jac_g.size:
            grad_l += jac_g.T @ lam_g
        kkt_res = _projected_kkt_residual(x, grad_l, prob.lb, prob.ub)
        scale = 1.0 + float(np.max(np.abs(grad_f)))
        if infeas <= tol and kkt_res <= max(10 * tol, 1e-5) * scale:
            return x, True, it, lam_h, lam_g

        merit0 = prob.merit(x, nu)
        alpha, accepted = 1.0, False
        x_new = x
        for _ in range(24):
            trial = prob.clip(x + alpha * d)
            if prob.merit(trial, nu) < merit0 - 1e-10 * alpha * float(d @ d):
                x_new, accepted = trial, True
                break
            alpha *= 0.5
        if not accepted:
            break  # stall: hand over to the augmented-Lagrangian loop

        step = x_new - x
        if np.max(np.abs(step)) <= 1e-11 * (1.0 + np.max(np.abs(x))):
            tiny_steps += 1
            if tiny_steps >= 2:
                break
        else:
            tiny_steps = 0

        grad_f_new = prob.fg(x_new)
        # damped BFGS on the Lagrangian gradient difference
        jac_h_new = prob.jac(prob.h, prob.hg, x_new) if len(prob.h) else jac_h
        jac_g_new = prob.jac(prob.g, prob.gg, x_new) if len(prob.g) else jac_g
        gl_old = grad_l
        gl_new = grad_f_new.copy()
        if jac_h_new.size:
            gl_new += jac_h_new.T @ lam_h
        if jac_g_new.size:
            gl_new += jac_g_new.T @ lam_g
        s = step
        y = gl_new - gl_old
        sBs = float(s @ B @ s)
        sy = float(s @ y)
        if sBs > 1e-16:
            theta = 1.0 if sy >= 0.2 * sBs else (0.8 * sBs) / (sBs - sy)
            r = theta * y + (1.0 - theta) * (B @ s)
            sr = float(s @ r)
            if sr > 1e-16:
                Bs = B @ s
                B = B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / sr
        x, grad_f = x_new, grad_f_new

    if best is None:
        best = (x, prob.f(x), prob.infeasibility(*prob.eval_cons(x)))
    return best[0], False, max_iter, np.zeros(len(prob.h)), np.zeros(len(prob.g))


def _aug_lagrangian(prob: _Problem, x0: np.ndarray, tol: float,
                    outer: int = 30, inner: int = 120):
    x = prob.clip(x0.astype(np.float64).copy())
    lam = np.zeros(len(prob.h))
    nu = np.zeros(len(prob.g))
    mu = 10.0
    prev_infeas = np.inf

    def al_value(v):
        hv, gv = prob.eval_cons(v)
        val = prob.f(v)
        if hv.size:
            val += float(lam @ hv) + 0.5 * mu * float(hv @ hv)
        if gv.size:
            shifted = np.maximum(0.0, nu + mu * gv)
            val += float(np.sum(shifted ** 2 - nu ** 2)) / (2.0 * mu)
        return val

    def al_grad(v):
        hv, gv = prob.eval_cons(v)
        g = prob.fg(v)
        if hv.size:
            jac_h = prob.jac(prob.h, prob.hg, v)
            g += jac_h.T @ (lam + mu * hv)
        if gv.size:
            jac_g = prob.jac(prob.g, prob.gg, v)
            g += jac_g.T @ np.maximum(0.0, nu + mu * gv)
        return g

    for _ in range(outer):
        # projected gradient descent with Barzilai-Borwein steps
        step = 1.0 / mu
        g_prev, x_prev = None, None
        for _ in range(inner):
            g = al_grad(x)
            if g_prev is not None:
                s = x - x_prev
                y = g - g_prev
                sy = float(s @ y)
                if sy > 1e-16:
                    step = float(s @ s) / sy
                step = min(max(step, 1e-12), 1e6)
            val0 = al_value(x)
            alpha = step
            moved = False
            for _ in range(30):
                trial = prob.clip(x - alpha * g)
                if al_value(trial) <= val0 - 1e-10 * float((trial - x) @ (trial - x)):
                    x_prev, g_prev = x, g
                    x = trial
                    moved = True
                    break
                alpha *= 0.5
            if not moved or np.max(np.abs(x - x_prev)) <= 1e-12 * (1 + np.max(np.abs(x))):
                break

        hv, gv = prob.eval_cons(x)
        infeas = prob.infeasibility(hv, gv)
        if infeas <= tol:
            return x, True
        if hv.size:
            lam = lam + mu * hv
        if gv.size:
            nu = np.maximum(0.0, nu + mu * gv)
        if infeas > 0.25 * prev_infeas:
            mu = min(mu * 4.0, 1e10)
        prev_infeas = infeas
    return x, prob.infeasibility(*prob.eval_cons(x)) <= tol


def nlp_solve(x0: Sequence[float], objective: Fn,
              eq_cons: Sequence[Fn] = (), ineq_cons: Sequence[Fn] = (),
              bounds: tuple[np.ndarray, np.ndarray] | None = None,
              tol: float = 1e-6, max_iter: int = 200,
              objective_grad: GradFn | None = None,
              eq_grads: Sequence[GradFn | None] | None = None,
              ineq_grads: Sequence[GradFn | None] | None = None) -> NlpResult:
    """Minimize `objective` subject to h(x)=0 (eq_cons), g(x)<=0 (ineq_cons),
    and box bounds.  Returns the best point found with a success/infeasible
    status; bounds hold exactly on any returned point."""
    x0 = np.asarray(x0, dtype=np.float64)
    prob = _Problem(objective, eq_cons, ineq_cons, bounds, x0.size,
                    objective_grad, eq_grads, ineq_grads)

    x, ok, iterations, _, _ = _sqp(prob, x0, tol, max_iter)
    if not ok:
        x_al, ok_al = _aug_lagrangian(prob, x, tol)
        # a short polish run from the AL point often restores stationarity
        x_polish, ok_polish, _, _, _ = _sqp(prob, x_al, tol, max(20, max_iter // 4))
        candidates = [(x_polish, ok_polish), (x_al, ok_al), (x, ok)]
        chosen = None
        for cand, cand_ok in candidates:
            hv, gv = prob.eval_cons(cand)
            if prob.infeasibility(hv, gv) <= tol:
                if chosen is None or prob.f(cand) < prob.f(chosen):
                    chosen = cand
        x = chosen if chosen is not None else x_al
        iterations = max_iter

    hv, gv = prob.eval_cons(x)
    eq_res = float(np.max(np.abs(hv))) if hv.size else 0.0
    ineq_res = float(np.max(np.maximum(gv, 0.0))) if gv.size else 0.0
    status = "success" if max(eq_res, ineq_res) <= tol else "infeasible"
    return NlpResult(x=x, status=status, objective=float(prob.f(x)),
                     iterations=iterations, eq_residual=eq_res,
                     ineq_residual=ineq_res)
