"""Limited-memory BFGS with a strong Wolfe line search.

The objective contract is a callable `objective(z) -> (value, gradient)` with
a float value and a gradient of the same length as z. Every accepted step
satisfies both strong Wolfe conditions; if the line search cannot find such a
step within its evaluation budget the solver stops and reports it, returning
the best iterate seen so far rather than failing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    max_iterations: int = 100
    c1: float = 1e-4
    c2: float = 0.9
    gradient_tolerance: float = 1e-8
    max_line_search: int = 25

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")


@dataclass
class LbfgsResult:
    z: np.ndarray
    value: float
    grad_norm: float
    history: list = field(default_factory=list)
    iterations: int = 0
    termination: str = "iteration-budget"
    wolfe_ok: list = field(default_factory=list)


def lbfgs_minimize(objective, z0, config: LbfgsConfig = LbfgsConfig()) -> LbfgsResult:
    """Minimize `objective` from z0; returns the best iterate encountered.

    history holds the objective value at z0 and at every accepted iterate (a
    non-increasing sequence); wolfe_ok records, per accepted step, that both
    strong Wolfe conditions held at acceptance.
    """
    z = np.asarray(z0, dtype=float).copy()
    f, g = objective(z)
    g = np.asarray(g, dtype=float)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the initial point")
    history = [f]
    wolfe_ok: list = []
    best_f, best_z, best_g = f, z.copy(), g.copy()
    s_mem: list = []
    y_mem: list = []
    rho_mem: list = []
    termination = "iteration-budget"
    iterations = 0
    for _ in range(config.max_iterations):
        grad_norm = np.linalg.norm(g)
        if grad_norm <= config.gradient_tolerance:
            termination = "gradient-tolerance"
            break
        p = -_two_loop(g, s_mem, y_mem, rho_mem)
        dphi0 = float(g @ p)
        if dphi0 >= 0:  # numerical breakdown of curvature pairs; restart
            s_mem, y_mem, rho_mem = [], [], []
            p = -g
            dphi0 = float(g @ p)
        step = _strong_wolfe(objective, z, p, f, dphi0, config)
        if step is None:
            termination = "line-search-failure"
            break
        alpha, f_new, g_new, both_held = step
        s = alpha * p
        y_diff = g_new - g
        sy = float(s @ y_diff)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y_diff):
            s_mem.append(s)
            y_mem.append(y_diff)
            rho_mem.append(1.0 / sy)
            if len(s_mem) > config.memory:
                s_mem.pop(0)
                y_mem.pop(0)
                rho_mem.pop(0)
        z = z + s
        f, g = f_new, g_new
        iterations += 1
        history.append(f)
        wolfe_ok.append(both_held)
        if f < best_f:
            best_f, best_z, best_g = f, z.copy(), g.copy()
    else:
        termination = "iteration-budget"
    return LbfgsResult(
        z=best_z,
        value=best_f,
        grad_norm=float(np.linalg.norm(best_g)),
        history=history,
        iterations=iterations,
        termination=termination,
        wolfe_ok=wolfe_ok,
    )


def _two_loop(g, s_mem, y_mem, rho_mem):
    """Standard two-loop recursion with gamma-scaled initial Hessian."""
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_mem), reversed(y_mem), reversed(rho_mem)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if s_mem:
        gamma = float(s_mem[-1] @ y_mem[-1]) / float(y_mem[-1] @ y_mem[-1])
        q *= gamma
    for (s, y, rho), a in zip(zip(s_mem, y_mem, rho_mem), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def _strong_wolfe(objective, z, p, f0, dphi0, config: LbfgsConfig):
    """Bracket-and-zoom line search; returns (alpha, f, g, ok) or None."""
    c1, c2 = config.c1, config.c2
    evals = 0

    def phi(alpha):
        nonlocal evals
        evals += 1
        f, g = objective(z + alpha * p)
        return f, np.asarray(g, dtype=float)

    def accept(alpha, f, dphi):
        armijo = f <= f0 + c1 * alpha * dphi0
        curvature = abs(dphi) <= -c2 * dphi0
        return armijo and curvature

    alpha_prev, f_prev, dphi_prev = 0.0, f0, dphi0
    alpha = 1.0
    first = True
    while evals < config.max_line_search:
        f, g = phi(alpha)
        dphi = float(g @ p)
        if not np.isfinite(f) or f > f0 + c1 * alpha * dphi0 or (f >= f_prev and not first):
            return _zoom(
                phi, p, f0, dphi0, alpha_prev, f_prev, dphi_prev, alpha, f, config,
                lambda: config.max_line_search - evals,
            )
        if abs(dphi) <= -c2 * dphi0:
            return alpha, f, g, accept(alpha, f, dphi)
        if dphi >= 0:
            return _zoom(
                phi, p, f0, dphi0, alpha, f, dphi, alpha_prev, f_prev, config,
                lambda: config.max_line_search - evals,
            )
        alpha_prev, f_prev, dphi_prev = alpha, f, dphi
        alpha *= 2.0
        first = False
    return None


def _zoom(phi, p, f0, dphi0, lo, f_lo, dphi_lo, hi, f_hi, config: LbfgsConfig, budget):
    """Nocedal-Wright zoom with safeguarded quadratic interpolation."""
    c1, c2 = config.c1, config.c2
    while budget() > 0:
        span = hi - lo
        denom = 2.0 * (f_hi - f_lo - dphi_lo * span)
        if np.isfinite(denom) and abs(denom) > 1e-300:
            alpha = lo - dphi_lo * span * span / denom
        else:
            alpha = lo + 0.5 * span
        # keep the trial safely interior to the bracket
        near, far = sorted((lo, hi))
        margin = 0.1 * abs(span)
        if not np.isfinite(alpha) or alpha < near + margin or alpha > far - margin:
            alpha = lo + 0.5 * span
        f, g = phi(alpha)
        dphi = float(g @ p)
        if not np.isfinite(f) or f > f0 + c1 * alpha * dphi0 or f >= f_lo:
            hi, f_hi = alpha, f
        else:
            if abs(dphi) <= -c2 * dphi0:
                armijo = f <= f0 + c1 * alpha * dphi0
                return alpha, f, g, armijo and abs(dphi) <= -c2 * dphi0
            if dphi * (hi - lo) >= 0:
                hi, f_hi = lo, f_lo
            lo, f_lo, dphi_lo = alpha, f, dphi
    return None
