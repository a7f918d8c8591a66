"""Direct-shooting transcription and a bound-constrained augmented-Lagrangian solver.

Decision vector of the plant problem::

    [Q_air x nc | Q_d x nc | Q_h x nc | S_h x N (cm) | S_Xb (g/L)]

Each move is held for ``blk = ceil(N / nc)`` prediction steps. Inequality
constraints are written ``c(x) >= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .model import INPUT_BOUNDS, ReactorState
from .params import Config

CONVERGED = "converged"
ITERATION_LIMIT = "iteration-limit"
INFEASIBLE_GUESS = "infeasible-guess"

FD_STEP = 1e-6
BOUND_TOL = 1e-9


class ForecastTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class NlpProblem:
    """Box-bounded NLP ``min f(x) s.t. c(x) >= 0, lb <= x <= ub``.

    ``fun(x)`` returns ``(f, c)``. ``jac(x)`` optionally returns
    ``(f, c, grad_f, jac_c)``; without it forward differences are used.
    ``scale`` maps solver variables to decisions (``x = scale * y``).
    """

    x0: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]]
    jac: Callable | None = None
    scale: np.ndarray | None = None
    layout: "PlantLayout | None" = None

    def __post_init__(self):
        for name in ("x0", "lb", "ub"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).copy())
        if not (self.x0.shape == self.lb.shape == self.ub.shape) or self.x0.ndim != 1:
            raise ValueError("x0, lb and ub must be 1-D arrays of equal length")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")
        if self.scale is None:
            width = self.ub - self.lb
            scale = np.where(np.isfinite(width) & (width > 0), width, 1.0)
        else:
            scale = np.asarray(self.scale, dtype=float).copy()
            if scale.shape != self.x0.shape or np.any(scale <= 0):
                raise ValueError("scale must be positive and match x0")
        object.__setattr__(self, "scale", scale)

    @property
    def n(self) -> int:
        return self.x0.size

    def evaluate(self, x) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            f, c, g, J = self.jac(x)
            return float(f), np.atleast_1d(np.asarray(c, float)), np.asarray(g, float), np.atleast_2d(J)
        return fd_derivatives(self.fun, x, self.ub)


@dataclass
class NlpSolution:
    x: np.ndarray
    objective: float
    optimality: float
    iterations: int
    status: str
    constraints: np.ndarray = field(default_factory=lambda: np.zeros(0))
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""
    merit_history: list = field(default_factory=list)  # (outer index, merit) per accepted iterate
    layout: "PlantLayout | None" = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def _fd_steps(x, ub, rel_step):
    h = rel_step * np.maximum(1.0, np.abs(x))
    # step backwards where a forward step would leave the box
    return np.where(x + h > ub, -h, h)


def fd_gradient(f: Callable[[np.ndarray], float], x, ub=None, rel_step: float = FD_STEP) -> np.ndarray:
    """Forward-difference gradient with step ``rel_step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    ub = np.full_like(x, np.inf) if ub is None else np.asarray(ub, dtype=float)
    steps = _fd_steps(x, ub, rel_step)
    f0 = f(x)
    g = np.empty_like(x)
    for i, h in enumerate(steps):
        xp = x.copy()
        xp[i] += h
        g[i] = (f(xp) - f0) / h
    return g


def fd_derivatives(fun, x, ub, rel_step: float = FD_STEP):
    """Forward differences of ``fun(x) -> (f, c)``."""
    f0, c0 = fun(x)
    c0 = np.atleast_1d(np.asarray(c0, dtype=float))
    steps = _fd_steps(x, ub, rel_step)
    g = np.empty(x.size)
    J = np.empty((c0.size, x.size))
    for i, h in enumerate(steps):
        xp = x.copy()
        xp[i] += h
        fp, cp = fun(xp)
        g[i] = (fp - f0) / h
        J[:, i] = (np.atleast_1d(cp) - c0) / h
    return float(f0), c0, g, J


# ---------------------------------------------------------------- plant problem

@dataclass(frozen=True)
class PlantLayout:
    nc: int
    np: int
    blk: int

    @classmethod
    def for_horizon(cls, horizon: int, nc: int) -> "PlantLayout":
        if horizon < 1 or nc < 1:
            raise ValueError("horizon and nc must be at least 1")
        blk = math.ceil(horizon / min(nc, horizon))
        return cls(nc=math.ceil(horizon / blk), np=horizon, blk=blk)

    @property
    def n(self) -> int:
        return 3 * self.nc + self.np + 1

    def split(self, x):
        x = np.asarray(x, dtype=float)
        nc = self.nc
        moves = x[:3 * nc].reshape(3, nc).T.copy()  # rows: (Q_air, Q_d, Q_h)
        return moves, x[3 * nc:3 * nc + self.np].copy(), float(x[-1])

    def pack(self, moves, s_h, s_xb) -> np.ndarray:
        moves = np.asarray(moves, dtype=float).reshape(self.nc, 3)
        return np.concatenate([moves.T.ravel(), np.broadcast_to(s_h, (self.np,)), [s_xb]])

    def per_step(self, x) -> np.ndarray:
        """Expand blocked moves to one row per prediction step."""
        moves, _, _ = self.split(x)
        idx = np.minimum(np.arange(self.np) // self.blk, self.nc - 1)
        return moves[idx]


MOVE_BOUNDS = np.array([INPUT_BOUNDS["Q_air"], INPUT_BOUNDS["Q_d"], INPUT_BOUNDS["Q_h"]])


def transcribe(state: ReactorState, horizon: int, nc: int, forecast, config: Config,
               x_min: float, guess=None) -> NlpProblem:
    """Build the economic shooting problem over ``horizon`` controller periods.

    ``forecast`` holds one disturbance row ``[I0, T_amb, T_soil, WS, RH]`` per
    period, held constant over it. pH is held at ``config.empc.ph_assumed``.
    """
    cfg = config.empc
    forecast = np.asarray(forecast, dtype=float)
    if forecast.ndim != 2 or forecast.shape[0] < horizon:
        raise ForecastTooShortError(
            f"forecast has {0 if forecast.ndim != 2 else forecast.shape[0]} rows, need {horizon}")
    layout = PlantLayout.for_horizon(horizon, nc)
    dist = np.ascontiguousarray(forecast[:horizon, :5])
    p = kernels.pack_params(config.model, config.gas, config.cost, cfg.ph_assumed)
    x0 = np.array([state.X, state.h, state.T, state.DO], dtype=float)
    nsub = int(round(cfg.ts / cfg.predict_substep))
    dt_sub = cfg.ts / nsub
    nc_, N, blk = layout.nc, layout.np, layout.blk
    be = kernels.backend

    lb = layout.pack(np.tile(MOVE_BOUNDS[:, 0], (nc_, 1)), cfg.s_h_min, cfg.s_xb_min)
    ub = layout.pack(np.tile(MOVE_BOUNDS[:, 1], (nc_, 1)), 0.0, 0.0)
    if guess is None:
        guess = layout.pack(np.full((nc_, 3), cfg.initial_flow), 0.0, 0.0)

    def slack_scale(weight, width):
        return min(width, 1.0 / math.sqrt(2.0 * weight)) if weight > 0 else width

    scale = np.concatenate([
        np.repeat(MOVE_BOUNDS[:, 1] - MOVE_BOUNDS[:, 0], nc_),
        np.full(N, slack_scale(cfg.w_sh, -cfg.s_h_min or 1.0)),
        [slack_scale(cfg.w_sxb, -cfg.s_xb_min or 1.0)],
    ])

    def penalties(s_h, s_xb):
        return cfg.w_sh * float(s_h @ s_h) + cfg.w_sxb * s_xb * s_xb

    def constraints(h_end, X_end, s_h, s_xb):
        return np.concatenate([100.0 * (h_end - cfg.h_min) - s_h, [X_end[-1] - x_min - s_xb]])

    def fun(x):
        moves, s_h, s_xb = layout.split(x)
        econ, h_end, X_end = be.predict(x0, np.ascontiguousarray(moves), blk, N, dist, p,
                                        dt_sub, nsub)
        return econ + penalties(s_h, s_xb), constraints(h_end, X_end, s_h, s_xb)

    def jac(x):
        moves, s_h, s_xb = layout.split(x)
        econ, h_end, X_end, g_u, jh, jx = be.predict_jac(
            x0, np.ascontiguousarray(moves), blk, N, dist, p, dt_sub, nsub, FD_STEP)
        f = econ + penalties(s_h, s_xb)
        c = constraints(h_end, X_end, s_h, s_xb)
        g = np.concatenate([g_u, 2.0 * cfg.w_sh * s_h, [2.0 * cfg.w_sxb * s_xb]])
        J = np.zeros((N + 1, layout.n))
        J[:N, :3 * nc_] = 100.0 * jh
        J[:N, 3 * nc_:3 * nc_ + N] = -np.eye(N)
        J[N, :3 * nc_] = jx[-1]
        J[N, -1] = -1.0
        return f, c, g, J

    return NlpProblem(x0=np.clip(guess, lb, ub), lb=lb, ub=ub, fun=fun, jac=jac, scale=scale,
                      layout=layout)


def warm_start(previous: NlpSolution | None, layout: PlantLayout,
               initial_flow: float = 5.0) -> np.ndarray:
    """Initial guess for the next period.

    The previous per-step move sequence is shifted one period, its last move
    repeated, then re-blocked onto ``layout``. Slacks restart at zero.
    """
    if previous is None or previous.layout is None:
        return layout.pack(np.full((layout.nc, 3), initial_flow), 0.0, 0.0)
    seq = previous.layout.per_step(previous.x)
    seq = np.vstack([seq[1:], seq[-1:]]) if len(seq) > 1 else seq
    if len(seq) < layout.np:
        seq = np.vstack([seq, np.repeat(seq[-1:], layout.np - len(seq), axis=0)])
    moves = seq[np.arange(layout.nc) * layout.blk]
    moves = np.clip(moves, MOVE_BOUNDS[:, 0], MOVE_BOUNDS[:, 1])
    return layout.pack(moves, 0.0, 0.0)


# ---------------------------------------------------------------- solver

def _psi(c, lam, rho):
    """Augmented-Lagrangian term for ``c >= 0`` and its derivative in ``c``."""
    active = c <= lam / rho
    val = np.where(active, -lam * c + 0.5 * rho * c * c, -0.5 * lam * lam / rho)
    dval = np.where(active, -lam + rho * c, 0.0)
    return float(val.sum()), dval


def _projected_gradient(y, g, ly, uy):
    return np.clip(y - g, ly, uy) - y


class _Merit:
    """Augmented Lagrangian in scaled variables for fixed multipliers."""

    def __init__(self, problem: NlpProblem, lam, rho):
        self.p = problem
        self.lam = lam
        self.rho = rho
        self.s = problem.scale

    def value(self, y):
        f, c = self.p.fun(y * self.s)
        c = np.atleast_1d(np.asarray(c, dtype=float))
        psi, _ = _psi(c, self.lam, self.rho) if c.size else (0.0, None)
        return f + psi, f, c

    def value_grad(self, y):
        f, c, g, J = self.p.evaluate(y * self.s)
        if c.size:
            psi, dpsi = _psi(c, self.lam, self.rho)
            g = g + J.T @ dpsi
        else:
            psi = 0.0
        return f + psi, g * self.s, f, c, J


def _two_loop(g, S, Y, free):
    q = np.where(free, g, 0.0)
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
        q = np.where(free, q, 0.0)
    if S:
        q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
    for (s, y), a in zip(zip(S, Y), reversed(alphas)):
        rho = 1.0 / (y @ s)
        b = rho * (y @ q)
        q += (a - b) * s
        q = np.where(free, q, 0.0)
    return -q


def _inner(merit: _Merit, y, ly, uy, budget, tol, history, outer, memory=10):
    """Projected L-BFGS with Armijo backtracking; returns (y, iterations, converged, stalled)."""
    phi, g, *_ = merit.value_grad(y)
    S, Y = [], []
    history.append((outer, phi))
    for it in range(budget):
        pg = _projected_gradient(y, g, ly, uy)
        if np.max(np.abs(pg), initial=0.0) < tol:
            return y, it, True, False
        at_lo = (y <= ly + 1e-12) & (g > 0)
        at_hi = (y >= uy - 1e-12) & (g < 0)
        free = ~(at_lo | at_hi)
        d = _two_loop(g, S, Y, free)
        if not g @ d < 0:
            S.clear(); Y.clear()
            d = -np.where(free, g, 0.0)
        accepted = False
        for attempt in range(2):
            step = 1.0
            if not S:
                # first step: move at most one unit in the scaled box
                step = min(1.0, 1.0 / max(np.max(np.abs(d)), 1e-300))
            for _ in range(40):
                y_new = np.clip(y + step * d, ly, uy)
                dy = y_new - y
                if not np.any(dy):
                    break
                phi_new, _, _ = merit.value(y_new)
                if np.isfinite(phi_new) and phi_new <= phi + 1e-4 * (g @ dy):
                    accepted = True
                    break
                step *= 0.5
            if accepted or not S:
                break
            S.clear(); Y.clear()
            d = -np.where(free, g, 0.0)
        if not accepted:
            return y, it, False, True
        phi_new, g_new, *_ = merit.value_grad(y_new)
        s_vec, y_vec = y_new - y, g_new - g
        if s_vec @ y_vec > 1e-10 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            S.append(s_vec); Y.append(y_vec)
            if len(S) > memory:
                S.pop(0); Y.pop(0)
        y, g, phi = y_new, g_new, phi_new
        history.append((outer, phi))
    pg = _projected_gradient(y, g, ly, uy)
    return y, budget, np.max(np.abs(pg), initial=0.0) < tol, False


def solve(problem: NlpProblem, max_iters: int = 200, tol: float = 1e-6, *,
          rho0: float = 10.0, rho_max: float = 1e10, max_outer: int = 30) -> NlpSolution:
    """Augmented-Lagrangian outer loop around projected L-BFGS.

    Iterates always stay inside the bounds. The returned optimality measure is
    the larger of the projected Lagrangian gradient (scaled variables) and
    the complementarity-adjusted constraint violation.
    """
    x0 = problem.x0
    lb, ub, s = problem.lb, problem.ub, problem.scale
    if np.any(x0 < lb - BOUND_TOL) or np.any(x0 > ub + BOUND_TOL):
        f0 = float("nan")
        return NlpSolution(np.clip(x0, lb, ub), f0, float("inf"), 0, INFEASIBLE_GUESS,
                           message="initial guess outside bounds", layout=problem.layout)
    x0 = np.clip(x0, lb, ub)
    f0, c0 = problem.fun(x0)
    c0 = np.atleast_1d(np.asarray(c0, dtype=float))
    if not (np.isfinite(f0) and np.all(np.isfinite(c0))):
        return NlpSolution(x0, float(f0), float("inf"), 0, INFEASIBLE_GUESS,
                           constraints=c0, message="objective not finite at the initial guess",
                           layout=problem.layout)

    y = x0 / s
    ly, uy = lb / s, ub / s
    m = c0.size
    lam = np.zeros(m)
    rho = rho0
    feas_tol = max(tol, 1e-6)
    history: list = []
    iters = 0
    prev_viol = np.inf
    omega = max(tol, 1.0)
    # constrained problems cap each inner solve so the penalty can adapt
    inner_cap = max_iters if m == 0 else max(10, max_iters // 5)
    candidates = []
    message = ""
    status = ITERATION_LIMIT
    for outer in range(max_outer):
        merit = _Merit(problem, lam, rho)
        budget = min(inner_cap, max_iters - iters)
        inner_tol = tol if m == 0 else omega
        y, used, inner_ok, stalled = _inner(merit, y, ly, uy, budget, inner_tol, history, outer)
        iters += used
        f, c, g, J = problem.evaluate(y * s)
        viol = float(np.max(np.abs(np.minimum(c, lam / rho)), initial=0.0))
        lam = np.maximum(0.0, lam - rho * c)
        g_lag = (g - J.T @ lam) * s if m else g * s
        pg = float(np.max(np.abs(_projected_gradient(y, g_lag, ly, uy)), initial=0.0))
        optimality = max(pg, viol)
        infeas = float(np.max(-c, initial=0.0)) if m else 0.0
        key = (0, f) if infeas <= feas_tol else (1, infeas)
        candidates.append((key, y.copy(), f, c.copy(), lam.copy(), optimality))
        if optimality < tol:
            status = CONVERGED
            break
        if iters >= max_iters:
            break
        if m == 0:
            if stalled:
                message = "line search stalled"
                break
            continue
        if stalled and viol <= feas_tol and not inner_ok:
            message = "line search stalled"
            break
        if viol > 0.25 * prev_viol:
            rho = min(rho * 10.0, rho_max)
        prev_viol = viol
        omega = max(tol, 0.1 * omega)
    else:
        message = "outer iteration limit"
    # best outer iterate: feasible by objective, otherwise least infeasible; ties go to the latest
    final = min(reversed(candidates), key=lambda cand: cand[0])
    _, y, f, c, lam, optimality = final
    x = np.clip(y * s, lb, ub)
    return NlpSolution(x=x, objective=float(f), optimality=float(optimality), iterations=iters,
                       status=status, constraints=c, multipliers=lam, message=message,
                       merit_history=history, layout=problem.layout)
