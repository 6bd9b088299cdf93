"""Gradient-based control optimization restricted to a waveform subspace.

Every strategy is expressed as a linear parametrization ``u = T x`` of the
control. The optimizer works on ``x`` with gradient ``T^t grad_u J``, so a
steepest-descent step changes the control by ``-alpha T T^t grad_u J``:

========  =================  ==================
strategy  ``T``              ``T T^t``
========  =================  ==================
NONE      identity           identity
PINV      ``B+ B``           ``B+ B``
COEFF     ``B^t``            ``B^t B``
ORTHO     ``V`` (SVD of B)   ``V V^t = B+ B``
========  =================  ==================

PINV iterates directly on time-domain controls. Each iteration evaluates the
cost and full-space gradient at the current control (which already lies in the
subspace), projects the gradient, takes a line-search step and stops once
the objective decreases by less than ``epsilon``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import DivergenceError, NumericalError
from .subspace import SubspaceProjector, as_basis, coefficients, pinv


class Strategy(str, enum.Enum):
    PINV = "PINV"
    COEFF = "COEFF"
    ORTHO = "ORTHO"
    NONE = "NONE"


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    GRADIENT = "gradient_tolerance"
    MAX_ITERS = "max_iters"
    LINE_SEARCH = "line_search_failed"


class ProjectionStrategy:
    """Parametrization of the control used by :func:`optimize`.

    Build with :meth:`pinv`, :meth:`coeff`, :meth:`ortho` or :meth:`none`, or
    with ``ProjectionStrategy(kind, basis)``.
    """

    def __init__(self, kind, basis=None, rank_tol=None):
        self.kind = Strategy(kind)
        self.projector = None
        self._B = None
        self._Vt = None
        if self.kind is Strategy.NONE:
            return
        if basis is None:
            raise ValueError(f"strategy {self.kind.value} needs a basis")
        Bp = pinv(as_basis(basis), rank_tol)
        self.projector = SubspaceProjector(Bp)
        self._pinv = Bp
        if self.kind is Strategy.COEFF:
            self._B = Bp.source
        elif self.kind is Strategy.ORTHO:
            self._Vt = np.array(Bp.row_space)

    @classmethod
    def pinv(cls, basis, rank_tol=None):
        return cls(Strategy.PINV, basis, rank_tol)

    @classmethod
    def coeff(cls, basis, rank_tol=None):
        return cls(Strategy.COEFF, basis, rank_tol)

    @classmethod
    def ortho(cls, basis, rank_tol=None):
        return cls(Strategy.ORTHO, basis, rank_tol)

    @classmethod
    def none(cls):
        return cls(Strategy.NONE)

    @property
    def name(self):
        return self.kind.value

    def __repr__(self):
        return f"ProjectionStrategy({self.name})"

    def to_params(self, u):
        """Parameters ``x`` of the starting point; the control is first projected."""
        u = np.asarray(u, dtype=float)
        if self.kind is Strategy.NONE:
            return u.copy()
        if self.kind is Strategy.PINV:
            return self.projector.apply(u)
        if self.kind is Strategy.COEFF:
            return coefficients(self._pinv, u)
        return self._Vt @ u

    def to_control(self, x):
        if self.kind is Strategy.NONE:
            return x
        if self.kind is Strategy.PINV:
            return self.projector.apply(x)
        if self.kind is Strategy.COEFF:
            return self._B.T @ x
        return self._Vt.T @ x

    def pullback(self, g):
        """Gradient with respect to the parameters, given the time-domain gradient."""
        if self.kind is Strategy.NONE:
            return g
        if self.kind is Strategy.PINV:
            return self.projector.apply(g)
        if self.kind is Strategy.COEFF:
            return self._B @ g
        return self._Vt @ g

    def direction_matrix(self, N=None):
        """The ``N x N`` matrix ``T T^t`` applied to time-domain gradients."""
        if self.kind is Strategy.NONE:
            if N is None:
                raise ValueError("N is required for the NONE strategy")
            return np.eye(N)
        if self.kind is Strategy.PINV:
            return self.projector.matrix
        if self.kind is Strategy.COEFF:
            return self._B.T @ self._B
        return self._Vt.T @ self._Vt

    def subspace_residual(self, u):
        """``||(I - P) u||`` for the waveform subspace (0 for NONE)."""
        if self.projector is None:
            return 0.0
        return float(np.linalg.norm(u - self.projector.apply(u)))


@dataclass
class OptimizerConfig:
    """Settings for :func:`optimize`.

    ``epsilon`` is the threshold on the per-iteration objective decrease.
    ``initial_step`` seeds the steepest-descent line search; later iterations
    start from twice the previously accepted step.
    """

    algorithm: str = "quasi_newton"
    epsilon: float = 1e-6
    max_iters: int = 500
    gtol: float = 1e-12
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    shrink: float = 0.5
    initial_step: float = 1.0
    max_line_search: int = 60

    def __post_init__(self):
        if self.algorithm not in ("steepest_descent", "quasi_newton"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("line-search constants need 0 < c1 < c2 < 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    grad_norm: float
    step_size: float


@dataclass
class OptimizationRun:
    strategy: str
    algorithm: str
    initial_guess: np.ndarray
    history: list = field(default_factory=list)
    final_control: np.ndarray | None = None
    final_objective: float = math.nan
    termination_reason: Termination | None = None
    n_evaluations: int = 0

    @property
    def iterations(self):
        return len(self.history) - 1

    @property
    def objectives(self):
        return np.array([r.objective for r in self.history])

    @property
    def grad_norms(self):
        return np.array([r.grad_norm for r in self.history])

    def history_columns(self):
        return {
            "iteration": [r.iteration for r in self.history],
            "objective": [r.objective for r in self.history],
            "grad_norm": [r.grad_norm for r in self.history],
            "step_size": [r.step_size for r in self.history],
            "strategy": [self.strategy] * len(self.history),
        }

    def history_to_csv(self, path):
        return io.write_columns(path, self.history_columns())


class _Objective:
    """Evaluates ``f(x) = J(T x)`` and caches the last value/gradient pair."""

    def __init__(self, problem, strategy):
        self.problem = problem
        self.strategy = strategy
        self.count = 0

    def value_and_grad(self, x):
        self.count += 1
        try:
            f, g = self.problem(self.strategy.to_control(x))
        except DivergenceError:
            return math.inf, None
        if not math.isfinite(f):
            return math.inf, None
        return float(f), self.strategy.pullback(np.asarray(g, dtype=float))

    def value(self, x):
        cost = getattr(self.problem, "cost", None)
        if cost is None:
            return self.value_and_grad(x)[0]
        self.count += 1
        try:
            f = cost(self.strategy.to_control(x))
        except DivergenceError:
            return math.inf
        return float(f) if math.isfinite(f) else math.inf


def _armijo(obj, x, f, g, d, alpha, cfg):
    """Backtracking until ``f(x + a d) <= f + c1 a g.d``; returns ``(a, f_new)`` or ``None``."""
    slope = float(g @ d)
    for _ in range(cfg.max_line_search):
        f_new = obj.value(x + alpha * d)
        if f_new <= f + cfg.c1 * alpha * slope:
            return alpha, f_new
        alpha *= cfg.shrink
    return None


def _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
    """Cubic minimizer on ``[a_lo, a_hi]`` safeguarded to the inner 80 %."""
    lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
    width = hi - lo
    trial = math.nan
    if math.isfinite(f_hi) and d_hi is not None:
        d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
        disc = d1 * d1 - d_lo * d_hi
        if disc >= 0:
            d2 = math.copysign(math.sqrt(disc), a_hi - a_lo)
            denom = d_hi - d_lo + 2.0 * d2
            if denom != 0:
                trial = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom
    if not (math.isfinite(trial) and lo + 0.1 * width <= trial <= hi - 0.1 * width):
        trial = 0.5 * (lo + hi)
    return trial


def _wolfe(obj, x, f0, g0, d, alpha, cfg):
    """Strong-Wolfe bracketing/zoom line search.

    Returns ``(alpha, f, g)`` or ``None``. A diverging trial counts as an
    infinite objective and bounds the bracket from above.
    """
    slope0 = float(g0 @ d)
    c1, c2 = cfg.c1, cfg.c2
    a_prev, f_prev, s_prev = 0.0, f0, slope0
    budget = cfg.max_line_search

    def zoom(a_lo, f_lo, s_lo, a_hi, f_hi, s_hi, budget):
        while budget > 0:
            budget -= 1
            a = _interpolate(a_lo, f_lo, s_lo, a_hi, f_hi, s_hi)
            f, g = obj.value_and_grad(x + a * d)
            s = float(g @ d) if g is not None else None
            if f > f0 + c1 * a * slope0 or f >= f_lo:
                a_hi, f_hi, s_hi = a, f, s
            else:
                if abs(s) <= -c2 * slope0:
                    return a, f, g
                if s * (a_hi - a_lo) >= 0:
                    a_hi, f_hi, s_hi = a_lo, f_lo, s_lo
                a_lo, f_lo, s_lo = a, f, s
            if abs(a_hi - a_lo) <= 1e-16 * max(a_hi, a_lo):
                break
        # no curvature-satisfying point; fall back to the best sufficient decrease
        if a_lo > 0 and f_lo <= f0 + c1 * a_lo * slope0:
            f, g = obj.value_and_grad(x + a_lo * d)
            return a_lo, f, g
        return None

    first = True
    while budget > 0:
        budget -= 1
        f, g = obj.value_and_grad(x + alpha * d)
        s = float(g @ d) if g is not None else None
        if f > f0 + c1 * alpha * slope0 or (not first and f >= f_prev):
            return zoom(a_prev, f_prev, s_prev, alpha, f, s, budget)
        if abs(s) <= -c2 * slope0:
            return alpha, f, g
        if s >= 0:
            return zoom(alpha, f, s, a_prev, f_prev, s_prev, budget)
        a_prev, f_prev, s_prev = alpha, f, s
        alpha *= 2.0
        first = False
    return None


def _lbfgs_direction(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        a = (s @ q) / (y @ s)
        alphas.append(a)
        q -= a * y
    if S:
        q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
    for (s, y), a in zip(zip(S, Y), reversed(alphas)):
        b = (y @ q) / (y @ s)
        q += (a - b) * s
    return -q


def optimize(problem, strategy, config=None, u0=None, callback=None):
    """Minimize ``problem`` over the controls admitted by ``strategy``.

    Parameters
    ----------
    problem : callable
        ``problem(u) -> (J, grad_u J)`` for a length-``N`` control. An
        optional ``problem.cost(u)`` is used for gradient-free line-search trials.
    strategy : ProjectionStrategy
    config : OptimizerConfig, optional
    u0 : array_like, optional
        Initial guess (zero control by default). It is projected onto the
        subspace before the first evaluation.
    callback : callable, optional
        Called as ``callback(iteration, u, J)`` for the start point and every
        accepted iterate.

    Returns
    -------
    OptimizationRun
    """
    cfg = config or OptimizerConfig()
    N = problem.N if u0 is None else np.asarray(u0).shape[0]
    u0 = np.zeros(N) if u0 is None else np.asarray(u0, dtype=float).copy()
    obj = _Objective(problem, strategy)
    run = OptimizationRun(strategy.name, cfg.algorithm, u0)

    x = strategy.to_params(u0)
    f, g = obj.value_and_grad(x)
    if not math.isfinite(f):
        raise NumericalError("objective is not finite at the initial guess")
    run.history.append(IterationRecord(0, f, float(np.linalg.norm(g)), 0.0))
    if callback is not None:
        callback(0, strategy.to_control(x), f)

    S, Y = [], []
    step = cfg.initial_step
    reason = Termination.MAX_ITERS
    for it in range(1, cfg.max_iters + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm < cfg.gtol:
            reason = Termination.GRADIENT
            break
        if cfg.algorithm == "steepest_descent":
            d = -g
            found = _armijo(obj, x, f, g, d, step, cfg)
            if found is not None:
                alpha, _ = found
                x_new = x + alpha * d
                f_new, g_new = obj.value_and_grad(x_new)
        else:
            d = _lbfgs_direction(g, S, Y)
            if not float(d @ g) < 0:
                S.clear(), Y.clear()
                d = -g
            alpha0 = 1.0 if S else min(1.0, 1.01 / gnorm)
            found = _wolfe(obj, x, f, g, d, alpha0, cfg)
            if found is not None:
                alpha, f_new, g_new = found
                x_new = x + alpha * d
        if found is None or g_new is None or not f_new < f:
            reason = Termination.LINE_SEARCH
            break
        if cfg.algorithm == "quasi_newton":
            s_vec, y_vec = x_new - x, g_new - g
            if s_vec @ y_vec > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
                S.append(s_vec)
                Y.append(y_vec)
                if len(S) > cfg.memory:
                    S.pop(0), Y.pop(0)
        else:
            step = 2.0 * alpha
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        run.history.append(IterationRecord(it, f, float(np.linalg.norm(g)), float(alpha)))
        if callback is not None:
            callback(it, strategy.to_control(x), f)
        if decrease < cfg.epsilon:
            reason = Termination.CONVERGED
            break

    run.final_control = strategy.to_control(x).copy()
    run.final_objective = f
    run.termination_reason = reason
    run.n_evaluations = obj.count
    return run


def post_truncate(u_star, P):
    """Project an unconstrained optimum onto the subspace once, after the fact."""
    if not isinstance(P, SubspaceProjector):
        P = SubspaceProjector(P)
    return P.apply(u_star)


@dataclass
class StrategyComparison:
    runs: dict
    errors: dict

    def aligned_objectives(self):
        """Objective histories padded with NaN to a common length."""
        length = max((len(r.history) for r in self.runs.values()), default=0)
        out = {}
        for name, run in self.runs.items():
            col = np.full(length, np.nan)
            obj = run.objectives
            col[: obj.size] = obj
            out[name] = col
        return np.arange(length), out

    def to_csv(self, path):
        cols = {"iteration": [], "objective": [], "grad_norm": [], "step_size": [], "strategy": []}
        for run in self.runs.values():
            for key, values in run.history_columns().items():
                cols[key].extend(values)
        return io.write_columns(path, cols)


def compare_strategies(problem, basis, config=None, u0=None,
                       strategies=(Strategy.PINV, Strategy.COEFF, Strategy.ORTHO)):
    """Run several strategies from the same start; failures are collected, not raised."""
    runs, errors = {}, {}
    for kind in strategies:
        kind = Strategy(kind)
        try:
            strat = ProjectionStrategy(kind, None if kind is Strategy.NONE else basis)
            runs[kind.value] = optimize(problem, strat, config, u0)
        except Exception as exc:  # noqa: BLE001 - reported per strategy
            errors[kind.value] = exc
    return StrategyComparison(runs, errors)
