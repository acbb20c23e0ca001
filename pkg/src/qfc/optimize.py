"""Derivative-free, multi-start minimisation of closed-loop excitation numbers."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from qfc.errors import InvalidParameterError, OptimizationError
from qfc.scenarios import Problem, evaluate_params, objective
from qfc.steady import is_hurwitz


@dataclass(frozen=True)
class OptimizeOptions:
    restarts: int = 32
    max_iters: int = 2000
    tol: float = 1e-10
    penalty: float = 1e6
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise InvalidParameterError("restarts must be >= 1")
        if not self.tol > 0:
            raise InvalidParameterError("tol must be > 0")
        if self.seed < 0:
            raise InvalidParameterError("seed must be unsigned")


@dataclass(frozen=True)
class NMResult:
    x: np.ndarray
    fun: float
    nit: int
    converged: bool


class InvalidStartError(OptimizationError):
    pass


def _initial_simplex(x0, bounds, step=0.1):
    x0 = np.asarray(x0, dtype=float)
    sim = [x0]
    for i in range(len(x0)):
        lo, hi = bounds[i] if bounds else (0.0, 0.0)
        h = step * (hi - lo) or 0.05
        y = x0.copy()
        y[i] = x0[i] + h if x0[i] + h <= hi else x0[i] - h
        sim.append(y)
    return np.array(sim)


def nelder_mead(f: Callable, x0, tol: float = 1e-10, max_iters: int = 2000,
                scales: Sequence[tuple] | None = None, initial_simplex=None) -> NMResult:
    """Unconstrained Nelder-Mead from ``x0``.

    Stops once the simplex objective spread is below ``tol`` or after
    ``max_iters``.  ``scales`` (per-coordinate ``(lo, hi)``) only sizes the
    initial simplex.  Thin wrapper over :func:`scipy.optimize.minimize` with
    the vertex-spread criterion disabled.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = f(x0)
    if not np.isfinite(f0):
        raise InvalidStartError(f"objective is not finite at the start point {x0}")
    if x0.size == 0:
        return NMResult(x0, float(f0), 0, True)
    if initial_simplex is None:
        initial_simplex = _initial_simplex(x0, scales)
    res = minimize(f, x0, method="Nelder-Mead",
                   options=dict(maxiter=max_iters, maxfev=20 * max_iters + 100,
                                xatol=np.inf, fatol=tol, initial_simplex=initial_simplex))
    return NMResult(np.asarray(res.x), float(res.fun), int(res.nit), res.status == 0)


@dataclass(frozen=True)
class StartTrace:
    start: tuple
    x: tuple
    value: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    params: dict
    x: np.ndarray
    value: float
    traces: tuple = ()
    stable: bool = True
    converged: bool = True
    best_start: int = 0
    info: dict = field(default_factory=dict)


def start_points(problem: Problem, restarts: int, seed: int) -> list[np.ndarray]:
    """Deterministic uniform draws inside the bounds; the i-th start never depends on ``restarts``."""
    rng = np.random.default_rng(seed)
    specs = problem.specs
    return [np.array([s.sample(rng) for s in specs]) for _ in range(restarts)]


def _run_start(problem: Problem, opts: OptimizeOptions, x0) -> StartTrace:
    bounds = [s.bounds() for s in problem.specs]
    x0 = np.asarray(x0, dtype=float)
    try:
        r = nelder_mead(partial(objective, problem), x0, opts.tol, opts.max_iters, bounds)
    except InvalidStartError:
        return StartTrace(tuple(x0), tuple(x0), math.inf, 0, False)
    return StartTrace(tuple(x0), tuple(float(v) for v in r.x), r.fun, r.nit, r.converged)


def multi_start_optimize(problem: Problem, opts: OptimizeOptions = OptimizeOptions(),
                         extra_starts: Sequence = ()) -> OptimizationResult:
    """Run Nelder-Mead from ``extra_starts`` then ``opts.restarts`` seeded random starts.

    The reduction is an ordered fold (lowest value, ties to the lowest start
    index), so the result does not depend on ``opts.workers``.
    """
    problem = problem if problem.penalty == opts.penalty else \
        Problem(problem.plant, problem.family, problem.wiring, problem.bounds, opts.penalty,
                problem.lqg)
    starts = [np.asarray(s, dtype=float) for s in extra_starts]
    starts += start_points(problem, opts.restarts, opts.seed)
    if not problem.specs:
        starts = starts[:1]
    run = partial(_run_start, problem, opts)
    if opts.workers > 1 and len(starts) > 1:
        with ProcessPoolExecutor(opts.workers) as pool:
            traces = list(pool.map(run, starts))
    else:
        traces = [run(s) for s in starts]

    def usable(t):
        return math.isfinite(t.value) and t.value < opts.penalty

    candidates = [i for i, t in enumerate(traces) if usable(t)]
    if not candidates:
        raise OptimizationError(f"all {len(traces)} starts diverged for {problem.family}",
                                traces=traces)
    best = min(candidates, key=lambda i: (traces[i].value, i))
    t = traces[best]
    x = np.array(t.x)
    params = problem.decode(x)
    value, G, info = evaluate_params(problem, params)
    stable = G is not None and is_hurwitz(G.A)
    return OptimizationResult(params, x, value, tuple(traces), stable, t.converged, best, info)
