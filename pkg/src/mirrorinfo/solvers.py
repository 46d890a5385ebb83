"""Mirror descent, fixed-step PDHG and backtracking PDHG.

All solvers minimize ``f`` over the primal domain of a :class:`SaddleProblem`;
PDHG variants also run projected ascent on the multipliers of its linear
constraints ``b - A(x) in K``.
"""

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import InfeasibleError, NumericalFailureError
from .kernels import bregman_divergence, mirror_step
from .matfun import as_hermitian, eigh_desc, reassemble
from .problems import dual_inner, dual_max_abs, random_like

ALGORITHMS = ("md", "pdhg", "pdhg-bt")


@dataclass
class SolverConfig:
    algorithm: str = "pdhg-bt"
    step: Optional[float] = None
    tau: Optional[float] = None
    gamma: Optional[float] = None
    kappa: Optional[float] = None
    alpha: float = 0.75
    theta_bar: float = 1.01
    tol: float = 1e-7
    max_iters: int = 10000
    seed: int = 0
    opnorm: Optional[float] = None
    keep_iterates: bool = False
    dual_threshold: float = 1e12
    max_backtracks: int = 200
    stop_dual: str = "z"
    monotone_slack: float = 1e-12
    bt_slack: float = 1e-12

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 0 < self.alpha < 1 <= self.theta_bar:
            raise ValueError(f"need 0 < alpha < 1 <= theta_bar, got alpha={self.alpha!r}, theta_bar={self.theta_bar!r}")
        if self.kappa is not None and not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol!r}")
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters!r}")
        if self.stop_dual not in ("z", "zbar"):
            raise ValueError(f"stop_dual must be 'z' or 'zbar', got {self.stop_dual!r}")
        self.max_iters = int(self.max_iters)


@dataclass
class TraceRecord:
    iter: int
    objective: float
    stop_metric: float
    tau: float
    gamma: float
    theta: float
    backtracks: int
    violation: float


TRACE_HEADER = ["iter", "objective", "stop_metric", "tau", "gamma", "theta", "backtracks", "violation"]


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    x0: Optional[np.ndarray] = None
    iterates: list = field(default_factory=list)
    duals: list = field(default_factory=list)
    zbars: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def append(self, rec):
        if self.records and rec.iter <= self.records[-1].iter:
            raise ValueError("trace iterations must increase")
        if not math.isfinite(rec.objective):
            raise NumericalFailureError(f"objective is not finite at iteration {rec.iter}", self)
        self.records.append(rec)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def __len__(self):
        return len(self.records)

    def to_csv(self, path_or_file):
        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for r in self.records:
                row = asdict(r)
                w.writerow([_fmt(row[k]) for k in TRACE_HEADER])

        if hasattr(path_or_file, "write"):
            write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                write(fh)

    def running_averages(self):
        """Ergodic averages after each logged iteration (requires kept iterates)."""
        if not self.iterates:
            raise ValueError("trace was recorded without iterates")
        out = []
        sx = None
        sz = None
        total = 0.0
        for x, zb, w in zip(self.iterates, self.zbars, self.weights):
            sx = w * x if sx is None else sx + w * x
            sz = [w * b for b in zb] if sz is None else [a + w * b for a, b in zip(sz, zb)]
            total += w
            out.append((sx / total, [a / total for a in sz]))
        return out


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass
class Solution:
    x: np.ndarray
    x_avg: np.ndarray
    z: list
    z_avg: list
    objective: float
    objective_avg: float
    value: float
    value_avg: float
    iterations: int
    reason: str
    stop_metric: float
    violations: list
    tau_min: float = math.nan
    max_backtracks: int = 0

    @property
    def converged(self):
        return self.reason == "converged"


# -- building blocks --------------------------------------------------------


def stopping_metric(kernel, x, x_prev, tau, z=None, z_prev=None, gamma=None, divergence=None):
    """Scaled primal Bregman movement plus scaled dual movement.

    ``divergence`` may carry an already computed ``D(x || x_prev)``.
    """
    if divergence is None:
        divergence = bregman_divergence(kernel, x, x_prev)
    d = max(divergence, 0.0)
    out = d / (tau * max(1.0, float(np.max(np.abs(x)))))
    if z:
        dz = sum(float(np.sum(np.abs(a - b) ** 2)) for a, b in zip(z, z_prev))
        out += dz / (2.0 * gamma * max(1.0, dual_max_abs(z)))
    return out


def feasible_step_sizes(L, opnorm, kappa):
    """Largest ``tau`` (and ``gamma = tau / kappa``) with ``(1/tau - L)(kappa/tau) = opnorm^2``."""
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")
    if L < 0 or opnorm < 0:
        raise ValueError("smoothness and operator norm must be nonnegative")
    if opnorm == 0:
        if L == 0:
            raise ValueError("step size is unbounded when L = 0 and the operator vanishes")
        tau = 1.0 / L
    else:
        a2 = opnorm * opnorm
        half = L * kappa / (2.0 * a2)
        # positive root of a2 tau^2 + L kappa tau - kappa = 0, in cancellation-free form
        tau = (kappa / a2) / (math.sqrt(half * half + kappa / a2) + half)
    return tau, tau / kappa


def backtracking_floor(L, opnorm, kappa, tau_init, alpha):
    """Lower bound on accepted backtracking step sizes."""
    if opnorm == 0:
        return min(tau_init, alpha / L) if L > 0 else tau_init
    return min(tau_init, alpha * feasible_step_sizes(L, opnorm, kappa)[0])


def estimate_opnorm(constraints, like, seed=0, iters=50):
    """Power iteration on ``A^dag A`` from a seeded random start."""
    if len(constraints) == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = random_like(like, rng)
    v = v / math.sqrt(dual_inner([v], [v]))
    est = 0.0
    for _ in range(iters):
        w = constraints.adjoint(constraints.apply(v), like)
        nrm = math.sqrt(max(dual_inner([w], [w]), 0.0))
        if nrm == 0.0:
            return 0.0
        est = math.sqrt(nrm)
        v = w / nrm
    Av = constraints.apply(v)
    return max(est, math.sqrt(max(dual_inner(Av, Av), 0.0)))


def ergodic_averages(iterates, weights=None, duals=None):
    """Weighted averages of primal (and optionally dual) iterates."""
    if len(iterates) == 0:
        raise ValueError("need at least one iterate")
    w = np.ones(len(iterates)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    x = sum(wi * xi for wi, xi in zip(w, iterates))
    if duals is None:
        return x, None
    z = [sum(wi * zi[b] for wi, zi in zip(w, duals)) for b in range(len(duals[0]))]
    return x, z


def dual_projection(z, cones):
    """Blockwise Euclidean projection onto the dual cones."""
    if len(z) != len(cones):
        raise ValueError(f"{len(z)} dual blocks for {len(cones)} cone tags")
    out = []
    for zb, cone in zip(z, cones):
        if cone == "nonneg":
            out.append(np.maximum(zb, 0.0))
        elif cone == "psd":
            w, U = eigh_desc(as_hermitian(zb))
            out.append(reassemble(U, np.maximum(w, 0.0)))
        elif cone == "zero":
            out.append(zb)
        else:
            raise ValueError(f"unknown cone tag {cone!r}")
    return out


def _total_violation(problem, x, applied=None):
    v = problem.constraints.violations(x, applied)
    return float(math.sqrt(sum(a * a for a in v))) if v else 0.0


def _finish(problem, trace, x, x_avg, z, z_avg, k, reason, metric, tau_min=math.nan, max_bt=0):
    xr = problem.normalize(x)
    xa = problem.normalize(x_avg)
    f = problem.objective(xr)
    fa = problem.objective(xa)
    return Solution(
        x=xr,
        x_avg=xa,
        z=z,
        z_avg=z_avg,
        objective=f,
        objective_avg=fa,
        value=problem.report(f),
        value_avg=problem.report(fa),
        iterations=k,
        reason=reason,
        stop_metric=metric,
        violations=problem.constraints.violations(xr),
        tau_min=tau_min,
        max_backtracks=max_bt,
    )


# -- algorithms -------------------------------------------------------------


def mirror_descent(problem, config=None, x0=None):
    """Mirror descent with constant step ``t`` (default ``1/L``)."""
    config = config or SolverConfig(algorithm="md")
    if len(problem.constraints):
        raise ValueError("mirror descent needs a problem without dualized constraints")
    t = config.step if config.step is not None else 1.0 / problem.smoothness
    x = np.array(problem.x0 if x0 is None else x0)
    trace = RunTrace(x0=x.copy())
    f, g = problem.oracle(x)
    sx = np.zeros_like(x)
    metric = math.inf
    reason = "max_iters"
    k = 0
    for k in range(1, config.max_iters + 1):
        x_new = mirror_step(problem.kernel, problem.domain, x, g, t, problem.marginal)
        f_new, g_new = problem.oracle(x_new)
        if f_new > f + config.monotone_slack * max(1.0, abs(f)):
            raise NumericalFailureError(
                f"objective increased at iteration {k}: {f!r} -> {f_new!r}", trace
            )
        metric = stopping_metric(problem.kernel, x_new, x, t)
        trace.append(TraceRecord(k, f_new, metric, t, math.nan, 1.0, 0, 0.0))
        if config.keep_iterates:
            trace.iterates.append(x_new.copy())
            trace.zbars.append([])
            trace.duals.append([])
            trace.weights.append(t)
        sx = sx + x_new
        x, f, g = x_new, f_new, g_new
        if metric <= config.tol:
            reason = "converged"
            break
    return _finish(problem, trace, x, sx / k, [], [], k, reason, metric, t), trace


def _check_dual(z, config, k, trace):
    size = dual_max_abs(z)
    if not math.isfinite(size) or size > config.dual_threshold:
        raise InfeasibleError(
            f"dual iterate diverged (max |z| = {size:.3e}) at iteration {k}; constraints appear infeasible",
            trace,
        )


def _primal_dual(problem, config, tau0, gamma0, backtrack, x0=None, z0=None):
    cons = problem.constraints
    cones = cons.cones
    kernel, domain, marginal = problem.kernel, problem.domain, problem.marginal
    x = np.array(problem.x0 if x0 is None else x0)
    z = [np.array(b) for b in (cons.zeros() if z0 is None else z0)]
    z_prev = [b.copy() for b in z]
    trace = RunTrace(x0=x.copy())
    f, g = problem.oracle(x)
    Ax = cons.apply(x)
    tau_prev, gamma_prev = tau0, gamma0
    sx = np.zeros_like(x)
    sz = [np.zeros_like(b) for b in z]
    wsum = 0.0
    tau_min = math.inf
    max_bt = 0
    metric = math.inf
    reason = "max_iters"
    k = 0
    for k in range(1, config.max_iters + 1):
        theta = config.theta_bar if backtrack else 1.0
        backtracks = 0
        while True:
            tau = theta * tau_prev if backtrack else tau0
            gamma = theta * gamma_prev if backtrack else gamma0
            zbar = [a + theta * (a - b) for a, b in zip(z, z_prev)]
            x_new = mirror_step(kernel, domain, x, g + cons.adjoint(zbar, x), tau, marginal)
            Ax_new = cons.apply(x_new)
            z_new = dual_projection(
                [a + gamma * (ax - rhs) for a, ax, rhs in zip(z, Ax_new, (b.rhs for b in cons.blocks))], cones
            )
            f_new, g_new = problem.oracle(x_new)
            if not backtrack:
                div = None
                break
            lhs = f_new - f - float(np.real(np.vdot(g, x_new - x)))
            dzb = [a - b for a, b in zip(z_new, zbar)]
            div = bregman_divergence(kernel, x_new, x)
            rhs = (
                div / tau
                + dual_inner(dzb, dzb) / (2.0 * gamma)
                - dual_inner(dzb, [a - b for a, b in zip(Ax_new, Ax)])
            )
            if lhs <= rhs + config.bt_slack * max(1.0, abs(f)):
                break
            backtracks += 1
            if backtracks > config.max_backtracks:
                raise NumericalFailureError(
                    f"backtracking did not terminate within {config.max_backtracks} trials at iteration {k}", trace
                )
            theta *= config.alpha
        _check_dual(z_new, config, k, trace)
        zref = z_new if config.stop_dual == "z" else zbar
        metric = stopping_metric(kernel, x_new, x, tau, zref, z, gamma, div)
        trace.append(TraceRecord(k, f_new, metric, tau, gamma, theta, backtracks, _total_violation(problem, x_new, Ax_new)))
        if config.keep_iterates:
            trace.iterates.append(x_new.copy())
            trace.duals.append([b.copy() for b in z_new])
            trace.zbars.append([b.copy() for b in zbar])
            trace.weights.append(tau)
        sx = sx + tau * x_new
        sz = [a + tau * b for a, b in zip(sz, zbar)]
        wsum += tau
        tau_min = min(tau_min, tau)
        max_bt = max(max_bt, backtracks)
        z_prev, z = z, z_new
        x, f, g, Ax = x_new, f_new, g_new, Ax_new
        tau_prev, gamma_prev = tau, gamma
        if metric <= config.tol:
            reason = "converged"
            break
    return (
        _finish(problem, trace, x, sx / wsum, z, [a / wsum for a in sz], k, reason, metric, tau_min, max_bt),
        trace,
    )


def _kappa(problem, config):
    return config.kappa if config.kappa is not None else problem.kappa


def pdhg(problem, config=None, x0=None, z0=None):
    """Fixed-step PDHG (``theta = 1``); steps from :func:`feasible_step_sizes` unless given."""
    config = config or SolverConfig(algorithm="pdhg")
    kappa = _kappa(problem, config)
    if config.tau is not None:
        tau = config.tau
        gamma = config.gamma if config.gamma is not None else tau / kappa
    else:
        a = config.opnorm if config.opnorm is not None else estimate_opnorm(problem.constraints, problem.x0, config.seed)
        tau, gamma = feasible_step_sizes(problem.smoothness, a, kappa)
    return _primal_dual(problem, config, tau, gamma, False, x0, z0)


def pdhg_backtracking(problem, config=None, x0=None, z0=None):
    """PDHG with adaptive step sizes; starts from ``tau = 1/L``, ``gamma = tau/kappa``."""
    config = config or SolverConfig(algorithm="pdhg-bt")
    kappa = _kappa(problem, config)
    tau = config.tau if config.tau is not None else 1.0 / problem.smoothness
    gamma = config.gamma if config.gamma is not None else tau / kappa
    return _primal_dual(problem, config, tau, gamma, True, x0, z0)


def solve(problem, config=None, x0=None, z0=None):
    config = config or SolverConfig()
    if config.algorithm == "md":
        if len(problem.constraints):
            raise ValueError("mirror descent cannot handle dualized constraints; use pdhg or pdhg-bt")
        return mirror_descent(problem, config, x0)
    if config.algorithm == "pdhg":
        return pdhg(problem, config, x0, z0)
    return pdhg_backtracking(problem, config, x0, z0)


__all__ = [
    "ALGORITHMS",
    "SolverConfig",
    "TraceRecord",
    "RunTrace",
    "Solution",
    "TRACE_HEADER",
    "stopping_metric",
    "feasible_step_sizes",
    "backtracking_floor",
    "estimate_opnorm",
    "ergodic_averages",
    "dual_projection",
    "mirror_descent",
    "pdhg",
    "pdhg_backtracking",
    "solve",
]
