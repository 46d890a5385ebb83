import io
import math
import warnings

import numpy as np
import pytest

from mirrorinfo.errors import InfeasibleError, NumericalFailureError
from mirrorinfo.factories import (
    binary_symmetric_channel,
    make_classical_capacity,
    make_ree_ppt,
    random_density,
)
from mirrorinfo.kernels import Domain, KernelKind
from mirrorinfo.matfun import ClampWarning
from mirrorinfo.problems import ConstraintBlock, LinearConstraintSet, SaddleProblem, classical_mutual_information
from mirrorinfo.solvers import (
    RunTrace,
    SolverConfig,
    TraceRecord,
    backtracking_floor,
    dual_projection,
    ergodic_averages,
    estimate_opnorm,
    feasible_step_sizes,
    mirror_descent,
    pdhg,
    pdhg_backtracking,
    solve,
    stopping_metric,
)
from oracles import bsc_capacity, grid_maximize, mutual_information

warnings.simplefilter("ignore", ClampWarning)


def linear_problem(c, blocks=(), L=1.0):
    c = np.asarray(c, dtype=float)
    return SaddleProblem(
        kind="linear",
        oracle=lambda x: (float(c @ x), c.copy()),
        domain=Domain.SIMPLEX,
        kernel=KernelKind.NEG_SHANNON,
        smoothness=L,
        x0=np.full(c.size, 1.0 / c.size),
        constraints=LinearConstraintSet(tuple(blocks)),
    )


def le_block(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return ConstraintBlock("le", "nonneg", lambda x: a @ x, lambda z: a.T @ z, np.atleast_1d(np.asarray(b, float)))


# -- config -----------------------------------------------------------------


@pytest.mark.parametrize(
    "kw", [{"alpha": 1.0}, {"alpha": 0.0}, {"theta_bar": 0.99}, {"kappa": 0.0}, {"tol": 0.0}, {"algorithm": "sgd"}]
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


# -- step sizes -------------------------------------------------------------


def test_feasible_step_sizes_examples():
    tau, gamma = feasible_step_sizes(1.0, 1.0, 1.0)
    assert tau == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)
    assert tau == pytest.approx(0.618034, abs=1e-6)
    assert gamma == tau
    assert feasible_step_sizes(2.0, 0.0, 1.0)[0] == 0.5
    assert feasible_step_sizes(0.0, 1.0, 1.0)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        feasible_step_sizes(1.0, 1.0, 0.0)


@pytest.mark.parametrize("L,a,kappa", [(1.0, 2.0, 10.0), (2.0, 0.3, 0.1), (0.5, 5.0, 1.0), (1.0, 1e-6, 1.0)])
def test_feasible_step_sizes_solve_equality(L, a, kappa):
    tau, gamma = feasible_step_sizes(L, a, kappa)
    assert gamma == pytest.approx(tau / kappa)
    assert (1 / tau - L) / gamma == pytest.approx(a * a, rel=1e-9)


def test_backtracking_floor_formula():
    L, a, kappa, alpha = 1.0, 2.0, 10.0, 0.75
    root = math.sqrt(L**2 * kappa**2 / (4 * a**4) + kappa / a**2) - L * kappa / (2 * a**2)
    assert backtracking_floor(L, a, kappa, 1.0, alpha) == pytest.approx(min(1.0, alpha * root))
    assert backtracking_floor(0.0, 1.0, 1.0, 1e6, 0.75) == pytest.approx(0.75)


def test_estimate_opnorm():
    A = np.array([[3.0, 1.0, 0.0], [1.0, 2.0, 1.0]])
    cons = LinearConstraintSet((le_block(A, [1.0, 1.0]),))
    assert estimate_opnorm(cons, np.zeros(3)) == pytest.approx(np.linalg.norm(A, 2), rel=1e-9)
    assert estimate_opnorm(LinearConstraintSet(), np.zeros(3)) == 0.0


# -- small helpers ----------------------------------------------------------


def test_stopping_metric_examples():
    x = np.array([0.3, 0.7])
    assert stopping_metric(KernelKind.NEG_SHANNON, x, x, 1.0, [np.zeros(2)], [np.zeros(2)], 1.0) == 0.0
    gamma = 0.25
    z_prev = [np.array([0.0, 0.0])]
    z = [np.array([math.sqrt(2 * gamma), 0.0])]
    assert stopping_metric(KernelKind.NEG_SHANNON, x, x, 1.0, z, z_prev, gamma) == pytest.approx(1.0)


def test_ergodic_average_examples():
    x = np.array([0.2, 0.8])
    assert np.allclose(ergodic_averages([x, x, x])[0], x)
    xs = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.5, 0.5])]
    assert np.allclose(ergodic_averages(xs, [2.0, 2.0, 2.0])[0], np.mean(xs, axis=0))
    x0, x1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    avg, zavg = ergodic_averages([x0, x1], [1.0, 3.0], [[np.array([4.0])], [np.array([0.0])]])
    assert np.allclose(avg, (x0 + 3 * x1) / 4)
    assert np.allclose(zavg[0], [1.0])


def test_dual_projection_examples():
    out = dual_projection([np.array([-1.0, 2.0]), np.diag([-1.0, 2.0]), np.array([-3.0, 4.0])], ["nonneg", "psd", "zero"])
    assert np.allclose(out[0], [0.0, 2.0])
    assert np.allclose(out[1], np.diag([0.0, 2.0]))
    assert np.allclose(out[2], [-3.0, 4.0])
    with pytest.raises(ValueError):
        dual_projection([np.zeros(1)], ["nonneg", "psd"])


def test_trace_csv_format():
    tr = RunTrace()
    tr.append(TraceRecord(1, 1 / 3, 0.1, 0.5, 0.05, 1.01, 2, 0.0))
    tr.append(TraceRecord(2, 2 / 3, 0.01, 0.5, 0.05, 1.01, 0, 1e-3))
    buf = io.StringIO()
    tr.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iter,objective,stop_metric,tau,gamma,theta,backtracks,violation"
    assert lines[1].split(",")[1] == "0.33333333333333331"
    assert float(lines[2].split(",")[1]) == 2 / 3
    assert len(lines) == 3
    with pytest.raises(ValueError):
        tr.append(TraceRecord(2, 0.0, 0.0, 1, 1, 1, 0, 0))
    with pytest.raises(NumericalFailureError):
        tr.append(TraceRecord(3, math.nan, 0.0, 1, 1, 1, 0, 0))


# -- mirror descent ---------------------------------------------------------


def test_md_linear_single_step():
    pr = linear_problem([math.log(3), 0.0])
    sol, tr = mirror_descent(pr, SolverConfig(algorithm="md", step=1.0, max_iters=1, keep_iterates=True))
    assert np.allclose(tr.iterates[0], [0.25, 0.75])


def test_md_fixed_point_start():
    pr = linear_problem([0.7, 0.7, 0.7])
    sol, tr = mirror_descent(pr, SolverConfig(algorithm="md"))
    assert sol.iterations == 1 and tr.records[0].stop_metric == 0.0 and sol.converged


def test_md_bsc_capacity():
    pr = make_classical_capacity(binary_symmetric_channel(0.1))
    sol, tr = mirror_descent(pr, SolverConfig(algorithm="md"))
    assert sol.iterations <= 200
    assert abs(sol.value - bsc_capacity(0.1)) <= 1e-8
    # a non-symmetric start exercises the iteration itself
    sol, tr = mirror_descent(pr, SolverConfig(algorithm="md", tol=1e-12), x0=np.array([0.9, 0.1]))
    assert abs(sol.value - bsc_capacity(0.1)) <= 1e-8 and sol.iterations <= 200
    assert tr.records[-1].stop_metric <= 1e-12


def test_md_monotone_on_asymmetric_channel(rng):
    Q = rng.uniform(size=(4, 5))
    Q /= Q.sum(axis=0)
    pr = make_classical_capacity(Q)
    sol, tr = mirror_descent(pr, SolverConfig(algorithm="md", tol=1e-12))
    f = tr.column("objective")
    assert np.all(np.diff(f) <= 1e-12 * np.maximum(1, np.abs(f[:-1])))
    assert sol.value == pytest.approx(mutual_information(sol.x, Q), abs=1e-14)


def test_md_detects_increase():
    # a step far above 1/L overshoots the minimiser at x_0 = 1/2
    pr = SaddleProblem(
        kind="quad",
        oracle=lambda x: (50 * float((x[0] - 0.5) ** 2), np.array([100 * (x[0] - 0.5), 0.0])),
        domain=Domain.SIMPLEX,
        kernel=KernelKind.NEG_SHANNON,
        smoothness=100.0,
        x0=np.array([0.9, 0.1]),
    )
    with pytest.raises(NumericalFailureError, match="increased"):
        mirror_descent(pr, SolverConfig(algorithm="md", step=5.0, max_iters=50))


def test_md_rejects_constraints():
    pr = linear_problem([1.0, 0.0], [le_block([1.0, 0.0], 0.3)])
    with pytest.raises(ValueError):
        mirror_descent(pr)
    with pytest.raises(ValueError):
        solve(pr, SolverConfig(algorithm="md"))


# -- PDHG ------------------------------------------------------------------


def test_pdhg_inactive_constraint_tracks_md(rng):
    Q = rng.uniform(size=(3, 3))
    Q /= Q.sum(axis=0)
    base = make_classical_capacity(Q)
    # a constraint that never binds: x_0 <= 2
    pr = make_classical_capacity(Q, [[1.0, 0.0, 0.0]], [2.0])
    cfg = SolverConfig(algorithm="pdhg", tau=1.0, max_iters=30, tol=1e-30, keep_iterates=True)
    sol, tr = pdhg(pr, cfg)
    md, mtr = mirror_descent(base, SolverConfig(algorithm="md", step=1.0, max_iters=30, tol=1e-30, keep_iterates=True))
    assert all(np.all(z[0] == 0) for z in tr.duals)
    for a, b in zip(tr.iterates, mtr.iterates):
        assert np.allclose(a, b, atol=1e-14)


def test_pdhg_satisfied_equality_keeps_zero_dual():
    block = ConstraintBlock("sum", "zero", lambda x: np.array([x.sum()]), lambda z: np.full(3, z[0]), np.array([1.0]))
    pr = SaddleProblem(
        kind="cc",
        oracle=make_classical_capacity(np.array([[0.9, 0.2, 0.5], [0.1, 0.8, 0.5]])).oracle,
        domain=Domain.SIMPLEX,
        kernel=KernelKind.NEG_SHANNON,
        smoothness=1.0,
        x0=np.full(3, 1 / 3),
        constraints=LinearConstraintSet((block,)),
    )
    sol, tr = pdhg(pr, SolverConfig(algorithm="pdhg", max_iters=50, keep_iterates=True))
    assert all(abs(z[0][0]) < 1e-12 for z in tr.duals)


def test_pdhg_binding_constraint_matches_grid():
    Q = np.array([[0.95, 0.3], [0.05, 0.7]])
    pr = make_classical_capacity(Q, [[1.0, 0.0]], [0.3])
    sol, _ = pdhg(pr, SolverConfig(algorithm="pdhg", tol=1e-12, max_iters=100000))
    ref, _ = grid_maximize(lambda p: mutual_information(p, Q), lambda p: p[0] <= 0.3 + 1e-12, 2, step=1e-4, refine=1e-6)
    unconstrained, _ = grid_maximize(lambda p: mutual_information(p, Q), lambda p: True, 2, step=1e-4, refine=1e-6)
    assert unconstrained > ref + 1e-3  # the constraint really binds
    assert abs(sol.value - ref) <= 1e-4
    assert sol.violations[0] <= 1e-6


def test_pdhg_divergent_dual_reports_infeasible():
    pr = linear_problem([1.0, 0.0], [le_block([1.0, 1.0], 0.5)])
    with pytest.raises(InfeasibleError):
        pdhg(pr, SolverConfig(algorithm="pdhg", dual_threshold=1e3, max_iters=100000))


def test_backtracking_floor_linear_objective():
    pr = linear_problem([-1.0, 0.0], [le_block([1.0, 0.0], 0.3)], L=0.0)
    cfg = SolverConfig(algorithm="pdhg-bt", tau=1e6, gamma=1e6, max_iters=200, tol=1e-30)
    sol, tr = pdhg_backtracking(pr, cfg)
    taus = tr.column("tau")
    assert np.min(taus[5:]) >= 0.75 - 1e-12
    assert sol.tau_min >= backtracking_floor(0.0, 1.0, 1.0, 1e6, 0.75) - 1e-12


def test_backtracking_without_constraints_needs_no_backtracks(rng):
    Q = rng.uniform(size=(3, 4))
    Q /= Q.sum(axis=0)
    pr = make_classical_capacity(Q)
    sol, tr = pdhg_backtracking(pr, SolverConfig(algorithm="pdhg-bt", theta_bar=1.0, tol=1e-10))
    assert np.all(tr.column("backtracks") == 0)
    md, _ = mirror_descent(pr, SolverConfig(algorithm="md", tol=1e-10))
    assert sol.value == pytest.approx(md.value, abs=1e-8)


def test_backtracking_gives_up_on_inconsistent_oracle():
    c = np.array([1.0, -1.0, 0.5])
    pr = SaddleProblem(
        kind="bad",
        oracle=lambda x: (float(c @ x), -c),
        domain=Domain.SIMPLEX,
        kernel=KernelKind.NEG_SHANNON,
        smoothness=1.0,
        x0=np.full(3, 1 / 3),
    )
    # the slack eventually accepts once tau is below about 1e-12, so cap the trials first
    with pytest.raises(NumericalFailureError, match="backtracking"):
        pdhg_backtracking(pr, SolverConfig(algorithm="pdhg-bt", max_backtracks=40))


def test_backtracking_ree_against_long_run():
    rho = random_density(4, np.random.default_rng(2))
    pr = make_ree_ppt(rho, (2, 2))
    sol, _ = pdhg_backtracking(pr, SolverConfig(algorithm="pdhg-bt", max_iters=100000))
    ref, _ = pdhg_backtracking(pr, SolverConfig(algorithm="pdhg-bt", tol=1e-13, max_iters=10 * 100000))
    assert ref.iterations >= sol.iterations
    assert abs(sol.value - ref.value) <= 1e-4


def test_solution_reporting_projection(rng):
    Q = rng.uniform(size=(3, 3))
    Q /= Q.sum(axis=0)
    pr = make_classical_capacity(Q, [[1.0, 0.0, 0.0]], [0.2])
    sol, _ = solve(pr, SolverConfig(max_iters=50))
    assert sol.x.sum() == pytest.approx(1.0, abs=1e-12)
    assert sol.x_avg.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(sol.x >= 0)
    assert len(sol.violations) == 1


def test_determinism():
    rho = random_density(4, np.random.default_rng(5))
    pr = make_ree_ppt(rho, (2, 2))
    a, _ = solve(pr, SolverConfig(max_iters=300))
    b, _ = solve(pr, SolverConfig(max_iters=300))
    assert a.value == b.value and a.iterations == b.iterations
