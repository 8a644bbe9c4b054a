import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optrec import conic
from optrec.conic import (
    ConeProgram,
    ProgramBuilder,
    Tolerances,
    cone_distance,
    lemdual_pair,
    nonneg,
    psd,
    smat,
    solve,
    svec,
)
from optrec.errors import InvalidInput


def test_minimize_x_over_halfline():
    pb = ProgramBuilder()
    x = pb.variable(1)
    pb.minimize(x, 1.0)
    pb.less_equal([(x, [[-1.0]])], [-1.0])  # x >= 1
    sol = solve(pb.build())
    assert sol.optimal
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)


def test_trace_minimization():
    pb = ProgramBuilder()
    X = pb.variable(3)  # svec of a 2x2 matrix
    pb.minimize(X, svec(np.eye(2)))
    pb.equal([(X, [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])], [1.0, 1.0])
    pb.add(psd(2), [(X, -np.eye(3))], np.zeros(3))
    sol = solve(pb.build())
    assert sol.optimal
    assert sol.primal_objective == pytest.approx(2.0, abs=1e-7)
    np.testing.assert_allclose(smat(sol.x), np.eye(2), atol=1e-6)


def test_svec_preserves_inner_products():
    rng = np.random.default_rng(0)
    A, B = (M + M.T for M in rng.standard_normal((2, 4, 4)))
    assert svec(A) @ svec(B) == pytest.approx(np.trace(A @ B))
    np.testing.assert_allclose(smat(svec(A)), A)


def test_dimension_mismatch_is_invalid_input():
    with pytest.raises(InvalidInput):
        ConeProgram(np.zeros(2), np.zeros((3, 2)), np.zeros(3), (nonneg(2),))


def test_iteration_limit_is_a_status():
    pb = ProgramBuilder()
    X = pb.variable(6)
    pb.minimize(X, svec(np.diag([1.0, 2.0, 3.0])))
    pb.equal([(X, svec(np.eye(3))[None, :])], [1.0])
    pb.add(psd(3), [(X, -np.eye(6))], np.zeros(6))
    sol = solve(pb.build(), Tolerances(max_iter=1))
    assert sol.status in (conic.MAX_ITERATIONS, conic.NUMERICAL_FAILURE)
    assert not sol.optimal


def test_infeasible_and_unbounded_statuses():
    pb = ProgramBuilder()
    x = pb.variable(1)
    pb.minimize(x, 1.0)
    pb.less_equal([(x, [[1.0], [-1.0]])], [0.0, -1.0])  # x <= 0 and x >= 1
    assert solve(pb.build()).status == conic.PRIMAL_INFEASIBLE
    pb = ProgramBuilder()
    x = pb.variable(1)
    pb.minimize(x, 1.0)
    pb.less_equal([(x, [[1.0]])], [0.0])
    assert solve(pb.build()).status == conic.DUAL_INFEASIBLE


def _vertex_enumeration(c, G, h):
    n = c.size
    best = np.inf
    for rows in itertools.combinations(range(G.shape[0]), n):
        rows = list(rows)
        Gs = G[rows]
        if abs(np.linalg.det(Gs)) < 1e-10:
            continue
        v = np.linalg.solve(Gs, h[rows])
        if np.all(G @ v <= h + 1e-9):
            best = min(best, c @ v)
    return best


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(20)
    for _ in range(20):
        n = int(rng.integers(1, 9))
        extra = int(rng.integers(0, 3))
        G = np.vstack([np.eye(n), -np.eye(n), rng.standard_normal((extra, n))])
        h = np.concatenate([rng.uniform(0.5, 2, 2 * n), rng.uniform(0.1, 1, extra)])
        c = rng.standard_normal(n)
        pb = ProgramBuilder()
        x = pb.variable(n)
        pb.minimize(x, c)
        pb.less_equal([(x, G)], h)
        sol = solve(pb.build())
        assert sol.optimal
        assert sol.primal_objective == pytest.approx(_vertex_enumeration(c, G, h), abs=1e-7)


def test_lemdual_scalar_case():
    pair = lemdual_pair([], [np.eye(1)], [[0.7]], [], [1.0])
    p, d = solve(pair.primal), solve(pair.dual)
    assert pair.primal_value(p) == pytest.approx(0.7, abs=1e-7)
    assert pair.dual_value(d) == pytest.approx(0.7, abs=1e-7)


def test_lemdual_zero_objective():
    A = [np.diag([1.0, -1.0, 0.5])]
    pair = lemdual_pair(A, [np.eye(3)], np.zeros((3, 3)), [1.0], [0.0])
    p, d = solve(pair.primal), solve(pair.dual)
    assert pair.primal_value(p) == pytest.approx(0.0, abs=1e-7)
    assert pair.dual_value(d) == pytest.approx(0.0, abs=1e-7)


def _random_pair(rng, d, m):
    sym = lambda: (lambda M: M + M.T)(rng.standard_normal((d, d)))
    A = [sym() for _ in range(m)]
    # B_1 = I keeps P + M bounded; alpha large enough that P = M = I/(2d) is strictly feasible
    B = [np.eye(d)]
    beta = [1.0]
    alpha = [abs(np.trace(Ai)) / d + rng.uniform(0.1, 1.0) for Ai in A]
    return lemdual_pair(A, B, sym(), alpha, beta)


def test_lemdual_random_3x3():
    pair = _random_pair(np.random.default_rng(3), 3, 2)
    p, d = solve(pair.primal), solve(pair.dual)
    assert p.optimal and d.optimal
    assert pair.primal_value(p) == pytest.approx(pair.dual_value(d), abs=1e-6)


def _check_certificate(p, sol, tol):
    r = p.A @ sol.x + sol.s - p.b
    assert np.max(np.abs(r), initial=0) <= tol.feas_tol * max(1, np.max(np.abs(p.b), initial=0))
    dr = p.A.T @ sol.y + p.c
    assert np.max(np.abs(dr), initial=0) <= tol.feas_tol * max(1, np.max(np.abs(p.c), initial=0))
    for cone, sl in p.blocks():
        assert cone_distance(cone.kind, sol.s[sl]) <= tol.dist_tol * max(1, np.linalg.norm(sol.s[sl]))
        if cone.kind != "zero":
            assert cone_distance(cone.kind, sol.y[sl]) <= tol.dist_tol * max(1, np.linalg.norm(sol.y[sl]))
    pobj, dobj = p.c @ sol.x, -p.b @ sol.y
    assert abs(pobj - dobj) <= tol.gap_tol * max(1, abs(pobj))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(0, 3))
def test_certificates_recompute(seed, d, m):
    pair = _random_pair(np.random.default_rng(seed), d, m)
    tol = Tolerances()
    for prog in (pair.primal, pair.dual):
        sol = solve(prog, tol)
        if sol.optimal:
            _check_certificate(prog, sol, tol)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_scaling_the_objective_keeps_the_argmin(seed, t):
    rng = np.random.default_rng(seed)
    n = 3
    G = np.vstack([np.eye(n), -np.eye(n), rng.standard_normal((2, n))])
    h = np.concatenate([np.ones(2 * n), rng.uniform(0.2, 1, 2)])
    c = rng.standard_normal(n)

    def argmin(cost):
        pb = ProgramBuilder()
        x = pb.variable(n)
        pb.minimize(x, cost)
        pb.less_equal([(x, G)], h)
        return solve(pb.build()).x

    np.testing.assert_allclose(argmin(t * c), argmin(c), atol=1e-6)


def test_program_json_round_trip(tmp_path):
    pair = _random_pair(np.random.default_rng(1), 2, 1)
    path = tmp_path / "p.json"
    solve(pair.dual, dump=path)
    back = conic.load_program(path)
    assert solve(back).primal_objective == pytest.approx(solve(pair.dual).primal_objective, abs=1e-9)


def test_dump_directory(tmp_path):
    conic.dump_programs(tmp_path / "dump")
    try:
        test_minimize_x_over_halfline()
    finally:
        conic.dump_programs(None)
    assert sorted(p.name for p in (tmp_path / "dump").iterdir()) == ["program-00001.json"]
