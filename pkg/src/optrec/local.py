"""Locally optimal recovery: Chebyshev centers of Q(K_E(y)) in the l-infinity norm.

Two model sets are supported, a polytope {f : A f <= b} in R^n and the unit
ball of P_n under the sup norm on [-1, 1], both with noise bounded by eta in
the max norm. Each center problem is assembled from 2K support blocks, one per
coordinate k and sign; block (k, +) bounds max Q_k over K_E(y) from above,
block (k, -) bounds -min Q_k.
"""
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import conic
from .chebyshev import shift_matrix, toeplitz
from .conic import ProgramBuilder, Tolerances
from .errors import InfeasibleData, InvalidInput, SolverFailure
from .measures import SignedMeasure, apply_functional

NONUNIQUE_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class PolytopeModel:
    """The polytope {f in R^n : A f <= b}; emptiness and unboundedness are rejected."""

    A: np.ndarray
    b: np.ndarray
    check: bool = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise InvalidInput(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidInput("polytope data must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if self.check:
            _check_bounded(A, b)

    @property
    def dim(self):
        return self.A.shape[1]


def _check_bounded(A, b, tol=Tolerances()):
    n = A.shape[1]
    for j in range(n):
        for sign in (1.0, -1.0):
            pb = ProgramBuilder()
            f = pb.variable(n)
            pb.minimize(f[j], -sign)
            pb.less_equal([(f, A)], b)
            sol = conic.solve(pb.build(), tol)
            if sol.status == conic.PRIMAL_INFEASIBLE:
                raise InfeasibleData("the polytope {f : A f <= b} is empty")
            if sol.status == conic.DUAL_INFEASIBLE:
                raise InvalidInput(f"the polytope is unbounded along coordinate {j}")
            if not sol.optimal:
                raise SolverFailure(f"boundedness check failed ({sol.status})", sol)


@dataclass(frozen=True)
class PolynomialBallModel:
    """Unit ball of P_n (degree < n) under the sup norm on [-1, 1]."""

    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidInput("polynomial space dimension must be at least 1")


@dataclass(frozen=True, eq=False)
class CenterResult:
    z: np.ndarray
    r: float
    status: str
    nonunique: bool = False
    intervals: np.ndarray | None = None  # (K, 2): min and max of Q_k over K_E(y)
    solution: conic.ConeSolution | None = field(default=None, repr=False)
    program: conic.ConeProgram | None = field(default=None, repr=False)


def _noise_level(eta):
    eta = float(eta)
    if not np.isfinite(eta) or eta < 0:
        raise InvalidInput(f"noise level must be finite and nonnegative, got {eta}")
    return eta


def augment_polytope(model: PolytopeModel, L, y, eta):
    """Stack [A; L; -L] and [b; y + eta; -y + eta] so that K_E(y) = {f : At f <= bt}."""
    eta = _noise_level(eta)
    L = np.atleast_2d(np.asarray(L, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if L.shape != (y.size, model.dim):
        raise InvalidInput(f"L must be {y.size}x{model.dim}, got {L.shape}")
    At = np.vstack([model.A, L, -L])
    bt = np.concatenate([model.b, y + eta, -y + eta])
    return At, bt


def _polytope_block(pb, At, bt, q, sign, free_from=None):
    x = pb.variable(At.shape[0])
    pb.equal([(x, At.T)], sign * q)
    nn = x[:free_from] if free_from is not None else x
    pb.less_equal([(nn, -np.eye(nn.size))], np.zeros(nn.size))
    return x, bt


def _center_lp(At, bt, Q, free_from=None):
    K = Q.shape[0]
    pb = ProgramBuilder()
    z, r = pb.variable(K), pb.variable(1)
    pb.minimize(r, 1.0)
    for k in range(K):
        for sign in (1.0, -1.0):
            x, cost = _polytope_block(pb, At, bt, Q[k], sign, free_from)
            pb.less_equal([(x, cost[None, :]), (r, [[-1.0]]), (z[[k]], [[-sign]])], [0.0])
    return pb.build(), z, r


def _phase_one_polytope(At, bt, tol):
    # minimize s subject to At f - s <= bt; s is capped below so the program stays bounded
    pb = ProgramBuilder()
    f, s = pb.variable(At.shape[1]), pb.variable(1)
    pb.minimize(s, 1.0)
    pb.less_equal([(f, At), (s, -np.ones((At.shape[0], 1)))], bt)
    pb.less_equal([(s, -np.ones((1, 1)))], [1.0])
    sol = conic.solve(pb.build(), tol)
    if not sol.optimal:
        raise SolverFailure(f"feasibility check failed ({sol.status})", sol)
    if sol.x[s[0]] > _feasibility_slack(bt, tol):
        raise InfeasibleData("no model element is consistent with the data (y lies outside L(K) + E)")


def _feasibility_slack(data, tol):
    return 10 * tol.feas_tol * max(1.0, float(np.max(np.abs(data))) if np.size(data) else 1.0)


def center_polytope(model: PolytopeModel, L, Q, y, eta, tol: Tolerances = Tolerances()) -> CenterResult:
    """Chebyshev center of Q(K_E(y)) for the polytope model, via one linear program.

    ``Q`` is a K x n matrix whose rows are the q_k. The assembled program has
    K(2N+4m+1)+1 variables; see ``CenterResult.program``.
    """
    At, bt = augment_polytope(model, L, y, eta)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[1] != model.dim or Q.shape[0] < 1:
        raise InvalidInput(f"Q must have {model.dim} columns and at least one row")
    _phase_one_polytope(At, bt, tol)

    K = Q.shape[0]
    program, z, r = _center_lp(At, bt, Q)
    if _noise_level(eta) == 0:
        # same LP with w = x(L) - x(-L) free: exact, and the optimal face stays bounded
        N = model.A.shape[0]
        m = At.shape[0] - N
        solved, z, r = _center_lp(At[: N + m // 2], bt[: N + m // 2], Q, free_from=N)
    else:
        solved = program
    sol = conic.solve(solved, tol)

    L = np.atleast_2d(np.asarray(L, dtype=float))
    y = np.asarray(y, dtype=float).ravel()

    def support(k, sign):
        # primal form over f; with eta = 0 the data rows are equalities, which keeps
        # the optimal face bounded (the paired multipliers of L and -L are not)
        sp_ = ProgramBuilder()
        f = sp_.variable(model.dim)
        sp_.minimize(f, -sign * Q[k])
        sp_.less_equal([(f, model.A)], model.b)
        if _noise_level(eta) == 0:
            sp_.equal([(f, L)], y)
        else:
            sp_.less_equal([(f, np.vstack([L, -L]))], np.concatenate([y + eta, -y + eta]))
        return _support_value(sp_.build(), tol, k, -1.0)

    return _finish(program, sol, z, r, K, support, tol)


def _support_value(program, tol, k, scale):
    sol = conic.solve(program, tol)
    if not sol.optimal:
        raise SolverFailure(f"support program for coordinate {k} not solved ({sol.status})", sol)
    return scale * sol.primal_objective


def _finish(program, sol, z, r, K, support, tol):
    if not sol.optimal:
        raise SolverFailure(f"center program not solved ({sol.status})", sol)
    r_val = float(sol.x[r[0]])
    # the optimal z_k form intervals when coordinate k is not the widest one;
    # report the midpoint of each, i.e. midpoint of [min Q_k, max Q_k]
    intervals = np.array([(-support(k, -1.0), support(k, 1.0)) for k in range(K)]).reshape(K, 2)
    centers = intervals.mean(axis=1)
    widths = 0.5 * (intervals[:, 1] - intervals[:, 0])
    nonunique = bool(np.any(r_val - widths > NONUNIQUE_TOL))
    slack = 10 * tol.gap_tol * max(1.0, abs(r_val))
    if abs(max(float(np.max(widths)), 0.0) - max(r_val, 0.0)) > max(slack, 1e-6):
        raise SolverFailure(
            f"radius {r_val} disagrees with the widest support interval {np.max(widths)}", sol
        )
    return CenterResult(centers, max(r_val, 0.0), sol.status, nonunique, intervals, sol, program)


def chebyshev_rows(measures: Sequence[SignedMeasure], n):
    from .chebyshev import cheb_eval

    return np.array([[apply_functional(mu, lambda x, j=j: cheb_eval(j, x)) for j in range(n)] for mu in measures])


def build_polyball_data(n, observations: Sequence[SignedMeasure], Q: Sequence[SignedMeasure]):
    """Matrices C_k = Toep[Q_k(T_0); ...; Q_k(T_{n-1})] and A_i = Toep[l_i(T_0); ...]."""
    n = int(n)
    if n < 1:
        raise InvalidInput("n must be at least 1")
    Qr = chebyshev_rows(Q, n).reshape(len(Q), n)
    Lr = chebyshev_rows(observations, n).reshape(len(observations), n)
    if not (np.all(np.isfinite(Qr)) and np.all(np.isfinite(Lr))):
        raise InvalidInput("measure rows must be finite")
    return [toeplitz(row) for row in Qr], [toeplitz(row) for row in Lr]


def _polyball_block(pb, D, C, A_list, y, eta, sign):
    n, m = C.shape[0], len(A_list)
    x = pb.variable(n)
    if eta > 0:
        u, v = pb.variable(m), pb.variable(m)
        if m:
            pb.less_equal([(u, -np.eye(m))], np.zeros(m))
            pb.less_equal([(v, -np.eye(m))], np.zeros(m))
        mult = [(u, -1.0), (v, 1.0)]
        cost = np.concatenate([[1.0], np.zeros(n - 1), y + eta, -(y - eta)])
        idx = np.concatenate([x, u, v])
    else:
        # with eta = 0 only w = v - u matters; a free w avoids an unbounded optimal face
        w = pb.variable(m)
        mult = [(w, 1.0)]
        cost = np.concatenate([[1.0], np.zeros(n - 1), -y])
        idx = np.concatenate([x, w])
    for s in (1.0, -1.0):
        # Toep(x) - s (sign C + sum (v_i - u_i) A_i) is PSD
        terms = [(x, D)]
        if m:
            terms += [(var, [-s * c * A for A in A_list]) for var, c in mult]
        pb.lmi(terms, -s * sign * C)
    return idx, cost


def _phase_one_polyball(n, A_list, y, eta, tol):
    m = len(A_list)
    if m == 0:
        return
    from .conic import svec

    k = n * (n + 1) // 2
    pb = ProgramBuilder()
    P, M, t = pb.variable(k), pb.variable(k), pb.variable(1)
    pb.minimize(t, 1.0)
    Dv = np.array([svec(shift_matrix(j, n)) for j in range(n)])
    pb.equal([(P, Dv), (M, Dv)], np.eye(n)[0])
    Av = np.array([svec(A) for A in A_list])
    ones = np.ones((m, 1))
    pb.less_equal([(P, Av), (M, -Av), (t, -ones)], y + eta)
    pb.less_equal([(P, -Av), (M, Av), (t, -ones)], -(y - eta))
    pb.less_equal([(t, -np.ones((1, 1)))], [1.0])
    pb.add(conic.psd(n), [(P, -np.eye(k))], np.zeros(k))
    pb.add(conic.psd(n), [(M, -np.eye(k))], np.zeros(k))
    sol = conic.solve(pb.build(), tol)
    if not sol.optimal:
        raise SolverFailure(f"feasibility check failed ({sol.status})", sol)
    if sol.x[t[0]] > _feasibility_slack(y, tol):
        raise InfeasibleData("no polynomial in the unit ball is consistent with the data")


def center_polyball(model: PolynomialBallModel, observations, Q, y, eta,
                    tol: Tolerances = Tolerances()) -> CenterResult:
    """Chebyshev center of Q(K_E(y)) for the unit ball of P_n, via one semidefinite program."""
    eta = _noise_level(eta)
    n = model.n
    y = np.asarray(y, dtype=float).ravel()
    if len(observations) != y.size:
        raise InvalidInput(f"{len(observations)} observations but {y.size} data values")
    if len(Q) < 1:
        raise InvalidInput("at least one quantity of interest is required")
    C_list, A_list = build_polyball_data(n, observations, Q)
    _phase_one_polyball(n, A_list, y, eta, tol)

    D = [shift_matrix(j, n) for j in range(n)]
    K = len(C_list)
    pb = ProgramBuilder()
    z, r = pb.variable(K), pb.variable(1)
    pb.minimize(r, 1.0)
    for k in range(K):
        for sign in (1.0, -1.0):
            idx, cost = _polyball_block(pb, D, C_list[k], A_list, y, eta, sign)
            pb.less_equal([(idx, cost[None, :]), (r, [[-1.0]]), (z[[k]], [[-sign]])], [0.0])
    program = pb.build()
    sol = conic.solve(program, tol)

    def support(k, sign):
        sp_ = ProgramBuilder()
        idx, cost = _polyball_block(sp_, D, C_list[k], A_list, y, eta, sign)
        sp_.minimize(idx, cost)
        return _support_value(sp_.build(), tol, k, 1.0)

    return _finish(program, sol, z, r, K, support, tol)
