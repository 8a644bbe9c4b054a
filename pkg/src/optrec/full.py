"""Near-optimal recovery of the whole function f in C[-1, 1].

A quasi-interpolant P(f) = sum_j f(xbar_j) u_j reproducing V is combined with
the optimal weights a^(j) for the point evaluations at xbar_j:

    R(y) = sum_i y_i sum_j a_i^(j) u_j.

Its worst-case error is at most (1 + 2 gamma + max_j delta_j) * mu * eps where
gamma bounds the Lebesgue function of P and mu the per-node indicators.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import conic
from .chebyshev import chebyshev_grid, chebyshev_lobatto, grid_inflation
from .conic import ProgramBuilder, Tolerances
from .errors import InvalidInput, SolverFailure, Uncertified
from .functional import (
    DEFAULT_GAP_TOL,
    DEFAULT_N_MAX,
    ApproximabilityModel,
    EstimationProblem,
    UncertaintySet,
    _add_norm_term,
    solve_weights,
)
from .measures import SignedMeasure

MAX_LAGRANGE_NODES = 64
GAMMA_GRID = 4096


@dataclass(frozen=True, eq=False)
class QuasiInterpolant:
    """Lagrange interpolation at Chebyshev points of the second kind.

    ``gamma`` is the maximum of the Lebesgue function sum_j |u_j| over the
    evaluation grid; ``gamma_bound`` inflates it into a bound valid on all of
    [-1, 1] (each signed sum of the u_j is a polynomial of degree < n).
    """

    nodes: np.ndarray
    gamma: float
    gamma_bound: float
    grid_size: int = GAMMA_GRID

    @property
    def size(self):
        return self.nodes.size

    def basis(self, x):
        """Matrix U with U[k, j] = u_j(x_k)."""
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        n = self.nodes.size
        if n == 1:
            return np.ones((x.size, 1))
        # barycentric form with the closed-form weights of Chebyshev extrema
        w = (-1.0) ** np.arange(n)
        w[0] *= 0.5
        w[-1] *= 0.5
        diff = x[:, None] - self.nodes[None, :]
        hit = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            T = w / diff
            U = T / _ordered_sum(T)[:, None]
        rows = np.any(hit, axis=1)
        U[rows] = hit[rows].astype(float)
        return U

    def lebesgue(self, x):
        return np.abs(self.basis(x)).sum(axis=1)

    def apply(self, f, x):
        """P(f) on the points x."""
        return _ordered_matmul(self.basis(x), np.asarray(f(self.nodes), dtype=float)[:, None])[:, 0]


def _ordered_sum(T):
    """Row sums of T added column by column in a fixed order."""
    out = T[:, 0].copy()
    for k in range(1, T.shape[1]):
        out += T[:, k]
    return out


def _ordered_matmul(X, Y):
    """X @ Y without BLAS. Elementwise updates in a fixed order round the same way in
    every process; BLAS kernels may not, since their blocking follows memory alignment."""
    out = np.zeros((X.shape[0], Y.shape[1]))
    for k in range(X.shape[1]):
        out += X[:, k, None] * Y[None, k, :]
    return out


def lebesgue_max(nodes, grid_size=GAMMA_GRID):
    """Max of sum_j |u_j| over chebyshev_grid(grid_size), evaluated in chunks."""
    qi = QuasiInterpolant(np.asarray(nodes, dtype=float), 1.0, 1.0, grid_size)
    g = chebyshev_grid(grid_size)
    return max(float(np.max(qi.lebesgue(chunk))) for chunk in np.array_split(g, max(1, g.size // 1024)))


def build_quasi_interpolant(model: ApproximabilityModel | int, grid_size=GAMMA_GRID) -> QuasiInterpolant:
    """Lagrange interpolant at n Chebyshev points of the second kind for V = P_n."""
    if isinstance(model, ApproximabilityModel):
        if not model.is_full_polynomial_space:
            raise InvalidInput("the quasi-interpolant requires V = P_n (Chebyshev degrees 0..n-1)")
        n = model.n
    else:
        n = int(model)
    if n < 1:
        raise InvalidInput("V must be nontrivial")
    if n > MAX_LAGRANGE_NODES:
        raise InvalidInput(f"n = {n} exceeds {MAX_LAGRANGE_NODES}; Lagrange weights are not trusted beyond that")
    nodes = chebyshev_lobatto(n)
    gamma = max(1.0, lebesgue_max(nodes, grid_size))
    return QuasiInterpolant(nodes, gamma, gamma * grid_inflation(n - 1, grid_size), grid_size)


@dataclass(frozen=True, eq=False)
class NearOptimalMap:
    coefficients: np.ndarray  # (m, nbar): column j holds a^(j)
    interpolant: QuasiInterpolant
    alphas: np.ndarray
    deltas: np.ndarray
    budgets: np.ndarray
    certified: bool
    N: tuple
    eps: float
    eta: float
    problems: tuple = field(default=(), repr=False)

    @property
    def mu_bar(self):
        """max_j (alpha_j + delta_j + quadrature budget_j)."""
        return float(np.max(self.alphas + self.deltas + self.budgets))

    def weight_functions(self, x):
        """Matrix with entry [k, i] = a_i^near(x_k)."""
        return _ordered_matmul(self.interpolant.basis(x), self.coefficients.T)


def build_near_optimal_map(observations: Sequence[SignedMeasure], model: ApproximabilityModel,
                           noise: UncertaintySet, interpolant: QuasiInterpolant | None = None,
                           gap_tol=DEFAULT_GAP_TOL, N_max=DEFAULT_N_MAX, tol: Tolerances = Tolerances(),
                           threads=1) -> NearOptimalMap:
    """Solve the weight problem for each node evaluation and assemble R^near."""
    interpolant = interpolant or build_quasi_interpolant(model)
    problems = tuple(
        EstimationProblem(SignedMeasure.dirac(float(x)), observations, model, noise) for x in interpolant.nodes
    )

    def one(pr):
        return solve_weights(pr, gap_tol, N_max, tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            sols = list(pool.map(one, problems))
    else:
        sols = [one(pr) for pr in problems]
    A = np.column_stack([ws.a for ws in sols])
    return NearOptimalMap(
        A, interpolant,
        np.array([ws.alpha for ws in sols]),
        np.array([max(ws.delta, 0.0) for ws in sols]),
        np.array([ws.quad_budget for ws in sols]),
        all(ws.certified for ws in sols),
        tuple(ws.N for ws in sols),
        model.eps, noise.eta, problems,
    )


def recover(nmap: NearOptimalMap, y, grid) -> np.ndarray:
    """Values of R^near(y) = sum_i y_i a_i^near on the grid."""
    y = np.asarray(y, dtype=float)
    m = nmap.coefficients.shape[0]
    if y.shape[-1] != m:
        raise InvalidInput(f"expected {m} data values, got {y.shape[-1]}")
    U = nmap.interpolant.basis(grid)
    c = _ordered_matmul(np.atleast_2d(y), nmap.coefficients)
    out = _ordered_matmul(c, U.T)
    return out[0] if y.ndim == 1 else out


def error_certificate(nmap: NearOptimalMap) -> float:
    """(1 + 2 gamma + max_j delta_j) * max(mu_bar, 1) * eps.

    mu_bar is floored at 1 because the chain of inequalities behind the
    constant uses that the indicator of the identity is at least 1, while
    the per-node brackets may lie below it.
    """
    if not nmap.certified:
        raise Uncertified("the near-optimal map has uncertified node weights; no certificate is issued")
    gamma = nmap.interpolant.gamma_bound
    delta = float(np.max(nmap.deltas + nmap.budgets))
    return (1.0 + 2.0 * gamma + delta) * max(nmap.mu_bar, 1.0) * nmap.eps


@dataclass(frozen=True)
class ProbeReport:
    k: int
    x_k: float
    m_star: float
    threshold: float
    gap: float
    a: tuple


def discontinuity_probe(points: Sequence[float], model: ApproximabilityModel, noise: UncertaintySet, k: int,
                        tol: Tolerances = Tolerances()) -> ProbeReport:
    """m* = min ||a||_1 + (eta/eps)||a||_{p'} subject to M a = b(x_k), against 1 + eta/eps.

    ``k`` is 0-based. A positive gap means the weights at nearby points cannot
    converge to e_k.
    """
    points = np.asarray(points, dtype=float).ravel()
    m = points.size
    if not 0 <= int(k) < m:
        raise InvalidInput(f"k = {k} is not a valid node index for {m} points")
    if noise.eta > model.eps:
        raise InvalidInput("the probe assumes eta <= eps")
    if not 1.0 < noise.p < np.inf:
        raise InvalidInput(f"the probe needs 1 < p < inf (p = 2), got p = {noise.p}")
    observations = [SignedMeasure.dirac(float(x)) for x in points]
    pr = EstimationProblem(SignedMeasure.dirac(float(points[k])), observations, model, noise)

    pb = ProgramBuilder()
    a, t = pb.variable(m), pb.variable(m)
    I = np.eye(m)
    if model.n:
        pb.equal([(a, pr.M)], pr.b)
    pb.less_equal([(a, I), (t, -I)], np.zeros(m))
    pb.less_equal([(a, -I), (t, -I)], np.zeros(m))
    pb.minimize(t, np.ones(m))
    _add_norm_term(pb, a, noise.conjugate, pr.ratio)
    sol = conic.solve(pb.build(), tol)
    if not sol.optimal:
        raise SolverFailure(f"probe program not solved ({sol.status})", sol)
    av = sol.x[a]
    m_star = float(np.abs(av).sum() + pr.ratio * noise.dual_norm(av))
    threshold = 1.0 + pr.ratio
    return ProbeReport(int(k), float(points[k]), m_star, threshold, threshold - m_star, tuple(av.tolist()))
