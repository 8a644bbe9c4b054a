"""Optimal linear estimation of a linear functional under an approximability model.

Model: f is within eps of a subspace V of C[-1, 1] (sup norm), the data are
y = L(f) + e with ||e||_p <= eta. The optimal weights minimize

    ||Q - sum a_i l_i||_{C*} + (eta / eps) ||a||_{p'}   subject to   M a = b,

and the C* norm is the total variation of the residual measure. Each
truncation level N gives a semidefinite relaxation whose value alpha^(N)
bounds the optimum from below; evaluating the exact objective at the relaxed
weights gives the upper end, so every answer comes with a computable bracket.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from . import conic
from .chebyshev import cheb_eval, gauss_legendre, shift_matrix
from .conic import ProgramBuilder, Tolerances
from .errors import InternalInconsistency, InvalidInput, SolverFailure
from .measures import SignedMeasure, combine, functional_matrix, moments, tv_norm

log = logging.getLogger(__name__)

DEFAULT_N_MAX = 512
DEFAULT_GAP_TOL = 1e-4
CLAMP_TOL = 1e-9
BUG_TOL = 1e-6
MONOTONE_SLACK = 1e-9


# -- model ingredients --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ApproximabilityModel:
    """Functions within ``eps`` of span(basis). ``degrees`` is set for Chebyshev bases."""

    basis: tuple
    eps: float
    degrees: tuple | None = None

    def __post_init__(self):
        eps = float(self.eps)
        if not (math.isfinite(eps) and eps > 0):
            raise InvalidInput(f"eps must be positive, got {self.eps}")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "basis", tuple(self.basis))

    @property
    def n(self):
        return len(self.basis)

    @property
    def is_full_polynomial_space(self):
        return self.degrees is not None and tuple(self.degrees) == tuple(range(len(self.degrees)))

    def gram_condition(self, q=256):
        """Condition number of the L2 Gram matrix of the basis (inf if singular, 1 for V = {0})."""
        if not self.basis:
            return 1.0
        x, w = gauss_legendre(q)
        V = np.array([np.asarray(v(x), dtype=float) for v in self.basis])
        return float(np.linalg.cond((V * w) @ V.T))

    def to_json(self):
        if self.degrees is None:
            raise InvalidInput("only Chebyshev bases have a JSON form")
        return {"kind": "chebyshev", "degrees": list(self.degrees)}


def chebyshev_model(degrees: Sequence[int], eps) -> ApproximabilityModel:
    degrees = tuple(int(d) for d in degrees)
    if any(d < 0 for d in degrees) or len(set(degrees)) != len(degrees):
        raise InvalidInput("degrees must be distinct and nonnegative")
    return ApproximabilityModel(tuple(partial(cheb_eval, d) for d in degrees), eps, degrees)


def polynomial_model(n, eps) -> ApproximabilityModel:
    """V = P_n, polynomials of degree < n."""
    return chebyshev_model(range(int(n)), eps)


def odd_polynomial_model(n, eps) -> ApproximabilityModel:
    """V = odd polynomials of degree < 2n, spanned by T_1, T_3, ..., T_{2n-1}."""
    return chebyshev_model(range(1, 2 * int(n), 2), eps)


@dataclass(frozen=True)
class UncertaintySet:
    """Noise vectors with ||e||_p <= eta, p in {1, 2, inf}."""

    p: float
    eta: float

    def __post_init__(self):
        p = _parse_p(self.p)
        eta = float(self.eta)
        if not (math.isfinite(eta) and eta >= 0):
            raise InvalidInput(f"eta must be finite and nonnegative, got {self.eta}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "eta", eta)

    @property
    def conjugate(self):
        return {1.0: math.inf, 2.0: 2.0, math.inf: 1.0}[self.p]

    def dual_norm(self, a):
        return float(np.linalg.norm(np.asarray(a, dtype=float), ord=self.conjugate))


def _parse_p(p):
    if isinstance(p, str):
        p = p.strip().lower()
        p = math.inf if p in ("inf", "infinity") else p
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise InvalidInput(f"p must be 1, 2 or inf, got {p!r}") from None
    if p not in (1.0, 2.0, math.inf):
        raise InvalidInput(f"p must be 1, 2 or inf (other exponents need power cones), got {p}")
    return p


def constraint_system(Q: SignedMeasure, observations: Sequence[SignedMeasure], model: ApproximabilityModel):
    """M[j, i] = l_i(v_j) and b[j] = Q(v_j)."""
    M = functional_matrix(observations, model.basis).reshape(model.n, len(observations))
    b = functional_matrix([Q], model.basis).reshape(model.n)
    return M, b


@dataclass(frozen=True, eq=False)
class EstimationProblem:
    Q: SignedMeasure
    observations: tuple
    model: ApproximabilityModel
    noise: UncertaintySet
    M: np.ndarray = field(init=False, repr=False)
    b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        m, n = len(obs), self.model.n
        if m < 1:
            raise InvalidInput("at least one observation functional is required")
        if n > m:
            raise InvalidInput(f"dim V = {n} exceeds the number of observations m = {m}")
        M, b = constraint_system(self.Q, obs, self.model)
        if n:
            sv = np.linalg.svd(M, compute_uv=False)
            if sv[-1] <= 1e-10 * max(sv[0], 1.0):
                raise InvalidInput(f"M = [l_i(v_j)] is rank deficient; singular values {sv.tolist()}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "b", b)

    @property
    def m(self):
        return len(self.observations)

    @property
    def ratio(self):
        return self.noise.eta / self.model.eps

    def with_quantity(self, Q: SignedMeasure) -> "EstimationProblem":
        return EstimationProblem(Q, self.observations, self.model, self.noise)

    def residual(self, a) -> SignedMeasure:
        a = np.asarray(a, dtype=float).ravel()
        if a.size != self.m:
            raise InvalidInput(f"expected {self.m} weights, got {a.size}")
        return combine([1.0, *(-a)], [self.Q, *self.observations])


# -- truncated semidefinite program --------------------------------------------

@dataclass(frozen=True, eq=False)
class TruncatedSolution:
    a: np.ndarray
    alpha: float
    N: int
    solution: conic.ConeSolution = field(repr=False)
    program: conic.ConeProgram = field(repr=False)


def _atom_table(problem):
    locs = sorted({float(x) for mu in (problem.Q, *problem.observations) for x in mu.atoms[:, 0]})
    index = {x: k for k, x in enumerate(locs)}
    W0 = np.zeros(len(locs))
    W = np.zeros((len(locs), problem.m))
    for x, w in problem.Q.atoms:
        W0[index[float(x)]] += w
    for i, mu in enumerate(problem.observations):
        for x, w in mu.atoms:
            W[index[float(x)], i] += w
    return W0, W


def _diffuse_moments(mu, N):
    if mu.density is None:
        return np.zeros(N)
    return moments(SignedMeasure(density=mu.density, quad_nodes=mu.quad_nodes), N).entries


def _add_norm_term(pb, a, pprime, weight):
    """Epigraph of weight * ||a||_{p'}; returns nothing, adds cost terms."""
    m = a.size
    if weight == 0.0:
        return
    I = np.eye(m)
    if pprime == 1.0:
        t = pb.variable(m)
        pb.less_equal([(a, I), (t, -I)], np.zeros(m))
        pb.less_equal([(a, -I), (t, -I)], np.zeros(m))
        pb.minimize(t, np.full(m, weight))
    elif pprime == 2.0:
        t = pb.variable(1)
        G_t = np.zeros((m + 1, 1))
        G_t[0, 0] = -1.0
        G_a = np.vstack([np.zeros((1, m)), -I])
        pb.add(conic.soc(m + 1), [(t, G_t), (a, G_a)], np.zeros(m + 1))
        pb.minimize(t, weight)
    else:
        t = pb.variable(1)
        ones = np.ones((m, 1))
        pb.less_equal([(a, I), (t, -ones)], np.zeros(m))
        pb.less_equal([(a, -I), (t, -ones)], np.zeros(m))
        pb.minimize(t, weight)


def build_truncated_program(problem: EstimationProblem, N: int, split_atoms=True):
    """Assemble the level-N program; returns (program, index of a).

    With ``split_atoms`` the atomic part of the residual (which the densities
    cannot cancel) enters exactly as an l1 term and only the diffuse part is
    represented by moments. Without it the program is the plain truncation
    over moments of the whole residual.
    """
    N = int(N)
    if N < 1:
        raise InvalidInput("truncation level must be at least 1")
    pb = ProgramBuilder()
    a = pb.variable(problem.m)
    if problem.model.n:
        pb.equal([(a, problem.M)], problem.b)

    if split_atoms:
        W0, W = _atom_table(problem)
        if W0.size:
            k = W0.size
            t = pb.variable(k)
            I = np.eye(k)
            # |W0 - W a| <= t
            pb.less_equal([(a, -W), (t, -I)], -W0)
            pb.less_equal([(a, W), (t, -I)], W0)
            pb.minimize(t, np.ones(k))
        measures = [problem.Q, *problem.observations]
        has_density = any(mu.density is not None for mu in measures)
        mom = (lambda mu: _diffuse_moments(mu, N)) if has_density else None
    else:
        has_density = True
        mom = lambda mu: moments(mu, N).entries

    if has_density:
        rho = mom(problem.Q)
        Lam = np.column_stack([mom(mu) for mu in problem.observations])
        zp, zm = pb.variable(N), pb.variable(N)
        I = np.eye(N)
        # z+ - z- = M_N(rho) - sum a_i M_N(lambda_i)
        pb.equal([(zp, I), (zm, -I), (a, Lam)], rho)
        D = [shift_matrix(j, N) for j in range(N)]
        pb.lmi([(zp, D)], np.zeros((N, N)))
        pb.lmi([(zm, D)], np.zeros((N, N)))
        pb.minimize(zp[[0]], 1.0)
        pb.minimize(zm[[0]], 1.0)

    _add_norm_term(pb, a, problem.noise.conjugate, problem.ratio)
    return pb.build(), a


def solve_truncated(problem: EstimationProblem, N: int, tol: Tolerances = Tolerances(),
                    split_atoms=True) -> TruncatedSolution:
    """Weights a^(N) and value alpha^(N) of the level-N relaxation.

    alpha^(N) is the certified dual objective, a lower bound on the exact optimum.
    """
    program, a_idx = build_truncated_program(problem, N, split_atoms)
    sol = conic.solve(program, tol)
    if not sol.optimal:
        raise SolverFailure(f"truncated program at N = {N} not solved ({sol.status})", sol)
    return TruncatedSolution(sol.x[a_idx].copy(), float(sol.dual_objective), int(N), sol, program)


def dual_objective(problem: EstimationProblem, a, with_budget=False):
    """||Q - sum a_i l_i||_{C*} + (eta/eps) ||a||_{p'}, the worst-case error of a over the unit ball."""
    tv, budget = tv_norm(problem.residual(a), with_budget=True)
    value = tv + problem.ratio * problem.noise.dual_norm(a)
    return (value, budget) if with_budget else value


def posterior_gap(problem: EstimationProblem, a, alpha):
    """delta^(N) = dual_objective(a^(N)) - alpha^(N), clamped at 0 within noise."""
    value = dual_objective(problem, a)
    delta = value - float(alpha)
    if delta < -BUG_TOL:
        raise InternalInconsistency(
            f"a-posteriori gap {delta:.3e} is negative beyond tolerance: the relaxation value exceeds "
            f"the exact objective at its own weights"
        )
    if delta < 0:
        if delta >= -CLAMP_TOL:
            return 0.0
        log.warning("slightly negative a-posteriori gap %.3e kept as is", delta)
    return delta


@dataclass(frozen=True, eq=False)
class WeightSolution:
    a: np.ndarray
    N: int
    alpha: float
    delta: float
    quad_budget: float = 0.0
    certified: bool = True
    monotone: bool = True
    history: tuple = ()  # ((N, alpha, delta), ...)
    gap_tol: float = DEFAULT_GAP_TOL

    @property
    def certified_value(self):
        return self.alpha + self.delta + self.quad_budget


def truncation_schedule(n, N_max=DEFAULT_N_MAX, N_start=None):
    N = max(int(n) + 1, 8) if N_start is None else int(N_start)
    out = []
    while N <= N_max:
        out.append(N)
        N *= 2
    return out


def solve_weights(problem: EstimationProblem, gap_tol=DEFAULT_GAP_TOL, N_max=DEFAULT_N_MAX,
                  tol: Tolerances = Tolerances(), N_start=None, split_atoms=True) -> WeightSolution:
    """Double N from max(n+1, 8) until delta^(N) <= gap_tol or N exceeds N_max."""
    if not gap_tol > 0:
        raise InvalidInput("gap_tol must be positive")
    schedule = truncation_schedule(problem.model.n, N_max, N_start)
    if not schedule:
        raise InvalidInput(f"N_max = {N_max} is below the first truncation level")
    history, best, monotone = [], None, True
    for N in schedule:
        ts = solve_truncated(problem, N, tol, split_atoms)
        delta = posterior_gap(problem, ts.a, ts.alpha)
        if history and ts.alpha < history[-1][1] - MONOTONE_SLACK:
            monotone = False
            log.warning("alpha^(N) decreased from %.12g to %.12g at N = %d", history[-1][1], ts.alpha, N)
        history.append((N, ts.alpha, delta))
        best = ts, delta
        if delta <= gap_tol:
            break
    ts, delta = best
    _, budget = dual_objective(problem, ts.a, with_budget=True)
    return WeightSolution(ts.a, ts.N, ts.alpha, delta, budget, delta <= gap_tol, monotone,
                          tuple(history), gap_tol)


def estimate(weights, y) -> float:
    """R(y) = sum a_i y_i."""
    a = np.asarray(getattr(weights, "a", weights), dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if a.size != y.size:
        raise InvalidInput(f"{a.size} weights but {y.size} data values")
    return math.fsum(a * y)  # exactly rounded, independent of BLAS


def compatibility_indicator(problem: EstimationProblem, gap_tol=DEFAULT_GAP_TOL, N_max=DEFAULT_N_MAX,
                            tol: Tolerances = Tolerances()):
    """Bracket [alpha, alpha + delta] around the indicator; intrinsic error = indicator * eps."""
    ws = solve_weights(problem, gap_tol, N_max, tol)
    return ws.alpha, ws.alpha + ws.delta + ws.quad_budget
