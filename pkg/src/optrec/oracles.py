"""Brute-force cross-checks: exact l-infinity centers of polytopes and sampled lower bounds.

Every sampler returns certified members of its set, so the maximum of any
error over the samples is a lower bound on the corresponding supremum. The
midrange oracle is exact: the smallest l-infinity ball around a bounded set
has, per coordinate, the midpoint of the coordinate's range as center.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .chebyshev import cheb_vander, chebyshev_grid, gauss_legendre, grid_inflation
from .errors import InfeasibleData, InvalidInput, OptRecError
from .functional import ApproximabilityModel, UncertaintySet
from .measures import SignedMeasure, combine

BURN_IN = 100
ORACLE_QUAD = 2048
_CHUNK = 512


@dataclass(frozen=True)
class SampleBudget:
    count: int = 10_000
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if int(self.count) < 1:
            raise InvalidInput("sample count must be at least 1")

    def chunks(self):
        """(size, Generator) pairs with seeds derived per chunk; merging them is order independent."""
        sizes = [min(_CHUNK, self.count - s) for s in range(0, self.count, _CHUNK)]
        seqs = np.random.SeedSequence(self.seed).spawn(len(sizes))
        return [(n, np.random.default_rng(s)) for n, s in zip(sizes, seqs)]

    def map_chunks(self, fn):
        jobs = self.chunks()
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                return list(pool.map(lambda job: fn(*job), jobs))
        return [fn(*job) for job in jobs]


@dataclass(frozen=True)
class OracleBound:
    value: float
    count: int
    argmax: int = -1


# -- exact polytope centers -------------------------------------------------

def _lp(c, A_ub, b_ub, A_eq=None, b_eq=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=[(None, None)] * len(c), method="highs")
    if res.status == 2:
        raise InfeasibleData("the polytope is empty")
    if res.status == 3:
        raise InvalidInput("the polytope is unbounded in the requested direction")
    if res.status != 0:
        raise OptRecError(f"linprog failed: {res.message}")
    return res


def midrange_center_oracle(At, bt, Q):
    """Per coordinate, max and min of <q_k, f> over {At f <= bt}; z = midpoints, r = largest half-width."""
    At = np.atleast_2d(np.asarray(At, dtype=float))
    bt = np.asarray(bt, dtype=float).ravel()
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    hi = np.array([-_lp(-q, At, bt).fun for q in Q])
    lo = np.array([_lp(q, At, bt).fun for q in Q])
    z = 0.5 * (hi + lo)
    return z, float(np.max(0.5 * (hi - lo)))


# -- polytope sampling --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolytopeSet:
    """{f : G f <= h, E f = e}. Equalities are optional."""

    G: np.ndarray
    h: np.ndarray
    E: np.ndarray | None = None
    e: np.ndarray | None = None
    directions: np.ndarray | None = None  # optional rows q; LP maximizers of +-q are added as members


def _interior_point(G, h):
    # Chebyshev ball of {G w <= h}: maximize t subject to G w + ||g_i|| t <= h
    norms = np.linalg.norm(G, axis=1)
    c = np.zeros(G.shape[1] + 1)
    c[-1] = -1.0
    res = _lp(c, np.column_stack([G, norms]), h, None, None) if G.shape[1] else None
    if res is None:
        return np.zeros(0), float(np.min(h)) if h.size else np.inf
    return res.x[:-1], float(res.x[-1])


def _reduce_equalities(s: PolytopeSet):
    """Parametrize {E f = e} as f = f0 + Z w; returns (f0, Z, G Z, h - G f0)."""
    G = np.atleast_2d(np.asarray(s.G, dtype=float))
    h = np.asarray(s.h, dtype=float).ravel()
    n = G.shape[1]
    if s.E is None or np.size(s.E) == 0:
        f0, Z = np.zeros(n), np.eye(n)
    else:
        E = np.atleast_2d(np.asarray(s.E, dtype=float))
        e = np.asarray(s.e, dtype=float).ravel()
        f0 = np.linalg.lstsq(E, e, rcond=None)[0]
        if np.max(np.abs(E @ f0 - e), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(e))):
            raise InfeasibleData("equality constraints are inconsistent")
        Z = scipy.linalg.null_space(E)
    return f0, Z, G @ Z, h - G @ f0


def _hit_and_run(Gz, hz, w0, count, rng, burn_in=BURN_IN):
    k = Gz.shape[1]
    out = np.empty((count, k))
    w = w0.copy()
    for it in range(burn_in + count):
        if k:
            d = rng.standard_normal(k)
            d /= np.linalg.norm(d)
            Gd = Gz @ d
            slack = hz - Gz @ w
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = slack / Gd
            tmax = np.min(ratios[Gd > 1e-14], initial=np.inf)
            tmin = np.max(ratios[Gd < -1e-14], initial=-np.inf)
            if not (np.isfinite(tmax) and np.isfinite(tmin)):
                raise InvalidInput("hit-and-run needs a bounded set")
            w = w + rng.uniform(tmin, tmax) * (1.0 - 1e-12) * d
        if it >= burn_in:
            out[it - burn_in] = w
    return out


def _sample_polytope(s: PolytopeSet, budget: SampleBudget, tol=1e-12):
    f0, Z, Gz, hz = _reduce_equalities(s)
    w0, radius = _interior_point(Gz, hz)
    if radius <= 0 and Gz.shape[1]:
        raise InfeasibleData("no interior point found for hit-and-run (the set is empty or flat)")
    # one chain per chunk, each seeded from the chunk's generator
    chains = budget.map_chunks(lambda n, rng: _hit_and_run(Gz, hz, w0, n, rng))
    W = np.vstack(chains)
    members = f0 + W @ Z.T
    if s.directions is not None:
        members = np.vstack([members, _extreme_members(s, f0, Z, Gz, hz, w0)])
    G = np.atleast_2d(np.asarray(s.G, dtype=float))
    h = np.asarray(s.h, dtype=float).ravel()
    ok = np.all(G @ members.T <= h[:, None] + tol * max(1.0, np.max(np.abs(h))), axis=0)
    return members[ok]


def _extreme_members(s, f0, Z, Gz, hz, w0):
    rows = []
    for q in np.atleast_2d(np.asarray(s.directions, dtype=float)):
        for sign in (1.0, -1.0):
            w = _lp(-sign * (Z.T @ q), Gz, hz).x
            rows.append(f0 + Z @ _pull_inside(Gz, hz, w, w0))
    return np.array(rows)


def _pull_inside(G, h, w, w0):
    # LP vertices may violate constraints by the solver's feasibility tolerance;
    # move toward the interior point w0 just far enough to satisfy all of them
    gw, g0 = G @ w, G @ w0
    bad = gw > h
    if not np.any(bad):
        return w
    lam = np.max((gw[bad] - h[bad]) / (gw[bad] - g0[bad]))
    lam = min(1.0, lam * (1.0 + 1e-9) + 1e-15)
    return w + lam * (w0 - w)


# -- polynomial unit ball -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolynomialBallSet:
    """Chebyshev coefficient vectors c of polynomials with sup|sum c_j T_j| <= 1 on [-1, 1].

    With ``rows`` (m x n, entries l_i(T_j)) and ``y`` the set is restricted to
    |rows c - y| <= eta. Membership is certified through the grid bound
    sup <= inflation * grid max.
    """

    n: int
    rows: np.ndarray | None = None
    y: np.ndarray | None = None
    eta: float = 0.0
    grid: int = 4096
    directions: np.ndarray | None = None


def _ball_polytope(s: PolynomialBallSet):
    g = chebyshev_grid(s.grid)
    V = cheb_vander(g, s.n)
    level = 1.0 / grid_inflation(s.n - 1, s.grid)
    G = np.vstack([V, -V])
    h = np.full(2 * g.size, level)
    E = e = None
    if s.rows is not None and np.size(s.rows):
        R = np.atleast_2d(np.asarray(s.rows, dtype=float))
        y = np.asarray(s.y, dtype=float).ravel()
        if s.eta > 0:
            G = np.vstack([G, R, -R])
            h = np.concatenate([h, y + s.eta, -(y - s.eta)])
        else:
            E, e = R, y
    return PolytopeSet(G, h, E, e, s.directions)


def _sample_ball_free(s: PolynomialBallSet, budget: SampleBudget):
    g = chebyshev_grid(s.grid)
    V = cheb_vander(g, s.n)
    infl = grid_inflation(s.n - 1, s.grid)

    def chunk(count, rng):
        C = rng.standard_normal((count, s.n))
        sup = np.max(np.abs(C @ V.T), axis=1) * infl
        radius = rng.uniform(size=count) ** (1.0 / s.n)
        # a quarter of the samples sit on the certified boundary
        radius[: count // 4] = 1.0
        return C * (radius / np.maximum(sup, 1e-300))[:, None]

    return np.vstack(budget.map_chunks(chunk))


# -- functions in C[-1, 1] ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FunctionBatch:
    """count functions f_s = v_s + h_s, vectorized: ``batch(x)`` has shape (count, len(x)).

    v_s = sum_j V[s, j] basis_j. h_s is eps * tanh(kappa_s * sum_k S[s, k] T_k),
    except for the rows listed in ``special`` which use a given function.
    """

    basis: tuple
    V: np.ndarray
    S: np.ndarray
    kappa: np.ndarray
    eps: float
    special: dict = field(default_factory=dict)

    @property
    def count(self):
        return self.V.shape[0]

    def h(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.eps * np.tanh(self.kappa[:, None] * (self.S @ cheb_vander(x, self.S.shape[1]).T))
        for s, fn in self.special.items():
            out[s] = self.eps * fn(x)
        return out

    def v(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.basis:
            return np.zeros((self.count, x.size))
        B = np.array([np.asarray(b(x), dtype=float) * np.ones(x.size) for b in self.basis])
        return self.V @ B

    def __call__(self, x):
        return self.v(x) + self.h(x)

    def rows(self, lo, hi):
        special = {s - lo: fn for s, fn in self.special.items() if lo <= s < hi}
        return FunctionBatch(self.basis, self.V[lo:hi], self.S[lo:hi], self.kappa[lo:hi], self.eps, special)

    def apply(self, nu: SignedMeasure, part="all", quad=ORACLE_QUAD):
        """Integrals of each function against nu (densities with a fine Gauss-Legendre rule)."""
        out = np.zeros(self.count)
        if nu.density is not None:
            x, w = gauss_legendre(max(quad, nu.quad_nodes))
            wd = w * nu.density(x)
        for lo in range(0, self.count, _CHUNK):
            sub = self.rows(lo, min(lo + _CHUNK, self.count))
            fn = {"all": sub.__call__, "h": sub.h, "v": sub.v}[part]
            if len(nu.atoms):
                out[lo:lo + sub.count] += fn(nu.atoms[:, 0]) @ nu.atoms[:, 1]
            if nu.density is not None:
                out[lo:lo + sub.count] += fn(x) @ wd
        return out


def sign_matching(nu: SignedMeasure, kappa=200.0):
    """A continuous function with sup <= 1 nearly realizing the total variation of nu.

    Tents of height sign(w) sit on the atoms; elsewhere tanh(kappa * density / max|density|)
    follows the sign of the density. The two parts are blended as a convex
    combination, so the sup norm never exceeds 1. For a purely atomic nu the
    integral equals the sum of |weights| exactly.
    """
    atoms = nu.atoms
    locs = atoms[:, 0]
    signs = np.sign(atoms[:, 1])
    if locs.size > 1:
        width = 0.25 * np.min(np.diff(np.sort(locs)))
    else:
        width = 0.25
    if nu.density is not None:
        width = min(width, 1e-3)
        g = chebyshev_grid(4097)
        scale = float(np.max(np.abs(nu.density(g)))) or 1.0
    density = nu.density

    def f(x):
        x = np.asarray(x, dtype=float)
        tents = np.zeros_like(x)
        sgn = np.zeros_like(x)
        for c, s in zip(locs, signs):
            t = np.clip(1.0 - np.abs(x - c) / width, 0.0, 1.0)
            tents = tents + t
            sgn = sgn + s * t
        smooth = np.tanh(kappa * density(x) / scale) if density is not None else np.zeros_like(x)
        return (1.0 - tents) * smooth + sgn

    return f


@dataclass(frozen=True, eq=False)
class ApproximabilitySet:
    """{f : dist(f, V) <= eps}; members v + h with v in V and sup|h| < eps (or = eps for targeted h)."""

    model: ApproximabilityModel
    degree: int = 12
    v_scale: float = 1.0
    targets: tuple = ()  # measures; sign-matching h for each is included
    eps: float | None = None  # overrides model.eps; 0 gives members of V itself


def _sample_approximability(s: ApproximabilitySet, budget: SampleBudget) -> FunctionBatch:
    def chunk(count, rng):
        V = s.v_scale * rng.standard_normal((count, s.model.n))
        S = rng.standard_normal((count, s.degree)) / (1.0 + np.arange(s.degree))
        kappa = np.exp(rng.uniform(0.0, np.log(200.0), size=count))
        return V, S, kappa

    parts = budget.map_chunks(chunk)
    V = np.vstack([p[0] for p in parts])
    S = np.vstack([p[1] for p in parts])
    kappa = np.concatenate([p[2] for p in parts])
    special = {}
    for t, nu in enumerate(s.targets[: budget.count]):
        special[t] = sign_matching(nu)
    eps = s.model.eps if s.eps is None else float(s.eps)
    if eps < 0:
        raise InvalidInput(f"eps must be nonnegative, got {eps}")
    return FunctionBatch(s.model.basis, V, S, kappa, eps, special)


# -- noise ----------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSet:
    noise: UncertaintySet
    m: int


def _sample_noise(s: NoiseSet, budget: SampleBudget):
    p, eta, m = s.noise.p, s.noise.eta, s.m

    def chunk(count, rng):
        if p == np.inf:
            E = rng.uniform(-1.0, 1.0, size=(count, m))
            E[: count // 4] = np.sign(E[: count // 4])
        elif p == 2.0:
            E = rng.standard_normal((count, m))
            E /= np.linalg.norm(E, axis=1, keepdims=True)
            E *= rng.uniform(size=(count, 1)) ** (1.0 / m)
        else:
            X = rng.exponential(size=(count, m + 1))
            E = (X[:, :m] / X.sum(axis=1, keepdims=True)) * rng.choice([-1.0, 1.0], size=(count, m))
        E = eta * E
        norms = np.linalg.norm(E, ord=p, axis=1)
        over = norms > eta
        E[over] *= (eta / norms[over])[:, None]
        return E

    return np.vstack(budget.map_chunks(chunk))


def holder_vector(c, noise: UncertaintySet):
    """e with ||e||_p <= eta and <c, e> = eta ||c||_{p'}."""
    c = np.asarray(c, dtype=float)
    e = np.zeros_like(c)
    if not np.any(c) or noise.eta == 0:
        return e
    if noise.p == np.inf:
        e = noise.eta * np.sign(c)
    elif noise.p == 2.0:
        e = noise.eta * c / np.linalg.norm(c)
    else:
        k = int(np.argmax(np.abs(c)))
        e[k] = noise.eta * np.sign(c[k])
    return e


def sample_model(descriptor, budget: SampleBudget):
    """Certified members of the described set (array of points, or a FunctionBatch)."""
    if isinstance(descriptor, PolytopeSet):
        return _sample_polytope(descriptor, budget)
    if isinstance(descriptor, PolynomialBallSet):
        if descriptor.rows is None and descriptor.directions is None:
            return _sample_ball_free(descriptor, budget)
        return _sample_polytope(_ball_polytope(descriptor), budget)
    if isinstance(descriptor, ApproximabilitySet):
        return _sample_approximability(descriptor, budget)
    if isinstance(descriptor, NoiseSet):
        return _sample_noise(descriptor, budget)
    raise InvalidInput(f"unknown set descriptor {type(descriptor).__name__}")


# -- worst-case errors ------------------------------------------------------------

def worst_case_error_oracle(recovery, problem, budget: SampleBudget = SampleBudget(), grid=None,
                            adversarial=True) -> OracleBound:
    """max over sampled (f, e) in K x E of the recovery error: a lower bound on the global error.

    ``recovery`` is a weight vector (or anything with ``.a``) for the functional
    ``problem.Q``, or a NearOptimalMap for full recovery (errors measured on
    ``grid`` plus the targeted points).
    """
    from .full import NearOptimalMap

    if isinstance(recovery, NearOptimalMap):
        return _worst_case_full(recovery, budget, grid, adversarial)
    a = np.asarray(getattr(recovery, "a", recovery), dtype=float).ravel()
    if a.size != problem.m:
        raise InvalidInput(f"expected {problem.m} weights, got {a.size}")
    targets = (problem.residual(a),) if adversarial else ()
    F = sample_model(ApproximabilitySet(problem.model, targets=targets), budget)
    E = sample_model(NoiseSet(problem.noise, problem.m), budget)
    LF = np.column_stack([F.apply(mu) for mu in problem.observations])
    r = F.apply(problem.Q) - LF @ a
    if adversarial:
        # every other sample pairs f with the noise vector that aligns with its error
        e_star = holder_vector(a, problem.noise)
        sgn = np.where(r >= 0, -1.0, 1.0)
        E[::2] = sgn[::2, None] * e_star
    err = np.abs(r - E @ a)
    k = int(np.argmax(err))
    return OracleBound(float(err[k]), err.size, k)


def _worst_case_full(nmap, budget, grid, adversarial):
    pr = nmap.problems[0]
    obs, model, noise = pr.observations, pr.model, pr.noise
    grid = np.linspace(-1.0, 1.0, 2049) if grid is None else np.asarray(grid, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(budget.seed).spawn(1)[0])
    targets, points = (), np.zeros(0)
    if adversarial:
        # target the points where the Lebesgue function of the weights peaks, plus random ones
        n_t = min(budget.count // 2, 256)
        cand = np.concatenate([nmap.interpolant.nodes, rng.uniform(-1, 1, size=4 * n_t), grid])
        W = nmap.weight_functions(cand)
        score = np.abs(W).sum(axis=1)
        order = np.argsort(-score, kind="stable")
        points = np.concatenate([cand[order[: n_t // 2]], rng.uniform(-1, 1, size=n_t - n_t // 2)])
        Wp = nmap.weight_functions(points)
        targets = tuple(combine([1.0, *(-Wp[t])], [SignedMeasure.dirac(float(points[t])), *obs])
                        for t in range(points.size))
    F = sample_model(ApproximabilitySet(model, targets=targets), budget)
    E = sample_model(NoiseSet(noise, len(obs)), budget)
    LF = np.column_stack([F.apply(mu) for mu in obs])
    if adversarial:
        Wp = nmap.weight_functions(points)
        idx = np.arange(points.size)
        r = F.rows(0, points.size)(points)[idx, idx] - np.einsum("ti,ti->t", LF[: points.size], Wp)
        for t in range(points.size):
            E[t] = (-1.0 if r[t] >= 0 else 1.0) * holder_vector(Wp[t], noise)
    xs = np.concatenate([grid, points])
    U = nmap.interpolant.basis(xs)
    best, arg = 0.0, -1
    for lo in range(0, F.count, _CHUNK):
        hi = min(lo + _CHUNK, F.count)
        rec = ((LF[lo:hi] + E[lo:hi]) @ nmap.coefficients) @ U.T
        err = np.max(np.abs(F.rows(lo, hi)(xs) - rec), axis=1)
        k = int(np.argmax(err))
        if err[k] > best:
            best, arg = float(err[k]), lo + k
    return OracleBound(best, F.count, arg)


def dual_norm_oracle(nu: SignedMeasure, budget: SampleBudget = SampleBudget()) -> OracleBound:
    """max |integral of f d nu| over sampled continuous f with sup|f| <= 1: a lower bound on tv_norm(nu)."""
    F = sample_model(ApproximabilitySet(ApproximabilityModel((), 1.0)), budget)
    kappas = (5.0, 20.0, 50.0, 100.0, 200.0, 500.0)[: F.count]
    special = {t: sign_matching(nu, kappa) for t, kappa in enumerate(kappas)}
    F = FunctionBatch(F.basis, F.V, F.S, F.kappa, F.eps, special)
    vals = np.abs(F.apply(nu, part="h"))
    k = int(np.argmax(vals))
    return OracleBound(float(vals[k]), vals.size, k)
