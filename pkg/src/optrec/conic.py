"""Small conic programs over products of zero, nonnegative, second-order and PSD cones.

Standard form::

    minimize  <c, x>   subject to   A x + s = b,   s in K = K_1 x ... x K_r

with ``x`` free. A zero cone block encodes equalities, ``psd(d)`` blocks hold
d x d symmetric matrices in scaled vectorized form (upper triangle, column
major, off-diagonals times sqrt(2)). The dual reads

    maximize  -<b, y>   subject to   A^T y + c = 0,   y in K*.

Interior-point work is delegated to cvxopt's ``conelp`` (homogeneous
self-dual embedding with Nesterov-Todd scaling). Every returned status is
re-derived here from (x, s, y); nothing is taken on trust from the solver.
"""
import json
import logging
import math
import os
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import InvalidInput

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal-infeasible"
DUAL_INFEASIBLE = "dual-infeasible"
MAX_ITERATIONS = "max-iterations"
NUMERICAL_FAILURE = "numerical-failure"

_SQRT2 = math.sqrt(2.0)
_KINDS = ("zero", "nonneg", "soc", "psd")
_RANK_TOL = 1e-13


@dataclass(frozen=True)
class Cone:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidInput(f"unknown cone kind {self.kind!r}")
        if self.dim < 1 or (self.kind == "soc" and self.dim < 1):
            raise InvalidInput(f"cone dimension must be positive, got {self.dim}")

    @property
    def size(self):
        return self.dim * (self.dim + 1) // 2 if self.kind == "psd" else self.dim


def zero(k):
    return Cone("zero", k)


def nonneg(k):
    return Cone("nonneg", k)


def soc(k):
    return Cone("soc", k)


def psd(d):
    return Cone("psd", d)


@dataclass(frozen=True)
class Tolerances:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    dist_tol: float = 1e-8
    max_iter: int = 200


@dataclass(frozen=True, eq=False)
class ConeProgram:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cones: tuple

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        A = sp.csr_matrix(self.A, dtype=float)
        cones = tuple(self.cones)
        rows = sum(k.size for k in cones)
        if A.shape != (rows, c.size) or b.size != rows:
            raise InvalidInput(
                f"dimension mismatch: A is {A.shape}, c has {c.size}, b has {b.size}, cones need {rows} rows"
            )
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b)) and np.all(np.isfinite(A.data))):
            raise InvalidInput("program data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "cones", cones)

    @property
    def num_vars(self):
        return self.c.size

    def rows_of(self, kind):
        """Number of constraint rows living in cones of the given kind."""
        return sum(k.size for k in self.cones if k.kind == kind)

    def blocks(self):
        """Yield (cone, row slice) pairs in order."""
        start = 0
        for k in self.cones:
            yield k, slice(start, start + k.size)
            start += k.size

    def to_json(self):
        A = self.A.tocoo()
        return {
            "c": self.c.tolist(),
            "A": {"shape": list(A.shape), "rows": A.row.tolist(), "cols": A.col.tolist(), "vals": A.data.tolist()},
            "b": self.b.tolist(),
            "cones": [[k.kind, k.dim] for k in self.cones],
        }

    @classmethod
    def from_json(cls, d):
        A = d["A"]
        mat = sp.coo_matrix((A["vals"], (A["rows"], A["cols"])), shape=tuple(A["shape"]))
        return cls(np.array(d["c"]), mat, np.array(d["b"]), tuple(Cone(k, n) for k, n in d["cones"]))


@dataclass(frozen=True, eq=False)
class ConeSolution:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    status: str
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float = math.nan
    dual_residual: float = math.nan
    cone_violation: float = math.nan
    iterations: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)

    @property
    def optimal(self):
        return self.status == OPTIMAL


# -- scaled vectorization ---------------------------------------------------

def svec_index(d):
    """(rows, cols) of the upper triangle in column-major order."""
    iu = [(i, j) for j in range(d) for i in range(j + 1)]
    return np.array([i for i, _ in iu], dtype=int), np.array([j for _, j in iu], dtype=int)


def svec(M):
    M = np.asarray(M, dtype=float)
    r, c = svec_index(M.shape[0])
    return np.where(r == c, 1.0, _SQRT2) * M[r, c]


def smat(v):
    v = np.asarray(v, dtype=float)
    d = int(round((math.sqrt(8 * v.size + 1) - 1) / 2))
    if d * (d + 1) // 2 != v.size:
        raise InvalidInput(f"length {v.size} is not a triangular number")
    r, c = svec_index(d)
    vals = np.where(r == c, 1.0, 1.0 / _SQRT2) * v
    M = np.zeros((d, d))
    M[r, c] = vals
    M[c, r] = vals
    return M


def cone_distance(kind, v):
    """Euclidean-ish distance from v to the cone (0 when inside)."""
    if v.size == 0:
        return 0.0
    if kind == "zero":
        return float(np.max(np.abs(v)))
    if kind == "nonneg":
        return float(max(0.0, -np.min(v)))
    if kind == "soc":
        t, u = v[0], np.linalg.norm(v[1:])
        if u <= t:
            return 0.0
        if u <= -t:
            return float(np.linalg.norm(v))
        return float((u - t) / _SQRT2)
    return float(max(0.0, -np.linalg.eigvalsh(smat(v))[0]))


def _dual_kind(kind):
    # the zero cone's dual is the free cone
    return None if kind == "zero" else kind


# -- program assembly -------------------------------------------------------

class ProgramBuilder:
    """Incremental assembly of a :class:`ConeProgram`.

    Variables are allocated in blocks; constraint blocks are added as lists of
    ``(variable_indices, coefficient_matrix)`` terms encoding ``sum M x[idx]``.
    A block with terms T and right-hand side h enforces ``h - sum(T) in K``.
    """

    def __init__(self):
        self.num_vars = 0
        self.cost = {}
        self._blocks = []

    def variable(self, size):
        idx = np.arange(self.num_vars, self.num_vars + int(size))
        self.num_vars += int(size)
        return idx

    def minimize(self, idx, coeffs):
        for i, v in zip(np.atleast_1d(idx), np.atleast_1d(coeffs)):
            self.cost[int(i)] = self.cost.get(int(i), 0.0) + float(v)

    def add(self, cone, terms, rhs):
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        if rhs.size != cone.size:
            raise InvalidInput(f"rhs of length {rhs.size} for cone of size {cone.size}")
        self._blocks.append((cone, [(np.asarray(i), np.atleast_2d(np.asarray(M, dtype=float))) for i, M in terms], rhs))

    def equal(self, terms, rhs):
        """sum(terms) == rhs."""
        rhs = np.atleast_1d(rhs)
        self.add(zero(rhs.size), terms, rhs)

    def less_equal(self, terms, rhs):
        """sum(terms) <= rhs componentwise."""
        rhs = np.atleast_1d(rhs)
        self.add(nonneg(rhs.size), terms, rhs)

    def lmi(self, terms, constant):
        """sum(terms) + constant is PSD, each term given as (idx, [F_i matrices])."""
        constant = np.asarray(constant, dtype=float)
        svec_terms = [(idx, -np.column_stack([svec(F) for F in Fs])) for idx, Fs in terms]
        self.add(psd(constant.shape[0]), svec_terms, svec(constant))

    def build(self):
        rows, cols, vals, b, cones = [], [], [], [], []
        r0 = 0
        for cone, terms, rhs in self._blocks:
            for idx, M in terms:
                if M.shape != (cone.size, idx.size):
                    raise InvalidInput(f"term of shape {M.shape} does not match ({cone.size}, {idx.size})")
                rr, cc = np.nonzero(M)
                rows.append(rr + r0)
                cols.append(idx[cc])
                vals.append(M[rr, cc])
            b.append(rhs)
            cones.append(cone)
            r0 += cone.size
        c = np.zeros(self.num_vars)
        for i, v in self.cost.items():
            c[i] = v
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)
        A = sp.coo_matrix(
            (cat(vals, float), (cat(rows, int), cat(cols, int))), shape=(r0, self.num_vars)
        ).tocsr()
        return ConeProgram(c, A, cat(b, float), tuple(cones))


# -- solving ----------------------------------------------------------------

def _to_cvxopt(p, keep_rows):
    """Split rows into cvxopt's equality part and its (l, q, s) cone part."""
    from cvxopt import matrix, spmatrix

    eq_rows, lin, socs, psds = [], [], [], []
    for cone, sl in p.blocks():
        r = np.arange(sl.start, sl.stop)
        if cone.kind == "zero":
            eq_rows.extend(int(i) for i in r if keep_rows[i])
        elif cone.kind == "nonneg":
            lin.extend(r.tolist())
        elif cone.kind == "soc":
            socs.append(r)
        else:
            psds.append((cone.dim, r))

    A = p.A.tocsr()
    G_parts, h_parts = [], []
    for rows in [np.array(lin, dtype=int)] + socs:
        G_parts.append(A[rows])
        h_parts.append(p.b[rows])
    for d, rows in psds:
        # expand svec rows into full column-major matrices
        ri, ci = svec_index(d)
        scale = np.where(ri == ci, 1.0, 1.0 / _SQRT2)
        block = sp.diags(scale) @ A[rows]
        hb = scale * p.b[rows]
        full_index = np.empty(d * d, dtype=int)
        full_index[ci * d + ri] = np.arange(ri.size)
        full_index[ri * d + ci] = np.arange(ri.size)
        G_parts.append(block[full_index])
        h_parts.append(hb[full_index])

    def to_sp(M):
        M = M.tocoo()
        return spmatrix(M.data.tolist(), M.row.tolist(), M.col.tolist(), M.shape)

    G = sp.vstack(G_parts).tocsr() if G_parts else sp.csr_matrix((0, p.num_vars))
    dims = {"l": len(lin), "q": [r.size for r in socs], "s": [d for d, _ in psds]}
    eq = np.array(eq_rows, dtype=int)
    return dict(
        c=matrix(p.c),
        G=to_sp(G),
        h=matrix(np.concatenate(h_parts) if h_parts else np.zeros(0)),
        dims=dims,
        A=to_sp(A[eq]) if eq.size else spmatrix([], [], [], (0, p.num_vars)),
        b=matrix(p.b[eq]) if eq.size else matrix(np.zeros(0)),
        eq_rows=eq,
        cone_rows=(np.array(lin, dtype=int), socs, psds),
    )


def _from_cvxopt(p, data, sol):
    """Map cvxopt (x, s, z, y) back onto the row order of ``p``."""
    x = np.array(sol["x"]).ravel()
    s_c = np.array(sol["s"]).ravel()
    z_c = np.array(sol["z"]).ravel()
    y_c = np.array(sol["y"]).ravel()
    s = np.zeros(p.b.size)
    y = np.zeros(p.b.size)
    y[data["eq_rows"]] = y_c
    lin, socs, psds = data["cone_rows"]
    pos = 0
    for rows in [lin] + socs:
        s[rows] = s_c[pos:pos + rows.size]
        y[rows] = z_c[pos:pos + rows.size]
        pos += rows.size
    for d, rows in psds:
        S = s_c[pos:pos + d * d].reshape(d, d, order="F")
        Z = z_c[pos:pos + d * d].reshape(d, d, order="F")
        s[rows] = svec(0.5 * (S + S.T))
        y[rows] = svec(0.5 * (Z + Z.T))
        pos += d * d
    return x, s, y


def _presolve(p, tol):
    """Flag redundant equality rows; returns (keep mask, inconsistent?)."""
    keep = np.ones(p.b.size, dtype=bool)
    zero_rows = [np.arange(sl.start, sl.stop) for k, sl in p.blocks() if k.kind == "zero"]
    eq = np.concatenate(zero_rows or [np.zeros(0, int)])
    if eq.size == 0:
        return keep, False
    Aeq = p.A[eq].toarray()
    beq = p.b[eq]
    _, R, piv = scipy.linalg.qr(Aeq.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-12 * max(1.0, diag[0] if diag.size else 0.0)))
    if rank == eq.size:
        return keep, False
    independent = np.sort(piv[:rank])
    keep[eq] = False
    keep[eq[independent]] = True
    # dropped rows must be implied by the kept ones
    basis = Aeq[independent]
    dropped = np.setdiff1d(np.arange(eq.size), independent)
    coef = np.linalg.lstsq(basis.T, Aeq[dropped].T, rcond=None)[0] if rank else np.zeros((0, dropped.size))
    implied = coef.T @ beq[independent] if rank else np.zeros(dropped.size)
    inconsistent = np.any(np.abs(implied - beq[dropped]) > tol * np.maximum(1.0, np.abs(beq[dropped])))
    return keep, bool(inconsistent)


def _verify(p, x, s, y, tol):
    r = p.A @ x + s - p.b
    pres = float(np.max(np.abs(r), initial=0.0)) / max(1.0, float(np.max(np.abs(p.b), initial=0.0)))
    dr = p.A.T @ y + p.c
    dres = float(np.max(np.abs(dr), initial=0.0)) / max(1.0, float(np.max(np.abs(p.c), initial=0.0)))
    viol = 0.0
    for cone, sl in p.blocks():
        viol = max(viol, cone_distance(cone.kind, s[sl]) / max(1.0, float(np.linalg.norm(s[sl]))))
        dk = _dual_kind(cone.kind)
        if dk is not None:
            viol = max(viol, cone_distance(dk, y[sl]) / max(1.0, float(np.linalg.norm(y[sl]))))
    pobj = float(p.c @ x)
    dobj = float(-p.b @ y)
    gap = abs(pobj - dobj)
    ok = (
        pres <= tol.feas_tol
        and dres <= tol.feas_tol
        and viol <= tol.dist_tol
        and gap <= tol.gap_tol * max(1.0, abs(pobj))
    )
    return ok, pobj, dobj, gap, pres, dres, viol


_DUMP = {"dir": None, "count": 0, "lock": threading.Lock()}


def dump_programs(directory):
    """Write every program passed to ``solve`` as JSON into ``directory`` (None switches it off)."""
    if directory is not None:
        os.makedirs(directory, exist_ok=True)
    _DUMP["dir"], _DUMP["count"] = directory, 0


def solve(p: ConeProgram, tol: Tolerances = Tolerances(), dump=None) -> ConeSolution:
    """Solve ``p`` and certify the result against ``tol``.

    Status is ``optimal`` only if the primal/dual residuals, the duality gap
    and the cone memberships recomputed from the returned point pass ``tol``
    (each relative to max(1, scale of the data)).
    """
    from cvxopt import solvers

    if dump is None and _DUMP["dir"] is not None:
        with _DUMP["lock"]:
            _DUMP["count"] += 1
            dump = os.path.join(_DUMP["dir"], f"program-{_DUMP['count']:05d}.json")
    if dump is not None:
        with open(dump, "w") as fh:
            json.dump(p.to_json(), fh)

    keep, inconsistent = _presolve(p, tol.feas_tol)
    if inconsistent:
        return _failed(p, PRIMAL_INFEASIBLE, tol)

    used = np.zeros(p.num_vars, dtype=bool)
    used[np.unique(p.A.tocoo().col)] = True
    if np.any((~used) & (p.c != 0.0)):
        return _failed(p, DUAL_INFEASIBLE, tol)
    if not np.all(used):
        # free variables that appear nowhere are fixed at zero
        sub = ConeProgram(p.c[used], p.A[:, used], p.b, p.cones)
        inner = solve(sub, tol)
        x = np.zeros(p.num_vars)
        x[used] = inner.x
        return ConeSolution(x, inner.y, inner.s, inner.status, inner.primal_objective, inner.dual_objective,
                            inner.gap, inner.primal_residual, inner.dual_residual, inner.cone_violation,
                            inner.iterations, tol)

    if _column_rank_deficient(p):
        return _solve_reduced(p, tol)

    data = _to_cvxopt(p, keep)
    best, last_err = None, None
    # the solver's own stopping rule is tried at, below and above the requested
    # tolerances: cvxopt may stall (singular KKT) when pushed too far. The
    # Cholesky KKT solver is fast but gives up on degenerate faces; LDL is the fallback.
    attempts = [(f, False, "chol") for f in (1.0, 0.1, 10.0, 100.0)] + [(f, False, "ldl") for f in (1.0, 0.1, 10.0)]
    for factor, cold, kkt in _attempt_queue(attempts):
        opts = {
            "show_progress": False,
            "maxiters": tol.max_iter,
            "abstol": tol.gap_tol * factor,
            "reltol": tol.gap_tol * factor,
            "feastol": tol.feas_tol * factor,
        }
        try:
            start = _standard_start(data) if cold else {}
            sol = solvers.conelp(data["c"], data["G"], data["h"], data["dims"], data["A"], data["b"],
                                 kktsolver=kkt, options=opts, **start)
        except ValueError as err:
            if "Rank" in str(err):
                return _solve_reduced(p, tol)
            last_err = err
            continue
        except ArithmeticError as err:
            last_err = err
            continue
        iters = int(sol.get("iterations", 0))
        if sol["status"] == "primal infeasible":
            return _failed(p, PRIMAL_INFEASIBLE, tol, iters)
        if sol["status"] == "dual infeasible":
            return _failed(p, DUAL_INFEASIBLE, tol, iters)
        if sol["x"] is None:
            continue
        x, s, y = _from_cvxopt(p, data, sol)
        checks = _verify(p, x, s, y, tol)
        if checks[0]:
            return _solution(x, y, s, OPTIMAL, checks, iters, tol)
        if iters == 0 and not cold:
            # cvxopt may stop at its initial point with an unverified dual; restart
            # from the central point instead
            attempts.append((factor, True, kkt))
        score = max(checks[4], checks[5], checks[6], checks[3] / max(1.0, abs(checks[1])))
        if best is None or score < best[0]:
            status = MAX_ITERATIONS if iters >= tol.max_iter else NUMERICAL_FAILURE
            best = (score, _solution(x, y, s, status, checks, iters, tol))
    if best is None:
        log.debug("cvxopt failed: %s", last_err)
        return _failed(p, NUMERICAL_FAILURE, tol)
    return best[1]


def _attempt_queue(attempts):
    i = 0
    while i < len(attempts):
        yield attempts[i]
        i += 1


def _standard_start(data):
    """x = 0, y = 0 and s = z = identity of the cone product."""
    from cvxopt import matrix

    dims = data["dims"]
    e = [np.ones(dims["l"])]
    for q in dims["q"]:
        v = np.zeros(q)
        v[0] = 1.0
        e.append(v)
    for d in dims["s"]:
        e.append(np.eye(d).ravel(order="F"))
    e = matrix(np.concatenate(e))
    nx = data["c"].size[0]
    ny = data["b"].size[0]
    return {
        "primalstart": {"x": matrix(np.zeros(nx)), "s": e},
        "dualstart": {"y": matrix(np.zeros(ny)), "z": matrix(e)},
    }


def _column_rank_deficient(p):
    w = np.linalg.eigvalsh((p.A.T @ p.A).toarray())
    return w.size > 0 and w[0] <= _RANK_TOL * max(1.0, w[-1])


def _solve_reduced(p, tol):
    """Re-solve over the row space of A when A has dependent columns.

    Directions in the null space of A leave every constraint unchanged; the
    program is unbounded along them unless c is orthogonal to them.
    """
    AtA = (p.A.T @ p.A).toarray()
    w, V = np.linalg.eigh(AtA)
    keep = w > _RANK_TOL * max(1.0, w[-1])
    basis, null = V[:, keep], V[:, ~keep]
    if null.size and np.max(np.abs(null.T @ p.c)) > tol.feas_tol * max(1.0, np.max(np.abs(p.c))):
        return _failed(p, DUAL_INFEASIBLE, tol)
    inner = solve(ConeProgram(basis.T @ p.c, sp.csr_matrix(p.A @ basis), p.b, p.cones), tol)
    if inner.status in (PRIMAL_INFEASIBLE, DUAL_INFEASIBLE) or not np.all(np.isfinite(inner.x)):
        return _failed(p, inner.status, tol, inner.iterations)
    x = basis @ inner.x
    checks = _verify(p, x, inner.s, inner.y, tol)
    status = OPTIMAL if checks[0] else inner.status
    return _solution(x, inner.y, inner.s, status, checks, inner.iterations, tol)


def _solution(x, y, s, status, checks, iters, tol):
    _, pobj, dobj, gap, pres, dres, viol = checks
    return ConeSolution(x, y, s, status, pobj, dobj, gap, pres, dres, viol, iters, tol)


def _failed(p, status, tol, iters=0):
    nan = np.full(p.num_vars, np.nan)
    return ConeSolution(nan, np.full(p.b.size, np.nan), np.full(p.b.size, np.nan), status,
                        math.nan, math.nan, math.nan, iterations=iters, tolerances=tol)


def load_program(path):
    with open(path) as fh:
        return ConeProgram.from_json(json.load(fh))


# -- the semidefinite duality pair -------------------------------------------

@dataclass(frozen=True, eq=False)
class LemDualPair:
    """Primal (maximize tr[C(P-M)]) and dual (minimize <beta,x> + <alpha,u>) programs.

    The primal is stored as a minimization of -tr[C(P-M)]; use
    :meth:`primal_value` to read off the maximization value.
    """

    primal: ConeProgram
    dual: ConeProgram
    dim: int
    m: int
    n: int

    @staticmethod
    def primal_value(sol):
        return -sol.primal_objective

    @staticmethod
    def dual_value(sol):
        return sol.primal_objective

    def primal_matrices(self, sol):
        k = self.dim * (self.dim + 1) // 2
        return smat(sol.x[:k]), smat(sol.x[k:2 * k])

    def dual_variables(self, sol):
        return sol.x[: self.n], sol.x[self.n:]


def lemdual_pair(A_list, B_list, C, alpha, beta) -> LemDualPair:
    """Build the semidefinite primal/dual pair

    primal: max tr[C(P-M)]  s.t. tr[B_j(P+M)] = beta_j, tr[A_i(P-M)] <= alpha_i, M, P PSD
    dual:   min <beta,x> + <alpha,u>  s.t. sum x_j B_j -/+ (C - sum u_i A_i) PSD, u >= 0
    """
    C = np.asarray(C, dtype=float)
    A_list = [np.asarray(A, dtype=float) for A in A_list]
    B_list = [np.asarray(B, dtype=float) for B in B_list]
    alpha = np.asarray(alpha, dtype=float).ravel()
    beta = np.asarray(beta, dtype=float).ravel()
    d = C.shape[0]
    if C.shape != (d, d) or any(M.shape != (d, d) for M in A_list + B_list):
        raise InvalidInput("all matrices must be square of the same size")
    if any(not np.allclose(M, M.T) for M in A_list + B_list + [C]):
        raise InvalidInput("all matrices must be symmetric")
    if alpha.size != len(A_list) or beta.size != len(B_list):
        raise InvalidInput("alpha/beta lengths must match the matrix lists")
    m, n = len(A_list), len(B_list)
    k = d * (d + 1) // 2

    pb = ProgramBuilder()
    P, M = pb.variable(k), pb.variable(k)
    pb.minimize(P, -svec(C))
    pb.minimize(M, svec(C))
    if n:
        Bv = np.array([svec(B) for B in B_list])
        pb.equal([(P, Bv), (M, Bv)], beta)
    if m:
        Av = np.array([svec(A) for A in A_list])
        pb.less_equal([(P, Av), (M, -Av)], alpha)
    pb.add(psd(d), [(P, -np.eye(k))], np.zeros(k))
    pb.add(psd(d), [(M, -np.eye(k))], np.zeros(k))
    primal = pb.build()

    db = ProgramBuilder()
    x, u = db.variable(n), db.variable(m)
    db.minimize(x, beta)
    db.minimize(u, alpha)
    if m:
        db.less_equal([(u, -np.eye(m))], np.zeros(m))
    for sign in (1.0, -1.0):
        terms = []
        if n:
            terms.append((x, B_list))
        if m:
            terms.append((u, [sign * A for A in A_list]))
        db.lmi(terms, -sign * C)
    dual = db.build()
    return LemDualPair(primal, dual, d, m, n)
