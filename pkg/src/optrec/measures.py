"""Signed measures on [-1, 1]: atoms plus a quadrature-backed density.

Measures are immutable. Linear combinations produce new measures whose
density is the corresponding combination of the input densities.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.optimize import brentq

from .chebyshev import cheb_vander, chebyshev_grid, chebyshev_lobatto, gauss_legendre
from .errors import InvalidInput

DEFAULT_QUAD_NODES = 256
_ROOT_GRID = 2049


class Density:
    """A scalar function on [-1, 1], vectorized over numpy arrays."""

    kind = "function"

    def __call__(self, x):
        raise NotImplementedError

    def to_json(self):
        raise InvalidInput(f"density of kind {self.kind!r} has no JSON form")


@dataclass(frozen=True)
class SinDensity(Density):
    freq: float
    scale: float = 1.0
    kind = "sin"

    def __call__(self, x):
        return self.scale * np.sin(self.freq * np.pi * np.asarray(x, dtype=float))

    def to_json(self):
        return {"kind": "sin", "params": [self.freq, self.scale]}


@dataclass(frozen=True)
class CosDensity(Density):
    freq: float
    scale: float = 1.0
    kind = "cos"

    def __call__(self, x):
        return self.scale * np.cos(self.freq * np.pi * np.asarray(x, dtype=float))

    def to_json(self):
        return {"kind": "cos", "params": [self.freq, self.scale]}


@dataclass(frozen=True)
class PolyDensity(Density):
    """Polynomial density in the monomial basis, coefficients in ascending order."""

    coeffs: tuple
    kind = "poly"

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coeffs)

    def to_json(self):
        return {"kind": "poly", "params": list(self.coeffs)}


@dataclass(frozen=True, eq=False)
class SampledDensity(Density):
    """Polynomial interpolant of values at ascending Chebyshev points of the second kind."""

    values: tuple
    kind = "samples"

    @cached_property
    def _interp(self):
        return BarycentricInterpolator(chebyshev_lobatto(len(self.values)), np.asarray(self.values))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if len(self.values) == 1:
            return np.full_like(x, self.values[0])
        return self._interp(x)

    def to_json(self):
        return {"kind": "samples", "params": list(self.values)}


@dataclass(frozen=True, eq=False)
class FunctionDensity(Density):
    fn: Callable
    name: str = "function"

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True, eq=False)
class CombinedDensity(Density):
    terms: tuple  # ((coef, Density), ...)
    kind = "combination"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, d in self.terms:
            if c:
                out = out + c * d(x)
        return out


_DENSITY_KINDS = {"sin": SinDensity, "cos": CosDensity}


def density_from_json(d):
    kind = d.get("kind")
    params = d.get("params", [])
    if kind in _DENSITY_KINDS:
        if not 1 <= len(params) <= 2:
            raise InvalidInput(f"{kind} density takes [freq] or [freq, scale]")
        return _DENSITY_KINDS[kind](*map(float, params))
    if kind == "poly":
        return PolyDensity(tuple(float(p) for p in params))
    if kind == "samples":
        if not params:
            raise InvalidInput("samples density needs at least one value")
        return SampledDensity(tuple(float(p) for p in params))
    raise InvalidInput(f"unknown density kind {kind!r}")


@dataclass(frozen=True)
class MomentVector:
    """Chebyshev moments: entries[k] = integral of T_k against the measure."""

    entries: np.ndarray
    error_budget: float = 0.0

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """Finite signed Borel measure on [-1, 1].

    ``atoms`` is an (k, 2) array of (location, weight) rows; ``density`` is an
    optional :class:`Density` integrated with a Gauss-Legendre rule of
    ``quad_nodes`` points.
    """

    atoms: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    density: Density | None = None
    quad_nodes: int = DEFAULT_QUAD_NODES

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(atoms)):
            raise InvalidInput("atoms must be finite")
        if np.any(np.abs(atoms[:, 0]) > 1.0):
            raise InvalidInput("atom locations must lie in [-1, 1]")
        if len(np.unique(atoms[:, 0])) != len(atoms):
            raise InvalidInput("atom locations must be pairwise distinct")
        if int(self.quad_nodes) < 1:
            raise InvalidInput("quad_nodes must be positive")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "quad_nodes", int(self.quad_nodes))

    # -- construction -----------------------------------------------------
    @classmethod
    def dirac(cls, x, weight=1.0):
        return cls(atoms=[[x, weight]])

    @classmethod
    def lebesgue(cls, scale=1.0, quad_nodes=DEFAULT_QUAD_NODES):
        return cls(density=PolyDensity((float(scale),)), quad_nodes=quad_nodes)

    @classmethod
    def from_density(cls, fn, quad_nodes=DEFAULT_QUAD_NODES):
        density = fn if isinstance(fn, Density) else FunctionDensity(fn)
        return cls(density=density, quad_nodes=quad_nodes)

    @classmethod
    def from_json(cls, d):
        if not isinstance(d, dict):
            raise InvalidInput("a measure must be a JSON object")
        unknown = set(d) - {"atoms", "density", "quad_nodes"}
        if unknown:
            raise InvalidInput(f"unknown measure fields {sorted(unknown)}")
        atoms = d.get("atoms") or []
        if any(len(a) != 2 for a in atoms):
            raise InvalidInput("atoms must be [location, weight] pairs")
        density = d.get("density")
        return cls(
            atoms=np.asarray(atoms, dtype=float).reshape(-1, 2),
            density=None if density is None else density_from_json(density),
            quad_nodes=d.get("quad_nodes", DEFAULT_QUAD_NODES),
        )

    def to_json(self):
        return {
            "atoms": self.atoms.tolist(),
            "density": None if self.density is None else self.density.to_json(),
            "quad_nodes": self.quad_nodes,
        }

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        return combine([1.0, 1.0], [self, other])

    def __sub__(self, other):
        return combine([1.0, -1.0], [self, other])

    def __mul__(self, c):
        return combine([float(c)], [self])

    __rmul__ = __mul__

    def __neg__(self):
        return combine([-1.0], [self])

    @property
    def is_atomic(self):
        return self.density is None

    # -- numerics ---------------------------------------------------------
    def moments(self, N):
        return moments(self, N)

    def tv_norm(self):
        return tv_norm(self)

    def apply(self, f, nodes=None):
        return apply_functional(self, f, nodes=nodes)

    @cached_property
    def _density_pieces(self):
        """Breakpoints splitting [-1, 1] into intervals where the density keeps its sign."""
        return _sign_breakpoints(self.density)

    @cached_property
    def quad_error(self):
        """Declared quadrature error budget for integrals of the density part."""
        if self.density is None:
            return 0.0
        fine = _piecewise_abs_integral(self.density, self._density_pieces, self.quad_nodes)
        coarse = _piecewise_abs_integral(self.density, self._density_pieces, max(self.quad_nodes // 2, 1))
        return abs(fine - coarse) + 1e-15 * max(fine, 1.0)


def combine(coeffs: Sequence[float], measures: Sequence[SignedMeasure]) -> SignedMeasure:
    """The measure sum_i coeffs[i] * measures[i]; coincident atoms are merged."""
    if len(coeffs) != len(measures):
        raise InvalidInput("coefficient/measure count mismatch")
    weights = {}
    terms = []
    q = DEFAULT_QUAD_NODES if not measures else max(m.quad_nodes for m in measures)
    for c, m in zip(coeffs, measures):
        c = float(c)
        for x, w in m.atoms:
            weights[x] = weights.get(x, 0.0) + c * w
        if m.density is not None and c != 0.0:
            if isinstance(m.density, CombinedDensity):
                terms.extend((c * c2, d2) for c2, d2 in m.density.terms)
            else:
                terms.append((c, m.density))
    atoms = np.array([[x, w] for x, w in sorted(weights.items()) if w != 0.0]).reshape(-1, 2)
    density = CombinedDensity(tuple(terms)) if terms else None
    return SignedMeasure(atoms=atoms, density=density, quad_nodes=q)


def moments(nu: SignedMeasure, N: int) -> MomentVector:
    """First N Chebyshev moments of ``nu``.

    The density part uses ``nu.quad_nodes + N`` Gauss-Legendre nodes so the
    degree of T_{N-1} does not eat into the density's own accuracy.
    """
    N = int(N)
    if N < 1:
        raise InvalidInput("truncation level must be at least 1")
    out = np.zeros(N)
    if len(nu.atoms):
        out += cheb_vander(nu.atoms[:, 0], N).T @ nu.atoms[:, 1]
    budget = 0.0
    if nu.density is not None:
        x, w = gauss_legendre(nu.quad_nodes + N)
        out += cheb_vander(x, N).T @ (w * nu.density(x))
        budget = nu.quad_error
    return MomentVector(out, budget)


def tv_norm(nu: SignedMeasure, with_budget=False):
    """Total variation of ``nu``: sum of |atom weights| plus the integral of |density|.

    The density integral is split at its sign changes so each piece is smooth.
    With ``with_budget`` returns ``(value, quadrature_error_budget)``.
    """
    value = float(np.abs(nu.atoms[:, 1]).sum())
    budget = 0.0
    if nu.density is not None:
        value += _piecewise_abs_integral(nu.density, nu._density_pieces, nu.quad_nodes)
        budget = nu.quad_error
    return (value, budget) if with_budget else value


def apply_functional(nu: SignedMeasure, f: Callable, nodes=None) -> float:
    """Integral of ``f`` against ``nu`` (atoms exactly, density by quadrature)."""
    total = 0.0
    if len(nu.atoms):
        total += float(np.dot(np.asarray(f(nu.atoms[:, 0]), dtype=float), nu.atoms[:, 1]))
    if nu.density is not None:
        x, w = gauss_legendre(nodes or nu.quad_nodes)
        total += float(np.dot(w * nu.density(x), np.asarray(f(x), dtype=float)))
    return total


def functional_matrix(measures: Sequence[SignedMeasure], functions: Sequence[Callable]) -> np.ndarray:
    """Matrix F with F[j, i] = integral of functions[j] against measures[i]."""
    F = np.zeros((len(functions), len(measures)))
    for i, nu in enumerate(measures):
        for j, f in enumerate(functions):
            F[j, i] = apply_functional(nu, f)
    return F


def _sign_breakpoints(density):
    if density is None:
        return np.array([-1.0, 1.0])
    g = chebyshev_grid(_ROOT_GRID)
    v = density(g)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return np.array([-1.0, 1.0])
    pts = [-1.0]
    for i in range(len(g) - 1):
        if v[i] == 0.0 and 0 < i:
            pts.append(g[i])
        elif v[i] * v[i + 1] < 0.0:
            pts.append(brentq(density, g[i], g[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    pts.append(1.0)
    return np.unique(np.asarray(pts))


def _piecewise_abs_integral(density, breakpoints, q):
    x, w = gauss_legendre(q)
    total = 0.0
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b <= a:
            continue
        half = 0.5 * (b - a)
        total += abs(half * np.dot(w, density(half * x + 0.5 * (a + b))))
    return float(total)
