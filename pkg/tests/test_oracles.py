import numpy as np
import pytest
from scipy.linalg import null_space
from hypothesis import given, settings
from hypothesis import strategies as st

from optrec.chebyshev import cheb_vander, chebyshev_grid, grid_inflation
from optrec.errors import InfeasibleData, InvalidInput
from optrec.functional import (
    ApproximabilityModel,
    EstimationProblem,
    UncertaintySet,
    dual_objective,
    polynomial_model,
)
from optrec.measures import CosDensity, PolyDensity, SignedMeasure, SinDensity, tv_norm
from optrec.oracles import (
    ApproximabilitySet,
    NoiseSet,
    PolynomialBallSet,
    PolytopeSet,
    SampleBudget,
    dual_norm_oracle,
    holder_vector,
    midrange_center_oracle,
    sample_model,
    worst_case_error_oracle,
)

BOX_A = np.vstack([np.eye(2), -np.eye(2)])
BOX_B = np.ones(4)
POINTS = [-0.9, -0.4, 0.1, 0.5, 0.9]


def test_midrange_box():
    z, r = midrange_center_oracle(BOX_A, BOX_B, np.eye(2))
    np.testing.assert_allclose(z, 0.0, atol=1e-12)
    assert r == pytest.approx(1.0)


def test_midrange_segment():
    A = np.vstack([BOX_A, [[1.0, 0.0], [-1.0, 0.0]]])
    b = np.concatenate([BOX_B, [0.5, -0.5]])
    z, r = midrange_center_oracle(A, b, [[1.0, 0.0]])
    assert z[0] == pytest.approx(0.5)
    assert r == pytest.approx(0.0, abs=1e-12)


def test_midrange_errors():
    with pytest.raises(InfeasibleData):
        midrange_center_oracle([[1.0], [-1.0]], [0.0, -1.0], [[1.0]])
    with pytest.raises(InvalidInput):
        midrange_center_oracle([[1.0]], [1.0], [[1.0]])


def test_budget_rejects_zero():
    with pytest.raises(InvalidInput):
        SampleBudget(0)


# -- membership --------------------------------------------------------------------------

@pytest.mark.parametrize("p", ["inf", 2, 1])
def test_noise_samples_are_in_the_ball(p):
    noise = UncertaintySet(p, 0.3)
    E = sample_model(NoiseSet(noise, 4), SampleBudget(5000, 1))
    assert E.shape == (5000, 4)
    assert np.max(np.linalg.norm(E, ord=noise.p, axis=1)) <= 0.3 * (1 + 1e-12)


def test_zero_eps_samples_lie_in_the_model():
    F = sample_model(ApproximabilitySet(polynomial_model(3, 1.0), eps=0.0), SampleBudget(300, 2))
    x = np.linspace(-1, 1, 101)
    np.testing.assert_array_equal(F.h(x), 0.0)
    np.testing.assert_allclose(F(x), F.V @ cheb_vander(x, 3).T, atol=1e-13)


def test_approximability_samples_respect_eps():
    F = sample_model(ApproximabilitySet(polynomial_model(2, 0.4), targets=(SignedMeasure.dirac(0.3),)),
                     SampleBudget(1000, 3))
    x = np.linspace(-1, 1, 4001)
    assert np.max(np.abs(F.h(x))) <= 0.4 * (1 + 1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_polytope_samples_satisfy_constraints(seed):
    rng = np.random.default_rng(seed)
    G = np.vstack([BOX_A, rng.standard_normal((2, 2))])
    h = np.concatenate([BOX_B, rng.uniform(0.2, 1, 2)])
    S = sample_model(PolytopeSet(G, h, directions=np.eye(2)), SampleBudget(2000, seed % 100))
    assert S.shape[0] >= 2000
    assert np.all(S @ G.T <= h + 1e-12)


def test_polytope_equalities_are_kept():
    S = sample_model(PolytopeSet(BOX_A, BOX_B, [[1.0, 1.0]], [0.5]), SampleBudget(500, 0))
    np.testing.assert_allclose(S.sum(axis=1), 0.5, atol=1e-12)


def test_polynomial_ball_members_are_certified():
    S = sample_model(PolynomialBallSet(4), SampleBudget(1000, 4))
    g = chebyshev_grid(4096)
    grid_max = np.max(np.abs(S @ cheb_vander(g, 4).T), axis=1)
    assert np.all(grid_max * grid_inflation(3, 4096) <= 1 + 1e-12)


# -- dual norms ----------------------------------------------------------------------------

def test_dirac_dual_norm():
    assert dual_norm_oracle(SignedMeasure.dirac(0.4), SampleBudget(100, 0)).value == pytest.approx(1.0, abs=1e-15)


def test_atomic_dual_norm_is_exact():
    nu = SignedMeasure(atoms=[[-0.7, 2.0], [0.1, -0.5], [0.12, 1.5]])
    assert dual_norm_oracle(nu, SampleBudget(100, 0)).value == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("density", [SinDensity(1.0), CosDensity(2.5, 0.3), PolyDensity((-0.25, 0.0, 1.0))])
def test_density_dual_norm_within_two_percent(density):
    nu = SignedMeasure.from_density(density)
    bound = dual_norm_oracle(nu, SampleBudget(10_000, 0)).value
    tv = tv_norm(nu)
    assert bound <= tv * (1 + 1e-9)
    assert bound >= 0.98 * tv


# -- worst-case errors -----------------------------------------------------------------------

def _point_problem(eta=0.3, model=None):
    obs = [SignedMeasure.dirac(x) for x in POINTS]
    return EstimationProblem(SignedMeasure.dirac(POINTS[2]), obs, model or polynomial_model(3, 1.0),
                             UncertaintySet("inf", eta))


def test_zero_map_approaches_the_sup():
    pr = _point_problem(model=ApproximabilityModel((), 1.0))
    bound = worst_case_error_oracle(np.zeros(5), pr, SampleBudget(2000, 1))
    assert 0.99 <= bound.value <= 1.0
    plain = worst_case_error_oracle(np.zeros(5), pr, SampleBudget(2000, 1), adversarial=False)
    assert plain.value <= 1.0


def test_unit_vector_map_error_is_eta():
    bound = worst_case_error_oracle(np.eye(5)[2], _point_problem(eta=0.3), SampleBudget(2000, 1))
    assert bound.value <= 0.3 + 1e-12
    assert bound.value >= 0.99 * 0.3


def test_holder_vector_attains_the_dual_norm():
    c = np.array([0.5, -2.0, 1.0])
    for p in ("inf", 2, 1):
        noise = UncertaintySet(p, 0.7)
        e = holder_vector(c, noise)
        assert np.linalg.norm(e, ord=noise.p) <= 0.7 + 1e-15
        assert c @ e == pytest.approx(0.7 * noise.dual_norm(c))


def test_seed_reproducibility_is_bitwise():
    pr = _point_problem()
    a = np.array([0.1, -0.2, 0.9, 0.3, -0.1])
    b1 = worst_case_error_oracle(a, pr, SampleBudget(3000, 7))
    b2 = worst_case_error_oracle(a, pr, SampleBudget(3000, 7))
    assert b1 == b2
    b3 = worst_case_error_oracle(a, pr, SampleBudget(3000, 8))
    assert b3.value != b1.value


def test_threads_do_not_change_the_samples():
    budget1, budget4 = SampleBudget(3000, 5, 1), SampleBudget(3000, 5, 4)
    np.testing.assert_array_equal(sample_model(NoiseSet(UncertaintySet(2, 1.0), 3), budget1),
                                  sample_model(NoiseSet(UncertaintySet(2, 1.0), 3), budget4))
    S1 = sample_model(PolytopeSet(BOX_A, BOX_B), budget1)
    S4 = sample_model(PolytopeSet(BOX_A, BOX_B), budget4)
    np.testing.assert_array_equal(S1, S4)
    pr = _point_problem()
    a = np.array([0.1, -0.2, 0.9, 0.3, -0.1])
    assert worst_case_error_oracle(a, pr, budget1) == worst_case_error_oracle(a, pr, budget4)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_is_a_lower_bound_on_the_dual_objective(seed):
    rng = np.random.default_rng(seed)
    pr = _point_problem(eta=float(rng.uniform(0, 0.5)))
    # feasible weights: reproduce P_3 at the target point
    a0 = np.linalg.lstsq(pr.M, pr.b, rcond=None)[0]
    a = a0 + null_space(pr.M) @ rng.standard_normal(2)
    bound = worst_case_error_oracle(a, pr, SampleBudget(1000, seed % 1000))
    assert bound.value <= dual_objective(pr, a) * pr.model.eps + 1e-9
