import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anisofrac.catalog import make_field
from anisofrac.core import AnisotropicBox, ConfigurationError, OperatorSpec, ScalarField, eta, zero_field
from anisofrac.estimates import (
    DivergentTail,
    EstimateReport,
    PowerLaw,
    c_tilde,
    cutoff,
    directional_lipschitz_lhs,
    eta_o,
    gradient_constant,
    interior_gradient_bound,
    main_estimate_rhs,
    oscillation_sup,
    tail_constant,
    tail_integral,
    weighted_constant,
    weighted_estimate_rhs,
)
from anisofrac.solver import solve_dirichlet

from conftest import spec_2d


def test_report_verdict_and_serialization():
    r = EstimateReport("x", lhs=1.0, rhs=0.9, slack=0.2, provenance={"v": np.float64(2.0), "a": np.arange(2)})
    assert r.verdict and r.margin == pytest.approx(0.1)
    d = json.loads(r.to_json())
    assert d["verdict"] == "pass" and d["provenance"] == {"v": 2.0, "a": [0, 1]}
    bad = EstimateReport("y", lhs=2.0, rhs=1.0)
    assert not bad.verdict and bad.to_dict()["verdict"] == "fail"
    csv_text = EstimateReport.csv_summary([r, bad])
    assert csv_text.splitlines()[0] == "name,lhs,rhs,slack,verdict"
    assert csv_text.splitlines()[2].endswith("fail")
    with pytest.raises(ValueError):
        EstimateReport("z", 0.0, 0.0, slack=-1.0)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_report_verdict_consistent(lhs, rhs, slack):
    r = EstimateReport("p", lhs, rhs, slack)
    assert r.verdict == (lhs <= rhs + slack)
    assert r.verdict == (r.margin >= 0)


def test_c_tilde_and_main_rhs(spec_half):
    assert c_tilde(spec_half) == 5.0
    assert main_estimate_rhs(spec_half, (1.0, 1.0), 2.0, 1.0) == pytest.approx(12.0)
    assert main_estimate_rhs(spec_half, (1.0, 1.0), 0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        main_estimate_rhs(spec_half, (1.0, 1.0), -1.0, 0.0)
    with pytest.raises(ConfigurationError):
        main_estimate_rhs(spec_half, (1.0,), 1.0, 1.0)


@given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 1), st.floats(0, 1))
def test_main_rhs_monotone(S, u, dS, du):
    spec = spec_2d(0.4, a1=1.3)
    d = (0.7, 0.4)
    assert main_estimate_rhs(spec, d, S + dS, u + du) >= main_estimate_rhs(spec, d, S, u)


def test_oscillation_sup(spec_half):
    d = (1.0, 0.5)
    xn = ScalarField(lambda x: x[:, -1], n=2, global_bound=math.inf)
    assert oscillation_sup(xn, spec_half, d, density=40) == pytest.approx(2 * 0.5, rel=0.05)
    assert oscillation_sup(xn, spec_half, d) <= 2 * 0.5
    sin1 = ScalarField(lambda x: np.sin(x[:, 0]), n=2, global_bound=1.0)
    assert oscillation_sup(sin1, spec_half, d) == 0.0
    assert oscillation_sup(zero_field(2), spec_half, d) == 0.0


def test_directional_lipschitz_lhs(spec_half):
    box = AnisotropicBox((1.0, 0.5), kappa=2.0)
    ext = make_field("bump", 2, radius=0.3, center=[0.0, 2.0])
    u = solve_dirichlet(spec_half, box, make_field("bump", 2, radius=0.8), zero_field(2), 15)
    val, _ = directional_lipschitz_lhs(u, 0.5)
    assert val < 1e-10  # even data gives an even solution
    u2 = solve_dirichlet(spec_half, box, make_field("xn_linear", 2), ext, 15)
    val2, t = directional_lipschitz_lhs(u2, 0.5)
    assert val2 > 0 and 0 < t < 0.5
    with pytest.raises(ValueError):
        directional_lipschitz_lhs(u, 2.0)


def test_directional_lipschitz_of_linear_profile(spec_half):
    from anisofrac.solver import Grid, GridFunction

    grid = Grid(AnisotropicBox((1.0, 1.0)), 9)
    vals = grid.points()[:, 1].reshape(grid.shape)
    ext = ScalarField(lambda x: np.clip(x[:, 1], -5, 5), n=2, global_bound=5.0)
    u = GridFunction(grid, vals, ext)
    val, _ = directional_lipschitz_lhs(u, 0.9)
    assert val == pytest.approx(2.0)


def test_tail_constant():
    single = OperatorSpec.build((1, 1), (0.5, 1.0), (1.0, 1.0))
    assert tail_constant(single) == pytest.approx(2 / math.pi)
    assert tail_constant(spec_2d(0.5, a1=0.0)) == 0.0
    double = OperatorSpec.build((1, 1), (0.5, 1.0), (2.0, 2.0))
    assert tail_constant(double) == pytest.approx(2 * tail_constant(single))


def test_tail_integral_closed_forms():
    assert tail_integral(3.0, 2.0, 0.5) == pytest.approx(3.0 / 4.0)
    assert tail_integral(0.0, 1.0, 0.5) == 0.0
    R = 1.5
    assert tail_integral(PowerLaw(1.0, 0.25), R, 0.75) == pytest.approx((2 * R) ** -1.25 / 1.25)
    with pytest.raises(DivergentTail):
        tail_integral(PowerLaw(1.0, 1.0), 1.0, 0.5)
    with pytest.raises(ValueError):
        tail_integral(1.0, 0.5, 0.5)


def test_tail_integral_callable_matches_closed_form():
    R, s = 2.0, 0.75
    exact = tail_integral(PowerLaw(2.0, 0.4), R, s)
    approx = tail_integral(lambda r: 2.0 * r**0.4, R, s, beta=0.4, M=2.0)
    assert approx == pytest.approx(exact, rel=1e-8)
    with pytest.raises(ConfigurationError):
        tail_integral(lambda r: r, R, s)
    with pytest.raises(DivergentTail):
        tail_integral(lambda r: r, R, s, beta=1.6, M=1.0)


def test_cutoff_values():
    R = 2.0
    assert cutoff(np.array([5.9, -5.9]), R) == 1.0
    assert cutoff(np.array([12.0, 0.0]), R) == 0.0
    mid = cutoff(np.array([4.5 * R, 0.0]), R)
    assert 0 < mid < 1
    assert eta_o(1.5) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        cutoff(np.zeros(2), 0.5)


@given(st.floats(-3, 3))
def test_eta_o_range_and_symmetry(tau):
    v = float(eta_o(tau))
    assert 0.0 <= v <= 1.0
    assert v == float(eta_o(-tau))


def test_interior_gradient_bound_linear(spec_half):
    assert interior_gradient_bound(spec_half, 0.0, 0.0)[0] == 0.0
    a, trail = interior_gradient_bound(spec_half, 1.0, 2.0)
    b, _ = interior_gradient_bound(spec_half, 2.0, 4.0)
    assert b == pytest.approx(2 * a)
    assert trail["d"] == pytest.approx(1 / (4 * math.sqrt(2)))


def test_interior_gradient_constant_against_brute_force(spec_half):
    n = spec_half.n
    C, trail = gradient_constant(spec_half, 0.5)
    d = 1 / (4 * math.sqrt(n))
    w = min(eta(1, 0.5) * d, eta(1, 1.0) * d**2)
    assert C == pytest.approx(max(d / 1.0, 5.0 * d / (2 * w)))
    # Q_{d,2} around a centre of B_{1/2} stays in B_1 iff sqrt(n+3) d <= 1/2
    dmax = 1 / (2 * math.sqrt(n + 3))
    assert d <= dmax
    grid = np.linspace(dmax / 2000, dmax, 2000)
    brute = min(max(x, 5.0 * x / (2 * min(x, 0.5 * x * x))) for x in grid)
    assert brute <= C + 1e-12
    assert C <= 2 * brute  # the fixed choice is within a factor two of the best box


def test_weighted_estimate():
    spec = spec_2d(0.75)
    assert weighted_estimate_rhs(spec, 2, 1.0, 0, 0, 0)[0] == 0.0
    one, trail = weighted_estimate_rhs(spec, 2, 2.0, 0, 1.0, 0)
    two, _ = weighted_estimate_rhs(spec, 2, 2.0, 0, 2.0, 0)
    assert two == pytest.approx(2 * one)
    C, _ = weighted_constant(spec)
    assert one == pytest.approx(C * 2.0 / 2.0**1.5)
    assert trail["C"] == C == max(trail["coef_f"], trail["coef_tail"], trail["coef_u"])
    with pytest.raises(ConfigurationError):
        weighted_estimate_rhs(spec, 3, 1.0, 0, 0, 0)
    with pytest.raises(ValueError):
        weighted_estimate_rhs(spec, 2, 1.0, -1, 0, 0)
