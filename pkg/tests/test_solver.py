import csv

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from anisofrac.catalog import make_field
from anisofrac.core import AnisotropicBox, ConfigurationError, OperatorSpec, ScalarField, constant_field, zero_field
from anisofrac.core import kernel_constant
from anisofrac.solver import (
    Grid,
    SolverError,
    UnsupportedConfiguration,
    assemble,
    comparison_check,
    discrete_apply,
    lattice_weights,
    solve_dirichlet,
)

from conftest import spec_2d

BOX = AnisotropicBox((1.0, 1.0))


def test_grid_geometry():
    g = Grid(AnisotropicBox((1.0, 0.5), kappa=2.0), (3, 4))
    assert g.half_widths == (1.0, 1.0)
    assert g.spacing == pytest.approx((0.5, 0.4))
    assert g.axis_nodes(0).tolist() == pytest.approx([-0.5, 0.0, 0.5])
    assert g.points().shape == (12, 2)
    fine = g.refine()
    assert fine.counts == (7, 9)
    assert np.allclose(fine.axis_nodes(1)[1::2], g.axis_nodes(1))
    assert Grid(BOX, 5).counts == (5, 5)
    with pytest.raises(ConfigurationError):
        Grid(BOX, (3,))
    with pytest.raises(ConfigurationError):
        Grid(BOX, (0, 3))


@pytest.mark.parametrize("s", [0.3, 0.5, 0.8])
def test_lattice_symbol(s):
    # the infinite-lattice symbol reproduces |xi|^{2s} up to O(xi^2)
    K = 20000
    w = lattice_weights(s, K)
    assert np.all(w > 0)
    k = np.arange(1, K + 1)
    for xi in (0.05, 0.2, 0.5):
        sym = 2 * kernel_constant(1, s) * (np.sum(2 * w * (1 - np.cos(k * xi))) + 2 * K ** (-2 * s) / (2 * s))
        assert abs(sym / xi ** (2 * s) - 1) <= 0.05 * xi**2


def test_local_only_quadratic_is_exact():
    spec = spec_2d(0.5, a1=0.0, a=2.0)
    ext = ScalarField(lambda x: np.minimum(x[:, 1] ** 2, 100.0), n=2, global_bound=100.0)
    u = solve_dirichlet(spec, BOX, constant_field(2, -4.0), ext, 9)
    pts = u.grid.points()
    assert np.allclose(u.values.ravel(), pts[:, 1] ** 2, atol=1e-12)


def test_constant_exterior_reproduces_constant():
    spec = spec_2d(0.6)
    u = solve_dirichlet(spec, BOX, zero_field(2), constant_field(2, 1.0), 15)
    bound = u.info["exterior_error_bound"]
    assert u.info["exterior_uncertainty"] > 0
    assert np.max(np.abs(u.values - 1.0)) <= bound + 1e-9


def test_cg_matches_direct():
    spec = spec_2d(0.4, a1=1.5)
    f = make_field("bump", 2, radius=0.8)
    ext = make_field("tanh", 2, axis=0)
    d = solve_dirichlet(spec, BOX, f, ext, 15)
    c = solve_dirichlet(spec, BOX, f, ext, 15, method="cg")
    assert np.max(np.abs(d.values - c.values)) < 1e-9
    assert c.info["method"] == "cg"
    with pytest.raises(ValueError):
        solve_dirichlet(spec, BOX, f, ext, 7, method="lu")


def test_nonnegative_source_gives_nonnegative_solution():
    spec = spec_2d(0.7)
    u = solve_dirichlet(spec, BOX, make_field("bump", 2, radius=0.5, center=[0.3, -0.2]), zero_field(2), 21)
    assert np.min(u.values) >= -1e-12
    assert np.max(u.values) > 0


def test_unsupported_group_dimension():
    spec = OperatorSpec.build((2, 1), (0.5, 1.0), (1.0, 1.0))
    with pytest.raises(UnsupportedConfiguration, match="one-dimensional"):
        solve_dirichlet(spec, AnisotropicBox((1.0, 1.0)), zero_field(3), zero_field(3), 5)


def test_unbounded_exterior_is_rejected():
    ext = ScalarField(lambda x: x[:, 0], n=2, global_bound=np.inf)
    with pytest.raises(ConfigurationError):
        assemble(spec_2d(0.5), Grid(BOX, 5), ext)


def test_solver_error_carries_residual():
    with pytest.raises(SolverError) as info:
        solve_dirichlet(spec_2d(0.5), BOX, make_field("bump", 2), zero_field(2), 7, tol=1e-30)
    assert info.value.residual >= 0


def test_discrete_apply_recovers_source():
    spec = spec_2d(0.5)
    f = make_field("cosine", 2, k=[1.0, 2.0])
    ext = make_field("bump", 2, radius=2.5, center=[1.0, 0.0])
    grid = Grid(BOX, 11)
    A = assemble(spec, grid, ext)
    u = solve_dirichlet(spec, BOX, f, ext, grid, matrix=A)
    assert np.allclose(discrete_apply(A, u), f.sampler(grid.points()).reshape(grid.shape), atol=1e-9)
    other = solve_dirichlet(spec, BOX, f, ext, 7)
    with pytest.raises(ValueError):
        discrete_apply(A, other)


def test_nodal_array_source_matches_field():
    spec = spec_2d(0.5)
    f = make_field("bump", 2, radius=0.9)
    grid = Grid(BOX, 9)
    a = solve_dirichlet(spec, BOX, f, zero_field(2), grid)
    b = solve_dirichlet(spec, BOX, f.sampler(grid.points()), zero_field(2), grid)
    assert np.array_equal(a.values, b.values)


def test_grid_function_interpolation_and_csv(tmp_path):
    spec = spec_2d(0.5)
    ext = constant_field(2, 0.25)
    u = solve_dirichlet(spec, BOX, make_field("bump", 2), ext, 7)
    pts = u.grid.points()
    assert np.allclose(u(pts), u.values.ravel())
    assert np.allclose(u(np.array([[1.5, 0.0], [0.0, -3.0]])), 0.25)
    assert u.sup_norm >= 0.25
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0
    path = tmp_path / "u.csv"
    u.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x1", "x2", "value"]
    assert len(rows) == 1 + u.grid.size
    assert float(rows[1][2]) == u.values.ravel()[0]
    assert u.as_field()(pts[:3]).shape == (3,)


def test_sparse_and_matvec_agree():
    spec = spec_2d(0.35, a1=0.7)
    A = assemble(spec, Grid(AnisotropicBox((1.0, 0.5)), (6, 5)), zero_field(2))
    v = np.random.default_rng(1).normal(size=A.dimension)
    assert np.allclose(A.to_sparse() @ v, A.matvec(v).ravel())


@given(
    st.floats(0.05, 0.95), st.floats(0.0, 3.0), st.floats(0.1, 3.0),
    st.integers(2, 9), st.integers(2, 9), st.floats(0.3, 2.0),
)
def test_assembled_matrix_is_monotone(s, a1, a, m1, m2, d1):
    A = assemble(spec_2d(s, a1=a1, a=a), Grid(AnisotropicBox((d1, 1.0)), (m1, m2)), zero_field(2))
    report = comparison_check(A)
    assert report.ok, report.violations[:3]


def test_comparison_check_catches_violations():
    bad = np.array([[2.0, 0.5, 0.0], [0.5, 2.0, -1.0], [0.0, -1.0, -0.1]])
    kinds = {v["kind"] for v in comparison_check(bad).violations}
    assert kinds == {"positive-off-diagonal", "nonpositive-diagonal", "negative-row-sum"}
    asym = sp.csr_matrix(np.array([[2.0, -1.0], [-0.5, 2.0]]))
    report = comparison_check(asym)
    assert not report.ok and report.to_dict()["violations"][0]["kind"] == "asymmetric"
    assert comparison_check(np.array([[2.0, -1.0], [-1.0, 2.0]])).ok


def test_residual_recorded():
    u = solve_dirichlet(spec_2d(0.5), BOX, make_field("bump", 2), zero_field(2), 9)
    assert u.info["residual"] <= 1e-10
    assert u.info["exterior_error_bound"] == 0.0
