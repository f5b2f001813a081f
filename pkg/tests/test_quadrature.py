import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anisofrac.quadrature import (
    GK_NODES,
    GK_WEIGHTS,
    fold_antipodal,
    integrate_adaptive,
    log_panels,
    panel_nodes,
    sphere_rule,
)


def test_kronrod_rule_exact_on_polynomials():
    for k in range(0, 22):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert np.sum(GK_WEIGHTS * GK_NODES**k) == pytest.approx(exact, abs=1e-14)


def test_log_panels():
    e = log_panels(1e-3, 10.0, 4)
    assert e[0] == 1e-3 and e[-1] == 10.0
    assert len(e) == 17
    capped = log_panels(1.0, 100.0, 2, max_width=5.0)
    assert np.max(np.diff(capped)) <= 5.0 + 1e-12
    with pytest.raises(ValueError):
        log_panels(0.0, 1.0, 3)


def test_adaptive_integral_of_power():
    edges = log_panels(1e-2, 1e2, 4)
    val, err = integrate_adaptive(lambda ray, r: r ** (-1.5), edges, 1, np.ones(1), 1e-10)
    exact = 2 * (1e-2 ** -0.5 - 1e2 ** -0.5)
    assert val == pytest.approx(exact, rel=1e-10)
    assert err < 1e-9


def test_adaptive_integral_multiple_rays():
    edges = log_panels(0.1, 10.0, 4)
    weights = np.array([1.0, 2.0])
    val, _ = integrate_adaptive(lambda ray, r: np.where(ray == 0, np.sin(r), r), edges, 2, weights, 1e-10)
    exact = (math.cos(0.1) - math.cos(10.0)) + 2 * (100 - 0.01) / 2
    assert val == pytest.approx(exact, rel=1e-10)


def test_panel_nodes():
    x, w = panel_nodes(np.array([0.0, 1.0, 3.0]), 5)
    assert np.sum(w) == pytest.approx(3.0)
    assert np.sum(w * x**3) == pytest.approx(81 / 4)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_sphere_rule_measure_and_moments(N):
    dirs, w = sphere_rule(N, 48)
    area = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
    assert np.sum(w) == pytest.approx(area, rel=1e-12)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    # second moments of the coordinates are area / N
    for k in range(N):
        assert np.sum(w * dirs[:, k] ** 2) == pytest.approx(area / N, rel=1e-10)


def test_sphere_rule_two_d_minimum_nodes():
    dirs, _ = sphere_rule(2, 4)
    assert len(dirs) >= 26


@given(st.integers(1, 3))
def test_fold_antipodal_preserves_even_integrals(N):
    dirs, w = sphere_rule(N, 24)
    fd, fw = fold_antipodal(dirs, w)
    assert np.sum(fw) == pytest.approx(np.sum(w))
    f = lambda d: d[:, 0] ** 2 + 0.5 * d[:, -1] ** 4
    assert np.sum(fw * f(fd)) == pytest.approx(np.sum(w * f(dirs)), rel=1e-12)
