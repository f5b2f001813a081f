"""Quadrature primitives: adaptive Gauss-Kronrod panels, fixed Gauss panels, sphere rules."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_gegenbauer

# Kronrod 15-point abscissae on [-1, 1] (nonnegative half) and weights;
# odd-index abscissae are the embedded 7-point Gauss nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_WEIGHTS_FULL = np.zeros(15)
# Gauss nodes sit at Kronrod positions 1, 3, 5, 7(centre), 9, 11, 13
_G_WEIGHTS_FULL[[1, 3, 5]] = _WG[:3]
_G_WEIGHTS_FULL[7] = _WG[3]
_G_WEIGHTS_FULL[[13, 11, 9]] = _WG[:3]


def log_panels(a: float, b: float, per_decade: int, max_width: Optional[float] = None) -> np.ndarray:
    """Panel edges from ``a`` to ``b`` (0 < a < b), geometric with ``per_decade`` panels per decade."""
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    count = max(1, int(math.ceil(per_decade * math.log10(b / a))))
    edges = np.geomspace(a, b, count + 1)
    if max_width is not None:
        pieces = [edges[:1]]
        for lo, hi in zip(edges[:-1], edges[1:]):
            k = max(1, int(math.ceil((hi - lo) / max_width)))
            pieces.append(np.linspace(lo, hi, k + 1)[1:])
        edges = np.concatenate(pieces)
    edges[0], edges[-1] = a, b
    return edges


def integrate_adaptive(
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
    edges: np.ndarray,
    n_rays: int,
    ray_weights: np.ndarray,
    atol: float,
    max_panels: int = 4_000_000,
    chunk: int = 200_000,
) -> tuple[float, float]:
    """Sum over rays of ray_weight * integral of ``integrand(ray, r)`` over [edges[0], edges[-1]].

    Every ray starts from the same panel edges. Panels whose Gauss/Kronrod
    discrepancy exceeds their share of ``atol`` (allocated by log-length)
    are bisected until the budget is met or ``max_panels`` is reached.
    Returns (value, error_estimate).
    """
    lo = np.tile(edges[:-1], n_rays)
    hi = np.tile(edges[1:], n_rays)
    ray = np.repeat(np.arange(n_rays), len(edges) - 1)
    total_log = math.log(edges[-1] / edges[0])
    atol = max(float(atol), 0.0)

    value = 0.0
    error = 0.0
    while lo.size:
        ik = np.empty(lo.size)
        ek = np.empty(lo.size)
        for start in range(0, lo.size, chunk):
            sl = slice(start, start + chunk)
            ik[sl], ek[sl] = _gk_panels(integrand, ray[sl], lo[sl], hi[sl])
        w = ray_weights[ray]
        ik *= w
        ek *= w
        share = atol * np.log(hi / lo) / (total_log * n_rays)
        tiny = (hi - lo) <= 1e-13 * hi
        done = (ek <= share) | tiny
        if lo.size * 2 > max_panels:
            done[:] = True
        value += float(np.sum(ik[done]))
        error += float(np.sum(ek[done]))
        keep = ~done
        lo, hi, ray = lo[keep], hi[keep], ray[keep]
        if lo.size:
            mid = 0.5 * (lo + hi)
            lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
            ray = np.concatenate([ray, ray])
    return value, error


def _gk_panels(integrand, ray, lo, hi):
    half = 0.5 * (hi - lo)
    centre = 0.5 * (hi + lo)
    r = centre[:, None] + half[:, None] * GK_NODES[None, :]
    vals = integrand(np.repeat(ray, 15), r.ravel()).reshape(r.shape)
    kron = half * (vals @ GK_WEIGHTS)
    gauss = half * (vals @ _G_WEIGHTS_FULL)
    return kron, np.abs(kron - gauss)


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def panel_nodes(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened Gauss-Legendre nodes and weights over consecutive panels."""
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    centre = 0.5 * (edges[1:] + edges[:-1])
    nodes = (centre[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=32)
def sphere_rule(N: int, order: int = 48) -> tuple[np.ndarray, np.ndarray]:
    """Directions and weights on S^{N-1} summing to its surface measure.

    N=1: the two points {+1, -1}; N=2: ``order`` equispaced angles; N>=3:
    Gauss-Gegenbauer in the polar cosine tensored with the rule on S^{N-2}.
    """
    if N == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if N == 2:
        k = max(order, 26)
        if k % 2:
            k += 1
        theta = 2.0 * np.pi * np.arange(k) / k
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return dirs, np.full(k, 2.0 * np.pi / k)
    n_t = max(order // 4, 6)
    t, wt = roots_gegenbauer(n_t, (N - 2) / 2.0)
    sub_dirs, sub_w = sphere_rule(N - 1, order)
    rho = np.sqrt(1.0 - t * t)
    dirs = np.concatenate(
        [np.concatenate([np.full((len(sub_w), 1), ti), ri * sub_dirs], axis=1) for ti, ri in zip(t, rho)]
    )
    weights = np.concatenate([wi * sub_w for wi in wt])
    return dirs, weights


def fold_antipodal(dirs: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge each direction with its antipode (for integrands even on the sphere)."""
    used = np.zeros(len(dirs), dtype=bool)
    out_d, out_w = [], []
    for i in range(len(dirs)):
        if used[i]:
            continue
        used[i] = True
        w = weights[i]
        dist = np.max(np.abs(dirs + dirs[i]), axis=1)
        dist[used] = np.inf
        j = int(np.argmin(dist))
        if dist[j] < 1e-12 and abs(weights[j] - weights[i]) < 1e-12 * abs(weights[i]):
            used[j] = True
            w = 2.0 * w
        out_d.append(dirs[i])
        out_w.append(w)
    return np.array(out_d), np.array(out_w)
