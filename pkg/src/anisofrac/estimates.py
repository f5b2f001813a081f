"""Explicit constants and both sides of the quantitative inequalities.

Every constant here is built from named factors, and each function that
produces one also returns (or stores in an :class:`EstimateReport`) the
factors it was built from.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import ConfigurationError, OperatorSpec, ScalarField, kernel_constant, sphere_measure
from .quadrature import log_panels, panel_nodes


@dataclass
class EstimateReport:
    """One verified inequality lhs <= rhs + slack."""

    name: str
    lhs: float
    rhs: float
    slack: float = 0.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lhs, self.rhs, self.slack = float(self.lhs), float(self.rhs), float(self.slack)
        if not self.slack >= 0:
            raise ValueError("slack must be nonnegative")

    @property
    def verdict(self) -> bool:
        return self.lhs <= self.rhs + self.slack

    @property
    def margin(self) -> float:
        return self.rhs + self.slack - self.lhs

    def to_dict(self) -> dict:
        return {
            "name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
            "verdict": "pass" if self.verdict else "fail", "margin": self.margin,
            "provenance": _plain(self.provenance),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @staticmethod
    def csv_summary(reports: Sequence["EstimateReport"]) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "lhs", "rhs", "slack", "verdict"])
        for r in reports:
            writer.writerow([r.name, repr(r.lhs), repr(r.rhs), repr(r.slack), "pass" if r.verdict else "fail"])
        return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def c_tilde(spec: OperatorSpec) -> float:
    """2 (a_1 + ... + a_m) / a + 1."""
    return 2.0 * sum(spec.a) / spec.a_local + 1.0


def _min_weight(spec: OperatorSpec, d: Sequence[float]) -> float:
    return min(e * di ** (2 * si) for e, di, si in zip(spec.etas(), d, spec.s))


def _check_radii(spec: OperatorSpec, d) -> tuple[float, ...]:
    d = tuple(float(v) for v in d)
    if len(d) != spec.m or any(not v > 0 for v in d):
        raise ConfigurationError("one positive radius per group is required")
    return d


def oscillation_sup(f: ScalarField, spec: OperatorSpec, d: Sequence[float], density: int = 24) -> float:
    """Sampled sup of |f(x + t e_n) - f(x - t e_n)| over Q_d x (0, d_m); a lower bound for the true sup.

    Each group ball is sampled on a tensor grid of ``density`` points per
    axis (clipped to the ball) and t on ``density`` points.
    """
    d = _check_radii(spec, d)
    if f.is_zero:
        return 0.0
    axes_pts = []
    for i in range(1, spec.m + 1):
        for _ in spec.grouping.axes(i):
            r = d[i - 1]
            axes_pts.append(np.linspace(-r, r, density + 2)[1:-1])
    t = np.linspace(0.0, d[-1], density + 2)[1:-1]
    mesh = np.meshgrid(*axes_pts, indexing="ij")
    x = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.ones(len(x), dtype=bool)
    for i in range(1, spec.m + 1):
        ax = list(spec.grouping.axes(i))
        keep &= np.sum(x[:, ax] ** 2, axis=1) < d[i - 1] ** 2
    x = x[keep]
    best = 0.0
    for tv in t:
        plus, minus = x.copy(), x.copy()
        plus[:, -1] += tv
        minus[:, -1] -= tv
        best = max(best, float(np.max(np.abs(f.sampler(plus) - f.sampler(minus)))))
    return best


def main_estimate_rhs(spec: OperatorSpec, d: Sequence[float], S: float, u_norm: float) -> float:
    """d_m S / a + C~ d_m u_norm / min_i(eta_i d_i^{2 s_i})."""
    d = _check_radii(spec, d)
    if S < 0 or u_norm < 0:
        raise ValueError("S and u_norm must be nonnegative")
    return d[-1] * S / spec.a_local + c_tilde(spec) * d[-1] * u_norm / _min_weight(spec, d)


def directional_lipschitz_lhs(u, d_m: float) -> tuple[float, float]:
    """max over 0 < t < d_m of |u(t e_n) - u(-t e_n)| / t on the grid's x_n nodes.

    Returns (value, argmax t). The grid must reach beyond t = d_m along the
    x_n axis and contain the x_n axis (odd node counts).
    """
    grid = u.grid
    n = grid.n
    if grid.half_widths[-1] < d_m:
        raise ValueError("segment {t e_n : |t| < d_m} leaves the grid")
    t = grid.axis_nodes(n - 1)
    t = t[(t > 0) & (t < d_m)]
    if t.size == 0:
        raise ValueError("no grid nodes on the segment; refine the grid")
    plus = np.zeros((len(t), n))
    plus[:, -1] = t
    minus = -plus
    q = np.abs(u(plus) - u(minus)) / t
    k = int(np.argmax(q))
    return float(q[k]), float(t[k])


def gradient_constant(spec: OperatorSpec, r: float) -> tuple[float, dict]:
    """Constant bounding |d_n u| at the centre of a ball of radius r where L u = f.

    The box Q_{d,2} with d_i = r/(2 sqrt n) fits in the ball. Sending t -> 0 in
    the main estimate with oscillation <= 2 ||f|| gives
    |d_n u| <= (d_m / a) ||f|| + C~ d_m ||u|| / (2 min eta_i d_i^{2 s_i}).
    Returns (max of the two coefficients, trail).
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    delta = r / (2.0 * math.sqrt(spec.n))
    d = (delta,) * spec.m
    w = _min_weight(spec, d)
    cf = delta / spec.a_local
    cu = c_tilde(spec) * delta / (2.0 * w)
    trail = {"r": r, "d": delta, "min_eta_d2s": w, "C_tilde": c_tilde(spec), "coef_f": cf, "coef_u": cu}
    return max(cf, cu), trail


def interior_gradient_bound(spec: OperatorSpec, f_norm: float, u_norm: float) -> tuple[float, dict]:
    """Admissible C (||f|| + ||u||) bounding |d_n u| on B_{1/2} when L u = f in B_1.

    Every centre of B_{1/2} carries the box with d_i = 1/(4 sqrt n), which lies in B_1.
    """
    if f_norm < 0 or u_norm < 0:
        raise ValueError("norms must be nonnegative")
    C, trail = gradient_constant(spec, 0.5)
    trail = dict(trail, C=C)
    return C * (f_norm + u_norm), trail


def tail_constant(spec: OperatorSpec) -> float:
    """C_o = 2 sum over fractional groups of a_i c_{N_i,s_i} |S^{N_i-1}|."""
    total = 0.0
    for N, s, a in zip(spec.dims, spec.s, spec.a):
        if s < 1.0 and a > 0:
            total += a * kernel_constant(N, s) * sphere_measure(N)
    return 2.0 * total


@dataclass(frozen=True)
class PowerLaw:
    """Ring norms M rho^beta."""

    M: float
    beta: float = 0.0

    def __call__(self, rho):
        return self.M * np.asarray(rho, dtype=float) ** self.beta


class DivergentTail(ConfigurationError):
    pass


def tail_integral(
    ring_norms: Union[PowerLaw, Callable, float],
    R: float,
    s_min: float,
    beta: Optional[float] = None,
    M: Optional[float] = None,
    rho_max_factor: float = 1e4,
) -> float:
    """Integral over (2R, inf) of ring_norms(rho) / rho^{1 + 2 s_min}.

    A :class:`PowerLaw` (or a constant) is integrated in closed form. A
    callable needs a declared growth bound ring_norms(rho) <= M rho^beta; it
    is integrated numerically up to ``rho_max_factor`` * 2R and the rest is
    bounded analytically.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    if not 0 < s_min <= 1:
        raise ValueError("s_min must lie in (0, 1]")
    lo = 2.0 * R
    if isinstance(ring_norms, (int, float)):
        ring_norms = PowerLaw(float(ring_norms), 0.0)
    if isinstance(ring_norms, PowerLaw):
        if ring_norms.M == 0:
            return 0.0
        if ring_norms.beta >= 2 * s_min:
            raise DivergentTail(f"growth {ring_norms.beta} >= 2 s_min = {2 * s_min}")
        e = ring_norms.beta - 2 * s_min
        return ring_norms.M * lo**e / (-e)
    if beta is None or M is None:
        raise ConfigurationError("a callable ring norm needs a declared growth bound (beta, M)")
    if beta >= 2 * s_min:
        raise DivergentTail(f"growth {beta} >= 2 s_min = {2 * s_min}")
    hi = lo * rho_max_factor
    x, w = panel_nodes(log_panels(lo, hi, 16), 8)
    body = float(np.sum(w * np.asarray(ring_norms(x), dtype=float) * x ** (-1.0 - 2.0 * s_min)))
    e = beta - 2 * s_min
    return body + M * hi**e / (-e)


def _psi(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos])
    return out


def eta_o(tau):
    """Smooth even step: 1 on |tau| <= 1, 0 on |tau| >= 2."""
    a = np.abs(np.asarray(tau, dtype=float))
    p, q = _psi(2.0 - a), _psi(a - 1.0)
    return p / (p + q)


def cutoff(x, R: float):
    """prod_i eta_o(x_i / (3R)); vectorized over leading axes of ``x``."""
    if R < 1:
        raise ValueError("R must be at least 1")
    x = np.asarray(x, dtype=float)
    val = np.prod(eta_o(x / (3.0 * R)), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def weighted_constant(spec: OperatorSpec) -> tuple[float, dict]:
    """Constant of the weighted estimate.

    With delta = 1/(3 sqrt n), d_i = delta R and eta_R u in place of u, the main
    estimate gives
    delta R f_osc / a + 2 delta C_o R tail / a + C~ delta R u_6R / (R^{2 s_min} min eta_i delta^{2 s_i})
    for R >= 1; C is the largest of the three coefficients.
    """
    n = spec.n
    delta = 1.0 / (3.0 * math.sqrt(n))
    w = _min_weight(spec, (delta,) * spec.m)
    C_o = tail_constant(spec)
    coef_f = delta / spec.a_local
    coef_tail = 2.0 * delta * C_o / spec.a_local
    coef_u = c_tilde(spec) * delta / w
    trail = {
        "delta": delta, "C_tilde": c_tilde(spec), "C_o": C_o, "min_eta_delta2s": w,
        "coef_f": coef_f, "coef_tail": coef_tail, "coef_u": coef_u,
    }
    C = max(coef_f, coef_tail, coef_u)
    trail["C"] = C
    return C, trail


def weighted_estimate_rhs(
    spec: OperatorSpec, n: int, R: float, f_osc: float, u_norm_6R: float, tail: float
) -> tuple[float, dict]:
    """C (R f_osc + R u_norm_6R / R^{2 s_min} + R tail), with ``u_norm_6R`` the sup over (-6R, 6R)^n."""
    if n != spec.n:
        raise ConfigurationError("n does not match the operator")
    if R < 1:
        raise ValueError("R must be at least 1")
    if min(f_osc, u_norm_6R, tail) < 0:
        raise ValueError("inputs must be nonnegative")
    C, trail = weighted_constant(spec)
    value = C * (R * f_osc + R * u_norm_6R / R ** (2 * spec.s_min) + R * tail)
    return value, trail
