"""Verification campaigns tying the solver, barriers and estimates together."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .barriers import barrier_constants, composite_barrier, profile_field
from .catalog import make_field
from .core import AnisotropicBox, ConfigurationError, OperatorSpec, ScalarField, zero_field
from .estimates import (
    EstimateReport,
    PowerLaw,
    c_tilde,
    directional_lipschitz_lhs,
    gradient_constant,
    main_estimate_rhs,
    oscillation_sup,
    tail_constant,
    tail_integral,
    weighted_estimate_rhs,
)
from .operator import DEFAULT_QUAD, QuadratureSpec, apply_operator, block_fraclap, group_fraclap
from .solver import Grid, GridFunction, assemble, comparison_check, solve_dirichlet


class PreconditionError(ConfigurationError):
    pass


def _two_grid(spec, box, f, exterior, counts):
    coarse = solve_dirichlet(spec, box, f, exterior, counts)
    fine = solve_dirichlet(spec, box, f, exterior, coarse.grid.refine())
    return coarse, fine


def _quotients(u: GridFunction, t: np.ndarray) -> np.ndarray:
    n = u.grid.n
    plus = np.zeros((len(t), n))
    plus[:, -1] = t
    return np.abs(u(plus) - u(-plus)) / t


def _lipschitz_two_grid(coarse: GridFunction, fine: GridFunction, d_m: float):
    """(fine lhs, slack): slack is the largest coarse/fine disagreement on the coarse t nodes plus exterior error."""
    lhs, t_star = directional_lipschitz_lhs(fine, d_m)
    t = coarse.grid.axis_nodes(coarse.grid.n - 1)
    t = t[(t > 0) & (t < d_m)]
    diff = float(np.max(np.abs(_quotients(fine, t) - _quotients(coarse, t))))
    ext = 2.0 * max(coarse.info["exterior_error_bound"], fine.info["exterior_error_bound"]) / float(t.min())
    return lhs, t_star, diff + ext


# ---------------------------------------------------------------- barrier identity

def verify_dy(cases: Sequence[tuple], points: int = 10, seed: int = 0, quad: QuadratureSpec = DEFAULT_QUAD,
              tol: float = 1e-3) -> EstimateReport:
    """Evaluate (-Delta)^s of the normalized profile at random points inside each ball.

    ``cases`` holds (N, s, d) triples; the report's lhs is the largest relative
    deviation from 1 and its rhs is ``tol``.
    """
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for N, s, d in cases:
        N, s, d = int(N), float(s), float(d)
        spec = OperatorSpec.build((N, 1), (s, 1.0), (1.0, 1.0))
        fld = profile_field(spec, 1, d)
        dev = 0.0
        for _ in range(points):
            direction = rng.normal(size=N)
            direction /= np.linalg.norm(direction)
            r = 0.9 * d * rng.random() ** (1.0 / N)
            x = np.zeros(N + 1)
            x[:N] = r * direction
            x[N] = rng.uniform(-1.0, 1.0)
            dev = max(dev, abs(group_fraclap(spec, 1, fld, x, quad) - 1.0))
        rows.append({"N": N, "s": s, "d": d, "max_deviation": dev})
        worst = max(worst, dev)
    return EstimateReport("barrier-identity", worst, tol, 0.0, {"cases": rows, "points": points, "seed": seed})


# ---------------------------------------------------------------- main estimate

def barrier_domination(spec: OperatorSpec, d, u: GridFunction, f: ScalarField, slack: float = 0.0,
                       samples: int = 12) -> EstimateReport:
    """Sampled check that |v| <= Phi on Q_d x (0, d_m) and Phi -/+ v >= 0 outside it.

    v is the doubled solution; the barrier uses the certified bounds
    ||g|| <= 2 ||f|| and ||v|| <= 2 ||u||.
    """
    d = tuple(float(v) for v in d)
    n = spec.n
    consts = barrier_constants(spec, d, g_norm=2.0 * f.global_bound, v_norm=2.0 * u.sup_norm)
    grid = u.grid
    axes = [grid.axis_nodes(k) for k in range(n)]
    axes = [a[np.abs(a) < d[k]] for k, a in enumerate(axes)]
    t = np.linspace(0.0, d[-1], samples + 2)[1:-1]
    mesh = np.meshgrid(*axes, indexing="ij")
    x = np.stack([m.ravel() for m in mesh], axis=1)
    worst_inside = -math.inf
    for tv in t:
        plus, minus = x.copy(), x.copy()
        plus[:, -1] += tv
        minus[:, -1] -= tv
        v = u(plus) - u(minus)
        p = np.concatenate([x, np.full((len(x), 1), tv)], axis=1)
        worst_inside = max(worst_inside, float(np.max(np.abs(v) - composite_barrier(consts, spec, d, p))))
    # outside: t <= 0 gives v = 0, so Phi >= 0 suffices; t >= d_m and x outside Q_d
    rng = np.random.default_rng(1)
    outer = []
    lo = np.array(d) * 2.0
    for _ in range(3):
        xs = rng.uniform(-lo, lo, size=(400, n))
        outside_q = np.any(np.abs(xs) >= np.array(d), axis=1)
        ts = rng.uniform(-d[-1], 3 * d[-1], size=400)
        ts = np.where(outside_q, ts, np.where(ts < d[-1], ts + 2 * d[-1], ts))
        keep = outside_q | (ts >= d[-1]) | (ts <= 0)
        xs, ts = xs[keep], ts[keep]
        shift = np.maximum(ts, 0.0)
        plus, minus = xs.copy(), xs.copy()
        plus[:, -1] += shift
        minus[:, -1] -= shift
        v = u(plus) - u(minus)
        phi = composite_barrier(consts, spec, d, np.concatenate([xs, ts[:, None]], axis=1))
        outer.append(float(np.max(np.abs(v) - phi)))
    worst = max(worst_inside, max(outer))
    return EstimateReport("barrier-domination", worst, 0.0, slack, {
        "constants": consts.to_dict(), "inside_worst": worst_inside, "outside_worst": max(outer),
    })


def verify_main(spec: OperatorSpec, d, f: ScalarField, exterior: ScalarField, counts=63,
                name: str = "main", density: int = 24) -> EstimateReport:
    """Solve L u = f on Q_{d,2} and compare the directional Lipschitz quotient at 0 with the main bound.

    lhs comes from the grid with spacing h/2, slack from its disagreement with
    the grid at spacing h (plus any certified exterior quadrature error).
    """
    d = tuple(float(v) for v in d)
    box = AnisotropicBox(d, kappa=2.0)
    coarse, fine = _two_grid(spec, box, f, exterior, counts)
    lhs, t_star, slack = _lipschitz_two_grid(coarse, fine, d[-1])
    S = oscillation_sup(f, spec, d, density)
    u_norm = fine.sup_norm
    rhs = main_estimate_rhs(spec, d, S, u_norm)
    value_slack = float(np.max(np.abs(fine.values[(slice(1, None, 2),) * spec.n] - coarse.values)))
    dom = barrier_domination(spec, d, fine, f, slack=2.0 * value_slack)
    prov = {
        "d": list(d), "S": S, "S_density": density, "u_norm": u_norm, "C_tilde": c_tilde(spec),
        "min_eta_d2s": min(e * di ** (2 * si) for e, di, si in zip(spec.etas(), d, spec.s)),
        "t_argmax": t_star, "grid_coarse": list(coarse.grid.counts), "grid_fine": list(fine.grid.counts),
        "exterior_error_bound": fine.info["exterior_error_bound"],
        "barrier_domination": dom.to_dict(), "f": f.name, "exterior": exterior.name,
        "c_o_form": "sum eta_i d_i^(2 s_i) + d_m^2/2",
    }
    return EstimateReport(name, lhs, rhs, slack, prov)


# ---------------------------------------------------------------- tail bound

def verify_tail(spec: OperatorSpec, R: float, w: ScalarField, ring_norms, samples: int = 9,
                quad: Optional[QuadratureSpec] = None, growth_bound: Optional[tuple] = None,
                name: str = "tail") -> EstimateReport:
    """max over (-R, R)^n of |L w| against C_o * tail integral, for w vanishing on (-3R, 3R)^n.

    ``ring_norms`` is a :class:`PowerLaw`, a constant, or a callable together
    with ``growth_bound`` = (M, beta).
    """
    n = spec.n
    probe = np.linspace(-3 * R, 3 * R, 41)[1:-1]
    mesh = np.meshgrid(*([probe] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if np.any(np.abs(w.sampler(pts)) > 0):
        raise PreconditionError("w must vanish on (-3R, 3R)^n")
    if quad is None:
        # growing fields need a far truncation for the certified tail to be small
        quad = QuadratureSpec(Rcut=(1e8 if w.growth > 0 else 1e3) * R, rtol=1e-6)
    xs = np.linspace(-R, R, samples + 2)[1:-1]
    mesh = np.meshgrid(*([xs] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    lhs, unc = 0.0, 0.0
    if not w.is_zero:
        for p in pts:
            ev = apply_operator(spec, w, p, quad, full_output=True)
            if abs(ev.value) > lhs:
                lhs = abs(ev.value)
            unc = max(unc, ev.uncertainty)
    C_o = tail_constant(spec)
    if growth_bound is None:
        tail = tail_integral(ring_norms, R, spec.s_min)
    else:
        M, beta = growth_bound
        tail = tail_integral(ring_norms, R, spec.s_min, beta=beta, M=M)
    rhs = C_o * tail
    return EstimateReport(name, lhs, rhs, unc, {
        "R": R, "C_o": C_o, "tail_integral": tail, "s_min": spec.s_min, "samples": samples,
        "quadrature_uncertainty": unc, "strict": lhs + unc < rhs if rhs > 0 else lhs == 0,
    })


def cutoff_error(spec: OperatorSpec, u: ScalarField, R: float, samples: int = 7,
                 quad: Optional[QuadratureSpec] = None) -> EstimateReport:
    """max over (-R, R)^n of |L u - L(eta_R u)| against C_o * tail integral of the bound of u."""
    from .estimates import cutoff

    if not u.is_bounded:
        raise PreconditionError("u must be bounded")
    if quad is None:
        quad = QuadratureSpec(Rcut=max(1e3 * R, 50.0), rtol=1e-6)
    inner = u.sampler
    w = u.with_sampler(lambda x: (1.0 - cutoff(x, R)) * inner(x), support_radius=None, support_axes=None,
                       lipschitz_n=None, name="(1-eta_R)u")
    xs = np.linspace(-R, R, samples + 2)[1:-1]
    mesh = np.meshgrid(*([xs] * spec.n), indexing="ij")
    lhs, unc = 0.0, 0.0
    for p in np.stack([m.ravel() for m in mesh], axis=1):
        ev = apply_operator(spec, w, p, quad, full_output=True)
        lhs = max(lhs, abs(ev.value))
        unc = max(unc, ev.uncertainty)
    tail = tail_integral(PowerLaw(u.global_bound), R, spec.s_min)
    C_o = tail_constant(spec)
    return EstimateReport("cutoff-error", lhs, C_o * tail, unc, {"R": R, "C_o": C_o, "tail_integral": tail})


# ---------------------------------------------------------------- rigidity

@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    exponent: float = float("nan")
    rhs_exponent: float = float("nan")

    def __post_init__(self):
        Rs = [r["R"] for r in self.rows]
        if any(b <= a for a, b in zip(Rs, Rs[1:])):
            raise ValueError("R values must be strictly increasing")
        if any(r["quotient"] < 0 for r in self.rows):
            raise ValueError("quotients must be nonnegative")

    @property
    def strictly_decreasing(self) -> bool:
        q = [r["quotient"] for r in self.rows]
        return all(b < a for a, b in zip(q, q[1:]))

    @property
    def bound_decreasing(self) -> bool:
        q = [r["rhs"] for r in self.rows]
        return all(b < a for a, b in zip(q, q[1:]))

    @property
    def final_ratio(self) -> float:
        first = self.rows[0]["quotient"]
        return self.rows[-1]["quotient"] / first if first > 0 else 0.0

    @property
    def bounds_hold(self) -> bool:
        return all(r["quotient"] <= r["rhs"] + r["slack"] for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "rows": self.rows, "exponent": self.exponent, "rhs_exponent": self.rhs_exponent,
            "strictly_decreasing": self.strictly_decreasing, "bound_decreasing": self.bound_decreasing,
            "final_ratio": self.final_ratio, "bounds_hold": self.bounds_hold,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["R", "quotient", "rhs", "slack"])
        for r in self.rows:
            writer.writerow([repr(r["R"]), repr(r["quotient"]), repr(r["rhs"]), repr(r["slack"])])
        return buf.getvalue()


def _fit(Rs, vals) -> float:
    vals = np.asarray(vals, dtype=float)
    if len(Rs) < 2 or np.any(vals <= 0):
        return float("nan")
    return float(np.polyfit(np.log(Rs), np.log(vals), 1)[0])


def rigidity_sweep(spec: OperatorSpec, f: ScalarField, exterior: ScalarField, radii: Sequence[float],
                   counts=63, box_factor: float = 6.0) -> SweepResult:
    """Directional Lipschitz quotient at 0 and the weighted bound as the scale R grows.

    Each R solves on (-box_factor R, box_factor R)^n with the quotient taken
    over 0 < t < R/(3 sqrt n).
    """
    if not spec.sigma > 0:
        raise PreconditionError(f"sigma = 2 s_min - 1 = {spec.sigma:g} must be positive")
    if f.lipschitz_n != 0.0:
        probe = np.random.default_rng(0).uniform(-5, 5, size=(256, spec.n))
        shifted = probe.copy()
        shifted[:, -1] += 1.0
        if f.lipschitz_n is not None or np.max(np.abs(f.sampler(probe) - f.sampler(shifted))) > 0:
            raise PreconditionError("f must not depend on x_n")
    if not exterior.is_bounded:
        raise PreconditionError("exterior data must be bounded")
    n = spec.n
    rows = []
    for R in radii:
        R = float(R)
        box = AnisotropicBox((box_factor * R,) * spec.m)
        coarse, fine = _two_grid(spec, box, f, exterior, counts)
        d_m = R / (3.0 * math.sqrt(n))
        q, t_star, slack = _lipschitz_two_grid(coarse, fine, d_m)
        u_norm = fine.sup_norm
        tail = tail_integral(PowerLaw(u_norm), R, spec.s_min)
        rhs, trail = weighted_estimate_rhs(spec, n, R, 0.0, u_norm, tail)
        rows.append({"R": R, "quotient": q, "rhs": rhs, "slack": slack, "t_argmax": t_star,
                     "u_norm": u_norm, "tail_integral": tail, "C": trail["C"],
                     "grid_fine": list(fine.grid.counts)})
    Rs = [r["R"] for r in rows]
    return SweepResult(rows, _fit(Rs, [r["quotient"] for r in rows]), _fit(Rs, [r["rhs"] for r in rows]))


# ---------------------------------------------------------------- difference quotients

def difference_quotient(u: ScalarField, t: float) -> ScalarField:
    """u#(x) = (u(x + t e_n) - u(x)) / t."""
    t = float(t)
    if t == 0:
        raise ValueError("t must be nonzero")
    if abs(t) > 1e-3:
        raise ValueError("|t| must not exceed 1/1000")
    inner, n = u.sampler, u.n

    def sampler(x):
        shifted = x.copy()
        shifted[:, -1] += t
        return (inner(shifted) - inner(x)) / t

    bound = 2.0 * u.global_bound / abs(t)
    if u.lipschitz_n is not None:
        bound = min(bound, u.lipschitz_n)
    support = None if u.support_radius is None else u.support_radius + abs(t)
    return ScalarField(sampler, n=n, global_bound=bound, support_radius=support,
                       support_axes=None if support is None else u.support_axes,
                       growth=u.growth, name=f"dq({u.name})")


def second_derivative_bound(spec: OperatorSpec, f: ScalarField, exterior: ScalarField, counts=63,
                            r_inner: float = 0.02) -> EstimateReport:
    """max |d^2 u / dx_n^2| over B_{97/100} against C (||d_n f|| + ||f|| + ||u||).

    L u = f is solved on (-1, 1)^n. The constant iterates the gradient bound:
    the difference quotients of u solve the equation with data f#, so at radius
    ``r_inner`` |d_n u#| <= K1 ||f#|| + K2 ||u#||, and ||u#|| is bounded by the
    interior gradient constant at radius 1/2; C = max(K1, K2 C_grad).
    """
    if f.lipschitz_n is None:
        raise PreconditionError("f needs a certified x_n Lipschitz constant")
    if not exterior.is_bounded:
        raise PreconditionError("exterior data must be bounded")
    box = AnisotropicBox((1.0,) * spec.m)
    coarse, fine = _two_grid(spec, box, f, exterior, counts)

    def stencil(u: GridFunction):
        h = u.grid.spacing[-1]
        vals = u.values
        core = (vals[..., 2:] - 2.0 * vals[..., 1:-1] + vals[..., :-2]) / h**2
        pts = u.grid.points().reshape(u.grid.shape + (u.grid.n,))[..., 1:-1, :]
        inside = np.linalg.norm(pts, axis=-1) < 0.97
        return core, inside

    fc, inside_f = stencil(fine)
    lhs = float(np.max(np.abs(fc[inside_f]))) if np.any(inside_f) else 0.0
    cc, inside_c = stencil(coarse)
    # fine second differences at coarse nodes (every other fine node)
    sl = (slice(1, None, 2),) * (spec.n - 1) + (slice(2, None, 2),)
    fc_on_c = fc[sl][..., : cc.shape[-1]]
    slack = float(np.max(np.abs(fc_on_c[inside_c] - cc[inside_c]))) if np.any(inside_c) else 0.0
    K, trail_inner = gradient_constant(spec, r_inner)
    K1, K2 = trail_inner["coef_f"], trail_inner["coef_u"]
    C_grad, trail_outer = gradient_constant(spec, 0.5)
    C = max(K1, K2 * C_grad)
    u_norm = fine.sup_norm
    rhs = C * (f.lipschitz_n + f.global_bound + u_norm)
    return EstimateReport("second-derivative", lhs, rhs, slack, {
        "K1": K1, "K2": K2, "C_grad": C_grad, "C": C, "r_inner": r_inner,
        "df_norm": f.lipschitz_n, "f_norm": f.global_bound, "u_norm": u_norm,
    })


# ---------------------------------------------------------------- non-additivity

def non_additivity_demo(s: float, fld: Optional[ScalarField] = None,
                        quad: Optional[QuadratureSpec] = None) -> EstimateReport:
    """Gap between sum of 1-D fractional Laplacians and the isotropic one at the origin of R^2.

    The report's lhs is 10x the combined quadrature uncertainty and rhs the gap.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    if fld is None:
        fld = make_field("bump", 2, radius=1.0)
    if fld.n != 2:
        raise ConfigurationError("the demonstration lives in R^2")
    if quad is None:
        quad = QuadratureSpec(rtol=1e-6)
    x = np.zeros(2)
    e1 = block_fraclap(fld, x, (0,), s, quad, full_output=True)
    e2 = block_fraclap(fld, x, (1,), s, quad, full_output=True)
    iso = block_fraclap(fld, x, (0, 1), s, quad, full_output=True)
    gap = abs(e1.value + e2.value - iso.value)
    unc = e1.uncertainty + e2.uncertainty + iso.uncertainty
    return EstimateReport("non-additivity", 10.0 * unc, gap, 0.0, {
        "s": s, "directional_sum": e1.value + e2.value, "isotropic": iso.value, "gap": gap,
        "uncertainty": unc,
    })


# ---------------------------------------------------------------- manufactured solutions

def manufactured_rhs(spec: OperatorSpec, radii, grid, quad: QuadratureSpec) -> tuple[np.ndarray, ScalarField]:
    """Nodal L u* for u* = prod_k bump(x_k / r_k), factored axis by axis through the quadrature."""
    from .catalog import smooth_bump

    n = spec.n
    u = make_field("bump_product", n, radii=list(radii))
    r = np.asarray(u.params["radii"])
    factors = [smooth_bump(grid.axis_nodes(k) / r[k]) for k in range(n)]
    total = np.zeros(grid.shape)
    for k in range(n):
        if spec.a[k] == 0:
            continue
        F = np.empty(grid.counts[k])
        for j, xk in enumerate(grid.axis_nodes(k)):
            p = np.zeros(n)
            p[k] = xk
            F[j] = group_fraclap(spec, k + 1, u, p, quad)
        prod = np.ones(grid.shape)
        for j in range(n):
            sh = [1] * n
            sh[j] = -1
            prod = prod * (spec.a[k] * F if j == k else factors[j]).reshape(sh)
        total = total + prod
    return total, u


def mms_study(spec: OperatorSpec, half_widths, radii, counts: Sequence[int] = (15, 31, 63),
              quad: Optional[QuadratureSpec] = None) -> dict:
    """Max nodal error against the bump-product solution under successive grid halving."""
    if quad is None:
        quad = QuadratureSpec(rtol=1e-9)
    box = AnisotropicBox(tuple(half_widths))
    errors, hs = [], []
    for M in counts:
        grid = Grid(box, M)
        f_nodes, u = manufactured_rhs(spec, radii, grid, quad)
        sol = solve_dirichlet(spec, box, f_nodes, u, grid)
        exact = u.sampler(grid.points()).reshape(grid.shape)
        errors.append(float(np.max(np.abs(sol.values - exact))))
        hs.append(max(grid.spacing))
    orders = [math.log(e0 / e1) / math.log(h0 / h1) for e0, e1, h0, h1 in zip(errors, errors[1:], hs, hs[1:])]
    return {"s": list(spec.s), "counts": list(counts), "h": hs, "errors": errors, "orders": orders,
            "min_order": min(orders) if orders else float("nan")}


def maximum_principle_check(spec: OperatorSpec, box: AnisotropicBox, f: ScalarField, counts=63) -> dict:
    """M-matrix structure of the assembled matrix and u >= 0 for f >= 0 with zero exterior."""
    grid = Grid(box, counts)
    zero = zero_field(spec.n)
    mat = assemble(spec, grid, zero)
    report = comparison_check(mat)
    u = solve_dirichlet(spec, box, f, zero, grid, matrix=mat)
    return {"violations": report.violations, "min_u": float(np.min(u.values)),
            "ok": report.ok and float(np.min(u.values)) >= -1e-10}
