"""Explicit barrier profiles, the composite barrier and the doubled fields built from a solution."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import ConfigurationError, OperatorSpec, ScalarField, eta, gamma_function
from .operator import ExtendedField, default_nu


def bump_profile(d: float, N: int, s: float, X) -> np.ndarray | float:
    """eta(N,s) * (d^2 - |X|^2)_+^s, vectorized over leading axes of ``X`` (last axis has N entries)."""
    return eta(N, s) * unnormalized_profile(d, N, s, X)


def unnormalized_profile(d: float, N: int, s: float, X) -> np.ndarray | float:
    """(d^2 - |X|^2)_+^s."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != N:
        raise ValueError(f"expected {N} coordinates")
    if not d > 0:
        raise ValueError("radius must be positive")
    base = np.maximum(d * d - np.sum(X * X, axis=-1), 0.0)
    out = base**s
    return float(out) if np.ndim(out) == 0 else out


def dy_constant(N: int, s: float) -> float:
    """(-Delta)^s of (1-|X|^2)_+^s inside the unit ball of R^N."""
    if N < 1 or not 0.0 < s <= 1.0:
        raise ValueError("need N >= 1 and s in (0,1]")
    if s == 1.0:
        return 2.0 * N
    return 2.0 ** (2.0 * s) * gamma_function(s + 1.0) * gamma_function(s + N / 2.0) / gamma_function(N / 2.0)


def profile_field(spec: OperatorSpec, i: int, d: float, normalized: bool = True) -> ScalarField:
    """The group-``i`` profile as a field on R^n (constant in the other groups)."""
    N, s = spec.dims[i - 1], spec.s[i - 1]
    axes = spec.grouping.axes(i)
    lo, hi = axes[0], axes[-1] + 1
    factor = eta(N, s) if normalized else 1.0

    def sampler(x):
        return factor * np.maximum(d * d - np.sum(x[:, lo:hi] ** 2, axis=1), 0.0) ** s

    return ScalarField(
        sampler, n=spec.n, global_bound=factor * d ** (2 * s), support_radius=d,
        support_axes=axes, name="profile", params={"group": i, "d": d},
    )


@dataclass(frozen=True)
class BarrierConstants:
    c_o: float
    A0: float
    A1: float
    A2: float
    nu: float

    def to_dict(self) -> dict:
        return asdict(self)


def barrier_constants(
    spec: OperatorSpec,
    d: Sequence[float],
    nu: float | None = None,
    g_norm: float = 0.0,
    v_norm: float = 0.0,
) -> BarrierConstants:
    """Constants of the composite barrier for radii ``d``.

    ``g_norm`` bounds the doubled right-hand side on Q_d x (0, d_m) and
    ``v_norm`` the doubled solution on R^{n+1}. ``nu`` defaults to 0.99 a.
    """
    d = tuple(float(v) for v in d)
    if len(d) != spec.m:
        raise ConfigurationError("one radius per group is required")
    if nu is None:
        nu = default_nu(spec)
    a = spec.a_local
    if not 0.0 < nu < a:
        raise ValueError(f"nu={nu!r} must lie in (0, {a})")
    if g_norm < 0 or v_norm < 0:
        raise ValueError("norms must be nonnegative")
    weights = [e * di ** (2 * si) for e, di, si in zip(spec.etas(), d, spec.s)]
    c_o = sum(weights) + d[-1] ** 2 / 2.0
    A0 = sum(spec.a)
    A2 = v_norm / min(weights)
    A1 = A0 * A2 + g_norm + (a - nu)
    return BarrierConstants(c_o=c_o, A0=A0, A1=A1, A2=A2, nu=nu)


def barrier_time_part(t, d_m: float):
    """t_+ (d_m - t)_+ / 2."""
    t = np.asarray(t, dtype=float)
    return np.maximum(t, 0.0) * np.maximum(d_m - t, 0.0) / 2.0


def barrier_space_part(spec: OperatorSpec, d: Sequence[float], c_o: float, p) -> np.ndarray:
    """c_o - sum_i eta_i (d_i^2 - |X_i|^2)_+^{s_i} - (d_m^2 - t^2)_+ / 2 at points p = (x, t)."""
    p = np.asarray(p, dtype=float)
    out = np.full(p.shape[:-1], c_o)
    for i in range(1, spec.m + 1):
        ax = spec.grouping.axes(i)
        X = p[..., ax[0] : ax[-1] + 1]
        out = out - bump_profile(d[i - 1], spec.dims[i - 1], spec.s[i - 1], X)
    t = p[..., -1]
    return out - np.maximum(d[-1] ** 2 - t * t, 0.0) / 2.0


def composite_barrier(constants: BarrierConstants, spec: OperatorSpec, d: Sequence[float], p):
    """(A1/nu) * time part + A2 * space part, vectorized over leading axes of ``p`` (shape (..., n+1))."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != spec.n + 1:
        raise ValueError(f"points must have {spec.n + 1} coordinates")
    val = (constants.A1 / constants.nu) * barrier_time_part(p[..., -1], d[-1])
    val = val + constants.A2 * barrier_space_part(spec, d, constants.c_o, p)
    return float(val) if np.ndim(val) == 0 else val


def doubled_fields(u: ScalarField, f: ScalarField) -> tuple[ExtendedField, ExtendedField]:
    """v(x,t) = u(x + t_+ e_n) - u(x - t_+ e_n) and g likewise from f."""
    return _doubled(u), _doubled(f)


def _doubled(w: ScalarField) -> ExtendedField:
    n = w.n
    inner = w.sampler

    def sampler(p):
        x = p[:, :n]
        shift = np.maximum(p[:, n], 0.0)
        plus = x.copy()
        minus = x.copy()
        plus[:, n - 1] += shift
        minus[:, n - 1] -= shift
        return inner(plus) - inner(minus)

    return ExtendedField(
        sampler, n=n + 1, global_bound=2.0 * w.global_bound, growth=w.growth,
        name=f"doubled({w.name})",
    )
