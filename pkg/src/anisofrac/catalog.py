"""Named built-in fields with parameter schemas.

The catalog is closed on purpose: every constructor certifies the global
bound, support and (when available) the x_n Lipschitz constant of the field
it returns.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ConfigurationError, ScalarField, constant_field, eta, zero_field


class UnknownField(ConfigurationError):
    pass


def smooth_bump(rho):
    """exp(1 - 1/(1 - rho^2)) on |rho| < 1, else 0; equals 1 at the origin."""
    rho = np.asarray(rho, dtype=float)
    z = 1.0 - rho * rho
    out = np.zeros_like(z)
    inside = z > 0
    out[inside] = np.exp(1.0 - 1.0 / z[inside])
    return out


_RHO = np.linspace(0.0, 1.0, 200001)
_BUMP = smooth_bump(_RHO)
# sup |d/drho bump| and sup rho*bump, padded against the sampling gap
BUMP_SLOPE = float(np.max(np.abs(np.gradient(_BUMP, _RHO)))) * 1.001
BUMP_FIRST_MOMENT = float(np.max(_RHO * _BUMP)) * 1.001


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "float", "int", "floats", "ints"
    default: object = None
    doc: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "type": self.kind, "default": self.default, "doc": self.doc}


@dataclass(frozen=True)
class Builtin:
    name: str
    doc: str
    params: tuple
    build: Callable

    def schema(self) -> dict:
        return {"name": self.name, "doc": self.doc, "params": [p.to_dict() for p in self.params]}


_REGISTRY: dict[str, Builtin] = {}


def _register(name, doc, *params):
    def deco(fn):
        _REGISTRY[name] = Builtin(name, doc, tuple(params), fn)
        return fn
    return deco


def _vec(v, n, name):
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 1:
        v = np.full(n, float(v[0]))
    if v.size != n:
        raise ConfigurationError(f"parameter {name!r} needs {n} entries")
    return v


@_register("zero", "Identically zero.")
def _zero(n):
    return zero_field(n)


@_register("constant", "Constant value.", Param("value", "float", 1.0))
def _constant(n, value=1.0):
    return constant_field(n, value)


@_register(
    "bump", "Smooth radial bump amp*exp(1-1/(1-|x-c|^2/r^2)).",
    Param("amp", "float", 1.0), Param("radius", "float", 1.0), Param("center", "floats", 0.0),
)
def _bump(n, amp=1.0, radius=1.0, center=0.0):
    if not radius > 0:
        raise ConfigurationError("bump radius must be positive")
    c = _vec(center, n, "center")

    def sampler(x):
        return amp * smooth_bump(np.linalg.norm(x - c, axis=1) / radius)

    return ScalarField(
        sampler, n=n, global_bound=abs(amp), support_radius=float(np.linalg.norm(c)) + radius,
        lipschitz_n=abs(amp) * BUMP_SLOPE / radius, name="bump",
        params={"amp": amp, "radius": radius, "center": c.tolist()},
    )


@_register(
    "bump_product", "amp * prod_k bump(x_k / r_k).",
    Param("amp", "float", 1.0), Param("radii", "floats", 1.0),
)
def _bump_product(n, amp=1.0, radii=1.0):
    r = _vec(radii, n, "radii")
    if np.any(r <= 0):
        raise ConfigurationError("radii must be positive")

    def sampler(x):
        return amp * np.prod(smooth_bump(x / r), axis=1)

    return ScalarField(
        sampler, n=n, global_bound=abs(amp), support_radius=float(np.linalg.norm(r)),
        lipschitz_n=abs(amp) * BUMP_SLOPE / r[-1], name="bump_product",
        params={"amp": amp, "radii": r.tolist()},
    )


@_register(
    "cosine", "Plane wave amp*cos(k.x + phase).",
    Param("amp", "float", 1.0), Param("k", "floats", 1.0), Param("phase", "float", 0.0),
)
def _cosine(n, amp=1.0, k=1.0, phase=0.0):
    kv = _vec(k, n, "k")

    def sampler(x):
        return amp * np.cos(x @ kv + phase)

    return ScalarField(
        sampler, n=n, global_bound=abs(amp), lipschitz_n=abs(amp * kv[-1]), name="cosine",
        params={"amp": amp, "k": kv.tolist(), "phase": phase},
    )


@_register(
    "tanh", "Step amp*tanh(x_axis/width) along one axis.",
    Param("amp", "float", 1.0), Param("axis", "int", -1), Param("width", "float", 1.0),
)
def _tanh(n, amp=1.0, axis=-1, width=1.0):
    k = int(axis) % n

    def sampler(x):
        return amp * np.tanh(x[:, k] / width)

    lip = abs(amp) / width if k == n - 1 else 0.0
    return ScalarField(sampler, n=n, global_bound=abs(amp), lipschitz_n=lip, name="tanh",
                       params={"amp": amp, "axis": k, "width": width})


@_register(
    "annulus", "Bump in the norm of the chosen axes, supported where inner <= |x_axes| <= outer.",
    Param("amp", "float", 1.0), Param("inner", "float", 4.0), Param("outer", "float", 5.0),
    Param("axes", "ints", [0]),
)
def _annulus(n, amp=1.0, inner=4.0, outer=5.0, axes=(0,)):
    if not 0 <= inner < outer:
        raise ConfigurationError("annulus needs 0 <= inner < outer")
    ax = tuple(int(a) % n for a in np.atleast_1d(axes))
    mid, half = 0.5 * (inner + outer), 0.5 * (outer - inner)

    def sampler(x):
        r = np.sqrt(np.sum(x[:, list(ax)] ** 2, axis=1))
        return amp * smooth_bump((r - mid) / half)

    lip = abs(amp) * BUMP_SLOPE / half if (n - 1) in ax else 0.0
    return ScalarField(
        sampler, n=n, global_bound=abs(amp), support_radius=outer, support_axes=ax,
        lipschitz_n=lip, name="annulus",
        params={"amp": amp, "inner": inner, "outer": outer, "axes": list(ax)},
    )


@_register(
    "power_annulus", "(1 - eta_o(x_axis/(3R))) |x_axis|^beta: vanishes on |x_axis| < 3R, grows like |x|^beta.",
    Param("R", "float", 1.0), Param("beta", "float", 0.4), Param("axis", "int", 0),
)
def _power_annulus(n, R=1.0, beta=0.4, axis=0):
    from .estimates import eta_o

    if not 0 <= beta < 2:
        raise ConfigurationError("beta must lie in [0, 2)")
    k = int(axis) % n

    def sampler(x):
        t = np.abs(x[:, k])
        return (1.0 - eta_o(t / (3.0 * R))) * t**beta

    # |u(x)| <= |x|^beta <= (1+|x|)^beta
    return ScalarField(sampler, n=n, global_bound=1.0, growth=beta, name="power_annulus",
                       lipschitz_n=None if k == n - 1 else 0.0,
                       params={"R": R, "beta": beta, "axis": k})


@_register(
    "profile", "Barrier profile eta(N,s)(d^2-|x_axes|^2)_+^s on a block of consecutive axes.",
    Param("d", "float", 1.0), Param("s", "float", 0.5), Param("axes", "ints", [0]),
    Param("normalized", "int", 1),
)
def _profile(n, d=1.0, s=0.5, axes=(0,), normalized=1):
    ax = tuple(int(a) % n for a in np.atleast_1d(axes))
    if not 0 < s <= 1:
        raise ConfigurationError("exponent out of (0,1]")
    factor = eta(len(ax), s) if normalized else 1.0

    def sampler(x):
        return factor * np.maximum(d * d - np.sum(x[:, list(ax)] ** 2, axis=1), 0.0) ** s

    return ScalarField(sampler, n=n, global_bound=factor * d ** (2 * s), support_radius=d,
                       support_axes=ax, name="profile",
                       params={"d": d, "s": s, "axes": list(ax), "normalized": int(normalized)})


@_register(
    "xn_linear", "amp * x_n * bump(|x|/radius): odd in x_n, compactly supported.",
    Param("amp", "float", 1.0), Param("radius", "float", 1.0),
)
def _xn_linear(n, amp=1.0, radius=1.0):
    def sampler(x):
        return amp * x[:, -1] * smooth_bump(np.linalg.norm(x, axis=1) / radius)

    # d/dx_n (x_n b(|x|/r)) = b + x_n b' x_n/(r|x|), bounded by 1 + BUMP_SLOPE
    return ScalarField(
        sampler, n=n, global_bound=abs(amp) * radius * BUMP_FIRST_MOMENT, support_radius=radius,
        lipschitz_n=abs(amp) * (1.0 + BUMP_SLOPE), name="xn_linear",
        params={"amp": amp, "radius": radius},
    )


@_register(
    "transverse_bump", "Bump in x_1..x_{n-1} only (independent of x_n).",
    Param("amp", "float", 1.0), Param("radius", "float", 1.0),
)
def _transverse_bump(n, amp=1.0, radius=1.0):
    if n < 2:
        raise ConfigurationError("transverse_bump needs n >= 2")

    def sampler(x):
        return amp * smooth_bump(np.linalg.norm(x[:, :-1], axis=1) / radius)

    return ScalarField(sampler, n=n, global_bound=abs(amp), support_radius=radius,
                       support_axes=tuple(range(n - 1)), lipschitz_n=0.0, name="transverse_bump",
                       params={"amp": amp, "radius": radius})


def names() -> list[str]:
    return sorted(_REGISTRY)


def schema(name: str) -> dict:
    return lookup(name).schema()


def catalog() -> list[dict]:
    return [_REGISTRY[k].schema() for k in names()]


def lookup(name: str) -> Builtin:
    try:
        return _REGISTRY[name]
    except KeyError:
        close = difflib.get_close_matches(name, names(), n=3, cutoff=0.4)
        hint = f"; did you mean {', '.join(close)}?" if close else ""
        raise UnknownField(f"unknown field {name!r}{hint}") from None


def make_field(name: str, n: int, **params) -> ScalarField:
    b = lookup(name)
    allowed = {p.name for p in b.params}
    extra = set(params) - allowed
    if extra:
        raise ConfigurationError(f"unknown parameter(s) {sorted(extra)} for field {name!r}")
    return b.build(n, **params)


def from_config(entry, n: int) -> ScalarField:
    """Build a field from {"name": ..., "params": {...}} or a bare name."""
    if isinstance(entry, str):
        return make_field(entry, n)
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigurationError("a field entry needs a 'name'")
    params = entry.get("params", {})
    if not isinstance(params, dict):
        raise ConfigurationError("field 'params' must be an object")
    return make_field(entry["name"], n, **params)
