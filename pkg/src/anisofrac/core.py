"""Coordinate groupings, operator specifications, boxes and special-function constants."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised when an operator, box or field violates its structural invariants."""


def gamma_function(x: float) -> float:
    """Euler Gamma at a real argument.

    Backed by ``math.gamma`` (correctly rounded to a few ulps on the range
    used here); only the pole handling is ours.
    """
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise ValueError(f"Gamma has a pole at {x!r}")
    return math.gamma(x)


def sphere_measure(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N=1: two points)."""
    if N < 1:
        raise ValueError("dimension must be >= 1")
    return 2.0 * math.pi ** (N / 2.0) / gamma_function(N / 2.0)


def kernel_constant(N: int, s: float) -> float:
    """Normalization c_{N,s} of the N-dimensional fractional s-Laplacian."""
    if N < 1:
        raise ValueError("dimension must be >= 1")
    if not 0.0 < s < 1.0:
        raise ValueError(f"exponent {s!r} outside (0,1)")
    abs_gamma_minus_s = gamma_function(1.0 - s) / s
    return (
        2.0 ** (2.0 * s - 1.0)
        * gamma_function(s + N / 2.0)
        / (math.pi ** (N / 2.0) * abs_gamma_minus_s)
    )


def eta(N: int, s: float) -> float:
    """Normalizing factor that makes the (d^2-|X|^2)_+^s profile an exact unit solution."""
    if N < 1:
        raise ValueError("dimension must be >= 1")
    if not 0.0 < s <= 1.0:
        raise ValueError(f"exponent {s!r} outside (0,1]")
    if s == 1.0:
        return 1.0 / (2.0 * N)
    return gamma_function(N / 2.0) / (
        2.0 ** (2.0 * s) * gamma_function(s + 1.0) * gamma_function(s + N / 2.0)
    )


@dataclass(frozen=True)
class CoordinateGrouping:
    """Split of R^n into consecutive coordinate blocks X_1, ..., X_m with X_m = x_n."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise ConfigurationError("at least one group is required")
        if any(d < 1 for d in dims):
            raise ConfigurationError("group dimensions must be positive integers")
        if dims[-1] != 1:
            raise ConfigurationError("the last group must be the single coordinate x_n")

    @property
    def m(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Cumulative sums N'_0 = 0, N'_1, ..., N'_m."""
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return tuple(out)

    def axes(self, i: int) -> tuple[int, ...]:
        """Zero-based coordinate indices of group ``i`` (1-based)."""
        self._check_index(i)
        off = self.offsets
        return tuple(range(off[i - 1], off[i]))

    def group_of_axis(self, axis: int) -> int:
        off = self.offsets
        for i in range(1, self.m + 1):
            if off[i - 1] <= axis < off[i]:
                return i
        raise IndexError(f"axis {axis} outside R^{self.n}")

    def _check_index(self, i: int) -> None:
        if not 1 <= i <= self.m:
            raise IndexError(f"group index {i} outside 1..{self.m}")


def embed_increment(grouping: CoordinateGrouping, i: int, y) -> np.ndarray:
    """Place ``y`` in the coordinates of group ``i`` of R^n, zeros elsewhere."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    axes = grouping.axes(i)
    if y.shape[-1] != len(axes):
        raise ValueError(f"group {i} has {len(axes)} coordinates, got {y.shape[-1]}")
    out = np.zeros(y.shape[:-1] + (grouping.n,))
    out[..., axes[0] : axes[-1] + 1] = y
    return out


@dataclass(frozen=True)
class OperatorSpec:
    """L = sum_i a_i (-Delta_{X_i})^{s_i}, with the last group local (s_m = 1, a_m = a > 0)."""

    grouping: CoordinateGrouping
    s: tuple[float, ...]
    a: tuple[float, ...]

    def __post_init__(self):
        s = tuple(float(v) for v in self.s)
        a = tuple(float(v) for v in self.a)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "a", a)
        m = self.grouping.m
        if len(s) != m or len(a) != m:
            raise ConfigurationError(f"expected {m} exponents and coefficients")
        for v in s:
            if not 0.0 < v <= 1.0 or not math.isfinite(v):
                raise ConfigurationError(f"exponent {v!r} out of (0,1]")
        if s[-1] != 1.0:
            raise ConfigurationError("the last exponent must be 1")
        if any(v < 0 or not math.isfinite(v) for v in a):
            raise ConfigurationError("coefficients must be finite and nonnegative")
        if a[-1] <= 0:
            raise ConfigurationError("the coefficient of the local direction must be positive")

    @classmethod
    def build(cls, dims: Sequence[int], s: Sequence[float], a: Sequence[float]) -> "OperatorSpec":
        return cls(CoordinateGrouping(tuple(dims)), tuple(s), tuple(a))

    @property
    def m(self) -> int:
        return self.grouping.m

    @property
    def n(self) -> int:
        return self.grouping.n

    @property
    def dims(self) -> tuple[int, ...]:
        return self.grouping.dims

    @property
    def a_local(self) -> float:
        return self.a[-1]

    @property
    def s_min(self) -> float:
        return min(self.s)

    @property
    def s_max(self) -> float:
        return max(self.s)

    @property
    def a_min(self) -> float:
        return min(self.a)

    @property
    def a_max(self) -> float:
        return max(self.a)

    @property
    def sigma(self) -> float:
        """Growth threshold 2 s_min - 1 of the rigidity statement."""
        return 2.0 * self.s_min - 1.0

    def etas(self) -> tuple[float, ...]:
        return tuple(eta(N, s) for N, s in zip(self.dims, self.s))

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "s": list(self.s), "a": list(self.a)}

    @classmethod
    def from_dict(cls, data: dict) -> "OperatorSpec":
        try:
            return cls.build(data["dims"], data["s"], data["a"])
        except KeyError as exc:
            raise ConfigurationError(f"operator spec is missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "OperatorSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class AnisotropicBox:
    """Product of group balls B_{d_i}, the last factor stretched to (-kappa d_m, kappa d_m)."""

    d: tuple[float, ...]
    kappa: float = 1.0

    def __post_init__(self):
        d = tuple(float(v) for v in self.d)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "kappa", float(self.kappa))
        if not d or any(not (v > 0 and math.isfinite(v)) for v in d):
            raise ConfigurationError("box radii must be positive")
        if not self.kappa > 0:
            raise ConfigurationError("dilation factor must be positive")

    @property
    def d_m(self) -> float:
        return self.d[-1]

    def radii(self) -> tuple[float, ...]:
        return self.d[:-1] + (self.kappa * self.d[-1],)

    def dilate(self, kappa: float) -> "AnisotropicBox":
        return AnisotropicBox(self.d, kappa)

    def contains(self, grouping: CoordinateGrouping, x) -> np.ndarray:
        """Open-set membership, vectorized over the leading axes of ``x``."""
        x = np.asarray(x, dtype=float)
        if len(self.d) != grouping.m:
            raise ConfigurationError("box radii do not match the grouping")
        inside = np.ones(x.shape[:-1], dtype=bool)
        for i, r in enumerate(self.radii(), start=1):
            ax = grouping.axes(i)
            norm2 = np.sum(x[..., ax[0] : ax[-1] + 1] ** 2, axis=-1)
            inside &= norm2 < r * r
        return inside

    def half_widths(self, grouping: CoordinateGrouping) -> tuple[float, ...]:
        """Per-axis half widths; only meaningful when every group is one-dimensional."""
        if any(N != 1 for N in grouping.dims):
            raise ConfigurationError("box is not a rectangle unless all groups are 1-D")
        return self.radii()

    def to_dict(self) -> dict:
        return {"d": list(self.d), "kappa": self.kappa}

    @classmethod
    def from_dict(cls, data: dict) -> "AnisotropicBox":
        try:
            return cls(tuple(data["d"]), data.get("kappa", 1.0))
        except KeyError as exc:
            raise ConfigurationError(f"box is missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AnisotropicBox":
        return cls.from_dict(json.loads(text))


Sampler = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalarField:
    """A function on R^n with certified size information.

    ``sampler`` is vectorized: it maps an array of shape (k, n) to shape (k,).
    ``global_bound`` certifies |u(x)| <= global_bound * (1 + |x|)**growth,
    so with the default ``growth=0`` it is a bound on the sup norm.
    When ``support_radius`` is set the field vanishes wherever the norm of
    the coordinates listed in ``support_axes`` (all axes by default) exceeds it.
    ``lipschitz_n`` optionally certifies sup |d u / d x_n|.
    """

    sampler: Sampler
    n: int
    global_bound: float
    support_radius: Optional[float] = None
    support_axes: Optional[tuple[int, ...]] = None
    growth: float = 0.0
    lipschitz_n: Optional[float] = None
    name: str = "field"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.global_bound >= 0:
            raise ConfigurationError("global bound must be nonnegative")
        if self.support_radius is not None and not self.support_radius >= 0:
            raise ConfigurationError("support radius must be nonnegative")
        if self.growth < 0:
            raise ConfigurationError("growth exponent must be nonnegative")
        if self.support_axes is not None:
            object.__setattr__(self, "support_axes", tuple(int(a) for a in self.support_axes))

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.sampler(x[None, :])[0])
        flat = x.reshape(-1, self.n)
        return np.asarray(self.sampler(flat), dtype=float).reshape(x.shape[:-1])

    @property
    def is_bounded(self) -> bool:
        return self.growth == 0.0 and math.isfinite(self.global_bound)

    @property
    def is_zero(self) -> bool:
        return self.global_bound == 0.0

    @property
    def has_support(self) -> bool:
        return self.support_radius is not None

    def support_norm(self, x: np.ndarray) -> np.ndarray:
        axes = self.support_axes if self.support_axes is not None else tuple(range(self.n))
        return np.sqrt(np.sum(np.asarray(x)[..., list(axes)] ** 2, axis=-1))

    def bound_at(self, radius: float) -> float:
        """Certified bound of |u| on the ball of the given radius."""
        return self.global_bound * (1.0 + radius) ** self.growth

    def with_sampler(self, sampler: Sampler, **changes) -> "ScalarField":
        kw = dict(
            n=self.n,
            global_bound=self.global_bound,
            support_radius=self.support_radius,
            support_axes=self.support_axes,
            growth=self.growth,
            lipschitz_n=self.lipschitz_n,
            name=self.name,
            params=dict(self.params),
        )
        kw.update(changes)
        return ScalarField(sampler, **kw)

    def translate(self, z) -> "ScalarField":
        """The field x -> u(x + z)."""
        z = np.asarray(z, dtype=float)
        inner = self.sampler
        support = self.support_radius
        if support is not None:
            support = support + float(np.linalg.norm(z))
        growth_bound = self.global_bound * (1.0 + float(np.linalg.norm(z))) ** self.growth
        return self.with_sampler(
            lambda x: inner(x + z),
            support_radius=support,
            support_axes=None if support is None else self.support_axes,
            global_bound=growth_bound,
            name=f"{self.name}(+z)",
        )

    def scale(self, alpha: float) -> "ScalarField":
        inner = self.sampler
        lip = None if self.lipschitz_n is None else abs(alpha) * self.lipschitz_n
        return self.with_sampler(
            lambda x: alpha * inner(x),
            global_bound=abs(alpha) * self.global_bound,
            lipschitz_n=lip,
        )

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.n != self.n:
            raise ConfigurationError("fields live in different dimensions")
        f, g = self.sampler, other.sampler
        support = None
        axes = None
        if self.has_support and other.has_support and self.support_axes == other.support_axes:
            support = max(self.support_radius, other.support_radius)
            axes = self.support_axes
        lip = None
        if self.lipschitz_n is not None and other.lipschitz_n is not None:
            lip = self.lipschitz_n + other.lipschitz_n
        return ScalarField(
            lambda x: f(x) + g(x),
            n=self.n,
            global_bound=self.global_bound + other.global_bound,
            support_radius=support,
            support_axes=axes,
            growth=max(self.growth, other.growth),
            lipschitz_n=lip,
            name=f"({self.name}+{other.name})",
        )


def zero_field(n: int) -> ScalarField:
    return ScalarField(
        lambda x: np.zeros(len(x)), n=n, global_bound=0.0, support_radius=0.0,
        lipschitz_n=0.0, name="zero",
    )


def constant_field(n: int, value: float) -> ScalarField:
    value = float(value)
    return ScalarField(
        lambda x: np.full(len(x), value), n=n, global_bound=abs(value),
        lipschitz_n=0.0, name="constant", params={"value": value},
    )
