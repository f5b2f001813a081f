"""Finite-difference discretization of L on rectangular boxes with prescribed exterior data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import LinearOperator, cg

from .core import AnisotropicBox, ConfigurationError, OperatorSpec, ScalarField, kernel_constant
from .quadrature import gauss_legendre, log_panels, panel_nodes


class UnsupportedConfiguration(ConfigurationError):
    """The grid solver only handles one-dimensional groups."""


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class Grid:
    """Uniform nodes strictly inside a rectangular box, ``counts[k]`` per axis."""

    box: AnisotropicBox
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = self.counts
        if isinstance(counts, int):
            counts = (counts,) * len(self.box.d)
        counts = tuple(int(c) for c in counts)
        object.__setattr__(self, "counts", counts)
        if len(counts) != len(self.box.d):
            raise ConfigurationError("one node count per axis is required")
        if any(c < 1 for c in counts):
            raise ConfigurationError("node counts must be positive")

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def half_widths(self) -> tuple[float, ...]:
        return self.box.radii()

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(2.0 * H / (M + 1) for H, M in zip(self.half_widths, self.counts))

    def axis_nodes(self, k: int) -> np.ndarray:
        H, h, M = self.half_widths[k], self.spacing[k], self.counts[k]
        return -H + h * np.arange(1, M + 1)

    def lattice(self, k: int, j) -> np.ndarray:
        """Coordinate of lattice index ``j`` on axis ``k`` (nodes are j = 1..M, the box edges j = 0, M+1)."""
        return -self.half_widths[k] + self.spacing[k] * np.asarray(j, dtype=float)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*[self.axis_nodes(k) for k in range(self.n)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def refine(self) -> "Grid":
        """Halve the spacing; every node of ``self`` stays a node."""
        return Grid(self.box, tuple(2 * M + 1 for M in self.counts))


def _require_one_dimensional(spec: OperatorSpec, grid: Grid) -> None:
    if any(N != 1 for N in spec.dims):
        raise UnsupportedConfiguration(
            "the grid solver needs every group to be one-dimensional, got dims "
            f"{spec.dims}"
        )
    if grid.n != spec.n:
        raise ConfigurationError("grid dimension does not match the operator")


@lru_cache(maxsize=64)
def lattice_weights(s: float, K: int) -> np.ndarray:
    """Unit-spacing weights w_1..w_K of the second differences delta_k = 2u_j - u_{j+k} - u_{j-k}.

    delta(y)/y^2 is interpolated piecewise linearly between lattice offsets
    (held constant on [0, 1]) and integrated against y^{1-2s}; all weights
    are positive.
    """
    p = 1.0 - 2.0 * s
    x, w = gauss_legendre(12)
    k = np.arange(1, K + 1, dtype=float)
    # left halves on [k-1, k] for k >= 2, right halves on [k, k+1] for k <= K-1
    left = np.zeros(K)
    right = np.zeros(K)
    lo = k[1:] - 1.0
    y = lo[:, None] + 0.5 * (x[None, :] + 1.0)
    left[1:] = 0.5 * ((y - lo[:, None]) * y**p) @ w
    lo = k[:-1]
    y = lo[:, None] + 0.5 * (x[None, :] + 1.0)
    right[:-1] = 0.5 * ((lo[:, None] + 1.0 - y) * y**p) @ w
    weights = (left + right) / k**2
    weights[0] += 1.0 / (2.0 - 2.0 * s)
    return weights


@dataclass
class AxisOperator:
    """One-dimensional block of the Kronecker sum together with its coupling to exterior lattice nodes."""

    axis: int
    block: np.ndarray
    coeff: float
    s: float
    window: int
    offsets: np.ndarray  # lattice indices outside the box that couple to the nodes
    coupling: np.ndarray  # (M, len(offsets)) weights multiplying exterior values
    far_weight: float  # multiplies the far integral of the exterior (0 for local axes)


@dataclass
class OperatorMatrix:
    """Kronecker sum of per-axis blocks plus the exterior right-hand-side correction."""

    spec: OperatorSpec
    grid: Grid
    axes: list
    rhs_correction: np.ndarray
    exterior_uncertainty: float = 0.0

    @property
    def dimension(self) -> int:
        return self.grid.size

    def matvec(self, values: np.ndarray) -> np.ndarray:
        u = np.asarray(values, dtype=float).reshape(self.grid.shape)
        out = np.zeros_like(u)
        for ax in self.axes:
            out += np.moveaxis(np.tensordot(ax.block, u, axes=(1, ax.axis)), 0, ax.axis)
        return out

    def to_sparse(self) -> sp.csr_matrix:
        shape = self.grid.shape
        total = sp.csr_matrix((self.dimension, self.dimension))
        for ax in self.axes:
            left = sp.identity(int(np.prod(shape[: ax.axis])), format="csr")
            right = sp.identity(int(np.prod(shape[ax.axis + 1 :])), format="csr")
            total = total + sp.kron(sp.kron(left, sp.csr_matrix(ax.block)), right, format="csr")
        return total.tocsr()


def _axis_block(spec: OperatorSpec, grid: Grid, k: int, lattice_factor: float) -> Optional[AxisOperator]:
    a, s = spec.a[k], spec.s[k]
    if a == 0.0:
        return None
    M, h = grid.counts[k], grid.spacing[k]
    if s == 1.0:
        block = (a / h**2) * (2.0 * np.eye(M) - np.eye(M, k=1) - np.eye(M, k=-1))
        offsets = np.array([0, M + 1])
        coupling = np.zeros((M, 2))
        coupling[0, 0] = a / h**2
        coupling[-1, 1] = a / h**2
        return AxisOperator(k, block, a, s, 1, offsets, coupling, 0.0)
    K = max(int(math.ceil(lattice_factor * grid.half_widths[k] / h)), M + 1)
    w = lattice_weights(s, K)
    scale = a * 2.0 * kernel_constant(1, s) * h ** (-2.0 * s)
    far_diag = 2.0 * K ** (-2.0 * s) / (2.0 * s)
    idx = np.arange(1, M + 1)
    dist = np.abs(idx[:, None] - idx[None, :])
    block = np.where(dist > 0, -w[np.maximum(dist, 1) - 1], 0.0)
    block[np.diag_indices(M)] = 2.0 * w.sum() + far_diag
    block *= scale
    offsets = np.concatenate([np.arange(1 - K, 1), np.arange(M + 1, M + K + 1)])
    gap = np.abs(idx[:, None] - offsets[None, :])
    coupling = np.where(gap <= K, w[np.minimum(gap, K) - 1], 0.0) * scale
    far_weight = a * 2.0 * kernel_constant(1, s)
    return AxisOperator(k, block, a, s, K, offsets, coupling, far_weight)


def _lines(grid: Grid, k: int) -> np.ndarray:
    """Coordinates of every grid line along axis ``k``: shape (lines, n) with axis ``k`` zeroed."""
    others = [grid.axis_nodes(j) if j != k else np.zeros(1) for j in range(grid.n)]
    mesh = np.meshgrid(*others, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _line_to_grid(values: np.ndarray, grid: Grid, k: int) -> np.ndarray:
    """Reshape (lines, M_k) back onto the grid ordering."""
    lines_shape = tuple(c for j, c in enumerate(grid.shape) if j != k)
    arr = values.reshape(lines_shape + (grid.counts[k],))
    return np.moveaxis(arr, -1, k)


def _far_integral(grid: Grid, ax: AxisOperator, exterior: ScalarField, ppd: int, order: int,
                  chunk: int = 4096) -> tuple[np.ndarray, float]:
    """Integral over |y| > K h of exterior(x + y e_k) |y|^{-1-2s} at every node, plus its certified error."""
    k, s = ax.axis, ax.s
    h = grid.spacing[k]
    start = ax.window * h
    pts = grid.points()
    if exterior.has_support and (exterior.support_axes is None or k in exterior.support_axes):
        reach = exterior.support_radius + float(np.max(exterior.support_norm(pts)))
        if reach <= start:
            return np.zeros(grid.shape), 0.0
        end = reach * (1.0 + 1e-12)
        exact = True
    else:
        end = start * 1e6
        exact = False
    nodes, weights = panel_nodes(log_panels(start, end, ppd), order)
    kern = weights * nodes ** (-1.0 - 2.0 * s)
    tail_factor = end ** (-2.0 * s) / (2.0 * s)
    out = np.empty(len(pts))
    sampler = exterior.sampler
    for lo in range(0, len(pts), chunk):
        p = pts[lo : lo + chunk]
        q = np.repeat(p[:, None, :], len(nodes), axis=1)
        plus = q.copy()
        plus[..., k] += nodes
        minus = q
        minus[..., k] -= nodes
        vals = sampler(plus.reshape(-1, grid.n)) + sampler(minus.reshape(-1, grid.n))
        acc = vals.reshape(len(p), len(nodes)) @ kern
        if not exact:
            pf = p.copy()
            pf[:, k] += end
            mf = p.copy()
            mf[:, k] -= end
            acc += (sampler(pf) + sampler(mf)) * tail_factor
        out[lo : lo + chunk] = acc
    unc = 0.0 if exact else 4.0 * exterior.global_bound * tail_factor
    return out.reshape(grid.shape), unc


def assemble(
    spec: OperatorSpec,
    grid: Grid,
    exterior: ScalarField,
    lattice_factor: float = 4.0,
    far_ppd: int = 8,
    far_order: int = 8,
    axes: Optional[Sequence[int]] = None,
) -> OperatorMatrix:
    """Discretize L on ``grid`` with ``exterior`` prescribing the solution outside the box.

    Fractional axes use lattice offsets up to K h with K h >= ``lattice_factor``
    times the box half width; beyond that the exterior is integrated by Gauss
    panels. ``axes`` restricts assembly to a subset of coordinate axes.
    """
    _require_one_dimensional(spec, grid)
    if exterior.n != spec.n:
        raise ConfigurationError("exterior field dimension does not match the operator")
    if not exterior.is_bounded:
        raise ConfigurationError("exterior data needs a finite certified bound")
    chosen = range(spec.n) if axes is None else axes
    blocks = []
    correction = np.zeros(grid.shape)
    uncertainty = 0.0
    for k in chosen:
        ax = _axis_block(spec, grid, k, lattice_factor)
        if ax is None:
            continue
        blocks.append(ax)
        if exterior.is_zero:
            continue
        lines = _lines(grid, k)
        L, P = len(lines), len(ax.offsets)
        pts = np.repeat(lines[:, None, :], P, axis=1)
        pts[..., k] = grid.lattice(k, ax.offsets)[None, :]
        ext_vals = exterior.sampler(pts.reshape(-1, grid.n)).reshape(L, P)
        correction += _line_to_grid(ext_vals @ ax.coupling.T, grid, k)
        if ax.far_weight:
            far, unc = _far_integral(grid, ax, exterior, far_ppd, far_order)
            correction += ax.far_weight * far
            uncertainty += ax.far_weight * unc
    return OperatorMatrix(spec, grid, blocks, correction, uncertainty)


@dataclass
class GridFunction:
    """Nodal values on a grid, continued by the exterior field outside the box."""

    grid: Grid
    values: np.ndarray
    exterior: ScalarField
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("nodal values must be finite")
        self.values.setflags(write=False)

    @property
    def sup_norm(self) -> float:
        """max(|nodal values|, certified exterior bound)."""
        return max(float(np.max(np.abs(self.values))), self.exterior.global_bound)

    def _extended(self):
        g = self.grid
        axes = [g.lattice(k, np.arange(0, g.counts[k] + 2)) for k in range(g.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        data = self.exterior.sampler(pts).reshape(tuple(c + 2 for c in g.counts))
        data[tuple(slice(1, -1) for _ in range(g.n))] = self.values
        return RegularGridInterpolator(axes, data, method="linear")

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not hasattr(self, "_interp"):
            self._interp = self._extended()
        H = np.array(self.grid.half_widths)
        inside = np.all(np.abs(pts) <= H, axis=1)
        out = np.empty(len(pts))
        if np.any(inside):
            out[inside] = self._interp(pts[inside])
        if np.any(~inside):
            out[~inside] = self.exterior.sampler(pts[~inside])
        return out

    def as_field(self) -> ScalarField:
        return ScalarField(self.__call__, n=self.grid.n, global_bound=self.sup_norm, name="grid-function")

    def to_csv(self, path) -> None:
        pts = self.grid.points()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{k + 1}" for k in range(self.grid.n)] + ["value"])
            for p, v in zip(pts, self.values.ravel()):
                writer.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def discrete_apply(matrix: OperatorMatrix, u: GridFunction) -> np.ndarray:
    """Discrete L applied to ``u`` at the nodes: A u minus the exterior correction."""
    if u.grid.shape != matrix.grid.shape:
        raise ValueError(f"grid shape {u.grid.shape} does not match matrix {matrix.grid.shape}")
    return matrix.matvec(u.values) - matrix.rhs_correction


def _solve_direct(matrix: OperatorMatrix, rhs: np.ndarray) -> np.ndarray:
    shape = matrix.grid.shape
    eig = []
    for k in range(len(shape)):
        blocks = [ax.block for ax in matrix.axes if ax.axis == k]
        B = sum(blocks) if blocks else np.zeros((shape[k], shape[k]))
        lam, V = np.linalg.eigh(B)
        eig.append((lam, V))
    u = rhs.copy()
    for k, (_, V) in enumerate(eig):
        u = np.moveaxis(np.tensordot(V.T, u, axes=(1, k)), 0, k)
    denom = np.zeros(shape)
    for k, (lam, _) in enumerate(eig):
        sh = [1] * len(shape)
        sh[k] = -1
        denom = denom + lam.reshape(sh)
    u = u / denom
    for k, (_, V) in enumerate(eig):
        u = np.moveaxis(np.tensordot(V, u, axes=(1, k)), 0, k)
    return u


def _solve_cg(matrix: OperatorMatrix, rhs: np.ndarray) -> np.ndarray:
    N = matrix.dimension
    diag = np.zeros(matrix.grid.shape)
    for ax in matrix.axes:
        sh = [1] * matrix.grid.n
        sh[ax.axis] = -1
        diag = diag + np.diag(ax.block).reshape(sh)
    inv_diag = 1.0 / diag.ravel()
    op = LinearOperator((N, N), matvec=lambda v: matrix.matvec(v).ravel(), dtype=float)
    pre = LinearOperator((N, N), matvec=lambda v: inv_diag * v, dtype=float)
    sol, _ = cg(op, rhs.ravel(), rtol=1e-13, atol=0.0, maxiter=20 * N, M=pre)
    return sol.reshape(matrix.grid.shape)


def solve_dirichlet(
    spec: OperatorSpec,
    box: AnisotropicBox,
    f,
    exterior: ScalarField,
    resolution,
    method: str = "direct",
    matrix: Optional[OperatorMatrix] = None,
    tol: float = 1e-10,
) -> GridFunction:
    """Solve L u = f at the interior nodes with u = ``exterior`` outside the box.

    ``f`` is a field or an array of nodal values.
    ``method`` is "direct" (exact diagonalization of the Kronecker sum) or "cg".
    """
    grid = resolution if isinstance(resolution, Grid) else Grid(box, resolution)
    if matrix is None:
        matrix = assemble(spec, grid, exterior)
    if isinstance(f, ScalarField):
        f_nodes = f.sampler(grid.points())
    else:
        f_nodes = f
    rhs = np.asarray(f_nodes, dtype=float).reshape(grid.shape) + matrix.rhs_correction
    if method == "direct":
        u = _solve_direct(matrix, rhs)
    elif method == "cg":
        u = _solve_cg(matrix, rhs)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = matrix.matvec(u) - rhs
    scale = float(np.linalg.norm(rhs))
    rel = float(np.linalg.norm(res)) / scale if scale > 0 else float(np.linalg.norm(res))
    if not rel <= tol:
        raise SolverError("linear solve did not converge", rel)
    # the discrete inverse is monotone, so a rhs perturbation <= eps moves u by <= eps * max(A^{-1} 1)
    spread = 0.0
    if matrix.exterior_uncertainty > 0:
        spread = float(np.max(_solve_direct(matrix, np.ones(grid.shape)))) * matrix.exterior_uncertainty
    info = {"residual": rel, "method": method, "exterior_uncertainty": matrix.exterior_uncertainty,
            "exterior_error_bound": spread}
    return GridFunction(grid, u, exterior, info)


@dataclass
class ComparisonReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": self.violations}


def comparison_check(matrix, rtol: float = 1e-12) -> ComparisonReport:
    """Check M-matrix structure: symmetry, positive diagonal, nonpositive off-diagonals, nonnegative row sums."""
    A = matrix.to_sparse() if isinstance(matrix, OperatorMatrix) else sp.csr_matrix(matrix)
    A = A.tocoo()
    scale = float(np.max(np.abs(A.data))) if A.nnz else 1.0
    tol = rtol * scale
    found = []
    diff = (sp.csr_matrix(A) - sp.csr_matrix(A).T).tocoo()
    bad = np.abs(diff.data) > tol
    for r, c, v in zip(diff.row[bad], diff.col[bad], diff.data[bad]):
        if r < c:
            found.append({"kind": "asymmetric", "row": int(r), "col": int(c), "value": float(v)})
    off = A.row != A.col
    pos = off & (A.data > tol)
    for r, c, v in zip(A.row[pos], A.col[pos], A.data[pos]):
        found.append({"kind": "positive-off-diagonal", "row": int(r), "col": int(c), "value": float(v)})
    diag = np.asarray(sp.csr_matrix(A).diagonal())
    for r in np.nonzero(diag <= 0)[0]:
        found.append({"kind": "nonpositive-diagonal", "row": int(r), "col": int(r), "value": float(diag[r])})
    sums = np.asarray(sp.csr_matrix(A).sum(axis=1)).ravel()
    for r in np.nonzero(sums < -tol)[0]:
        found.append({"kind": "negative-row-sum", "row": int(r), "col": -1, "value": float(sums[r])})
    return ComparisonReport(found)
