"""Structured grids, quadrature weights and measure-symmetric operators.

Every second-order operator is assembled in flux form

    -L f = W^{-1} sum_i G_i^T diag(F_i) G_i f,

where ``G_i`` differentiates from nodes to the staggered flux points of axis
``i``, ``F_i`` carries ``sqrt(q) * coefficient`` times the cell volume at the
flux points and ``W`` holds the node quadrature weights.  The result is
self-adjoint and non-negative in the weighted inner product by construction.
Periodic axes use trigonometric (spectral) differentiation; bounded axes use
fourth-order finite differences with summation-by-parts closures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import GridMismatch, ResolutionTooLow
from .manifold import Coord, ManifoldSpec

MIN_POINTS = 4


def fd_weights(x0: float, xs: np.ndarray, order: int = 1) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``."""
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    scale = np.max(np.abs(xs - x0)) or 1.0
    t = (xs - x0) / scale
    vander = np.vander(t, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = np.prod(np.arange(1, order + 1))
    return np.linalg.solve(vander, rhs) / scale**order


def _wavenumbers(n: int, length: float) -> np.ndarray:
    return 2.0 * np.pi / length * np.fft.fftfreq(n, d=1.0 / n)


def fourier_diff(n: int, length: float) -> np.ndarray:
    """Collocated spectral first derivative (Nyquist mode mapped to zero)."""
    k = 1j * _wavenumbers(n, length)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return np.real(np.fft.ifft(k[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0))


def fourier_stagger(n: int, length: float) -> np.ndarray:
    """Derivative of the trigonometric interpolant sampled half a cell ahead.

    Unlike the collocated matrix this keeps the Nyquist mode, so
    ``G^T G`` reproduces the exact periodic second derivative.
    """
    h = length / n
    kk = _wavenumbers(n, length)
    mult = 1j * kk * np.exp(1j * kk * h / 2)
    if n % 2 == 0:
        mult[n // 2] = -np.pi * n / length
    return np.real(np.fft.ifft(mult[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0))


@dataclass(frozen=True)
class Axis:
    """One-dimensional factor of a tensor-product grid.

    ``grad`` maps nodes to the staggered flux points, ``deriv`` is the
    collocated first derivative.  Reflections across an end whose ghost
    values live on the same line are folded into these matrices; ends that
    continue through a coordinate singularity (a pole) keep their ghost
    coupling in ``grad_ghost``/``deriv_ghost`` keyed by end, to be combined
    with a permutation of the other axes.
    """

    coord: Coord
    nodes: np.ndarray
    weights: np.ndarray
    flux_points: np.ndarray
    flux_weights: np.ndarray
    grad: np.ndarray
    deriv: np.ndarray
    spectral: bool
    lower_singular: bool = False
    upper_singular: bool = False
    grad_ghost: dict = field(default_factory=dict)
    deriv_ghost: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.nodes.size

    def lowpass(self, fraction: float = 0.25) -> np.ndarray:
        """Orthonormal (Euclidean) basis of smooth, boundary-compatible modes."""
        c = self.coord
        s = (self.nodes - c.lower) / c.span
        k = max(1, int(round(fraction * self.n)))
        if self.spectral:
            cols = [np.ones_like(s)]
            j = 1
            while len(cols) < k:
                cols.append(np.cos(2 * np.pi * j * s))
                if len(cols) < k:
                    cols.append(np.sin(2 * np.pi * j * s))
                j += 1
        elif c.bc == "dirichlet" and not (self.lower_singular or self.upper_singular):
            cols = [np.sin(np.pi * (j + 1) * s) for j in range(k)]
        elif c.bc == "dirichlet" and self.lower_singular and not self.upper_singular:
            cols = [np.cos(np.pi * (j + 0.5) * s) for j in range(k)]
        elif c.bc == "dirichlet" and self.upper_singular and not self.lower_singular:
            cols = [np.sin(np.pi * (j + 0.5) * s) for j in range(k)]
        else:
            cols = [np.cos(np.pi * j * s) for j in range(k)]
        q, _ = np.linalg.qr(np.stack(cols, axis=1))
        return q


_STAGGER4 = np.array([1.0, -27.0, 27.0, -1.0]) / 24.0
_CENTER4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_CLOSURE_FACES = np.array([0.5, 7.0 / 6.0, 23.0 / 24.0])
_CLOSURE_ROWS = 3
_CLOSURE_WIDTH = 6


@lru_cache(maxsize=1)
def _closure() -> tuple[np.ndarray, np.ndarray]:
    """Boundary rows of G and node weights for a cell-centred end.

    Unit spacing, nodes at j + 1/2, faces at k including the boundary face 0.
    Constraints: the closure rows differentiate quadratics exactly and
    ``-W^{-1} G^T H`` differentiates quadratic fluxes vanishing at the
    boundary exactly.  The remaining freedom minimises the cubic residual.
    Mismatched signs between ghost values and boundary-odd volume factors
    make mirror ghosts inconsistent at coordinate singularities; this
    closure never reaches across the end.
    """
    r, s, m = _CLOSURE_ROWS, _CLOSURE_WIDTH, 24
    x = np.arange(m) + 0.5
    faces = np.arange(m, dtype=float)
    hf = np.ones(m)
    hf[:3] = _CLOSURE_FACES
    row0 = fd_weights(0.0, x[:3])
    nu = r * s + s

    def unpack(u):
        g = np.zeros((m, m))
        g[0, :3] = row0
        g[1 : r + 1, :s] = u[: r * s].reshape(r, s)
        for k in range(r + 1, m - 1):
            g[k, k - 2 : k + 2] = _STAGGER4
        w = np.ones(m)
        w[:s] = u[r * s :]
        return g, w

    def residual(u, degrees):
        g, w = unpack(u)
        out = []
        for d in degrees:
            exact = d * faces ** (d - 1) if d else np.zeros(m)
            out.append((g @ x**d - exact)[1 : r + 1])
            if d:
                out.append((-(g.T @ (hf * faces**d)) - w * d * x ** (d - 1))[: s + 2])
        return np.concatenate(out)

    def linear(degrees):
        b0 = residual(np.zeros(nu), degrees)
        return np.stack([residual(e, degrees) - b0 for e in np.eye(nu)], axis=1), -b0

    a, b = linear((0, 1, 2))
    c, d = linear((3,))
    u0 = np.linalg.lstsq(a, b, rcond=None)[0]
    null = scipy.linalg.null_space(a)
    u = u0 + null @ np.linalg.lstsq(c @ null, d - c @ u0, rcond=None)[0]
    g, w = unpack(u)
    return g[: r + 1, :s].copy(), w[:s].copy()


def _fd_axis(coord: Coord, n: int, lower_sing: bool, upper_sing: bool, cross=(False, False)) -> Axis:
    a, b = coord.lower, coord.upper
    # Dirichlet ends carry an eliminated zero node on the boundary (odd mirror
    # ghosts).  Neumann and singular ends are cell-centred with a closure that
    # includes the boundary face; singular ends get zero flux from sqrt(q).
    dir_lo = coord.bc == "dirichlet" and not lower_sing
    dir_hi = coord.bc == "dirichlet" and not upper_sing
    closed = (not dir_lo, not dir_hi)
    need = max(MIN_POINTS, _CLOSURE_WIDTH * sum(closed) + (2 if any(closed) else 0))
    if n < need:
        raise ResolutionTooLow(f"axis {coord.name!r} needs at least {need} points")
    h = (b - a) / (n + 0.5 * dir_lo + 0.5 * dir_hi)
    x0 = a + (h if dir_lo else 0.5 * h)
    nodes = x0 + h * np.arange(n)

    def resolve(t: int):
        """Lattice position t -> (node index, sign, end) or None for a zero value."""
        if 0 <= t < n:
            return t, 1.0, None
        if t < 0:
            x = 2 * a - (x0 + t * h)
            end, odd = "lower", dir_lo
        else:
            x = 2 * b - (x0 + t * h)
            end, odd = "upper", dir_hi
        j = int(round((x - x0) / h))
        if odd and (j < 0 or j >= n):
            return None  # the boundary node itself
        if not 0 <= j < n:
            raise ResolutionTooLow(f"axis {coord.name!r} too coarse for its stencil")
        return j, (-1.0 if odd else 1.0), end

    use_ghost = {"lower": cross[0], "upper": cross[1]}

    def build(rows_t, offsets, coeffs, nrows):
        main = np.zeros((nrows, n))
        ghosts = {e: np.zeros((nrows, n)) for e, on in use_ghost.items() if on}
        for r, t0 in enumerate(rows_t):
            for off, c in zip(offsets, coeffs):
                hit = resolve(t0 + off)
                if hit is None:
                    continue
                j, sign, end = hit
                target = ghosts[end] if end in ghosts else main
                target[r, j] += sign * c / h
        return main, ghosts

    # Faces sit half a cell from nodes: on the boundary at closed ends, half a
    # cell inside at Dirichlet ends.
    flux_t = list(range(-1, n))
    flux = x0 + (np.array(flux_t) + 0.5) * h
    grad, _ = build(flux_t, (-1, 0, 1, 2), _STAGGER4, len(flux_t))
    flux_w = np.full(len(flux_t), h)
    node_w = np.full(n, h)
    rows, wts = _closure()
    k = rows.shape[0]
    if closed[0]:
        grad[:k] = 0.0
        grad[:k, : rows.shape[1]] = rows / h
        flux_w[:3] = _CLOSURE_FACES * h
        node_w[: wts.size] = wts * h
    if closed[1]:
        grad[-k:] = 0.0
        grad[-k:, n - rows.shape[1] :] = -rows[::-1, ::-1] / h
        flux_w[-3:] = _CLOSURE_FACES[::-1] * h
        node_w[n - wts.size :] = wts[::-1] * h
    deriv, deriv_ghost = build(range(n), (-2, -1, 0, 1, 2), _CENTER4, n)
    return Axis(
        coord=coord,
        nodes=nodes,
        weights=node_w,
        flux_points=flux,
        flux_weights=flux_w,
        grad=grad,
        deriv=deriv,
        spectral=False,
        lower_singular=lower_sing,
        upper_singular=upper_sing,
        grad_ghost={},
        deriv_ghost=deriv_ghost,
    )


def _circulant(n: int, offsets, coeffs, h: float) -> np.ndarray:
    m = np.zeros((n, n))
    for r in range(n):
        for off, c in zip(offsets, coeffs):
            m[r, (r + off) % n] += c / h
    return m


def _periodic_axis(coord: Coord, n: int, spectral: bool = True) -> Axis:
    if n < MIN_POINTS:
        raise ResolutionTooLow(f"axis {coord.name!r} needs at least {MIN_POINTS} points")
    h = coord.span / n
    nodes = coord.lower + h * np.arange(n)
    if not spectral:
        return Axis(
            coord=coord,
            nodes=nodes,
            weights=np.full(n, h),
            flux_points=nodes + 0.5 * h,
            flux_weights=np.full(n, h),
            grad=_circulant(n, (-1, 0, 1, 2), _STAGGER4, h),
            deriv=_circulant(n, (-2, -1, 0, 1, 2), _CENTER4, h),
            spectral=False,
        )
    return Axis(
        coord=coord,
        nodes=nodes,
        weights=np.full(n, h),
        flux_points=nodes + 0.5 * h,
        flux_weights=np.full(n, h),
        grad=fourier_stagger(n, coord.span),
        deriv=fourier_diff(n, coord.span),
        spectral=True,
    )


@dataclass(frozen=True, eq=False)
class ChartGrid:
    spec: ManifoldSpec
    points_per_axis: tuple[int, ...]
    axes: tuple[Axis, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points_per_axis

    @property
    def size(self) -> int:
        return int(np.prod(self.points_per_axis))

    @property
    def bc(self) -> tuple[str, ...]:
        return tuple(c.bc for c in self.spec.coords)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (size, dim), row-major over axes."""
        mesh = np.meshgrid(*[ax.nodes for ax in self.axes], indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    @cached_property
    def sqrt_det(self) -> np.ndarray:
        return np.sqrt(np.prod(self.spec.metric.diag_at(self.nodes), axis=1))

    @cached_property
    def weights(self) -> np.ndarray:
        return self.sqrt_det * _outer([ax.weights for ax in self.axes])

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        """Weighted inner product, conjugate-linear in ``a``."""
        return np.vdot(a, self.weights * b)

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(v) ** 2)))

    def flux_nodes(self, i: int) -> np.ndarray:
        """Coordinates of the staggered points of axis ``i``."""
        pts = [ax.nodes for ax in self.axes]
        pts[i] = self.axes[i].flux_points
        mesh = np.meshgrid(*pts, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def flux_cell_weights(self, i: int) -> np.ndarray:
        ws = [ax.weights for ax in self.axes]
        ws[i] = self.axes[i].flux_weights
        return _outer(ws)

    def lift(self, mat, i: int) -> sp.csr_matrix:
        """Embed a 1-D matrix acting on axis ``i`` into the full grid."""
        out = None
        for j, ax in enumerate(self.axes):
            factor = sp.csr_matrix(mat) if j == i else sp.identity(ax.n, format="csr")
            out = factor if out is None else sp.kron(out, factor, format="csr")
        return out

    def _continuation_perm(self, mapping) -> sp.csr_matrix:
        idx = np.indices(self.shape).reshape(self.spec.dim, -1)
        src = idx.copy()
        for axis, op in mapping:
            n = self.shape[axis]
            if op == "shift_half":
                if n % 2:
                    raise ResolutionTooLow(f"axis {axis} needs an even point count to continue through a pole")
                src[axis] = (idx[axis] + n // 2) % n
            elif op == "flip":
                src[axis] = n - 1 - idx[axis]
            else:
                raise ValueError(f"unknown continuation {op!r}")
        cols = np.ravel_multi_index(tuple(src), self.shape)
        return sp.csr_matrix((np.ones(self.size), (np.arange(self.size), cols)), shape=(self.size, self.size))

    @cached_property
    def _full_cache(self) -> dict:
        return {}

    def _axis_full(self, i: int, which: str) -> sp.csr_matrix:
        key = (which, i)
        if key not in self._full_cache:
            ax = self.axes[i]
            main, ghosts = (ax.grad, ax.grad_ghost) if which == "grad" else (ax.deriv, ax.deriv_ghost)
            out = self.lift(main, i)
            maps = self.spec.continuation[i] if self.spec.continuation else (None, None)
            for end, g in ghosts.items():
                mapping = maps[0] if end == "lower" else maps[1]
                out = out + self.lift(g, i) @ self._continuation_perm(mapping)
            self._full_cache[key] = sp.csr_matrix(out)
        return self._full_cache[key]

    def grad_matrix(self, i: int) -> sp.csr_matrix:
        """Nodes -> staggered points of axis ``i`` on the full grid."""
        return self._axis_full(i, "grad")

    def deriv_matrix(self, i: int) -> sp.csr_matrix:
        """Collocated derivative along axis ``i`` on the full grid."""
        return self._axis_full(i, "deriv")

    def lowpass_basis(self, fraction: float = 0.25) -> list[np.ndarray]:
        return [ax.lowpass(fraction) for ax in self.axes]

    def random_bandlimited(self, rng: np.random.Generator, fraction: float = 0.25) -> np.ndarray:
        """Random complex vector built from the lowest modes of every axis, unit weighted norm."""
        bases = self.lowpass_basis(fraction)
        shape = tuple(b.shape[1] for b in bases)
        coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        v = coef
        for axis, b in enumerate(bases):
            v = np.moveaxis(np.tensordot(b, np.moveaxis(v, axis, 0), axes=(1, 0)), 0, axis)
        v = v.reshape(-1)
        return v / self.norm(v)


def _outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(1)
    for v in vectors:
        out = np.outer(out, v).reshape(-1)
    return out


def build_grid(spec: ManifoldSpec, points_per_axis, spectral: bool = True) -> ChartGrid:
    """Grid over the chart; ``spectral=False`` puts periodic axes on 4th-order FD too."""
    if np.isscalar(points_per_axis):
        points_per_axis = [int(points_per_axis)] * spec.dim
    npts = tuple(int(n) for n in points_per_axis)
    if len(npts) != spec.dim:
        raise ResolutionTooLow(f"need {spec.dim} resolutions, got {len(npts)}")
    if any(n < MIN_POINTS for n in npts):
        raise ResolutionTooLow(f"every axis needs at least {MIN_POINTS} points, got {npts}")
    axes = []
    cont = spec.continuation or ((None, None),) * spec.dim
    for c, n, (lo, hi), maps in zip(spec.coords, npts, spec.singular_ends, cont):
        if c.bc == "periodic":
            axes.append(_periodic_axis(c, n, spectral))
        else:
            axes.append(_fd_axis(c, n, lo, hi, cross=(maps[0] is not None, maps[1] is not None)))
    return ChartGrid(spec=spec, points_per_axis=npts, axes=tuple(axes))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    matrix: sp.spmatrix
    grid: ChartGrid
    hermitian_wrt_measure: bool = False
    stencil_radius: Optional[float] = None
    name: str = ""

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, v):
        return self.matrix @ v

    def dense(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def adjoint(self) -> sp.spmatrix:
        """Adjoint with respect to the weighted inner product."""
        w = self.grid.weights
        return sp.diags(1.0 / w) @ sp.csr_matrix(self.matrix).conj().T @ sp.diags(w)


def _same_grid(*ops) -> ChartGrid:
    g = ops[0].grid
    for op in ops[1:]:
        if op.grid is not g and (op.grid.spec is not g.spec or op.grid.shape != g.shape):
            raise GridMismatch("operators live on different grids")
    return g


def assemble_flux_form(grid: ChartGrid, coefficient: Callable[[np.ndarray], np.ndarray], name: str) -> DiscreteOperator:
    """Assemble ``-(1/sqrt q) d_i(sqrt q c^i d_i)`` for diagonal ``c``.

    ``coefficient(points)`` returns the (..., n) diagonal of ``c`` at points.
    The returned matrix is the positive semi-definite operator.
    """
    spec = grid.spec
    total = sp.csr_matrix((grid.size, grid.size))
    inv_w = sp.diags(1.0 / grid.weights)
    for i in range(spec.dim):
        pts = grid.flux_nodes(i)
        c = coefficient(pts)[:, i]
        if not np.any(c):
            continue
        sq = np.sqrt(np.prod(spec.metric.diag_at(pts), axis=1))
        with np.errstate(invalid="ignore"):
            flux = np.where(sq > 0, sq * c, 0.0) * grid.flux_cell_weights(i)
        g = grid.grad_matrix(i)
        total = total + g.T @ sp.diags(flux) @ g
    mat = sp.csr_matrix(inv_w @ total)
    mat.eliminate_zeros()
    return DiscreteOperator(matrix=mat, grid=grid, hermitian_wrt_measure=True, name=name)


def assemble_laplace_beltrami(grid: ChartGrid) -> DiscreteOperator:
    """Discrete Laplace-Beltrami operator (negative semi-definite)."""
    def inv_metric(pts):
        # Boundary faces at a coordinate singularity make unused components infinite.
        with np.errstate(divide="ignore"):
            return 1.0 / grid.spec.metric.diag_at(pts)

    pos = assemble_flux_form(grid, inv_metric, "laplacian")
    return DiscreteOperator(matrix=-pos.matrix, grid=grid, hermitian_wrt_measure=True, name="laplacian")


def assemble_second_order(grid: ChartGrid, tensor, name: str = "tensor") -> DiscreteOperator:
    """Symmetric quantization ``-(1/sqrt q) d_i(sqrt q k^ii d_i)`` of a diagonal rank-2 tensor."""
    return assemble_flux_form(grid, tensor.diagonal_at, name)


def assemble_first_order(grid: ChartGrid, field, name: str = "field") -> DiscreteOperator:
    """Hermitian part of ``-i K^j d_j`` in the weighted inner product."""
    comps = field.at(grid.nodes)
    p = sp.csr_matrix((grid.size, grid.size), dtype=complex)
    for j in range(grid.spec.dim):
        if not np.any(comps[:, j]):
            continue
        p = p + sp.diags(comps[:, j]) @ grid.deriv_matrix(j)
    p = -1j * p
    w = grid.weights
    adj = sp.diags(1.0 / w) @ p.conj().T @ sp.diags(w)
    mat = sp.csr_matrix(0.5 * (p + adj))
    mat.eliminate_zeros()
    return DiscreteOperator(matrix=mat, grid=grid, hermitian_wrt_measure=True, name=name)


def multiplication_operator(grid: ChartGrid, values: np.ndarray, name: str = "multiply") -> DiscreteOperator:
    return DiscreteOperator(matrix=sp.diags(np.asarray(values)).tocsr(), grid=grid,
                            hermitian_wrt_measure=bool(np.all(np.isreal(values))), stencil_radius=0, name=name)


@dataclass(frozen=True)
class Locality:
    local: bool
    stencil_radius: Optional[int] = None
    pseudo_local_axes: tuple[int, ...] = ()

    def __str__(self):
        if not self.local:
            return "nonlocal"
        extra = f", pseudo-local on axes {list(self.pseudo_local_axes)}" if self.pseudo_local_axes else ""
        return f"local({self.stencil_radius}{extra})"


def locality_check(op: DiscreteOperator, r_max: int = 6, rtol: float = 1e-12) -> Locality:
    """Support-based surrogate of the finite-order differential criterion.

    An entry is admissible when it couples nodes differing along a single
    axis, by at most ``r_max`` positions on finite-difference axes or
    anywhere on a spectral axis (reported as pseudo-local).  On a single
    spectral axis this cannot tell a dense commutant from differentiation.
    """
    grid = op.grid
    m = sp.coo_matrix(op.matrix)
    if m.nnz == 0:
        return Locality(True, 0)
    big = np.abs(m.data) > rtol * np.max(np.abs(m.data))
    rows, cols = m.row[big], m.col[big]
    ri = np.array(np.unravel_index(rows, grid.shape))
    ci = np.array(np.unravel_index(cols, grid.shape))
    diff = np.abs(ri - ci)
    for a, ax in enumerate(grid.axes):
        if ax.coord.bc == "periodic":
            diff[a] = np.minimum(diff[a], ax.n - diff[a])
    moved = diff > 0
    if np.any(moved.sum(axis=0) > 1):
        return Locality(False)
    radius = 0
    pseudo = []
    for a, ax in enumerate(grid.axes):
        d = diff[a].max(initial=0)
        if ax.spectral:
            if d > 0:
                pseudo.append(a)
        elif d > r_max:
            return Locality(False)
        else:
            radius = max(radius, int(d))
    return Locality(True, radius, tuple(pseudo))


def weighted_symmetry_defect(op: DiscreteOperator, rng: np.random.Generator, pairs: int = 20) -> float:
    """max |<Av,u> - <v,Au>| / (|A| |u| |v|) over random pairs."""
    g = op.grid
    w = g.weights
    a = op.matrix
    scale = sp.linalg.norm(a, ord=1) if sp.issparse(a) else np.linalg.norm(a, 1)
    worst = 0.0
    for _ in range(pairs):
        u = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        v = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        lhs = np.vdot(a @ v, w * u)
        rhs = np.vdot(v, w * (a @ u))
        worst = max(worst, abs(lhs - rhs) / (scale * g.norm(u) * g.norm(v)))
    return worst
