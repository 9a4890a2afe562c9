"""Killing vectors and rank-2 Killing tensors, verified pointwise.

Components are contravariant coordinate expressions.  Residuals lower
indices with the metric and use Christoffel symbols from
:func:`gft.manifold.evaluate_metric`; partial derivatives are central
differences with step ``1e-5 * span`` per coordinate.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DimensionUnsupported, NonDiagonalMetric, NotSeparable, UnsupportedRank
from .expr import Expr, parse_expr
from .manifold import ManifoldSpec, _check_point, evaluate_metric

log = logging.getLogger(__name__)

FD_STEP = 1e-5
ROBERTSON_STEP = 2e-3
ROBERTSON_TOL = 1e-6


def _compile(spec: ManifoldSpec, comps) -> tuple:
    out = []
    for c in comps:
        if isinstance(c, (Expr,)) or callable(c):
            out.append(c)
        else:
            out.append(parse_expr(str(c), spec.names))
    return tuple(out)


def _eval(funcs, points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cols = [pts[:, i] for i in range(pts.shape[1])]
    return np.stack([np.broadcast_to(np.asarray(f(*cols), dtype=float), (pts.shape[0],)) for f in funcs], axis=1)


@dataclass(frozen=True, eq=False)
class KillingField:
    """Vector field ``K = K^i d_i`` on a chart."""

    components: tuple
    chart: ManifoldSpec
    name: str = "K"

    @classmethod
    def from_strings(cls, chart: ManifoldSpec, comps: Sequence[str], name: str = "K") -> "KillingField":
        if len(comps) != chart.dim:
            raise DimensionUnsupported(f"{chart.dim} components expected, got {len(comps)}")
        return cls(_compile(chart, comps), chart, name)

    @property
    def rank(self) -> int:
        return 1

    def at(self, points) -> np.ndarray:
        """Components at points, shape (N, n)."""
        return _eval(self.components, points)

    def tensor_at(self, point) -> np.ndarray:
        return self.at(np.asarray(point)[None, :])[0]


@dataclass(frozen=True, eq=False)
class KillingTensor2:
    """Symmetric contravariant tensor ``kappa^{ij}``; ``components[i][j]``."""

    components: tuple
    chart: ManifoldSpec
    name: str = "kappa"

    def __post_init__(self):
        n = self.chart.dim
        if len(self.components) != n or any(len(r) != n for r in self.components):
            raise DimensionUnsupported(f"kappa must be {n}x{n}")

    @classmethod
    def from_strings(cls, chart: ManifoldSpec, rows: Sequence[Sequence[str]], name: str = "kappa") -> "KillingTensor2":
        n = chart.dim
        comp = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                a, b = str(rows[i][j]).replace(" ", ""), str(rows[j][i]).replace(" ", "")
                if a != b:
                    raise NonDiagonalMetric(f"kappa[{i}][{j}] != kappa[{j}][{i}]")
                comp[i][j] = parse_expr(rows[i][j], chart.names)
        return cls(tuple(tuple(r) for r in comp), chart, name)

    @classmethod
    def diagonal(cls, chart: ManifoldSpec, diag: Sequence[str], name: str = "kappa") -> "KillingTensor2":
        n = chart.dim
        rows = [[diag[i] if i == j else "0" for j in range(n)] for i in range(n)]
        return cls.from_strings(chart, rows, name)

    @classmethod
    def inverse_metric(cls, chart: ManifoldSpec) -> "KillingTensor2":
        n = chart.dim
        rows = [[f"1/({chart.metric.diagonal[i].source})" if i == j else "0" for j in range(n)] for i in range(n)]
        return cls.from_strings(chart, rows, "metric")

    @property
    def rank(self) -> int:
        return 2

    def is_diagonal(self) -> bool:
        n = self.chart.dim
        return all(
            isinstance(self.components[i][j], Expr) and self.components[i][j].source.strip() in ("0", "0.0")
            for i in range(n)
            for j in range(n)
            if i != j
        )

    def tensor_at(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        n = self.chart.dim
        return np.array([[float(self.components[i][j](*p)) for j in range(n)] for i in range(n)])

    def diagonal_at(self, points) -> np.ndarray:
        """Diagonal entries at points, shape (N, n); used by flux-form assembly."""
        if not self.is_diagonal():
            raise NonDiagonalMetric(f"{self.name}: only diagonal tensors can be quantized")
        # coordinate singularities on boundary faces evaluate to inf; callers mask them
        with np.errstate(divide="ignore", invalid="ignore"):
            return _eval([self.components[i][i] for i in range(self.chart.dim)], points)


Tensor = Union[KillingField, KillingTensor2]


def _steps(spec: ManifoldSpec, scale: float) -> np.ndarray:
    return np.array([scale * c.span for c in spec.coords])


def _partials(fn: Callable[[np.ndarray], np.ndarray], spec: ManifoldSpec, p: np.ndarray, scale=FD_STEP) -> np.ndarray:
    """Central differences: result[k, ...] = d fn / d x^k at p."""
    h = _steps(spec, scale)
    out = []
    for k in range(spec.dim):
        e = np.zeros(spec.dim)
        e[k] = h[k]
        out.append((fn(p + e) - fn(p - e)) / (2 * h[k]))
    return np.array(out)


def _points(spec: ManifoldSpec, sample_points) -> list[np.ndarray]:
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    return [_check_point(spec, p) for p in pts]


def killing_vector_residual(field: KillingField, sample_points) -> float:
    """max |grad_(i K_j)| over points and index pairs."""
    spec = field.chart
    worst = 0.0

    def lowered(x):
        return evaluate_metric(spec, x).q @ field.tensor_at(x)

    for p in _points(spec, sample_points):
        m = evaluate_metric(spec, p)
        k_low = m.q @ field.tensor_at(p)
        d = _partials(lowered, spec, p)  # d[i, j] = d_i K_j
        nabla = d - np.einsum("kij,k->ij", m.christoffel, k_low)
        worst = max(worst, float(np.max(np.abs(0.5 * (nabla + nabla.T)))))
    return worst


def _symmetrize(t: np.ndarray) -> np.ndarray:
    perms = list(itertools.permutations(range(t.ndim)))
    return sum(np.transpose(t, p) for p in perms) / len(perms)


def killing_tensor_residual(tensor: KillingTensor2, sample_points) -> float:
    """max |grad_(i K_jk)| with ``K_jk`` the lowered tensor."""
    spec = tensor.chart
    worst = 0.0

    def lowered(x):
        q = evaluate_metric(spec, x).q
        return q @ tensor.tensor_at(x) @ q

    for p in _points(spec, sample_points):
        m = evaluate_metric(spec, p)
        k_low = m.q @ tensor.tensor_at(p) @ m.q
        d = _partials(lowered, spec, p)  # d[i, j, k]
        g = m.christoffel
        nabla = d - np.einsum("lij,lk->ijk", g, k_low) - np.einsum("lik,jl->ijk", g, k_low)
        worst = max(worst, float(np.max(np.abs(_symmetrize(nabla)))))
    return worst


def _as_array(obj: Tensor, x: np.ndarray) -> np.ndarray:
    return obj.tensor_at(x)


def sn_bracket_residual(a: Tensor, b: Tensor, sample_points) -> float:
    """Largest component of the Schouten-Nijenhuis bracket over the points.

    ``[A, B] = Sym(r A^{j..} d_j B^{..} - s B^{j..} d_j A^{..})`` for ranks
    ``r, s``; partial derivatives suffice since the Christoffel terms cancel.
    """
    for t in (a, b):
        if getattr(t, "rank", None) not in (1, 2):
            raise UnsupportedRank(f"rank {getattr(t, 'rank', '?')} not supported (1 or 2 only)")
    spec = a.chart
    r, s = a.rank, b.rank
    worst = 0.0
    for p in _points(spec, sample_points):
        ta, tb = _as_array(a, p), _as_array(b, p)
        da = _partials(lambda x: _as_array(a, x), spec, p)
        db = _partials(lambda x: _as_array(b, x), spec, p)
        term1 = r * np.tensordot(ta, db, axes=([0], [0]))
        term2 = s * np.tensordot(tb, da, axes=([0], [0]))
        bracket = _symmetrize(term1) - _symmetrize(term2)
        worst = max(worst, float(np.max(np.abs(bracket))))
    return worst


@dataclass(frozen=True, eq=False)
class OneForm:
    """Covector ``e = e_i dx^i`` on a chart."""

    components: tuple
    chart: ManifoldSpec

    @classmethod
    def from_strings(cls, chart: ManifoldSpec, comps: Sequence[str]) -> "OneForm":
        return cls(_compile(chart, comps), chart)

    def at(self, x: np.ndarray) -> np.ndarray:
        return _eval(self.components, np.asarray(x)[None, :])[0]


def frobenius_residual(oneform: OneForm, sample_points) -> float:
    """max |eps^{ijk} e_i d_j e_k|: zero iff ``e ^ de = 0`` (integrable)."""
    spec = oneform.chart
    n = spec.dim
    if n > 3:
        raise DimensionUnsupported(f"the wedge test is implemented for n <= 3, got {n}")
    if n < 3:
        log.info("frobenius_residual: e ^ de is a %d+1 form on a %d-manifold and vanishes identically", n, n)
        return 0.0
    worst = 0.0
    for p in _points(spec, sample_points):
        e = oneform.at(p)
        d = _partials(oneform.at, spec, p)  # d[j, k] = d_j e_k
        total = 0.0
        for i, j, k in itertools.permutations(range(3)):
            sign = np.linalg.det(np.eye(3)[[i, j, k]])
            total += sign * e[i] * d[j, k]
        worst = max(worst, abs(total))
    return worst


def eigen_covectors(tensor: KillingTensor2, point) -> np.ndarray:
    """Unit covectors ``e = q v`` for the eigenvectors ``v`` of ``kappa^i_j``, rows."""
    m = evaluate_metric(tensor.chart, point)
    mixed = tensor.tensor_at(point) @ m.q
    vals, vecs = np.linalg.eig(mixed)
    order = np.argsort(vals.real)
    cov = (m.q @ np.real(vecs[:, order])).T
    return cov / np.linalg.norm(cov, axis=1, keepdims=True)


def stackel_frobenius_residual(tensor: KillingTensor2, sample_points) -> float:
    """Largest ``e ^ de`` over the eigen-covector fields of a rank-2 tensor.

    A diagonal tensor has the coordinate covectors ``q_ii dx^i`` as eigen
    covectors (degenerate eigenvalues included), so the check is taken on
    those; otherwise eigenvectors are sign-aligned between FD stencil points
    and need distinct eigenvalues.
    """
    spec = tensor.chart
    n = spec.dim
    if n > 3:
        raise DimensionUnsupported(f"the wedge test is implemented for n <= 3, got {n}")
    if n < 3:
        return frobenius_residual(OneForm.from_strings(spec, ["1"] * n), sample_points)
    worst = 0.0
    if tensor.is_diagonal():
        for i in range(n):
            comps = ["0"] * n
            comps[i] = spec.metric.diagonal[i].source
            worst = max(worst, frobenius_residual(OneForm.from_strings(spec, comps), sample_points))
        return worst
    for p in _points(spec, sample_points):
        ref = eigen_covectors(tensor, p)
        for a in range(n):

            def field(x, a=a):
                e = eigen_covectors(tensor, x)[a]
                return e if np.dot(e, ref[a]) >= 0 else -e

            d = _partials(field, spec, p)
            e = ref[a]
            total = sum(
                np.linalg.det(np.eye(3)[[i, j, k]]) * e[i] * d[j, k] for i, j, k in itertools.permutations(range(3))
            )
            worst = max(worst, abs(total))
    return worst


@dataclass(frozen=True)
class RobertsonResult:
    separable: bool
    violations: tuple[tuple[int, int, tuple[float, ...], float], ...]
    max_value: float


def _require_diagonal(spec: ManifoldSpec):
    if getattr(spec.metric, "diagonal", None) is None:
        raise NonDiagonalMetric("a diagonal metric is required")


def _mixed_partial(f: Callable[[np.ndarray], float], p: np.ndarray, i: int, j: int, h: np.ndarray) -> float:
    """Fourth-order d_i d_j f for i != j (tensor product of 5-point stencils)."""
    w = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}
    total = 0.0
    for a, wa in w.items():
        for b, wb in w.items():
            x = p.copy()
            x[i] += a * h[i]
            x[j] += b * h[j]
            total += wa * wb * f(x)
    return total / (144.0 * h[i] * h[j])


def robertson_check(spec: ManifoldSpec, sample_points, tol: float = ROBERTSON_TOL) -> RobertsonResult:
    """Evaluate ``d_i d_j ln(sqrt|q| q^{ii})`` for i != j at each point."""
    _require_diagonal(spec)
    n = spec.dim
    h = _steps(spec, ROBERTSON_STEP)
    violations = []
    worst = 0.0
    for p in _points(spec, sample_points):
        for i in range(n):

            def f(x, i=i):
                d = spec.metric.diag_at(x)
                return math.log(math.sqrt(abs(np.prod(d))) / d[i])

            for j in range(n):
                if j == i:
                    continue
                val = _mixed_partial(f, p, i, j, h)
                worst = max(worst, abs(val))
                if abs(val) > tol:
                    violations.append((i, j, tuple(float(x) for x in p), float(val)))
    return RobertsonResult(not violations, tuple(violations), worst)


def r_separation_factor(spec: ManifoldSpec, point) -> tuple[float, list[float]]:
    """``R = prod q_i^{-1/4}`` and the potentials ``V_i`` of the R-separated ODEs.

    ``V_i = (1 / 4 q_i) * (0.5 (d_i ln q_i)^2 - d_i^2 ln q_i)``.
    """
    _require_diagonal(spec)
    p = _check_point(spec, point)
    check = robertson_check(spec, p[None, :])
    if not check.separable:
        raise NotSeparable(f"Robertson condition fails at {tuple(p)} (max {check.max_value:.3e})")
    d = spec.metric.diag_at(p)
    h = _steps(spec, ROBERTSON_STEP)
    big_r = float(np.prod(d ** -0.25))
    pots = []
    for i in range(spec.dim):
        e = np.zeros(spec.dim)
        e[i] = h[i]
        lq = lambda x, i=i: math.log(spec.metric.diag_at(x)[i])
        f = [lq(p + k * e) for k in (-2, -1, 0, 1, 2)]
        d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h[i])
        d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h[i] ** 2)
        pots.append(float(0.25 / d[i] * (0.5 * d1**2 - d2)))
    return big_r, pots


# --- torus flows ----------------------------------------------------------------

TWO_PI = 2.0 * math.pi
CLOSURE_TOL = 1e-12


@dataclass(frozen=True)
class FlowTrace:
    slope_tan_eps: float
    points: np.ndarray  # rows (t, theta, phi), angles reduced mod 2 pi
    closed: bool
    winding: Optional[tuple[int, int]]
    section_gaps: np.ndarray
    wraps: int

    @property
    def max_gap(self) -> float:
        return float(self.section_gaps.max()) if self.section_gaps.size else TWO_PI


def _rational(slope: float, max_den: int) -> Optional[tuple[int, int]]:
    frac = Fraction(slope).limit_denominator(max_den)
    if abs(float(frac) - slope) <= CLOSURE_TOL * max(1.0, abs(slope)):
        return frac.numerator, frac.denominator
    return None


def integrate_flow(
    slope_tan_eps: float,
    start: tuple[float, float] = (0.0, 0.0),
    max_wraps: int = 100,
    samples_per_wrap: int = 64,
) -> FlowTrace:
    """Closed-form orbit of the unit field (cos eps, sin eps) on the flat torus.

    A wrap is one full turn in theta.  The orbit closes when tan eps equals
    p/q with q <= max_wraps (continued-fraction reconstruction).
    """
    if max_wraps < 1:
        raise ValueError("max_wraps must be >= 1")
    slope = float(slope_tan_eps)
    eps = math.atan(slope)
    c, s = math.cos(eps), math.sin(eps)
    th0, ph0 = float(start[0]), float(start[1])
    wind = _rational(slope, max_wraps)
    wraps = wind[1] if wind else max_wraps
    period = TWO_PI / c
    t = np.linspace(0.0, wraps * period, wraps * samples_per_wrap + 1)
    pts = np.column_stack([t, np.mod(th0 + c * t, TWO_PI), np.mod(ph0 + s * t, TWO_PI)])
    # crossings of theta = 0 (mod 2 pi)
    k0 = math.ceil(th0 / TWO_PI - 1e-15)
    ks = np.arange(k0, k0 + wraps)
    phis = np.mod(ph0 + (TWO_PI * ks - th0) * slope, TWO_PI)
    srt = np.sort(phis)
    gaps = np.diff(np.concatenate([srt, [srt[0] + TWO_PI]]))
    return FlowTrace(slope, pts, wind is not None, wind, gaps, wraps)


def flow_endpoint_defect(trace: FlowTrace, start: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float]:
    """Distance mod 2 pi between the last and first orbit points, per angle."""
    out = []
    for col, s0 in ((1, start[0]), (2, start[1])):
        d = np.mod(trace.points[-1, col] - np.mod(s0, TWO_PI), TWO_PI)
        out.append(float(min(d, TWO_PI - d)))
    return out[0], out[1]


def rotated_masa_labels(eps: float, labels) -> tuple[np.ndarray, np.ndarray]:
    """Rotate integer labels: m' = m cos eps + n sin eps, n' = -m sin eps + n cos eps.

    Returns the rotated pairs and m'^2 + n'^2 per pair.
    """
    lab = np.asarray(labels, dtype=float).reshape(-1, 2)
    c, s = math.cos(eps), math.sin(eps)
    rot = np.column_stack([lab[:, 0] * c + lab[:, 1] * s, -lab[:, 0] * s + lab[:, 1] * c])
    return rot, np.sum(rot**2, axis=1)


# --- catalog --------------------------------------------------------------------

_FIELDS = {
    "Interval": {"d_x": ["1"]},
    "Circle": {"d_theta": ["1"]},
    "Torus2": {"d_theta": ["1", "0"], "d_phi": ["0", "1"]},
    "Sphere2": {
        "L_x": ["-sin(phi)", "-cos(th)*cos(phi)/sin(th)"],
        "L_y": ["cos(phi)", "-cos(th)*sin(phi)/sin(th)"],
        "L_z": ["0", "1"],
    },
    "Box3": {
        "d_x": ["1", "0", "0"],
        "d_y": ["0", "1", "0"],
        "d_z": ["0", "0", "1"],
        "L_x": ["0", "-z", "y"],
        "L_y": ["z", "0", "-x"],
        "L_z": ["-y", "x", "0"],
    },
    "Ball3": {
        "L_x": ["0", "-sin(phi)", "-cos(th)*cos(phi)/sin(th)"],
        "L_y": ["0", "cos(phi)", "-cos(th)*sin(phi)/sin(th)"],
        "L_z": ["0", "0", "1"],
    },
}

# Deliberately broken fields: each fails the Killing equation by O(1).
_BROKEN = {
    "Torus2": {"th_d_th": ["th", "0"], "shear": ["phi", "0"]},
    "Sphere2": {"sin_d_theta": ["sin(th)", "0"], "d_theta": ["1", "0"]},
    "Box3": {"dilation_x": ["x", "0", "0"], "dilation": ["x", "y", "z"]},
    "Ball3": {"radial": ["1", "0", "0"], "d_theta": ["0", "1", "0"]},
}

_BROKEN_TENSORS = {
    "Box3": {"kappa_xx_x": ["x", "0", "0"]},
    "Sphere2": {"theta_only": ["cos(th)", "0"]},
}

_TENSORS = {
    "Sphere2": {"L2": ["1", "1/sin(th)^2"]},
    "Ball3": {"L2": ["0", "1", "1/sin(th)^2"]},
}


def catalog_fields(spec: ManifoldSpec) -> dict[str, KillingField]:
    table = _FIELDS.get(spec.catalog_id or "", {})
    return {k: KillingField.from_strings(spec, v, k) for k, v in table.items()}


def broken_fields(spec: ManifoldSpec) -> dict[str, KillingField]:
    table = _BROKEN.get(spec.catalog_id or "", {})
    return {k: KillingField.from_strings(spec, v, k) for k, v in table.items()}


def catalog_tensors(spec: ManifoldSpec) -> dict[str, KillingTensor2]:
    table = _TENSORS.get(spec.catalog_id or "", {})
    return {k: KillingTensor2.diagonal(spec, v, k) for k, v in table.items()}


def broken_tensors(spec: ManifoldSpec) -> dict[str, KillingTensor2]:
    table = _BROKEN_TENSORS.get(spec.catalog_id or "", {})
    return {k: KillingTensor2.diagonal(spec, v, k) for k, v in table.items()}


def interior_samples(spec: ManifoldSpec, count: int, rng: np.random.Generator, margin: float = 0.05) -> np.ndarray:
    """Random chart points kept ``margin * span`` away from every bound."""
    lo = np.array([c.lower + margin * c.span for c in spec.coords])
    hi = np.array([c.upper - margin * c.span for c in spec.coords])
    return lo + (hi - lo) * rng.random((count, spec.dim))
