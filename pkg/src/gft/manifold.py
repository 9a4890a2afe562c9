"""Charts, diagonal metrics, volume elements and Christoffel symbols.

A :class:`ManifoldSpec` is declarative: it can be written to and read from a
JSON manifest and reasoned about without discretizing anything.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ManifestError, NonPositiveDefinite, OutOfChart
from .expr import Expr, parse_expr

BOUNDARY_KINDS = ("periodic", "dirichlet", "neumann")
CATALOG_IDS = ("Interval", "Circle", "Torus2", "Sphere2", "Box3", "Ball3")

SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class Coord:
    name: str
    lower: float
    upper: float
    bc: str

    @property
    def span(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class MetricExpr:
    """Diagonal metric ``q = diag(q_1, ..., q_n)`` given by expressions.

    ``derivatives[i][k]`` optionally holds an analytic ``d q_i / d x^k``;
    when absent (user metrics) derivatives are taken by central differences.
    """

    diagonal: tuple[Expr, ...]
    provenance: str = "user"
    derivatives: Optional[tuple[tuple[Expr, ...], ...]] = None

    @property
    def dim(self) -> int:
        return len(self.diagonal)

    def components(self, point) -> np.ndarray:
        return np.diag(self.diag_at(np.asarray(point, dtype=float)))

    def diag_at(self, points: np.ndarray) -> np.ndarray:
        """Diagonal entries at ``points`` of shape (..., n); returns (..., n)."""
        pts = np.asarray(points, dtype=float)
        cols = [pts[..., i] for i in range(self.dim)]
        return np.stack([q(*cols) for q in self.diagonal], axis=-1)


@dataclass(frozen=True)
class ManifoldSpec:
    name: str
    coords: tuple[Coord, ...]
    metric: MetricExpr
    catalog_id: Optional[str] = None
    truncation: bool = False
    singular_ends: tuple[tuple[bool, bool], ...] = field(default=())
    # Per axis (lower, upper): how the chart continues through a singular end,
    # as ((other_axis, "shift_half" | "flip"), ...), or None.
    continuation: tuple = field(default=())

    def __post_init__(self):
        if self.dim < 1:
            raise ManifestError("manifold needs at least one coordinate")
        if self.metric.dim != self.dim:
            raise ManifestError("metric size does not match the number of coordinates")
        for c in self.coords:
            if c.bc not in BOUNDARY_KINDS:
                raise ManifestError(f"unknown boundary kind {c.bc!r}")
            if not (math.isfinite(c.lower) and math.isfinite(c.upper)) or c.upper <= c.lower:
                raise ManifestError(f"coordinate {c.name!r} needs finite bounds lower < upper")
        if not self.singular_ends:
            object.__setattr__(self, "singular_ends", _detect_singular_ends(self))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.coords)

    @property
    def compact(self) -> bool:
        # Bounds are always finite; a declared truncation models a non-compact manifold.
        return not self.truncation

    def to_manifest(self) -> dict:
        out = {
            "name": self.name,
            "dim": self.dim,
            "coords": [
                {"name": c.name, "min": c.lower, "max": c.upper, "bc": c.bc} for c in self.coords
            ],
        }
        if self.catalog_id is not None:
            out["metric"] = {"kind": "catalog", "id": self.catalog_id}
        else:
            out["metric"] = {"kind": "diagonal", "components": [q.source for q in self.metric.diagonal]}
        if self.truncation:
            out["truncation"] = True
        return out


@dataclass(frozen=True)
class MetricAtPoint:
    q: np.ndarray
    q_inv: np.ndarray
    sqrt_det: float
    christoffel: np.ndarray  # christoffel[k, i, j] = Gamma^k_ij


def _detect_singular_ends(spec: ManifoldSpec) -> tuple[tuple[bool, bool], ...]:
    mid = np.array([0.5 * (c.lower + c.upper) for c in spec.coords])
    out = []
    for i, c in enumerate(spec.coords):
        if c.bc == "periodic":
            out.append((False, False))
            continue
        ends = []
        for x in (c.lower, c.upper):
            p = mid.copy()
            p[i] = x
            with np.errstate(all="ignore"):
                d = np.prod(spec.metric.diag_at(p))
            ends.append(bool(not np.isfinite(d) or abs(d) < SINGULAR_TOL))
        out.append(tuple(ends))
    return tuple(out)


# -- catalog ---------------------------------------------------------------

_TWO_PI = 2.0 * math.pi

_CATALOG = {
    "Interval": dict(
        coords=[("x", 0.0, math.pi, "dirichlet")],
        diag=["1"],
        deriv=[["0"]],
    ),
    "Circle": dict(
        coords=[("th", 0.0, _TWO_PI, "periodic")],
        diag=["1"],
        deriv=[["0"]],
    ),
    "Torus2": dict(
        coords=[("th", 0.0, _TWO_PI, "periodic"), ("phi", 0.0, _TWO_PI, "periodic")],
        diag=["1", "1"],
        deriv=[["0", "0"], ["0", "0"]],
    ),
    "Sphere2": dict(
        coords=[("th", 0.0, math.pi, "neumann"), ("phi", 0.0, _TWO_PI, "periodic")],
        diag=["1", "sin(th)^2"],
        deriv=[["0", "0"], ["2*sin(th)*cos(th)", "0"]],
        continuation=((((1, "shift_half"),), ((1, "shift_half"),)), (None, None)),
    ),
    "Box3": dict(
        coords=[
            ("x", -math.pi, math.pi, "periodic"),
            ("y", -math.pi, math.pi, "periodic"),
            ("z", -math.pi, math.pi, "periodic"),
        ],
        diag=["1", "1", "1"],
        deriv=[["0"] * 3] * 3,
        truncation=True,
    ),
    "Ball3": dict(
        coords=[("r", 0.0, math.pi, "dirichlet"), ("th", 0.0, math.pi, "neumann"), ("phi", 0.0, _TWO_PI, "periodic")],
        diag=["1", "r^2", "r^2*sin(th)^2"],
        deriv=[["0", "0", "0"], ["2*r", "0", "0"], ["2*r*sin(th)^2", "2*r^2*sin(th)*cos(th)", "0"]],
        continuation=(
            (((1, "flip"), (2, "shift_half")), None),
            (((2, "shift_half"),), ((2, "shift_half"),)),
            (None, None),
        ),
        truncation=True,
    ),
}

FLAT_CATALOG = ("Interval", "Circle", "Torus2", "Box3")


def catalog(catalog_id: str) -> ManifoldSpec:
    """Return the catalog manifold ``catalog_id`` (see ``CATALOG_IDS``)."""
    if catalog_id not in _CATALOG:
        raise ManifestError(f"unknown catalog id {catalog_id!r}")
    entry = _CATALOG[catalog_id]
    coords = tuple(Coord(*c) for c in entry["coords"])
    names = [c.name for c in coords]
    metric = MetricExpr(
        diagonal=tuple(parse_expr(s, names) for s in entry["diag"]),
        provenance="catalog",
        derivatives=tuple(tuple(parse_expr(s, names) for s in row) for row in entry["deriv"]),
    )
    return ManifoldSpec(
        name=catalog_id,
        coords=coords,
        metric=metric,
        catalog_id=catalog_id,
        truncation=entry.get("truncation", False),
        continuation=entry.get("continuation", ()),
    )


def diagonal_manifold(name: str, coords: Sequence[Coord], components: Sequence[str], truncation=False) -> ManifoldSpec:
    names = [c.name for c in coords]
    metric = MetricExpr(diagonal=tuple(parse_expr(s, names) for s in components), provenance="user")
    return ManifoldSpec(name=name, coords=tuple(coords), metric=metric, truncation=truncation)


def from_manifest(data: dict) -> ManifoldSpec:
    """Build a :class:`ManifoldSpec` from a parsed JSON manifest."""
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")
    try:
        metric = data["metric"]
        kind = metric["kind"]
    except (KeyError, TypeError):
        raise ManifestError("manifest needs a metric with a 'kind'") from None
    if kind == "catalog":
        spec = catalog(metric.get("id", ""))
        if "coords" in data or "truncation" in data:
            coords = tuple(_coord(c) for c in data.get("coords", [])) or spec.coords
            if len(coords) != spec.dim:
                raise ManifestError("catalog override changes the dimension")
            spec = ManifoldSpec(
                name=data.get("name", spec.name),
                coords=coords,
                metric=spec.metric,
                catalog_id=spec.catalog_id,
                truncation=bool(data.get("truncation", spec.truncation)),
                continuation=spec.continuation if coords == spec.coords else (),
            )
    elif kind == "diagonal":
        coords = tuple(_coord(c) for c in data.get("coords", []))
        comps = metric.get("components")
        if not isinstance(comps, list) or len(comps) != len(coords):
            raise ManifestError("diagonal metric needs one component per coordinate")
        spec = diagonal_manifold(data.get("name", "user"), coords, comps, bool(data.get("truncation", False)))
    else:
        raise ManifestError(f"unknown metric kind {kind!r}")
    if "dim" in data and data["dim"] != spec.dim:
        raise ManifestError("'dim' does not match the coordinates")
    return spec


def _coord(c) -> Coord:
    try:
        return Coord(str(c["name"]), float(c["min"]), float(c["max"]), str(c.get("bc", "dirichlet")))
    except (KeyError, TypeError, ValueError):
        raise ManifestError(f"bad coordinate descriptor {c!r}") from None


def load_manifest(path) -> ManifoldSpec:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    return from_manifest(data)


# -- pointwise geometry ----------------------------------------------------

def _check_point(spec: ManifoldSpec, point) -> np.ndarray:
    p = np.array(point, dtype=float).reshape(-1)
    if p.shape != (spec.dim,):
        raise OutOfChart(f"expected {spec.dim} coordinates, got {p.size}")
    for i, c in enumerate(spec.coords):
        if c.bc == "periodic":
            p[i] = c.lower + np.mod(p[i] - c.lower, c.span)
            continue
        if not (c.lower < p[i] < c.upper):
            raise OutOfChart(f"{c.name}={p[i]} outside ({c.lower}, {c.upper})")
        lo_sing, hi_sing = spec.singular_ends[i]
        if (lo_sing and p[i] - c.lower <= SINGULAR_TOL) or (hi_sing and c.upper - p[i] <= SINGULAR_TOL):
            raise OutOfChart(f"{c.name}={p[i]} on a coordinate singularity")
    return p


def metric_derivatives(spec: ManifoldSpec, p: np.ndarray) -> np.ndarray:
    """``dq[i, k] = d q_ii / d x^k`` at a (validated) point."""
    n = spec.dim
    if spec.metric.derivatives is not None:
        return np.array([[float(spec.metric.derivatives[i][k](*p)) for k in range(n)] for i in range(n)])
    dq = np.empty((n, n))
    for k, c in enumerate(spec.coords):
        h = 1e-5 * c.span
        e = np.zeros(n)
        e[k] = h
        dq[:, k] = (spec.metric.diag_at(p + e) - spec.metric.diag_at(p - e)) / (2 * h)
    return dq


def evaluate_metric(spec: ManifoldSpec, point) -> MetricAtPoint:
    p = _check_point(spec, point)
    d = spec.metric.diag_at(p)
    if not np.all(np.isfinite(d)):
        raise NonPositiveDefinite(f"metric not finite at {p}")
    q = np.diag(d)
    try:
        np.linalg.cholesky(q)
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite(f"metric not positive definite at {p}") from None
    dq = metric_derivatives(spec, p)
    n = spec.dim
    inv = 1.0 / d
    gamma = np.zeros((n, n, n))
    # Diagonal metric: Gamma^k_ij = (d_i q_jk + d_j q_ik - d_k q_ij) / (2 q_k)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                s = 0.0
                if j == k:
                    s += dq[k, i]
                if i == k:
                    s += dq[k, j]
                if i == j:
                    s -= dq[i, k]
                gamma[k, i, j] = 0.5 * inv[k] * s
    return MetricAtPoint(q=q, q_inv=np.diag(inv), sqrt_det=float(math.sqrt(np.prod(d))), christoffel=gamma)


def volume_element(spec: ManifoldSpec, point) -> float:
    return evaluate_metric(spec, point).sqrt_det


def sqrt_det(spec: ManifoldSpec, points: np.ndarray) -> np.ndarray:
    """Vectorized ``sqrt(det q)`` without chart checks (grid use)."""
    return np.sqrt(np.prod(spec.metric.diag_at(points), axis=-1))
