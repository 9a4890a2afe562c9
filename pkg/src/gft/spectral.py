"""Eigendecomposition of -Delta, degeneracy clusters and the transform pair.

Eigenvectors are orthonormal in the weighted inner product of the grid.
Both solvers work on the symmetric similarity transform
``S = W^{1/2} A W^{-1/2}`` and map back with ``W^{-1/2}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import ChartGrid, DiscreteOperator
from .errors import (
    ClusterAmbiguity,
    ConvergenceFailure,
    LabelMismatch,
    NotUnitary,
    RequiresFullSpectrum,
    ValidationError,
)

DENSE_LIMIT = 3000
ORTHO_TOL = 1e-10

# Relative cluster tolerance per catalog entry when finite differences split
# exact degeneracies; spectral grids use the floor max(1e-6, 1e-8 * lambda).
_FD_CLUSTER_REL = {"Sphere2": 5e-3, "Ball3": 1e-2, "Interval": 1e-3}
_FD_CLUSTER_REL_DEFAULT = 5e-3

Tolerance = Union[float, Callable[[float], float], None]


def default_cluster_tol(grid: ChartGrid) -> Callable[[float], float]:
    """Cluster tolerance as a function of lambda for this grid."""
    if all(ax.spectral for ax in grid.axes):
        return lambda lam: max(1e-6, 1e-8 * abs(lam))
    rel = _FD_CLUSTER_REL.get(grid.spec.catalog_id, _FD_CLUSTER_REL_DEFAULT)
    return lambda lam: max(1e-6, rel * abs(lam))


def _as_tol(tol: Tolerance, grid: ChartGrid) -> Callable[[float], float]:
    if tol is None:
        return default_cluster_tol(grid)
    if callable(tol):
        return tol
    value = float(tol)
    if value <= 0:
        raise ValidationError("cluster_tol must be positive")
    return lambda lam: value


@dataclass(frozen=True)
class DegeneracyCluster:
    lambda_mean: float
    member_indices: tuple[int, ...]

    @property
    def multiplicity(self) -> int:
        return len(self.member_indices)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: tuple[DegeneracyCluster, ...]
    grid: ChartGrid
    full: bool = False

    @property
    def k(self) -> int:
        return self.eigenvalues.size

    def cluster_of(self, index: int) -> int:
        for c, cl in enumerate(self.clusters):
            if index in cl.member_indices:
                return c
        raise IndexError(index)

    def cluster_values(self) -> list[tuple[float, int]]:
        return [(c.lambda_mean, c.multiplicity) for c in self.clusters]

    def orthonormality_defect(self) -> float:
        v = self.eigenvectors
        gram = v.conj().T @ (self.grid.weights[:, None] * v)
        return float(np.max(np.abs(gram - np.eye(v.shape[1]))))

    def residuals(self, op: DiscreteOperator, negate: bool = True) -> np.ndarray:
        """``||A v_k - lambda_k v_k||_w`` with ``A = -op`` when ``negate``."""
        a = -op.matrix if negate else op.matrix
        r = a @ self.eigenvectors - self.eigenvectors * self.eigenvalues[None, :]
        return np.sqrt(np.sum(self.grid.weights[:, None] * np.abs(r) ** 2, axis=0))


def cluster_eigenvalues(
    values: np.ndarray, tol: Callable[[float], float], strict: bool = True
) -> tuple[DegeneracyCluster, ...]:
    """Split ascending eigenvalues at gaps larger than the local tolerance.

    A gap within a factor 2 of the tolerance (either side) is ambiguous: it
    raises when ``strict``, otherwise the pair is split into separate clusters.
    """
    clusters = []
    start = 0
    for i in range(1, values.size + 1):
        if i < values.size:
            gap = values[i] - values[i - 1]
            t = tol(0.5 * (values[i] + values[i - 1]))
            ambiguous = 0.5 * t < gap <= 2.0 * t
            if ambiguous and strict:
                raise ClusterAmbiguity(
                    f"gap {gap:.3e} between eigenvalues {values[i - 1]:.6g} and {values[i]:.6g} "
                    f"is within a factor 2 of cluster_tol {t:.3e}"
                )
            if gap <= t and not ambiguous:
                continue
        members = tuple(range(start, i))
        clusters.append(DegeneracyCluster(float(np.mean(values[start:i])), members))
        start = i
    return tuple(clusters)


def _orthonormalize(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    sw = np.sqrt(w)[:, None]
    q, r = np.linalg.qr(sw * v)
    # keep column phases/signs of the solver output
    q = q * np.sign(np.real(np.diag(r)))[None, :].astype(q.dtype) if np.isrealobj(q) else q * (
        np.diag(r) / np.abs(np.diag(r))
    )[None, :]
    return q / sw


def eig_decompose(
    op: DiscreteOperator,
    k: int,
    cluster_tol: Tolerance = None,
    negate: bool = True,
    maxiter: Optional[int] = None,
    dense_limit: int = DENSE_LIMIT,
    strict: bool = True,
) -> SpectralDecomposition:
    """Lowest ``k`` eigenpairs of ``-op`` (``op`` is the Laplacian when ``negate``).

    ``k`` is extended to the end of the cluster containing the ``k``-th
    eigenvalue so no degeneracy fiber is cut.  ``strict=False`` splits
    ambiguous gaps instead of raising; meant for full spectra on FD grids,
    whose top end holds near-degenerate pairs at every tolerance scale.
    """
    if not op.hermitian_wrt_measure:
        raise ValidationError(f"operator {op.name!r} is not hermitian in the weighted inner product")
    grid = op.grid
    n = grid.size
    k = int(k)
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in [1, {n}], got {k}")
    tol = _as_tol(cluster_tol, grid)
    w = grid.weights
    sw = np.sqrt(w)
    a = -op.matrix if negate else op.matrix
    s = sp.diags(sw) @ sp.csr_matrix(a) @ sp.diags(1.0 / sw)

    if n <= dense_limit:
        dense = s.toarray()
        dense = 0.5 * (dense + dense.conj().T)
        vals, vecs = scipy.linalg.eigh(dense)
        vals, vecs = _trim(vals, vecs, k, tol, exhausted=True)
    else:
        vals, vecs = _sparse_lowest(s, k, tol, maxiter)

    v = vecs / sw[:, None]
    clusters = cluster_eigenvalues(vals, tol, strict)
    for cl in clusters:
        idx = list(cl.member_indices)
        v[:, idx] = _orthonormalize(v[:, idx], w)
    return SpectralDecomposition(vals, v, clusters, grid, full=vals.size == n)


def _trim(vals, vecs, k, tol, exhausted):
    """Cut after the cluster holding the k-th value; None if that is unsafe."""
    end = k
    while end < vals.size and vals[end] - vals[end - 1] <= tol(vals[end - 1]):
        end += 1
    if end == vals.size and not exhausted:
        return None
    return vals[:end].copy(), vecs[:, :end].copy()


def _sparse_lowest(s, k, tol, maxiter):
    n = s.shape[0]
    s = 0.5 * (s + s.conj().T)
    # A shift below the spectrum keeps the factorization regular even with a
    # constant null vector.
    sigma = -1.0
    pad = max(8, k // 4)
    while True:
        m = min(k + pad, n - 2)
        try:
            vals, vecs = spla.eigsh(s.tocsc(), k=m, sigma=sigma, which="LM", maxiter=maxiter, tol=0)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(f"eigsh did not converge for k={m}: {exc}") from None
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        out = _trim(vals, vecs, k, tol, exhausted=m >= n - 2)
        if out is not None:
            return out
        pad *= 2


# --- joint labels ---------------------------------------------------------------

DISCRETE = "discrete"
CONTINUUM = "continuum-sample"


@dataclass(frozen=True)
class LabelAxis:
    operator_id: str
    values: tuple[float, ...]
    topology: str


@dataclass(frozen=True)
class JointLabelSpace:
    axes: tuple[LabelAxis, ...]
    tuples: tuple[tuple[float, ...], ...]
    groups: tuple[tuple[int, ...], ...]
    label_tol: float = 1e-6
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def collisions(self) -> int:
        """Vectors sharing a label tuple with an earlier vector."""
        return sum(len(g) - 1 for g in self.groups)

    @property
    def unresolved(self) -> bool:
        return self.collisions > 0

    @property
    def resolved_count(self) -> int:
        return len(self.groups)

    def rounded(self, digits: int = 6) -> list[tuple[float, ...]]:
        return [tuple(round(x, digits) + 0.0 for x in t) for t in self.tuples]

    def measure_weights(self) -> np.ndarray:
        """Counting measure on discrete axes, local label spacing on continuum axes."""
        rho = np.ones(len(self.tuples))
        for a, axis in enumerate(self.axes):
            if axis.topology != CONTINUUM:
                continue
            vals = np.array(axis.values)
            spacing = _local_spacing(vals)
            for i, t in enumerate(self.tuples):
                rho[i] *= spacing[int(np.argmin(np.abs(vals - t[a])))]
        return rho


def _local_spacing(vals: np.ndarray) -> np.ndarray:
    if vals.size < 2:
        return np.ones_like(vals)
    d = np.diff(vals)
    left = np.concatenate([[d[0]], d])
    right = np.concatenate([d, [d[-1]]])
    return 0.5 * (left + right)


def laplacian_labels(decomp: SpectralDecomposition, topology: Optional[str] = None) -> JointLabelSpace:
    """Label space with only the lambda axis."""
    if topology is None:
        topology = CONTINUUM if decomp.grid.spec.truncation else DISCRETE
    tuples = [None] * decomp.k
    for cl in decomp.clusters:
        for i in cl.member_indices:
            tuples[i] = (cl.lambda_mean,)
    axis = LabelAxis("laplacian", tuple(c.lambda_mean for c in decomp.clusters), topology)
    groups = tuple(cl.member_indices for cl in decomp.clusters)
    return JointLabelSpace((axis,), tuple(tuples), groups)


# --- transform pair -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GFTCoefficients:
    labels: JointLabelSpace
    values: np.ndarray
    measure_weights: np.ndarray

    def norm_sq(self) -> float:
        return float(np.sum(self.measure_weights * np.abs(self.values) ** 2))


def gft_forward(decomp: SpectralDecomposition, labels: Optional[JointLabelSpace], psi: np.ndarray) -> GFTCoefficients:
    """phi[k] = <f_k, psi>_w / sqrt(rho_k), so sum rho |phi|^2 is the captured norm."""
    if labels is None:
        labels = laplacian_labels(decomp)
    if len(labels.tuples) != decomp.k:
        raise LabelMismatch(f"{len(labels.tuples)} labels for {decomp.k} eigenvectors")
    psi = np.asarray(psi)
    if psi.shape != (decomp.grid.size,):
        raise ValidationError(f"psi must have {decomp.grid.size} entries, got shape {psi.shape}")
    rho = labels.measure_weights()
    raw = decomp.eigenvectors.conj().T @ (decomp.grid.weights * psi)
    return GFTCoefficients(labels, raw / np.sqrt(rho), rho)


def gft_inverse(coeffs: GFTCoefficients, decomp: SpectralDecomposition) -> np.ndarray:
    if coeffs.values.shape != (decomp.k,) or len(coeffs.labels.tuples) != decomp.k:
        raise LabelMismatch("coefficients do not match the decomposition")
    return decomp.eigenvectors @ (coeffs.values * np.sqrt(coeffs.measure_weights))


def fiber_rotate(decomp: SpectralDecomposition, cluster_id: int, unitary: np.ndarray) -> SpectralDecomposition:
    cl = decomp.clusters[cluster_id]
    u = np.asarray(unitary)
    m = cl.multiplicity
    if u.shape != (m, m):
        raise NotUnitary(f"unitary must be {m}x{m}")
    defect = np.max(np.abs(u.conj().T @ u - np.eye(m)))
    if defect > 1e-12:
        raise NotUnitary(f"||W^H W - I|| = {defect:.2e}")
    v = decomp.eigenvectors.astype(np.result_type(decomp.eigenvectors, u), copy=True)
    idx = list(cl.member_indices)
    v[:, idx] = v[:, idx] @ u
    return replace(decomp, eigenvectors=v)


def cluster_projector(decomp: SpectralDecomposition, cluster_id: int) -> np.ndarray:
    """Dense matrix of the weighted orthogonal projector onto a cluster."""
    v = decomp.eigenvectors[:, list(decomp.clusters[cluster_id].member_indices)]
    return v @ (v.conj().T * decomp.grid.weights[None, :])


def completeness_residual(decomp: SpectralDecomposition, grid: Optional[ChartGrid] = None) -> float:
    grid = grid or decomp.grid
    if not decomp.full or decomp.k != grid.size:
        raise RequiresFullSpectrum(f"{decomp.k} of {grid.size} eigenpairs computed")
    v = decomp.eigenvectors
    ident = v @ (v.conj().T * grid.weights[None, :])
    return float(np.max(np.abs(ident - np.eye(grid.size))))
