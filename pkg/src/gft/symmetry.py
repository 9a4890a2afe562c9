"""Symmetry operators, commutators, joint diagonalization and MASA search.

Every operator here is Hermitian in the weighted inner product.  The
Laplacian enters as ``-Delta`` so that all label axes are non-negative
where the continuum operator is.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .discretize import (
    ChartGrid,
    DiscreteOperator,
    _same_grid,
    assemble_first_order,
    assemble_laplace_beltrami,
    assemble_second_order,
)
from .errors import GridMismatch, NonInvariantFiber, NotCatalogIsometry
from .killing import KillingField, KillingTensor2, catalog_fields, catalog_tensors
from .spectral import (
    CONTINUUM,
    DISCRETE,
    JointLabelSpace,
    LabelAxis,
    SpectralDecomposition,
)

log = logging.getLogger(__name__)

KILLING_VECTOR = "killing_vector"
KILLING_TENSOR = "killing_tensor"
LAPLACIAN = "laplacian"
SYNTHETIC = "synthetic"
ORIGINS = (KILLING_VECTOR, KILLING_TENSOR, LAPLACIAN, SYNTHETIC)

SPECTRAL_COMM_TOL = 1e-8
FD_COMM_TOL = 1e-5
LABEL_TOL = 1e-6
RESIDUAL_TOL = 1e-6
MAX_CATALOG = 12


@dataclass(frozen=True, eq=False)
class SymmetryOperator:
    """A Hermitian operator with its provenance.

    ``spectrum`` tags the label axis it generates: ``discrete`` or
    ``continuum-sample`` (declared, not inferred from finite spectra).
    """

    id: str
    order: int
    op: DiscreteOperator
    origin: str
    spectrum: str = DISCRETE
    source: object = None

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"origin must be one of {ORIGINS}")

    @property
    def grid(self) -> ChartGrid:
        return self.op.grid

    @property
    def matrix(self):
        return self.op.matrix


def default_comm_tol(grid: ChartGrid) -> float:
    return SPECTRAL_COMM_TOL if all(ax.spectral for ax in grid.axes) else FD_COMM_TOL


# --- construction ---------------------------------------------------------------

# Label-axis topology on non-compact (truncated) manifolds; compact ones are all discrete.
_CONTINUUM_IDS = {
    "Box3": {"laplacian", "p_x", "p_y", "p_z"},
    "Ball3": {"laplacian"},
}


def _spectrum_tag(grid: ChartGrid, op_id: str) -> str:
    spec = grid.spec
    if spec.compact:
        return DISCRETE
    continuum = _CONTINUUM_IDS.get(spec.catalog_id or "")
    if continuum is None:
        return CONTINUUM
    return CONTINUUM if op_id in continuum else DISCRETE


def laplacian_operator(grid: ChartGrid) -> SymmetryOperator:
    lap = assemble_laplace_beltrami(grid)
    neg = replace(lap, matrix=-lap.matrix, name="laplacian")
    return SymmetryOperator("laplacian", 2, neg, LAPLACIAN, _spectrum_tag(grid, "laplacian"))


def vector_operator(grid: ChartGrid, fld: KillingField, op_id: Optional[str] = None) -> SymmetryOperator:
    """``-i K`` made Hermitian in the weighted inner product."""
    op_id = op_id or fld.name
    return SymmetryOperator(op_id, 1, assemble_first_order(grid, fld, op_id), KILLING_VECTOR,
                            _spectrum_tag(grid, op_id), fld)


def tensor_operator(grid: ChartGrid, tensor: KillingTensor2, op_id: Optional[str] = None) -> SymmetryOperator:
    """``-(1/sqrt q) d_i (sqrt q kappa^ii d_i)`` for a diagonal tensor."""
    op_id = op_id or tensor.name
    return SymmetryOperator(op_id, 2, assemble_second_order(grid, tensor, op_id), KILLING_TENSOR,
                            _spectrum_tag(grid, op_id), tensor)


def _momentum_id(name: str) -> str:
    return "p_" + name[2:] if name.startswith("d_") else name


def default_catalog(grid: ChartGrid, include_laplacian: bool = True) -> list[SymmetryOperator]:
    """Catalog operators of the grid's manifold: Killing vectors, |L|^2 and -Delta."""
    spec = grid.spec
    ops = [vector_operator(grid, f, _momentum_id(k)) for k, f in catalog_fields(spec).items()]
    ops += [tensor_operator(grid, t, k) for k, t in catalog_tensors(spec).items()]
    if include_laplacian:
        ops.append(laplacian_operator(grid))
    return ops


def rotated_torus_generators(grid: ChartGrid, eps: float) -> list[SymmetryOperator]:
    """``p' = cos e p_th + sin e p_phi`` and ``n' = -sin e p_th + cos e p_phi``."""
    c, s = repr(math.cos(eps)), repr(math.sin(eps))
    spec = grid.spec
    a = KillingField.from_strings(spec, [c, s], "p_rot_1")
    b = KillingField.from_strings(spec, [f"-({s})", c], "p_rot_2")
    return [vector_operator(grid, a), vector_operator(grid, b)]


# --- commutators ----------------------------------------------------------------


def commutator_norm(a: SymmetryOperator, b: SymmetryOperator, trials: int = 8, seed: int = 42) -> float:
    """max over random band-limited unit vectors of ||(AB - BA) v||_w."""
    grid = _same_grid(a.op, b.op)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        v = grid.random_bandlimited(rng)
        r = a.matrix @ (b.matrix @ v) - b.matrix @ (a.matrix @ v)
        worst = max(worst, grid.norm(r))
    return worst


# --- joint diagonalization ------------------------------------------------------


def _split_sorted(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Positions of ascending ``values`` grouped at gaps above ``tol * max(1, |v|)``."""
    groups, start = [], 0
    for i in range(1, values.size + 1):
        if i == values.size or values[i] - values[i - 1] > tol * max(1.0, abs(values[i]), abs(values[i - 1])):
            groups.append(np.arange(start, i))
            start = i
    return groups


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def joint_diagonalize(
    decomp: SpectralDecomposition,
    ops: Sequence[SymmetryOperator],
    label_tol: float = LABEL_TOL,
    comm_tol: Optional[float] = None,
    laplacian_topology: Optional[str] = None,
) -> tuple[SpectralDecomposition, JointLabelSpace]:
    """Rotate each degeneracy fiber to common eigenvectors of ``ops`` (in order).

    Label tuples are ``(cluster lambda, alpha_1, ...)``; vectors inside a
    cluster are reordered by tuple.
    """
    grid = decomp.grid
    for o in ops:
        if o.grid is not grid and o.grid.shape != grid.shape:
            raise GridMismatch(f"operator {o.id} lives on a different grid")
    comm_tol = default_comm_tol(grid) if comm_tol is None else comm_tol
    w = grid.weights
    sw = np.sqrt(w)[:, None]
    v = decomp.eigenvectors
    ov = [o.matrix @ v for o in ops]
    k = decomp.k
    new_v = np.array(v, dtype=complex)
    new_vals = decomp.eigenvalues.astype(float).copy()
    tuples: list = [None] * k
    groups = []
    leakage = []
    worst_res = 0.0

    for ci, cl in enumerate(decomp.clusters):
        idx = np.array(cl.member_indices)
        vc = v[:, idx]
        gram = []
        for j, o in enumerate(ops):
            oc = ov[j][:, idx]
            g = vc.conj().T @ (w[:, None] * oc)
            leak = np.linalg.norm(sw * (oc - vc @ g), 2)
            scale = max(1.0, np.linalg.norm(g, 2))
            leakage.append((ci, o.id, float(leak)))
            if leak > comm_tol * scale:
                raise NonInvariantFiber(
                    f"operator {o.id} leaks {leak:.2e} out of cluster {ci} (lambda={cl.lambda_mean:.6g}), "
                    f"comm_tol {comm_tol:.1e}"
                )
            gram.append(g)

        leaves = []

        def descend(c: np.ndarray, level: int):
            if level == len(ops) or c.shape[1] == 1:
                leaves.append(c)
                return
            m = _herm(c.conj().T @ gram[level] @ c)
            vals, vecs = np.linalg.eigh(m)
            for part in _split_sorted(vals, label_tol):
                descend(c @ vecs[:, part], level + 1)

        descend(np.eye(idx.size, dtype=complex), 0)

        entries = []
        for leaf in leaves:
            alphas = []
            for col in range(leaf.shape[1]):
                cvec = leaf[:, col]
                alphas.append(tuple(float(np.real(np.vdot(cvec, g @ cvec))) for g in gram))
            mean = tuple(np.mean([a[j] for a in alphas]) for j in range(len(ops)))
            entries.append((mean, leaf, alphas))
        entries.sort(key=lambda e: tuple(round(x / max(label_tol, 1e-15)) for x in e[0]))

        pos = 0
        for mean, leaf, alphas in entries:
            members = []
            for col in range(leaf.shape[1]):
                target = idx[pos]
                cvec = leaf[:, col]
                vec = vc @ cvec
                new_v[:, target] = vec
                new_vals[target] = float(np.sum(np.abs(cvec) ** 2 * decomp.eigenvalues[idx]))
                tuples[target] = (cl.lambda_mean,) + alphas[col]
                for j in range(len(ops)):
                    r = ov[j][:, idx] @ cvec - alphas[col][j] * vec
                    res = float(np.sqrt(np.sum(w * np.abs(r) ** 2)))
                    worst_res = max(worst_res, res / max(1.0, abs(alphas[col][j])))
                members.append(int(target))
                pos += 1
            groups.append(tuple(members))

    tol_res = max(RESIDUAL_TOL, comm_tol)
    if worst_res > tol_res:
        raise NonInvariantFiber(f"joint eigenvector residual {worst_res:.2e} exceeds {tol_res:.1e}")

    if laplacian_topology is None:
        laplacian_topology = _spectrum_tag(grid, "laplacian")
    axes = [LabelAxis("laplacian", tuple(c.lambda_mean for c in decomp.clusters), laplacian_topology)]
    for j, o in enumerate(ops):
        vals = sorted({round(t[j + 1], 9) for t in tuples})
        axes.append(LabelAxis(o.id, tuple(vals), o.spectrum))
    labels = JointLabelSpace(
        tuple(axes), tuple(tuples), tuple(groups), label_tol,
        diagnostics={"leakage": tuple(leakage), "max_residual": worst_res},
    )
    out = replace(decomp, eigenvectors=new_v, eigenvalues=new_vals)
    return out, labels


def change_of_basis(a: SpectralDecomposition, b: SpectralDecomposition) -> list[np.ndarray]:
    """Per-cluster matrices ``W = V_a^H W V_b`` relating two fiber bases."""
    if a.clusters != b.clusters:
        raise GridMismatch("decompositions have different cluster structure")
    w = a.grid.weights
    out = []
    for cl in a.clusters:
        idx = list(cl.member_indices)
        out.append(a.eigenvectors[:, idx].conj().T @ (w[:, None] * b.eigenvectors[:, idx]))
    return out


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


# --- MASA search ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MasaCandidate:
    members: tuple[str, ...]
    includes_laplacian_functionally: bool
    rank: int
    resolved_count: int = 0
    unresolved: bool = True
    total_order: int = 0
    commutator_max: float = 0.0
    redundant: tuple[str, ...] = ()
    commutators: dict = field(default_factory=dict)
    origins: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)
    spectra: dict = field(default_factory=dict)
    labels: Optional[JointLabelSpace] = field(default=None, repr=False)
    decomposition: Optional[SpectralDecomposition] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "members": list(self.members),
            "includes_laplacian_functionally": self.includes_laplacian_functionally,
            "rank": self.rank,
            "resolved_count": self.resolved_count,
            "unresolved": self.unresolved,
            "total_order": self.total_order,
            "commutator_max": self.commutator_max,
            "redundant": list(self.redundant),
            "commutators": {k: v for k, v in sorted(self.commutators.items())},
            "origins": dict(self.origins),
            "orders": dict(self.orders),
            "spectra": dict(self.spectra),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MasaCandidate":
        keys = ("members", "includes_laplacian_functionally", "rank", "resolved_count", "unresolved",
                "total_order", "commutator_max", "redundant", "commutators", "origins", "orders", "spectra")
        kw = {k: data[k] for k in keys if k in data}
        kw["members"] = tuple(kw.get("members", ()))
        kw["redundant"] = tuple(kw.get("redundant", ()))
        kw.setdefault("rank", len(kw["members"]))
        return cls(**kw)


def _label_ids(values: np.ndarray, tol: float) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ids = np.empty(values.size, dtype=int)
    for g, part in enumerate(_split_sorted(values[order], tol)):
        ids[order[part]] = g
    return ids


def _distinct(columns: list[np.ndarray]) -> int:
    if not columns:
        return 1
    return len(set(zip(*[c.tolist() for c in columns])))


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("GFT_THREADS", "1")))
    except ValueError:
        return 1


def masa_search(
    catalog: Sequence[SymmetryOperator],
    decomp: SpectralDecomposition,
    target_rank: Optional[int] = None,
    comm_tol: Optional[float] = None,
    label_tol: float = LABEL_TOL,
    trials: int = 6,
    seed: int = 42,
) -> list[MasaCandidate]:
    """Maximal pairwise-commuting subsets of ``catalog`` that commute with Delta.

    Delta is dropped from a candidate when lambda is a function of the other
    members' labels (``includes_laplacian_functionally``).  Members whose
    removal does not reduce the number of distinct label tuples are listed
    in ``redundant``.  ``target_rank`` keeps candidates of at least that rank.
    """
    catalog = list(catalog)
    if not catalog:
        raise ValueError("catalog must be nonempty")
    if len(catalog) > MAX_CATALOG:
        raise ValueError(f"catalog has {len(catalog)} entries; exhaustive search is capped at {MAX_CATALOG}")
    grid = decomp.grid
    comm_tol = default_comm_tol(grid) if comm_tol is None else comm_tol
    lap = next((o for o in catalog if o.origin == LAPLACIAN), None)
    reference = lap or laplacian_operator(grid)
    lap_scale = 1.0

    with_delta = {}
    for o in catalog:
        if o.origin == LAPLACIAN:
            with_delta[o.id] = 0.0
        else:
            with_delta[o.id] = commutator_norm(o, reference, trials, seed)
    admissible = [o for o in catalog if with_delta[o.id] <= comm_tol * lap_scale]
    for o in catalog:
        if o not in admissible:
            log.info("masa_search: %s fails [O, Delta] (%.2e > %.1e)", o.id, with_delta[o.id], comm_tol)

    n = len(admissible)
    pair = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        a, b = admissible[i], admissible[j]
        if a.origin == LAPLACIAN:
            val = with_delta[b.id]
        elif b.origin == LAPLACIAN:
            val = with_delta[a.id]
        else:
            val = commutator_norm(a, b, trials, seed)
        pair[i, j] = pair[j, i] = val
    ok = pair <= comm_tol

    cliques = []
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        if not all(ok[i, j] for i, j in itertools.combinations(members, 2)):
            continue
        maximal = all(
            not all(ok[x, m] for m in members) for x in range(n) if not mask >> x & 1
        )
        if maximal:
            cliques.append(members)

    def evaluate(members: list[int]) -> MasaCandidate:
        chosen = [admissible[i] for i in members]
        non_lap = [o for o in chosen if o.origin != LAPLACIAN]
        has_lap = len(non_lap) < len(chosen)
        new_decomp, labels = joint_diagonalize(decomp, non_lap, label_tol, comm_tol)
        tup = np.array(labels.tuples, dtype=float).reshape(decomp.k, -1)
        lam_ids = np.empty(decomp.k, dtype=int)
        for c, cl in enumerate(decomp.clusters):
            lam_ids[list(cl.member_indices)] = c
        cols = {o.id: _label_ids(tup[:, j + 1], label_tol) for j, o in enumerate(non_lap)}
        functional = False
        if non_lap:
            key = list(zip(*[cols[o.id].tolist() for o in non_lap]))
            seen = {}
            functional = all(seen.setdefault(kk, lam) == lam for kk, lam in zip(key, lam_ids.tolist()))
        final = [o for o in chosen if not (o.origin == LAPLACIAN and functional)]
        if has_lap and not non_lap:
            final = chosen
        cols = dict(cols)
        if lap is not None:
            cols[lap.id] = lam_ids
        full = _distinct([cols[o.id] for o in final])
        redundant = tuple(
            o.id for o in final if len(final) > 1 and _distinct([cols[x.id] for x in final if x is not o]) >= full
        )
        comms = {}
        for i, j in itertools.combinations(members, 2):
            comms[f"{admissible[i].id}|{admissible[j].id}"] = float(pair[i, j])
        for o in final:
            comms.setdefault(f"{o.id}|laplacian", float(with_delta[o.id]))
        return MasaCandidate(
            members=tuple(o.id for o in final),
            includes_laplacian_functionally=bool(functional and non_lap),
            rank=len(final),
            resolved_count=labels.resolved_count,
            unresolved=labels.unresolved,
            total_order=sum(o.order for o in final),
            commutator_max=max(comms.values(), default=0.0),
            redundant=redundant,
            commutators=comms,
            origins={o.id: o.origin for o in final},
            orders={o.id: o.order for o in final},
            spectra={o.id: o.spectrum for o in final},
            labels=labels,
            decomposition=new_decomp,
        )

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        found = list(pool.map(evaluate, cliques))
    if target_rank is not None:
        found = [c for c in found if c.rank >= target_rank]
    found.sort(key=lambda c: (-c.resolved_count, -c.rank, c.total_order, c.commutator_max, c.members))
    return found


# --- synthetic commutant --------------------------------------------------------


def build_synthetic_commutant(
    decomp: SpectralDecomposition, labels, op_id: str = "synthetic"
) -> SymmetryOperator:
    """Dense ``sum_k alpha_k v_k v_k^H W``: commutes with Delta by construction."""
    alpha = np.asarray(labels, dtype=float)
    if alpha.shape != (decomp.k,):
        raise ValueError(f"need {decomp.k} real labels, got shape {alpha.shape}")
    v = decomp.eigenvectors
    w = decomp.grid.weights
    mat = (v * alpha[None, :]) @ (v.conj().T * w[None, :])
    if np.isrealobj(v):
        mat = np.real(mat)
    op = DiscreteOperator(matrix=sp.csr_matrix(mat), grid=decomp.grid, hermitian_wrt_measure=True, name=op_id)
    return SymmetryOperator(op_id, 0, op, SYNTHETIC, DISCRETE)


# --- isometries -----------------------------------------------------------------


@dataclass(frozen=True)
class Isometry:
    """Coordinate bijection descriptor.

    kinds: ``identity``; ``translation`` (``shift`` per axis, periodic axes
    only); ``reflection`` (``axis``: x -> lower + upper - x on bounded axes,
    x -> 2 lower - x on periodic ones); ``swap`` (``axes`` pair with
    identical discretization); ``rotation`` (``angle``; about the polar axis
    on Sphere2/Ball3, multiples of pi/2 on Torus2).
    """

    kind: str
    shift: tuple[float, ...] = ()
    axis: int = 0
    axes: tuple[int, int] = (0, 1)
    angle: float = 0.0


def _fourier_shift(n: int, length: float, a: float) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n) * (2 * np.pi / length)
    if n % 2 == 0:
        k[n // 2] = abs(k[n // 2])
    mult = np.exp(1j * k * a)
    eye = np.eye(n)
    return np.fft.ifft(mult[:, None] * np.fft.fft(eye, axis=0), axis=0)


def _axis_kron(grid: ChartGrid, mats: dict[int, np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1))
    for i, ax in enumerate(grid.axes):
        out = np.kron(out, mats.get(i, np.eye(ax.n)))
    return out


def _reflect_perm(grid: ChartGrid, axis: int) -> np.ndarray:
    ax = grid.axes[axis]
    n = ax.n
    if ax.coord.bc == "periodic":
        src = (-np.arange(n)) % n
    else:
        x = ax.nodes
        mirrored = ax.coord.lower + ax.coord.upper - x
        src = np.array([int(np.argmin(np.abs(x - m))) for m in mirrored])
        if np.max(np.abs(x[src] - mirrored)) > 1e-9 * ax.coord.span:
            raise NotCatalogIsometry(f"axis {ax.coord.name} grid is not mirror symmetric")
    return np.eye(n)[src]


def _swap_matrix(grid: ChartGrid, i: int, j: int) -> np.ndarray:
    a, b = grid.axes[i], grid.axes[j]
    if a.n != b.n or not np.allclose(a.nodes, b.nodes) or a.coord.bc != b.coord.bc:
        raise NotCatalogIsometry("swapped axes must carry identical grids")
    shape = grid.shape
    idx = np.arange(grid.size).reshape(shape)
    src = np.swapaxes(idx, i, j).reshape(-1)
    return np.eye(grid.size)[src]


def isometry_pullback(grid: ChartGrid, mapping: Isometry) -> DiscreteOperator:
    """``(U f)(x) = f(phi(x))`` on the grid nodes."""
    spec = grid.spec
    kind = mapping.kind
    if kind == "identity":
        mat = np.eye(grid.size)
    elif kind == "translation":
        shift = tuple(mapping.shift) + (0.0,) * (spec.dim - len(mapping.shift))
        mats = {}
        for i, a in enumerate(shift):
            if a == 0.0:
                continue
            ax = grid.axes[i]
            if ax.coord.bc != "periodic":
                raise NotCatalogIsometry(f"translation along bounded axis {ax.coord.name}")
            mats[i] = _fourier_shift(ax.n, ax.coord.span, a)
        mat = _axis_kron(grid, mats)
    elif kind == "reflection":
        if not 0 <= mapping.axis < spec.dim:
            raise NotCatalogIsometry(f"axis {mapping.axis} out of range")
        if spec.catalog_id not in ("Interval", "Circle", "Torus2", "Box3", "Sphere2", "Ball3"):
            raise NotCatalogIsometry("reflections are catalog isometries only on catalog manifolds")
        if spec.catalog_id == "Ball3" and mapping.axis == 0:
            raise NotCatalogIsometry("r -> pi - r is not an isometry")
        mat = _axis_kron(grid, {mapping.axis: _reflect_perm(grid, mapping.axis)})
    elif kind == "swap":
        i, j = mapping.axes
        if spec.catalog_id not in ("Torus2", "Box3"):
            raise NotCatalogIsometry("axis swaps are isometries only on Torus2 and Box3")
        mat = _swap_matrix(grid, i, j)
    elif kind == "rotation":
        mat = _rotation(grid, mapping.angle)
    else:
        raise NotCatalogIsometry(f"unknown mapping kind {kind!r}")
    return DiscreteOperator(matrix=sp.csr_matrix(mat), grid=grid, hermitian_wrt_measure=False, name=f"pullback:{kind}")


def _rotation(grid: ChartGrid, angle: float) -> np.ndarray:
    cid = grid.spec.catalog_id
    if cid in ("Sphere2", "Ball3", "Circle"):
        axis = grid.spec.names.index("phi") if "phi" in grid.spec.names else 0
        ax = grid.axes[axis]
        return _axis_kron(grid, {axis: _fourier_shift(ax.n, ax.coord.span, angle)})
    if cid == "Torus2":
        quarter = angle / (np.pi / 2)
        q = int(round(quarter))
        if abs(quarter - q) > 1e-12:
            raise NotCatalogIsometry(
                "a rotation of the flat torus maps the period lattice to itself only for multiples of pi/2"
            )
        mat = np.eye(grid.size)
        # (th, phi) -> (-phi, th) is swap then reflection of the first axis
        quarter_turn = _axis_kron(grid, {0: _reflect_perm(grid, 0)}) @ _swap_matrix(grid, 0, 1)
        for _ in range(q % 4):
            mat = quarter_turn @ mat
        return mat
    raise NotCatalogIsometry(f"no catalog rotation on {cid}")


def conjugate(op: SymmetryOperator, u: DiscreteOperator) -> SymmetryOperator:
    """``U O U^{-1}`` for a pullback unitary in the weighted inner product.

    ``U^{-1}`` is taken as the weighted adjoint; check
    :func:`pullback_unitarity_defect` first for non-catalog matrices.
    """
    um = sp.csr_matrix(u.matrix)
    mat = sp.csr_matrix(um @ sp.csr_matrix(op.matrix) @ u.adjoint())
    return replace(op, id=op.id, op=replace(op.op, matrix=mat))


def pullback_unitarity_defect(u: DiscreteOperator) -> float:
    m = u.dense()
    w = u.grid.weights
    gram = (m.conj().T * w[None, :]) @ m / w[:, None]
    return float(np.max(np.abs(gram - np.eye(m.shape[0]))))
