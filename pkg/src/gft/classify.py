"""Algebraic (Type I/II/III) and topological (D/C/SD) classification.

Both classifiers are pure functions of :class:`ClassificationInput`; the
rationale lists every branch taken so a result can be replayed by hand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InconsistentCompactness, MissingFrobeniusEvidence, ValidationError
from .killing import interior_samples, stackel_frobenius_residual
from .manifold import ManifoldSpec
from .spectral import CONTINUUM, SpectralDecomposition
from .symmetry import KILLING_TENSOR, LAPLACIAN, MasaCandidate, SymmetryOperator

TYPE_I, TYPE_II, TYPE_III = "TypeI", "TypeII", "TypeIII"
DISCRETE_AXIS, CONTINUUM_AXIS = "discrete", "continuum"
FROBENIUS_TOL = 1e-6

_SHORT = {TYPE_I: "I", TYPE_II: "II", TYPE_III: "III"}


@dataclass(frozen=True)
class ClassificationInput:
    manifold: ManifoldSpec
    masa: MasaCandidate
    degeneracy_present: bool
    frobenius_pass: Optional[bool] = None
    axis_topologies: tuple[str, ...] = ()

    def __post_init__(self):
        bad = [t for t in self.axis_topologies if t not in (DISCRETE_AXIS, CONTINUUM_AXIS)]
        if bad:
            raise ValidationError(f"axis topology must be discrete or continuum, got {bad}")


@dataclass(frozen=True)
class ClassificationResult:
    algebraic: str
    topology: str
    rationale: tuple[tuple[str, str], ...]

    @property
    def cell(self) -> str:
        return f"{_SHORT[self.algebraic]}-{self.topology}"

    def to_dict(self) -> dict:
        return {
            "algebraic": self.algebraic,
            "topology": self.topology,
            "cell": self.cell,
            "rationale": [{"rule": r, "decision": d} for r, d in self.rationale],
        }


def effective_rank(masa: MasaCandidate) -> int:
    """Rank without a functionally dependent Laplacian."""
    lap = [m for m in masa.members if masa.origins.get(m) == LAPLACIAN]
    if masa.includes_laplacian_functionally and lap:
        return masa.rank - len(lap)
    return masa.rank


def _algebraic(inp: ClassificationInput, why: list) -> str:
    n = inp.manifold.dim
    masa = inp.masa
    tensors = [m for m in masa.members if masa.origins.get(m) == KILLING_TENSOR]
    if tensors and inp.frobenius_pass is None:
        raise MissingFrobeniusEvidence(f"rank-2 members {tensors} need a Frobenius verdict")
    if not inp.degeneracy_present:
        if n == 1:
            why.append(("non-degenerate spectrum", "n = 1: MASA complete and Staeckel, TypeI"))
            return TYPE_I
        why.append(("non-degenerate spectrum", f"n = {n} >= 2 with simple spectrum: MASA-incomplete at m = 2, TypeIII"))
        return TYPE_III
    why.append(("degenerate spectrum", "inspect MASA completeness at m = 2"))
    rank = effective_rank(masa)
    if rank < n - 1:
        why.append(("MASA rank", f"rank {rank} < n - 1 = {n - 1}: TypeIII"))
        return TYPE_III
    why.append(("MASA rank", f"rank {rank} >= n - 1 = {n - 1}: MASA complete"))
    if tensors and not inp.frobenius_pass:
        why.append(("Frobenius on rank-2 members", f"{', '.join(tensors)} fail e ^ de = 0: TypeII"))
        return TYPE_II
    if tensors:
        why.append(("Frobenius on rank-2 members", f"{', '.join(tensors)} integrable: Staeckel, TypeI"))
    else:
        why.append(("Frobenius on rank-2 members", "no rank-2 members: coordinate fields, TypeI"))
    return TYPE_I


def classify_algebraic(inp: ClassificationInput) -> str:
    return _algebraic(inp, [])


def _topology(inp: ClassificationInput, why: list) -> str:
    tags = inp.axis_topologies
    if not tags:
        raise ValidationError("axis_topologies must be populated")
    if inp.manifold.compact:
        if CONTINUUM_AXIS in tags:
            raise InconsistentCompactness(f"{inp.manifold.name} is compact but an axis is tagged continuum")
        why.append(("compactness", "compact manifold: every label axis discrete, D"))
        return "D"
    why.append(("compactness", "truncated manifold: axis tags taken from the manifest"))
    if all(t == DISCRETE_AXIS for t in tags):
        why.append(("axis tags", "all discrete: D"))
        return "D"
    if all(t == CONTINUUM_AXIS for t in tags):
        why.append(("axis tags", "all continuum: C"))
        return "C"
    why.append(("axis tags", f"mixed {list(tags)}: SD"))
    return "SD"


def classify_topology(inp: ClassificationInput) -> str:
    return _topology(inp, [])


def grid_cell(inp: ClassificationInput) -> ClassificationResult:
    why: list = []
    alg = _algebraic(inp, why)
    top = _topology(inp, why)
    return ClassificationResult(alg, top, tuple(why))


def frobenius_evidence(ops: Sequence[SymmetryOperator], spec: ManifoldSpec, samples: int = 16, seed: int = 42) -> Optional[bool]:
    """Frobenius verdict for the rank-2 members, None when there are none."""
    tensors = [o.source for o in ops if o.origin == KILLING_TENSOR and o.source is not None]
    if not tensors:
        return None
    pts = interior_samples(spec, samples, np.random.default_rng(seed))
    return all(stackel_frobenius_residual(t, pts) <= FROBENIUS_TOL for t in tensors)


def axis_tag(spectrum: str) -> str:
    return CONTINUUM_AXIS if spectrum == CONTINUUM else DISCRETE_AXIS


def build_input(
    masa: MasaCandidate,
    decomp: SpectralDecomposition,
    catalog: Sequence[SymmetryOperator] = (),
    frobenius_pass: Optional[bool] = None,
) -> ClassificationInput:
    """Assemble the classifier input from search results."""
    spec = decomp.grid.spec
    by_id = {o.id: o for o in catalog}
    chosen = [by_id[m] for m in masa.members if m in by_id]
    if frobenius_pass is None:
        frobenius_pass = frobenius_evidence(chosen, spec)
    tags = tuple(axis_tag(masa.spectra.get(m, "discrete")) for m in masa.members)
    degenerate = any(c.multiplicity > 1 for c in decomp.clusters)
    return ClassificationInput(spec, masa, degenerate, frobenius_pass, tags)
