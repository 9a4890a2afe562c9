"""End-to-end worked examples: R^3 (Cartesian vs spherical) and the flat torus."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import build_input, grid_cell
from .discretize import assemble_laplace_beltrami, build_grid
from .killing import integrate_flow, rotated_masa_labels
from .manifold import catalog
from .spectral import eig_decompose, gft_forward
from .symmetry import (
    change_of_basis,
    default_catalog,
    laplacian_operator,
    masa_search,
    rotated_torus_generators,
    unitarity_defect,
)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ReportConfig:
    box_points: tuple[int, int, int] = (8, 8, 8)
    box_k: int = 27
    ball_points: tuple[int, int, int] = (10, 20, 16)
    ball_k: int = 40
    torus_points: tuple[int, int] = (16, 16)
    torus_k: int = 41
    rational_tan: tuple[int, int] = (3, 4)
    irrational_tan: float = 1.0 / math.sqrt(2.0)
    flow_wraps: int = 4000
    parseval_vectors: int = 5
    seed: int = 42


def _parseval(decomp, labels, rng, count: int) -> float:
    """Worst relative Parseval defect over random vectors from the computed span."""
    worst = 0.0
    grid = decomp.grid
    for _ in range(count):
        c = rng.standard_normal(decomp.k) + 1j * rng.standard_normal(decomp.k)
        psi = decomp.eigenvectors @ c
        coeffs = gft_forward(decomp, labels, psi)
        n2 = grid.norm(psi) ** 2
        worst = max(worst, abs(n2 - coeffs.norm_sq()) / n2)
    return float(worst)


def _example(name: str, grid, k: int, ops, rng, cfg: ReportConfig) -> dict:
    lap = assemble_laplace_beltrami(grid)
    decomp = eig_decompose(lap, k)
    cands = masa_search(ops, decomp, seed=cfg.seed)
    top = cands[0]
    cell = grid_cell(build_input(top, decomp, ops))
    return {
        "manifold": grid.spec.name,
        "points": list(grid.shape),
        "clusters": [[round(lam, 9) + 0.0, m] for lam, m in decomp.cluster_values()],
        "masa": top.to_dict(),
        "classification": cell.to_dict(),
        "cell": cell.cell,
        "parseval_residual": _parseval(top.decomposition, top.labels, rng, cfg.parseval_vectors),
    }, decomp, top


def report_worked_examples(cfg: ReportConfig = ReportConfig()) -> dict:
    rng = np.random.default_rng(cfg.seed)
    out: dict = {"format_version": FORMAT_VERSION, "examples": {}, "cells": {}}

    box = build_grid(catalog("Box3"), cfg.box_points)
    ex, _, _ = _example("Box3-Cartesian", box, cfg.box_k, default_catalog(box), rng, cfg)
    out["examples"]["Box3-Cartesian"] = ex

    ball = build_grid(catalog("Ball3"), cfg.ball_points)
    ex, _, _ = _example("Ball3-spherical", ball, cfg.ball_k, default_catalog(ball), rng, cfg)
    out["examples"]["Ball3-spherical"] = ex

    torus = build_grid(catalog("Torus2"), cfg.torus_points)
    ex, decomp, axis_masa = _example("Torus2-axis", torus, cfg.torus_k, default_catalog(torus), rng, cfg)
    out["examples"]["Torus2-axis"] = ex

    p, q = cfg.rational_tan
    for label, eps in (("Torus2-rotated-rational", math.atan2(p, q)), ("Torus2-rotated-irrational", math.atan(cfg.irrational_tan))):
        ops = rotated_torus_generators(torus, eps) + [laplacian_operator(torus)]
        ex, _, rot = _example(label, torus, cfg.torus_k, ops, rng, cfg)
        fibers = change_of_basis(axis_masa.decomposition, rot.decomposition)
        axis_labels = np.array([t[1:] for t in axis_masa.labels.tuples])
        rotated, lam = rotated_masa_labels(eps, np.rint(axis_labels))
        ex["eps"] = eps
        ex["fiber_unitarity_max"] = max(unitarity_defect(w) for w in fibers)
        ex["label_norm_defect"] = float(np.max(np.abs(lam - np.sum(np.rint(axis_labels) ** 2, axis=1))))
        out["examples"][label] = ex

    m = np.arange(-10, 11)
    mm, nn = [a.ravel() for a in np.meshgrid(m, m)]
    lam0 = np.sort(mm**2 + nn**2)
    eps = math.atan2(p, q)
    _, lam1 = rotated_masa_labels(eps, np.column_stack([mm, nn]))
    out["rotated_spectrum_multiset_equal"] = bool(np.array_equal(np.rint(np.sort(lam1)).astype(int), lam0))
    out["rotated_spectrum_max_defect"] = float(np.max(np.abs(np.sort(lam1) - lam0)))

    flows = {}
    for key, slope in ((f"{p}/{q}", p / q), ("irrational", cfg.irrational_tan)):
        tr = integrate_flow(slope, (0.0, 0.0), cfg.flow_wraps)
        flows[key] = {
            "slope": slope,
            "closed": tr.closed,
            "winding": list(tr.winding) if tr.winding else None,
            "wraps": tr.wraps,
            "max_section_gap": tr.max_gap,
        }
    out["flows"] = flows
    out["cells"] = {name: ex["cell"] for name, ex in out["examples"].items()}
    out["topology_differs_box_vs_ball"] = (
        out["examples"]["Box3-Cartesian"]["classification"]["topology"]
        != out["examples"]["Ball3-spherical"]["classification"]["topology"]
    )
    return out
