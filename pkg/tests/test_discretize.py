import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from conftest import FULL_RESOLUTION
from gft.discretize import (
    assemble_first_order,
    assemble_laplace_beltrami,
    build_grid,
    fourier_diff,
    locality_check,
    multiplication_operator,
    weighted_symmetry_defect,
)
from gft.errors import ResolutionTooLow
from gft.harmonics import sph_harm
from gft.killing import KillingField, catalog_fields
from gft.manifold import CATALOG_IDS, catalog


def _dense_eigs(grid):
    """Spectrum of -Delta in the symmetrized form."""
    lap = assemble_laplace_beltrami(grid)
    sw = np.sqrt(grid.weights)
    s = -(sw[:, None] * lap.dense()) / sw[None, :]
    return scipy.linalg.eigvalsh(0.5 * (s + s.T))


def test_circle_grid_example():
    g = build_grid(catalog("Circle"), (8,))
    assert np.allclose(g.nodes[:, 0], np.arange(8) * math.pi / 4)
    assert np.allclose(g.weights, math.pi / 4)


def test_volumes():
    assert build_grid(catalog("Torus2"), (16, 16)).weights.sum() == pytest.approx(4 * math.pi**2, rel=1e-14)
    assert build_grid(catalog("Sphere2"), (32, 64)).weights.sum() == pytest.approx(4 * math.pi, rel=1e-3)


def test_sphere_volume_converges():
    errs = [abs(build_grid(catalog("Sphere2"), (n, 2 * n)).weights.sum() - 4 * math.pi) for n in (16, 32, 64)]
    assert errs[0] > errs[1] > errs[2]


def test_sphere_nodes_offset_from_poles():
    g = build_grid(catalog("Sphere2"), (16, 32))
    th = np.unique(g.nodes[:, 0])
    assert np.allclose(th, (np.arange(16) + 0.5) * math.pi / 16)


def test_resolution_too_low():
    with pytest.raises(ResolutionTooLow):
        build_grid(catalog("Circle"), (3,))
    with pytest.raises(ResolutionTooLow):
        build_grid(catalog("Sphere2"), (8, 16))
    with pytest.raises(ResolutionTooLow):
        build_grid(catalog("Torus2"), (16,))


def test_circle_spectrum_exact():
    vals = _dense_eigs(build_grid(catalog("Circle"), (32,)))
    expect = np.sort([m * m for m in range(-16, 16)])
    assert np.max(np.abs(vals - expect)) <= 1e-10


def test_torus_plane_waves():
    g = build_grid(catalog("Torus2"), (16, 16))
    lap = assemble_laplace_beltrami(g)
    th, ph = g.nodes.T
    worst = 0.0
    for m in range(-7, 8):
        for n in range(-7, 8):
            f = np.exp(1j * (m * th + n * ph))
            worst = max(worst, np.max(np.abs(-(lap @ f) - (m * m + n * n) * f)))
    assert worst <= 1e-10


def test_sphere_first_nonzero():
    from gft.spectral import eig_decompose

    g = build_grid(catalog("Sphere2"), (48, 96))
    d = eig_decompose(assemble_laplace_beltrami(g), 4)
    assert d.eigenvalues[1] == pytest.approx(2.0, rel=1e-3)


@pytest.mark.parametrize("cid", CATALOG_IDS)
def test_measure_symmetry(cid, rng):
    g = build_grid(catalog(cid), FULL_RESOLUTION[cid])
    assert weighted_symmetry_defect(assemble_laplace_beltrami(g), rng) <= 1e-10
    for f in catalog_fields(g.spec).values():
        assert weighted_symmetry_defect(assemble_first_order(g, f), rng) <= 1e-10


@pytest.mark.parametrize("cid", ["Circle", "Torus2", "Sphere2"])
def test_constant_kernel(cid):
    g = build_grid(catalog(cid), FULL_RESOLUTION[cid])
    assert np.max(np.abs(assemble_laplace_beltrami(g) @ np.ones(g.size))) <= 1e-10


@pytest.mark.parametrize("cid", CATALOG_IDS)
def test_negative_semidefinite(cid):
    g = build_grid(catalog(cid), FULL_RESOLUTION[cid])
    # max eigenvalue of Delta
    assert -_dense_eigs(g).min() <= 1e-10


def test_fd_periodic_variant_also_symmetric(rng):
    g = build_grid(catalog("Torus2"), (16, 16), spectral=False)
    lap = assemble_laplace_beltrami(g)
    assert weighted_symmetry_defect(lap, rng) <= 1e-10
    assert np.max(np.abs(lap @ np.ones(g.size))) <= 1e-10


def test_first_order_examples():
    g = build_grid(catalog("Circle"), (16,))
    d = assemble_first_order(g, KillingField.from_strings(g.spec, ["1"]))
    th = g.nodes[:, 0]
    assert np.max(np.abs(d @ np.sin(th) - (-1j * np.cos(th)))) <= 1e-10

    tg = build_grid(catalog("Torus2"), (16, 16))
    p = assemble_first_order(tg, KillingField.from_strings(tg.spec, ["1", "0"]))
    vals = np.linalg.eigvalsh(p.dense())
    assert np.allclose(np.unique(np.round(vals, 8)), np.arange(-7, 8))

    sg = build_grid(catalog("Sphere2"), (32, 64))
    lz = assemble_first_order(sg, KillingField.from_strings(sg.spec, ["0", "1"]))
    y = sph_harm((1, 1), sg.nodes[:, 0], sg.nodes[:, 1])
    assert np.max(np.abs(lz @ y - y)) <= 1e-8


def test_fourier_derivative_exact_below_nyquist():
    n, length = 12, 2 * math.pi
    x = np.arange(n) * length / n
    d = fourier_diff(n, length)
    for k in range(1, n // 2):
        assert np.max(np.abs(d @ np.sin(k * x) - k * np.cos(k * x))) <= 1e-12


def test_locality():
    box = build_grid(catalog("Box3"), (12, 12, 12), spectral=False)
    loc = locality_check(assemble_laplace_beltrami(box))
    assert loc.local and loc.stencil_radius == 3
    mul = locality_check(multiplication_operator(box, np.arange(box.size, dtype=float)))
    assert mul.local and mul.stencil_radius == 0
    spec = locality_check(assemble_laplace_beltrami(build_grid(catalog("Torus2"), (8, 8))))
    assert spec.local and spec.pseudo_local_axes == (0, 1)
    assert str(mul) == "local(0)"


def test_dense_random_operator_is_nonlocal(rng):
    g = build_grid(catalog("Torus2"), (8, 8))
    from gft.discretize import DiscreteOperator

    a = rng.standard_normal((g.size, g.size))
    assert not locality_check(DiscreteOperator(a, g)).local


@given(st.integers(0, 6), st.integers(0, 6))
def test_plane_wave_property(m, n):
    g = build_grid(catalog("Torus2"), (14, 14))
    th, ph = g.nodes.T
    f = np.cos(m * th) * np.sin(n * ph + 0.3)
    lap = assemble_laplace_beltrami(g)
    assert np.allclose(-(lap @ f), (m * m + n * n) * f, atol=1e-9)
