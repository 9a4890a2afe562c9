import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import oracle
from gft.discretize import assemble_first_order, assemble_laplace_beltrami, build_grid
from gft.errors import IndexInvalid, OutOfChart
from gft.harmonics import (
    SphericalHarmonicIndex,
    partial_wave,
    per_ell_norms,
    rayleigh_coefficients,
    rayleigh_parseval,
    sph_bessel_j,
    sph_harm,
    sphere_quadrature,
)
from gft.killing import KillingField
from gft.manifold import catalog


def test_ylm_examples():
    assert sph_harm((0, 0), 0.4, 2.0) == pytest.approx(0.28209479177387814, rel=1e-14)
    for th in (1e-6, 0.3, 2.0):
        assert sph_harm((1, 0), th, 0.0) == pytest.approx(math.sqrt(3 / (4 * math.pi)) * math.cos(th), rel=1e-13)


def test_ylm_oracle():
    for ell, m, th, ph, re, im in oracle("sph_harm")["rows"]:
        y = sph_harm((ell, m), th, ph)
        assert abs(y - complex(re, im)) <= 1e-12 * max(1.0, abs(complex(re, im))), (ell, m)


def test_negative_m_convention():
    th, ph = 0.9, 1.7
    for ell in range(1, 6):
        for m in range(1, ell + 1):
            assert sph_harm((ell, -m), th, ph) == pytest.approx((-1) ** m * np.conj(sph_harm((ell, m), th, ph)))


def test_high_degree_no_overflow():
    y = sph_harm((100, 50), 1.0, 0.3)
    assert math.isfinite(abs(y)) and abs(y) < 10


def test_index_errors():
    for bad in [(-1, 0), (2, 3), (1.5, 0), (True, 0)]:
        with pytest.raises(IndexInvalid):
            SphericalHarmonicIndex(*bad)
    with pytest.raises(OutOfChart):
        sph_harm((1, 0), 4.0, 0.0)
    with pytest.raises(IndexInvalid):
        sph_bessel_j(-1, 1.0)
    with pytest.raises(OutOfChart):
        sph_bessel_j(1, -0.5)
    with pytest.raises(IndexInvalid):
        rayleigh_coefficients([0, 0, 1], 1.0, 51)
    with pytest.raises(OutOfChart):
        rayleigh_coefficients([0, 0, 0], 1.0, 5)


def test_orthonormality_on_quadrature():
    th, ph, w = sphere_quadrature(16, 32)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    idx = [(ell, m) for ell in range(11) for m in range(-ell, ell + 1)]
    ys = np.array([sph_harm(i, tt, pp).ravel() for i in idx])
    gram = (ys.conj() * w.ravel()) @ ys.T
    assert np.max(np.abs(gram - np.eye(len(idx)))) <= 1e-8


def test_orthonormality_on_fd_grid_converges():
    """The midpoint grid reaches the 1e-8 level only asymptotically; check the trend."""
    errs = []
    for n in (16, 32, 64):
        g = build_grid(catalog("Sphere2"), (n, 2 * n))
        idx = [(ell, m) for ell in range(4) for m in range(-ell, ell + 1)]
        ys = np.array([sph_harm(i, g.nodes[:, 0], g.nodes[:, 1]) for i in idx])
        gram = (ys.conj() * g.weights) @ ys.T
        errs.append(np.max(np.abs(gram - np.eye(len(idx)))))
    assert errs[0] > errs[1] > errs[2]


def test_bessel_examples():
    assert sph_bessel_j(0, 0.0) == 1.0
    assert sph_bessel_j(3, 0.0) == 0.0
    assert abs(sph_bessel_j(0, math.pi)) <= 1e-14
    assert sph_bessel_j(1, 1.0) == pytest.approx(math.sin(1) - math.cos(1), rel=1e-12)
    assert sph_bessel_j(1, 1.0) == pytest.approx(0.30116868, abs=1e-8)


def test_bessel_oracle():
    for ell, x, want in oracle("spherical_bessel")["rows"]:
        got = sph_bessel_j(ell, x)
        assert abs(got - want) <= 1e-12 * max(abs(want), 1e-300) or abs(got - want) <= 1e-15, (ell, x)


@given(st.integers(1, 40), st.floats(0.01, 100))
def test_bessel_recurrence(ell, x):
    # j_{l-1} + j_{l+1} = (2l+1)/x j_l
    lhs = sph_bessel_j(ell - 1, x) + sph_bessel_j(ell + 1, x)
    rhs = (2 * ell + 1) / x * sph_bessel_j(ell, x)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12 * max(1.0, abs(rhs)))


def test_bessel_vectorized():
    xs = np.array([0.0, 0.5, 2.0])
    assert np.allclose(sph_bessel_j(2, xs), [sph_bessel_j(2, float(x)) for x in xs])


def test_laplacian_eigen_relation():
    g = build_grid(catalog("Sphere2"), (160, 32))
    lap = assemble_laplace_beltrami(g)
    worst = 0.0
    for ell in range(9):
        for m in range(-ell, ell + 1):
            y = sph_harm((ell, m), g.nodes[:, 0], g.nodes[:, 1])
            r = lap @ y + ell * (ell + 1) * y
            worst = max(worst, g.norm(r) / max(1.0, ell * (ell + 1)) / g.norm(y))
    assert worst <= 1e-3


def test_lz_eigen_relation():
    g = build_grid(catalog("Sphere2"), (24, 48))
    lz = assemble_first_order(g, KillingField.from_strings(g.spec, ["0", "1"]))
    for ell in range(9):
        for m in range(-ell, ell + 1):
            y = sph_harm((ell, m), g.nodes[:, 0], g.nodes[:, 1])
            assert np.max(np.abs(lz @ y - m * y)) <= 1e-8


def test_rayleigh_axial():
    c = rayleigh_coefficients([0, 0, 2.5], 1.0, 20)
    assert max(abs(v) for (ell, m), v in c.items() if m != 0) <= 1e-10
    for ell in range(21):
        assert abs(c[(ell, 0)] - partial_wave(ell, 2.5)) <= 1e-8


def test_rayleigh_parseval_monotone():
    k = [0.3, -1.1, 2.0]
    vals = [rayleigh_parseval(rayleigh_coefficients(k, 1.5, lmax)) for lmax in range(0, 16)]
    # partial sums of non-negative terms; slack covers summation roundoff only
    assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1.0, abs=1e-10)
    assert vals[0] < 1.0


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi), st.floats(0.2, 8))
def test_rayleigh_rotation_invariance(th, ph, kr):
    z = per_ell_norms(rayleigh_coefficients([0, 0, kr], 1.0, 12))
    k = kr * np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
    r = per_ell_norms(rayleigh_coefficients(k, 1.0, 12))
    for ell in z:
        assert r[ell] == pytest.approx(z[ell], abs=1e-8)


def test_rayleigh_reconstructs_plane_wave():
    k = np.array([0.4, 0.7, -1.2])
    c = rayleigh_coefficients(k, 1.0, 25)
    th, ph = 1.1, 0.4
    x = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
    total = sum(v * sph_harm(key, th, ph) for key, v in c.items())
    assert total == pytest.approx(np.exp(1j * k @ x), abs=1e-10)
