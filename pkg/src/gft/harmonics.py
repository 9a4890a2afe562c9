"""Spherical harmonics, spherical Bessel functions and the plane-wave expansion.

Phase convention: Condon-Shortley inside ``P_lm``, and
``Y_{l,-m} = (-1)^m conj(Y_lm)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IndexInvalid, OutOfChart

FOUR_PI = 4.0 * math.pi
_RESCALE = 1e250


@dataclass(frozen=True)
class SphericalHarmonicIndex:
    ell: int
    m: int

    def __post_init__(self):
        for v in (self.ell, self.m):
            if isinstance(v, bool) or int(v) != v:
                raise IndexInvalid(f"indices must be integers, got ({self.ell}, {self.m})")
        if self.ell < 0 or abs(self.m) > self.ell:
            raise IndexInvalid(f"need ell >= 0 and |m| <= ell, got ({self.ell}, {self.m})")


def _index(idx) -> SphericalHarmonicIndex:
    if isinstance(idx, SphericalHarmonicIndex):
        return idx
    ell, m = idx
    return SphericalHarmonicIndex(ell, m)


def legendre_table(lmax: int, theta) -> np.ndarray:
    """Normalized ``Pbar_lm(cos theta)`` for 0 <= m <= l <= lmax, shape (lmax+1, lmax+1, N).

    ``Y_lm = Pbar_lm e^{i m phi}``; computed by the standard three-term
    recurrences in l, seeded from the sectoral values, so no factorials appear.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(th < 0) or np.any(th > math.pi):
        raise OutOfChart("theta must lie in [0, pi]")
    x, s = np.cos(th), np.sin(th)
    out = np.zeros((lmax + 1, lmax + 1, th.size))
    pmm = np.full(th.size, math.sqrt(1.0 / FOUR_PI))
    for m in range(lmax + 1):
        if m > 0:
            pmm = -math.sqrt((2 * m + 1) / (2.0 * m)) * s * pmm
        out[m, m] = pmm
        if m < lmax:
            out[m + 1, m] = math.sqrt(2 * m + 3) * x * pmm
        for ell in range(m + 2, lmax + 1):
            a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
            b = math.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
            out[ell, m] = a * (x * out[ell - 1, m] - b * out[ell - 2, m])
    return out


def sph_harm(idx, theta, phi):
    """``Y_lm(theta, phi)``; broadcasts over array arguments."""
    i = _index(idx)
    th, ph = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    m = abs(i.m)
    p = legendre_table(i.ell, th.reshape(-1))[i.ell, m].reshape(th.shape)
    y = p * np.exp(1j * m * ph)
    if i.m < 0:
        y = (-1) ** m * np.conj(y)
    return y if y.ndim else complex(y)


def _miller(ell: int, x: float) -> float:
    top = ell + int(x) + 30 + int(math.sqrt(40.0 * (ell + x)))
    nxt, cur = 0.0, 1e-300
    val = 0.0
    j0 = j1 = 0.0
    for k in range(top, 0, -1):
        prev = (2 * k + 1) / x * cur - nxt
        nxt, cur = cur, prev
        if k - 1 == ell:
            val = cur
        if abs(cur) > _RESCALE:
            cur /= _RESCALE
            nxt /= _RESCALE
            val /= _RESCALE
        if k == 1:
            j1, j0 = nxt, cur
    exact0 = math.sin(x) / x
    exact1 = math.sin(x) / x**2 - math.cos(x) / x
    if x < 1.0 or abs(exact0) >= abs(exact1):
        return val * exact0 / j0
    return val * exact1 / j1


def sph_bessel_j(ell: int, x):
    """Spherical Bessel ``j_l(x)`` for x >= 0 by Miller's downward recurrence."""
    if int(ell) != ell or ell < 0:
        raise IndexInvalid(f"ell must be a non-negative integer, got {ell}")
    ell = int(ell)
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise OutOfChart("x must be >= 0")
    out = np.empty(xs.shape)
    flat = out.reshape(-1)
    for n, xv in enumerate(xs.reshape(-1)):
        if xv == 0.0:
            flat[n] = 1.0 if ell == 0 else 0.0
        elif ell == 0:
            flat[n] = math.sin(xv) / xv
        else:
            flat[n] = _miller(ell, float(xv))
    return float(out) if out.ndim == 0 else out


def sphere_quadrature(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre in cos(theta) times uniform phi: nodes theta, phi and weights for dOmega."""
    mu, wmu = np.polynomial.legendre.leggauss(n_theta)
    th = np.arccos(mu)
    ph = 2 * math.pi * np.arange(n_phi) / n_phi
    w = np.outer(wmu, np.full(n_phi, 2 * math.pi / n_phi))
    return th, ph, w


def rayleigh_coefficients(k_vec, r: float, ell_max: int, n_theta: int | None = None) -> dict:
    """``c_lm = int conj(Y_lm) exp(i k.x) dOmega`` over the sphere of radius r.

    With the unnormalized solid angle the plane wave satisfies
    ``sum |c_lm|^2 -> 4 pi``; see :func:`rayleigh_parseval`.
    """
    k = np.asarray(k_vec, dtype=float).reshape(3)
    kn = float(np.linalg.norm(k))
    if kn <= 0:
        raise OutOfChart("|k| must be positive")
    if ell_max < 0 or ell_max > 50:
        raise IndexInvalid("ell_max must be in [0, 50]")
    kr = kn * r
    nt = n_theta or int(ell_max + kr + 40)
    nph = 2 * nt
    th, ph, w = sphere_quadrature(nt, nph)
    st = np.sin(th)
    xyz = r * np.stack([np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)), np.outer(np.cos(th), np.ones(nph))])
    f = np.exp(1j * np.tensordot(k, xyz, axes=1)) * w
    # phi-integral by FFT: F[t, m] = sum_p f[t, p] exp(-i m phi_p)
    fm = np.fft.fft(f, axis=1)
    table = legendre_table(ell_max, th)
    out = {}
    for ell in range(ell_max + 1):
        for m in range(-ell, ell + 1):
            am = abs(m)
            p = table[ell, am]
            if m >= 0:
                out[(ell, m)] = complex(np.sum(p * fm[:, m % nph]))
            else:
                # conj(Y_{l,-|m|}) = (-1)^m Pbar e^{-i m phi} with m < 0
                out[(ell, m)] = complex((-1) ** am * np.sum(p * fm[:, m % nph]))
    return out


def rayleigh_parseval(coeffs: dict) -> float:
    """``sum |c_lm|^2 / 4 pi``; increases to 1 with ell_max."""
    return float(sum(abs(c) ** 2 for c in coeffs.values()) / FOUR_PI)


def partial_wave(ell: int, kr: float) -> complex:
    """Closed form ``i^l sqrt(4 pi (2l+1)) j_l(kr)`` of the m = 0 coefficient for k along z."""
    return (1j) ** ell * math.sqrt(FOUR_PI * (2 * ell + 1)) * sph_bessel_j(ell, kr)


def per_ell_norms(coeffs: dict) -> dict:
    norms: dict = {}
    for (ell, _), c in coeffs.items():
        norms[ell] = norms.get(ell, 0.0) + abs(c) ** 2
    return {ell: math.sqrt(v) for ell, v in sorted(norms.items())}
