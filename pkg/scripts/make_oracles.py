"""Compute the frozen reference values used by the test suite.

Nothing here imports ``gft``: every number comes from an independent route
(lattice enumeration, mpmath at 40 digits, 1-D quadrature, direct time
stepping).  Run once; the JSON files under tests/oracles are committed.

    python scripts/make_oracles.py
"""

import argparse
import json
import math
from collections import Counter
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy.special import eval_legendre, spherical_jn

OUT = Path(__file__).resolve().parents[1] / "tests" / "oracles"


def torus_lattice(limit=50):
    counts = Counter()
    r = int(math.isqrt(limit)) + 1
    for m in range(-r, r + 1):
        for n in range(-r, r + 1):
            if m * m + n * n <= limit:
                counts[m * m + n * n] += 1
    pairs = {}
    for lam in (0, 1, 2, 4, 5, 25):
        pairs[str(lam)] = sorted([m, n] for m in range(-r, r + 1) for n in range(-r, r + 1) if m * m + n * n == lam)
    lowest = sorted(m * m + n * n for m in range(-8, 8) for n in range(-8, 8))[:13]
    return {
        "multiplicity": {str(k): v for k, v in sorted(counts.items())},
        "pairs": pairs,
        "lowest13_16x16": lowest,
    }


def sphere_levels(lmax=8):
    return {"levels": [[l * (l + 1), 2 * l + 1] for l in range(lmax + 1)]}


def ball_levels(count=6):
    # Dirichlet at r = pi: lambda = (zero of j_l / pi)^2
    out = []
    for l in range(3):
        f = lambda x, l=l: mp.sqrt(mp.pi / (2 * x)) * mp.besselj(l + 0.5, x)
        zeros = []
        x = mp.mpf("0.5")
        prev = f(x)
        while len(zeros) < 2:
            x2 = x + mp.mpf("0.01")
            cur = f(x2)
            if prev * cur < 0:
                zeros.append(mp.findroot(f, (x, x2), solver="bisect"))
            x, prev = x2, cur
        out += [[l, float((z / mp.pi) ** 2)] for z in zeros]
    out.sort(key=lambda t: t[1])
    return {"levels": out[:count]}


def spherical_bessel_table():
    mp.mp.dps = 40
    rows = []
    for ell in (0, 1, 2, 5, 10, 20, 35, 50):
        for x in (0.0, 1e-3, 0.5, 1.0, math.pi, 7.3, 25.0, 60.0, 100.0):
            if x == 0.0:
                val = 1.0 if ell == 0 else 0.0
            else:
                val = float(mp.sqrt(mp.pi / (2 * x)) * mp.besselj(ell + mp.mpf(1) / 2, x))
            rows.append([ell, x, val])
    return {"rows": rows}


def sph_harm_table():
    mp.mp.dps = 40
    rows = []
    pts = [(0.3, 1.1), (1.2, 4.0), (2.9, 0.2), (math.pi / 2, 0.0)]
    for ell, m in ((0, 0), (1, 0), (1, 1), (1, -1), (3, 2), (8, -5), (20, 13), (60, 30), (100, 0), (100, 77)):
        for th, ph in pts:
            val = mp.spherharm(ell, m, th, ph)
            rows.append([ell, m, th, ph, float(mp.re(val)), float(mp.im(val))])
    return {"rows": rows}


def rayleigh_partial_waves(lmax=20, krs=(0.5, 1.0, 2.5, 5.0, 10.0)):
    mu, wt = np.polynomial.legendre.leggauss(200)
    out = {}
    for kr in krs:
        vals = []
        for ell in range(lmax + 1):
            integral = np.sum(wt * np.exp(1j * kr * mu) * eval_legendre(ell, mu))
            c = 2 * np.pi * math.sqrt((2 * ell + 1) / (4 * np.pi)) * integral
            closed = (1j) ** ell * math.sqrt(4 * np.pi * (2 * ell + 1)) * spherical_jn(ell, kr)
            assert abs(c - closed) < 1e-12, (kr, ell)
            vals.append([c.real, c.imag])
        out[str(kr)] = vals
    return {"coefficients": out}


def simulate_flow(slope, wraps, dt=1e-3):
    """Explicit time stepping of the constant field, recording theta = 0 crossings."""
    eps = math.atan(slope)
    v = np.array([math.cos(eps), math.sin(eps)])
    steps_per_wrap = int(math.ceil(2 * math.pi / (v[0] * dt)))
    total = wraps * steps_per_wrap
    t = np.arange(total + 1) * dt
    th = v[0] * t
    ph = v[1] * t
    k = np.floor(th / (2 * math.pi))
    cross = np.nonzero(np.diff(k) > 0)[0]
    # linear interpolation between the straddling steps
    frac = (2 * math.pi * k[cross + 1] - th[cross]) / (th[cross + 1] - th[cross])
    phis = np.mod(ph[cross] + frac * (ph[cross + 1] - ph[cross]), 2 * math.pi)
    phis = phis[: wraps - 1]
    s = np.sort(np.concatenate([[0.0], phis]))
    gaps = np.diff(np.concatenate([s, [2 * math.pi]]))
    return float(gaps.max()), len(s)


def flows():
    out = {}
    for name, slope in (("inv_sqrt2", 1 / math.sqrt(2)), ("sqrt2", math.sqrt(2))):
        gap, count = simulate_flow(slope, 4000)
        out[name] = {"slope": slope, "max_gap": gap, "crossings": count}
    # rational slopes: after q theta-wraps phi has advanced by p full turns
    for p, q in ((3, 4), (1, 5), (1, 10), (5, 1), (10, 1)):
        out[f"{p}/{q}"] = {"winding": [p, q]}
    return out


def write(name, payload):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / f"{name}.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", nargs="*", help="subset of oracle names")
    args = ap.parse_args()
    jobs = {
        "torus_lattice": torus_lattice,
        "sphere_levels": sphere_levels,
        "ball_levels": ball_levels,
        "spherical_bessel": spherical_bessel_table,
        "sph_harm": sph_harm_table,
        "rayleigh": rayleigh_partial_waves,
        "flows": flows,
    }
    for name, fn in jobs.items():
        if args.only and name not in args.only:
            continue
        write(name, fn())
        print("wrote", name)


if __name__ == "__main__":
    main()
