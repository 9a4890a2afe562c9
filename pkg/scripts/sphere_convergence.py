"""Grid refinement study on the 2-sphere.

For each theta resolution prints the l = 1 eigenvalue error, the worst
relative residual of -Delta Y_lm = l(l+1) Y_lm for l <= lmax, and the
observed order between consecutive rows.

    python scripts/sphere_convergence.py --n 24 48 96 160
"""

import argparse
import math

from gft.discretize import assemble_laplace_beltrami, build_grid
from gft.harmonics import sph_harm
from gft.manifold import catalog
from gft.spectral import eig_decompose


def ylm_residual(grid, lap, lmax):
    worst = 0.0
    th, ph = grid.nodes[:, 0], grid.nodes[:, 1]
    for ell in range(lmax + 1):
        for m in range(-ell, ell + 1):
            y = sph_harm((ell, m), th, ph)
            r = lap @ y + ell * (ell + 1) * y
            worst = max(worst, grid.norm(r) / max(1.0, ell * (ell + 1)) / grid.norm(y))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[24, 48, 96, 160], help="theta points")
    ap.add_argument("--lmax", type=int, default=8)
    ap.add_argument("--eig-limit", type=int, default=96, help="skip the eigensolve above this many theta points")
    args = ap.parse_args()
    # 4*lmax phi points resolve every |m| <= lmax exactly on the spectral axis
    n_phi = max(32, 4 * args.lmax)
    print(f"{'n_theta':>8} {'lambda_1 err':>14} {'Y_lm resid':>12} {'order':>6}")
    prev = None
    for n in args.n:
        grid = build_grid(catalog("Sphere2"), (n, n_phi))
        lap = assemble_laplace_beltrami(grid)
        err = "-"
        if n <= args.eig_limit:
            d = eig_decompose(lap, 4)
            err = f"{abs(d.eigenvalues[1] - 2.0):.3e}"
        res = ylm_residual(grid, lap, args.lmax)
        order = "-" if prev is None else f"{math.log(prev[1] / res) / math.log(n / prev[0]):.2f}"
        print(f"{n:>8} {err:>14} {res:>12.3e} {order:>6}")
        prev = (n, res)


if __name__ == "__main__":
    main()
