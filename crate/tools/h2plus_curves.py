#!/usr/bin/env python3
"""Tabulate the 1s sigma_g / 2p sigma_u Born-Oppenheimer curves of H2+ and the
g-u transition dipole.

The clamped-nuclei one-electron problem separates in prolate spheroidal
coordinates (xi, eta). For a trial separation parameter p = R*sqrt(-E/2) the
eta equation is diagonalised in a Legendre basis and the xi equation in a
scaled Laguerre basis; the electronic energy follows from the root of
mu_xi(p) + lambda_eta(p) = 0. Both one-dimensional problems converge
exponentially, so the table is accurate to ~1e-10 hartree.

Output columns (atomic units): R  V_g  V_u  d, where V = E_el + 1/R and the
common dissociation limit is shifted to zero.
"""
import argparse
import sys

import numpy as np
from scipy.optimize import brentq
from scipy.special import eval_genlaguerre, eval_laguerre, roots_laguerre, roots_legendre

N_XI = 48
N_ETA = 80
_GL_X, _GL_W = roots_legendre(400)


def _legendre_table(lmax, x):
    p = np.zeros((lmax + 1, x.size))
    p[0] = 1.0
    if lmax > 0:
        p[1] = x
    for l in range(1, lmax):
        p[l + 1] = ((2 * l + 1) * x * p[l] - l * p[l - 1]) / (l + 1)
    # orthonormal on [-1, 1]
    return p * np.sqrt((2 * np.arange(lmax + 1) + 1) / 2.0)[:, None]


_PL = _legendre_table(2 * N_ETA + 1, _GL_X)


def eta_problem(p, parity):
    ls = np.arange(parity, 2 * N_ETA + parity, 2)
    basis = _PL[ls]
    eta2 = (basis * _GL_W * _GL_X**2) @ basis.T
    m = np.diag(ls * (ls + 1.0)) - p * p * eta2
    w, v = np.linalg.eigh(m)
    return w[0], v[:, 0], ls


def xi_problem(p, r):
    y, w = roots_laguerre(N_XI + 4)
    x = y / (2 * p)
    ks = np.arange(N_XI)
    lk = np.array([eval_laguerre(k, y) for k in ks])
    dlk = np.array([-eval_genlaguerre(k - 1, 1, y) if k > 0 else 0 * y for k in ks])
    dphi = 2 * p * (dlk - 0.5 * lk)
    kin = (dphi * w * (x * x + 2 * x)) @ dphi.T / (2 * p)
    pot = (lk * w * (p * p * (x + 1) ** 2 - 2 * r * (x + 1))) @ lk.T / (2 * p)
    # basis overlap is identity / (2p)
    h = 2 * p * (kin + pot)
    e, v = np.linalg.eigh(h)
    return e[0], v[:, 0]


def solve(r, parity):
    f = lambda p: xi_problem(p, r)[0] + eta_problem(p, parity)[0]
    grid = np.linspace(r * 0.3, r * 1.2 + 0.5, 120)
    vals = [f(p) for p in grid]
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa * fb < 0:
            p = brentq(f, a, b, xtol=1e-15, rtol=1e-15)
            return p, -2 * p * p / (r * r)
    raise RuntimeError(f"no root at R={r} parity={parity}")


def xi_function(p, coeffs, x):
    y = 2 * p * x
    return np.exp(-p * x) * sum(c * eval_laguerre(k, y) for k, c in enumerate(coeffs))


def transition_dipole(r, pg, pu):
    a = r / 2
    _, cg = xi_problem(pg, r)
    _, cu = xi_problem(pu, r)
    _, yg, lg = eta_problem(pg, 0)
    _, yu, lu = eta_problem(pu, 1)
    s = pg + pu
    yq, wq = roots_laguerre(2 * N_XI + 8)
    x = yq / s
    wx = wq / s * np.exp(yq)
    xg, xu = xi_function(pg, cg, x), xi_function(pu, cu, x)
    xi = x + 1
    eg = yg @ _PL[lg]
    eu = yu @ _PL[lu]

    def norm(xf, ef):
        return (np.sum(wx * xf * xf * xi**2) * np.sum(_GL_W * ef * ef)
                - np.sum(wx * xf * xf) * np.sum(_GL_W * ef * ef * _GL_X**2))

    ng = norm(xg, eg)
    nu = norm(xu, eu)
    ixi3 = np.sum(wx * xg * xu * xi**3)
    ixi1 = np.sum(wx * xg * xu * xi)
    ie1 = np.sum(_GL_W * eg * eu * _GL_X)
    ie3 = np.sum(_GL_W * eg * eu * _GL_X**3)
    return abs(a * (ixi3 * ie1 - ixi1 * ie3) / np.sqrt(ng * nu))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--r-min", type=float, default=0.2)
    ap.add_argument("--r-max", type=float, default=20.0)
    ap.add_argument("--step", type=float, default=0.05)
    args = ap.parse_args()
    rs = np.round(np.arange(args.r_min, args.r_max + 0.5 * args.step, args.step), 10)
    out = sys.stdout
    out.write("# H2+ Born-Oppenheimer curves, exact two-centre solution\n")
    out.write("# columns: R [bohr]  V_g [hartree]  V_u [hartree]  d [a.u.]\n")
    out.write("# V = E_electronic + 1/R + 1/2 (dissociation limit H(1s) + p at zero)\n")
    out.write("# d = <1s sigma_g| z |2p sigma_u>, z along the internuclear axis\n")
    for r in rs:
        pg, eg = solve(r, 0)
        pu, eu = solve(r, 1)
        d = transition_dipole(r, pg, pu)
        out.write(f"{r:8.3f} {eg + 1 / r + 0.5: .12e} {eu + 1 / r + 0.5: .12e} {d: .10e}\n")


if __name__ == "__main__":
    main()
