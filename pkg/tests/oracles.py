"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code: each routine recomputes
its quantity by a different route (exact arithmetic, dense linear algebra,
high precision quadrature or exhaustive enumeration).
"""
from fractions import Fraction
from itertools import product

import mpmath
import numpy as np
from scipy import linalg


def radical_inverse_digits(k, base):
    """Digit reversal in exact rational arithmetic."""
    digits = []
    while k:
        digits.append(k % base)
        k //= base
    return sum(Fraction(dg, base ** (i + 1)) for i, dg in enumerate(digits))


def star_discrepancy_exhaustive(points):
    """sup over anchored boxes, both [0, a) and [0, a], corners on the point grid and 1."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    axes = [sorted(set(pts[:, i].tolist()) | {1.0}) for i in range(d)]
    worst = 0.0
    for corner in product(*axes):
        c = np.array(corner)
        vol = float(np.prod(c))
        open_count = np.sum(np.all(pts < c, axis=1))
        closed_count = np.sum(np.all(pts <= c, axis=1))
        worst = max(worst, vol - open_count / n, closed_count / n - vol)
    return worst


def star_rhs_mp(bases, N):
    """Right side of the Halton discrepancy bound in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    L = mpmath.log(N)
    prod = mpmath.mpf(1)
    for b in bases:
        prod *= (b - 1) / (2 * mpmath.log(b)) * L + mpmath.mpf(b + 1) / 2
    return float(len(bases) / mpmath.mpf(N) + prod / N)


def gaussian_tail_l2(R0):
    """sqrt(int_{|x| > R0} e^{-x^2} dx) in high precision."""
    mpmath.mp.dps = 40
    return float(mpmath.sqrt(mpmath.sqrt(mpmath.pi) * mpmath.erfc(R0)))


def dense_laplacian(n, h):
    D = (np.eye(n, k=1) - np.eye(n, k=-1)) / (2 * h)
    return D @ D


def exact_flow(H, psi, t):
    """exp(-i t H) psi through the eigendecomposition of a dense Hermitian H."""
    lam, U = linalg.eigh(H)
    return U @ (np.exp(-1j * t * lam) * (U.conj().T @ psi))


def cn_dense(H, psi, tau, steps):
    """Crank-Nicolson by dense solves."""
    I = np.eye(H.shape[0])
    A = I + 0.5j * tau * H
    B = I - 0.5j * tau * H
    for _ in range(steps):
        psi = linalg.solve(A, B @ psi)
    return psi


def factorial_k(eps, r):
    """Smallest K with r^(2K+2)/(2K+2)! + r^(2K+3)/(2K+3)! <= eps, exact factorials."""
    K = 0
    while True:
        v = mpmath.mpf(r) ** (2 * K + 2) / mpmath.factorial(2 * K + 2) \
            + mpmath.mpf(r) ** (2 * K + 3) / mpmath.factorial(2 * K + 3)
        if v <= eps:
            return K
        K += 1


def piecewise_linear_mean(knots, values, a, b):
    """Exact mean over [a, b] of the piecewise linear interpolant."""
    xs = np.concatenate([[a], knots[(knots > a) & (knots < b)], [b]])
    ys = np.interp(xs, knots, values)
    return float(np.sum((ys[1:] + ys[:-1]) / 2 * np.diff(xs)) / (b - a))


def piecewise_linear_tv(knots, values, a, b):
    xs = np.concatenate([[a], knots[(knots > a) & (knots < b)], [b]])
    ys = np.interp(xs, knots, values)
    return float(np.sum(np.abs(np.diff(ys))))


def hermite_mp(n, x):
    """Normalised Hermite function by mpmath's Hermite polynomial."""
    mpmath.mp.dps = 60
    x = mpmath.mpf(x)
    c = 1 / mpmath.sqrt(mpmath.mpf(2) ** n * mpmath.factorial(n) * mpmath.sqrt(mpmath.pi))
    return float(c * mpmath.hermite(n, x) * mpmath.exp(-x * x / 2))
