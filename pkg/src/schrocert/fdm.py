"""Finite differences on cell-constant grid functions (zero ghost cells).

The Laplacian is the square of the symmetric difference, so its stencil has
stride 2h: in the interior (f(x+2h) - 2 f(x) + f(x-2h)) / (4 h^2).  Even and
odd cells along an axis only talk to each other through the boundary band.
"""
from __future__ import annotations

from math import comb

import numpy as np

from .core import GridFunction, NormReport, grid_l2_norm


def _sym_diff(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(v)
    n = v.shape[axis]
    hi = [slice(None)] * v.ndim
    lo = [slice(None)] * v.ndim
    mid = [slice(None)] * v.ndim
    # out[j] = (v[j+1] - v[j-1]) / 2h with v[-1] = v[n] = 0
    hi[axis], mid[axis] = slice(1, n), slice(0, n - 1)
    out[tuple(mid)] += v[tuple(hi)]
    lo[axis], mid[axis] = slice(0, n - 1), slice(1, n)
    out[tuple(mid)] -= v[tuple(lo)]
    return out / (2 * h)


def _laplacian(v: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(v)
    for ax in range(v.ndim):
        out += _sym_diff(_sym_diff(v, ax, h), ax, h)
    return out


def sym_diff(f: GridFunction, axis: int) -> GridFunction:
    if not 0 <= axis < f.dimension:
        raise ValueError("axis out of range")
    return f.with_values(_sym_diff(f.values, axis, f.h))


def gradient(f: GridFunction) -> list:
    return [sym_diff(f, ax) for ax in range(f.dimension)]


def laplacian_h(f: GridFunction) -> GridFunction:
    return f.with_values(_laplacian(f.values, f.h))


def laplacian_matrix_1d(n: int, h: float) -> np.ndarray:
    """Dense matrix of the squared symmetric difference on n cells (test helper)."""
    D = (np.eye(n, k=1) - np.eye(n, k=-1)) / (2 * h)
    return D @ D


def discrete_sobolev_norms(f: GridFunction, check: bool = True):
    """(H1_h, H2_h) norms; optionally asserts ||grad f||^2 <= ||f|| ||lap f||."""
    l2 = grid_l2_norm(f)
    g2 = sum(grid_l2_norm(g) ** 2 for g in gradient(f))
    lap = grid_l2_norm(laplacian_h(f))
    if check:
        assert g2 <= l2 * lap * (1 + 1e-10) + 1e-300, "summation by parts violated"
    return float(np.sqrt(l2 ** 2 + g2)), float(np.sqrt(l2 ** 2 + lap ** 2))


def norm_report(f: GridFunction, pairs=((0, 0), (1, 1), (2, 2))) -> NormReport:
    """Grid surrogates of the weighted Sobolev norms.

    ||<xi>^rho f^||^2 is expanded as sum_k C(rho, k) ||(-lap)^{k/2} f||^2 with
    the difference operators standing in for derivatives.
    """
    l2 = grid_l2_norm(f)
    grads = gradient(f)
    lap = laplacian_h(f)
    pieces = {0: l2 ** 2,
              1: sum(grid_l2_norm(g) ** 2 for g in grads),
              2: grid_l2_norm(lap) ** 2,
              3: sum(grid_l2_norm(g) ** 2 for g in gradient(lap))}
    r2 = np.sum(f.mesh() ** 2, axis=1).reshape(f.values.shape)
    out = {}
    for rho, eta in pairs:
        if rho not in pieces:
            raise ValueError("rho must be in {0,1,2,3}")
        freq = sum(comb(rho, k) * pieces[k] for k in range(rho + 1))
        weight = f.h ** f.dimension * np.sum((1 + r2) ** eta * np.abs(f.values) ** 2)
        out[(rho, eta)] = float(np.sqrt(freq + weight))
    h1, h2 = discrete_sobolev_norms(f)
    return NormReport(l2=l2, h_rho_eta=out, h1h=h1, h2h=h2)


def operator_norm_estimate(n: int, h: float, d: int = 1, iters: int = 500, seed: int = 0) -> float:
    """Power iteration for ||lap_h|| on an n^d grid."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n,) * d)
    lam = 0.0
    for _ in range(iters):
        w = _laplacian(v, h)
        lam = np.linalg.norm(w) / np.linalg.norm(v)
        v = w / np.linalg.norm(w)
    return float(lam)


def gauss_cell_means(f, R, m, order=8) -> np.ndarray:
    """Cell averages of a smooth 1d function by Gauss-Legendre quadrature."""
    n = int(round(2 * R * m))
    h = 1.0 / m
    z, w = np.polynomial.legendre.leggauss(order)
    lo = -R + np.arange(n) * h
    x = lo[:, None] + h * (z[None, :] + 1) / 2
    return (f(x) * w[None, :]).sum(axis=1) / 2


def convergence_study(f, target, n, hs, R=8.0, p=2.0, band=None):
    """Slopes of ||(delta_h)^n f_Q - (target)_Q||_{L^p} against h (1d, interior).

    f and target are vectorised callables; target is the n-th derivative.
    Returns (errors, slopes between consecutive h, least-squares slope).
    """
    errs = []
    for h in hs:
        m = int(round(1 / h))
        v = gauss_cell_means(f, R, m)
        for _ in range(n):
            v = _sym_diff(v, 0, h)
        ref = gauss_cell_means(target, R, m)
        k = (2 * n if band is None else band)
        diff = np.abs(v - ref)[k:len(v) - k]
        errs.append(float((h * np.sum(diff ** p)) ** (1 / p)))
    errs = np.array(errs)
    lh = np.log(np.asarray(hs, dtype=float))
    le = np.log(np.maximum(errs, 1e-300))
    slopes = np.diff(le) / np.diff(lh)
    fit = float(np.polyfit(lh, le, 1)[0])
    return errs, slopes, fit
