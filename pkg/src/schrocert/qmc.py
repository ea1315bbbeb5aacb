"""Halton points, star-discrepancy certificates and QMC cell averages."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import GridFunction, SamplingError, quantize

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
C_STAR_HORIZON = 10 ** 6


def first_primes(d: int) -> tuple:
    return PRIMES[:d]


@dataclass(frozen=True)
class HaltonConfig:
    bases: tuple
    N: int = 1

    def __post_init__(self):
        b = tuple(int(x) for x in self.bases)
        object.__setattr__(self, "bases", b)
        if any(x < 2 for x in b):
            raise ValueError("bases must be >= 2")
        for i in range(len(b)):
            for j in range(i + 1, len(b)):
                if math.gcd(b[i], b[j]) != 1:
                    raise ValueError(f"bases {b[i]} and {b[j]} are not coprime")
        if self.N < 1:
            raise ValueError("N must be positive")

    @property
    def d(self) -> int:
        return len(self.bases)


def radical_inverse(k, base: int) -> np.ndarray:
    k = np.asarray(k, dtype=np.int64).copy()
    out = np.zeros(k.shape)
    f = 1.0 / base
    while np.any(k > 0):
        out += f * (k % base)
        k //= base
        f /= base
    return out


def halton(config: HaltonConfig, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("Halton index starts at 1")
    return np.array([radical_inverse(k, b) for b in config.bases], dtype=float)


def halton_points(bases, N: int) -> np.ndarray:
    """First N points (indices 1..N), shape (N, d)."""
    k = np.arange(1, N + 1)
    return np.stack([radical_inverse(k, b) for b in bases], axis=-1)


def star_bound_rhs(bases, N):
    """d/N + (1/N) prod_k ((b_k - 1)/(2 log b_k) log N + (b_k + 1)/2)."""
    N = np.asarray(N, dtype=float)
    L = np.log(N)
    prod = np.ones_like(N)
    for b in bases:
        prod = prod * ((b - 1) / (2 * math.log(b)) * L + (b + 1) / 2)
    return len(bases) / N + prod / N


@dataclass(frozen=True)
class DiscrepancyCertificate:
    N: int
    d: int
    bound: float
    c_star: int
    bases: tuple
    horizon: int = C_STAR_HORIZON

    def __post_init__(self):
        if self.N >= 2 and self.bound < self.d / self.N:
            raise ValueError("certificate bound below d/N")


@lru_cache(maxsize=None)
def c_star(bases) -> int:
    """Smallest integer c with star_bound_rhs(N) <= c log(N)^d / N for all N >= 2.

    The ratio rhs * N / log(N)^d equals d/L^d + prod_k (a_k + c_k / L) with
    L = log N and a_k, c_k > 0, a strictly decreasing function of L.  Its
    maximum over N >= 2 therefore sits at N = 2; the scan up to the horizon
    confirms this numerically and its maximum is rounded up.
    """
    bases = tuple(bases)
    d = len(bases)
    N = np.arange(2, C_STAR_HORIZON + 1, dtype=float)
    ratio = star_bound_rhs(bases, N) * N / np.log(N) ** d
    if int(np.argmax(ratio)) != 0:
        raise RuntimeError("discrepancy ratio is not maximal at N = 2")
    return int(math.ceil(ratio.max() - 1e-12))


def certificate(bases, N: int) -> DiscrepancyCertificate:
    bases = tuple(bases)
    if N < 2:
        # log(1) = 0 makes the C* form vacuous; the trivial bound D* <= 1 is used
        return DiscrepancyCertificate(N, len(bases), 1.0, c_star(bases), bases)
    cs = c_star(bases)
    return DiscrepancyCertificate(N, len(bases), cs * math.log(N) ** len(bases) / N, cs, bases)


def star_discrepancy_brute(points) -> float:
    """Exact star discrepancy of a point set in [0,1)^d, d <= 2, N <= 4096.

    Over anchored boxes [0, b) the local discrepancy is extremal on the grid
    of point coordinates (plus 1): count/N - vol is maximised with closed
    counts (b approached from above), vol - count/N with open counts.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and pts.shape[1] > 2:
        pts = pts.T
    N, d = pts.shape
    if N > 4096 or d > 2:
        raise ValueError("brute-force discrepancy limited to N <= 4096, d <= 2")
    if d == 1:
        u = np.unique(np.append(pts[:, 0], 1.0))
        x = np.sort(pts[:, 0])
        closed = np.searchsorted(x, u, side="right")
        opened = np.searchsorted(x, u, side="left")
        return float(max(np.max(closed / N - u), np.max(u - opened / N)))
    u1 = np.unique(np.append(pts[:, 0], 1.0))
    u2 = np.unique(np.append(pts[:, 1], 1.0))
    r1 = np.searchsorted(u1, pts[:, 0])
    r2 = np.searchsorted(u2, pts[:, 1])
    H = np.zeros((len(u1), len(u2)), dtype=np.int32)
    np.add.at(H, (r1, r2), 1)
    C = H.cumsum(0).cumsum(1)  # closed counts: t1 <= u1[i], t2 <= u2[j]
    O = np.zeros_like(C)  # open counts: t1 < u1[i], t2 < u2[j]
    O[1:, 1:] = C[:-1, :-1]
    best = 0.0
    for i0 in range(0, len(u1), 512):
        sl = slice(i0, i0 + 512)
        vol = np.outer(u1[sl], u2)
        best = max(best, float(np.max(C[sl] / N - vol)), float(np.max(vol - O[sl] / N)))
    return best


# -- cell averages -------------------------------------------------------------

def cell_means(f, lower_corners, h, points, M=52, chunk=None) -> np.ndarray:
    """(1/N) sum_k f^M(x_j + h t_k) for every cell corner x_j.

    Every cell uses the same points; the per-cell sum runs along the sample
    axis so chunking over cells does not change any result bit.
    """
    lower = np.atleast_2d(np.asarray(lower_corners, dtype=float))
    pts = np.atleast_2d(points)
    ncell, d = lower.shape
    N = pts.shape[0]
    if chunk is None:
        chunk = max(1, 2 ** 22 // max(N, 1))
    out = np.empty(ncell, dtype=complex)
    for s in range(0, ncell, chunk):
        lo = lower[s:s + chunk]
        x = lo[:, None, :] + h * pts[None, :, :]
        vals = np.asarray(f(x.reshape(-1, d)), dtype=complex).reshape(len(lo), N)
        vals = quantize(vals, M)
        bad = ~np.isfinite(vals)
        if bad.any():
            c, k = np.unravel_index(int(np.argmax(bad)), bad.shape)
            raise SamplingError(f"non-finite sample in cell {s + c} at point {x[c, k].tolist()}")
        out[s:s + chunk] = vals.sum(axis=1) / N
    return out


def lower_corners(R, m, d) -> np.ndarray:
    n = int(round(2 * R * m))
    lo = -R + np.arange(n) / m
    grids = np.meshgrid(*([lo] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def cubic_discretize(f, box, halton_cfg: HaltonConfig, M: int = 52) -> GridFunction:
    """Numerical cubic discretisation f^M_{Q,N} on [-R, R]^d with h = 1/m."""
    R, m = box
    if M > 52:
        raise ValueError("M is capped at 52")
    d = halton_cfg.d
    pts = halton_points(halton_cfg.bases, halton_cfg.N)
    vals = cell_means(f, lower_corners(R, m, d), 1.0 / m, pts, M)
    return GridFunction(R, m, d, vals.reshape((int(round(2 * R * m)),) * d))


def kh_error_bound(tv_per_cell, cert: DiscrepancyCertificate, M: int, N: int, cell_count: int):
    """Koksma-Hlawka bounds (sup, L2) for the numerical cubic discretisation."""
    tv = np.asarray(tv_per_cell, dtype=float)
    if not np.all(np.isfinite(tv)) or np.any(tv < 0):
        raise ValueError("variations must be finite and non-negative")
    rnd = N * 2.0 ** (-M)
    linf = (float(tv.max()) if tv.size else 0.0) * cert.bound + rnd
    l2 = float(np.sqrt(np.sum(tv ** 2))) * cert.bound + rnd * cell_count
    return linf, l2


def _hk_variation(vals: np.ndarray) -> np.ndarray:
    """Hardy-Krause variation (anchored at the upper corner) of tensor samples.

    vals has shape (cells, s, ..., s).  For every non-empty subset u of axes
    the Vitali variation of the face with the remaining coordinates at 1 is
    the sum of absolute mixed differences along u.
    """
    d = vals.ndim - 1
    total = np.zeros(vals.shape[0])
    for mask in range(1, 2 ** d):
        face = vals
        for ax in reversed(range(d)):
            if not mask >> ax & 1:
                face = np.take(face, -1, axis=ax + 1)
        for ax in range(face.ndim - 1):
            face = np.diff(face, axis=ax + 1)
        total += np.abs(face).reshape(face.shape[0], -1).sum(axis=1)
    return total


def estimate_cell_tv(f, R, m, d, samples_per_axis=1024, inflate=2.0, chunk_points=2 ** 22):
    """Per-cell variation of f by dense tensor sampling, inflated.

    This is a measurement, not a certificate; budgets use the declared
    variation maps instead.
    """
    s = samples_per_axis if d == 1 else max(2, int(round(samples_per_axis ** (1.0 / d))))
    h = 1.0 / m
    t = np.linspace(0.0, 1.0, s)
    grids = np.meshgrid(*([t] * d), indexing="ij")
    local = np.stack([g.ravel() for g in grids], axis=-1)
    lower = lower_corners(R, m, d)
    out = np.empty(len(lower))
    step = max(1, chunk_points // len(local))
    for a in range(0, len(lower), step):
        x = lower[a:a + step, None, :] + h * local[None, :, :]
        v = np.asarray(f(x.reshape(-1, d)), dtype=complex).reshape((len(x),) + (s,) * d)
        out[a:a + step] = _hk_variation(v)
    return inflate * out
