"""Compiled inner loops for the fire step.

The fire step consumes one uniform draw per node, visited in row-major order.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def neighbour_counts(burning):
    n, m = burning.shape
    pad = np.zeros((n + 2, m + 2), np.uint8)
    for y in range(n):
        for x in range(m):
            pad[y + 1, x + 1] = burning[y, x]
    out = np.empty((n, m), np.uint8)
    for y in range(n):
        up = pad[y]
        mid = pad[y + 1]
        down = pad[y + 2]
        for x in range(m):
            out[y, x] = (up[x] + up[x + 1] + up[x + 2] + mid[x] + mid[x + 2]
                         + down[x] + down[x + 1] + down[x + 2])
    return out


@njit(cache=True)
def advance(burning, counts, area, ignite_prob, p_minus, u, out, stats):
    """One period with one uniform per node (row-major).

    ``stats[a, 2k]`` / ``stats[a, 2k+1]``: ignited / spared nodes of area ``a``
    with ``k`` burning neighbours; ``stats[a, 18]`` / ``stats[a, 19]``:
    extinguished / surviving burning nodes.  Slots 0 and 1 collect nodes away
    from the fire and carry no information.
    """
    n, m = burning.shape
    for y in range(n):
        for x in range(m):
            a = area[y, x]
            k = counts[y, x]
            b = burning[y, x]
            v = u[y, x]
            keep = v >= p_minus[a]
            catch = v < ignite_prob[a, k]
            lit = (b and keep) or (not b and catch)
            out[y, x] = lit
            j = 18 + keep if b else 2 * k + (not catch)
            stats[a, j] += 1


@njit(cache=True)
def _loglik_plus(p, ignited, spared):
    q = 1.0 - p
    total = 0.0
    for m in range(1, 9):
        if ignited[m] > 0:
            v = 1.0 - q ** m
            if v <= 0.0:
                return -np.inf
            total += ignited[m] * np.log(v)
        if spared[m] > 0:
            if q <= 0.0:
                return -np.inf
            total += spared[m] * m * np.log(q)
    return total


@njit(cache=True)
def golden_plus(ignited, spared, lo, hi, tol):
    """Maximiser of the spread log-likelihood on ``[lo, hi]`` by golden-section search."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _loglik_plus(c, ignited, spared)
    fd = _loglik_plus(d, ignited, spared)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _loglik_plus(c, ignited, spared)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _loglik_plus(d, ignited, spared)
    best = 0.5 * (a + b)
    fbest = _loglik_plus(best, ignited, spared)
    for edge in (lo, hi):
        fe = _loglik_plus(edge, ignited, spared)
        if fe >= fbest:
            best, fbest = edge, fe
    return best
