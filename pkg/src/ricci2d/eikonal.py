"""First-arrival geodesic distance on Cartesian grids.

Solves the eikonal equation |grad d| = e^{u/2} by the fast marching method
(first-order upwind, Dijkstra-style sweep), giving the distance of every node
from a source node under the conformal metric e^u g_E.  Level-set perimeters
of the resulting distance field are measured with marching squares and
conformally weighted segment lengths.
"""

import heapq

import numpy as np

from .grid import CARTESIAN, ConformalField, ScalarField
from .errors import ParameterOutOfRange

_FAR, _TRIAL, _KNOWN = 0, 1, 2


def geodesic_distance_field(m: ConformalField, source=None) -> ScalarField:
    """Distance from ``source`` (node index pair, default the origin node)
    under the metric e^u g_E.  O(h) accurate plus <= ~2% stencil anisotropy."""
    g = m.grid
    if g.kind != CARTESIAN:
        raise ParameterOutOfRange("distance field needs a Cartesian grid")
    n = g.n
    h = g.h
    slowness = np.exp(m.u.as_grid() / 2.0)
    if source is None:
        source = (n // 2, n // 2)
    si, sj = source

    d = np.full((n, n), np.inf)
    state = np.zeros((n, n), dtype=np.int8)
    heap = []
    d[si, sj] = 0.0
    heapq.heappush(heap, (0.0, si, sj))
    state[si, sj] = _TRIAL

    def update(i, j):
        a = min(
            d[i, j - 1] if j > 0 else np.inf,
            d[i, j + 1] if j < n - 1 else np.inf,
        )
        b = min(
            d[i - 1, j] if i > 0 else np.inf,
            d[i + 1, j] if i < n - 1 else np.inf,
        )
        f = h * slowness[i, j]
        if a > b:
            a, b = b, a
        if b - a >= f:  # one-sided update
            return a + f
        # two-sided quadratic: (x-a)^2 + (x-b)^2 = f^2
        s = a + b
        disc = 2.0 * f * f - (b - a) ** 2
        return 0.5 * (s + np.sqrt(disc))

    while heap:
        dist, i, j = heapq.heappop(heap)
        if state[i, j] == _KNOWN:
            continue
        state[i, j] = _KNOWN
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ii, jj = i + di, j + dj
            if 0 <= ii < n and 0 <= jj < n and state[ii, jj] != _KNOWN:
                nd = update(ii, jj)
                if nd < d[ii, jj]:
                    d[ii, jj] = nd
                    heapq.heappush(heap, (nd, ii, jj))
                    state[ii, jj] = _TRIAL

    return ScalarField(g, d.ravel())


def conformal_perimeter(dist: ScalarField, m: ConformalField, level: float) -> float:
    """Length of the level set {d = level} in the metric e^u g_E.

    Marching-squares contours of the distance field, each Euclidean segment
    weighted by e^{u/2} at its midpoint (bilinear interpolation).
    """
    from skimage.measure import find_contours
    from scipy.ndimage import map_coordinates

    g = dist.grid
    h = g.h
    dgrid = dist.as_grid()
    u = m.u.as_grid()
    contours = find_contours(dgrid, level)
    total = 0.0
    for c in contours:
        seg = np.diff(c, axis=0)  # index space
        mid = 0.5 * (c[:-1] + c[1:])
        umid = map_coordinates(u, [mid[:, 0], mid[:, 1]], order=1)
        lengths = h * np.hypot(seg[:, 0], seg[:, 1])
        total += float(np.sum(np.exp(umid / 2.0) * lengths))
    return total
