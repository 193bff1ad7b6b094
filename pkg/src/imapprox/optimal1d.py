"""Globally optimal piecewise-constant approximations of a grayscale image.

Clusters of an optimal g-level approximation are intervals of the sorted
intensity histogram, so the search space is the placement of g-1 cuts
between bins.  A suffix dynamic program finds, for every g at once, the
cut placement minimizing total squared error.

Two arithmetic paths share the same structure.  Histograms of at most 16
bins are solved in exact rational arithmetic (unreduced integer pairs),
which makes results bit-for-bit comparable with the exhaustive reference
search; larger histograms use a vectorized float64 program.  Ties between
cut placements always resolve to the lexicographically smallest cut
vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .series import ErrorSeries

EXACT_BIN_LIMIT = 16
BRUTE_FORCE_BIN_LIMIT = 16


class HistogramError(ValueError):
    """Bad histogram input (empty image, non-grayscale, bad counts)."""


@dataclass(frozen=True)
class Histogram:
    """Sorted distinct intensities with positive occurrence counts."""

    values: tuple
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if not self.values:
            raise HistogramError("empty histogram")
        if len(self.values) != len(self.counts):
            raise HistogramError("one count per value required")
        if any(c < 1 for c in self.counts):
            raise HistogramError("counts must be positive")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise HistogramError("values must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return len(self.values)

    @property
    def n_pixels(self) -> int:
        return sum(self.counts)


def histogram(image) -> Histogram:
    """Histogram of a 2-D grayscale integer array."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise HistogramError("grayscale image required (2-D array)")
    if arr.size == 0:
        raise HistogramError("empty image")
    values, counts = np.unique(arr.ravel(), return_counts=True)
    return Histogram(tuple(int(v) for v in values), tuple(int(c) for c in counts))


@dataclass(frozen=True)
class OptimalSolution:
    """Optimal error series plus the cut vector realizing each level.

    ``cut_vectors[k]`` belongs to ``series.entries[k]``; each cut is the
    index of the last bin of an interval, ascending.
    """

    histogram: Histogram
    series: ErrorSeries
    cut_vectors: tuple[tuple[int, ...], ...]

    def cuts_at(self, g: int) -> tuple[int, ...]:
        for (gg, _), cuts in zip(self.series.entries, self.cut_vectors):
            if gg == g:
                return cuts
        raise KeyError(f"no solution recorded for {g} clusters")

    def intervals_at(self, g: int) -> list[tuple[int, int]]:
        """Half-open-free (first_bin, last_bin) inclusive pairs for a level."""
        cuts = self.cuts_at(g)
        first = 0
        out = []
        for c in cuts:
            out.append((first, c))
            first = c + 1
        out.append((first, self.histogram.n_bins - 1))
        return out

    def labels_for_image(self, g: int, image) -> np.ndarray:
        """Label map assigning each pixel its interval index at a level."""
        arr = np.asarray(image)
        values = np.asarray(self.histogram.values)
        bins = np.searchsorted(values, arr.ravel())
        cuts = np.asarray(self.cuts_at(g) + (self.histogram.n_bins - 1,))
        labels = np.searchsorted(cuts, bins)
        return labels.reshape(arr.shape).astype(np.int32)


def _prefixes(hist: Histogram):
    """Exact integer prefix tables of count, sum, squared sum."""
    pn = [0]
    ps = [0]
    pq = [0]
    for v, c in zip(hist.values, hist.counts):
        v = int(v)
        pn.append(pn[-1] + c)
        ps.append(ps[-1] + v * c)
        pq.append(pq[-1] + v * v * c)
    return pn, ps, pq


def interval_sse(hist: Histogram, first: int, last: int) -> float:
    """Squared error of one histogram interval (bins first..last inclusive)."""
    num, den = _interval_frac(_prefixes(hist), first, last)
    return num / den


def _interval_frac(prefixes, first, last):
    pn, ps, pq = prefixes
    n = pn[last + 1] - pn[first]
    s = ps[last + 1] - ps[first]
    q = pq[last + 1] - pq[first]
    return n * q - s * s, n


def _frac_add(a, b):
    # Unreduced rational addition; denominators stay products of interval
    # sizes, tiny for the bin counts the exact path accepts.
    return a[0] * b[1] + b[0] * a[1], a[1] * b[1]


def _frac_lt(a, b):
    return a[0] * b[1] < b[0] * a[1]


def optimal_sequence(hist: Histogram, max_clusters: int) -> OptimalSolution:
    """Optimal approximations for every cluster count up to ``max_clusters``.

    The series is capped at the number of distinct values, where the error
    reaches zero.  Error values are strictly decreasing up to that point.
    """
    if max_clusters < 1:
        raise HistogramError("max_clusters must be at least 1")
    g_cap = min(max_clusters, hist.n_bins)
    if hist.n_bins <= EXACT_BIN_LIMIT:
        entries, cut_vectors = _sequence_exact(hist, g_cap)
    else:
        entries, cut_vectors = _sequence_float(hist, g_cap)
    series = ErrorSeries(tuple(entries), hist.n_pixels)
    return OptimalSolution(hist, series, tuple(cut_vectors))


def _sequence_exact(hist: Histogram, g_cap: int):
    prefixes = _prefixes(hist)
    b = hist.n_bins
    cost = [[_interval_frac(prefixes, i, j) if j >= i else None for j in range(b)] for i in range(b)]
    # dp[g][i]: best cost of bins i.. with g intervals; args[g][i] the
    # smallest optimal end of the first interval.
    dp = [None, [cost[i][b - 1] for i in range(b)]]
    args = [None, None]
    for g in range(2, g_cap + 1):
        prev = dp[g - 1]
        row = [None] * b
        arg = [None] * b
        for i in range(b - g + 1):
            best = None
            best_j = None
            for j in range(i, b - g + 1):
                cand = _frac_add(cost[i][j], prev[j + 1])
                if best is None or _frac_lt(cand, best):
                    best, best_j = cand, j
            row[i] = best
            arg[i] = best_j
        dp.append(row)
        args.append(arg)
    entries = []
    cut_vectors = []
    for g in range(1, g_cap + 1):
        num, den = dp[g][0]
        entries.append((g, num / den))
        cuts = []
        pos = 0
        for rem in range(g, 1, -1):
            j = args[rem][pos]
            cuts.append(j)
            pos = j + 1
        cut_vectors.append(tuple(cuts))
    return entries, cut_vectors


def _sequence_float(hist: Histogram, g_cap: int):
    b = hist.n_bins
    pn = np.zeros(b + 1)
    ps = np.zeros(b + 1)
    pq = np.zeros(b + 1)
    np.cumsum(np.asarray(hist.counts, dtype=np.float64), out=pn[1:])
    v = np.asarray(hist.values, dtype=np.float64)
    c = np.asarray(hist.counts, dtype=np.float64)
    np.cumsum(v * c, out=ps[1:])
    np.cumsum(v * v * c, out=pq[1:])
    n_ij = pn[None, 1:] - pn[:b, None]
    s_ij = ps[None, 1:] - ps[:b, None]
    q_ij = pq[None, 1:] - pq[:b, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = q_ij - s_ij * s_ij / n_ij
    cost[np.tril_indices(b, k=-1)] = np.inf

    dp = np.full((g_cap + 1, b), np.inf)
    args = np.zeros((g_cap + 1, b), dtype=np.int64)
    dp[1] = cost[:, b - 1]
    below_diag = np.arange(b - 1)[None, :] < np.arange(b)[:, None]
    for g in range(2, g_cap + 1):
        v_mat = cost[:, : b - 1] + dp[g - 1][1:][None, :]
        v_mat[below_diag] = np.inf
        dp[g] = np.min(v_mat, axis=1)
        args[g] = np.argmin(v_mat, axis=1)  # first occurrence: smallest j
    entries = []
    cut_vectors = []
    for g in range(1, g_cap + 1):
        entries.append((g, float(max(dp[g][0], 0.0))))
        cuts = []
        pos = 0
        for rem in range(g, 1, -1):
            j = int(args[rem][pos])
            cuts.append(j)
            pos = j + 1
        cut_vectors.append(tuple(cuts))
    return entries, cut_vectors


def brute_force_optimal(hist: Histogram, g: int) -> tuple[float, tuple[int, ...]]:
    """Exhaustive reference search over contiguous cut placements.

    Guarded at 16 bins.  Under ties the lexicographically smallest cut
    vector wins, matching :func:`optimal_sequence`.
    """
    if hist.n_bins > BRUTE_FORCE_BIN_LIMIT:
        raise HistogramError("brute force is limited to 16 bins")
    if not 1 <= g <= hist.n_bins:
        raise HistogramError("cluster count out of range")
    prefixes = _prefixes(hist)
    b = hist.n_bins
    best = None
    best_cuts = None
    for cuts in combinations(range(b - 1), g - 1):
        total = (0, 1)
        first = 0
        for cut in cuts:
            total = _frac_add(total, _interval_frac(prefixes, first, cut))
            first = cut + 1
        total = _frac_add(total, _interval_frac(prefixes, first, b - 1))
        if best is None or _frac_lt(total, best):
            best, best_cuts = total, cuts
    return best[0] / best[1], best_cuts
