"""Shared generators and independent oracles.

The oracles recompute errors from first principles (group rows, exact
Fraction means, sum of squared residuals) so they share no algebra with
the library's incremental statistics.
"""

from fractions import Fraction
from itertools import combinations

import numpy as np


def natural_image(size=512, seed=12345):
    """Synthetic photograph-like grayscale image: smooth gradient,
    soft blobs, mild sensor noise."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / (size - 1)
    img = 60.0 + 110.0 * yy + 25.0 * np.sin(2.5 * np.pi * xx)
    for _ in range(25):
        cy, cx = rng.uniform(0, 1, 2)
        sig = rng.uniform(0.02, 0.12)
        amp = rng.uniform(-70.0, 70.0)
        img += amp * np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig * sig)))
    img += rng.normal(0.0, 2.5, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def random_gray(rng, height, width, n_values=None):
    """Random grayscale image, optionally over a limited random palette."""
    if n_values is None:
        return rng.integers(0, 256, size=(height, width), dtype=np.int64)
    palette = rng.choice(256, size=n_values, replace=False)
    return palette[rng.integers(0, n_values, size=(height, width))].astype(np.int64)


def random_color(rng, height, width, n_colors=None):
    if n_colors is None:
        return rng.integers(0, 256, size=(height, width, 3), dtype=np.int64)
    palette = rng.integers(0, 256, size=(n_colors, 3))
    return palette[rng.integers(0, n_colors, size=(height, width))].astype(np.int64)


def random_labels(rng, n_units, k):
    """Random surjective labelling of n_units into clusters 0..k-1."""
    labels = rng.integers(0, k, size=n_units)
    fill = rng.choice(n_units, size=k, replace=False)
    labels[fill] = np.arange(k)
    return [int(x) for x in labels]


def exact_sse(samples, labels) -> Fraction:
    """Total squared error of a labelling, as an exact Fraction."""
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None]
    groups = {}
    for row, lab in zip(samples, np.asarray(labels).ravel()):
        groups.setdefault(int(lab), []).append([Fraction(float(v)) for v in row])
    total = Fraction(0)
    for rows in groups.values():
        n = len(rows)
        for c in range(len(rows[0])):
            mean = sum(r[c] for r in rows) / n
            total += sum((r[c] - mean) ** 2 for r in rows)
    return total


def float_sse(samples, labels) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    labels = np.asarray(labels).ravel()
    total = 0.0
    for lab in np.unique(labels):
        rows = samples[labels == lab]
        total += float(((rows - rows.mean(axis=0)) ** 2).sum())
    return total


def exact_cut_error(hist, cuts) -> Fraction:
    """Exact error of the contiguous histogram partition given by cuts."""
    values = [Fraction(v) for v in hist.values]
    counts = list(hist.counts)
    total = Fraction(0)
    first = 0
    for cut in list(cuts) + [hist.n_bins - 1]:
        n = sum(counts[first:cut + 1])
        s = sum(v * c for v, c in zip(values[first:cut + 1], counts[first:cut + 1]))
        q = sum(v * v * c for v, c in zip(values[first:cut + 1], counts[first:cut + 1]))
        total += q - s * s / n
        first = cut + 1
    return total


def exact_dp_reference(hist, g_max):
    """Exact-rational dynamic program over all bin counts; independent of
    the library's (it works forward over prefixes, Fractions throughout).

    Returns {g: (error Fraction, cuts tuple)} with smallest-cut ties.
    """
    b = hist.n_bins
    cost = {}
    for i in range(b):
        for j in range(i, b):
            cost[i, j] = exact_cut_error(
                type(hist)(hist.values[i:j + 1], hist.counts[i:j + 1]), ())
    out = {}
    best = {(1, j): (cost[0, j], ()) for j in range(b)}
    out[1] = best[1, b - 1]
    for g in range(2, g_max + 1):
        cur = {}
        for j in range(g - 1, b):
            options = []
            for cut in range(g - 2, j):
                prev_e, prev_cuts = best[g - 1, cut]
                options.append((prev_e + cost[cut + 1, j], prev_cuts + (cut,)))
            cur[g, j] = min(options, key=lambda t: (t[0], t[1]))
        best.update(cur)
        out[g] = best[g, b - 1]
        if g == b:
            break
    return out


def count_vectors(k, max_total):
    """All k-tuples of positive counts with sum <= max_total."""
    for total in range(k, max_total + 1):
        for marks in combinations(range(1, total), k - 1):
            bounds = (0,) + marks + (total,)
            yield tuple(b - a for a, b in zip(bounds, bounds[1:]))


def image_from_counts(values, counts):
    """Row image holding counts[i] pixels of values[i]."""
    data = np.repeat(np.asarray(values, dtype=np.int64), counts)
    return data.reshape(1, -1)


def connected_components(labels) -> int:
    """Number of 4-connected components over all label values."""
    labels = np.asarray(labels)
    h, w = labels.shape
    seen = np.zeros((h, w), dtype=bool)
    comps = 0
    for sy in range(h):
        for sx in range(w):
            if seen[sy, sx]:
                continue
            comps += 1
            stack = [(sy, sx)]
            seen[sy, sx] = True
            while stack:
                y, x = stack.pop()
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and not seen[ny, nx] \
                            and labels[ny, nx] == labels[y, x]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
    return comps
