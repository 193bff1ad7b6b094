"""Incremental cluster statistics and the error-increment formulas.

A cluster of pixels is summarized by ``(n, S, Q)``: member count, per-channel
value sum, and sum of squared Euclidean norms.  That triple is enough to give
the cluster mean and its sum of squared errors, and it is additive under
disjoint union, so merges, splits, and single-group moves can be priced
without touching pixels.

For integer (8-bit) sources the accumulators are Python integers, so
additivity is exact and every delta reduces to one correctly-rounded
division of an exact integer numerator by an exact integer denominator.
Float sources use plain double arithmetic.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


class DimensionMismatchError(ValueError):
    """Pixel values with differing channel counts were mixed."""


class PreconditionError(ValueError):
    """A size or emptiness precondition of a delta formula was violated."""


def _channels(pixel) -> tuple:
    """Normalize a pixel value to a tuple of exact per-channel numbers."""
    if isinstance(pixel, numbers.Number):
        return (_exact(pixel),)
    value = tuple(_exact(c) for c in pixel)
    if not value:
        raise DimensionMismatchError("pixel value has zero channels")
    return value


def _exact(x):
    # numpy scalars would silently wrap or lose exactness; pin them down.
    if isinstance(x, numbers.Integral):
        return int(x)
    if isinstance(x, numbers.Real):
        return float(x)
    raise TypeError(f"unsupported pixel component {x!r}")


@dataclass(frozen=True)
class ClusterStats:
    """Summary statistics (count, channel sums, squared-norm sum) of a cluster."""

    n: int
    s: tuple
    q: int | float

    def __post_init__(self):
        if self.n < 0:
            raise PreconditionError("negative member count")
        if not isinstance(self.s, tuple):
            object.__setattr__(self, "s", tuple(self.s))

    @property
    def channels(self) -> int:
        return len(self.s)

    @property
    def mean(self) -> tuple:
        """Per-channel mean.  Undefined (error) for an empty cluster."""
        if self.n == 0:
            raise PreconditionError("mean of empty cluster")
        return tuple(c / self.n for c in self.s)

    @property
    def sse(self) -> float:
        """Sum of squared errors about the mean: Q - |S|^2 / n, never negative."""
        if self.n == 0:
            return 0.0
        if self.is_integer():
            # One float division of exact integers: correctly rounded.
            return _sse_numerator(self) / self.n
        return float(self.q - sum(c * c for c in self.s) / self.n)

    def exact_sse(self) -> Fraction:
        """``sse`` as an exact rational.  Integer-mode clusters only."""
        if self.n == 0:
            return Fraction(0)
        if not self.is_integer():
            raise PreconditionError("exact_sse requires integer accumulators")
        return Fraction(_sse_numerator(self), self.n)

    def is_integer(self) -> bool:
        return isinstance(self.q, int) and all(isinstance(c, int) for c in self.s)

    def __add__(self, other: "ClusterStats") -> "ClusterStats":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        if len(self.s) != len(other.s):
            raise DimensionMismatchError("cannot combine clusters of differing channel counts")
        return ClusterStats(
            self.n + other.n,
            tuple(a + b for a, b in zip(self.s, other.s)),
            self.q + other.q,
        )

    def remove(self, part: "ClusterStats") -> "ClusterStats":
        """Statistics of this cluster with a disjoint sub-multiset taken out."""
        if len(self.s) != len(part.s) and part.n > 0:
            raise DimensionMismatchError("cannot remove stats of differing channel counts")
        if part.n > self.n:
            raise PreconditionError("cannot remove more members than present")
        return ClusterStats(
            self.n - part.n,
            tuple(a - b for a, b in zip(self.s, part.s)),
            self.q - part.q,
        )

    @classmethod
    def empty(cls, channels: int = 1) -> "ClusterStats":
        return cls(0, (0,) * channels, 0)

    @classmethod
    def of_pixel(cls, pixel) -> "ClusterStats":
        v = _channels(pixel)
        return cls(1, v, sum(c * c for c in v))


def _sse_numerator(st: ClusterStats) -> int:
    """n*Q - |S|^2, the exact integer numerator of n*sse."""
    return st.n * st.q - sum(c * c for c in st.s)


def accumulate(pixels: Iterable) -> ClusterStats:
    """Accumulate statistics over pixel values (scalars or channel tuples)."""
    total = None
    for p in pixels:
        one = ClusterStats.of_pixel(p)
        total = one if total is None else total + one
    return total if total is not None else ClusterStats.empty()


# ---------------------------------------------------------------------------
# Error increments.
#
# Each delta is the change in total squared error caused by one partition
# edit.  In integer mode the value is num/den for exact integers num, den;
# `*_frac` variants expose that pair so greedy engines can compare
# candidates exactly.  den is always positive; merge numerators are >= 0,
# split numerators are <= 0.
# ---------------------------------------------------------------------------


def _merge_frac(a: ClusterStats, b: ClusterStats):
    num = 0
    for sa, sb in zip(a.s, b.s):
        d = sa * b.n - sb * a.n
        num += d * d
    return num, a.n * b.n * (a.n + b.n)


def merge_delta(a: ClusterStats, b: ClusterStats) -> float:
    """Error increase from merging two disjoint clusters.  Always >= 0.

    Equals the squared distance between the cluster means divided by
    (1/n_a + 1/n_b).
    """
    if a.n == 0 or b.n == 0:
        raise PreconditionError("merge_delta of an empty cluster")
    if len(a.s) != len(b.s):
        raise DimensionMismatchError("merge_delta across channel counts")
    if a.is_integer() and b.is_integer():
        num, den = _merge_frac(a, b)
        return num / den
    d2 = sum((x - y) ** 2 for x, y in zip(a.mean, b.mean))
    return d2 * (a.n * b.n / (a.n + b.n))


def _split_frac(parent: ClusterStats, part: ClusterStats):
    num = 0
    for sp, sw in zip(parent.s, part.s):
        d = sw * parent.n - sp * part.n
        num += d * d
    return -num, part.n * parent.n * (parent.n - part.n)


def split_delta(parent: ClusterStats, part: ClusterStats) -> float:
    """Error change from splitting ``part`` out of ``parent``.  Always <= 0.

    Equals -|mean(part) - mean(parent)|^2 / (1/k - 1/n) for k = part.n,
    n = parent.n; the strict k < n requirement makes the denominator
    positive.  Splitting off the whole cluster (k = n) is rejected.
    """
    if part.n < 1:
        raise PreconditionError("split_delta of an empty part")
    if part.n >= parent.n:
        raise PreconditionError("split part must be a proper sub-multiset of the parent")
    if len(parent.s) != len(part.s):
        raise DimensionMismatchError("split_delta across channel counts")
    if parent.is_integer() and part.is_integer():
        num, den = _split_frac(parent, part)
        return num / den
    d2 = sum((x - y) ** 2 for x, y in zip(part.mean, parent.mean))
    return -d2 / (1.0 / part.n - 1.0 / parent.n)


def correction_delta(src: ClusterStats, dst: ClusterStats, moved: ClusterStats) -> float:
    """Error change from moving ``moved`` out of ``src`` and into ``dst``.

    ``src`` counts the moved members; ``dst`` does not.  Identically equal to
    ``split_delta(src, moved) + merge_delta(moved, dst)`` (the two are computed
    from the same expressions, so the composition identity is bitwise exact).
    """
    return split_delta(src, moved) + merge_delta(moved, dst)


def kmeans_delta(src: ClusterStats, dst: ClusterStats, moved: ClusterStats) -> float:
    """Nearest-mean move score: |m - m_dst|^2 - |m - m_src|^2.

    The size-dependent factors of the exact correction are dropped; a
    negative value is what classical reassignment would act on.  Same
    preconditions as :func:`correction_delta`.
    """
    if moved.n < 1:
        raise PreconditionError("kmeans_delta of an empty group")
    if moved.n >= src.n:
        raise PreconditionError("moved group must be a proper sub-multiset of src")
    if dst.n == 0:
        raise PreconditionError("kmeans_delta into an empty cluster")
    if len(src.s) != len(dst.s) or len(src.s) != len(moved.s):
        raise DimensionMismatchError("kmeans_delta across channel counts")
    m = moved.mean
    to_dst = sum((x - y) ** 2 for x, y in zip(m, dst.mean))
    from_src = sum((x - y) ** 2 for x, y in zip(m, src.mean))
    return to_dst - from_src


# ---------------------------------------------------------------------------
# Partitions.
# ---------------------------------------------------------------------------


class Partition:
    """A labelling of units (pixels, or pixel groups that always travel
    together) into clusters, with incrementally maintained statistics.

    ``labels[u]`` is the cluster id of unit ``u``; ``clusters`` maps each id
    to its ClusterStats; ``members`` maps each id to the ascending list of
    its unit indices.  The cached total error ``E`` is recomputed lazily from
    the cluster table (ascending id order), so it always agrees exactly with
    a from-scratch recomputation.
    """

    __slots__ = ("unit_stats", "labels", "clusters", "members", "next_id", "_e_cache")

    def __init__(self, unit_stats: Sequence[ClusterStats], labels: Sequence[int]):
        if len(unit_stats) != len(labels):
            raise PreconditionError("one label per unit required")
        if not unit_stats:
            raise PreconditionError("empty partition domain")
        self.unit_stats = list(unit_stats)
        self.labels = list(labels)
        self.clusters: dict[int, ClusterStats] = {}
        self.members: dict[int, list[int]] = {}
        for u, lab in enumerate(self.labels):
            st = self.unit_stats[u]
            if lab in self.clusters:
                self.clusters[lab] = self.clusters[lab] + st
                self.members[lab].append(u)
            else:
                self.clusters[lab] = st
                self.members[lab] = [u]
        for lab, st in self.clusters.items():
            if st.n == 0:
                raise PreconditionError(f"cluster {lab} is empty")
        self.next_id = max(self.clusters) + 1
        self._e_cache: float | None = None

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_pixels(cls, pixels: Sequence, labels: Sequence[int]) -> "Partition":
        """Partition of raw pixels (each unit is a single pixel)."""
        return cls([ClusterStats.of_pixel(p) for p in pixels], labels)

    def copy(self) -> "Partition":
        p = object.__new__(Partition)
        p.unit_stats = self.unit_stats  # immutable per-unit stats are shared
        p.labels = list(self.labels)
        p.clusters = dict(self.clusters)
        p.members = {k: list(v) for k, v in self.members.items()}
        p.next_id = self.next_id
        p._e_cache = self._e_cache
        return p

    # -- observers -----------------------------------------------------------

    @property
    def n_units(self) -> int:
        return len(self.unit_stats)

    @property
    def n_pixels(self) -> int:
        return sum(st.n for st in self.unit_stats)

    @property
    def g(self) -> int:
        return len(self.clusters)

    @property
    def E(self) -> float:
        """Total squared error, summed over clusters in ascending id order."""
        if self._e_cache is None:
            self._e_cache = sum(self.clusters[k].sse for k in sorted(self.clusters))
        return self._e_cache

    def exact_error(self) -> Fraction:
        """Total squared error as an exact rational (integer mode only)."""
        total = Fraction(0)
        for k in sorted(self.clusters):
            total += self.clusters[k].exact_sse()
        return total

    def stats_of(self, units: Iterable[int]) -> ClusterStats:
        total = None
        for u in units:
            st = self.unit_stats[u]
            total = st if total is None else total + st
        if total is None:
            raise PreconditionError("empty unit set")
        return total

    def validate(self) -> None:
        """Recompute every cluster from labels and compare with the table."""
        seen: dict[int, ClusterStats] = {}
        counts: dict[int, int] = {}
        for u, lab in enumerate(self.labels):
            st = self.unit_stats[u]
            seen[lab] = st if lab not in seen else seen[lab] + st
            counts[lab] = counts.get(lab, 0) + 1
        if set(seen) != set(self.clusters):
            raise PreconditionError("cluster table does not match labels")
        for lab, st in seen.items():
            if st != self.clusters[lab]:
                raise PreconditionError(f"cluster {lab} statistics drifted")
            if counts[lab] != len(self.members[lab]):
                raise PreconditionError(f"cluster {lab} member list drifted")

    # -- edits ---------------------------------------------------------------

    def apply_move(self, units: Sequence[int], src: int, dst: int) -> "Partition":
        """Return a new partition with ``units`` moved from ``src`` to ``dst``.

        Moving every member of ``src`` into an existing ``dst`` is a merge
        (``src`` disappears); moving a proper subset to a fresh id is a
        split; a proper subset into an existing cluster is a correction.
        Relabelling all of ``src`` to a fresh id is rejected as a no-op.
        """
        p = self.copy()
        p._move_inplace(units, src, dst)
        return p

    def _move_inplace(self, units: Sequence[int], src: int, dst: int) -> None:
        units = sorted(set(units))
        if not units:
            raise PreconditionError("no units to move")
        if src not in self.clusters:
            raise PreconditionError(f"unknown source cluster {src}")
        if dst == src:
            raise PreconditionError("source and destination coincide")
        for u in units:
            if self.labels[u] != src:
                raise PreconditionError(f"unit {u} is not labelled {src}")
        whole = len(units) == len(self.members[src])
        fresh = dst not in self.clusters
        if fresh and whole:
            raise PreconditionError("relabelling a whole cluster to a fresh id is a no-op")
        moved = self.stats_of(units)
        for u in units:
            self.labels[u] = dst
        if whole:
            del self.clusters[src]
            del self.members[src]
        else:
            self.clusters[src] = self.clusters[src].remove(moved)
            keep = set(units)
            self.members[src] = [u for u in self.members[src] if u not in keep]
        if fresh:
            self.clusters[dst] = moved
            self.members[dst] = list(units)
            self.next_id = max(self.next_id, dst + 1)
        else:
            self.clusters[dst] = self.clusters[dst] + moved
            self.members[dst] = sorted(self.members[dst] + list(units))
        self._e_cache = None

    def move_delta(self, units: Sequence[int], src: int, dst: int) -> float:
        """The formula delta for the move that ``apply_move`` would perform."""
        units = sorted(set(units))
        moved = self.stats_of(units)
        whole = len(units) == len(self.members[src])
        if dst in self.clusters:
            if whole:
                return merge_delta(self.clusters[src], self.clusters[dst])
            return correction_delta(self.clusters[src], self.clusters[dst], moved)
        return split_delta(self.clusters[src], moved)
