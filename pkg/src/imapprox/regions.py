"""Spatially constrained approximations: regions are 4-connected.

A region graph carries per-region statistics and boundary lengths between
adjacent regions.  Greedy merging of adjacent regions walks the error
series down from singletons (or any connected labelling); the merge order
can weigh boundary length two ways besides the plain error increase.  The
recorded series is always the plain sum of squared errors regardless of
the ordering criterion.

The extended search refines a labelling at pixel granularity: connected
same-value runs along region boundaries are moved or split off whenever
that strictly lowers the error, with occasional forced merges to hold the
region count at the target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import ErrorSeries
from .stats import ClusterStats, PreconditionError

RUN_CAP_PER_EDGE = 64
BUDGET_FACTOR = 50


@dataclass(frozen=True)
class MergeCriterion:
    """Ordering rule for greedy region merging.

    plain:    error increase alone
    additive: error increase minus lam * boundary length
    flsa:     error increase divided by boundary length
    """

    kind: str = "plain"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("plain", "additive", "flsa"):
            raise PreconditionError(f"unknown criterion {self.kind!r}")

    def score(self, delta: float, length: int) -> float:
        if self.kind == "plain":
            return delta
        if self.kind == "additive":
            return delta - self.lam * length
        return delta / length


def _pair_delta(na, sa, qa, nb, sb, qb) -> float:
    # exact integer fraction for integer accumulators; one rounded division
    num = 0
    for x, y in zip(sa, sb):
        d = x * nb - y * na
        num += d * d
    return num / (na * nb * (na + nb))


def _region_sse(n, s, q) -> float:
    if n == 0:
        return 0.0
    return max((n * q - sum(c * c for c in s)) / n, 0.0)


class RegionGraph:
    """Mutable merge state over a 4-connected pixel grid.

    Region ids are the least pixel index inside the region; merging keeps
    the smaller id.  Adjacency entries may go stale as neighbours merge;
    they are resolved through the union-find table on access, so merges
    stay cheap.
    """

    __slots__ = ("height", "width", "channels", "n", "s", "q", "adj",
                 "parent", "alive", "version", "int_mode")

    def __init__(self, samples: np.ndarray, shape: tuple[int, int], labels=None):
        height, width = shape
        n_pixels = height * width
        samples = np.asarray(samples)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.shape[0] != n_pixels:
            raise PreconditionError("sample count does not match shape")
        self.height = height
        self.width = width
        self.channels = samples.shape[1]
        self.int_mode = np.issubdtype(samples.dtype, np.integer)
        self.parent = list(range(n_pixels))
        self.version = [0] * n_pixels

        if labels is None:
            cast = int if self.int_mode else float
            self.n = [1] * n_pixels
            self.s = [[cast(v) for v in samples[p]] for p in range(n_pixels)]
            self.q = [sum(cast(v) * cast(v) for v in samples[p]) for p in range(n_pixels)]
            self.adj = [dict() for _ in range(n_pixels)]
            for p in range(n_pixels):
                if (p + 1) % width:
                    self.adj[p][p + 1] = 1
                    self.adj[p + 1][p] = 1
                if p + width < n_pixels:
                    self.adj[p][p + width] = 1
                    self.adj[p + width][p] = 1
            self.alive = n_pixels
        else:
            self._init_from_labels(samples, np.asarray(labels).ravel())

    def _init_from_labels(self, samples, labels):
        n_pixels = self.height * self.width
        width = self.width
        if labels.shape[0] != n_pixels:
            raise PreconditionError("one label per pixel required")
        # regions must be 4-connected: union same-label neighbours, then
        # every label must own exactly one root
        for p in range(n_pixels):
            if (p + 1) % width and labels[p] == labels[p + 1]:
                self._union_raw(p, p + 1)
            if p + width < n_pixels and labels[p] == labels[p + width]:
                self._union_raw(p, p + width)
        roots_of_label: dict[int, set[int]] = {}
        for p in range(n_pixels):
            roots_of_label.setdefault(int(labels[p]), set()).add(self.find(p))
        for lab, roots in roots_of_label.items():
            if len(roots) != 1:
                raise PreconditionError(f"label {lab} spans {len(roots)} components")
        cast = int if self.int_mode else float
        self.n = [0] * n_pixels
        self.s = [None] * n_pixels
        self.q = [0] * n_pixels
        self.adj = [None] * n_pixels
        for p in range(n_pixels):
            r = self.find(p)
            if self.s[r] is None:
                self.s[r] = [0] * self.channels
                self.adj[r] = {}
            self.n[r] += 1
            for c in range(self.channels):
                self.s[r][c] += cast(samples[p, c])
            self.q[r] += sum(cast(v) * cast(v) for v in samples[p])
        for p in range(n_pixels):
            a = self.find(p)
            if (p + 1) % width:
                b = self.find(p + 1)
                if a != b:
                    self.adj[a][b] = self.adj[a].get(b, 0) + 1
                    self.adj[b][a] = self.adj[b].get(a, 0) + 1
            if p + width < n_pixels:
                b = self.find(p + width)
                if a != b:
                    self.adj[a][b] = self.adj[a].get(b, 0) + 1
                    self.adj[b][a] = self.adj[b].get(a, 0) + 1
        self.alive = len({self.find(p) for p in range(n_pixels)})

    def _union_raw(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra > rb:
                ra, rb = rb, ra
            self.parent[rb] = ra

    def find(self, p: int) -> int:
        parent = self.parent
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    def live_regions(self) -> list[int]:
        return [r for r in range(len(self.n)) if self.find(r) == r and self.n[r] > 0]

    def consolidated_adj(self, r: int) -> dict[int, int]:
        resolved: dict[int, int] = {}
        for k, length in self.adj[r].items():
            rk = self.find(k)
            if rk != r:
                resolved[rk] = resolved.get(rk, 0) + length
        self.adj[r] = resolved
        return resolved

    def total_error(self) -> float:
        return sum(_region_sse(self.n[r], self.s[r], self.q[r]) for r in sorted(self.live_regions()))

    def stats_of(self, r: int) -> ClusterStats:
        return ClusterStats(self.n[r], tuple(self.s[r]), self.q[r])

    def merge(self, a: int, b: int) -> tuple[int, float]:
        """Merge live regions a and b; returns (kept id, error increase)."""
        if a == b:
            raise PreconditionError("cannot merge a region with itself")
        if a > b:
            a, b = b, a
        delta = _pair_delta(self.n[a], self.s[a], self.q[a], self.n[b], self.s[b], self.q[b])
        self.n[a] += self.n[b]
        for c in range(self.channels):
            self.s[a][c] += self.s[b][c]
        self.q[a] += self.q[b]
        self.n[b] = 0
        self.s[b] = None
        self.q[b] = 0
        small, large = (self.adj[a], self.adj[b]) if len(self.adj[a]) < len(self.adj[b]) else (self.adj[b], self.adj[a])
        for k, length in small.items():
            large[k] = large.get(k, 0) + length
        self.adj[a] = large
        self.adj[b] = None
        self.parent[b] = a
        self.version[a] += 1
        self.version[b] += 1
        self.alive -= 1
        return a, delta

    def label_map(self) -> np.ndarray:
        """Dense per-pixel labels, numbered by ascending region id."""
        n_pixels = self.height * self.width
        roots = np.fromiter((self.find(p) for p in range(n_pixels)), dtype=np.int64, count=n_pixels)
        uniq = np.unique(roots)
        dense = {int(r): i for i, r in enumerate(uniq)}
        flat = np.fromiter((dense[int(r)] for r in roots), dtype=np.int32, count=n_pixels)
        return flat.reshape(self.height, self.width)


def build_region_graph(samples, shape, labels=None) -> RegionGraph:
    return RegionGraph(samples, shape, labels)


@dataclass(frozen=True)
class Snapshot:
    labels: np.ndarray
    stats_by_label: dict
    error: float


@dataclass(frozen=True)
class MergeResult:
    series: ErrorSeries
    snapshots: dict[int, Snapshot]


def _snapshot(graph: RegionGraph) -> Snapshot:
    labels = graph.label_map()
    live = sorted(graph.live_regions())
    stats = {i: graph.stats_of(r) for i, r in enumerate(live)}
    return Snapshot(labels, stats, graph.total_error())


def region_merge(graph: RegionGraph, target_g: int, criterion: MergeCriterion = MergeCriterion(),
                 snapshot_levels=()) -> MergeResult:
    """Greedily merge adjacent regions down to ``target_g`` regions.

    Records the plain squared error after every merge (compensated
    summation) and captures full label maps at the requested levels.
    """
    import heapq

    if not 1 <= target_g <= graph.alive:
        raise PreconditionError(f"target {target_g} outside 1..{graph.alive}")
    wanted = {g for g in snapshot_levels if target_g <= g <= graph.alive}
    snapshots: dict[int, Snapshot] = {}

    e_sum = graph.total_error()
    comp = 0.0
    series: dict[int, float] = {graph.alive: e_sum}
    if graph.alive in wanted:
        snapshots[graph.alive] = _snapshot(graph)

    heap: list = []
    version = graph.version

    def push(a: int, b: int, length: int) -> None:
        if a > b:
            a, b = b, a
        delta = _pair_delta(graph.n[a], graph.s[a], graph.q[a], graph.n[b], graph.s[b], graph.q[b])
        heapq.heappush(heap, (criterion.score(delta, length), a, b, version[a], version[b]))

    for r in graph.live_regions():
        for k, length in graph.consolidated_adj(r).items():
            if r < k:
                push(r, k, length)

    while graph.alive > target_g:
        while True:
            if not heap:
                raise PreconditionError("no adjacent pair left to merge")
            score, a, b, va, vb = heapq.heappop(heap)
            if graph.find(a) == a and graph.find(b) == b and version[a] == va and version[b] == vb:
                break
        rid, delta = graph.merge(a, b)
        y = delta - comp
        t = e_sum + y
        comp = (t - e_sum) - y
        e_sum = t
        series[graph.alive] = e_sum
        for k, length in graph.consolidated_adj(rid).items():
            push(rid, k, length)
        if graph.alive in wanted:
            snapshots[graph.alive] = _snapshot(graph)

    entries = tuple(sorted(series.items()))
    return MergeResult(ErrorSeries(entries, graph.height * graph.width), snapshots)


# ---------------------------------------------------------------------------
# Extended pixel-level search.
# ---------------------------------------------------------------------------


def _split_delta_ints(np_, sp, qp, nk, sk, qk) -> float:
    # error change of carving (nk, sk, qk) out of its region; requires nk < np_
    num = 0
    for x, y in zip(sk, sp):
        d = x * np_ - y * nk
        num += d * d
    return -num / (nk * np_ * (np_ - nk))


@dataclass(frozen=True)
class ExtendedResult:
    labels: np.ndarray
    stats_by_label: dict
    series: ErrorSeries
    error: float
    moves_used: int


class _PixelState:
    """Label-per-pixel segmentation with exact stats and boundary lengths."""

    def __init__(self, samples: np.ndarray, shape: tuple[int, int], labels: np.ndarray):
        self.height, self.width = shape
        samples = np.asarray(samples)
        if samples.ndim == 1:
            samples = samples[:, None]
        self.samples = samples
        self.channels = samples.shape[1]
        self.int_mode = np.issubdtype(samples.dtype, np.integer)
        cast = int if self.int_mode else float
        n_pixels = self.height * self.width
        flat = np.asarray(labels).ravel()
        rep: dict[int, int] = {}
        for p in range(n_pixels):
            rep.setdefault(int(flat[p]), p)
        self.labels = np.fromiter((rep[int(flat[p])] for p in range(n_pixels)), dtype=np.int64, count=n_pixels)
        self.n: dict[int, int] = {}
        self.s: dict[int, list] = {}
        self.q: dict[int, int | float] = {}
        self.pixels: dict[int, set[int]] = {}
        for p in range(n_pixels):
            r = int(self.labels[p])
            if r not in self.n:
                self.n[r] = 0
                self.s[r] = [0] * self.channels
                self.q[r] = 0
                self.pixels[r] = set()
            self.n[r] += 1
            for c in range(self.channels):
                self.s[r][c] += cast(samples[p, c])
            self.q[r] += sum(cast(v) * cast(v) for v in samples[p])
            self.pixels[r].add(p)
        self.adj: dict[int, dict[int, int]] = {r: {} for r in self.n}
        for p in range(n_pixels):
            a = int(self.labels[p])
            for qx in self._neighbors(p):
                b = int(self.labels[qx])
                # _neighbors walks each undirected edge once; ids are
                # first-occurrence pixels, so either side may be smaller
                if a != b:
                    self.adj[a][b] = self.adj[a].get(b, 0) + 1
                    self.adj[b][a] = self.adj[b].get(a, 0) + 1
        self.next_id = n_pixels

    def _neighbors(self, p: int):
        w = self.width
        if (p + 1) % w:
            yield p + 1
        if p + w < self.height * w:
            yield p + w

    def neighbors4(self, p: int):
        w = self.width
        if p % w:
            yield p - 1
        if (p + 1) % w:
            yield p + 1
        if p >= w:
            yield p - w
        if p + w < self.height * w:
            yield p + w

    @property
    def g(self) -> int:
        return len(self.n)

    def total_error(self) -> float:
        return sum(_region_sse(self.n[r], self.s[r], self.q[r]) for r in sorted(self.n))

    def group_stats(self, group) -> tuple[int, list, int | float]:
        cast = int if self.int_mode else float
        gn = 0
        gs = [0] * self.channels
        gq = 0
        for p in group:
            gn += 1
            for c in range(self.channels):
                gs[c] += cast(self.samples[p, c])
            gq += sum(cast(v) * cast(v) for v in self.samples[p])
        return gn, gs, gq

    def boundary_runs(self, donor: int, receiver: int, cap: int = RUN_CAP_PER_EDGE):
        """Maximal connected same-value runs of the donor touching the receiver.

        Runs are found by flooding from boundary seeds (ascending pixel
        index) through same-valued donor pixels, so a run may extend past
        the boundary into the interior.  At most ``cap`` runs are returned.
        """
        donor_pixels = self.pixels[donor]
        seeds = sorted(
            p for p in donor_pixels
            if any(int(self.labels[qx]) == receiver for qx in self.neighbors4(p))
        )
        visited: set[int] = set()
        runs = []
        for seed in seeds:
            if seed in visited:
                continue
            value = self.samples[seed]
            run = []
            stack = [seed]
            visited.add(seed)
            while stack:
                p = stack.pop()
                run.append(p)
                for qx in self.neighbors4(p):
                    if qx in donor_pixels and qx not in visited and (self.samples[qx] == value).all():
                        visited.add(qx)
                        stack.append(qx)
            runs.append(sorted(run))
            if len(runs) >= cap:
                break
        return runs

    def move_group(self, group, src: int, dst: int) -> None:
        """Relabel ``group`` from src to dst, keeping stats and lengths exact."""
        gn, gs, gq = self.group_stats(group)
        self.n[src] -= gn
        for c in range(self.channels):
            self.s[src][c] -= gs[c]
        self.q[src] -= gq
        if dst not in self.n:
            self.n[dst] = 0
            self.s[dst] = [0] * self.channels
            self.q[dst] = 0
            self.pixels[dst] = set()
            self.adj[dst] = {}
        self.n[dst] += gn
        for c in range(self.channels):
            self.s[dst][c] += gs[c]
        self.q[dst] += gq
        group_set = set(group)
        self.pixels[src] -= group_set
        self.pixels[dst] |= group_set
        for p in group:
            self.labels[p] = dst
        for p in group:
            for qx in self.neighbors4(p):
                if qx in group_set:
                    continue
                lq = int(self.labels[qx])
                if lq != src:
                    self._bump(src, lq, -1)
                if lq != dst:
                    self._bump(dst, lq, +1)
        if self.n[src] == 0:
            if self.adj[src]:
                raise PreconditionError("emptied region still has boundary")
            del self.n[src], self.s[src], self.q[src], self.pixels[src], self.adj[src]

    def _bump(self, a: int, b: int, d: int) -> None:
        for x, y in ((a, b), (b, a)):
            length = self.adj[x].get(y, 0) + d
            if length < 0:
                raise PreconditionError("boundary length went negative")
            if length == 0:
                self.adj[x].pop(y, None)
            else:
                self.adj[x][y] = length


def region_grow_extended(samples, shape, labels, target_g: int,
                         budget_factor: int = BUDGET_FACTOR,
                         run_cap: int = RUN_CAP_PER_EDGE) -> ExtendedResult:
    """Local pixel-level search lowering the error at a fixed region count.

    Starting from a connected labelling, repeatedly applies the steepest
    strictly-improving move: either shift a boundary run from one region
    into its neighbour, or cut it loose as a new region.  When nothing
    improves and the region count sits above the target, the cheapest
    adjacent merge is forced.  A just-split pair may not immediately
    re-merge.  The search stops at the move budget (``budget_factor`` per
    pixel) or when the count is at target with no improving move; the
    error of every visited count is recorded, the latest visit winning,
    and the returned labelling is the best one seen at the target count.
    """
    state = _PixelState(samples, shape, np.asarray(labels))
    n_pixels = state.height * state.width
    budget = budget_factor * n_pixels
    e_sum = state.total_error()
    comp = 0.0
    series: dict[int, float] = {}
    tabu: tuple[int, int] | None = None
    moves_used = 0
    int_mode = state.int_mode
    best_e: float | None = None
    best_labels: np.ndarray | None = None

    def kahan_add(d: float) -> None:
        nonlocal e_sum, comp
        y = d - comp
        t = e_sum + y
        comp = (t - e_sum) - y
        e_sum = t

    def note_series() -> None:
        # churn may revisit a count at a worse error; the series keeps the
        # best error seen for each count
        e = max(e_sum, 0.0)
        if state.g not in series or e < series[state.g]:
            series[state.g] = e

    def note_state() -> None:
        # the search may leave the target count and come back worse; keep
        # the best labelling ever seen at the target
        nonlocal best_e, best_labels
        if state.g == target_g:
            e = state.total_error()
            if best_e is None or e < best_e:
                best_e = e
                best_labels = state.labels.copy()

    note_series()
    note_state()

    def forced_merge() -> None:
        nonlocal tabu
        cands = []
        for a in sorted(state.n):
            for b in sorted(state.adj[a]):
                if a < b:
                    delta = _pair_delta(state.n[a], state.s[a], state.q[a],
                                        state.n[b], state.s[b], state.q[b])
                    cands.append((delta, a, b))
        if not cands:
            raise PreconditionError("no adjacent regions to merge")
        cands.sort()
        delta, a, b = next((c for c in cands if (c[1], c[2]) != tabu), cands[0])
        state.move_group(sorted(state.pixels[b]), b, a)
        kahan_add(delta)
        tabu = None

    while moves_used < budget:
        eps = 0.0 if int_mode else 1e-12 * max(e_sum, 1.0)
        best = None  # (delta, kind, donor, receiver/new, group)
        for a in sorted(state.n):
            for b in sorted(state.adj[a]):
                for run in state.boundary_runs(a, b, run_cap):
                    gn, gs, gq = state.group_stats(run)
                    if gn >= state.n[a]:
                        continue
                    loss = _split_delta_ints(state.n[a], state.s[a], state.q[a], gn, gs, gq)
                    gain = _pair_delta(gn, gs, gq, state.n[b], state.s[b], state.q[b])
                    d_capture = loss + gain
                    if d_capture < -eps and (best is None or d_capture < best[0]):
                        best = (d_capture, "capture", a, b, run)
                    if loss < -eps and (best is None or loss < best[0]):
                        best = (loss, "split", a, None, run)
        if best is None:
            if state.g > target_g:
                forced_merge()
                moves_used += 1
                note_series()
                note_state()
                continue
            break
        delta, kind, donor, receiver, run = best
        if kind == "capture":
            state.move_group(run, donor, receiver)
            tabu = None
        else:
            fresh = state.next_id
            state.next_id += 1
            state.move_group(run, donor, fresh)
            tabu = (min(donor, fresh), max(donor, fresh))
        kahan_add(delta)
        moves_used += 1
        note_series()
        note_state()

    while state.g > target_g:
        forced_merge()
        moves_used += 1
        note_series()
        note_state()

    if best_e is not None and best_e < state.total_error():
        state = _PixelState(samples, shape, best_labels.reshape(shape))

    final_labels = np.zeros(n_pixels, dtype=np.int32)
    live = sorted(state.n)
    dense = {r: i for i, r in enumerate(live)}
    for p in range(n_pixels):
        final_labels[p] = dense[int(state.labels[p])]
    stats = {dense[r]: ClusterStats(state.n[r], tuple(state.s[r]), state.q[r]) for r in live}
    entries = tuple(sorted(series.items()))
    return ExtendedResult(final_labels.reshape(shape), stats,
                          ErrorSeries(entries, n_pixels), state.total_error(), moves_used)
