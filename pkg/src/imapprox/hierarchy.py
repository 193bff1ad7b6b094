"""Nested approximation sequences over value classes.

The units here are atoms: maximal pixel groups that always travel
together.  For a plain image an atom is one distinct pixel value; when a
guide labelling is supplied an atom is one (guide label, value) pair, so
the guide's level sets are unions of atoms.  A greedy minimum-increase
merge pass (Ward's criterion) walks from the finest partition to a single
cluster; a mirrored split pass walks the other way.  Every level of the
result is a union of atoms, and consecutive levels differ by exactly one
merge, so the whole sequence is nested and replayable.

Greedy choices are resolved exactly: candidate increments carry exact
integer fractions (8-bit sources), and float ties fall back to big-integer
cross multiplication, so the chosen merge order is a property of the image
and never of rounding.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .series import ErrorSeries
from .stats import (
    ClusterStats,
    Partition,
    PreconditionError,
    _merge_frac,
    _split_frac,
    merge_delta,
)

# ---------------------------------------------------------------------------
# Atom universes.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtomUniverse:
    """Atoms of an image: per-atom statistics plus per-pixel membership.

    Atom ids follow first occurrence in raster order.  ``guide_class`` is
    the guide label of each atom when a guide was used, else None.
    """

    stats: tuple[ClusterStats, ...]
    atom_of_pixel: np.ndarray
    guide_class: tuple[int, ...] | None = None

    @property
    def n_atoms(self) -> int:
        return len(self.stats)

    @property
    def n_pixels(self) -> int:
        return int(self.atom_of_pixel.size)

    def base_partition(self) -> Partition:
        """Every atom its own cluster, cluster id = atom id."""
        return Partition(list(self.stats), list(range(self.n_atoms)))

    def guide_partition(self) -> Partition:
        """Atoms grouped by guide class; cluster id = least atom id inside."""
        if self.guide_class is None:
            return self.base_partition()
        rep: dict[int, int] = {}
        labels = []
        for atom, cls in enumerate(self.guide_class):
            labels.append(rep.setdefault(cls, atom))
        return Partition(list(self.stats), labels)


def _atoms_from_keys(samples: np.ndarray, keys: np.ndarray, guide: np.ndarray | None) -> AtomUniverse:
    n = samples.shape[0]
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    n_raw = int(inverse.max()) + 1
    first = np.full(n_raw, n, dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(n, dtype=np.int64))
    order = np.argsort(first, kind="stable")
    rank = np.empty(n_raw, dtype=np.int64)
    rank[order] = np.arange(n_raw)
    atom_of_pixel = rank[inverse].astype(np.int32)

    integral = np.issubdtype(samples.dtype, np.integer)
    counts = np.bincount(atom_of_pixel, minlength=n_raw)
    # float64 bincount sums are exact for 8-bit data at any supported size
    sums = [np.bincount(atom_of_pixel, weights=samples[:, c].astype(np.float64), minlength=n_raw)
            for c in range(samples.shape[1])]
    sq = np.bincount(
        atom_of_pixel,
        weights=(samples.astype(np.float64) ** 2).sum(axis=1),
        minlength=n_raw,
    )
    cast = int if integral else float
    stats = tuple(
        ClusterStats(int(counts[i]), tuple(cast(s[i]) for s in sums), cast(sq[i]))
        for i in range(n_raw)
    )
    guide_class = None
    if guide is not None:
        first_pixel = first[order]
        guide_class = tuple(int(guide[p]) for p in first_pixel)
    return AtomUniverse(stats, atom_of_pixel, guide_class)


def value_classes(samples) -> AtomUniverse:
    """Atoms of a plain image: one atom per distinct pixel value."""
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise PreconditionError("samples must be a non-empty (n, channels) array")
    return _atoms_from_keys(samples, samples, None)


def pair_atoms(samples, guide_labels) -> AtomUniverse:
    """Atoms of a guided image: one atom per (guide label, value) pair."""
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None]
    guide = np.asarray(guide_labels).ravel()
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise PreconditionError("samples must be a non-empty (n, channels) array")
    if guide.shape[0] != samples.shape[0]:
        raise PreconditionError("one guide label per pixel required")
    keys = np.concatenate([guide[:, None].astype(np.int64), samples.astype(np.int64)], axis=1)
    return _atoms_from_keys(samples, keys, guide)


# ---------------------------------------------------------------------------
# Greedy merge engine.
# ---------------------------------------------------------------------------


def _entry_less(e, f) -> bool:
    # Entries share one float delta; order by exact fraction, then ids.
    if e[5] is not None and f[5] is not None:
        lhs = e[5] * f[6]
        rhs = f[5] * e[6]
        if lhs != rhs:
            return lhs < rhs
    return (e[1], e[2]) < (f[1], f[2])


class WardAscent:
    """Greedy minimum-increase merging of a partition, one step at a time.

    The partition is mutated in place.  A lazy heap holds candidate pairs
    stamped with per-cluster versions; entries whose clusters changed since
    the push are discarded on pop.  The surviving minimum is re-resolved
    exactly among float ties, so the (delta, smaller id, larger id) order
    is the true rational order.
    """

    def __init__(self, p: Partition):
        self.p = p
        self.int_mode = all(st.is_integer() for st in p.clusters.values())
        self.version: dict[int, int] = {k: 0 for k in p.clusters}
        self.heap: list = []
        ids = sorted(p.clusters)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                self._push(a, b)

    def _push(self, a: int, b: int) -> None:
        if a > b:
            a, b = b, a
        sa = self.p.clusters[a]
        sb = self.p.clusters[b]
        if self.int_mode:
            num, den = _merge_frac(sa, sb)
            delta = num / den
        else:
            num = den = None
            delta = merge_delta(sa, sb)
        heapq.heappush(self.heap, (delta, a, b, self.version[a], self.version[b], num, den))

    def _valid(self, e) -> bool:
        _, a, b, va, vb, _, _ = e
        return (
            a in self.p.clusters
            and b in self.p.clusters
            and self.version[a] == va
            and self.version[b] == vb
        )

    def _pop_best(self):
        heap = self.heap
        while heap:
            top = heapq.heappop(heap)
            if not self._valid(top):
                continue
            group = [top]
            while heap and heap[0][0] == top[0]:
                e = heapq.heappop(heap)
                if self._valid(e):
                    group.append(e)
            best = group[0]
            for e in group[1:]:
                if _entry_less(e, best):
                    best = e
            for e in group:
                if e is not best:
                    heapq.heappush(heap, e)
            return best
        raise PreconditionError("no merge candidate available")

    def step(self) -> tuple[int, int, float]:
        """Perform the cheapest merge; returns (kept id, absorbed id, delta)."""
        if self.p.g < 2:
            raise PreconditionError("nothing left to merge")
        delta, a, b, _, _, _, _ = self._pop_best()
        self.p._move_inplace(list(self.p.members[b]), b, a)
        self.version[a] += 1
        self.version[b] += 1
        for other in self.p.clusters:
            if other != a:
                self._push(a, other)
        return a, b, delta

    def run(self) -> list[tuple[int, int, float]]:
        steps = []
        while self.p.g > 1:
            steps.append(self.step())
        return steps

    def note_changed(self, changed) -> None:
        """Re-key clusters whose contents were edited outside the engine."""
        changed = [c for c in set(changed) if c in self.p.clusters]
        for c in changed:
            self.version[c] = self.version.get(c, 0) + 1
        pushed = set()
        for c in changed:
            for other in self.p.clusters:
                if other == c:
                    continue
                key = (min(c, other), max(c, other))
                if key not in pushed:
                    pushed.add(key)
                    self._push(*key)


# ---------------------------------------------------------------------------
# Split descent.
# ---------------------------------------------------------------------------


def _atom_order_keys(p: Partition) -> list:
    keys = []
    for st in p.unit_stats:
        if st.is_integer():
            keys.append(tuple(Fraction(c, st.n) for c in st.s))
        else:
            keys.append(tuple(c / st.n for c in st.s))
    return keys


def split_pass(p: Partition, record=None) -> Partition:
    """Greedily split until every atom stands alone.  Mutates and returns p.

    Each step cuts one cluster in two along its atom order (ascending mean,
    then atom id), choosing the most negative error change; ties prefer the
    cluster holding the larger least atom, then the earlier cut.  If
    ``record`` is a list, the label vector after every split is appended.
    """
    order_keys = _atom_order_keys(p)
    int_mode = all(st.is_integer() for st in p.unit_stats)
    while p.g < p.n_units:
        candidates = []  # (delta, num, den, cluster id, cut, atoms to move, least atom)
        for cid in sorted(p.clusters):
            members = sorted(p.members[cid], key=lambda u: (order_keys[u], u))
            if len(members) < 2:
                continue
            parent = p.clusters[cid]
            prefix = None
            for cut in range(1, len(members)):
                prefix = p.unit_stats[members[cut - 1]] if prefix is None else prefix + p.unit_stats[members[cut - 1]]
                if prefix.n >= parent.n:
                    continue
                if int_mode:
                    num, den = _split_frac(parent, prefix)
                    delta = num / den
                else:
                    num = den = None
                    d2 = sum((x - y) ** 2 for x, y in zip(prefix.mean, parent.mean))
                    delta = -d2 / (1.0 / prefix.n - 1.0 / parent.n)
                candidates.append((delta, num, den, cid, cut, members[:cut], min(members)))
        if not candidates:
            raise PreconditionError("cluster cannot be split further")
        fmin = min(c[0] for c in candidates)
        group = [c for c in candidates if c[0] == fmin]
        best = group[0]
        for c in group[1:]:
            if _split_cand_less(c, best):
                best = c
        _, _, _, cid, _, moved, _ = best
        p._move_inplace(moved, cid, p.next_id)
        if record is not None:
            record.append(list(p.labels))
    return p


def _split_cand_less(c, d) -> bool:
    if c[1] is not None and d[1] is not None:
        lhs = c[1] * d[2]
        rhs = d[1] * c[2]
        if lhs != rhs:
            return lhs < rhs
    # cluster ids drift across guided descents, so tie on the least atom a
    # cluster holds (larger first), then the earlier cut
    return (-c[6], c[4]) < (-d[6], d[4])


# ---------------------------------------------------------------------------
# Refinement.
# ---------------------------------------------------------------------------


def _exact_correction(src: ClusterStats, dst: ClusterStats, atom: ClusterStats) -> Fraction:
    ns, ds = _split_frac(src, atom)
    nm, dm = _merge_frac(atom, dst)
    return Fraction(ns, ds) + Fraction(nm, dm)


def refine_exact(p: Partition, max_moves: int = 100000) -> list[tuple[int, int, int]]:
    """Steepest single-atom moves under the exact error change.

    Repeatedly evaluates every (atom, destination) correction and applies
    the most negative one; stops when none is improving.  8-bit sources
    demand exact improvement (no epsilon) and resolve near-ties in exact
    arithmetic; float sources use a relative float threshold.  Returns the
    applied moves as (atom, from id, to id).  Mutates p.
    """
    a_count = p.n_units
    if a_count < 2:
        return []
    int_mode = all(st.is_integer() for st in p.unit_stats)
    n_t = np.array([st.n for st in p.unit_stats], dtype=np.float64)
    s_t = np.array([st.s for st in p.unit_stats], dtype=np.float64)
    moves: list[tuple[int, int, int]] = []
    while len(moves) < max_moves:
        ids = sorted(p.clusters)
        if len(ids) < 2:
            break
        col_of = {cid: i for i, cid in enumerate(ids)}
        n_k = np.array([p.clusters[c].n for c in ids], dtype=np.float64)
        s_k = np.array([p.clusters[c].s for c in ids], dtype=np.float64)
        own = np.array([col_of[lab] for lab in p.labels])

        cross = s_t[:, None, :] * n_k[None, :, None] - s_k[None, :, :] * n_t[:, None, None]
        gain = (cross ** 2).sum(axis=2) / (n_t[:, None] * n_k[None, :] * (n_t[:, None] + n_k[None, :]))

        n_src = n_k[own]
        s_src = s_k[own]
        movable = n_t < n_src
        cross_r = s_t * n_src[:, None] - s_src * n_t[:, None]
        loss = np.full(a_count, np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            loss[movable] = -((cross_r[movable] ** 2).sum(axis=1)) / (
                n_t[movable] * n_src[movable] * (n_src[movable] - n_t[movable])
            )

        delta = loss[:, None] + gain
        delta[np.arange(a_count), own] = np.inf
        fmin = float(delta.min())
        eps = 0.0 if int_mode else 1e-12 * max(p.E, 1.0)
        if not fmin < -eps:
            break
        if int_mode:
            window = 1e-12 * abs(fmin)
            ts, ks = np.nonzero(delta <= fmin + window)
            best = None
            best_exact = None
            for t, k in sorted(zip(ts.tolist(), ks.tolist())):
                src = p.clusters[p.labels[t]]
                dst = p.clusters[ids[k]]
                exact = _exact_correction(src, dst, p.unit_stats[t])
                if best is None or exact < best_exact:
                    best, best_exact = (t, k), exact
            if best_exact >= 0:
                break
            t, k = best
        else:
            flat = int(np.argmin(delta))
            t, k = divmod(flat, len(ids))
        src_id = p.labels[t]
        dst_id = ids[k]
        p._move_inplace([t], src_id, dst_id)
        moves.append((t, src_id, dst_id))
    return moves


def refine_kmeans(p: Partition, max_iters: int = 512) -> tuple[Partition, int]:
    """Classical nearest-mean reassignment of atoms (Lloyd over atoms).

    Atoms go to the cluster with the nearest mean (ties to the smaller
    cluster id).  A cluster that would lose all members instead keeps the
    member farthest from its own pre-pass mean (ties to the smaller atom
    id), so the cluster count never drops.  Iterates to a label fixpoint.
    Returns a fresh partition and the number of passes used.
    """
    a_count = p.n_units
    ids = sorted(p.clusters)
    if a_count < 2 or len(ids) < 2:
        return p.copy(), 0
    col_of = {cid: i for i, cid in enumerate(ids)}
    n_t = np.array([st.n for st in p.unit_stats], dtype=np.float64)
    s_t = np.array([st.s for st in p.unit_stats], dtype=np.float64)
    mean_t = s_t / n_t[:, None]
    assign = np.array([col_of[lab] for lab in p.labels])
    k_count = len(ids)
    iters = 0
    for _ in range(max_iters):
        n_k = np.bincount(assign, weights=n_t, minlength=k_count)
        s_k = np.stack(
            [np.bincount(assign, weights=s_t[:, c], minlength=k_count) for c in range(s_t.shape[1])],
            axis=1,
        )
        mean_k = s_k / n_k[:, None]
        d2 = ((mean_t[:, None, :] - mean_k[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(d2, axis=1)  # first occurrence: smaller cluster id
        while True:
            # a steal-back below may re-empty a cluster handled earlier, so
            # rescan until every cluster holds a member
            emptied = [k for k in range(k_count) if not (new_assign == k).any()]
            if not emptied:
                break
            for k in emptied:
                mine = np.nonzero(assign == k)[0]
                keep = mine[int(np.argmax(d2[mine, k]))]
                new_assign[keep] = k
        iters += 1
        if (new_assign == assign).all():
            break
        assign = new_assign
    labels = [ids[c] for c in assign]
    out = Partition(p.unit_stats, labels)
    out.next_id = max(out.next_id, p.next_id)
    return out, iters


# ---------------------------------------------------------------------------
# The nested sequence.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hierarchy:
    """A replayable nested approximation sequence.

    ``merges[i]`` merges the clusters canonically named ``a`` and ``b``
    (each cluster is named by its least atom id) and is the transition from
    ``n_atoms - i`` to ``n_atoms - i - 1`` clusters; the union keeps name
    ``a < b``.  ``series`` holds the total squared error of every level.
    ``residual_violations`` lists (level, earlier delta, later delta)
    convexity defects that greedy reordering could not remove.
    """

    atoms: AtomUniverse
    merges: tuple[tuple[int, int, float], ...]
    series: ErrorSeries
    residual_violations: tuple[tuple[int, float, float], ...]
    refined: bool

    @property
    def n_atoms(self) -> int:
        return self.atoms.n_atoms

    def replay_deltas(self) -> tuple[float, ...]:
        return tuple(m[2] for m in self.merges)

    def _labels_at(self, g: int) -> list[int]:
        if not 1 <= g <= self.n_atoms:
            raise PreconditionError(f"level {g} outside 1..{self.n_atoms}")
        labels = list(range(self.n_atoms))
        for a, b, _ in self.merges[: self.n_atoms - g]:
            for atom, lab in enumerate(labels):
                if lab == b:
                    labels[atom] = a
        return labels

    def partition_at(self, g: int) -> Partition:
        return Partition(list(self.atoms.stats), self._labels_at(g))

    def label_map(self, g: int, shape=None) -> np.ndarray:
        """Per-pixel labels at a level, renumbered 0..g-1 in canonical order."""
        labels = self._labels_at(g)
        dense = {lab: i for i, lab in enumerate(sorted(set(labels)))}
        atom_lab = np.array([dense[lab] for lab in labels], dtype=np.int32)
        flat = atom_lab[self.atoms.atom_of_pixel]
        return flat if shape is None else flat.reshape(shape)


def _merges_from_chain(atom_stats, chain) -> list[tuple[int, int, float]]:
    """Derive canonical merge steps from consecutive nested label vectors."""
    merges = []
    for fine, coarse in zip(chain, chain[1:]):
        reps: dict[int, int] = {}
        stats: dict[int, ClusterStats] = {}
        targets: dict[int, int] = {}
        grouped: dict[int, list[int]] = {}
        for atom, lab in enumerate(fine):
            if lab in reps:
                stats[lab] = stats[lab] + atom_stats[atom]
                if targets[lab] != coarse[atom]:
                    raise PreconditionError("levels are not nested")
            else:
                reps[lab] = atom
                stats[lab] = atom_stats[atom]
                targets[lab] = coarse[atom]
                grouped.setdefault(coarse[atom], []).append(lab)
        merged = [labs for labs in grouped.values() if len(labs) > 1]
        if len(merged) != 1 or len(merged[0]) != 2:
            raise PreconditionError("consecutive levels must differ by one merge")
        la, lb = merged[0]
        a, b = reps[la], reps[lb]
        sa, sb = stats[la], stats[lb]
        if a > b:
            a, b = b, a
            sa, sb = sb, sa
        merges.append((a, b, merge_delta(sa, sb)))
    return merges


def _replay_partition(atom_stats, merges, upto: int) -> Partition:
    labels = list(range(len(atom_stats)))
    for a, b, _ in merges[:upto]:
        for atom, lab in enumerate(labels):
            if lab == b:
                labels[atom] = a
    return Partition(list(atom_stats), labels)


def _series_from_merges(atom_stats, merges, n_pixels: int) -> ErrorSeries:
    a_count = len(atom_stats)
    live: dict[int, ClusterStats] = {i: st for i, st in enumerate(atom_stats)}
    entries = []
    entries.append((a_count, sum(live[k].sse for k in sorted(live))))
    for a, b, _ in merges:
        live[a] = live[a] + live[b]
        del live[b]
        entries.append((len(live), sum(live[k].sse for k in sorted(live))))
    entries.reverse()
    return ErrorSeries(tuple(entries), n_pixels)


def convexify(atom_stats, merges, max_passes: int = 50):
    """Reorder merges so deltas are non-decreasing where content permits.

    Adjacent inverted steps touching disjoint clusters commute and are
    swapped; equal-delta disjoint neighbours settle into id order, so
    every build of the same content lands on one normal form.  A dependent
    inversion is handed back to the greedy engine at that level: if greedy
    would repeat the same first merge the inversion is inherent and stays;
    otherwise the tail is rebuilt by pure greedy merging.  Returns the new
    merge list and the surviving (level, delta, next delta) violations.
    """
    merges = list(merges)
    a_count = len(atom_stats)
    for _ in range(max_passes):
        changed = False
        i = 0
        while i < len(merges) - 1:
            (a0, b0, d0) = merges[i]
            (a1, b1, d1) = merges[i + 1]
            if d1 < d0:
                if {a0, b0}.isdisjoint({a1, b1}):
                    merges[i], merges[i + 1] = merges[i + 1], merges[i]
                    changed = True
                else:
                    p = _replay_partition(atom_stats, merges, i)
                    tail = WardAscent(p).run()
                    if tail[0][:2] == (min(a0, b0), max(a0, b0)):
                        pass  # greedy agrees: inversion is inherent here
                    else:
                        merges = merges[:i] + [(min(a, b), max(a, b), d) for a, b, d in tail]
                        changed = True
                        break
            elif d1 == d0 and {a0, b0}.isdisjoint({a1, b1}) and (a1, b1) < (a0, b0):
                merges[i], merges[i + 1] = merges[i + 1], merges[i]
                changed = True
            i += 1
        if not changed:
            break
    residuals = []
    for i in range(len(merges) - 1):
        if merges[i + 1][2] < merges[i][2]:
            residuals.append((a_count - i - 1, merges[i][2], merges[i + 1][2]))
    return merges, residuals


def build_sequence(samples, guide_labels=None, refine: str = "auto") -> Hierarchy:
    """Full nested sequence for an image, finest to coarsest.

    ``samples`` is the (n, channels) pixel array in raster order.  With no
    guide the atoms are the distinct values and merging starts from them;
    a guide labelling starts merging from its level sets instead, and the
    split pass extends the sequence down to the pair atoms.

    ``refine`` enables the per-level exact refinement fold: "auto" turns
    it on exactly for unguided runs, "on"/"off" force it.  When a level is
    improved, everything below it is rebuilt by the split pass from that
    level, so the output stays nested.
    """
    if refine not in ("auto", "on", "off"):
        raise PreconditionError("refine must be auto, on, or off")
    atoms = pair_atoms(samples, guide_labels) if guide_labels is not None else value_classes(samples)
    do_refine = refine == "on" or (refine == "auto" and guide_labels is None)

    start = atoms.guide_partition()
    engine = WardAscent(start)
    snapshot = start.copy()
    ascent_rec: list[list[int]] = []
    ever_refined = False

    while engine.p.g > 1:
        engine.step()
        fired = False
        if do_refine:
            moves = refine_exact(engine.p)
            if moves:
                fired = True
                ever_refined = True
                changed = {m[1] for m in moves} | {m[2] for m in moves}
                engine.note_changed(changed)
        if fired:
            snapshot = engine.p.copy()
            ascent_rec = []
        else:
            ascent_rec.append(list(engine.p.labels))

    desc_levels = [list(snapshot.labels)]
    split_pass(snapshot, record=desc_levels)
    chain = list(reversed(desc_levels)) + ascent_rec
    if len(chain) != atoms.n_atoms:
        raise PreconditionError("level chain has wrong length")

    merges = _merges_from_chain(atoms.stats, chain)
    merges, residuals = convexify(atoms.stats, merges)
    series = _series_from_merges(atoms.stats, merges, atoms.n_pixels)
    return Hierarchy(atoms, tuple(merges), series, tuple(residuals), ever_refined)


def self_consistency_check(h: Hierarchy) -> list[str]:
    """Cross-check a sequence against from-scratch recomputation."""
    issues = []
    a_count = h.n_atoms
    if len(h.merges) != a_count - 1:
        issues.append(f"expected {a_count - 1} merges, found {len(h.merges)}")
        return issues
    recorded = dict(h.series.entries)
    live: dict[int, ClusterStats] = {i: st for i, st in enumerate(h.atoms.stats)}
    level_e = {a_count: sum(live[k].sse for k in sorted(live))}
    for i, (a, b, delta) in enumerate(h.merges):
        if a >= b:
            issues.append(f"merge {i}: ids not ordered ({a}, {b})")
        if a not in live or b not in live:
            issues.append(f"merge {i}: dead cluster referenced")
            return issues
        if delta < 0:
            issues.append(f"merge {i}: negative delta {delta}")
        live[a] = live[a] + live[b]
        del live[b]
        level_e[len(live)] = sum(live[k].sse for k in sorted(live))
    if set(recorded) != set(level_e):
        issues.append("series levels do not match the merge count")
    for g in sorted(level_e):
        if g in recorded and recorded[g] != level_e[g]:
            issues.append(f"level {g}: series error {recorded[g]} != replay {level_e[g]}")
    # full structural validation at a few levels; replay covers the errors
    for g in sorted({1, 2, a_count // 2, a_count} & set(recorded) | {1, a_count}):
        p = h.partition_at(g)
        try:
            p.validate()
        except PreconditionError as exc:
            issues.append(f"level {g}: {exc}")
        if p.g != g:
            issues.append(f"level {g}: replay produced {p.g} clusters")
    if not h.series.is_monotone():
        issues.append("error series is not non-increasing toward finer levels")
    return issues
