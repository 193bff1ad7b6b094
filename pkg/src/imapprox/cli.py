"""Command line front end.

Exit codes: 0 on success, 1 on processing or verification failure, 2 on
usage errors (argument parsing is click's).
"""

from __future__ import annotations

import sys

import click
import numpy as np

from . import imgio
from .hierarchy import build_sequence, self_consistency_check
from .optimal1d import HistogramError, histogram, optimal_sequence
from .regions import MergeCriterion, build_region_graph, region_grow_extended, region_merge
from .stats import ClusterStats, PreconditionError


def _read_image(path) -> imgio.RasterImage:
    try:
        return imgio.read_pnm(path)
    except (OSError, imgio.PnmParseError) as exc:
        raise click.ClickException(str(exc))


def _require_gray(img: imgio.RasterImage) -> np.ndarray:
    if not img.is_gray:
        raise click.ClickException("a grayscale (P5) image is required here")
    return img.pixels.astype(np.int64)


def _write_outputs(series, series_path, labels, labels_path, stats_by_label, out_path, channels, shape):
    if series_path:
        imgio.write_series(series_path, series)
    if labels_path:
        imgio.write_labels(labels_path, labels.reshape(shape))
    if out_path:
        approx = imgio.render_approximation(labels.reshape(shape), stats_by_label, channels)
        imgio.write_pnm(out_path, approx)


@click.group()
def main() -> None:
    """Piecewise-constant image approximation tools."""


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-g", "--levels", default=32, show_default=True, help="Largest cluster count in the series.")
@click.option("--at", "at_level", type=int, default=None, help="Cluster count for the rendered outputs.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Approximation image (PGM).")
@click.option("--series", "series_path", type=click.Path(dir_okay=False), default=None, help="Error series CSV.")
@click.option("--labels", "labels_path", type=click.Path(dir_okay=False), default=None, help="Label sidecar.")
def optimal(input_path, levels, at_level, output, series_path, labels_path):
    """Globally optimal approximations from the intensity histogram."""
    img = _read_image(input_path)
    pixels = _require_gray(img)
    try:
        hist = histogram(pixels)
        sol = optimal_sequence(hist, levels)
    except HistogramError as exc:
        raise click.ClickException(str(exc))
    g = at_level if at_level is not None else min(levels, hist.n_bins)
    if not 1 <= g <= hist.n_bins or g > sol.series.entries[-1][0]:
        raise click.ClickException(f"no level {g} in the computed series")
    if output or labels_path:
        labels = sol.labels_for_image(g, pixels)
        stats = {}
        for i, (first, last) in enumerate(sol.intervals_at(g)):
            n = sum(hist.counts[first:last + 1])
            s = sum(v * c for v, c in zip(hist.values[first:last + 1], hist.counts[first:last + 1]))
            q = sum(v * v * c for v, c in zip(hist.values[first:last + 1], hist.counts[first:last + 1]))
            stats[i] = ClusterStats(n, (s,), q)
        _write_outputs(sol.series, series_path, labels, labels_path, stats, output, 1, pixels.shape)
    elif series_path:
        imgio.write_series(series_path, sol.series)
    click.echo(f"{hist.n_bins} values, E({g}) = {sol.series.error_at(g)}")


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--guide", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Image whose level sets seed the coarse side.")
@click.option("--refine", type=click.Choice(["auto", "on", "off"]), default="auto", show_default=True,
              help="Per-level exact refinement fold.")
@click.option("--at", "at_level", type=int, default=2, show_default=True, help="Cluster count for rendered outputs.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Approximation image (PNM).")
@click.option("--series", "series_path", type=click.Path(dir_okay=False), default=None, help="Error series CSV.")
@click.option("--labels", "labels_path", type=click.Path(dir_okay=False), default=None, help="Label sidecar.")
@click.option("--series-max", type=int, default=None, help="Truncate the CSV to counts up to this.")
def hier(input_path, guide, refine, at_level, output, series_path, labels_path, series_max):
    """Nested approximation sequence over value classes."""
    img = _read_image(input_path)
    samples = img.samples()
    guide_labels = None
    if guide:
        gimg = _read_image(guide)
        if (gimg.height, gimg.width) != (img.height, img.width):
            raise click.ClickException("guide dimensions differ from the input")
        guide_labels = gimg.samples()[:, 0] if gimg.is_gray else None
        if guide_labels is None:
            flat = gimg.samples()
            guide_labels = flat[:, 0] * 65536 + flat[:, 1] * 256 + flat[:, 2]
    try:
        h = build_sequence(samples, guide_labels, refine=refine)
    except PreconditionError as exc:
        raise click.ClickException(str(exc))
    if not 1 <= at_level <= h.n_atoms:
        raise click.ClickException(f"no level {at_level}: sequence spans 1..{h.n_atoms}")
    series = h.series if series_max is None else h.series.truncated(series_max)
    if output or labels_path:
        labels = h.label_map(at_level)
        p = h.partition_at(at_level)
        dense = {lab: i for i, lab in enumerate(sorted(p.clusters))}
        stats = {dense[lab]: st for lab, st in p.clusters.items()}
        _write_outputs(series, series_path, labels, labels_path, stats, output,
                       img.channels, (img.height, img.width))
    elif series_path:
        imgio.write_series(series_path, series)
    tag = " (refined)" if h.refined else ""
    click.echo(f"{h.n_atoms} atoms{tag}, E({at_level}) = {h.series.error_at(at_level)}")


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-r", "--regions", "target", type=int, required=True, help="Target region count.")
@click.option("--criterion", type=click.Choice(["plain", "additive", "flsa"]), default="plain", show_default=True)
@click.option("--lam", type=float, default=0.0, show_default=True, help="Boundary weight for the additive criterion.")
@click.option("--extended", is_flag=True, help="Pixel-level polishing after merging.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Approximation image (PNM).")
@click.option("--series", "series_path", type=click.Path(dir_okay=False), default=None, help="Error series CSV.")
@click.option("--labels", "labels_path", type=click.Path(dir_okay=False), default=None, help="Label sidecar.")
@click.option("--series-max", type=int, default=None, help="Truncate the CSV to counts up to this.")
def segment(input_path, target, criterion, lam, extended, output, series_path, labels_path, series_max):
    """Connected-region approximation by greedy adjacent merging."""
    img = _read_image(input_path)
    samples = img.samples()
    shape = (img.height, img.width)
    try:
        graph = build_region_graph(samples, shape)
        crit = MergeCriterion(criterion, lam)
        result = region_merge(graph, target, crit, snapshot_levels=(target,))
    except PreconditionError as exc:
        raise click.ClickException(str(exc))
    snap = result.snapshots[target]
    series = result.series if series_max is None else result.series.truncated(series_max)
    labels, stats, err = snap.labels, snap.stats_by_label, snap.error
    if extended:
        ext = region_grow_extended(samples, shape, labels, target)
        labels, stats, err = ext.labels, ext.stats_by_label, ext.error
    _write_outputs(series, series_path, labels, labels_path, stats, output, img.channels, shape)
    click.echo(f"{target} regions, E = {err}")


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-g", "--levels", default=10, show_default=True, help="Compare counts 2..this.")
def compare(input_path, levels):
    """Optimal versus nested-sequence error, level by level."""
    img = _read_image(input_path)
    pixels = _require_gray(img)
    hist = histogram(pixels)
    sol = optimal_sequence(hist, levels)
    h = build_sequence(img.samples())
    top = min(levels, hist.n_bins)
    click.echo("g\toptimal\tnested\tratio")
    for g in range(2, top + 1):
        eo = sol.series.error_at(g)
        eh = h.series.error_at(g)
        ratio = eh / eo if eo else 1.0
        click.echo(f"{g}\t{eo:.6g}\t{eh:.6g}\t{ratio:.4f}")


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
def verify(input_path):
    """Internal consistency battery; exits 1 on any failure."""
    img = _read_image(input_path)
    failures = 0

    def report(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail and not ok:
            line += f"  ({detail})"
        click.echo(line)
        if not ok:
            failures += 1

    h = build_sequence(img.samples())
    issues = self_consistency_check(h)
    report("sequence self-consistency", not issues, "; ".join(issues[:3]))
    report("sequence error series monotone", h.series.is_monotone())

    h2 = build_sequence(img.samples())
    report("sequence deterministic rebuild", h2.merges == h.merges and h2.series.entries == h.series.entries)

    if img.is_gray:
        pixels = img.pixels.astype(np.int64)
        hist = histogram(pixels)
        sol = optimal_sequence(hist, min(16, hist.n_bins))
        report("optimal series strictly decreasing",
               all(b < a for (_, a), (_, b) in zip(sol.series.entries, sol.series.entries[1:])))
        ok = True
        detail = ""
        for g, eo in sol.series.entries:
            eh = h.series.error_at(g)
            if eh < eo - 1e-9 * max(1.0, eo):
                ok = False
                detail = f"g={g}: nested {eh} below optimal {eo}"
                break
        report("nested never beats optimal", ok, detail)

    level = min(4, h.n_atoms)
    labels = h.label_map(level, (img.height, img.width))
    p = h.partition_at(level)
    dense = {lab: i for i, lab in enumerate(sorted(p.clusters))}
    stats = {dense[lab]: st for lab, st in p.clusters.items()}
    approx = imgio.render_approximation(labels, stats, img.channels)
    import tempfile
    from pathlib import Path
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "roundtrip.pnm"
        imgio.write_pnm(path, approx)
        back = imgio.read_pnm(path)
        report("image round trip", (back.pixels == approx.pixels).all())

    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
