"""Approximation-error series indexed by cluster count."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ErrorSeries:
    """Total squared error ``E`` per cluster count ``g``, with the pixel
    count ``N`` needed to express entries as standard deviations.

    Entries are kept in strictly ascending ``g``.  Monotonicity and
    convexity are observations about a series, not constructor guarantees,
    so they are exposed as predicates.
    """

    entries: tuple[tuple[int, float], ...]
    pixel_count: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((int(g), float(e)) for g, e in self.entries))
        if self.pixel_count < 1:
            raise ValueError("pixel count must be positive")
        gs = [g for g, _ in self.entries]
        if any(b <= a for a, b in zip(gs, gs[1:])):
            raise ValueError("cluster counts must be strictly increasing")
        if any(g < 1 for g in gs):
            raise ValueError("cluster counts start at 1")
        if any(e < 0 for _, e in self.entries):
            raise ValueError("squared error cannot be negative")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(g for g, _ in self.entries)

    @property
    def errors(self) -> tuple[float, ...]:
        return tuple(e for _, e in self.entries)

    def error_at(self, g: int) -> float:
        for gg, e in self.entries:
            if gg == g:
                return e
        raise KeyError(f"no entry for {g} clusters")

    def sigma_at(self, g: int) -> float:
        """Root-mean-square error sqrt(E/N) at a level."""
        return math.sqrt(self.error_at(g) / self.pixel_count)

    def sigmas(self) -> tuple[tuple[int, float], ...]:
        return tuple((g, math.sqrt(e / self.pixel_count)) for g, e in self.entries)

    def is_monotone(self) -> bool:
        """True when E never increases as g grows."""
        es = self.errors
        return all(b <= a for a, b in zip(es, es[1:]))

    def convexity_violations(self, tol: float = 0.0) -> list[tuple[int, float]]:
        """Interior levels where E_g exceeds the mean of its neighbours.

        Only consecutive triples (g-1, g, g+1) are judged.  Returns
        (g, excess) pairs with excess > tol.
        """
        out: list[tuple[int, float]] = []
        by_g = dict(self.entries)
        for g, e in self.entries:
            lo, hi = by_g.get(g - 1), by_g.get(g + 1)
            if lo is None or hi is None:
                continue
            excess = e - (lo + hi) / 2.0
            if excess > tol:
                out.append((g, excess))
        return out

    def is_convex(self, tol: float = 0.0) -> bool:
        return not self.convexity_violations(tol)

    def truncated(self, max_g: int) -> "ErrorSeries":
        return ErrorSeries(tuple((g, e) for g, e in self.entries if g <= max_g), self.pixel_count)
