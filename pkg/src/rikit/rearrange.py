"""Distribution functions, decreasing rearrangements, and superlevel sets.

Functions on the half-line are carried as piecewise-constant ``GridFn``
objects; functions on a finite weighted point set as ``WeightedSamples``.
All operations are pure and exact (sort-based, closed-form cell sums).

Infinite values are carried as explicit ``math.inf`` markers.  Any integral
that touches an infinite cell of positive length returns the marker; no
``inf * 0`` ever enters quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotAttainable

INF = math.inf

# absolute tolerance on accumulated weights (exact partial sums otherwise)
MEASURE_ATOL = 1e-12


class GridFn:
    """Piecewise-constant function on (0, inf).

    ``breakpoints`` is the full edge sequence 0 = t_0 < t_1 < ... < t_N;
    ``values[i]`` is the value on the half-open cell (t_{i-1}, t_i];
    ``tail`` is the constant value on (t_N, inf), either 0 or finite.
    """

    __slots__ = ("edges", "values", "tail")

    def __init__(self, breakpoints, values, tail=0.0):
        edges = np.asarray(breakpoints, dtype=float)
        vals = np.asarray(values, dtype=float)
        if edges.ndim != 1 or vals.ndim != 1:
            raise ValueError("breakpoints and values must be 1-d sequences")
        if len(edges) != len(vals) + 1:
            raise ValueError("need exactly one more breakpoint than values")
        if len(edges) == 0 or edges[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if not np.all(np.isfinite(edges)):
            raise ValueError("breakpoints must be finite")
        if len(edges) > 1 and not np.all(np.diff(edges) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.isnan(vals)) or np.any(vals < 0):
            raise ValueError("values must be nonnegative (inf markers allowed)")
        tail = float(tail)
        if not (tail >= 0 and math.isfinite(tail)):
            raise ValueError("tail must be 0 or a finite nonnegative constant")
        self.edges = edges
        self.values = vals
        self.tail = tail

    # -- basic queries ----------------------------------------------------

    @property
    def ncells(self):
        return len(self.values)

    @property
    def support_end(self):
        """Last breakpoint (the function equals ``tail`` beyond it)."""
        return float(self.edges[-1])

    def value_at(self, t):
        """Value on the cell containing t; cells are right-closed.

        For t <= 0 the limit from the right (the first cell value) is
        returned; for t beyond the last breakpoint, ``tail``.
        """
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.edges, t_arr, side="left")
        out = np.empty_like(t_arr)
        first = self.values[0] if self.ncells else self.tail
        out[idx <= 0] = first
        beyond = idx > self.ncells
        out[beyond] = self.tail
        inside = (idx > 0) & ~beyond
        if self.ncells:
            out[inside] = self.values[idx[inside] - 1]
        return out if np.ndim(t) else float(out[0])

    def max_value(self):
        cand = self.tail
        if self.ncells:
            cand = max(cand, float(np.max(self.values)))
        return cand

    def is_decreasing(self, tol=0.0):
        if self.ncells == 0:
            return True
        ok = bool(np.all(np.diff(self.values) <= tol))
        return ok and self.tail <= self.values[-1] + tol

    # -- exact cell calculus ----------------------------------------------

    def cell_integrals(self, power=1.0):
        """Per-cell integrals of f^power; inf markers propagate."""
        widths = np.diff(self.edges)
        vals = self.values
        out = np.empty_like(vals)
        finite = np.isfinite(vals)
        out[finite] = vals[finite] ** power * widths[finite]
        out[~finite] = INF
        return out

    def integral_to(self, t, power=1.0):
        """Exact integral of f^power over (0, t]."""
        t = float(t)
        if t <= 0:
            return 0.0
        cells = self.cell_integrals(power)
        cum = np.concatenate(([0.0], np.cumsum(cells)))
        if t >= self.support_end:
            total = cum[-1]
            extra = t - self.support_end
            if extra > 0 and self.tail > 0:
                total += self.tail ** power * extra
            return float(total)
        i = int(np.searchsorted(self.edges, t, side="left"))
        head = cum[i - 1]
        v = self.values[i - 1]
        if not math.isfinite(v):
            return INF
        return float(head + v ** power * (t - self.edges[i - 1]))

    def total_integral(self, power=1.0):
        """Integral of f^power over (0, inf); inf if the tail is positive."""
        if self.tail > 0:
            return INF
        cells = self.cell_integrals(power)
        s = float(np.sum(cells))
        return s

    def integrals_at(self, ts, power=1.0):
        """Vectorized integral of f^power over (0, t] for each t in ts."""
        ts = np.asarray(ts, dtype=float)
        cells = self.cell_integrals(power)
        cum = np.concatenate(([0.0], np.cumsum(cells)))
        idx = np.searchsorted(self.edges, ts, side="left")
        idx = np.clip(idx, 1, None)
        out = np.empty(len(ts))
        inside = idx <= self.ncells
        if np.any(inside):
            i = idx[inside]
            v = self.values[i - 1]
            part = np.where(
                np.isfinite(v),
                v ** power * (ts[inside] - self.edges[i - 1]),
                INF,
            )
            out[inside] = cum[i - 1] + part
        beyond = ~inside
        if np.any(beyond):
            extra = ts[beyond] - self.support_end
            tail_part = self.tail ** power * np.maximum(extra, 0.0) \
                if self.tail > 0 else 0.0
            out[beyond] = cum[-1] + tail_part
        out[ts <= 0] = 0.0
        return out

    def has_inf(self):
        return bool(np.any(~np.isfinite(self.values)))

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {
            "breakpoints": [float(x) for x in self.edges],
            "values": [float(v) for v in self.values],
            "tail": self.tail,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["breakpoints"], d["values"], d.get("tail", 0.0))

    def csv_rows(self):
        """One row per cell: (t_lo, t_hi, value)."""
        return [
            (float(self.edges[i]), float(self.edges[i + 1]), float(self.values[i]))
            for i in range(self.ncells)
        ]

    def __repr__(self):
        return (
            f"GridFn(edges={np.array2string(self.edges, precision=6)}, "
            f"values={np.array2string(self.values, precision=6)}, "
            f"tail={self.tail})"
        )


def indicator_gridfn(measure):
    """Characteristic function of a set of the given measure, as a GridFn."""
    if measure <= 0:
        raise ValueError("indicator measure must be positive")
    return GridFn([0.0, float(measure)], [1.0])


class WeightedSamples:
    """Extended-real values with strictly positive weights (measure units)."""

    __slots__ = ("values", "weights")

    def __init__(self, values, weights):
        vals = np.asarray(values, dtype=float)
        w = np.asarray(weights, dtype=float)
        if vals.ndim != 1 or w.ndim != 1 or len(vals) != len(w):
            raise ValueError("values and weights must be 1-d of equal length")
        if np.any(np.isnan(vals)):
            raise ValueError("values must not contain NaN")
        if not np.all((w > 0) & np.isfinite(w)):
            raise ValueError("weights must be strictly positive and finite")
        self.values = vals
        self.weights = w

    def __len__(self):
        return len(self.values)

    @property
    def total_weight(self):
        return float(np.sum(self.weights))

    def to_dict(self):
        return {
            "values": [float(v) for v in self.values],
            "weights": [float(w) for w in self.weights],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["values"], d["weights"])


@dataclass(frozen=True)
class SuperlevelSet:
    """One canonical member of the measure-t superlevel family.

    Satisfies the sandwich {|u| > level} <= A <= {|u| >= level} with
    total weight equal to ``target_measure`` up to the measure tolerance.
    """

    indices: tuple
    target_measure: float
    level: float


def distribution(u: WeightedSamples, t) -> float:
    """Weight of {|u| > t}; right-continuous and non-increasing in t."""
    t = float(t)
    mask = np.abs(u.values) > t
    return float(np.sum(u.weights[mask]))


def _sorted_desc(u: WeightedSamples):
    """Indices sorting |values| descending, ties broken by ascending index."""
    a = np.abs(u.values)
    return np.lexsort((np.arange(len(a)), -a))


def decreasing_rearrangement(u: WeightedSamples) -> GridFn:
    """Sort-based exact rearrangement of |u| onto (0, total_weight].

    Adjacent equal values are merged (block weights summed in descending
    order) and trailing zeros dropped, so equimeasurable inputs produce
    identical GridFns.
    """
    order = _sorted_desc(u)
    vals = np.abs(u.values)[order]
    w = u.weights[order]
    # merge equal-value blocks with a canonical summation order
    merged_vals = []
    merged_w = []
    i = 0
    n = len(vals)
    while i < n:
        j = i
        while j + 1 < n and vals[j + 1] == vals[i]:
            j += 1
        block = np.sort(w[i : j + 1])[::-1]
        merged_vals.append(vals[i])
        merged_w.append(float(np.sum(block)))
        i = j + 1
    # drop trailing zero block
    if merged_vals and merged_vals[-1] == 0.0:
        merged_vals.pop()
        merged_w.pop()
    edges = np.concatenate(([0.0], np.cumsum(merged_w)))
    return GridFn(edges, merged_vals)


def gridfn_distribution(f: GridFn, t) -> float:
    """Lebesgue measure of {f > t} for a GridFn (inf if the tail exceeds t)."""
    t = float(t)
    if f.tail > t:
        return INF
    widths = np.diff(f.edges)
    mask = f.values > t
    return float(np.sum(widths[mask]))


def star_star(ustar: GridFn, t) -> float:
    """Elementary maximal function: the running average (1/t) int_0^t u*."""
    t = float(t)
    if t <= 0:
        raise ValueError("star_star requires t > 0")
    s = ustar.integral_to(t)
    if not math.isfinite(s):
        return INF
    return s / t


def superlevel_family(u: WeightedSamples, t) -> SuperlevelSet:
    """One canonical superlevel set of measure t (lowest indices first).

    Raises NotAttainable when no subset at the cut level reaches measure t
    exactly (finite atoms cannot be split); the error carries the two
    nearest attainable measures.
    """
    t = float(t)
    total = u.total_weight
    if t < -MEASURE_ATOL or t > total + MEASURE_ATOL:
        raise ValueError("t must lie in [0, total weight]")
    if t <= MEASURE_ATOL:
        a = np.abs(u.values)
        level = INF if np.any(~np.isfinite(a)) else (float(np.max(a)) if len(a) else 0.0)
        return SuperlevelSet(indices=(), target_measure=t, level=level)

    order = _sorted_desc(u)
    a = np.abs(u.values)[order]
    w = u.weights[order]
    cw = np.cumsum(w)
    # cut level: value of the cell of the rearrangement containing t
    j = int(np.searchsorted(cw, t - MEASURE_ATOL, side="left"))
    j = min(j, len(a) - 1)
    level = float(a[j])

    chosen = []
    acc = 0.0
    # everything strictly above the level is forced in
    k = 0
    while k < len(a) and a[k] > level:
        chosen.append(int(order[k]))
        acc += w[k]
        k += 1
    # fill with equal-to-level samples, lowest original index first
    eq_positions = [k2 for k2 in range(k, len(a)) if a[k2] == level]
    eq_positions.sort(key=lambda k2: order[k2])
    for k2 in eq_positions:
        if acc >= t - MEASURE_ATOL:
            break
        nxt = acc + w[k2]
        if nxt <= t + MEASURE_ATOL:
            chosen.append(int(order[k2]))
            acc = nxt
        else:
            raise NotAttainable(t, lower=acc, upper=nxt)
    if abs(acc - t) > MEASURE_ATOL:
        raise NotAttainable(t, lower=acc, upper=acc)
    return SuperlevelSet(
        indices=tuple(sorted(chosen)), target_measure=t, level=level
    )
