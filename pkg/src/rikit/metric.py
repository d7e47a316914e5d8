"""Finite metric measure spaces, curves, upper gradients, and the convex
programs for modulus, capacity, minimal upper gradients, and minimal
pair-defined gradients, plus ball-wise Poincare-ratio estimation.

Admissibility along a curve uses the trapezoidal edge rule
sum d(a, b) (g(a) + g(b)) / 2, which is additive over concatenation and
monotone in g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllDegenerate
from .solver import SolveResult, constraint_generation, solve_norm_sum

INF = math.inf
TRIANGLE_SLACK = 1e-12


class MMS:
    """Finite metric measure space: distance matrix plus point weights."""

    __slots__ = ("dist", "weights", "labels")

    def __init__(self, dist, weights, labels=None):
        d = np.asarray(dist, dtype=float)
        w = np.asarray(weights, dtype=float)
        n = len(w)
        if d.shape != (n, n):
            raise ValueError("distance matrix shape must match weights")
        if not np.allclose(d, d.T, rtol=0, atol=TRIANGLE_SLACK):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must have zero diagonal")
        off = d + np.eye(n) * 1.0
        if np.any(off <= 0):
            raise ValueError("off-diagonal distances must be strictly positive")
        if not np.all((w > 0) & np.isfinite(w)):
            raise ValueError("weights must be strictly positive")
        # triangle inequality within declared slack
        for k in range(n):
            if np.any(d > d[:, [k]] + d[[k], :] + TRIANGLE_SLACK):
                raise ValueError("triangle inequality violated")
        self.dist = d
        self.weights = w
        self.labels = list(labels) if labels is not None else list(range(n))

    @property
    def n(self):
        return len(self.weights)

    @property
    def total_measure(self):
        return float(np.sum(self.weights))

    def to_dict(self):
        return {
            "dist": [[float(x) for x in row] for row in self.dist],
            "weights": [float(w) for w in self.weights],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["dist"], d["weights"])


@dataclass(frozen=True)
class Curve:
    """Vertex path with at least two vertices, consecutive distinct."""

    vertices: tuple

    def __post_init__(self):
        v = tuple(int(i) for i in self.vertices)
        if len(v) < 2:
            raise ValueError("a curve needs at least two vertices")
        if any(a == b for a, b in zip(v[:-1], v[1:])):
            raise ValueError("consecutive vertices must be distinct")
        object.__setattr__(self, "vertices", v)

    def length(self, space: MMS) -> float:
        v = self.vertices
        return float(sum(space.dist[a, b] for a, b in zip(v[:-1], v[1:])))

    def subcurves(self):
        v = self.vertices
        n = len(v)
        for i in range(n - 1):
            for j in range(i + 1, n):
                yield Curve(v[i : j + 1])


@dataclass
class CurveFamily:
    """Finite explicit curve family; empty encodes the trivial regime."""

    curves: list
    generator: str = "explicit"

    def __len__(self):
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)

    @classmethod
    def empty(cls):
        return cls([], generator="empty")

    @classmethod
    def pairs(cls, space: MMS):
        """All two-vertex curves (one per unordered pair)."""
        n = space.n
        cs = [Curve((i, j)) for i in range(n) for j in range(i + 1, n)]
        return cls(cs, generator="pairs")

    @classmethod
    def path_edges(cls, n):
        """Consecutive edges of a path on n vertices."""
        return cls([Curve((i, i + 1)) for i in range(n - 1)], generator="path-edges")

    @classmethod
    def path_subpaths(cls, n):
        """All contiguous subpaths of a path on n vertices."""
        cs = [
            Curve(tuple(range(i, j + 1)))
            for i in range(n)
            for j in range(i + 1, n)
        ]
        return cls(cs, generator="path-subpaths")

    def closed_under_subcurves(self):
        have = {c.vertices for c in self.curves}
        for c in self.curves:
            for sub in c.subcurves():
                if sub.vertices not in have:
                    return False
        return True

    def to_dict(self):
        return {"curves": [list(c.vertices) for c in self.curves],
                "generator": self.generator}

    @classmethod
    def from_dict(cls, d):
        return cls([Curve(tuple(v)) for v in d["curves"]],
                   d.get("generator", "explicit"))


# -- generators ----------------------------------------------------------------


def path_space(n, spacing=1.0, weights=None):
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :]) * float(spacing)
    w = np.full(n, 1.0) if weights is None else np.asarray(weights, dtype=float)
    return MMS(d, w)


def grid_space(rows, cols):
    """Unit-edge lattice graph with shortest-path (Manhattan) distances."""
    coords = [(r, c) for r in range(rows) for c in range(cols)]
    n = len(coords)
    d = np.zeros((n, n))
    for i, (r1, c1) in enumerate(coords):
        for j, (r2, c2) in enumerate(coords):
            d[i, j] = abs(r1 - r2) + abs(c1 - c2)
    return MMS(d, np.ones(n))


def tree_space(branching, depth):
    """Complete rooted tree with unit edges; distances via ancestor depths."""
    parents = [-1]
    level = [0]
    depths = [0]
    frontier = [0]
    for d in range(depth):
        nxt = []
        for node in frontier:
            for _ in range(branching):
                parents.append(node)
                depths.append(d + 1)
                nxt.append(len(parents) - 1)
        frontier = nxt
    n = len(parents)

    def ancestors(i):
        out = []
        while i != -1:
            out.append(i)
            i = parents[i]
        return out

    anc = [ancestors(i) for i in range(n)]
    anc_sets = [dict((a, k) for k, a in enumerate(a_list)) for a_list in anc]
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            for k, a in enumerate(anc[i]):
                if a in anc_sets[j]:
                    dist[i, j] = dist[j, i] = k + anc_sets[j][a]
                    break
    return MMS(dist, np.ones(n))


def parse_generator(text):
    """Expand 'path:n', 'grid:m,n' or 'tree:b,d' into an MMS."""
    kind, _, args = text.partition(":")
    nums = [int(x) for x in args.split(",")] if args else []
    if kind == "path":
        return path_space(*nums)
    if kind == "grid":
        return grid_space(*nums)
    if kind == "tree":
        return tree_space(*nums)
    raise ValueError(f"unknown generator {text!r}")


# -- curve integrals and upper gradients -----------------------------------------


def _edge_weights(space: MMS, curve: Curve):
    """Trapezoid coefficients per vertex position along the curve."""
    v = curve.vertices
    coef = np.zeros(space.n)
    for a, b in zip(v[:-1], v[1:]):
        half = 0.5 * space.dist[a, b]
        coef[a] += half
        coef[b] += half
    return coef


def line_integral(space: MMS, g, curve: Curve) -> float:
    """Trapezoidal edge rule along the curve; inf markers propagate."""
    g = np.asarray(g, dtype=float)
    total = 0.0
    for a, b in zip(curve.vertices[:-1], curve.vertices[1:]):
        d = space.dist[a, b]
        ga, gb = g[a], g[b]
        if not (math.isfinite(ga) and math.isfinite(gb)):
            if d > 0:
                return INF
            continue
        total += d * (ga + gb) / 2.0
    return total


@dataclass(frozen=True)
class UpperGradientVerdict:
    ok: bool
    worst_curve: Curve | None = None
    violation: float = 0.0

    def __bool__(self):
        return self.ok


def _endpoint_drop(u, curve: Curve) -> float:
    """|u(start) - u(end)| with the convention |(+-inf)-(+-inf)| = inf."""
    a = float(u[curve.vertices[0]])
    b = float(u[curve.vertices[-1]])
    if not (math.isfinite(a) and math.isfinite(b)):
        return INF
    return abs(a - b)


def is_upper_gradient(space: MMS, u, g, curves: CurveFamily,
                      tol=1e-10) -> UpperGradientVerdict:
    """Check the upper-gradient inequality on every curve of the family."""
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    worst = None
    worst_gap = 0.0
    for c in curves:
        lhs = _endpoint_drop(u, c)
        rhs = line_integral(space, g, c)
        if math.isinf(lhs) and math.isinf(rhs):
            continue
        gap = lhs - rhs
        if gap > worst_gap:
            worst_gap = gap
            worst = c
    scale = 1.0 + float(np.max(np.abs(u[np.isfinite(u)]), initial=0.0))
    if worst is not None and worst_gap > tol * scale:
        return UpperGradientVerdict(False, worst, worst_gap)
    return UpperGradientVerdict(True)


# -- convex programs ------------------------------------------------------------


def modulus(space: MMS, curves: CurveFamily, p, tol=1e-8) -> SolveResult:
    """p-modulus: min sum_i w_i rho_i^p with int_gamma rho ds >= 1 per curve."""
    if p < 1:
        raise ValueError("modulus requires p >= 1")
    n = space.n
    if len(curves) == 0:
        return SolveResult(0.0, np.zeros(n), {
            "slacks": np.zeros(0), "duals": np.zeros(0),
            "kkt_residual": 0.0, "note": "empty family"}, tol)
    rows = np.stack([_edge_weights(space, c) for c in curves])
    b = np.ones(len(curves))
    return constraint_generation(space.weights, rows, b, float(p), tol)


def single_curve_modulus_oracle(space: MMS, curve: Curve, p):
    """Closed-form one-constraint KKT optimum (the pre-build oracle).

    rho_i proportional to (w_i / mu_i)^{1/(p-1)} with w the trapezoid
    coefficients; optimum (sum_i mu_i^{-1/(p-1)} w_i^{p/(p-1)})^{-(p-1)}.
    Evaluated in log space so exponents near 1/(p-1) stay finite.
    """
    if p <= 1:
        raise ValueError("closed form needs p > 1")
    from scipy.special import logsumexp

    w = _edge_weights(space, curve)
    mu = space.weights
    mask = w > 0
    e = (p * np.log(w[mask]) - np.log(mu[mask])) / (p - 1.0)
    log_s = float(logsumexp(e))
    rho = np.zeros(space.n)
    rho[mask] = np.exp(np.log(w[mask] / mu[mask]) / (p - 1.0) - log_s)
    return math.exp(-(p - 1.0) * log_s), rho


def minimal_upper_gradient(space: MMS, u, curves: CurveFamily, p,
                           tol=1e-8) -> SolveResult:
    """min ||g||_{p,mu} over g >= 0 satisfying the curve constraints.

    The optimum is the weighted p-norm of the minimizer (attained; the
    feasible set is closed and the objective coercive).
    """
    if p < 1:
        raise ValueError("p >= 1 required")
    u = np.asarray(u, dtype=float)
    n = space.n
    if len(curves) == 0:
        return SolveResult(0.0, np.zeros(n), {
            "slacks": np.zeros(0), "duals": np.zeros(0),
            "kkt_residual": 0.0, "note": "empty family"}, tol)
    rows = np.stack([_edge_weights(space, c) for c in curves])
    b = np.asarray([_endpoint_drop(u, c) for c in curves])
    res = constraint_generation(space.weights, rows, b, float(p), tol)
    power_opt = res.optimum
    res.optimum = power_opt ** (1.0 / p) if p > 1 else power_opt
    res.certificate["objective"] = "weighted p-norm"
    return res


def minimal_hajlasz(space: MMS, u, p, tol=1e-8) -> SolveResult:
    """min ||h||_{p,mu} over h >= 0 with d(x,y)(h(x)+h(y)) >= |u(x)-u(y)|."""
    if p < 1:
        raise ValueError("p >= 1 required")
    u = np.asarray(u, dtype=float)
    n = space.n
    rows = []
    b = []
    for i in range(n):
        for j in range(i + 1, n):
            drop = abs(u[i] - u[j])
            if drop <= 0:
                continue
            row = np.zeros(n)
            row[i] = row[j] = space.dist[i, j]
            rows.append(row)
            b.append(drop)
    if not rows:
        return SolveResult(0.0, np.zeros(n), {
            "slacks": np.zeros(0), "duals": np.zeros(0),
            "kkt_residual": 0.0, "note": "constant function"}, tol)
    res = constraint_generation(space.weights, np.stack(rows), np.asarray(b),
                                float(p), tol)
    res.optimum = res.optimum ** (1.0 / p) if p > 1 else res.optimum
    res.certificate["objective"] = "weighted p-norm"
    return res


def capacity(space: MMS, fixed_set, curves: CurveFamily, p,
             tol=1e-8) -> SolveResult:
    """Sobolev capacity: min ||u||_p + ||g||_p over u >= chi_E, upper-gradient g.

    With an empty curve family the optimum is exactly ||chi_E||_p with
    u = chi_E and g = 0 (the trivial regime).
    """
    if p < 1:
        raise ValueError("p >= 1 required")
    fixed = sorted(set(int(i) for i in fixed_set))
    if not fixed:
        raise ValueError("capacity needs a nonempty set")
    n = space.n
    mu = space.weights
    chi = np.zeros(n)
    chi[fixed] = 1.0
    if len(curves) == 0:
        opt = float(np.sum(mu[fixed])) ** (1.0 / p)
        return SolveResult(opt, np.concatenate((chi, np.zeros(n))), {
            "slacks": np.zeros(0), "duals": np.zeros(0),
            "kkt_residual": 0.0, "note": "empty family: ||chi_E||_p exactly",
            "norm_parts": [opt, 0.0]}, tol)
    rows = []
    for c in curves:
        coef = _edge_weights(space, c)
        row = np.zeros(2 * n)
        row[n:] = coef
        a, bb = c.vertices[0], c.vertices[-1]
        # two orientations of |u(a) - u(b)| <= int_gamma g
        r1 = row.copy()
        r1[a] -= 1.0
        r1[bb] += 1.0
        r2 = row.copy()
        r2[a] += 1.0
        r2[bb] -= 1.0
        rows.extend([r1, r2])
    A = np.stack(rows)
    b = np.zeros(len(rows))
    lb = np.concatenate((chi, np.zeros(n)))
    weights = np.concatenate((mu, mu))
    return solve_norm_sum(weights, A, b, lb, float(p), split=n, tol=tol)


# -- Poincare ratios ---------------------------------------------------------------


@dataclass(frozen=True)
class BallInfo:
    center: int
    radius: float
    members: tuple


def enumerate_balls(space: MMS):
    """Distinct closed-prefix balls per center.

    For each center the sorted distinct distances u_1 < u_2 < ... generate
    the balls {y : d(c, y) <= u_k}; the generating radius is u_k (the
    infimum of open-ball radii realizing the set).  Singletons (u_0 = 0)
    are included with radius 0.
    """
    out = []
    d = space.dist
    for c in range(space.n):
        order = np.argsort(d[c], kind="stable")
        ds = d[c][order]
        n = len(ds)
        for k in range(n):
            if k + 1 < n and ds[k + 1] == ds[k]:
                continue
            out.append(BallInfo(c, float(ds[k]), tuple(int(i) for i in order[: k + 1])))
    return out


def poincare_ratio(space: MMS, u, g, p, lam=1.0):
    """Worst-ball ratio of the p-Poincare inequality; a c_PI lower bound.

    Balls where both sides vanish are skipped; AllDegenerate is raised if
    every ball is skipped.
    """
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    w = space.weights
    d = space.dist
    best = None
    best_ball = None
    for ball in enumerate_balls(space):
        members = np.asarray(ball.members)
        if len(members) < 2:
            continue
        bw = w[members]
        diam = float(np.max(d[np.ix_(members, members)]))
        if diam <= 0:
            continue
        u_b = float(np.sum(bw * u[members]) / np.sum(bw))
        lhs = float(np.sum(bw * np.abs(u[members] - u_b)) / np.sum(bw))
        lam_members = np.where(d[ball.center] <= lam * ball.radius)[0]
        lw = w[lam_members]
        rhs_root = float(np.sum(lw * g[lam_members] ** p) / np.sum(lw)) ** (1.0 / p)
        denom = diam * rhs_root
        if lhs <= 0 and denom <= 0:
            continue
        ratio = INF if denom <= 0 else lhs / denom
        if best is None or ratio > best:
            best = ratio
            best_ball = ball
    if best is None:
        raise AllDegenerate("every ball was skipped")
    return best, best_ball


def rearranged(space: MMS, values):
    """Decreasing rearrangement of a point function over (P, mu)."""
    from .rearrange import WeightedSamples, decreasing_rearrangement

    return decreasing_rearrangement(
        WeightedSamples(np.asarray(values, dtype=float), space.weights)
    )
