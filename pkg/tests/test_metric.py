"""Metric-space programs against closed-form and grid-search oracles."""

import math

import numpy as np
import pytest

from rikit.errors import AllDegenerate
from rikit.metric import (
    MMS,
    Curve,
    CurveFamily,
    capacity,
    grid_space,
    is_upper_gradient,
    line_integral,
    minimal_hajlasz,
    minimal_upper_gradient,
    modulus,
    parse_generator,
    path_space,
    poincare_ratio,
    single_curve_modulus_oracle,
    tree_space,
)

INF = math.inf


def two_point_space():
    return MMS([[0.0, 1.0], [1.0, 0.0]], [1.0, 1.0])


def random_space(rng, n=None):
    n = n or int(rng.integers(2, 7))
    pts = rng.uniform(0, 3, size=(n, 2))
    d = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
    # perturb duplicate points apart
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] == 0:
                d[i, j] = d[j, i] = 1e-3
    w = rng.uniform(0.2, 2.0, n)
    return MMS(d, w)


def grid_search_min(objective, bounds, step=1e-2, refine=3):
    """Exhaustive grid search with local refinement (the small-instance oracle)."""
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    best_x, best_v = None, INF
    h = step
    for _ in range(refine + 1):
        axes = [np.arange(l, u + h / 2, h) for l, u in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.array([objective(x) for x in pts])
        k = int(np.argmin(vals))
        if vals[k] < best_v:
            best_v, best_x = float(vals[k]), pts[k]
        lo = np.maximum(lo, best_x - 2 * h)
        hi = np.minimum(hi, best_x + 2 * h)
        h /= 10.0
    return best_v, best_x


# -- line integrals and upper gradients ----------------------------------------


def test_line_integral_constant():
    s = path_space(4)
    c = Curve((0, 1, 2, 3))
    g = np.full(4, 2.0)
    assert line_integral(s, g, c) == pytest.approx(2.0 * c.length(s))
    assert line_integral(s, np.zeros(4), c) == 0.0


def test_line_integral_trapezoid_rule():
    d = np.array([[0, 1, 3.0], [1, 0, 2.0], [3.0, 2.0, 0]])
    s = MMS(d, np.ones(3))
    c = Curve((0, 1, 2))
    g = np.array([0.0, 1.0, 0.0])
    assert line_integral(s, g, c) == pytest.approx(1 * 0.5 + 2 * 0.5)


def test_upper_gradient_verdicts():
    s = two_point_space()
    fam = CurveFamily([Curve((0, 1))])
    assert is_upper_gradient(s, [5.0, 5.0], [0.0, 0.0], fam).ok
    v = is_upper_gradient(s, [0.0, 1.0], [1.0, 1.0], fam)
    assert v.ok
    v = is_upper_gradient(s, [0.0, 1.0], [0.9, 0.9], fam)
    assert not v.ok
    assert v.violation == pytest.approx(0.1)
    assert v.worst_curve.vertices == (0, 1)


def test_upper_gradient_inf_convention():
    s = two_point_space()
    fam = CurveFamily([Curve((0, 1))])
    u = np.array([INF, INF])
    assert not is_upper_gradient(s, u, [1.0, 1.0], fam).ok
    assert is_upper_gradient(s, u, [INF, 1.0], fam).ok


# -- modulus ------------------------------------------------------------------


def test_modulus_empty_family():
    s = two_point_space()
    res = modulus(s, CurveFamily.empty(), 2)
    assert res.optimum == 0.0
    assert np.all(res.minimizer == 0)


def test_modulus_single_curve_matches_kkt_oracle():
    rng = np.random.default_rng(100)
    for _ in range(100):
        s = random_space(rng)
        n = s.n
        k = int(rng.integers(2, min(n, 4) + 1))
        verts = tuple(rng.permutation(n)[:k])
        curve = Curve(verts)
        p = float(rng.uniform(1.2, 4.0))
        oracle_opt, oracle_rho = single_curve_modulus_oracle(s, curve, p)
        res = modulus(s, CurveFamily([curve]), p)
        assert res.optimum == pytest.approx(oracle_opt, rel=1e-6)
        assert np.allclose(res.minimizer, oracle_rho, atol=1e-5)


def test_modulus_two_point_p2():
    # single edge, d=1, unit weights: rho = (1, 1), optimum 2... trapezoid
    # coefficients are (1/2, 1/2), so KKT gives rho_i = w_i-proportional
    s = two_point_space()
    res = modulus(s, CurveFamily([Curve((0, 1))]), 2)
    opt, rho = single_curve_modulus_oracle(s, Curve((0, 1)), 2)
    assert res.optimum == pytest.approx(opt, rel=1e-9)
    # by symmetry both entries agree and satisfy the constraint with equality
    assert res.minimizer[0] == pytest.approx(res.minimizer[1], rel=1e-6)
    assert (res.minimizer[0] + res.minimizer[1]) / 2 == pytest.approx(1.0, abs=1e-7)


def test_modulus_monotone_in_family():
    rng = np.random.default_rng(7)
    for _ in range(100):
        s = random_space(rng, 5)
        all_curves = [Curve((i, j)) for i in range(5) for j in range(5) if i != j]
        rng.shuffle(all_curves)
        k = int(rng.integers(1, len(all_curves)))
        small = CurveFamily(all_curves[:k])
        big = CurveFamily(all_curves[: k + int(rng.integers(1, 4))])
        p = float(rng.uniform(1.0, 3.0))
        m1 = modulus(s, small, p).optimum
        m2 = modulus(s, big, p).optimum
        assert m1 <= m2 + 1e-7


def test_modulus_disjoint_union_additive():
    rng = np.random.default_rng(31)
    s1 = random_space(rng, 3)
    # two copies at large mutual distance
    n = s1.n
    big = np.full((2 * n, 2 * n), 100.0)
    big[:n, :n] = s1.dist
    big[n:, n:] = s1.dist
    np.fill_diagonal(big, 0.0)
    s2 = MMS(big, np.concatenate((s1.weights, s1.weights)))
    c = Curve((0, 1, 2))
    c_shift = Curve((n, n + 1, n + 2))
    p = 2.5
    single = modulus(s1, CurveFamily([c]), p).optimum
    double = modulus(s2, CurveFamily([c, c_shift]), p).optimum
    assert double == pytest.approx(2 * single, rel=1e-9)


def test_modulus_scaling_covariance():
    rng = np.random.default_rng(55)
    for _ in range(20):
        s = random_space(rng, 4)
        scale = float(rng.uniform(0.5, 3.0))
        s2 = MMS(s.dist * scale, s.weights)
        curves = CurveFamily([Curve((0, 1, 2)), Curve((1, 3))])
        p = float(rng.uniform(1.0, 3.0))
        m1 = modulus(s, curves, p).optimum
        m2 = modulus(s2, curves, p).optimum
        assert m2 == pytest.approx(m1 * scale ** -p, rel=1e-6)


def test_modulus_p1_vertex_solution():
    s = path_space(3)
    res = modulus(s, CurveFamily([Curve((0, 1, 2))]), 1)
    assert res.certificate.get("vertex")
    coef = np.array([0.5, 1.0, 0.5])
    assert res.optimum == pytest.approx(
        min(1.0 / coef[i] * s.weights[i] for i in range(3)), rel=1e-9
    )


# -- minimal upper gradients -----------------------------------------------------


def test_minimal_gradient_constant_u():
    s = path_space(4)
    res = minimal_upper_gradient(s, np.full(4, 3.3), CurveFamily.pairs(s), 2)
    assert res.optimum == 0.0


def test_minimal_gradient_two_point():
    s = two_point_space()
    res = minimal_upper_gradient(s, [0.0, 1.0], CurveFamily([Curve((0, 1))]), 2)
    assert np.allclose(res.minimizer, [1.0, 1.0], atol=1e-6)
    assert res.optimum == pytest.approx(math.sqrt(2.0), rel=1e-7)


def test_minimal_gradient_grid_oracle_path3():
    s = path_space(3)
    u = np.array([0.0, 1.0, 2.0])
    fam = CurveFamily.path_subpaths(3)
    p = 2.0
    res = minimal_upper_gradient(s, u, fam, p)

    def feasible_cost(g):
        for c in fam:
            if line_integral(s, g, c) < abs(u[c.vertices[0]] - u[c.vertices[-1]]) - 1e-9:
                return INF
        return float(np.sum(s.weights * g ** p)) ** (1.0 / p)

    oracle, _ = grid_search_min(feasible_cost, [(0.0, 3.0)] * 3, step=5e-2)
    assert res.optimum == pytest.approx(oracle, abs=1e-4)


def test_minimal_gradient_empty_family_is_zero():
    rng = np.random.default_rng(2)
    s = random_space(rng, 5)
    u = rng.normal(size=5)
    res = minimal_upper_gradient(s, u, CurveFamily.empty(), 2)
    assert res.optimum == 0.0


# -- Hajlasz gradients -------------------------------------------------------------


def test_hajlasz_constant():
    s = path_space(3)
    assert minimal_hajlasz(s, np.full(3, 1.0), 2).optimum == 0.0


def test_hajlasz_two_point_symmetric():
    s = two_point_space()
    res = minimal_hajlasz(s, [0.0, 1.0], 2)
    assert np.allclose(res.minimizer, [0.5, 0.5], atol=1e-7)
    assert res.optimum == pytest.approx(math.sqrt(0.5), rel=1e-7)


def test_hajlasz_three_point_grid_oracle():
    d = np.array([[0.0, 1.0, 2.5], [1.0, 0.0, 1.5], [2.5, 1.5, 0.0]])
    s = MMS(d, [0.5, 1.0, 2.0])
    u = np.array([0.0, 1.0, 3.0])
    p = 2.0
    res = minimal_hajlasz(s, u, p)

    def feasible_cost(h):
        for i in range(3):
            for j in range(i + 1, 3):
                if d[i, j] * (h[i] + h[j]) < abs(u[i] - u[j]) - 1e-9:
                    return INF
        return float(np.sum(s.weights * h ** p)) ** (1.0 / p)

    oracle, _ = grid_search_min(feasible_cost, [(0.0, 3.0)] * 3, step=5e-2)
    assert res.optimum == pytest.approx(oracle, abs=1e-4)


def test_twice_hajlasz_is_upper_gradient_on_pairs():
    # on a two-vertex curve the trapezoid integral is d * (h(x) + h(y))
    rng = np.random.default_rng(77)
    for _ in range(20):
        s = random_space(rng)
        u = rng.normal(size=s.n)
        res = minimal_hajlasz(s, u, 2)
        g = 2.0 * res.minimizer
        assert is_upper_gradient(s, u, g, CurveFamily.pairs(s), tol=1e-6).ok


# -- capacity ------------------------------------------------------------------------


def test_capacity_empty_family_exact():
    rng = np.random.default_rng(8)
    for _ in range(10):
        s = random_space(rng)
        k = int(rng.integers(1, s.n + 1))
        fixed = sorted(rng.permutation(s.n)[:k])
        p = float(rng.uniform(1.0, 4.0))
        res = capacity(s, fixed, CurveFamily.empty(), p)
        expect = float(np.sum(s.weights[fixed])) ** (1.0 / p)
        assert res.optimum == expect  # exact, no solver involved


def test_capacity_all_points_constant_one():
    s = path_space(4)
    res = capacity(s, range(4), CurveFamily.pairs(s), 2)
    # u = 1 everywhere is feasible with g = 0
    assert res.optimum == pytest.approx(s.total_measure ** 0.5, rel=1e-6)


def test_capacity_two_point_grid_oracle():
    s = two_point_space()
    fam = CurveFamily([Curve((0, 1))])
    p = 2.0
    res = capacity(s, [0], fam, p)

    def objective(x):
        u1, g0, g1 = x
        u = np.array([1.0, u1])
        if (g0 + g1) / 2 < abs(u[0] - u[1]) - 1e-9:
            return INF
        return (1.0 + u1 ** p) ** (1 / p) + (g0 ** p + g1 ** p) ** (1 / p)

    oracle, _ = grid_search_min(objective, [(0.0, 1.0), (0.0, 1.5), (0.0, 1.5)],
                                step=2e-2)
    assert res.optimum == pytest.approx(oracle, abs=1e-4)


def test_capacity_p1_two_point():
    s = two_point_space()
    fam = CurveFamily([Curve((0, 1))])
    res = capacity(s, [0], fam, 1)

    def objective(x):
        u1, g0, g1 = x
        if (g0 + g1) / 2 < abs(1.0 - u1) - 1e-9:
            return INF
        return 1.0 + u1 + g0 + g1

    oracle, _ = grid_search_min(objective, [(0.0, 1.0)] * 3, step=2e-2)
    assert res.optimum == pytest.approx(oracle, abs=1e-4)


# -- Poincare ratio ---------------------------------------------------------------------


def test_poincare_constant_degenerate():
    s = path_space(3)
    with pytest.raises(AllDegenerate):
        poincare_ratio(s, np.ones(3), np.zeros(3), 1)


def test_poincare_two_point_half():
    s = two_point_space()
    ratio, ball = poincare_ratio(s, [0.0, 1.0], [1.0, 1.0], 1, lam=1.0)
    assert ratio == pytest.approx(0.5)
    assert len(ball.members) == 2


def test_poincare_path_stable_under_refinement():
    vals = []
    for n in (8, 16, 32):
        s = path_space(n, spacing=1.0 / (n - 1))
        u = np.linspace(0.0, 1.0, n)
        fam = CurveFamily.path_edges(n)
        g = minimal_upper_gradient(s, u, fam, 2).minimizer
        ratio, _ = poincare_ratio(s, u, g, 2)
        vals.append(ratio)
    assert max(vals) / min(vals) < 1.6
    assert all(math.isfinite(v) and v > 0 for v in vals)


# -- generators and validation -------------------------------------------------------------


def test_generators_shapes():
    assert path_space(5).n == 5
    assert grid_space(3, 4).n == 12
    t = tree_space(2, 3)
    assert t.n == 1 + 2 + 4 + 8
    assert parse_generator("path:6").n == 6
    assert parse_generator("grid:2,3").n == 6
    assert parse_generator("tree:2,2").n == 7


def test_tree_distances():
    t = tree_space(2, 2)
    # children of root are 1 and 2; their children 3,4 and 5,6
    assert t.dist[1, 2] == 2.0
    assert t.dist[3, 4] == 2.0
    assert t.dist[3, 5] == 4.0
    assert t.dist[0, 3] == 2.0


def test_mms_validation():
    with pytest.raises(ValueError):
        MMS([[0.0, 1.0], [2.0, 0.0]], [1.0, 1.0])  # asymmetric
    with pytest.raises(ValueError):
        MMS([[0.0, 0.0], [0.0, 0.0]], [1.0, 1.0])  # zero off-diagonal
    with pytest.raises(ValueError):
        MMS([[0.0, 5.0, 1.0], [5.0, 0.0, 1.0], [1.0, 1.0, 0.0]], [1.0] * 3)
    with pytest.raises(ValueError):
        MMS([[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0])  # nonpositive weight


def test_mms_roundtrip():
    s = path_space(3)
    s2 = MMS.from_dict(s.to_dict())
    assert np.array_equal(s.dist, s2.dist)
    assert np.array_equal(s.weights, s2.weights)
