import numpy as np
import pytest

from cubecat.complexes import (
    ComplexPoint,
    grid_complex,
    random_square_complex,
    random_tree_complex,
    single_cube_complex,
    tree_complex,
    validate_complex,
)
from cubecat.cones import TangentCone, random_flag_cone
from cubecat.spaces import (
    ComplexSpace,
    ConeSpace,
    EuclideanSpace,
    FiniteMeasure,
    approx_complex_distance,
    builtin_space,
    measure_from_json,
    point_from_json,
    point_to_json,
    sample_measure,
)


def tripod_space():
    return ComplexSpace(tree_complex([(0, 1), (0, 2), (0, 3)], 4))


def l_shape():
    # three unit squares: [0,2]x[0,1] plus [0,1]x[1,2]; the plane corner
    # (1, 1) is a reflex vertex of the complex
    ids = {}
    for i, xy in enumerate([(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1),
                            (0, 2), (1, 2)]):
        ids[xy] = i
    def square(x, y):
        return [ids[(x, y)], ids[(x + 1, y)], ids[(x, y + 1)], ids[(x + 1, y + 1)]]
    cubes = [square(0, 0), square(1, 0), square(0, 1)]
    edges = set()
    for a, b, c, d in cubes:
        edges.update([tuple(sorted(e)) for e in [(a, b), (a, c), (b, d), (c, d)]])
    X, violations = validate_complex(
        {"vertices": 8, "edges": sorted(edges), "cubes": cubes}
    )
    assert violations == []
    return ComplexSpace(X), ids


# ----------------------------------------------------------------- measures


def test_measure_accepts_probability_weights():
    m = FiniteMeasure([0, 1, 2], [0.25, 0.25, 0.5])
    assert np.isclose(m.weights.sum(), 1.0)
    assert len(m) == 3


def test_measure_rejects_bad_weights():
    with pytest.raises(ValueError):
        FiniteMeasure([0, 1], [1.0, -0.5])
    with pytest.raises(ValueError):
        FiniteMeasure([0, 1], [2.0, 2.0])  # not a probability vector
    with pytest.raises(ValueError):
        FiniteMeasure([0, 1], [1.0])
    with pytest.raises(ValueError):
        FiniteMeasure([], [])


# ---------------------------------------------------------------- euclidean


def test_euclidean_space_basics():
    E = EuclideanSpace(3)
    p = E.point([1.0, 0.0, 0.0])
    q = E.point([0.0, 2.0, 0.0])
    assert E.distance(p, q) == pytest.approx(np.sqrt(5.0))
    lo, hi = E.distance_bounds(p, q)
    assert lo == hi == pytest.approx(np.sqrt(5.0))
    g = E.geodesic(p, q, 0.25)
    assert np.allclose(g, 0.75 * p + 0.25 * q)
    m = FiniteMeasure([p, q], [0.25, 0.75])
    assert np.allclose(E.barycenter(m), 0.25 * p + 0.75 * q)


# -------------------------------------------------------------- cone spaces


def test_cone_space_two_atom_barycenter_splits_by_weight():
    T = TangentCone(3, [[0], [1], [2]])
    C = ConeSpace(T)
    p = C.point({0: 1.0})
    q = C.point({1: 1.0})
    m = FiniteMeasure([p, q], [0.25, 0.75])
    b = C.barycenter(m)
    # the weighted mean of two atoms sits on their geodesic at the
    # complementary weight
    assert C.distance(p, b) == pytest.approx(0.75 * C.distance(p, q), abs=1e-12)
    assert C.distance(q, b) == pytest.approx(0.25 * C.distance(p, q), abs=1e-12)


def test_cone_space_spider_barycenter_is_exact():
    # separate legs: the mean minimizes sum w_i (t - s_i)^2 with every other
    # leg folded to the negative side; weights (0.6, 0.2, 0.2) at unit radii
    # put it at t = 0.2 on the heavy leg
    T = TangentCone(3, [[0], [1], [2]])
    C = ConeSpace(T)
    atoms = [C.point({0: 1.0}), C.point({1: 1.0}), C.point({2: 1.0})]
    m = FiniteMeasure(atoms, [0.6, 0.2, 0.2])
    b = C.barycenter(m)
    assert np.allclose(b.vec, [0.2, 0.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_cone_space_barycenter_beats_probes(seed):
    T = random_flag_cone(5, 0.5, seed=seed)
    C = ConeSpace(T)
    rng = np.random.default_rng(seed)
    m = sample_measure(C, rng, 4)
    b = C.barycenter(m, seed=seed)

    def cost(x):
        return sum(
            wi * C.distance(x, p) ** 2 for wi, p in zip(m.weights, m.points)
        )

    cb = cost(b)
    for p in m.points:
        assert cb <= cost(p) + 1e-9
    for _ in range(10):
        assert cb <= cost(C.sample_point(rng)) + 1e-9


# ------------------------------------------------------------- tree metrics


def test_tripod_distances_are_exact():
    S = tripod_space()
    e01 = S.X.cell_of_corners((0, 1))
    a = S.point(ComplexPoint(e01, (0.3,)))
    assert S.distance(S.point(1), S.point(2)) == pytest.approx(2.0, abs=1e-14)
    assert S.distance(a, S.point(1)) == pytest.approx(0.7, abs=1e-14)
    assert S.distance(a, S.point(2)) == pytest.approx(1.3, abs=1e-14)
    lo, hi = S.distance_bounds(a, S.point(2))
    assert lo == hi


@pytest.mark.parametrize("seed", range(5))
def test_random_tree_vertex_distances_match_bfs(seed):
    X = random_tree_complex(9, seed=seed)
    S = ComplexSpace(X)
    # independent oracle: breadth-first search on the skeleton
    import collections

    def bfs(src):
        dist = {src: 0}
        dq = collections.deque([src])
        while dq:
            u = dq.popleft()
            for v in X.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    dq.append(v)
        return dist

    for src in range(0, 9, 3):
        dist = bfs(src)
        for v in range(X.n_vertices):
            assert S.distance(S.point(src), S.point(v)) == pytest.approx(
                float(dist[v]), abs=1e-12
            )


def test_tree_geodesic_and_polyline():
    S = tripod_space()
    mid = S.geodesic(S.point(1), S.point(2), 0.5)
    assert mid.cell == ("v", 0)
    poly = S.geodesic_polyline(S.point(1), S.point(2))
    assert [p.cell for p in poly] == [("v", 1), ("v", 0), ("v", 2)]
    # path length telescopes
    legs = [S.distance(poly[i], poly[i + 1]) for i in range(len(poly) - 1)]
    assert sum(legs) == pytest.approx(S.distance(S.point(1), S.point(2)))


def test_tree_barycenter_balances_pull():
    S = tripod_space()
    atoms = [S.point(1), S.point(2), S.point(3)]
    b = S.barycenter(FiniteMeasure(atoms, [1 / 3] * 3))
    assert b.cell == ("v", 0)
    # heavier first leg drags the mean 0.2 into edge (0, 1): stationarity of
    # 0.6 (1-t)^2 + 0.4 (1+t)^2
    b2 = S.barycenter(FiniteMeasure(atoms, [0.6, 0.2, 0.2]))
    assert b2.cell == S.X.cell_of_corners((0, 1))
    assert b2.coords[0] == pytest.approx(0.2, abs=1e-12)


# --------------------------------------------------------------- 2d metrics


def test_l_shape_tip_distance():
    S, ids = l_shape()
    p = S.point(ids[(2, 1)])
    q = S.point(ids[(1, 2)])
    lo, hi = S.distance_bounds(p, q)
    # the geodesic bends around the reflex corner: length exactly 2
    assert hi == pytest.approx(2.0, abs=1e-12)
    assert lo <= hi
    assert S.distance(p, q) == pytest.approx(2.0, rel=0.01)
    mid = S.geodesic(p, q, 0.5)
    assert mid.cell == ("v", ids[(1, 1)])


def test_l_shape_same_square_is_euclidean():
    S, ids = l_shape()
    sq = S.X.maximal_cells()[0]
    a = S.point(ComplexPoint(sq, (0.2, 0.3)))
    b = S.point(ComplexPoint(sq, (0.9, 0.8)))
    lo, hi = S.distance_bounds(a, b)
    d = float(np.hypot(0.7, 0.5))
    assert lo == hi == pytest.approx(d, abs=1e-12)


def test_l_shape_polyline_passes_reflex_corner():
    S, ids = l_shape()
    p = S.point(ids[(2, 1)])
    q = S.point(ids[(1, 2)])
    poly = S.geodesic_polyline(p, q)
    assert poly[0] == p and poly[-1] == q
    assert ("v", ids[(1, 1)]) in [pt.cell for pt in poly]
    legs = [S._segment_length(poly[i], poly[i + 1]) for i in range(len(poly) - 1)]
    assert sum(legs) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_upper_bound_chain_is_monotone(seed):
    X = random_square_complex(6, seed=seed)
    S = ComplexSpace(X)
    rng = np.random.default_rng(seed)
    p = S.sample_point(rng)
    q = S.sample_point(rng)
    uppers = [S.distance_bounds(p, q, m=m)[1] for m in (4, 8, 16)]
    lowers = [S.distance_bounds(p, q, m=m)[0] for m in (4, 8, 16)]
    # doubling the resolution keeps every old node, so bounds cannot get worse
    assert uppers[0] >= uppers[1] - 1e-12 >= uppers[2] - 2e-12
    for lo, hi in zip(lowers, uppers):
        assert lo <= hi + 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_grid_barycenter_beats_probes(seed):
    X = grid_complex(2, 2)
    S = ComplexSpace(X)
    rng = np.random.default_rng(seed)
    m = sample_measure(S, rng, 3)
    b = S.barycenter(m)

    def cost(x):
        return sum(wi * S.distance(x, p) ** 2 for wi, p in zip(m.weights, m.points))

    cb = cost(b)
    for p in m.points:
        assert cb <= cost(p) + 1e-9
    for _ in range(8):
        assert cb <= cost(S.sample_point(rng)) + 1e-9


def test_common_cell_barycenter_is_weighted_mean():
    X = single_cube_complex(2)
    S = ComplexSpace(X)
    sq = X.maximal_cells()[0]
    pts = [S.point(ComplexPoint(sq, (0.1, 0.2))), S.point(ComplexPoint(sq, (0.9, 0.4))),
           S.point(ComplexPoint(sq, (0.5, 1.0)))]
    w = [0.5, 0.25, 0.25]
    b = S.barycenter(FiniteMeasure(pts, w))
    coords = np.array([X.embed_coords(p, sq) for p in pts])
    mean = np.asarray(w) @ coords
    assert np.allclose(X.embed_coords(b, sq), mean, atol=1e-12)


def test_approx_complex_distance_wrapper():
    S = tripod_space()
    lo, hi = approx_complex_distance(S.X, S.point(1), S.point(2))
    assert lo == hi == pytest.approx(2.0)


# ------------------------------------------------------------ serialization


def test_builtin_spaces():
    assert isinstance(builtin_space("builtin:segment"), ComplexSpace)
    tri = builtin_space("builtin:tripod")
    assert tri.X.n_vertices == 4
    E = builtin_space("euclidean:5")
    assert E.dim == 5
    with pytest.raises(ValueError):
        builtin_space("builtin:unknown")


def test_point_json_round_trip_complex():
    S, ids = l_shape()
    sq = S.X.maximal_cells()[1]
    p = S.point(ComplexPoint(sq, (0.25, 0.75)))
    blob = point_to_json(S, p)
    assert set(blob) == {"corners", "coords"}
    q = point_from_json(S, blob)
    assert S.distance(p, q) == pytest.approx(0.0, abs=1e-12)
    v = point_from_json(S, {"vertex": 3})
    assert v.cell == ("v", 3)


def test_point_json_round_trip_euclidean_and_cone():
    E = EuclideanSpace(2)
    p = E.point([0.5, -1.0])
    assert np.allclose(point_from_json(E, point_to_json(E, p)), p)
    C = ConeSpace(TangentCone(3, [[0, 1], [2]]))
    cp = C.point({0: 0.5, 1: 1.5})
    blob = point_to_json(C, cp)
    assert np.allclose(point_from_json(C, blob).vec, cp.vec)


def test_measure_from_json():
    S = tripod_space()
    obj = {
        "atoms": [
            {"point": {"vertex": 1}, "weight": 0.5},
            {"point": {"vertex": 2}, "weight": 0.5},
        ]
    }
    m = measure_from_json(S, obj)
    assert len(m) == 2
    assert np.allclose(m.weights, [0.5, 0.5])


def test_measure_from_json_rejects_bare_atoms():
    S = tripod_space()
    with pytest.raises(ValueError, match="'point' and 'weight'"):
        measure_from_json(S, {"atoms": [{"vertex": 0, "weight": 1.0}]})
    with pytest.raises(ValueError, match="atom 1"):
        measure_from_json(S, [{"point": {"vertex": 0}, "weight": 0.5}, [0.5]])


def test_point_from_json_unknown_cell():
    S = tripod_space()
    with pytest.raises(ValueError, match="no cell"):
        point_from_json(S, {"corners": [1, 2], "coords": [0.5]})


@pytest.mark.parametrize("seed", range(3))
def test_sample_measure_is_normalized(seed):
    S, _ = l_shape()
    rng = np.random.default_rng(seed)
    m = sample_measure(S, rng, 5)
    assert len(m) == 5
    assert np.isclose(m.weights.sum(), 1.0)
    assert all(S.point(p) is not None for p in m.points)
