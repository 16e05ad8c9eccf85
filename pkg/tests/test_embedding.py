import numpy as np
import pytest

from cubecat.complexes import (
    ComplexPoint,
    grid_complex,
    random_square_complex,
    single_cube_complex,
    tree_complex,
)
from cubecat.cones import orthant_distance, random_flag_cone, sample_cone_point
from cubecat.embedding import (
    axis_embedding,
    delta_bound_via_distortion,
    distortion_report,
    tangent_cone_at,
    wall_classes,
    wall_coordinates,
)
from cubecat.spaces import ComplexSpace

SQRT2 = np.sqrt(2.0)


# ------------------------------------------------------------- tangent cones


def test_vertex_cone_at_grid_center():
    X = grid_complex(2, 2)
    center = next(v for v in range(X.n_vertices) if len(X.adjacency[v]) == 4)
    T = tangent_cone_at(X, ComplexPoint.vertex(center))
    assert T.rank == 0
    assert T.n_axes == 4
    assert len(T.maximal_faces()) == 4
    assert all(len(f) == 2 for f in T.maximal_faces())
    assert all(lbl[0] == "edge" for lbl in T.axis_labels)


def test_vertex_cone_at_tree_branch():
    X = tree_complex([(0, 1), (0, 2), (0, 3)], 4)
    T = tangent_cone_at(X, ComplexPoint.vertex(0))
    assert T.n_axes == 3
    assert sorted(sorted(f) for f in T.maximal_faces()) == [[0], [1], [2]]


def test_square_interior_cone_has_sign_axes():
    X = single_cube_complex(2)
    sq = X.maximal_cells()[0]
    T = tangent_cone_at(X, ComplexPoint(sq, (0.4, 0.7)))
    assert T.rank == 2
    assert T.n_axes == 4
    assert len(T.maximal_faces()) == 4  # one per sign choice
    labels = set(T.axis_labels)
    assert labels == {("flat", 0, 1), ("flat", 0, -1), ("flat", 1, 1), ("flat", 1, -1)}


def test_square_interior_cone_is_flat_plane():
    # the sign-axis model must reproduce plane geometry around the point
    X = single_cube_complex(2)
    sq = X.maximal_cells()[0]
    T = tangent_cone_at(X, ComplexPoint(sq, (0.4, 0.7)))
    idx = {lbl: i for i, lbl in enumerate(T.axis_labels)}
    d = orthant_distance(
        T,
        T.point({idx[("flat", 0, 1)]: 1.0}),
        T.point({idx[("flat", 0, -1)]: 1.0}),
    )
    assert d == pytest.approx(2.0, abs=1e-12)
    a = T.point({idx[("flat", 0, 1)]: 1.0, idx[("flat", 1, 1)]: 2.0})
    b = T.point({idx[("flat", 0, -1)]: 1.0, idx[("flat", 1, 1)]: 1.0})
    # plane coordinates (1, 2) vs (-1, 1)
    assert orthant_distance(T, a, b) == pytest.approx(np.sqrt(5.0), abs=1e-12)


def test_edge_interior_cone_on_shared_edge():
    X = grid_complex(2, 2)
    shared = next(
        c for c in X.all_cells()
        if X.cell_dim(c) == 1 and len(X.cells_containing(c)) == 3
    )
    T = tangent_cone_at(X, ComplexPoint(shared, (0.5,)))
    assert T.rank == 1
    assert T.n_axes == 4  # two signs + two squares over the edge
    kinds = [lbl[0] for lbl in T.axis_labels]
    assert kinds.count("flat") == 2 and kinds.count("cell") == 2
    # each face pairs one sign with one square
    assert sorted(sorted(f) for f in T.maximal_faces()) == [
        [0, 2], [0, 3], [1, 2], [1, 3]
    ]


def test_edge_interior_cone_on_tree_is_a_line():
    X = tree_complex([(0, 1), (0, 2), (0, 3)], 4)
    e = X.cell_of_corners((0, 1))
    T = tangent_cone_at(X, ComplexPoint(e, (0.4,)))
    assert T.rank == 1
    assert T.n_axes == 2
    d = orthant_distance(T, T.point({0: 0.7}), T.point({1: 0.3}))
    assert d == pytest.approx(1.0, abs=1e-14)


# ------------------------------------------------------------ axis embedding


def test_axis_embedding_shape_and_bound():
    T = random_flag_cone(5, 0.5, seed=1)
    emb = axis_embedding(T)
    assert emb.dim == T.n_axes
    assert emb.distortion_bound == pytest.approx(SQRT2)
    rng = np.random.default_rng(0)
    p = sample_cone_point(T, rng)
    assert np.allclose(emb(p), p.vec)


@pytest.mark.parametrize("seed", range(6))
def test_embedding_sandwich_per_pair(seed):
    T = random_flag_cone(6, 0.4, seed=seed)
    emb = axis_embedding(T)
    rng = np.random.default_rng(seed)
    for _ in range(12):
        x = sample_cone_point(T, rng)
        y = sample_cone_point(T, rng)
        d = orthant_distance(T, x, y)
        e = float(np.linalg.norm(emb(x) - emb(y)))
        assert e <= d + 1e-10
        assert d <= SQRT2 * e + 1e-10


def test_distortion_report_clean_on_mixed_cones():
    cones = [random_flag_cone(5, 0.5, seed=s) for s in range(6)]
    X = grid_complex(2, 2)
    cones.append(tangent_cone_at(X, ComplexPoint.vertex(4)))
    sq = X.maximal_cells()[0]
    cones.append(tangent_cone_at(X, ComplexPoint(sq, (0.3, 0.6))))
    rep = distortion_report(cones, n_pairs=40, seed=3)
    assert rep.ok
    assert rep.n_pairs == 40 * len(cones)
    assert rep.lipschitz_violations == []
    assert rep.ratio_violations == []
    assert 1.0 - 1e-9 <= rep.max_ratio <= SQRT2 + 1e-9
    assert rep.min_ratio >= 1.0 - 1e-9


def test_distortion_report_flags_planted_violation():
    # an impossible ratio bound must be reported as violated
    cones = [random_flag_cone(4, 0.3, seed=0)]
    rep = distortion_report(cones, n_pairs=60, seed=0, ratio_bound=1.0 + 1e-12)
    assert not rep.ok
    assert rep.ratio_violations


def test_delta_bound_via_distortion_values():
    assert delta_bound_via_distortion(1.0) == 0.0
    assert delta_bound_via_distortion(SQRT2) == pytest.approx(0.5, abs=1e-15)
    assert delta_bound_via_distortion(2.0) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        delta_bound_via_distortion(0.9)


# ------------------------------------------------------------------- walls


def test_wall_count_on_cubes():
    for k in (1, 2, 3):
        X = single_cube_complex(k)
        labels, sides = wall_classes(X)
        assert len(set(labels)) == k
        assert sides.shape == (k, 2 ** k)
        # each wall splits the cube corners in half
        assert all(int(s.sum()) == 2 ** (k - 1) for s in sides)


def test_wall_count_on_tree():
    X = tree_complex([(0, 1), (0, 2), (0, 3)], 4)
    labels, sides = wall_classes(X)
    assert len(set(labels)) == 3  # every edge is its own wall
    for w in range(3):
        assert set(np.unique(sides[w])) == {0, 1}


def test_grid_walls_separate():
    X = grid_complex(2, 2)
    labels, sides = wall_classes(X)
    assert len(labels) == len(X.edges)
    assert len(set(labels)) == 4
    for w in range(4):
        cut = [i for i, lw in enumerate(labels) if lw == w]
        assert len(cut) == 3  # three parallel edges per wall in a 2x2 grid
        for i in cut:
            u, v = X.edges[i]
            assert sides[w, u] != sides[w, v]


def test_wall_coordinates_exact_on_single_cube():
    X = single_cube_complex(3)
    S = ComplexSpace(X)
    cube = X.maximal_cells()[0]
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = ComplexPoint(cube, tuple(rng.random(3)))
        b = ComplexPoint(cube, tuple(rng.random(3)))
        wa, wb = wall_coordinates(X, a), wall_coordinates(X, b)
        d = S.distance(a, b)
        assert float(np.linalg.norm(wa - wb)) == pytest.approx(d, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_wall_coordinates_are_lipschitz(seed):
    X = random_square_complex(6, seed=seed)
    S = ComplexSpace(X)
    rng = np.random.default_rng(seed + 50)
    for _ in range(8):
        p = S.sample_point(rng)
        q = S.sample_point(rng)
        wall_gap = float(np.linalg.norm(wall_coordinates(X, p) - wall_coordinates(X, q)))
        upper = S.distance_bounds(p, q)[1]
        assert wall_gap <= upper + 1e-9
