"""Geodesic spaces: Euclidean factors, orthant cones, and cube complexes.

Every space exposes the same small interface:

- ``distance(p, q)`` and ``distance_bounds(p, q) -> (lower, upper)``
- ``geodesic(p, q, t)`` -- point at arc-length fraction t
- ``barycenter(measure)`` -- minimizer of the weighted squared-distance sum
- ``sample_point(rng)``

Distances on 1-dimensional complexes (metric trees) and inside shared cells
are exact; higher-dimensional complexes use a cached subdivision graph and
report certified lower/upper bounds.
"""

from __future__ import annotations

import numpy as np

from .complexes import ComplexPoint, CubeComplex, canonicalize_point
from .cones import ConePoint, TangentCone, geodesic_point, orthant_distance, sample_cone_point

__all__ = [
    "FiniteMeasure",
    "EuclideanSpace",
    "ConeSpace",
    "ComplexSpace",
    "approx_complex_distance",
    "builtin_space",
    "sample_measure",
    "point_to_json",
    "point_from_json",
    "measure_from_json",
]


class FiniteMeasure:
    """Finitely supported probability measure: points with positive weights."""

    def __init__(self, points, weights):
        self.points = list(points)
        w = np.asarray(weights, dtype=float)
        if len(self.points) == 0:
            raise ValueError("a measure needs at least one atom")
        if w.shape != (len(self.points),):
            raise ValueError("one weight per atom required")
        if (w <= 0).any():
            raise ValueError("weights must be positive")
        s = float(w.sum())
        if abs(s - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {s!r})")
        self.weights = w / s

    def __len__(self):
        return len(self.points)


def _as_measure(measure):
    if not isinstance(measure, FiniteMeasure):
        raise TypeError("expected a FiniteMeasure")
    return measure


# -- Euclidean ---------------------------------------------------------------


class EuclideanSpace:
    def __init__(self, dim):
        self.dim = int(dim)
        self.name = f"euclidean:{self.dim}"

    def point(self, data):
        v = np.asarray(data, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} coordinates")
        return v

    def distance(self, p, q):
        return float(np.linalg.norm(self.point(p) - self.point(q)))

    def distance_bounds(self, p, q):
        d = self.distance(p, q)
        return d, d

    def geodesic(self, p, q, t):
        p, q = self.point(p), self.point(q)
        return p + (q - p) * float(t)

    def barycenter(self, measure):
        m = _as_measure(measure)
        pts = np.array([self.point(p) for p in m.points])
        return m.weights @ pts

    def sample_point(self, rng, scale=1.0):
        return rng.normal(size=self.dim) * scale


# -- cones -------------------------------------------------------------------


class ConeSpace:
    def __init__(self, cone):
        if not isinstance(cone, TangentCone):
            raise TypeError("ConeSpace wraps a TangentCone")
        self.cone = cone
        self.name = f"cone:{cone.n_axes}axes:{len(cone.face_bits)}faces"

    def point(self, data):
        return self.cone.point(data)

    def distance(self, p, q):
        return orthant_distance(self.cone, p, q)

    def distance_bounds(self, p, q):
        d = self.distance(p, q)
        return d, d

    def geodesic(self, p, q, t):
        return geodesic_point(self.cone, p, q, t)

    def sample_point(self, rng, scale=1.0):
        return sample_cone_point(self.cone, rng, scale)

    def _is_spider(self):
        return all(bin(f).count("1") == 1 for f in self.cone.face_bits)

    def barycenter(self, measure, n_steps=4000, seed=0):
        m = _as_measure(measure)
        pts = [self.point(p) for p in m.points]
        if len(pts) == 1:
            return pts[0]
        if len(pts) == 2:
            return self.geodesic(pts[0], pts[1], float(m.weights[1]))
        union = 0
        for p in pts:
            union |= p.support
        if self.cone.is_admissible(union):
            # all atoms share a face: flat barycenter
            return ConePoint(m.weights @ np.array([p.vec for p in pts]))
        if self._is_spider():
            return self._spider_barycenter(m, pts)
        x = self._sturm_mean(m, pts, n_steps, seed)
        return self._polish(m, pts, x)

    def _spider_barycenter(self, m, pts):
        # every face is a single ray, so the cost along ray a is one quadratic:
        # sum_{same axis} w (t-s)^2 + sum_{other} w (t+s)^2
        axes = [int(np.argmax(p.vec)) if p.support else -1 for p in pts]
        radii = np.array([p.radius for p in pts])
        w = m.weights
        best_val, best_vec = None, None
        for f in self.cone.face_bits:
            a = f.bit_length() - 1
            same = np.array([ax == a for ax in axes])
            s_signed = np.where(same, radii, -radii)
            t = max(0.0, float((w * s_signed).sum()))
            val = float((w * (t - s_signed) ** 2).sum())
            if best_val is None or val < best_val - 1e-18:
                vec = np.zeros(self.cone.n_axes)
                vec[a] = t
                best_val, best_vec = val, vec
        return ConePoint(best_vec)

    def _sturm_mean(self, m, pts, n_steps, seed):
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(pts), size=n_steps, p=m.weights)
        x = pts[int(idx[0])]
        for k in range(1, n_steps):
            x = self.geodesic(x, pts[int(idx[k])], 1.0 / (k + 1))
        return x

    def _cost(self, m, pts, x):
        return float(sum(w * self.distance(x, p) ** 2 for w, p in zip(m.weights, pts)))

    def _polish(self, m, pts, x, iters=60):
        best = self._cost(m, pts, x)
        step = max(x.radius, max(p.radius for p in pts)) * 0.1
        while step > 1e-11 and iters > 0:
            iters -= 1
            grad = np.zeros(self.cone.n_axes)
            for w, p in zip(m.weights, pts):
                d, poly = orthant_distance(self.cone, x, p, with_path=True)
                if d == 0:
                    continue
                first = poly[1].vec - poly[0].vec
                n = np.linalg.norm(first)
                if n > 0:
                    grad -= 2 * w * d * first / n
            moved = False
            for f in self.cone.face_bits:
                mask = np.array([(f >> a) & 1 for a in range(self.cone.n_axes)], float)
                if (x.vec * (1 - mask)).any():
                    continue
                cand = np.maximum((x.vec - step * grad) * mask, 0.0)
                y = ConePoint(cand)
                c = self._cost(m, pts, y)
                if c < best - 1e-16:
                    x, best, moved = y, c, True
                    break
            if not moved:
                step *= 0.5
        return x


# -- cube complexes ----------------------------------------------------------


def _cell_grid_coords(dim, m):
    if dim == 0:
        return [()]
    grids = np.stack(
        np.meshgrid(*[np.arange(m + 1) / m] * dim, indexing="ij"), axis=-1
    ).reshape(-1, dim)
    return [tuple(row) for row in grids]


class _SubdivisionGraph:
    """Grid nodes on cells shared by several maximal cells (plus all
    vertices), complete edges inside each maximal cell."""

    def __init__(self, X, m):
        self.X = X
        self.m = int(m)
        maximal = X.maximal_cells()
        faces_of = {M: set(X.cell_faces(M)) | {M} for M in maximal}
        shared = set()
        for cell in X.all_cells():
            if X.cell_dim(cell) == 0:
                continue
            if sum(cell in fs for fs in faces_of.values()) >= 2:
                shared.add(cell)
        nodes = {}
        self.node_vecs = []

        def add(point):
            point = canonicalize_point(X, point)
            key = (point.cell, tuple(np.round(np.asarray(point.coords) * self.m * 4).astype(int)))
            if key in nodes:
                return nodes[key]
            i = len(self.node_vecs)
            nodes[key] = i
            self.node_vecs.append(point)
            return i

        for cell in sorted(shared):
            for coords in _cell_grid_coords(X.cell_dim(cell), self.m):
                add(ComplexPoint(cell, coords))
        for v in range(X.n_vertices):
            add(ComplexPoint.vertex(v))
        self.nodes = nodes

        # complete edge set inside each maximal cell; node pairs on a shared
        # subcell appear in several cells with identical lengths, and scipy
        # sums duplicate sparse entries, so each pair is added exactly once
        self.max_members = []
        rows, cols, vals = [], [], []
        seen = set()
        for M in maximal:
            members, coords = [], []
            for i, pt in enumerate(self.node_vecs):
                c = X.embed_coords(pt, M)
                if c is not None:
                    members.append(i)
                    coords.append(c)
            arr = np.asarray(coords, dtype=float)
            self.max_members.append((M, members, arr))
            if len(members) >= 2:
                dmat = np.sqrt(((arr[:, None, :] - arr[None, :, :]) ** 2).sum(-1))
                iu, ju = np.triu_indices(len(members), k=1)
                for a, b in zip(iu, ju):
                    pair = (members[a], members[b])
                    if pair in seen:
                        continue
                    seen.add(pair)
                    rows.append(pair[0])
                    cols.append(pair[1])
                    vals.append(dmat[a, b])
        self._rows = np.array(rows, dtype=np.int64)
        self._cols = np.array(cols, dtype=np.int64)
        self._vals = np.array(vals, dtype=float)

    def attach(self, X, points):
        """Distances among `points` through the graph: returns a matrix of
        shape (len(points), len(points))."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import dijkstra

        n = len(self.node_vecs)
        extra_rows, extra_cols, extra_vals = [], [], []
        for k, pt in enumerate(points):
            pid = n + k
            reached = {}
            for M, members, coords in self.max_members:
                c = X.embed_coords(pt, M)
                if c is None:
                    continue
                d = np.linalg.norm(coords - np.asarray(c)[None, :], axis=1)
                for i, di in zip(members, d):
                    if i not in reached or di < reached[i]:
                        reached[i] = float(di)
            extra_rows.extend([pid] * len(reached))
            extra_cols.extend(reached.keys())
            extra_vals.extend(reached.values())
            for k2 in range(k):
                shared = self._common_cell_distance(X, points[k2], pt)
                if shared is not None:
                    extra_rows.append(n + k2)
                    extra_cols.append(pid)
                    extra_vals.append(shared)
        N = n + len(points)
        g = coo_matrix(
            (
                np.concatenate([self._vals, extra_vals]) if extra_vals else self._vals,
                (
                    np.concatenate([self._rows, extra_rows]).astype(np.int64)
                    if extra_rows
                    else self._rows,
                    np.concatenate([self._cols, extra_cols]).astype(np.int64)
                    if extra_cols
                    else self._cols,
                ),
            ),
            shape=(N, N),
        )
        dist, pred = dijkstra(
            g, directed=False, indices=np.arange(n, N), return_predecessors=True
        )
        return dist[:, n:], dist, pred

    def _common_cell_distance(self, X, p, q):
        for M in X.maximal_cells():
            cp = X.embed_coords(p, M)
            cq = X.embed_coords(q, M)
            if cp is not None and cq is not None:
                return float(np.linalg.norm(np.asarray(cp) - np.asarray(cq)))
        return None


def _tree_vertex_distances(X):
    from .complexes import _bfs_distances

    return _bfs_distances(X.adjacency, X.n_vertices)


class ComplexSpace:
    """Geodesic metric on a validated cube complex with unit edge lengths.

    Trees (1-dimensional complexes) get exact distances and barycenters.
    Complexes with square or higher cells use a subdivision graph with `m`
    grid points per unit length; `distance` returns the graph upper bound and
    `distance_bounds` pairs it with a certified lower bound.
    """

    def __init__(self, X, m=16):
        if not isinstance(X, CubeComplex):
            raise TypeError("ComplexSpace wraps a validated CubeComplex")
        self.X = X
        self.m = int(m)
        self.dim = max(
            (X.cube_dim(i) for i in range(len(X.cubes))), default=1 if X.edges else 0
        )
        self.name = f"complex:{X.n_vertices}v:{len(X.edges)}e:{len(X.cubes)}c"
        self._graphs = {}
        self._tree_D = _tree_vertex_distances(X) if self.dim <= 1 else None

    def point(self, data):
        if isinstance(data, ComplexPoint):
            return canonicalize_point(self.X, data)
        if isinstance(data, int):
            return ComplexPoint.vertex(data)
        raise TypeError("complex points are ComplexPoint instances or vertex ids")

    def _graph(self, m=None):
        m = self.m if m is None else int(m)
        if m not in self._graphs:
            self._graphs[m] = _SubdivisionGraph(self.X, m)
        return self._graphs[m]

    # -- exact tree metric ---------------------------------------------------

    def _tree_point_sides(self, p):
        """[(vertex, offset)] decompositions of a 1-complex point."""
        if p.cell[0] == "v":
            return [(p.cell[1], 0.0)]
        u, v = self.X.edges[p.cell[1]]
        t = float(p.coords[0])
        return [(u, t), (v, 1.0 - t)]

    def _tree_distance(self, p, q):
        if p.cell == q.cell and p.cell[0] == "e":
            return abs(float(p.coords[0]) - float(q.coords[0]))
        D = self._tree_D
        return min(
            a + D[x, y] + b
            for x, a in self._tree_point_sides(p)
            for y, b in self._tree_point_sides(q)
        )

    # -- public metric ---------------------------------------------------------

    def distance(self, p, q):
        return self.distance_bounds(p, q)[1]

    def distance_bounds(self, p, q, m=None):
        p = self.point(p)
        q = self.point(q)
        if p == q:
            return 0.0, 0.0
        if self.dim <= 1:
            d = self._tree_distance(p, q)
            return d, d
        g = self._graph(m)
        exact = g._common_cell_distance(self.X, p, q)
        if exact is not None:
            return exact, exact
        mat, _, _ = g.attach(self.X, [p, q])
        upper = float(mat[0, 1])
        lower = self._wall_lower_bound(p, q)
        return min(lower, upper), upper

    def _wall_lower_bound(self, p, q):
        from .embedding import wall_coordinates

        wp = wall_coordinates(self.X, p)
        wq = wall_coordinates(self.X, q)
        return float(np.linalg.norm(wp - wq))

    def geodesic(self, p, q, t):
        p = self.point(p)
        q = self.point(q)
        t = float(t)
        if not 0 <= t <= 1:
            raise ValueError("arc-length fraction must lie in [0, 1]")
        poly = self.geodesic_polyline(p, q)
        total = sum(
            self._segment_length(a, b) for a, b in zip(poly, poly[1:])
        )
        if total == 0:
            return p
        target = t * total
        acc = 0.0
        for a, b in zip(poly, poly[1:]):
            seg = self._segment_length(a, b)
            if seg == 0:
                continue
            if acc + seg >= target - 1e-15:
                return self._segment_point(a, b, (target - acc) / seg)
            acc += seg
        return q

    def _segment_length(self, a, b):
        for M in self.X.maximal_cells():
            ca = self.X.embed_coords(a, M)
            cb = self.X.embed_coords(b, M)
            if ca is not None and cb is not None:
                return float(np.linalg.norm(np.asarray(ca) - np.asarray(cb)))
        raise ValueError("polyline segment does not lie in one cell")

    def _segment_point(self, a, b, t):
        for M in self.X.maximal_cells():
            ca = self.X.embed_coords(a, M)
            cb = self.X.embed_coords(b, M)
            if ca is not None and cb is not None:
                coords = np.asarray(ca) * (1 - t) + np.asarray(cb) * t
                return canonicalize_point(self.X, ComplexPoint(M, tuple(coords)))
        raise ValueError("polyline segment does not lie in one cell")

    def geodesic_polyline(self, p, q):
        p = self.point(p)
        q = self.point(q)
        if p == q:
            return [p]
        if self.dim <= 1:
            return self._tree_polyline(p, q)
        g = self._graph()
        if g._common_cell_distance(self.X, p, q) is not None:
            return [p, q]
        _, dist, pred = g.attach(self.X, [p, q])
        n = len(g.node_vecs)
        path = [n + 1]
        while path[-1] != n and path[-1] >= 0:
            path.append(pred[0, path[-1]])
        path.reverse()
        out = []
        for i in path:
            pt = p if i == n else (q if i == n + 1 else g.node_vecs[i])
            if not out or pt != out[-1]:
                out.append(pt)
        return out

    def _tree_polyline(self, p, q):
        if p.cell == q.cell and p.cell[0] == "e":
            return [p, q]
        best = None
        D = self._tree_D
        for x, a in self._tree_point_sides(p):
            for y, b in self._tree_point_sides(q):
                d = a + D[x, y] + b
                if best is None or d < best[0]:
                    best = (d, x, y)
        _, x, y = best
        verts = self._tree_vertex_path(x, y)
        pts = [p] + [ComplexPoint.vertex(v) for v in verts] + [q]
        out = []
        for pt in pts:
            pt = canonicalize_point(self.X, pt)
            if not out or pt != out[-1]:
                out.append(pt)
        return out

    def _tree_vertex_path(self, x, y):
        D = self._tree_D
        path = [x]
        while path[-1] != y:
            u = path[-1]
            nxt = min(self.X.adjacency[u], key=lambda w: D[w, y])
            path.append(nxt)
        return path

    # -- barycenter --------------------------------------------------------------

    def barycenter(self, measure):
        m = _as_measure(measure)
        pts = [self.point(p) for p in m.points]
        if len(pts) == 1:
            return pts[0]
        if len(pts) == 2:
            return self.geodesic(pts[0], pts[1], float(m.weights[1]))
        if self.dim <= 1:
            return self._tree_barycenter(m, pts)
        M = self._common_maximal_cell(pts)
        if M is not None:
            coords = np.array([self.X.embed_coords(p, M) for p in pts], dtype=float)
            mean = m.weights @ coords
            return canonicalize_point(self.X, ComplexPoint(M, tuple(mean)))
        return self._grid_barycenter(m, pts)

    def _common_maximal_cell(self, pts):
        for M in self.X.maximal_cells():
            if all(self.X.embed_coords(p, M) is not None for p in pts):
                return M
        return None

    def _tree_barycenter(self, m, pts):
        X = self.X
        D = self._tree_D
        w = m.weights
        # distance from each endpoint vertex of an edge to each atom
        atom_sides = [self._tree_point_sides(p) for p in pts]

        def vert_dist(v, k):
            return min(off + D[v, x] for x, off in atom_sides[k])

        best = None
        for ei, (u, v) in enumerate(X.edges):
            cuts = {0.0, 1.0}
            lin = []  # (sign, const): distance contribution |sign*t + const| linearized
            for k, p in enumerate(pts):
                if p.cell == ("e", ei):
                    s = float(p.coords[0])
                    lin.append(("same", s, k))
                    cuts.add(s)
                else:
                    A = vert_dist(u, k)
                    B = vert_dist(v, k)
                    tstar = (1.0 + B - A) / 2.0
                    lin.append(("far", (A, B), k))
                    if 0 < tstar < 1:
                        cuts.add(tstar)
            cutlist = sorted(cuts)
            for lo, hi in zip(cutlist, cutlist[1:]):
                mid = (lo + hi) / 2
                # on (lo, hi) each distance is c + sign*t with sign in {+1,-1}
                signs = np.empty(len(pts))
                consts = np.empty(len(pts))
                for j, item in enumerate(lin):
                    if item[0] == "same":
                        s = item[1]
                        signs[j], consts[j] = (1.0, -s) if mid >= s else (-1.0, s)
                    else:
                        A, B = item[1]
                        if mid + A <= (1 - mid) + B:
                            signs[j], consts[j] = 1.0, A
                        else:
                            signs[j], consts[j] = -1.0, 1.0 + B
                # F(t) = sum w (signs t + consts)^2 ; argmin at -sum(w s c)/sum(w s^2)
                t = float(np.clip(-(w * signs * consts).sum() / (w * signs**2).sum(), lo, hi))
                val = float((w * (signs * t + consts) ** 2).sum())
                if best is None or val < best[0] - 1e-18:
                    best = (val, ei, t)
        _, ei, t = best
        return canonicalize_point(self.X, ComplexPoint(("e", ei), (t,)))

    def _grid_barycenter(self, m, pts):
        g = self._graph()
        _, dist, _ = g.attach(self.X, pts)
        n = len(g.node_vecs)
        # dist rows are the atoms (indices n..), columns all nodes
        D = dist[:, :n]
        F = m.weights @ (D**2)
        best = int(np.argmin(F))
        return g.node_vecs[best]

    def sample_point(self, rng, scale=None):
        cells = self.X.all_cells()
        cell = cells[int(rng.integers(0, len(cells)))]
        d = self.X.cell_dim(cell)
        coords = tuple(rng.random(d)) if d else ()
        return canonicalize_point(self.X, ComplexPoint(cell, coords))


def approx_complex_distance(X_or_space, p, q, m=16):
    """(lower, upper) bounds on the complex distance at grid resolution m."""
    space = X_or_space if isinstance(X_or_space, ComplexSpace) else ComplexSpace(X_or_space, m)
    return space.distance_bounds(p, q, m=m)


# -- registry / serialization -------------------------------------------------


def builtin_space(name):
    from .complexes import single_cube_complex, tree_complex

    if name == "builtin:segment":
        return ComplexSpace(single_cube_complex(1))
    if name == "builtin:tripod":
        return ComplexSpace(tree_complex([(0, 1), (0, 2), (0, 3)], 4))
    if name.startswith("euclidean:"):
        return EuclideanSpace(int(name.split(":", 1)[1]))
    raise ValueError(f"unknown builtin space {name!r}")


def point_to_json(space, p):
    if isinstance(space, EuclideanSpace):
        return [float(x) for x in space.point(p)]
    if isinstance(space, ConeSpace):
        return {"coords": space.point(p).as_dict()}
    if isinstance(space, ComplexSpace):
        p = space.point(p)
        corners = space.X.cell_corners(p.cell)
        return {"corners": list(corners), "coords": [float(c) for c in p.coords]}
    raise TypeError(f"unsupported space {space!r}")


def point_from_json(space, obj):
    if isinstance(space, EuclideanSpace):
        return space.point(obj)
    if isinstance(space, ConeSpace):
        if isinstance(obj, dict) and "coords" in obj:
            data = obj["coords"]
            if isinstance(data, dict):
                data = {int(k): float(v) for k, v in data.items()}
            return space.point(data)
        return space.point(obj)
    if isinstance(space, ComplexSpace):
        if isinstance(obj, int):
            return space.point(obj)
        if "vertex" in obj:
            return space.point(int(obj["vertex"]))
        corners = tuple(int(v) for v in obj["corners"])
        cell = space.X.cell_of_corners(corners)
        if cell is None:
            raise ValueError(f"no cell with corners {corners}")
        from .complexes import _remap_coords

        coords = _remap_coords(corners, tuple(float(c) for c in obj["coords"]),
                               space.X.cell_corners(cell))
        return space.point(ComplexPoint(cell, coords))
    raise TypeError(f"unsupported space {space!r}")


def measure_from_json(space, obj):
    atoms = obj["atoms"] if isinstance(obj, dict) else obj
    for i, a in enumerate(atoms):
        if not isinstance(a, dict) or "point" not in a or "weight" not in a:
            raise ValueError(
                f"measure atom {i} must be an object with 'point' and 'weight' keys"
            )
    points = [point_from_json(space, a["point"]) for a in atoms]
    weights = [float(a["weight"]) for a in atoms]
    return FiniteMeasure(points, weights)


def sample_measure(space, rng, n_atoms, scale=1.0):
    pts = [space.sample_point(rng) for _ in range(n_atoms)]
    w = rng.random(n_atoms) + 0.1
    return FiniteMeasure(pts, w / w.sum())
