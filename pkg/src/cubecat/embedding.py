"""Tangent cones of cube complexes and low-distortion coordinate embeddings.

The tangent cone at a point whose carrier cell has dimension k is an orthant
space with 2k "sign" axes (one opposite pair per carrier axis, gluing to a
flat R^k factor) together with one "link" axis per (k+1)-cell containing the
carrier; admissible faces follow the cells around the carrier.

`axis_embedding` sends a cone point to its coordinate vector.  The map is
1-Lipschitz and contracts no distance below 1/sqrt(2) of the original, so its
distortion is at most sqrt(2); `distortion_report` samples point pairs and
verifies both inequalities empirically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .complexes import canonicalize_point, star_faces
from .cones import TangentCone, sample_cone_point

__all__ = [
    "tangent_cone_at",
    "axis_embedding",
    "wall_classes",
    "wall_coordinates",
    "EmbeddingMap",
    "DistortionReport",
    "distortion_report",
    "delta_bound_via_distortion",
]


# -- tangent cones -------------------------------------------------------------


def tangent_cone_at(X, point):
    """Tangent orthant cone of the complex at a canonical point.

    At a vertex the axes are the incident edge directions.  At an interior
    point of a k-cell the cone gains k opposite sign-axis pairs (the flat
    directions along the carrier); its `rank` attribute records k.
    """
    point = canonicalize_point(X, point)
    cell = point.cell
    if cell[0] == "v":
        v = cell[1]
        axes, faces = star_faces(X, v)
        idx = {a: i for i, a in enumerate(axes)}
        cone = TangentCone(len(axes), [[idx[a] for a in f] for f in faces])
        cone.rank = 0
        cone.axis_labels = tuple(("edge", (min(v, a), max(v, a))) for a in axes)
        return cone

    k = X.cell_dim(cell)
    over = [c for c in X.cells_containing(cell) if c != cell]
    link = sorted(c for c in over if X.cell_dim(c) == k + 1)
    link_idx = {c: 2 * k + i for i, c in enumerate(link)}
    labels = []
    for j in range(k):
        labels.append(("flat", j, +1))
        labels.append(("flat", j, -1))
    labels.extend(("cell", c) for c in link)

    maximal_over = [
        c for c in ([cell] + over) if not any(c != d and c in set(X.cell_faces(d)) for d in over)
    ]
    faces = []
    for M in maximal_over:
        sub = set(X.cell_faces(M)) | {M}
        members = [link_idx[c] for c in link if c in sub]
        for signs in range(1 << k):
            face = [2 * j + ((signs >> j) & 1) for j in range(k)] + members
            faces.append(face)
    cone = TangentCone(2 * k + len(link), faces)
    cone.rank = k
    cone.axis_labels = tuple(labels)
    return cone


# -- coordinate embedding -------------------------------------------------------


@dataclass
class EmbeddingMap:
    """Coordinate embedding of an orthant cone into Euclidean space."""

    cone: TangentCone
    dim: int
    distortion_bound: float = np.sqrt(2.0)

    def __call__(self, p):
        return np.array(self.cone.point(p).vec, dtype=float)


def axis_embedding(T):
    """The coordinate-vector embedding of an orthant cone.

    Distances never grow, and they shrink by at most a factor of sqrt(2):
    the flat coordinate metric sits inside the cone metric's sandwich
    d_flat <= d <= sqrt(2) d_flat.
    """
    return EmbeddingMap(cone=T, dim=T.n_axes)


@dataclass
class DistortionReport:
    n_pairs: int
    max_ratio: float
    min_ratio: float
    lipschitz_violations: list = field(default_factory=list)
    ratio_violations: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def ok(self):
        return not self.lipschitz_violations and not self.ratio_violations


def distortion_report(cones, n_pairs, seed=0, ratio_bound=None, tol=1e-9):
    """Sample point pairs on each cone and measure embedding distortion.

    Flags a pair when the embedded distance exceeds the cone distance
    (Lipschitz failure) or the cone distance exceeds `ratio_bound` (default
    sqrt(2)) times the embedded distance.
    """
    from .cones import orthant_distance

    if isinstance(cones, TangentCone):
        cones = [cones]
    if ratio_bound is None:
        ratio_bound = float(np.sqrt(2.0))
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    max_ratio, min_ratio = 0.0, np.inf
    lip, ratio_bad = [], []
    total = 0
    for ci, T in enumerate(cones):
        emb = axis_embedding(T)
        for _ in range(n_pairs):
            x = sample_cone_point(T, rng)
            y = sample_cone_point(T, rng)
            d = orthant_distance(T, x, y)
            e = float(np.linalg.norm(emb(x) - emb(y)))
            total += 1
            if e > d + tol * max(1.0, d):
                lip.append((ci, x, y, d, e))
            if e > 0:
                r = d / e
                max_ratio = max(max_ratio, r)
                min_ratio = min(min_ratio, r)
                if r > ratio_bound + tol:
                    ratio_bad.append((ci, x, y, d, e))
            elif d > tol:
                lip.append((ci, x, y, d, e))
    return DistortionReport(
        n_pairs=total,
        max_ratio=max_ratio,
        min_ratio=min_ratio if total else 0.0,
        lipschitz_violations=lip,
        ratio_violations=ratio_bad,
        elapsed=time.perf_counter() - t0,
    )


def delta_bound_via_distortion(D):
    """Upper bound 1 - 1/D^2 on the spreading invariant of a space admitting
    a D-distortion embedding into Hilbert space."""
    D = float(D)
    if D < 1.0:
        raise ValueError("a metric embedding cannot have distortion below 1")
    return 1.0 - 1.0 / (D * D)


# -- wall coordinates on complexes ---------------------------------------------


def wall_classes(X):
    """Partition of the edge set into parallelism classes (walls): the
    transitive closure of being opposite edges of a square.  Returns
    (labels, sides): labels[e] = wall id; sides[w][v] in {0, 1} tells which
    half of the skeleton vertex v lies in after removing wall w's edges."""
    cache = getattr(X, "_wall_cache", None)
    if cache is not None:
        return cache

    parent = list(range(len(X.edges)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    def eidx(a, b):
        return X.edge_index[(a, b) if a < b else (b, a)]

    for ci in range(len(X.cubes)):
        corners = X.cubes[ci]
        k = len(corners).bit_length() - 1
        for j in range(k):
            step = 1 << j
            # all edges of the cube along axis j are parallel
            base_edges = [
                eidx(corners[b], corners[b | step]) for b in range(len(corners)) if not b & step
            ]
            for e in base_edges[1:]:
                union(base_edges[0], e)

    labels = [find(i) for i in range(len(X.edges))]
    wall_ids = sorted(set(labels))
    remap = {w: i for i, w in enumerate(wall_ids)}
    labels = [remap[w] for w in labels]

    n_walls = len(wall_ids)
    sides = np.zeros((n_walls, X.n_vertices), dtype=np.uint8)
    for w in range(n_walls):
        cut = {i for i, lw in enumerate(labels) if lw == w}
        cut_pairs = {X.edges[i] for i in cut}
        root = min(min(e) for e in cut_pairs)
        seen = np.zeros(X.n_vertices, dtype=bool)
        seen[root] = True
        stack = [root]
        while stack:
            u = stack.pop()
            for v in X.adjacency[u]:
                pair = (u, v) if u < v else (v, u)
                if pair in cut_pairs or seen[v]:
                    continue
                seen[v] = True
                stack.append(v)
        for (a, b) in cut_pairs:
            if seen[a] == seen[b]:
                raise ValueError("wall does not separate the skeleton")
        sides[w] = (~seen).astype(np.uint8)
    X._wall_cache = (labels, sides)
    return X._wall_cache


def wall_coordinates(X, point):
    """1-Lipschitz map into R^(number of walls): each coordinate measures the
    crossing progress of one wall.  Euclidean distance between images is a
    certified lower bound for the complex distance."""
    labels, sides = wall_classes(X)
    point = canonicalize_point(X, point)
    corners = X.cell_corners(point.cell)
    k = len(corners).bit_length() - 1
    coords = np.asarray(point.coords, dtype=float)
    out = sides[:, corners[0]].astype(float)
    for j in range(k):
        u0, u1 = corners[0], corners[1 << j]
        e = X.edge_index[(u0, u1) if u0 < u1 else (u1, u0)]
        w = labels[e]
        a, b = float(sides[w, u0]), float(sides[w, u1])
        out[w] = a + (b - a) * coords[j]
    return out
