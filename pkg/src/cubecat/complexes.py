"""Finite cube complexes with median-graph skeleta.

A complex is stored combinatorially: a vertex count, an edge set, and a list of
cubes, each cube a tuple of 2^k corner ids in binary-corner order (bit i of the
corner index is the coordinate along axis i).  Points carry their minimal
carrier cell plus coordinates in that cell's frame.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CubeComplex",
    "ComplexPoint",
    "Violation",
    "validate_complex",
    "star_faces",
    "canonicalize_point",
    "load_complex",
    "save_complex",
    "parse_complex",
    "single_cube_complex",
    "grid_complex",
    "tree_complex",
    "random_tree_complex",
    "random_square_complex",
]


@dataclass(frozen=True)
class Violation:
    kind: str
    cells: tuple
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


class ComplexValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _canonical_cube(corners):
    """Relabel a binary-ordered corner tuple so corner 0 is the smallest vertex
    id and axes are sorted by the id of the corner-0 neighbor.  XOR translation
    and axis permutation both preserve binary-corner order."""
    corners = tuple(corners)
    n = len(corners)
    k = n.bit_length() - 1
    base = min(range(n), key=lambda b: corners[b])
    shifted = tuple(corners[b ^ base] for b in range(n))
    order = sorted(range(k), key=lambda i: shifted[1 << i])
    out = []
    for b in range(n):
        src = 0
        for new_i, old_i in enumerate(order):
            if (b >> new_i) & 1:
                src |= 1 << old_i
        out.append(shifted[src])
    return tuple(out)


def _cube_edges(corners):
    n = len(corners)
    k = n.bit_length() - 1
    seen = set()
    for b in range(n):
        for i in range(k):
            if not (b >> i) & 1:
                seen.add(tuple(sorted((corners[b], corners[b | (1 << i)]))))
    return seen


def _cube_facets(corners):
    """The 2k faces of codimension one, each in binary-corner order."""
    n = len(corners)
    k = n.bit_length() - 1
    out = []
    for i in range(k):
        for eps in (0, 1):
            out.append(tuple(corners[b] for b in range(n) if (b >> i) & 1 == eps))
    return out


class CubeComplex:
    """Immutable cube complex.  Construct via parse_complex/validate_complex or
    the generators; the constructor assumes structurally sane input."""

    def __init__(self, n_vertices, edges, cubes):
        self.n_vertices = int(n_vertices)
        self.edges = tuple(sorted(tuple(sorted(e)) for e in edges))
        self.edge_index = {e: i for i, e in enumerate(self.edges)}
        cubes = [_canonical_cube(c) for c in cubes]
        cubes.sort(key=lambda c: (len(c), c))
        self.cubes = tuple(cubes)
        self.cube_index = {frozenset(c): i for i, c in enumerate(self.cubes)}
        self._corner_pos = [{v: b for b, v in enumerate(c)} for c in self.cubes]
        self.adjacency = [[] for _ in range(self.n_vertices)]
        for (u, v) in self.edges:
            self.adjacency[u].append(v)
            self.adjacency[v].append(u)
        for nbrs in self.adjacency:
            nbrs.sort()
        # cells of dim >= 2 containing each vertex
        self._vertex_cubes = [[] for _ in range(self.n_vertices)]
        for ci, c in enumerate(self.cubes):
            for v in c:
                self._vertex_cubes[v].append(ci)

    # -- basic cell helpers -------------------------------------------------

    def cube_dim(self, ci):
        return len(self.cubes[ci]).bit_length() - 1

    def cell_corners(self, cell):
        kind, idx = cell
        if kind == "v":
            return (idx,)
        if kind == "e":
            return self.edges[idx]
        return self.cubes[idx]

    def cell_dim(self, cell):
        return len(self.cell_corners(cell)).bit_length() - 1

    def cell_of_corners(self, corners):
        """Cell reference for a corner tuple (any valid binary order), or
        None when no such cell exists."""
        if len(corners) == 1:
            v = corners[0]
            return ("v", v) if 0 <= v < self.n_vertices else None
        if len(corners) == 2:
            e = self.edge_index.get(tuple(sorted(corners)))
            return None if e is None else ("e", e)
        c = self.cube_index.get(frozenset(corners))
        return None if c is None else ("c", c)

    def all_cells(self):
        out = [("v", v) for v in range(self.n_vertices)]
        out += [("e", i) for i in range(len(self.edges))]
        out += [("c", i) for i in range(len(self.cubes))]
        return out

    def cell_faces(self, cell):
        """Proper faces of a cell, all dimensions, as cell references."""
        corners = self.cell_corners(cell)
        out = set()
        stack = [tuple(corners)]
        while stack:
            cur = stack.pop()
            if len(cur) == 1:
                continue
            for f in _cube_facets(cur):
                ref = self.cell_of_corners(f)
                if ref not in out:
                    out.add(ref)
                    stack.append(f)
        return out

    def maximal_cells(self):
        """Cells not properly contained in another cell."""
        face_of_something = set()
        for ci in range(len(self.cubes)):
            face_of_something |= self.cell_faces(("c", ci))
        out = []
        for cell in self.all_cells():
            if cell not in face_of_something:
                out.append(cell)
        return out

    def cells_containing(self, cell):
        """All cells having `cell` as a face (including itself)."""
        corners = set(self.cell_corners(cell))
        me = self.cell_of_corners(tuple(corners))
        out = [me]
        if len(corners) == 1:
            (v,) = corners
            for u in self.adjacency[v]:
                out.append(("e", self.edge_index[tuple(sorted((u, v)))]))
            out += [("c", ci) for ci in self._vertex_cubes[v]]
            return out
        anchor = next(iter(corners))
        for ci in self._vertex_cubes[anchor]:
            if corners <= set(self.cubes[ci]) and ("c", ci) != me:
                if self.cell_of_corners(tuple(corners)) in self.cell_faces(("c", ci)):
                    out.append(("c", ci))
        return out

    def frame_into(self, cell, big):
        """Embedding of `cell`'s coordinate frame into `big`'s.

        Returns (axis_map, flips, base_bits): coordinate j of the cell maps to
        axis axis_map[j] of `big`, negated when flips[j]; the fixed coordinates
        of `big` are the bits of base_bits.
        """
        small = self.cell_corners(cell)
        big_corners = self.cell_corners(big)
        pos = {v: b for b, v in enumerate(big_corners)}
        base = pos[small[0]]
        kd = len(small).bit_length() - 1
        axis_map, flips = [], []
        for j in range(kd):
            delta = pos[small[1 << j]] ^ base
            a = delta.bit_length() - 1
            if delta != (1 << a):
                raise ValueError("cell is not an axis-aligned face of the carrier")
            axis_map.append(a)
            flips.append(bool((base >> a) & 1))
        return axis_map, flips, base

    def embed_coords(self, point, big):
        """Coordinates of `point` in the frame of cell `big`, or None when
        `big` does not contain the point's carrier cell."""
        try:
            axis_map, flips, base = self.frame_into(point.cell, big)
        except (KeyError, ValueError):
            return None
        K = self.cell_dim(big)
        out = np.array([(base >> a) & 1 for a in range(K)], dtype=float)
        for j, a in enumerate(axis_map):
            c = point.coords[j]
            out[a] = 1.0 - c if flips[j] else c
        return out

    # -- io -----------------------------------------------------------------

    def to_dict(self):
        return {
            "vertices": self.n_vertices,
            "edges": [list(e) for e in self.edges],
            "cubes": [list(c) for c in self.cubes],
        }


@dataclass(frozen=True)
class ComplexPoint:
    """A point of a complex: carrier cell + coordinates in its frame.
    Canonical form has every coordinate strictly inside (0, 1)."""

    cell: tuple
    coords: tuple

    @property
    def dim(self):
        return len(self.coords)

    @staticmethod
    def vertex(v):
        return ComplexPoint(("v", int(v)), ())


def _remap_coords(face_corners, coords, target_corners):
    """Re-express coordinates given in the frame of `face_corners` (a valid
    binary-ordered corner tuple) in the frame of `target_corners` (same cell,
    possibly different labeling)."""
    pos = {v: b for b, v in enumerate(face_corners)}
    base = pos[target_corners[0]]
    kd = len(target_corners).bit_length() - 1
    out = []
    for j in range(kd):
        delta = pos[target_corners[1 << j]] ^ base
        a = delta.bit_length() - 1
        c = coords[a]
        out.append(1.0 - c if (base >> a) & 1 else c)
    return out


def canonicalize_point(X, point, tol=1e-12):
    """Snap coordinates at 0/1 (within tol) onto the corresponding face and
    return the point on its minimal carrier.  Idempotent."""
    cell = point.cell
    coords = list(point.coords)
    for c in coords:
        if c < -tol or c > 1 + tol:
            raise ValueError(f"coordinate {c} outside [0, 1]")
    while coords:
        fixed = {i: round(c) for i, c in enumerate(coords) if min(c, 1 - c) <= tol}
        if not fixed:
            break
        corners = X.cell_corners(cell)
        keep = [i for i in range(len(coords)) if i not in fixed]
        face = tuple(
            corners[b]
            for b in range(len(corners))
            if all((b >> i) & 1 == eps for i, eps in fixed.items())
        )
        cell = X.cell_of_corners(face)
        sub = [float(coords[i]) for i in keep]
        coords = _remap_coords(face, sub, X.cell_corners(cell)) if sub else []
    return ComplexPoint(cell, tuple(float(c) for c in coords))


# -- validation --------------------------------------------------------------


def _bfs_distances(adj, n):
    D = np.full((n, n), -1, dtype=np.int32)
    for s in range(n):
        D[s, s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if D[s, v] < 0:
                    D[s, v] = D[s, u] + 1
                    q.append(v)
    return D


def _median_violations(D, n, limit=5):
    """Triple scan: every triple must admit exactly one median vertex."""
    out = []
    Di = D.astype(np.int64)
    for u in range(n):
        for v in range(u + 1, n):
            on_uv = np.flatnonzero(Di[u] + Di[v] == Di[u, v])
            A = Di[v][on_uv, None] + Di[on_uv, :] == Di[v][None, :]
            B = Di[u][on_uv, None] + Di[on_uv, :] == Di[u][None, :]
            counts = np.sum(A & B, axis=0)
            bad = np.flatnonzero(counts[v + 1:] != 1)
            for w0 in bad:
                w = int(w0) + v + 1
                c = int(counts[w])
                word = "no median" if c == 0 else f"{c} medians"
                out.append(
                    Violation(
                        "non-median-skeleton",
                        (u, v, w),
                        f"triple ({u}, {v}, {w}) has {word}",
                    )
                )
                if len(out) >= limit:
                    return out
    return out


def _graph_squares(adj, D, n):
    """All unit squares of the skeleton as (u, a, b, v) with u-a, u-b, a-v, b-v
    edges and d(u, v) = 2."""
    out = []
    for u in range(n):
        nbrs = adj[u]
        for ia in range(len(nbrs)):
            for ib in range(ia + 1, len(nbrs)):
                a, b = nbrs[ia], nbrs[ib]
                common = set(adj[a]) & set(adj[b])
                for v in common:
                    if v != u and D[u, v] == 2 and u < v:
                        out.append((u, a, b, v))
    return out


def _max_cliques(vertices, neighbors):
    """Bron-Kerbosch with pivoting; fine at the <= 12-ish sizes used here."""
    cliques = []

    def bk(R, P, X):
        if not P and not X:
            cliques.append(frozenset(R))
            return
        pivot = max(P | X, key=lambda u: len(neighbors[u] & P))
        for v in list(P - neighbors[pivot]):
            bk(R | {v}, P & neighbors[v], X & neighbors[v])
            P.remove(v)
            X.add(v)

    bk(set(), set(vertices), set())
    return cliques


def _edges_at_vertex_in_cube(corners, pos, v):
    """Edge set of a cube at one of its corners, as neighbor vertex ids."""
    b = pos[v]
    k = len(corners).bit_length() - 1
    return frozenset(corners[b ^ (1 << i)] for i in range(k))


def validate_complex(raw, max_vertices=512, max_median_vertices=None):
    """Validate a raw complex description.

    Parameters
    ----------
    raw : dict with keys "vertices", "edges", "cubes" (or a CubeComplex).
    max_vertices : hard cap on the vertex count.
    max_median_vertices : cap above which the median triple scan is skipped
        (defaults to max_vertices).

    Returns
    -------
    (complex, violations) : the CubeComplex and an empty list on success, or
        (None, [Violation, ...]) on failure.
    """
    violations = []
    if isinstance(raw, CubeComplex):
        raw = raw.to_dict()
    n = int(raw.get("vertices", 0))
    if n <= 0:
        return None, [Violation("empty", (), "complex has no vertices")]
    if n > max_vertices:
        return None, [
            Violation("too-large", (n,), f"{n} vertices exceeds cap {max_vertices}")
        ]
    if max_median_vertices is None:
        max_median_vertices = max_vertices

    edges = set()
    for e in raw.get("edges", []):
        u, v = int(e[0]), int(e[1])
        if u == v:
            violations.append(Violation("loop-edge", (u,), f"loop edge at {u}"))
            continue
        if not (0 <= u < n and 0 <= v < n):
            violations.append(Violation("bad-edge", (u, v), f"edge ({u}, {v}) out of range"))
            continue
        edges.add(tuple(sorted((u, v))))

    cubes = []
    for c in raw.get("cubes", []):
        c = tuple(int(x) for x in c)
        m = len(c)
        if m < 2 or m & (m - 1):
            violations.append(
                Violation("bad-cube", c, f"cube corner count {m} is not a power of two >= 2")
            )
            continue
        if len(set(c)) != m:
            violations.append(Violation("bad-cube", c, f"cube {c} repeats a corner"))
            continue
        if any(not (0 <= v < n) for v in c):
            violations.append(Violation("bad-cube", c, f"cube {c} has out-of-range corner"))
            continue
        if m == 2:
            edges.add(tuple(sorted(c)))
        else:
            cubes.append(c)
    if violations:
        return None, violations

    # induced edges present
    for c in cubes:
        for (u, v) in _cube_edges(c):
            if (u, v) not in edges:
                violations.append(
                    Violation(
                        "missing-cube-edge",
                        c,
                        f"cube {c} needs edge ({u}, {v}) which is not in the edge set",
                    )
                )

    # duplicate cubes (same corner set listed twice)
    seen = {}
    for c in cubes:
        key = frozenset(c)
        if key in seen:
            violations.append(
                Violation("duplicate-cube", c, f"cube over corners {sorted(key)} listed twice")
            )
        seen[key] = c
    if violations:
        return None, violations
    cubes = [seen[k] for k in seen]

    # face closure: every codim-1 face of a k-cube (k >= 2) is present
    key_set = set(seen)
    for c in cubes:
        for f in _cube_facets(c):
            if len(f) == 2:
                if tuple(sorted(f)) not in edges:
                    violations.append(
                        Violation(
                            "non-closed-face",
                            c,
                            f"face ({f[0]}, {f[1]}) of cube {c} is not an edge of the complex",
                        )
                    )
            elif frozenset(f) not in key_set:
                violations.append(
                    Violation(
                        "non-closed-face",
                        c,
                        f"face {tuple(sorted(f))} of cube {c} is not a listed cube",
                    )
                )
    if violations:
        return None, violations

    # star uniqueness: at most one cube over a (vertex, edge-set) pair
    reg = {}
    for c in cubes:
        pos = {v: b for b, v in enumerate(c)}
        for v in c:
            J = _edges_at_vertex_in_cube(c, pos, v)
            key = (v, J)
            if key in reg and reg[key] != frozenset(c):
                violations.append(
                    Violation(
                        "duplicate-cube",
                        c,
                        f"two cubes at vertex {v} share the edge set {sorted(J)}",
                    )
                )
            reg[key] = frozenset(c)
    if violations:
        return None, violations

    adj = [[] for _ in range(n)]
    for (u, v) in edges:
        adj[u].append(v)
        adj[v].append(u)
    for nbrs in adj:
        nbrs.sort()

    D = _bfs_distances(adj, n)
    if (D < 0).any() and n > 1:
        comp = np.flatnonzero(D[0] < 0)
        violations.append(
            Violation(
                "disconnected-skeleton",
                tuple(int(x) for x in comp[:4]),
                f"skeleton is disconnected (vertex 0 cannot reach {int(comp[0])})",
            )
        )
        return None, violations

    if n <= max_median_vertices:
        violations.extend(_median_violations(D, n))
        if violations:
            return None, violations

    # fullness: every graph square carries a 2-cube
    squares = _graph_squares(adj, D, n)
    filled = set(key_set)
    for (u, a, b, v) in squares:
        if frozenset((u, a, b, v)) not in filled:
            violations.append(
                Violation(
                    "unfilled-square",
                    (u, a, b, v),
                    f"skeleton square ({u}, {a}, {b}, {v}) has no 2-cube",
                )
            )
    if violations:
        return None, violations

    # fullness: at each vertex the co-square cliques are realized by cubes
    cube_edge_sets = {}
    for c in cubes:
        pos = {v: b for b, v in enumerate(c)}
        for v in c:
            cube_edge_sets.setdefault(v, set()).add(_edges_at_vertex_in_cube(c, pos, v))
    for v in range(n):
        nbrs = adj[v]
        if len(nbrs) < 3:
            continue
        cosq = {u: set() for u in nbrs}
        realized = cube_edge_sets.get(v, set())
        for J in realized:
            for a in J:
                for b in J:
                    if a != b:
                        cosq[a].add(b)
        # squares at v from the square list
        for (s_u, s_a, s_b, s_v) in squares:
            quad = (s_u, s_a, s_b, s_v)
            if v == s_u:
                cosq[s_a].add(s_b)
                cosq[s_b].add(s_a)
            elif v == s_v:
                cosq[s_a].add(s_b)
                cosq[s_b].add(s_a)
            elif v == s_a:
                cosq[s_u].add(s_v)
                cosq[s_v].add(s_u)
            elif v == s_b:
                cosq[s_u].add(s_v)
                cosq[s_v].add(s_u)
        for K in _max_cliques(nbrs, cosq):
            if len(K) >= 3 and K not in realized:
                violations.append(
                    Violation(
                        "unrealized-clique",
                        (v,) + tuple(sorted(K)),
                        f"edges {sorted(K)} at vertex {v} pairwise span squares "
                        f"but no {len(K)}-cube realizes them",
                    )
                )
    if violations:
        return None, violations

    return CubeComplex(n, edges, cubes), []


def parse_complex(raw, **kw):
    X, violations = validate_complex(raw, **kw)
    if X is None:
        raise ComplexValidationError(violations)
    return X


def load_complex(path, **kw):
    with open(path) as fh:
        raw = json.load(fh)
    return parse_complex(raw, **kw)


def save_complex(X, path):
    with open(path, "w") as fh:
        json.dump(X.to_dict(), fh, indent=1)
        fh.write("\n")


# -- stars -------------------------------------------------------------------


def star_faces(X, v):
    """The family of edge subsets at vertex v realized by cubes.

    Returns (axes, maximal_faces): axes is the sorted tuple of neighbor ids,
    maximal_faces a list of frozensets of neighbor ids (downward closed family;
    singletons are always faces).
    """
    axes = tuple(X.adjacency[v])
    faces = {frozenset((u,)) for u in axes}
    faces.add(frozenset())
    for ci in X._vertex_cubes[v]:
        c = X.cubes[ci]
        pos = X._corner_pos[ci]
        J = _edges_at_vertex_in_cube(c, pos, v)
        faces.add(J)
        # closure (guaranteed for validated complexes; cheap to add anyway)
        for f in X.cell_faces(("c", ci)):
            corners = X.cell_corners(f)
            if v in corners and len(corners) > 1:
                fpos = {u: b for b, u in enumerate(corners)}
                faces.add(_edges_at_vertex_in_cube(corners, fpos, v))
    maximal = [f for f in faces if f and not any(f < g for g in faces)]
    maximal.sort(key=lambda f: (len(f), sorted(f)))
    return axes, maximal


# -- generators ----------------------------------------------------------------


def _closure_cubes(top_cubes):
    """All faces of dim >= 2 of the given corner tuples."""
    out = set()
    stack = [tuple(c) for c in top_cubes]
    while stack:
        c = stack.pop()
        if len(c) < 4:
            continue
        key = frozenset(c)
        if key in out:
            continue
        out.add(key)
        yield c
        for f in _cube_facets(c):
            stack.append(f)


def _assemble(n, edge_set, top_cubes):
    cubes, seen = [], set()
    for c in _closure_cubes(top_cubes):
        if frozenset(c) not in seen:
            seen.add(frozenset(c))
            cubes.append(c)
    for c in top_cubes:
        edge_set |= _cube_edges(c)
    return parse_complex(
        {"vertices": n, "edges": sorted(edge_set), "cubes": [list(c) for c in cubes]}
    )


def single_cube_complex(k):
    """The full k-cube with all of its faces."""
    if k < 1:
        raise ValueError("cube dimension must be >= 1")
    corners = tuple(range(2 ** k))
    if k == 1:
        return parse_complex({"vertices": 2, "edges": [[0, 1]], "cubes": []})
    return _assemble(2 ** k, set(), [corners])


def grid_complex(w, h):
    """A w-by-h grid of unit squares."""
    def vid(i, j):
        return j * (w + 1) + i

    tops = []
    for j in range(h):
        for i in range(w):
            tops.append((vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)))
    return _assemble((w + 1) * (h + 1), set(), tops)


def tree_complex(edges, n=None):
    """A metric tree with unit edges (1-dimensional complex)."""
    if n is None:
        n = 1 + max(max(e) for e in edges)
    return parse_complex({"vertices": n, "edges": [list(e) for e in edges], "cubes": []})


def random_tree_complex(n, seed):
    rng = np.random.default_rng(seed)
    edges = []
    for v in range(1, n):
        edges.append((int(rng.integers(0, v)), v))
    return tree_complex(edges, n)


def random_square_complex(n_cells, seed, width=None):
    """A random hole-free polyomino of unit squares, grown cell by cell.

    Each candidate cell is accepted only if the complement of the polyomino
    stays connected to the outside (no enclosed holes), which keeps the complex
    simply connected and its skeleton median.
    """
    if width is None:
        width = max(3, int(np.ceil(np.sqrt(n_cells))) + 2)
    rng = np.random.default_rng(seed)
    cells = {(0, 0)}

    def hole_free(cand):
        xs = [c[0] for c in cand]
        ys = [c[1] for c in cand]
        lo_x, hi_x = min(xs) - 1, max(xs) + 1
        lo_y, hi_y = min(ys) - 1, max(ys) + 1
        total = (hi_x - lo_x + 1) * (hi_y - lo_y + 1) - len(cand)
        start = (lo_x, lo_y)
        q = deque([start])
        seen = {start}
        while q:
            x, y = q.popleft()
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                p = (x + dx, y + dy)
                if lo_x <= p[0] <= hi_x and lo_y <= p[1] <= hi_y and p not in cand and p not in seen:
                    seen.add(p)
                    q.append(p)
        return len(seen) == total

    guard = 0
    while len(cells) < n_cells and guard < 50 * n_cells:
        guard += 1
        frontier = set()
        for (x, y) in cells:
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                c = (x + dx, y + dy)
                if c not in cells and abs(c[0]) <= width and abs(c[1]) <= width:
                    frontier.add(c)
        frontier = sorted(frontier)
        c = frontier[rng.integers(0, len(frontier))]
        cand = cells | {c}
        if hole_free(cand):
            cells = cand

    verts = {}
    for (x, y) in sorted(cells):
        for dx in (0, 1):
            for dy in (0, 1):
                verts.setdefault((x + dx, y + dy), None)
    for i, v in enumerate(sorted(verts)):
        verts[v] = i
    tops = []
    for (x, y) in sorted(cells):
        tops.append(
            (verts[(x, y)], verts[(x + 1, y)], verts[(x, y + 1)], verts[(x + 1, y + 1)])
        )
    X = _assemble(len(verts), set(), tops)
    X.grid_coords = {i: xy for xy, i in verts.items()}  # ambient layout, handy in demos
    return X
