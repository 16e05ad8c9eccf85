"""Orthant spaces (Euclidean cones over flag families of axes).

A cone is a union of coordinate orthants ("faces") of a product of half-lines,
one orthant per admissible subset of axes; admissible subsets form a flag
family presented by its maximal members.  Points are nonnegative coordinate
vectors supported inside an admissible face.  Distances are path lengths
through shared subfaces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TangentCone",
    "ConePoint",
    "orthant_distance",
    "geodesic_point",
    "subdivision_distance",
    "sample_cone_point",
    "random_flag_cone",
]


def _bits(iterable):
    m = 0
    for a in iterable:
        m |= 1 << int(a)
    return m


def _bit_list(mask):
    out = []
    a = 0
    while mask:
        if mask & 1:
            out.append(a)
        mask >>= 1
        a += 1
    return out


def _max_cliques_bits(n, adj_bits):
    """Maximal cliques of a graph on 0..n-1 given neighbor bitmasks."""
    cliques = []

    def bk(R, P, X):
        if not P and not X:
            cliques.append(R)
            return
        pivot_pool = P | X
        pivot = max(_bit_list(pivot_pool), key=lambda u: bin(adj_bits[u] & P).count("1"))
        cand = P & ~adj_bits[pivot]
        for v in _bit_list(cand):
            bit = 1 << v
            bk(R | bit, P & adj_bits[v], X & adj_bits[v])
            P &= ~bit
            X |= bit

    bk(0, (1 << n) - 1, 0)
    return cliques


class ConePoint:
    """A point of an orthant space: a nonnegative coordinate vector."""

    __slots__ = ("vec",)

    def __init__(self, vec):
        v = np.array(vec, dtype=float)
        if v.ndim != 1:
            raise ValueError("cone point must be a flat coordinate vector")
        if (v < 0).any():
            raise ValueError("cone coordinates must be nonnegative")
        v.flags.writeable = False
        self.vec = v

    @property
    def support(self):
        return _bits(np.flatnonzero(self.vec > 0))

    @property
    def radius(self):
        return float(np.linalg.norm(self.vec))

    def as_dict(self):
        return {int(i): float(self.vec[i]) for i in np.flatnonzero(self.vec > 0)}

    def __repr__(self):
        inside = ", ".join(f"{i}:{x:.6g}" for i, x in self.as_dict().items())
        return f"ConePoint({{{inside}}})" if inside else "ConePoint(origin)"

    def __eq__(self, other):
        return isinstance(other, ConePoint) and np.array_equal(self.vec, other.vec)

    def __hash__(self):
        return hash(self.vec.tobytes())


class TangentCone:
    """Orthant space over `n_axes` half-lines with admissible faces given by
    the downward closure of `maximal_faces` (axis-index collections).

    The family must be a flag family: pairwise-compatible axis sets are faces.
    This is asserted at construction (the maximal faces must be exactly the
    maximal cliques of the compatibility graph).
    """

    def __init__(self, n_axes, maximal_faces, labels=None):
        self.n_axes = int(n_axes)
        faces = sorted({_bits(f) for f in maximal_faces}, key=lambda b: (bin(b).count("1"), b))
        if not faces and self.n_axes > 0:
            raise ValueError("a cone with axes needs at least one face")
        if any(f == 0 for f in faces):
            faces = [f for f in faces if f]
        covered = 0
        for f in faces:
            covered |= f
        if covered != (1 << self.n_axes) - 1:
            missing = sorted(set(range(self.n_axes)) - set(_bit_list(covered)))
            raise ValueError(f"axes {missing} belong to no face")
        # drop faces contained in others
        faces = [f for f in faces if not any(f != g and f & ~g == 0 for g in faces)]
        self.face_bits = tuple(sorted(faces, key=lambda b: (bin(b).count("1"), b)))
        self.labels = tuple(labels) if labels is not None else tuple(range(self.n_axes))

        adj = [0] * self.n_axes
        for f in self.face_bits:
            for a in _bit_list(f):
                adj[a] |= f & ~(1 << a)
        cliques = set(_max_cliques_bits(self.n_axes, adj)) if self.n_axes else set()
        if cliques != set(self.face_bits):
            raise ValueError(
                "face family is not flag: maximal faces do not match the "
                "maximal cliques of the compatibility graph"
            )
        # nerve edges: pairs of maximal faces with nonzero intersection
        F = len(self.face_bits)
        self._nerve = [
            [j for j in range(F) if j != i and self.face_bits[i] & self.face_bits[j]]
            for i in range(F)
        ]
        self._paths_cache = {}
        self.rank = 0  # flat-factor dimension metadata; set by cone builders

    # -- points ---------------------------------------------------------------

    def point(self, data):
        """Build an admissible ConePoint from {axis: value} or a vector."""
        if isinstance(data, ConePoint):
            vec = data.vec
        elif isinstance(data, dict):
            vec = np.zeros(self.n_axes)
            for a, x in data.items():
                vec[int(a)] = float(x)
        else:
            vec = np.asarray(data, dtype=float)
            if vec.shape != (self.n_axes,):
                raise ValueError(f"expected {self.n_axes} coordinates, got {vec.shape}")
        p = ConePoint(vec)
        if not self.is_admissible(p.support):
            raise ValueError(
                f"support {sorted(_bit_list(p.support))} is not contained in any face"
            )
        return p

    def origin(self):
        return ConePoint(np.zeros(self.n_axes))

    def is_admissible(self, support_bits):
        return any(support_bits & ~f == 0 for f in self.face_bits)

    def faces_containing(self, support_bits):
        return [i for i, f in enumerate(self.face_bits) if support_bits & ~f == 0]

    def maximal_faces(self):
        return [frozenset(_bit_list(f)) for f in self.face_bits]

    # -- sequence enumeration ---------------------------------------------------

    def _interface(self, i, j):
        return self.face_bits[i] & self.face_bits[j]

    def _paths(self, i, j, cap):
        """Simple nerve paths i -> j (length <= cap faces) with the
        nested-consecutive-interface pruning applied."""
        key = (i, j, cap)
        hit = self._paths_cache.get(key)
        if hit is not None:
            return hit
        out = []

        def dfs(path, visited, prev_s):
            last = path[-1]
            if last == j:
                out.append(tuple(path))
                return
            if len(path) >= cap:
                return
            for nxt in self._nerve[last]:
                if visited & (1 << nxt):
                    continue
                s = self._interface(last, nxt)
                if prev_s is not None and (s & ~prev_s == 0 or prev_s & ~s == 0):
                    continue  # nested interfaces: dominated by a shorter path
                dfs(path + [nxt], visited | (1 << nxt), s)

        dfs([i], 1 << i, None)
        self._paths_cache[key] = out
        return out


def _chain_solve(vx, vy, masks, iters=2000, tol=1e-13):
    """Minimize |x-b1| + sum |b_i - b_{i+1}| + |b_k - y| over breakpoints b_i
    constrained to the coordinate subspaces given by `masks` (B, k, A).

    Each update is the exact minimizer for one breakpoint given its neighbors:
    the constrained optimum is a positive combination of the neighbors'
    in-face parts, so nonnegativity never binds.  Returns (lengths, B-points).
    """
    Bn, k, A = masks.shape
    scale = max(float(np.sqrt(vx @ vx)), float(np.sqrt(vy @ vy)), 1e-300)
    t = (np.arange(1, k + 1) / (k + 1))[None, :, None]
    pts = (vx[None, None, :] * (1 - t) + vy[None, None, :] * t) * masks
    VX = np.tile(vx, (Bn, 1))
    VY = np.tile(vy, (Bn, 1))
    thresh = tol * scale
    for _ in range(iters):
        move = 0.0
        for i in range(k):
            m = masks[:, i, :]
            p = pts[:, i - 1, :] if i > 0 else VX
            q = pts[:, i + 1, :] if i < k - 1 else VY
            pS = p * m
            qS = q * m
            dp = p - pS
            dq = q - qS
            pR = np.sqrt((dp * dp).sum(1))[:, None]
            qR = np.sqrt((dq * dq).sum(1))[:, None]
            denom = pR + qR
            np.maximum(denom, 1e-300, out=denom)
            # w = 0 when both neighbors lie inside the face: any point of the
            # segment [pS, qS] is then optimal, qS included
            w = qR / denom
            new = w * pS + (1 - w) * qS
            d = float(np.abs(new - pts[:, i, :]).max())
            if d > move:
                move = d
            pts[:, i, :] = new
        if move <= thresh:
            break
    diffs = np.empty((Bn, k + 1, A))
    diffs[:, 0, :] = pts[:, 0, :] - VX
    if k > 1:
        diffs[:, 1:k, :] = pts[:, 1:, :] - pts[:, :-1, :]
    diffs[:, k, :] = VY - pts[:, k - 1, :]
    lengths = np.sqrt((diffs * diffs).sum(2)).sum(1)
    return lengths, pts


def _candidate_paths(T, sx, sy, cap):
    fx = T.faces_containing(sx)
    fy = T.faces_containing(sy)
    fx_set, fy_set = set(fx), set(fy)
    paths = []
    for i in fx:
        for j in fy:
            if i == j:
                continue
            for p in T._paths(i, j, cap):
                # interior faces containing an endpoint give dominated detours
                if any(q in fx_set or q in fy_set for q in p[1:-1]):
                    continue
                paths.append(p)
    return paths


def orthant_distance(T, x, y, with_path=False, cap=None, iters=2000, tol=1e-13):
    """Exact path-space distance between two cone points.

    Enumerates maximal-face sequences (simple nerve paths, capped at `cap`
    faces, default the number of maximal faces), solves the convex breakpoint
    chain for each by cyclic closed-form updates, and takes the best of those,
    the direct segment (when supports share a face), and the radial path
    through the origin.  Result is within [d_flat, sqrt(2) d_flat] of the
    coordinate-space flat metric d_flat.
    """
    x = T.point(x)
    y = T.point(y)
    vx, vy = x.vec, y.vec
    if cap is None:
        cap = len(T.face_bits)
    sx, sy = x.support, y.support

    d_flat = float(np.linalg.norm(vx - vy))
    if sx | sy and T.is_admissible(sx | sy):
        return (d_flat, [x, y]) if with_path else d_flat
    if not sx or not sy:
        # one endpoint is the origin: radial is optimal
        d = x.radius + y.radius
        return (d, [x, y]) if with_path else d

    best = x.radius + y.radius
    best_path = [x, T.origin(), y]

    paths = _candidate_paths(T, sx, sy, cap)
    by_len = {}
    for p in paths:
        by_len.setdefault(len(p) - 1, []).append(p)
    A = T.n_axes
    best_pts = None
    for k, group in sorted(by_len.items()):
        masks = np.zeros((len(group), k, A), dtype=float)
        for b, p in enumerate(group):
            for i in range(k):
                s = T._interface(p[i], p[i + 1])
                for a in _bit_list(s):
                    masks[b, i, a] = 1.0
        lengths, pts = _chain_solve(vx, vy, masks, iters=iters, tol=tol)
        b = int(np.argmin(lengths))
        if lengths[b] < best:
            # polish the winner on its own to a tighter tolerance
            l2, p2 = _chain_solve(vx, vy, masks[b : b + 1], iters=5 * iters, tol=tol * 1e-2)
            if l2[0] <= lengths[b]:
                best, best_pts = float(l2[0]), p2[0]
            else:
                best, best_pts = float(lengths[b]), pts[b]

    if not with_path:
        return best
    if best_pts is None:
        return best, best_path
    poly = [x]
    dust = 1e-12 * max(x.radius, y.radius)
    for i in range(best_pts.shape[0]):
        v = np.where(best_pts[i] > dust, best_pts[i], 0.0)
        if poly and np.allclose(v, poly[-1].vec, atol=1e-15):
            continue
        poly.append(ConePoint(v))
    if not np.allclose(poly[-1].vec, vy, atol=1e-15):
        poly.append(y)
    return best, poly


def geodesic_point(T, x, y, s):
    """Point at arc-length fraction s along the geodesic from x to y."""
    if not 0 <= s <= 1:
        raise ValueError("arc-length fraction must lie in [0, 1]")
    d, poly = orthant_distance(T, x, y, with_path=True)
    if d == 0 or s == 0:
        return T.point(x)
    if s == 1:
        return T.point(y)
    target = s * d
    acc = 0.0
    for a, b in zip(poly, poly[1:]):
        seg = float(np.linalg.norm(b.vec - a.vec))
        if seg == 0:
            continue
        if acc + seg >= target - 1e-15:
            t = (target - acc) / seg
            v = a.vec * (1 - t) + b.vec * t
            dust = 1e-12 * max(float(np.max(v)), 1e-300)
            return T.point(np.where(v > dust, v, 0.0))
        acc += seg
    return T.point(y)


# -- subdivision oracle -------------------------------------------------------


def subdivision_distance(T, x, y, m=32):
    """Upper bound on the cone distance from a Dijkstra run on grid points of
    the pairwise face intersections (plus the endpoints), with complete edges
    inside every maximal face.

    Interior grid nodes of a maximal face never help (any through-path
    shortcuts to the direct in-face segment), so gridding the shared subfaces
    is equivalent to gridding every face and much smaller.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra

    x = T.point(x)
    y = T.point(y)
    if np.array_equal(x.vec, y.vec):
        return 0.0
    R = max(x.radius, y.radius)
    ifaces = set()
    F = len(T.face_bits)
    for i in range(F):
        for j in range(i + 1, F):
            s = T._interface(i, j)
            ifaces.add(s)
    ifaces.add(0)

    nodes = {}

    def add_node(vec):
        key = tuple(np.round(vec * (m / max(R, 1e-300)) * (1 << 20)).astype(np.int64))
        if key not in nodes:
            nodes[key] = (len(nodes), vec)
        return nodes[key][0]

    for s in ifaces:
        axes = _bit_list(s)
        if len(axes) > 3:
            raise ValueError("subdivision oracle supports interface dimension <= 3")
        for combo in itertools.product(range(m + 1), repeat=len(axes)):
            vec = np.zeros(T.n_axes)
            for a, k in zip(axes, combo):
                vec[a] = R * k / m
            add_node(vec)
    ix = add_node(x.vec.copy())
    iy = add_node(y.vec.copy())

    vecs = np.empty((len(nodes), T.n_axes))
    for _, (i, vec) in nodes.items():
        vecs[i] = vec
    supports = [_bits(np.flatnonzero(v > 0)) for v in vecs]

    rows, cols, vals = [], [], []
    seen = set()
    for fb in T.face_bits:
        members = [i for i in range(len(vecs)) if supports[i] & ~fb == 0]
        if len(members) < 2:
            continue
        sub = vecs[members]
        dmat = np.sqrt(((sub[:, None, :] - sub[None, :, :]) ** 2).sum(-1))
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                # node pairs inside a shared subface show up in several
                # faces; scipy sums duplicate entries, so add each once
                pair = (members[a], members[b])
                if pair in seen:
                    continue
                seen.add(pair)
                rows.append(pair[0])
                cols.append(pair[1])
                vals.append(dmat[a, b])
    g = coo_matrix((vals, (rows, cols)), shape=(len(vecs), len(vecs)))
    dist = dijkstra(g, directed=False, indices=ix)
    return float(dist[iy])


# -- sampling / generation ----------------------------------------------------


def sample_cone_point(T, rng, scale=1.0):
    """Random point: uniform maximal face, exponential radii on its axes."""
    f = T.face_bits[int(rng.integers(0, len(T.face_bits)))]
    vec = np.zeros(T.n_axes)
    for a in _bit_list(f):
        vec[a] = rng.exponential(scale)
    return ConePoint(vec)


def random_flag_cone(n_axes, edge_prob, seed):
    """Flag cone from a random compatibility graph on the axes."""
    rng = np.random.default_rng(seed)
    adj = [0] * n_axes
    for a in range(n_axes):
        for b in range(a + 1, n_axes):
            if rng.random() < edge_prob:
                adj[a] |= 1 << b
                adj[b] |= 1 << a
    cliques = _max_cliques_bits(n_axes, adj)
    return TangentCone(n_axes, [frozenset(_bit_list(c)) for c in cliques])
