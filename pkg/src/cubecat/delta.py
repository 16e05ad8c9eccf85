"""Spreading invariant of a finitely supported measure.

For a measure with atoms p, weights w_p, barycenter b, radii r_p = d(p, b)
and pairwise distances d_pq, the invariant is the infimum of

    | sum_p w_p phi_p |^2  /  sum_p w_p r_p^2

over maps phi into Hilbert space with |phi_p| = r_p exactly and
|phi_p - phi_q| <= d_pq.  Equivalently an SDP over Gram matrices G:
minimize w^T G w subject to G psd, G_pp = r_p^2, and the off-diagonal floor
G_pq >= (r_p^2 + r_q^2 - d_pq^2) / 2.

The solver is heuristic from above: it reports the best feasible value it
finds, which is always an upper bound for the infimum; no attainment or
global optimality is claimed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GramMatrix",
    "DeltaResult",
    "gram_feasibility_check",
    "delta_from_data",
    "delta_of_measure",
    "delta_survey",
    "SurveyRecord",
]


@dataclass
class GramMatrix:
    """Symmetric Gram matrix of candidate vectors phi_p."""

    matrix: np.ndarray

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh((self.matrix + self.matrix.T) / 2).min())

    def vectors(self, tol=1e-12):
        """Rows phi_p of a factorization G = Phi Phi^T (negative eigenvalues
        clipped)."""
        sym = (self.matrix + self.matrix.T) / 2
        vals, vecs = np.linalg.eigh(sym)
        vals = np.where(vals > tol * max(1.0, abs(vals).max()), vals, 0.0)
        return vecs * np.sqrt(vals)[None, :]


def gram_feasibility_check(gram, weights, radii, dists, tol=1e-8):
    """Named constraint violations of a Gram matrix, with magnitudes.

    Returns (ok, violations): violations are ("not-psd", magnitude),
    ("radius", p, magnitude), ("lipschitz", p, q, magnitude); magnitudes are
    absolute, and `ok` means every magnitude is at most tol * scale^2 where
    scale = max radius.
    """
    G = gram.matrix if isinstance(gram, GramMatrix) else np.asarray(gram, float)
    r = np.asarray(radii, float)
    n = len(r)
    scale2 = max(float((r * r).max()), 1e-300)
    out = []
    min_eig = float(np.linalg.eigvalsh((G + G.T) / 2).min())
    if min_eig < -tol * scale2:
        out.append(("not-psd", -min_eig))
    for p in range(n):
        gap = abs(G[p, p] - r[p] ** 2)
        if gap > tol * scale2:
            out.append(("radius", p, gap))
    D = np.asarray(dists, float)
    for p in range(n):
        for q in range(p + 1, n):
            sq = G[p, p] + G[q, q] - 2 * G[p, q]
            excess = sq - D[p, q] ** 2
            if excess > tol * scale2:
                out.append(("lipschitz", p, q, excess))
    return (not out), out


@dataclass
class DeltaResult:
    value: float
    gram: GramMatrix
    weights: np.ndarray
    radii: np.ndarray
    dists: np.ndarray
    history: list = field(default_factory=list)
    feasible: bool = True
    max_violation: float = 0.0
    barycenter: object = None
    value_with_lower_metric: float | None = None

    def recomputed_value(self):
        w = self.weights
        return float(w @ self.gram.matrix @ w / (w @ (self.radii**2)))


def _project_gram(G, r2, L, cycles=3):
    n = len(r2)
    off = ~np.eye(n, dtype=bool)
    for _ in range(cycles):
        sym = (G + G.T) / 2
        vals, vecs = np.linalg.eigh(sym)
        G = (vecs * np.clip(vals, 0.0, None)[None, :]) @ vecs.T
        G[np.arange(n), np.arange(n)] = r2
        G[off] = np.maximum(G[off], L[off])
    return G


def _violation_magnitude(G, w, r2, L):
    n = len(r2)
    min_eig = float(np.linalg.eigvalsh((G + G.T) / 2).min())
    v = max(0.0, -min_eig)
    v = max(v, float(abs(np.diag(G) - r2).max()))
    off = ~np.eye(n, dtype=bool)
    v = max(v, float(np.maximum(L[off] - G[off], 0.0).max()))
    return v


def _value(G, w, denom):
    return float(w @ G @ w) / denom


def _rank1_radial(r):
    return np.outer(r, r)


def _polygon_directions(masses):
    """Unit vectors u_i in R^2 with sum masses[i] * u_i as small as the
    polygon inequality allows (zero when no mass exceeds half the total)."""
    order = np.argsort(masses)[::-1]
    S = [0.0, 0.0, 0.0]
    group_of = {}
    for rank, i in enumerate(order):
        # largest mass alone in group 0, the rest balance groups 1 and 2
        g = 0 if rank == 0 else (1 if S[1] <= S[2] else 2)
        group_of[int(i)] = g
        S[g] += float(masses[i])
    S1, S2, S3 = S
    if S1 * S2 > 0:
        cos_t = (S3 * S3 - S1 * S1 - S2 * S2) / (2 * S1 * S2)
        cos_t = min(1.0, max(-1.0, cos_t))
        sin_t = float(np.sqrt(max(0.0, 1.0 - cos_t * cos_t)))
    else:
        cos_t, sin_t = -1.0, 0.0
    u = np.zeros((3, 2))
    u[0] = (1.0, 0.0)
    u[1] = (cos_t, sin_t)
    V3 = -(S1 * u[0] + S2 * u[1])
    n3 = float(np.linalg.norm(V3))
    u[2] = V3 / n3 if n3 > 0 else (0.0, 1.0)
    return np.array([u[group_of[i]] for i in range(len(masses))])


def _radial_witness(w, r, D, tol=1e-9):
    """Two-dimensional candidate phi_p = r_p u_p: atoms whose mutual distance
    falls short of r_p + r_q share a direction; directions close the weighted
    polygon.  Exact for tree-like data (all geodesics through the center)."""
    n = len(r)
    scale = max(float(r.max()), 1e-300)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for p in range(n):
        for q in range(p + 1, n):
            if D[p, q] < r[p] + r[q] - tol * scale:
                rp, rq = find(p), find(q)
                if rp != rq:
                    parent[rp] = rq
    roots = sorted({find(i) for i in range(n)})
    if len(roots) < 2:
        return None
    cls = {c: i for i, c in enumerate(roots)}
    masses = np.zeros(len(roots))
    for i in range(n):
        masses[cls[find(i)]] += w[i] * r[i]
    dirs = _polygon_directions(masses)
    phi = np.array([r[i] * dirs[cls[find(i)]] for i in range(n)])
    return phi


def _phi_feasible(phi, r, D, tol):
    scale = max(float(r.max()), 1e-300)
    nr = np.sqrt((phi * phi).sum(1))
    if abs(nr - r).max() > tol * scale:
        return False
    gaps = np.sqrt(((phi[:, None, :] - phi[None, :, :]) ** 2).sum(-1))
    return float((gaps - D).max()) <= tol * scale


def _vector_polish(phi, w, r, D, denom, passes=300, seed=0):
    """Feasible-descent polish: rescale rows to exact radii, repair Lipschitz
    violations pairwise, step against the weighted sum.  Returns the best
    feasible iterate."""
    n, k = phi.shape
    scale = max(float(r.max()), 1e-300)
    best_phi, best_val = None, np.inf
    step = 1.0
    phi = phi.copy()
    for _ in range(passes):
        # radial projection
        nr = np.sqrt((phi * phi).sum(1))
        for i in range(n):
            if nr[i] > 0:
                phi[i] *= r[i] / nr[i]
            elif r[i] > 0:
                e = np.zeros(k)
                e[0] = r[i]
                phi[i] = e
        # Lipschitz repair sweeps
        for _ in range(6):
            worst = 0.0
            for p in range(n):
                for q in range(p + 1, n):
                    diff = phi[p] - phi[q]
                    g = float(np.sqrt(diff @ diff))
                    if g > D[p, q] and g > 0:
                        worst = max(worst, g - D[p, q])
                        mid = (phi[p] + phi[q]) / 2
                        half = diff * (D[p, q] / g / 2)
                        phi[p] = mid + half
                        phi[q] = mid - half
            nr = np.sqrt((phi * phi).sum(1))
            ratio = np.where(nr == 0, 1.0, r / np.where(nr == 0, 1.0, nr))
            phi *= ratio[:, None]
            if worst <= 1e-13 * scale:
                break
        if _phi_feasible(phi, r, D, 1e-11):
            val = float(((w[:, None] * phi).sum(0) ** 2).sum()) / denom
            if val < best_val:
                best_val, best_phi = val, phi.copy()
        # gradient step on |sum w phi|^2: d/dphi_p = 2 w_p * (sum)
        v = (w[:, None] * phi).sum(0)
        phi = phi - step * np.outer(w, v)
        step *= 0.97
    return best_phi, best_val


def _barrier_refine(w, r2, L, t_max=1e9):
    """Log-barrier interior-point minimization of w^T G w over the feasible
    Gram set (diagonal pinned by parametrizing off-diagonal entries only).
    Returns a strictly feasible G near the global optimum, or None when the
    feasible set has no usable interior."""
    n = len(r2)
    if n == 1:
        return np.array([[r2[0]]])
    pairs = [(p, q) for p in range(n) for q in range(p + 1, n)]
    m = len(pairs)
    r = np.sqrt(r2)
    head = min(1.0 - L[p, q] / (r[p] * r[q]) for p, q in pairs if r[p] * r[q] > 0)
    if head <= 0:
        return None
    eps = min(0.25, 0.5 * head)
    G = (1 - eps) * np.outer(r, r) + eps * np.diag(r2)

    def strictly_ok(G):
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            return False
        return all(G[p, q] > L[p, q] for p, q in pairs)

    if not strictly_ok(G):
        return None

    ww = np.asarray(w, float)

    def fval(G, t):
        sign, logdet = np.linalg.slogdet(G)
        if sign <= 0:
            return np.inf
        s = sum(math.log(G[p, q] - L[p, q]) for p, q in pairs)
        return t * float(ww @ G @ ww) - logdet - s

    t = 1.0
    while t <= t_max:
        for _ in range(25):
            Ginv = np.linalg.inv(G)
            slack = np.array([G[p, q] - L[p, q] for p, q in pairs])
            g = np.array(
                [2 * t * ww[p] * ww[q] - 2 * Ginv[p, q] - 1.0 / slack[k]
                 for k, (p, q) in enumerate(pairs)]
            )
            H = np.empty((m, m))
            for a, (p, q) in enumerate(pairs):
                for b, (u, v) in enumerate(pairs):
                    H[a, b] = 2 * (Ginv[p, u] * Ginv[q, v] + Ginv[p, v] * Ginv[q, u])
            H[np.arange(m), np.arange(m)] += 1.0 / (slack * slack)
            try:
                step = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                step = -g / (np.abs(H).sum(1) + 1e-300)
            decrement = float(-g @ step)
            if decrement < 1e-11:
                break
            f0 = fval(G, t)
            alpha = 1.0
            moved = False
            for _ in range(50):
                Gn = G.copy()
                for k, (p, q) in enumerate(pairs):
                    Gn[p, q] = Gn[q, p] = G[p, q] + alpha * step[k]
                if strictly_ok(Gn) and fval(Gn, t) < f0 - 1e-14:
                    G = Gn
                    moved = True
                    break
                alpha *= 0.5
            if not moved:
                break
        t *= 3.0
    return G


def _solve_gram(w, r, D, denom, iters, seed):
    """Core heuristic minimization over feasible Grams; returns
    (value, gram, history).  Assumes scale-normalized data with no pair
    forced into exact alignment (no d_pq at |r_p - r_q| with r_p r_q > 0)."""
    r2 = r * r
    L = (r2[:, None] + r2[None, :] - D * D) / 2.0
    history = []
    best = {"val": np.inf, "G": None}

    def consider(G, record=True):
        mag = _violation_magnitude(G, w, r2, L)
        if mag <= 1e-10:
            val = _value(G, w, denom)
            if val < best["val"]:
                best["val"], best["G"] = val, G.copy()
        if record:
            history.append(min(best["val"], history[-1] if history else np.inf))

    consider(_rank1_radial(r), record=False)
    G_floor = L.copy()
    np.fill_diagonal(G_floor, r2)
    if np.linalg.eigvalsh((G_floor + G_floor.T) / 2).min() >= -1e-12:
        consider(_project_gram(G_floor, r2, L, cycles=1), record=False)
    phi0 = _radial_witness(w, r, D)
    if phi0 is not None and _phi_feasible(phi0, r, D, 1e-11):
        consider(phi0 @ phi0.T, record=False)

    # interior-point refinement: subgradient iterates hug the constraint
    # boundary where alternating projections stall, while the barrier path
    # stays strictly feasible all the way down to the optimum
    Gb = _barrier_refine(w, r2, L)
    if Gb is not None:
        consider(Gb, record=False)

    # phase 1: projected subgradient; the running iterate is only lightly
    # projected, so candidates get a strong repair before being recorded
    G = best["G"].copy() if best["G"] is not None else _project_gram(G_floor, r2, L)
    gg = np.outer(w, w)
    for k in range(iters):
        G = _project_gram(G - (0.3 / np.sqrt(k + 1.0)) * gg, r2, L)
        if k % 25 == 0 or k == iters - 1:
            consider(_project_gram(G, r2, L, cycles=30))

    # phase 2: vector polish from the best Gram so far
    if best["G"] is not None:
        phi = GramMatrix(best["G"]).vectors()
        phi_best, val = _vector_polish(phi, w, r, D, denom, seed=seed)
        if phi_best is not None and val < best["val"]:
            best["val"], best["G"] = val, phi_best @ phi_best.T
    history.append(best["val"])
    return best["val"], best["G"], history


def _alignment_classes(w, r, D, tol=1e-8):
    """Merge atoms whose distance equals (or nearly equals) the radius
    difference: feasibility then forces their directions to coincide, which
    stalls projection methods and starves the interior-point phase of slack.
    Forcing an exactly shared direction is always feasible (the distance
    clamp guarantees the cosine floor never exceeds 1), so merging keeps the
    solved value an honest upper bound; the merge tolerance perturbs it by
    O(sqrt(tol)) at most.
    Returns (class list, masses, unit-scale distance matrix between classes).
    """
    n = len(r)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # the constraint between p and q is cos(phi_p, phi_q) >= L_pq/(r_p r_q);
    # a floor at 1 pins the directions together, so merge such pairs (and
    # keep merging while any class pair's effective floor reaches 1)
    floors = (r[:, None] ** 2 + r[None, :] ** 2 - D * D) / 2.0
    while True:
        groups = {}
        for i in range(n):
            groups.setdefault(find(i), []).append(i)
        reps = sorted(groups)
        merged_any = False
        for a in range(len(reps)):
            for b in range(a + 1, len(reps)):
                pairs = [
                    (p, q)
                    for p in groups[reps[a]]
                    for q in groups[reps[b]]
                    if r[p] > 0 and r[q] > 0
                ]
                if not pairs:
                    continue
                cf = max(floors[p, q] / (r[p] * r[q]) for p, q in pairs)
                if cf >= 1 - tol and find(reps[a]) != find(reps[b]):
                    parent[find(reps[a])] = find(reps[b])
                    merged_any = True
        if not merged_any:
            break
    classes = sorted(groups.values())
    masses = np.array([sum(w[i] * r[i] for i in c) for c in classes])
    k = len(classes)
    Du = np.zeros((k, k))
    for a in range(k):
        for b in range(a + 1, k):
            cos_floor = -1.0
            for p in classes[a]:
                for q in classes[b]:
                    if r[p] > 0 and r[q] > 0:
                        cos_floor = max(cos_floor, floors[p, q] / (r[p] * r[q]))
            cos_floor = min(cos_floor, 1.0)
            Du[a, b] = Du[b, a] = float(np.sqrt(max(0.0, 2.0 - 2.0 * cos_floor)))
    return classes, masses, Du


def delta_from_data(weights, radii, dists, iters=1500, seed=0, tol=1e-8):
    """Best feasible value of the Gram program for raw (weights, radii,
    distance-matrix) data.  Scale-invariant: inputs are normalized by the
    largest radius before solving.

    Atoms forced into a common direction (distance equal to the radius gap)
    are merged first; the solver then works on one unit vector per direction
    class, which keeps the constraint set full-dimensional.
    """
    w = np.asarray(weights, float)
    r0 = np.asarray(radii, float)
    D0 = np.asarray(dists, float)
    n = len(w)
    if D0.shape != (n, n) or r0.shape != (n,):
        raise ValueError("need one radius per atom and a square distance matrix")
    if (r0 < 0).any() or (D0 < -1e-15).any():
        raise ValueError("radii and distances must be nonnegative")
    s = float(r0.max())
    if s == 0:
        raise ValueError("all atoms sit at the barycenter: the invariant is undefined")
    r = r0 / s
    D = np.maximum(D0 / s, 0.0)
    # metric consistency clamps: r is 1-Lipschitz and d <= r_p + r_q through b
    D = np.minimum(D, r[:, None] + r[None, :])
    D = np.maximum(D, np.abs(r[:, None] - r[None, :]))
    np.fill_diagonal(D, 0.0)

    denom = float(w @ (r * r))
    classes, masses, Du = _alignment_classes(w, r, D)
    ones = np.ones(len(classes))
    val, H, history = _solve_gram(masses, ones, Du, denom, iters, seed)

    # expand the class Gram back to atoms: G_pq = r_p r_q H_{C(p) C(q)}
    cls_of = np.empty(n, dtype=int)
    for ci, members in enumerate(classes):
        for i in members:
            cls_of[i] = ci
    G = (r[:, None] * r[None, :]) * H[np.ix_(cls_of, cls_of)]

    ok, viols = gram_feasibility_check(G, w, r, D, tol=tol)
    mags = [v[-1] for v in viols]
    return DeltaResult(
        value=val,
        gram=GramMatrix(G * s * s),
        weights=w,
        radii=r0.copy(),
        dists=D * s,
        history=history,
        feasible=ok,
        max_violation=max(mags) if mags else 0.0,
    )


def delta_of_measure(space, measure, iters=1500, seed=0, tol=1e-8):
    """Spreading invariant of a measure on a space: computes the barycenter,
    radii, and pairwise distances, then solves the Gram program.

    On spaces with approximate metrics (subdivided complexes) the program is
    solved again with the certified lower distance bounds; that value is
    reported in `value_with_lower_metric`.
    """
    pts = [space.point(p) for p in measure.points]
    b = space.barycenter(measure)
    n = len(pts)
    r_lo = np.zeros(n)
    r_up = np.zeros(n)
    D_lo = np.zeros((n, n))
    D_up = np.zeros((n, n))
    for i, p in enumerate(pts):
        r_lo[i], r_up[i] = space.distance_bounds(p, b)
        for j in range(i + 1, n):
            lo, up = space.distance_bounds(p, pts[j])
            D_lo[i, j] = D_lo[j, i] = lo
            D_up[i, j] = D_up[j, i] = up
    res = delta_from_data(measure.weights, r_up, D_up, iters=iters, seed=seed, tol=tol)
    res.barycenter = b
    if not (np.allclose(r_lo, r_up) and np.allclose(D_lo, D_up)):
        alt = delta_from_data(measure.weights, r_lo, D_lo, iters=iters, seed=seed, tol=tol)
        res.value_with_lower_metric = alt.value
    return res


@dataclass
class SurveyRecord:
    space_name: str
    space_kind: str
    n_atoms: int
    value: float
    feasible: bool
    max_violation: float
    elapsed: float


def delta_survey(spaces, n_measures, seed=0, atoms=(2, 6), iters=1500):
    """Spreading invariant over random measures on a list of (kind, space)
    pairs; measures cycle through the spaces."""
    from .spaces import sample_measure

    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_measures):
        kind, space = spaces[i % len(spaces)]
        n_atoms = int(rng.integers(atoms[0], atoms[1] + 1))
        mu = sample_measure(space, rng, n_atoms)
        t0 = time.perf_counter()
        try:
            res = delta_of_measure(space, mu, iters=iters, seed=int(rng.integers(1 << 31)))
        except ValueError:
            continue
        records.append(
            SurveyRecord(
                space_name=space.name,
                space_kind=kind,
                n_atoms=n_atoms,
                value=res.value,
                feasible=res.feasible,
                max_violation=res.max_violation,
                elapsed=time.perf_counter() - t0,
            )
        )
    return records


def delta_complex_survey(X, trials, atoms_max=6, seed=0, iters=1500):
    """Survey of the spreading invariant over random measures on one cube
    complex: `trials` measures with 2..atoms_max atoms each."""
    from .spaces import ComplexSpace

    space = X if hasattr(X, "sample_point") else ComplexSpace(X)
    kind = "tree" if space.dim <= 1 else "complex"
    return delta_survey([(kind, space)], trials, seed=seed, atoms=(2, atoms_max),
                        iters=iters)
