"""Expander-family experiments: can graph families spread into a fixed space?

`UniformEmbeddingModuli` holds a pair of piecewise-linear distortion bounds
(rho1 below, rho2 above).  `obstruction_check` runs the counting argument
that blocks such embeddings: a map with Rayleigh quotient q concentrates at
least half the vertices in a ball of radius sqrt(d/q)*rho2(1) around its
barycenter, while the rho1 lower bound caps how many vertices any ball can
absorb at d^(1+rho1_inverse(2r)).  As the family grows, the cap stays put
and the half-count grows past it.  `run_experiment` wires graph generation,
spectral gaps, map optimization, obstruction records, and spreading surveys
into reproducible CSV bundles driven by a config file.
"""

from __future__ import annotations

import collections
import concurrent.futures
import configparser
import csv
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .spectral import (
    Graph,
    _as_space,
    _degree_measure,
    complete_graph,
    cycle_graph,
    lambda1_graph,
    path_graph,
    load_graph,
    rayleigh_quotient,
    sandwich_report,
    wang_lambda1,
)

__all__ = [
    "UniformEmbeddingModuli",
    "ModuliViolation",
    "ObstructionRecord",
    "random_regular_graph",
    "girth",
    "check_uniform_moduli",
    "obstruction_check",
    "run_experiment",
]


class UniformEmbeddingModuli:
    """Lower/upper distortion moduli as piecewise-linear tables.

    Both functions interpolate linearly on the shared grid and extrapolate
    with the final segment's slope, which must be positive so the moduli are
    unbounded.  `rho1_inverse(y)` is sup{t >= 0 : rho1(t) <= y} (0.0 when
    even rho1(0) exceeds y).
    """

    def __init__(self, grid, rho1_values, rho2_values):
        self.grid = np.asarray(grid, dtype=float)
        self.rho1_values = np.asarray(rho1_values, dtype=float)
        self.rho2_values = np.asarray(rho2_values, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 2:
            raise ValueError("moduli need a grid of at least 2 points")
        if self.rho1_values.shape != self.grid.shape or self.rho2_values.shape != self.grid.shape:
            raise ValueError("each table needs one value per grid point")
        if self.grid[0] != 0.0 or (np.diff(self.grid) <= 0).any():
            raise ValueError("grid must start at 0 and strictly increase")
        for name, vals in (("rho1", self.rho1_values), ("rho2", self.rho2_values)):
            if (np.diff(vals) < 0).any():
                raise ValueError(f"{name} table must be non-decreasing")
            if vals[-1] <= vals[-2]:
                raise ValueError(
                    f"{name} needs a positive final slope to stay unbounded"
                )
        if (self.rho1_values > self.rho2_values + 1e-12).any():
            raise ValueError("rho1 must not exceed rho2 on the grid")

    @classmethod
    def identity(cls):
        return cls([0.0, 1.0], [0.0, 1.0], [0.0, 1.0])

    def _eval(self, vals, t):
        t = np.asarray(t, dtype=float)
        if (t < 0).any():
            raise ValueError("moduli are defined on [0, inf)")
        out = np.interp(t, self.grid, vals)
        slope = (vals[-1] - vals[-2]) / (self.grid[-1] - self.grid[-2])
        over = t > self.grid[-1]
        out = np.where(over, vals[-1] + slope * (t - self.grid[-1]), out)
        return float(out) if out.ndim == 0 else out

    def rho1(self, t):
        return self._eval(self.rho1_values, t)

    def rho2(self, t):
        return self._eval(self.rho2_values, t)

    def rho1_inverse(self, y):
        y = float(y)
        vals, ts = self.rho1_values, self.grid
        if y < vals[0]:
            return 0.0
        if y >= vals[-1]:
            slope = (vals[-1] - vals[-2]) / (ts[-1] - ts[-2])
            return float(ts[-1] + (y - vals[-1]) / slope)
        # rightmost grid point with value <= y; the next segment rises past y
        j = int(np.searchsorted(vals, y, side="right") - 1)
        slope = (vals[j + 1] - vals[j]) / (ts[j + 1] - ts[j])
        if slope <= 0:
            return float(ts[j + 1])
        return float(ts[j] + (y - vals[j]) / slope)


# -- graph family generation -----------------------------------------------------


def random_regular_graph(n, d, seed, max_tries=2000):
    """Random simple connected d-regular graph by the pairing model.

    Draws a uniform pairing of n*d half-edges and rejects samples with
    loops, repeated edges, or a disconnected result; deterministic per seed.
    """
    n, d = int(n), int(d)
    if (n * d) % 2 == 1:
        raise ValueError("n * d is odd: a regular graph needs an even degree sum")
    if d >= n:
        raise ValueError("degree must be smaller than the vertex count")
    if d < 1:
        raise ValueError("degree must be at least 1")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        if (pairs[:, 0] == pairs[:, 1]).any():
            continue
        keys = {(min(u, v), max(u, v)) for u, v in pairs}
        if len(keys) < len(pairs):
            continue
        try:
            return Graph(n, sorted(keys))
        except ValueError:
            continue
    raise RuntimeError(
        f"no connected simple {d}-regular graph on {n} vertices in {max_tries} tries"
    )


def girth(G):
    """Length of the shortest cycle, or math.inf for trees."""
    best = math.inf
    for s in range(G.n_vertices):
        dist = [-1] * G.n_vertices
        parent = [-1] * G.n_vertices
        dist[s] = 0
        dq = collections.deque([s])
        while dq:
            u = dq.popleft()
            if 2 * dist[u] >= best:
                continue
            for w in G.adjacency[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    dq.append(w)
                elif w != parent[u]:
                    best = min(best, dist[u] + dist[w] + 1)
    return best if best < math.inf else math.inf


# -- uniform-moduli checks ---------------------------------------------------------


ModuliViolation = collections.namedtuple(
    "ModuliViolation",
    ["member", "u", "v", "side", "graph_distance", "target_distance", "bound"],
)


def check_uniform_moduli(family, moduli, tol=1e-9):
    """Verify rho1(d_G) <= d_Y <= rho2(d_G) over all vertex pairs.

    `family` is a list of (Graph, vertex map, target space) triples; returns
    the list of offending tuples, empty iff every pair in every member obeys
    both bounds within `tol`.
    """
    out = []
    for k, (G, f, Y) in enumerate(family):
        Y = _as_space(Y)
        f = list(f)
        if len(f) != G.n_vertices:
            raise ValueError("need one image point per vertex")
        for u in range(G.n_vertices):
            du = G.bfs_distances(u)
            for v in range(u + 1, G.n_vertices):
                dg = float(du[v])
                dy = Y.distance(f[u], f[v])
                lo, hi = moduli.rho1(dg), moduli.rho2(dg)
                if dy < lo - tol:
                    out.append(ModuliViolation(k, u, v, "lower", dg, dy, lo))
                if dy > hi + tol:
                    out.append(ModuliViolation(k, u, v, "upper", dg, dy, hi))
    return out


# -- the counting obstruction -------------------------------------------------------


@dataclass
class ObstructionRecord:
    graph_id: str
    n_vertices: int
    degree_bound: int
    lipschitz_c: float
    lambda_used: float
    radius: float
    count_in_ball: int
    half_vertices: int
    capacity_bound: float
    capacity_ok: bool
    verdict: str
    radius_mode: str

    def row(self):
        return [
            self.graph_id,
            self.n_vertices,
            self.degree_bound,
            self.lipschitz_c,
            self.lambda_used,
            self.radius,
            self.count_in_ball,
            self.half_vertices,
            self.capacity_bound,
            self.capacity_ok,
            self.verdict,
            self.radius_mode,
        ]


OBSTRUCTION_COLUMNS = [
    "graph_id",
    "n_vertices",
    "degree_bound",
    "lipschitz_c",
    "lambda_used",
    "radius",
    "count_in_ball",
    "half_vertices",
    "capacity_bound",
    "capacity_ok",
    "verdict",
    "radius_mode",
]


def obstruction_check(
    G, f, Y, moduli, lambda_used, radius_mode="per_graph", graph_id=None
):
    """Ball-count record for one graph/map pair.

    With c = rho2(1) and d the degree bound, the ball around the map's
    barycenter has radius sqrt(d/lambda_used)*c (`per_graph` mode, for
    lambda_used at most the map's own quotient) or sqrt(2d/lambda_used)*c
    (`family` mode, for a family-level bound).  Whenever the map's edge
    images stay within c and lambda_used does not exceed the achieved
    quotient, at least half the vertices land in the ball; the record also
    says whether that count still fits under the capacity
    d^(1+rho1_inverse(2r)) that any genuine embedding would impose.
    """
    Y = _as_space(Y)
    lam = float(lambda_used)
    if lam <= 0:
        raise ValueError("lambda_used must be positive")
    if radius_mode not in ("per_graph", "family"):
        raise ValueError("radius_mode must be 'per_graph' or 'family'")
    f = list(f)
    if len(f) != G.n_vertices:
        raise ValueError("need one image point per vertex")
    if all(Y.distance(f[0], p) <= 1e-15 for p in f[1:]):
        raise ValueError("constant map: the obstruction needs a nonconstant map")
    c = float(moduli.rho2(1.0))
    d = int(G.degrees.max())
    factor = 2 * d if radius_mode == "family" else d
    r = math.sqrt(factor / lam) * c
    mean = Y.barycenter(_degree_measure(G, f))
    count = sum(1 for p in f if Y.distance(p, mean) <= r + 1e-12)
    half = (G.n_vertices + 1) // 2
    capacity = float(d) ** (1.0 + moduli.rho1_inverse(2.0 * r))
    return ObstructionRecord(
        graph_id=graph_id or f"g{G.n_vertices}v{G.n_edges}e",
        n_vertices=G.n_vertices,
        degree_bound=d,
        lipschitz_c=c,
        lambda_used=lam,
        radius=r,
        count_in_ball=int(count),
        half_vertices=half,
        capacity_bound=capacity,
        capacity_ok=bool(count <= capacity),
        verdict="CONSISTENT" if count >= half else "INCONSISTENT",
        radius_mode=radius_mode,
    )


# -- experiment pipeline -------------------------------------------------------------


_ALLOWED_KEYS = {
    "pipeline": {
        "stages",
        "seed",
        "restarts",
        "radius_mode",
        "family_lambda",
        "delta_trials",
        "delta_atoms",
        "delta_iters",
    },
    "graphs": {"kind", "sizes", "degree", "per_size", "files"},
    "space": {"builtin", "file", "grid"},
    "moduli": {"grid", "rho1", "rho2"},
    "outputs": {"dir", "prefix"},
}

_STAGES = ("spectral", "embed", "obstruction", "delta")


def _parse_config(path):
    parser = configparser.ConfigParser(interpolation=None)
    with open(path) as fh:
        parser.read_file(fh)
    cfg = {}
    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            raise ValueError(f"unknown config section [{section}]")
        body = {}
        for key, value in parser.items(section):
            if key not in _ALLOWED_KEYS[section]:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            body[key] = value.strip()
        cfg[section] = body
    if "pipeline" not in cfg:
        raise ValueError("missing pipeline section")
    if "stages" not in cfg["pipeline"]:
        raise ValueError("pipeline needs a stages key")
    return cfg


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _build_graphs(section, seed):
    if section is None:
        raise ValueError("missing graphs section")
    kind = section.get("kind", "regular")
    if kind == "files":
        paths = [p.strip() for p in section.get("files", "").split(",") if p.strip()]
        if not paths:
            raise ValueError("graphs kind 'files' needs a files key")
        return [(os.path.basename(p), load_graph(p)) for p in paths]
    sizes = _ints(section.get("sizes", ""))
    if not sizes:
        raise ValueError("graphs section needs a sizes key")
    per_size = int(section.get("per_size", "1"))
    out = []
    if kind == "regular":
        degree = int(section.get("degree", "3"))
        for n in sizes:
            for i in range(per_size):
                G = random_regular_graph(n, degree, seed=[seed, 11, n, i])
                out.append((f"regular{degree}-{n}-{i}", G))
        return out
    makers = {"cycle": cycle_graph, "complete": complete_graph, "path": path_graph}
    if kind not in makers:
        raise ValueError(f"unknown graphs kind {kind!r}")
    for n in sizes:
        for i in range(per_size):
            out.append((f"{kind}-{n}-{i}", makers[kind](n)))
    return out


def _build_space(section):
    from .complexes import grid_complex, load_complex
    from .spaces import ComplexSpace, builtin_space

    if section is None:
        raise ValueError("missing space section")
    keys = [k for k in ("builtin", "file", "grid") if k in section]
    if len(keys) != 1:
        raise ValueError("space section needs exactly one of builtin, file, grid")
    if keys[0] == "builtin":
        return builtin_space(section["builtin"])
    if keys[0] == "file":
        return ComplexSpace(load_complex(section["file"]))
    w, _, h = section["grid"].partition("x")
    return ComplexSpace(grid_complex(int(w), int(h)))


def _build_moduli(section):
    if section is None:
        raise ValueError("missing moduli section")
    for key in ("grid", "rho1", "rho2"):
        if key not in section:
            raise ValueError(f"moduli section needs a {key} key")
    return UniformEmbeddingModuli(
        _floats(section["grid"]), _floats(section["rho1"]), _floats(section["rho2"])
    )


def _parallel_map(fn, items):
    k = int(os.environ.get("CUBECAT_THREADS", "1") or "1")
    if k > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=k) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _format_cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.12g" % float(x)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(x) for x in row])


def _fresh_dir(base, prefix):
    os.makedirs(base, exist_ok=True)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    k = 0
    while True:
        name = f"{prefix}-{stamp}" + (f"-{k}" if k else "")
        path = os.path.join(base, name)
        try:
            os.makedirs(path)
            return path
        except FileExistsError:
            k += 1


def run_experiment(config_path):
    """Run the pipeline described by a config file; returns output paths.

    Stages (chosen by [pipeline] stages): `spectral` tabulates gap and girth
    per graph, `embed` optimizes maps into the target space and records the
    resulting window checks, `obstruction` adds ball-count records and a
    moduli summary, `delta` surveys the spreading invariant on the space.
    Outputs land in a timestamped directory; file contents depend only on
    the config and seed.
    """
    cfg = _parse_config(config_path)
    pipe = cfg["pipeline"]
    stages = [s.strip() for s in pipe["stages"].split(",") if s.strip()]
    for s in stages:
        if s not in _STAGES:
            raise ValueError(f"unknown pipeline stage {s!r}")
    if not stages:
        raise ValueError("pipeline needs a stages key")
    seed = int(pipe.get("seed", "0"))
    restarts = int(pipe.get("restarts", "6"))
    radius_mode = pipe.get("radius_mode", "per_graph")
    family_lambda = float(pipe["family_lambda"]) if "family_lambda" in pipe else None

    need_graphs = any(s in stages for s in ("spectral", "embed", "obstruction"))
    need_space = any(s in stages for s in ("embed", "obstruction", "delta"))
    graphs = _build_graphs(cfg.get("graphs"), seed) if need_graphs else []
    space = _build_space(cfg.get("space")) if need_space else None
    moduli = _build_moduli(cfg.get("moduli")) if "obstruction" in stages else None
    if "obstruction" in stages and "embed" not in stages:
        raise ValueError("obstruction stage requires the embed stage")
    if hasattr(space, "X") and space.dim >= 2:
        space._graph()  # build the shared subdivision graph before threading

    out_cfg = cfg.get("outputs", {})
    out_dir = _fresh_dir(out_cfg.get("dir", "runs"), out_cfg.get("prefix", "experiment"))
    tables = {}
    summary = [f"config: {os.path.basename(config_path)}", f"seed: {seed}"]

    gaps = {}
    if "spectral" in stages:
        def spectral_row(item):
            gid, G = item
            lam = lambda1_graph(G)
            return [gid, G.n_vertices, G.n_edges, int(G.degrees.max()), lam, girth(G)]

        rows = _parallel_map(spectral_row, graphs)
        gaps = {row[0]: row[4] for row in rows}
        path = os.path.join(out_dir, "graphs.csv")
        _write_csv(path, ["graph_id", "n", "m", "max_degree", "lambda1", "girth"], rows)
        tables["graphs"] = path
        lams = [row[4] for row in rows]
        summary.append(
            "spectral: %d graphs, lambda1 in [%.12g, %.12g]"
            % (len(rows), min(lams), max(lams))
        )

    maps = {}
    if "embed" in stages:
        def embed_one(indexed):
            i, (gid, G) = indexed
            value, phi = wang_lambda1(G, space, restarts=restarts, seed=[seed, 2, i])
            return gid, G, value, phi

        results = _parallel_map(embed_one, list(enumerate(graphs)))
        rows = []
        for gid, G, value, phi in results:
            maps[gid] = (G, value, phi)
            rep = sandwich_report(G, space, delta_upper=0.5, lambda_wang=value, tol=1e-6)
            rows.append(
                [gid, rep.lambda1, rep.lambda_wang, rep.lower, rep.upper,
                 rep.upper_ok, rep.lower_ok]
            )
        path = os.path.join(out_dir, "sandwich.csv")
        _write_csv(
            path,
            ["graph_id", "lambda1", "lambda_wang", "lower", "upper", "upper_ok", "lower_ok"],
            rows,
        )
        tables["sandwich"] = path
        passed = sum(1 for r in rows if r[5] and r[6])
        summary.append(f"embed: window pass {passed}/{len(rows)}")

    if "obstruction" in stages:
        def obstruct_one(item):
            gid, (G, value, phi) = item
            lam_used = family_lambda if radius_mode == "family" else value
            rec = obstruction_check(
                G, phi, space, moduli, lam_used, radius_mode=radius_mode, graph_id=gid
            )
            violations = check_uniform_moduli([(G, phi, space)], moduli)
            lower = [v for v in violations if v.side == "lower"]
            upper = [v for v in violations if v.side == "upper"]
            n_pairs = G.n_vertices * (G.n_vertices - 1) // 2
            mod_row = [
                gid,
                n_pairs,
                len(lower),
                len(upper),
                max((v.bound - v.target_distance for v in lower), default=0.0),
                max((v.target_distance - v.bound for v in upper), default=0.0),
                not violations,
            ]
            return rec, mod_row

        ordered = [(gid, maps[gid]) for gid, _ in graphs if gid in maps]
        results = _parallel_map(obstruct_one, ordered)
        path = os.path.join(out_dir, "obstruction.csv")
        _write_csv(path, OBSTRUCTION_COLUMNS, [rec.row() for rec, _ in results])
        tables["obstruction"] = path
        mpath = os.path.join(out_dir, "moduli.csv")
        _write_csv(
            mpath,
            ["graph_id", "n_pairs", "lower_violations", "upper_violations",
             "worst_lower_gap", "worst_upper_gap", "ok"],
            [mod for _, mod in results],
        )
        tables["moduli"] = mpath
        n_consistent = sum(1 for rec, _ in results if rec.verdict == "CONSISTENT")
        n_capped = sum(1 for rec, _ in results if not rec.capacity_ok)
        summary.append(
            f"obstruction: {n_consistent}/{len(results)} consistent, "
            f"{n_capped} past the capacity bound"
        )

    if "delta" in stages:
        from .delta import delta_complex_survey

        trials = int(pipe.get("delta_trials", "40"))
        atoms = int(pipe.get("delta_atoms", "5"))
        iters = int(pipe.get("delta_iters", "1200"))
        records = delta_complex_survey(
            space, trials, atoms_max=atoms, seed=seed * 1000003 + 3, iters=iters
        )
        rows = [
            [r.space_name, r.space_kind, r.n_atoms, r.value, r.feasible, r.max_violation]
            for r in records
        ]
        path = os.path.join(out_dir, "delta.csv")
        _write_csv(
            path,
            ["space_name", "space_kind", "n_atoms", "value", "feasible", "max_violation"],
            rows,
        )
        tables["delta"] = path
        summary.append(
            "delta: %d measures, max %.12g" % (len(rows), max(r.value for r in records))
        )

    spath = os.path.join(out_dir, "summary.txt")
    with open(spath, "w") as fh:
        fh.write("\n".join(summary) + "\n")
    return {"out_dir": out_dir, "tables": tables, "summary": spath}
