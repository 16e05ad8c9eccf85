"""Command-line interface.

Subcommands cover the whole library surface: complex validation, geodesics
and barycenters, tangent-cone distortion sampling, spreading-invariant
estimates and surveys, graph spectral gaps, graph-to-complex spectral
optimization, the sandwich report, and declarative experiment runs.
"""

import argparse
import json
import math
import sys

import numpy as np

from .complexes import ComplexPoint, load_complex, validate_complex
from .cones import orthant_distance, sample_cone_point
from .delta import delta_complex_survey, delta_of_measure
from .embedding import axis_embedding, tangent_cone_at
from .harness import run_experiment
from .spaces import (
    ComplexSpace,
    ConeSpace,
    builtin_space,
    measure_from_json,
    point_from_json,
    point_to_json,
)
from .spectral import (
    lambda1_graph,
    load_graph,
    rayleigh_quotient,
    sandwich_report,
    wang_lambda1,
)


def _fmt(x):
    if isinstance(x, float):
        return "%.12g" % x
    return str(x)


def _load_space(arg, m=16):
    """Resolve a --space argument: builtin:NAME, euclidean:N, or a file."""
    if ":" in arg and not arg.endswith(".json"):
        head = arg.split(":", 1)[0]
        if head in ("builtin", "euclidean"):
            return builtin_space(arg)
    return ComplexSpace(load_complex(arg), m=m)


def _parse_point(space, text):
    """Parse a point argument.

    Accepts a bare vertex id, JSON (vertex, corners+coords, coordinate
    list), or ``axis:value`` pairs for cone points.
    """
    text = text.strip()
    try:
        return point_from_json(space, int(text))
    except (ValueError, TypeError):
        pass
    if text and text[0] in "[{" or text.lstrip("-").replace(".", "").isdigit():
        return point_from_json(space, json.loads(text))
    if ":" in text:
        coords = {}
        for part in text.split(","):
            axis, _, value = part.partition(":")
            coords[int(axis)] = float(value)
        return point_from_json(space, {"coords": coords})
    if "," in text:
        return point_from_json(space, [float(v) for v in text.split(",")])
    raise ValueError(f"cannot parse point {text!r}")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(c) for c in row) for row in rows]
    body = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(body)
    else:
        with open(path, "w") as fh:
            fh.write(body)


# -- subcommand handlers ------------------------------------------------------------


def cmd_validate(args):
    with open(args.file) as fh:
        raw = json.load(fh)
    X, violations = validate_complex(raw)
    for v in violations:
        print(str(v))
    if violations:
        return 1
    dims = [X.cell_dim(c) for c in X.maximal_cells()]
    print(
        f"ok: {len(raw.get('edges', []))} edges, "
        f"{len(raw.get('cubes', []))} cubes, dimension {max(dims)}"
    )
    return 0


def _space_for_file(args):
    X = load_complex(args.file)
    if getattr(args, "cone", None) is not None:
        return ConeSpace(tangent_cone_at(X, ComplexPoint.vertex(args.cone)))
    return ComplexSpace(X, m=getattr(args, "m", 16))


def cmd_geodesic(args):
    space = _space_for_file(args)
    p = _parse_point(space, args.src)
    q = _parse_point(space, args.dst)
    if hasattr(space, "distance_bounds"):
        lo, hi = space.distance_bounds(p, q)
        print(f"distance {_fmt(hi)} (certified window [{_fmt(lo)}, {_fmt(hi)}])")
    else:
        print(f"distance {_fmt(space.distance(p, q))}")
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        g = space.geodesic(p, q, t)
        print(f"t={t:g}: {json.dumps(point_to_json(space, g))}")
    return 0


def cmd_barycenter(args):
    space = _space_for_file(args)
    with open(args.measure) as fh:
        mu = measure_from_json(space, json.load(fh))
    if isinstance(space, ConeSpace):
        bary = space.barycenter(mu, seed=args.seed)
    else:
        bary = space.barycenter(mu)
    value = sum(
        w * space.distance(bary, p) ** 2 for p, w in zip(mu.points, mu.weights)
    )
    print(json.dumps(point_to_json(space, bary)))
    print(f"mean squared distance {_fmt(float(value))}")
    return 0


def cmd_distortion(args):
    X = load_complex(args.file)
    T = tangent_cone_at(X, ComplexPoint.vertex(args.vertex))
    phi = axis_embedding(T)
    rng = np.random.default_rng(args.seed)
    rows, bad = [], 0
    lo_bound = 1.0 / math.sqrt(2.0)
    for i in range(args.samples):
        x = sample_cone_point(T, rng)
        y = sample_cone_point(T, rng)
        d_cone = orthant_distance(T, x, y)
        d_flat = float(np.linalg.norm(phi(x) - phi(y)))
        ratio = d_flat / d_cone if d_cone > 0 else 1.0
        if not lo_bound - 1e-9 <= ratio <= 1.0 + 1e-9:
            bad += 1
        rows.append((i, d_cone, d_flat, ratio))
    _write_csv(args.csv, ["pair", "d_cone", "d_embedded", "ratio"], rows)
    ratios = [r[3] for r in rows]
    print(
        f"{len(rows)} pairs, ratio in [{_fmt(min(ratios))}, {_fmt(max(ratios))}], "
        f"{bad} outside the sqrt(2) window"
    )
    return 1 if bad else 0


def cmd_delta(args):
    space = ComplexSpace(load_complex(args.file))
    with open(args.measure) as fh:
        mu = measure_from_json(space, json.load(fh))
    res = delta_of_measure(space, mu, iters=args.iters, seed=args.seed)
    print(f"delta {_fmt(res.value)}")
    print(f"feasible {int(res.feasible)}  max_violation {_fmt(res.max_violation)}")
    return 0


def cmd_delta_survey(args):
    X = load_complex(args.file)
    records = delta_complex_survey(
        X, args.trials, atoms_max=args.atoms, seed=args.seed, iters=args.iters
    )
    header = ["space_name", "space_kind", "n_atoms", "value", "feasible", "max_violation"]
    rows = [
        (r.space_name, r.space_kind, r.n_atoms, r.value, int(r.feasible), r.max_violation)
        for r in records
    ]
    _write_csv(args.csv, header, rows)
    worst = max(r.value for r in records)
    print(f"{len(records)} measures, max delta {_fmt(worst)}")
    return 0


def cmd_lambda1(args):
    G = load_graph(args.graph)
    print(_fmt(lambda1_graph(G)))
    return 0


def cmd_wang_lambda1(args):
    G = load_graph(args.graph)
    space = _load_space(args.space)
    value, phi = wang_lambda1(G, space, restarts=args.restarts, seed=args.seed)
    print(_fmt(value))
    if args.witness:
        with open(args.witness, "w") as fh:
            json.dump([point_to_json(space, p) for p in phi], fh)
    return 0


def cmd_sandwich(args):
    G = load_graph(args.graph)
    space = _load_space(args.space)
    value, _ = wang_lambda1(G, space, restarts=args.restarts, seed=args.seed)
    report = sandwich_report(G, space, args.delta, value, tol=args.tol)
    row = report.row()
    _write_csv(args.csv, list(row), [tuple(row.values())])
    return 0 if report.ok else 1


def cmd_run(args):
    info = run_experiment(args.config)
    print(f"wrote {info['out_dir']}")
    for name in sorted(info["tables"]):
        print(f"  {name}: {info['tables'][name]}")
    print(f"  summary: {info['summary']}")
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cubecat",
        description="Geometry of finite cube complexes: geodesics, barycenters, "
        "embeddings, spreading and spectral invariants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a complex file; violations one per line")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("geodesic", help="geodesic between two points")
    p.add_argument("file")
    p.add_argument("--from", dest="src", required=True, metavar="POINT")
    p.add_argument("--to", dest="dst", required=True, metavar="POINT")
    p.add_argument("--cone", type=int, default=None, metavar="VERTEX",
                   help="work in the tangent cone at this vertex")
    p.add_argument("-m", type=int, default=16, help="edge subdivision for bounds")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("barycenter", help="barycenter of a weighted point measure")
    p.add_argument("file")
    p.add_argument("--measure", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cone", type=int, default=None, metavar="VERTEX")
    p.add_argument("-m", type=int, default=16)
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("distortion",
                       help="sample pair distortion of the tangent-cone embedding")
    p.add_argument("file")
    p.add_argument("--vertex", type=int, required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_distortion)

    p = sub.add_parser("delta", help="spreading invariant of one measure")
    p.add_argument("file")
    p.add_argument("--measure", required=True)
    p.add_argument("--iters", type=int, default=1500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("delta-survey", help="spreading invariant over random measures")
    p.add_argument("file")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--atoms", type=int, default=6)
    p.add_argument("--iters", type=int, default=1500)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_delta_survey)

    p = sub.add_parser("lambda1", help="normalized spectral gap of a graph")
    p.add_argument("graph")
    p.set_defaults(func=cmd_lambda1)

    p = sub.add_parser("wang-lambda1",
                       help="spectral constant of a graph against a target space")
    p.add_argument("graph")
    p.add_argument("--space", required=True,
                   help="complex file, builtin:segment, builtin:tripod, or euclidean:N")
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--witness", default=None, help="write the best vertex map here")
    p.set_defaults(func=cmd_wang_lambda1)

    p = sub.add_parser("sandwich",
                       help="check the two-sided window around the flat gap")
    p.add_argument("graph")
    p.add_argument("--space", required=True)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.5,
                   help="spreading bound for the lower window edge")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_sandwich)

    p = sub.add_parser("run", help="run a declarative experiment config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, ArithmeticError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
