"""Command-line front end.

Exit codes: 0 on success, 1 on usage errors, 2 when a computation raises
one of the library errors (the error class is named in the message).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import coefficients as co
from . import generators as gen
from .errors import OTFlatError
from .geometry import Ball, DyadicCube
from .measures import DiscreteMeasure, load_measure
from .multiscale import carleson_scan, localization_experiment, localization_ratio
from .transport import _grid_shape, knothe_map, wasserstein

COMMANDS = ("gen", "transport", "coeff", "scan", "localize", "knothe")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    inputs: list = field(default_factory=list)
    output: Optional[str] = None
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _depth(text: str) -> tuple:
    try:
        lo, hi = (int(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"--depth expects lo:hi, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise UsageError(f"--depth needs 0 <= lo <= hi, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="otflat", description="Transport-based flatness coefficients.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def out(p):
        p.add_argument("-o", "--output", default=None, help="output path (stdout if omitted)")

    g = sub.add_parser("gen", help="generate a measure as CSV or JSON")
    g.add_argument("family", choices=("graph", "flat", "cantor", "density"))
    g.add_argument("--n", type=int, default=1)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--lip", type=float, default=0.3, help="kink slope of the graph profile")
    g.add_argument("--res", type=int, default=256, help="atoms per parameter axis")
    g.add_argument("--generation", type=int, default=4)
    g.add_argument("--bounds", default="0.5,2", help="density bounds low,high")
    g.add_argument("--corner", default=None)
    g.add_argument("--side", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=None)
    out(g)

    t = sub.add_parser("transport", help="exact W_p between two measures")
    t.add_argument("--p", type=float, default=2.0)
    t.add_argument("source")
    t.add_argument("target")
    out(t)

    c = sub.add_parser("coeff", help="flatness coefficient of a measure on a ball")
    c.add_argument("--kind", default="alpha",
                   choices=("alpha", "beta", "beta_inf", "bbeta_inf", "alpha_dist"))
    c.add_argument("--p", type=float, default=2.0)
    c.add_argument("--n", type=int, default=1)
    c.add_argument("--center", required=True)
    c.add_argument("--radius", type=float, required=True)
    c.add_argument("--spacing", type=float, default=None)
    c.add_argument("measure")
    out(c)

    s = sub.add_parser("scan", help="dyadic Carleson scan")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--depth", default="0:4")
    s.add_argument("--corner", default=None, help="root cube corner (default origin)")
    s.add_argument("--side", type=float, default=1.0)
    s.add_argument("--spacing", type=float, default=200.0,
                   help="lattice spacing as a divisor of the ball radius")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("measure")
    out(s)

    lo = sub.add_parser("localize", help="localization ratio on a ball")
    lo.add_argument("--p", type=float, default=2.0)
    lo.add_argument("--center", default=None)
    lo.add_argument("--radius", type=float, default=None)
    lo.add_argument("--trials", type=int, default=None)
    lo.add_argument("--seed", type=int, default=None)
    lo.add_argument("--res", type=int, default=16)
    lo.add_argument("inputs", nargs="*")
    out(lo)

    k = sub.add_parser("knothe", help="Knothe map pushing sigma to (1 + h) sigma")
    k.add_argument("--corner", required=True)
    k.add_argument("--side", type=float, required=True)
    k.add_argument("--h", required=True, dest="hfile",
                   help="CSV with one column 'h', one row per atom of the measure")
    k.add_argument("measure")
    out(k)
    return ap


def _validate(args) -> RunConfig:
    opts = {k: v for k, v in sorted(vars(args).items())
            if k not in ("command", "output", "source", "target", "measure", "inputs", "hfile")}
    inputs = []
    for name in ("source", "target", "measure", "hfile"):
        if getattr(args, name, None) is not None:
            inputs.append(getattr(args, name))
    inputs.extend(getattr(args, "inputs", None) or [])
    for path in inputs:
        if not os.path.isfile(path):
            raise UsageError(f"input not found: {path}")
    if getattr(args, "p", 1.0) < 1:
        raise UsageError("--p must be at least 1")
    cmd = args.command
    if cmd in ("coeff",):
        if args.radius <= 0:
            raise UsageError("--radius must be positive")
        opts["center"] = _floats(args.center)
    if cmd == "scan":
        opts["depth"] = list(_depth(args.depth))
        if args.jobs < 1:
            raise UsageError("--jobs must be positive")
    if cmd == "localize":
        if args.trials is not None:
            if args.seed is None:
                raise UsageError("--trials requires an explicit --seed")
            if args.trials < 1:
                raise UsageError("--trials must be positive")
            if inputs:
                raise UsageError("--trials generates its own measures; drop the input files")
        else:
            if len(inputs) != 2 or args.center is None or args.radius is None:
                raise UsageError("localize needs two measures with --center and --radius, "
                                 "or --trials with --seed")
            opts["center"] = _floats(args.center)
    if cmd == "gen" and args.family == "density" and args.seed is None:
        raise UsageError("gen density requires --seed")
    if cmd == "gen" and args.n >= args.d:
        raise UsageError("--n must be smaller than --d")
    for key in ("corner",):
        if getattr(args, key, None) is not None:
            opts[key] = _floats(getattr(args, key))
    return RunConfig(cmd, inputs, args.output, opts)


def _root(args, d):
    corner = _floats(args.corner) if args.corner else [0.0] * d
    if len(corner) != d:
        raise UsageError("--corner has the wrong dimension")
    return DyadicCube.root(corner, args.side)


def _cmd_gen(args, cfg):
    fam = args.family
    if fam == "cantor":
        return gen.gen_cantor(args.generation)
    corner = _floats(args.corner) if args.corner else None
    if fam == "density":
        corner = corner or [0.0] * args.d
        return gen.gen_density_cube((np.asarray(corner), args.side), _floats(args.bounds),
                                    args.res, args.seed)
    dom = ((tuple(corner) if corner else (0.0,) * args.n), args.side)
    if fam == "flat":
        return gen.gen_flat(args.res, args.n, args.d, dom)
    extra = args.d - args.n
    slope = args.lip

    def profile(X):
        out = np.zeros((X.shape[0], extra))
        out[:, 0] = slope * np.abs(X[:, 0] - (dom[0][0] + 0.5 * dom[1]))
        return out

    return gen.gen_graph(gen.GraphSpec(profile, slope, args.n, args.d, dom, args.res))


def _cmd_transport(args, cfg):
    a, b = load_measure(args.source), load_measure(args.target)
    plan = wasserstein(args.p, a, b)
    return {"cost": plan.cost, "p": plan.p,
            "pairs": [[int(i), int(j), float(m)] for i, j, m in plan.pairs]}


def _cmd_coeff(args, cfg):
    mu = load_measure(args.measure)
    center = cfg.options["center"]
    if len(center) != mu.dim:
        raise UsageError("--center has the wrong dimension")
    B = Ball(center, args.radius)
    kind = args.kind
    if kind == "alpha":
        rep = co.alpha_p(args.p, mu, B, n=args.n, spacing=args.spacing)
    elif kind == "beta":
        rep = co.beta_p(args.p, mu, B, n=args.n)
    elif kind == "beta_inf":
        rep = co.beta_inf(mu, B, n=args.n)
    elif kind == "bbeta_inf":
        rep = co.b_beta_inf(mu, B, n=args.n, spacing=args.spacing)
    else:
        rep = co.alpha_dist(mu, B, n=args.n, spacing=args.spacing)
    return rep.to_dict()


def _cmd_scan(args, cfg):
    mu = load_measure(args.measure)
    root = _root(args, mu.dim)
    rep = carleson_scan(mu, root, _depth(args.depth), p=args.p, n=args.n,
                        spacing_div=args.spacing, jobs=args.jobs)
    return rep


def _cmd_localize(args, cfg):
    if args.trials is not None:
        res = localization_experiment(args.trials, args.seed, p=args.p, resolution=args.res)
        return res
    mu, nu = (load_measure(p) for p in cfg.inputs)
    B = Ball(cfg.options["center"], args.radius)
    return localization_ratio(mu, nu, B, p=args.p).to_dict()


def _cmd_knothe(args, cfg):
    sigma = load_measure(args.measure)
    hv = np.loadtxt(args.hfile, delimiter=",", skiprows=1, ndmin=1).reshape(-1)
    if hv.size != len(sigma):
        raise UsageError("h file must have one row per atom")
    lookup = {tuple(x): v for x, v in zip(sigma.points.tolist(), hv)}
    corner = _floats(args.corner)
    U = knothe_map((np.asarray(corner), args.side), sigma,
                   lambda X: np.array([lookup[tuple(x)] for x in np.asarray(X).tolist()]))
    target = sigma.weights * (1.0 + hv)
    cells = U.pushforward_cells()
    _, idx = _grid_shape(sigma.points, U.corner, U.side)
    pushed = cells[tuple(idx.T)]
    return {"max_displacement": U.max_displacement(),
            "atom_displacement": float(np.linalg.norm(U.assignment - sigma.points, axis=1).max()),
            "h_sup": float(np.abs(hv).max()),
            "marginal_error": float(np.abs(pushed - target).max()),
            "image": np.asarray(U.assignment).tolist()}


def _emit(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        cfg = _validate(args)
    except UsageError as exc:
        print(f"otflat: usage error: {exc}", file=sys.stderr)
        return 1
    handler = {"gen": _cmd_gen, "transport": _cmd_transport, "coeff": _cmd_coeff,
               "scan": _cmd_scan, "localize": _cmd_localize, "knothe": _cmd_knothe}[cfg.command]
    try:
        result = handler(args, cfg)
    except UsageError as exc:
        print(f"otflat: usage error: {exc}", file=sys.stderr)
        return 1
    except OTFlatError as exc:
        name = type(exc).__name__
        msg = str(exc)
        print(f"otflat: {msg if msg.startswith(name) else f'{name}: {msg}'}", file=sys.stderr)
        return 2
    if isinstance(result, DiscreteMeasure):
        path = cfg.output
        if path is not None and path.endswith(".json"):
            text = result.to_json()
        else:
            text = result.to_csv()
    elif cfg.command == "scan":
        if cfg.output is not None and cfg.output.endswith(".csv"):
            text = result.to_csv()
        else:
            text = result.to_jsonl(config=cfg.to_dict())
    else:
        text = json.dumps({"config": cfg.to_dict(), "result": result}, sort_keys=True) + "\n"
    _emit(text, cfg.output)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
