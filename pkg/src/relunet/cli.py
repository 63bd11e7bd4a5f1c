"""Command line: build networks, measure errors, fit estimators, run experiments.

Exit codes: 0 success, 2 usage, 3 construction or validation failure,
4 training failure.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import catalog, estimator, hierarchy, primitives
from .deep import build_deep_approximator
from .errors import (ConstructionError, OutOfDomainError, ParseError, RejectedInputError,
                     TrainingError)
from .network import count_parameters, evaluate, load, serialize
from .wide import build_wide_approximator

BUILD_KINDS = ["identity", "square", "mult", "multd", "poly", "indicator", "test", "trunc",
               "wide", "deep", "t1", "t2"]
SPECIAL_TARGETS = {
    "identity": lambda X: X[:, 0],
    "square": lambda X: X[:, 0] ** 2,
    "product": lambda X: np.prod(X, axis=1),
}


class UsageError(Exception):
    pass


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def summary(net):
    L, r = net.depth, net.width
    W = count_parameters(net.input_dim, L, r) if L else net.input_dim + 1
    return f"L={L} r={r} W={W} constant_width={net.is_constant_width()}"


# ---------------------------------------------------------------- build


def _poly_coeffs(d, N, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=len(primitives.monomials(d, N)))


def _target(args):
    if args.target in SPECIAL_TARGETS:
        raise UsageError(f"target {args.target!r} is only available to superr")
    return catalog.make_target(args.target, args.d, args.p)


def build_network(args):
    kind = args.kind
    if kind == "identity":
        return primitives.build_identity(args.t, args.d)
    if kind == "square":
        return primitives.build_square(args.R, args.a)
    if kind == "mult":
        return primitives.build_mult(args.R, args.a)
    if kind == "multd":
        return primitives.build_mult_d(args.R, args.a, args.d)
    if kind == "poly":
        N = 2 if args.q is None else args.q
        return primitives.build_poly(args.R, args.a, N, args.d, _poly_coeffs(args.d, N, args.seed))
    if kind == "indicator":
        return primitives.build_indicator(args.R, np.full(args.d, args.lo), np.full(args.d, args.hi))
    if kind == "test":
        return primitives.build_test(args.R, args.d)
    if kind == "trunc":
        return primitives.build_trunc(args.R, args.B)
    if kind == "wide":
        return build_wide_approximator(_target(args), args.a, args.M)[0]
    if kind == "deep":
        return build_deep_approximator(_target(args), args.a, args.M)[0]
    model = hierarchy.toy_model() if args.model == "toy" else hierarchy.fig2_model()
    builder = hierarchy.build_t1 if kind == "t1" else hierarchy.build_t2
    return builder(model, args.M)[0]


def cmd_build(args):
    net = build_network(args)
    if args.out:
        write_atomic(args.out, serialize(net))
    print(summary(net))
    return 0


# ---------------------------------------------------------------- superr


def grid_points(d, a, n):
    """About n points: a uniform grid with round(n^(1/d)) nodes per axis on [-a, a]^d."""
    k = max(2, round(n ** (1.0 / d)))
    axes = [np.linspace(-a, a, k)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def inner_mask(X, a, M, margin):
    """Points at least margin * side away from every face of their fine cube (side 2a/M^2)."""
    side = 2.0 * a / M ** 2
    pos = (X + a) / side
    frac = pos - np.floor(pos)
    return np.all((frac >= margin) & (frac <= 1.0 - margin), axis=1)


def _target_fn(args, d):
    if args.target in SPECIAL_TARGETS:
        return SPECIAL_TARGETS[args.target]
    f = catalog.make_target(args.target, d if args.d is None else args.d, args.p)
    if f.d != d:
        raise OutOfDomainError(f"target {args.target} has dimension {f.d}, network has {d}")
    return f


def errors_on_grid(net, fn, d, a, grid_n, M=None, margin=0.0):
    X = grid_points(d, a, grid_n)
    if margin > 0:
        if M is None:
            raise UsageError("--inner-margin needs --M")
        X = X[inner_mask(X, a, M, margin)]
    diff = np.abs(evaluate(net, X) - fn(X))
    return float(diff.max()), float(np.sqrt(np.mean(diff ** 2))), X.shape[0]


def cmd_superr(args):
    rows = []
    if args.M_list:
        if args.d is None:
            args.d = 1
        f = _target(args)
        builder = build_wide_approximator if args.kind == "wide" else build_deep_approximator
        for M in args.M_list:
            net = builder(f, args.a, M)[0]
            sup, l2, npts = errors_on_grid(net, f, f.d, args.a, args.grid_n, M, args.inner_margin)
            rows.append((M, sup, l2, npts))
        slope = np.polyfit(np.log([r[0] for r in rows]), np.log([r[1] for r in rows]), 1)[0]
        lines = ["M,sup,l2,points"] + [f"{M},{s!r},{l!r},{n}" for M, s, l, n in rows]
        lines.append(f"# slope {slope:.4f}")
    else:
        if not args.net:
            raise UsageError("superr needs --net or --M-list")
        net = load(args.net)
        fn = _target_fn(args, net.input_dim)
        sup, l2, npts = errors_on_grid(net, fn, net.input_dim, args.a, args.grid_n, args.M, args.inner_margin)
        lines = ["sup,l2,points", f"{sup!r},{l2!r},{npts}"]
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, text)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- fit / experiment


def cmd_fit(args):
    model = estimator.experiment_model(args.model)
    n = args.n_list[0] if args.n_list else 400
    if isinstance(model, estimator.NetworkTarget):
        L, r = model.net.depth, model.net.width
    else:
        L, r = estimator.choose_architecture(n, estimator.model_pairs(model), args.rule)
    if args.L:
        L = args.L
    if args.r:
        r = args.r
    data = estimator.generate_data(model, n, args.sigma, seed=[args.seed, 0])
    cfg = estimator.TrainingConfig(L, r, steps=args.steps, lr=args.lr, clip=args.clip, seed=args.seed)
    net, rep = estimator.fit(data, cfg)
    pred = estimator.truncate_estimator(net, estimator.truncation_level(n, cfg.c3))
    l2, se = estimator.measure_l2(pred, model, args.n_mc, seed=[args.seed, 1])
    if args.out:
        write_atomic(args.out, serialize(net))
    print(f"n={n} rule={args.rule} L={L} r={r} W={count_parameters(model.d, L, r)} "
          f"initial_risk={rep['initial_risk']:.6g} train_risk={rep['train_risk']:.6g} l2_mc={l2:.6g} se={se:.3g}")
    return 0


def cmd_experiment(args):
    doc = {}
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            doc = json.load(fh)
    if args.n_list:
        doc["n_list"] = args.n_list
    if args.rule:
        doc["rules"] = [args.rule]
    if args.replications:
        doc["replications"] = args.replications
    if args.seed is not None:
        doc["seed"] = args.seed
    exp = estimator.RegressionExperiment.from_dict(doc)
    rows = estimator.run_experiment(exp)
    text = estimator.rows_to_csv(rows)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    for (rule, n), med in sorted(estimator.median_l2(rows).items()):
        print(f"rule={rule} n={n} median_l2={med:.6g}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- parser


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from err


def make_parser():
    p = argparse.ArgumentParser(prog="relunet", description="Explicit ReLU network constructions.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct a network and write its JSON document")
    b.add_argument("kind", choices=BUILD_KINDS)
    b.add_argument("--R", type=int, default=6, help="precision parameter")
    b.add_argument("--a", type=float, default=1.0, help="domain radius")
    b.add_argument("--M", type=int, default=2, help="partition parameter")
    b.add_argument("--d", type=int, default=1, help="input dimension")
    b.add_argument("--p", type=float, default=None, help="smoothness of the target")
    b.add_argument("--q", type=int, default=None, help="polynomial degree (poly)")
    b.add_argument("--t", type=int, default=1, help="identity depth")
    b.add_argument("--B", type=int, default=4, help="floor range (trunc)")
    b.add_argument("--lo", type=float, default=-0.5, help="indicator lower corner")
    b.add_argument("--hi", type=float, default=0.5, help="indicator upper corner")
    b.add_argument("--target", default="sinprod", help="catalog target (wide, deep)")
    b.add_argument("--model", choices=["toy", "fig2"], default="toy", help="hierarchical model (t1, t2)")
    b.add_argument("--seed", type=int, default=0, help="seed for random polynomial coefficients")
    b.add_argument("-o", "--out", help="output file")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("superr", help="sup-norm and L2 grid errors")
    s.add_argument("--net", help="network JSON file")
    s.add_argument("--target", default="sinprod", help="catalog target or identity/square/product")
    s.add_argument("--kind", choices=["wide", "deep"], default="wide", help="builder for --M-list")
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--d", type=int, default=None, help="target dimension (defaults to the network's)")
    s.add_argument("--p", type=float, default=None)
    s.add_argument("--M", type=int, default=None, help="partition parameter for --inner-margin")
    s.add_argument("--M-list", dest="M_list", type=_int_list, default=None, help="e.g. 2,3,4")
    s.add_argument("--grid-n", dest="grid_n", type=int, default=10000)
    s.add_argument("--inner-margin", dest="inner_margin", type=float, default=0.0)
    s.add_argument("-o", "--out", help="CSV output file")
    s.set_defaults(func=cmd_superr)

    f = sub.add_parser("fit", help="fit one least-squares network estimator")
    f.add_argument("--model", choices=["toy", "fig2", "teacher"], default="toy",
                   help="regression function; teacher is the f_sq net with R = 2, fitted in its own class")
    f.add_argument("--n-list", dest="n_list", type=_int_list, default=None, help="sample size (first entry)")
    f.add_argument("--rule", choices=["a", "b"], default="a")
    f.add_argument("--L", type=int, default=None, help="override depth")
    f.add_argument("--r", type=int, default=None, help="override width")
    f.add_argument("--steps", type=int, default=1500)
    f.add_argument("--lr", type=float, default=0.02)
    f.add_argument("--clip", type=float, default=1.0, help="gradient-norm clipping level")
    f.add_argument("--sigma", type=float, default=0.1)
    f.add_argument("--n-mc", dest="n_mc", type=int, default=20000)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("-o", "--out", help="write the fitted network")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("experiment", help="replicated estimator runs written as CSV")
    e.add_argument("--spec", help="JSON experiment description")
    e.add_argument("--n-list", dest="n_list", type=_int_list, default=None)
    e.add_argument("--rule", choices=["a", "b"], default=None)
    e.add_argument("--replications", type=int, default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("-o", "--out", help="CSV output file")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        parser.error(str(err))
    except TrainingError as err:
        print(f"training failed: {err}", file=sys.stderr)
        return 4
    except (ConstructionError, RejectedInputError, OutOfDomainError, ParseError, OSError,
            json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
