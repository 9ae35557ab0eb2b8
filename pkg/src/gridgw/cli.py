"""Command-line front-end: ``gridgw {gw,fgw,bench,verify}``.

Exit codes: 0 on success, 1 on an input or configuration error (a JSON
object ``{"error": <code>, "message": ...}`` is printed), 2 when a
verification or endpoint check fails. Set ``GRIDGW_LOG`` to a logging level
name (e.g. ``debug``) for progress messages on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import io as gio
from .core import DiscreteMeasure, SolverConfig, UniformGrid1D, UniformGrid2D
from .errors import ConfigInvalid, GridGWError, NotSquareGrid
from .experiments import bench, data, images
from .fast_multiply import corrupted_binomials
from .solvers import entropic_gw, plan_discrepancy, sinkhorn, solve
from .verify import run_checks

log = logging.getLogger("gridgw")

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    """Everything a command was invoked with; echoed into its output."""

    subcommand: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        opts = {k: v for k, v in vars(ns).items() if k not in ("func", "subcommand")}
        return cls(ns.subcommand, opts)

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, **self.options}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        return cls(d.pop("subcommand"), d)


class CheckFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (exit 1), not argparse's exit 2
    def error(self, message):
        raise ConfigInvalid(message)


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _modes(text):
    return ["fast", "naive"] if text == "both" else [m.strip() for m in text.split(",") if m.strip()]


# --- input assembly ----------------------------------------------------


def _grid_for(length: int, dim: int, spacing: float, power: int):
    if dim == 1:
        return UniformGrid1D(length, spacing, power)
    side = math.isqrt(length)
    if side * side != length:
        raise NotSquareGrid(f"{length} weights do not form a square grid")
    return UniformGrid2D(side, spacing, power)


def _measures(args):
    """Return ``(u, v, default_feature_cost)`` from the command options."""
    if args.random:
        if args.n is None:
            raise ConfigInvalid("--random needs --n")
        dim = 1 if args.random == "1d" else 2
        u, v = data.random_pair(args.n, args.seed, dim=dim, power=args.k)
        if args.h is not None:
            u = DiscreteMeasure(u.weights, type(u.grid)(u.grid.shape[0], args.h, args.k))
            v = DiscreteMeasure(v.weights, type(v.grid)(v.grid.shape[0], args.h, args.k))
        return u, v, lambda: data.coordinate_cost(u.grid, v.grid)
    if args.source_image:
        if args.side is None:
            raise ConfigInvalid("image inputs need --side")
        spacing = 1.0 if args.h is None else args.h
        src = images.subsample(images.read_image(args.source_image), args.side)
        if args.target_image:
            tgt = images.subsample(images.read_image(args.target_image), args.side)
        else:
            tgt = images.TRANSFORMS[args.transform](src)
        u = images.image_measure(src, spacing, args.k)
        v = images.image_measure(tgt, spacing, args.k)
        return u, v, lambda: images.gray_level_cost(src, tgt)
    if args.source and args.target:
        wu, wv = gio.read_weights(args.source), gio.read_weights(args.target)
        hu = args.h if args.h is not None else 1.0 / max(len(wu) - 1, 1)
        hv = args.h if args.h is not None else 1.0 / max(len(wv) - 1, 1)
        if args.dim == 2:
            hu = args.h if args.h is not None else 1.0 / max(math.isqrt(len(wu)) - 1, 1)
            hv = args.h if args.h is not None else 1.0 / max(math.isqrt(len(wv)) - 1, 1)
        u = DiscreteMeasure(wu, _grid_for(len(wu), args.dim, hu, args.k))
        v = DiscreteMeasure(wv, _grid_for(len(wv), args.dim, hv, args.k))
        return u, v, lambda: data.coordinate_cost(u.grid, v.grid)
    raise ConfigInvalid("give --random, --source-image, or both --source and --target")


def _solver_config(args, theta=0.5) -> SolverConfig:
    return SolverConfig(
        epsilon=args.eps,
        tau=args.tau,
        theta=theta,
        outer_iterations=args.iters,
        sinkhorn_max_iterations=args.max_sinkhorn,
        sinkhorn_tolerance=args.tol,
        naive_kernel=args.naive_kernel,
    )


# --- commands ----------------------------------------------------------


def _solve_command(args, metric: str) -> dict:
    u, v, default_cost = _measures(args)
    cost = None
    theta = 0.5
    if metric == "fgw":
        theta = args.theta
        cost = gio.read_feature_cost(args.cost) if args.cost else default_cost()
    config = _solver_config(args, theta)
    modes = _modes(args.mode)
    results = {m: solve(u, v, cost, config.with_(gradient_mode=m)) for m in modes}
    main = results[modes[0]]
    out = {"config": RunConfig.from_namespace(args).to_dict(), "result": gio.result_payload(main)}
    if len(modes) == 2:
        out["naive_result"] = gio.result_payload(results["naive"])
        out["plan_diff_fro"] = plan_discrepancy(results["fast"].plan, results["naive"].plan)
    if args.out_plan:
        fmt = gio.write_plan(args.out_plan, main.plan, args.plan_format, args.threshold)
        out["plan_file"] = args.out_plan
        out["plan_format"] = fmt
    if metric == "fgw" and args.check_endpoint:
        out["endpoint_check"] = _endpoint_check(u, v, cost, config, main)
    return out


def _endpoint_check(u, v, cost, config, result) -> dict:
    if config.theta == 0.0:
        c = cost.values * cost.values
        ref = sinkhorn(c, u, v, config.penalty, max_iter=config.sinkhorn_max_iterations,
                       tol=config.sinkhorn_tolerance)
        diff, tol = plan_discrepancy(result.plan, ref), 1e-12
        name = "theta=0 matches entropic OT on C*C"
    elif config.theta == 1.0:
        ref = entropic_gw(u, v, config.with_(gradient_mode="fast"))
        diff, tol = plan_discrepancy(result.plan, ref.plan), 0.0
        name = "theta=1 matches entropic GW"
    else:
        raise ConfigInvalid("--check-endpoint needs --theta 0 or --theta 1")
    check = {"check": name, "plan_diff_fro": diff, "tolerance": tol, "passed": diff <= tol}
    if not check["passed"]:
        raise CheckFailed(f"endpoint check failed: {name} (difference {diff:.3e})")
    return check


def cmd_gw(args):
    return _solve_command(args, "gw")


def cmd_fgw(args):
    return _solve_command(args, "fgw")


def cmd_bench(args):
    sizes = args.sizes or args.side
    if not sizes:
        raise ConfigInvalid("bench needs --sizes or --side")
    metric = args.metric or ("gw" if args.task.startswith("random") else "fgw")
    eps = args.eps if args.eps is not None else bench.DEFAULT_EPSILON[args.task]
    config = _solver_config(argparse.Namespace(**{**vars(args), "eps": eps}), args.theta)
    options = {"power": args.k, "transform": args.transform}
    if args.images:
        options["image_paths"] = args.images
    report = bench.run_benchmark(
        args.task, sizes, repetitions=args.reps, modes=_modes(args.modes), metric=metric,
        config=config, seed=args.seed, naive_sizes=args.naive_sizes,
        warmup=not args.no_warmup, **options,
    )
    report.config["run"] = RunConfig.from_namespace(args).to_dict()
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(report.to_json() + "\n")
    if args.out_csv:
        with open(args.out_csv, "w") as fh:
            fh.write(report.to_csv())
    print(report.table())
    return None


def cmd_verify(args):
    ks = args.k or [1, 2, 3]
    ns = args.n or [16, 64, 256]
    if args.inject_fault:
        with corrupted_binomials():
            results = run_checks(ks, ns, args.solver_n)
    else:
        results = run_checks(ks, ns, args.solver_n)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CheckFailed("verification failed: " + ", ".join(failed))
    print("all checks passed")
    return None


# --- parser ------------------------------------------------------------


def _solver_options(p, default_eps=0.002):
    p.add_argument("--eps", type=float, default=default_eps, help="entropic regularization")
    p.add_argument("--tau", type=float, default=None, help="proximal weight (default: eps)")
    p.add_argument("--iters", type=int, default=10, help="outer mirror-descent iterations")
    p.add_argument("--tol", type=float, default=1e-9, help="Sinkhorn marginal tolerance")
    p.add_argument("--max-sinkhorn", type=int, default=10_000, help="Sinkhorn sweep budget")
    p.add_argument("--naive-kernel", choices=["loop", "blas"], default="loop")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=1, help="distance power")


def _solve_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    src = p.add_argument_group("inputs")
    src.add_argument("--random", choices=["1d", "2d"], help="random uniform measures")
    src.add_argument("--n", type=int, help="points (1d) or side (2d) of random measures")
    src.add_argument("--source", help="source weight CSV")
    src.add_argument("--target", help="target weight CSV")
    src.add_argument("--dim", type=int, choices=[1, 2], default=1, help="grid dimension of weight CSVs")
    src.add_argument("--source-image", help="source image (PGM or CSV)")
    src.add_argument("--target-image", help="target image; default: transform of the source")
    src.add_argument("--transform", choices=sorted(images.TRANSFORMS), default="rotation")
    src.add_argument("--side", type=int, help="subsample images to side x side")
    src.add_argument("--h", type=float, default=None, help="grid spacing")
    _solver_options(p)
    p.add_argument("--mode", choices=["fast", "naive", "both"], default="fast")
    out = p.add_argument_group("outputs")
    out.add_argument("--out-plan", help="write the plan here")
    out.add_argument("--plan-format", choices=["dense", "sparse"], default=None,
                     help="default: dense up to 1000 points, sparse above")
    out.add_argument("--threshold", type=float, default=gio.SPARSE_THRESHOLD,
                     help="sparse plans keep entries above this")
    out.add_argument("--out-json", help="also write the result JSON here")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridgw", description="Entropic (fused) Gromov-Wasserstein on uniform grids.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = _solve_parser(sub, "gw", "entropic GW between two grid measures")
    p.set_defaults(func=cmd_gw)

    p = _solve_parser(sub, "fgw", "entropic fused GW with a feature cost")
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--cost", help="feature-cost CSV matrix (default depends on the inputs)")
    p.add_argument("--check-endpoint", action="store_true",
                   help="at theta 0 or 1, compare with plain entropic OT or GW")
    p.set_defaults(func=cmd_fgw)

    p = sub.add_parser("bench", help="time fast vs naive gradients")
    p.add_argument("--task", choices=bench.TASKS, default="random1d")
    p.add_argument("--sizes", type=_int_list, help="comma-separated sizes (points in 1d, side in 2d)")
    p.add_argument("--side", type=_int_list, help="image or grid side(s), same as --sizes")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--modes", default="fast,naive", help="fast, naive, fast,naive or both")
    p.add_argument("--metric", choices=["gw", "fgw"], default=None)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--transform", choices=sorted(images.TRANSFORMS), default="rotation")
    p.add_argument("--images", nargs="+", help="one or two image files for digits/horse")
    p.add_argument("--naive-sizes", type=_int_list, default=None)
    p.add_argument("--no-warmup", action="store_true")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    _solver_options(p, default_eps=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the oracle and invariant checks")
    p.add_argument("--k", type=_int_list, help="distance powers (default 1,2,3)")
    p.add_argument("--n", type=_int_list, help="1D sizes for the multiply oracle (default 16,64,256)")
    p.add_argument("--solver-n", type=int, default=60, help="size of the solver checks")
    p.add_argument("--inject-fault", action="store_true",
                   help="test hook: corrupt a binomial coefficient")
    p.set_defaults(func=cmd_verify)
    return parser


def _configure_logging():
    level = os.environ.get("GRIDGW_LOG")
    if level:
        logging.basicConfig(level=level.upper(), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")


def _emit(payload: dict, path: Optional[str] = None):
    text = json.dumps(gio.jsonable(payload), indent=2)
    print(text)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def main(argv=None) -> int:
    _configure_logging()
    try:
        args = build_parser().parse_args(argv)
        payload = args.func(args)
        if payload is not None:
            _emit(payload, getattr(args, "out_json", None))
        return EXIT_OK
    except CheckFailed as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK
    except GridGWError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
