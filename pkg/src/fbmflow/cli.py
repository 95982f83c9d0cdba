"""Command line front end.

Exit codes: 0 success, 1 a certified property failed (bound violation,
failed replication, failed self-test), 2 usage or configuration error.
Report-writing commands render a PNG next to the delimited output unless
``--no-plot`` is given.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .bounds import compute_constants, default_params, hausdorff_growth_bound
from .experiment import (
    ConfigError,
    ExperimentConfig,
    FIELD_PRESETS,
    parse_field_spec,
    parse_manifold_spec,
    run_bound_experiment,
    selftest,
)
from .fbm import read_path_csv, sample_paths, write_path_csv
from .flow import integrate_flow, integrate_flow_with_tangent
from .fraccalc import SampledFunction, rl_integral, weyl_derivative
from .grid import TimeGrid
from .manifolds import measure_curve

__all__ = ["main"]

_TEST_FUNCTIONS = {
    "ones": lambda t: np.ones_like(t),
    "identity": lambda t: t.copy(),
    "sine": np.sin,
    "square": lambda t: t**2,
}


def _figure_path(out: str) -> str:
    return (out[:-4] if out.endswith(".csv") else out) + ".png"


def _write_columns(dest: str, header: list[str], columns: list[np.ndarray], comments=()) -> None:
    rows = np.column_stack(columns)
    with open(dest, "w", encoding="utf-8", newline="\n") as fout:
        for comment in comments:
            print(f"# {comment}", file=fout)
        print(",".join(header), file=fout)
        for row in rows:
            print(",".join(format(v, ".17g") for v in row), file=fout)


def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hurst", type=float, default=0.75, help="Hurst index in (0, 1)")
    parser.add_argument("--grid", type=int, default=1024, help="number of grid cells")
    parser.add_argument("--horizon", type=float, default=1.0, help="time horizon T")
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument(
        "--method",
        choices=("cholesky", "circulant"),
        default="cholesky",
        help="fBm generator",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbmflow",
        description="fractional Brownian flows: sampling, fractional calculus, "
        "pathwise growth certificates",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-fbm", help="draw an fBm path and write it to CSV")
    _add_grid_args(p)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--refinement", type=int, default=1)
    p.add_argument("--out", required=True, help="destination CSV")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("fraccalc", help="apply a fractional integral or derivative")
    p.add_argument("--op", choices=("integral", "derivative"), required=True)
    p.add_argument("--order", type=float, required=True, help="fractional order")
    p.add_argument("--side", choices=("left", "right"), default="left")
    p.add_argument(
        "--function",
        choices=sorted(_TEST_FUNCTIONS),
        help="built-in input function (alternative to --input)",
    )
    p.add_argument("--input", help="CSV from sample-fbm to use as input")
    p.add_argument("--channel", type=int, default=0, help="channel of --input to use")
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("flow", help="integrate the flow of one sampled path")
    _add_grid_args(p)
    p.add_argument("--field", default="sine2d", help="field preset or kind:key=val,... spec")
    p.add_argument("--x0", default=None, help="start point, comma separated")
    p.add_argument("--refinement", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("hausdorff", help="track a pushforward measure along one flow")
    _add_grid_args(p)
    p.add_argument("--field", default="sine2d")
    p.add_argument("--manifold", default="circle:r=1,n=2")
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser(
        "verify-bound", help="Monte Carlo certification of the growth bounds"
    )
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--field", default=None, help=f"presets: {', '.join(sorted(FIELD_PRESETS))}")
    p.add_argument("--hurst", type=float, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--method", choices=("cholesky", "circulant"), default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--manifold", default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--workers", type=int, default=None, help="defaults to $FBMFLOW_WORKERS or 1")
    p.add_argument("--out", default=None, help="report CSV destination")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("selftest", help="run the built-in property battery")
    p.add_argument(
        "--mutate-k1",
        action="store_true",
        help="corrupt the kernel constant first; a healthy battery must then fail",
    )
    return parser


def _cmd_sample_fbm(args) -> int:
    grid = TimeGrid(args.horizon, args.grid)
    path = sample_paths(
        grid,
        args.hurst,
        channels=args.channels,
        seed=args.seed,
        method=args.method,
        refinement=args.refinement,
    )
    write_path_csv(path, args.out)
    if not args.no_plot:
        from .plotting import save_path_figure

        save_path_figure(path, _figure_path(args.out))
    print(f"wrote {args.out}")
    return 0


def _cmd_fraccalc(args) -> int:
    if (args.function is None) == (args.input is None):
        raise ConfigError("give exactly one of --function or --input")
    if args.input is not None:
        path = read_path_csv(args.input)
        if not 0 <= args.channel < path.channels:
            raise ConfigError(f"--channel must lie in [0, {path.channels})")
        func = SampledFunction(path.times.copy(), path.values[:, args.channel].copy())
    else:
        grid = TimeGrid(args.horizon, args.grid)
        func = SampledFunction(grid.nodes.copy(), _TEST_FUNCTIONS[args.function](grid.nodes))
    apply_op = rl_integral if args.op == "integral" else weyl_derivative
    result = apply_op(func, args.order, side=args.side)
    _write_columns(
        args.out,
        ["t", "input", "output"],
        [func.times, func.values, result.values],
        comments=[f"op = {args.side} {args.op}, order = {args.order!r}"],
    )
    if not args.no_plot:
        from .plotting import _pyplot

        plt = _pyplot()
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        ax.plot(func.times, func.values, lw=1.0, label="input")
        ax.plot(func.times, result.values, lw=1.0, label=f"{args.side} {args.op} ({args.order:g})")
        ax.set_xlabel("t")
        ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        fig.savefig(_figure_path(args.out), dpi=150)
        plt.close(fig)
    print(f"wrote {args.out}")
    return 0


def _cmd_flow(args) -> int:
    fields = parse_field_spec(args.field)
    grid = TimeGrid(args.horizon, args.grid)
    path = sample_paths(
        grid,
        args.hurst,
        channels=fields.channels,
        seed=args.seed,
        method=args.method,
        refinement=args.refinement,
    )
    if args.x0 is None:
        x0 = np.zeros(fields.dim)
    else:
        x0 = np.array([float(part) for part in args.x0.split(",")])
    trajectory = integrate_flow(fields, path, x0, refinement=args.refinement)
    _write_columns(
        args.out,
        ["t"] + [f"x_{i}" for i in range(fields.dim)],
        [trajectory.times] + [trajectory.states[:, i] for i in range(fields.dim)],
        comments=[f"field = {args.field}", f"hurst = {args.hurst!r}", f"seed = {args.seed}"],
    )
    if not args.no_plot:
        from .plotting import save_trajectory_figure

        save_trajectory_figure(trajectory, _figure_path(args.out))
    print(f"wrote {args.out}")
    return 0


def _cmd_hausdorff(args) -> int:
    fields = parse_field_spec(args.field)
    mesh = parse_manifold_spec(args.manifold, args.points)
    if mesh.n != fields.dim:
        raise ConfigError(f"manifold lives in R^{mesh.n} but the field acts on R^{fields.dim}")
    grid = TimeGrid(args.horizon, args.grid)
    path = sample_paths(
        grid, args.hurst, channels=fields.channels, seed=args.seed, method=args.method
    )
    trajectory, tangent = integrate_flow_with_tangent(fields, path, mesh.points)
    curve = measure_curve(mesh, tangent.jacobians, trajectory.times)
    params = default_params(args.hurst)
    constants = compute_constants(params, fields, path.holder_norms(params.beta), args.horizon)
    bound = hausdorff_growth_bound(constants, mesh.m, curve.initial)
    _write_columns(
        args.out,
        ["t", "measure"],
        [curve.times, curve.values],
        comments=[
            f"field = {args.field}",
            f"manifold = {args.manifold}, points = {args.points}",
            f"hurst = {args.hurst!r}, seed = {args.seed}",
            f"bound_log2 = {bound.value_log2!r}",
        ],
    )
    if not args.no_plot:
        from .plotting import save_measure_curve_figure

        save_measure_curve_figure(curve, bound.value_log2, _figure_path(args.out))
    print(f"wrote {args.out}")
    print(f"sup measure = {curve.sup:.6g}, bound_log2 = {bound.value_log2:.3f}")
    return 0


def _cmd_verify_bound(args) -> int:
    overrides = dict(
        field_spec=args.field,
        hurst=args.hurst,
        grid_steps=args.grid,
        horizon=args.horizon,
        method=args.method,
        replications=args.replications,
        seed=args.seed,
        manifold_spec=args.manifold,
        manifold_points=args.points,
        workers=args.workers,
        out=args.out,
        make_plots=False if args.no_plot else None,
    )
    if args.config:
        config = ExperimentConfig.from_file(args.config, **overrides)
    else:
        config = ExperimentConfig(
            **{key: value for key, value in overrides.items() if value is not None}
        )
    result = run_bound_experiment(config)
    if result.summary.failures or result.summary.violations:
        return 1
    return 0


def _cmd_selftest(args) -> int:
    failures = selftest(mutate_k1=args.mutate_k1)
    return 1 if failures else 0


_COMMANDS = {
    "sample-fbm": _cmd_sample_fbm,
    "fraccalc": _cmd_fraccalc,
    "flow": _cmd_flow,
    "hausdorff": _cmd_hausdorff,
    "verify-bound": _cmd_verify_bound,
    "selftest": _cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"fbmflow: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"fbmflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
