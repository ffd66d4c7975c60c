"""Command-line entry point: ``lsqhelm <command> [options]``.

Every option can also be given as ``key = value`` in a file passed with
``--config``; options on the command line win.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import (
    SOLVERS,
    ExperimentConfig,
    ResultRow,
    load_config_file,
    run_order_sweep,
    run_pollution_sweep,
    run_precond_study,
    run_single,
    write_config,
    write_csv,
)

COMMANDS = ("run", "order-sweep", "pollution-sweep", "precond-study", "verify")


def _optional_float(text):
    return None if str(text).lower() in ("", "none", "auto") else float(text)


def _optional_int(text):
    return None if str(text).lower() in ("", "none", "auto") else int(text)


def _add_experiment_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value file")
    p.add_argument("--problem", choices=("duct", "lens", "manufactured"))
    p.add_argument("--omega", help="angular frequency, or a comma list (accepts 20pi)")
    p.add_argument("--omega-h", type=_optional_float, help="fixed omega*h for sweeps over omega")
    p.add_argument("--k-mode", type=int, help="duct mode number k")
    p.add_argument("--n", help="elements per unit length, or a comma list")
    p.add_argument("--q", type=int, help="interface polynomial degree")
    p.add_argument("--p", type=int, help="element polynomial degree (>= q + 2)")
    p.add_argument("--rho", type=float, help="interface Robin parameter")
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--tol", type=float, help="relative residual tolerance")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--subdomain", type=_optional_float,
                   help="subdomain side length d (default about sqrt(h))")
    p.add_argument("--quad-order", type=_optional_int)
    p.add_argument("--workers", type=int, help="worker count (recorded; runs single-process)")
    p.add_argument("--degree", type=int, help="degree of the manufactured polynomial")
    p.add_argument("--out", help="output directory for CSV, JSON and figures")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsqhelm",
        description="Least-squares interface solver for Helmholtz problems.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "one solve, one result row",
        "order-sweep": "refine h at fixed omega; report convergence order",
        "pollution-sweep": "grow omega at fixed omega*h; report pollution index",
        "precond-study": "CG vs PCG iteration counts and growth rates",
    }
    for name, text in helps.items():
        _add_experiment_options(sub.add_parser(name, help=text))
    sub.add_parser("verify", help="basis identities, dense oracle, exactness, inf-sup")
    return parser


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config is not None:
        values.update(load_config_file(args.config))
    for key in ExperimentConfig.__dataclass_fields__:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    kinds = {"k_mode": int, "q": int, "p": int, "max_iter": int, "workers": int,
             "degree": int, "rho": float, "tol": float,
             "omega_h": _optional_float, "subdomain": _optional_float,
             "quad_order": _optional_int}
    for key, conv in kinds.items():
        if key in values and isinstance(values[key], str):
            values[key] = conv(values[key])
    return ExperimentConfig(**values)


def _print_rows(rows: list[ResultRow]) -> None:
    cols = ["omega", "h", "dofs", "err", "order", "delta", "n_iter", "n_iter_cg",
            "n_iter_pcg", "rho_iter_cg", "rho_iter_pcg", "converged"]
    print("  ".join(f"{c:>12}" for c in cols))
    for r in rows:
        cells = []
        for c in cols:
            v = getattr(r, c)
            if v is None:
                cells.append(f"{'-':>12}")
            elif isinstance(v, float):
                cells.append(f"{v:12.4g}")
            else:
                cells.append(f"{str(v):>12}")
        print("  ".join(cells))


def _verify() -> int:
    from .verification import run_all

    results = run_all()
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        return _verify()
    try:
        cfg = make_config(args)
        runner = {
            "run": lambda c: [run_single(c)],
            "order-sweep": run_order_sweep,
            "pollution-sweep": run_pollution_sweep,
            "precond-study": run_precond_study,
        }[args.command]
        rows = runner(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_rows(rows)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(rows, out / "results.csv")
        write_config(cfg, out / "config.json")
        from .plotting import render_figures, write_plot_data

        write_plot_data(rows, args.command, out)
        if not args.no_figures:
            render_figures(rows, args.command, out)
    return 0 if all(r.converged for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
