"""Command-line entry point: ``maxcon run | figures | graph``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .graph import path_graph, random_connected_graph, write_edge_list

# CLI flag dest -> SimConfig field
_RUN_FIELDS = {
    "topology": "topology", "agents": "agents", "avg_degree": "avg_degree",
    "graph_seed": "graph_seed", "algo": "algorithms", "sigma2": "sigma2",
    "window": "window", "weights": "weights", "rho_y": "rho_y", "rho_z": "rho_z",
    "iters": "iters", "reals": "reals", "seed": "seed", "out": "out",
    "dmc_redraw": "dmc_redraw", "redraw_initial": "redraw_initial",
    "consistent_start": "consistent_start",
}


class StageError(Exception):
    def __init__(self, stage: str, err: Exception):
        super().__init__(f"{stage} failed: {err}")
        self.stage = stage


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, OSError, RuntimeError, KeyError) as e:
        raise StageError(name, e) from e


def _algos(values: list[str]) -> tuple[str, ...]:
    out = []
    for v in values:
        out += [a for a in v.split(",") if a]
    return tuple(out)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxcon", description="Max-consensus over noisy links")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment and write its MSE curves as CSV")
    r.add_argument("--config", help="INI file with a [maxcon] section; flags override it")
    r.add_argument("--topology", help="path | random | file:<edge list>")
    r.add_argument("--agents", type=int)
    r.add_argument("--avg-degree", type=float)
    r.add_argument("--graph-seed", type=int)
    r.add_argument("--algo", nargs="+", help="one or more of naive, dmc, rdmc")
    r.add_argument("--sigma2", type=float)
    r.add_argument("--window", type=int)
    r.add_argument("--weights", type=_floats, help="comma-separated window weights")
    r.add_argument("--rho-y", type=float)
    r.add_argument("--rho-z", type=float)
    r.add_argument("--iters", type=int)
    r.add_argument("--reals", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output CSV path")
    r.add_argument("--dmc-redraw", action="store_const", const=True)
    r.add_argument("--redraw-initial", action="store_const", const=True)
    r.add_argument("--consistent-start", action="store_const", const=True)
    r.add_argument("--workers", type=int)
    r.add_argument("--plot", action="store_true", help="also write <out>.png")
    r.add_argument("--save-config", help="write the effective config as INI")

    f = sub.add_parser("figures", help="run a figure preset, write CSV and PNG files")
    f.add_argument("--preset", required=True, choices=harness.PRESETS)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out-dir", default=".")
    f.add_argument("--reals", type=int, default=1000)
    f.add_argument("--iters", type=int, default=1000)
    f.add_argument("--workers", type=int)
    f.add_argument("--no-plots", action="store_true")

    g = sub.add_parser("graph", help="generate a topology as an edge-list file")
    g.add_argument("--gen", choices=("random", "path"), default="random")
    g.add_argument("--agents", type=int, default=20)
    g.add_argument("--avg-degree", type=float, default=4.0)
    g.add_argument("--seed", type=int, default=harness.DEFAULT_GRAPH_SEED)
    g.add_argument("--out", required=True)
    return p


def _config_from_args(args: argparse.Namespace) -> harness.SimConfig:
    cfg = harness.SimConfig()
    if args.config:
        cfg = harness.SimConfig.from_ini(Path(args.config).read_text())
    overrides = {}
    for dest, name in _RUN_FIELDS.items():
        v = getattr(args, dest)
        if v is None:
            continue
        overrides[name] = _algos(v) if dest == "algo" else v
    return replace(cfg, **overrides).validate()


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _stage("config", _config_from_args, args)
    if args.save_config:
        _stage("config", Path(args.save_config).write_text, cfg.to_ini())
    result = _stage("simulation", harness.run_experiment, cfg, args.workers)
    out = cfg.out or "maxcon_run.csv"
    _stage("output", harness.write_csv, result, out)
    if args.plot:
        from .plotting import plot_mse

        _stage("plot", plot_mse, result, Path(out).with_suffix(".png"))
    for line in harness.summary_lines(result):
        print(line)
    print(f"wrote {out}")
    return 0


def cmd_figures(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    _stage("output", out_dir.mkdir, parents=True, exist_ok=True)
    result = _stage("simulation", harness.run_preset, args.preset, args.seed,
                    args.reals, args.iters, args.workers)
    csv_path = out_dir / f"{args.preset}.csv"
    _stage("output", harness.write_csv, result, csv_path)
    written = [csv_path]
    if not args.no_plots:
        from .plotting import plot_estimates, plot_mse

        written.append(_stage("plot", plot_mse, result, out_dir / f"{args.preset}_mse.png",
                              f"preset {args.preset}"))
        if args.preset == "fig3":
            written.append(_stage("plot", plot_estimates, result,
                                  out_dir / f"{args.preset}_estimates.png"))
    for line in harness.summary_lines(result):
        print(line)
    for w in written:
        print(f"wrote {w}")
    return 0


def cmd_graph(args: argparse.Namespace) -> int:
    if args.gen == "path":
        g = _stage("graph", path_graph, args.agents)
    else:
        g = _stage("graph", random_connected_graph, args.agents, args.avg_degree, args.seed)
    _stage("output", write_edge_list, g, args.out)
    print(f"wrote {args.out}: J={g.num_agents} E={g.num_edges} avg degree={g.average_degree:g}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "figures": cmd_figures, "graph": cmd_graph}[args.command]
    try:
        return handler(args)
    except StageError as e:
        print(f"maxcon: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
