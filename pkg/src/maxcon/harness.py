"""Monte Carlo experiment orchestration.

An experiment is one :class:`SimConfig`; each algorithm it lists becomes a
cell.  Realizations are split into fixed-size batches that can run in any
order on any number of worker processes; per-realization error rows are
put back in realization order before the single reduction, so output is
byte-identical for every degree of parallelism.
"""

from __future__ import annotations

import configparser
import csv
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from io import StringIO
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .consensus import ENGINES, PenaltyParams, ProblemInstance, check_weights, simulate
from .graph import Graph, path_graph, random_connected_graph, read_edge_list
from .metrics import MseCurve, SteadyState, per_realization_error, steady_state_mse
from .noise import LinkNoiseModel

log = logging.getLogger(__name__)

BATCH_SIZE = 25
CSV_HEADER = ("iteration", "algorithm", "topology", "sigma2", "window", "mse", "diverged_count")
INI_SECTION = "maxcon"
PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig7")
DEFAULT_GRAPH_SEED = 7


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    topology: str = "random"  # "path", "random" or "file:<edge list>"
    agents: int = 20
    avg_degree: float = 4.0
    graph_seed: int = DEFAULT_GRAPH_SEED
    algorithms: tuple[str, ...] = ("rdmc",)
    sigma2: float = 0.1
    window: int = 3
    weights: tuple[float, ...] | None = None
    rho_y: float = 1.0
    rho_z: float = 1.0
    iters: int = 1000
    reals: int = 1000
    seed: int = 0
    dmc_redraw: bool = False
    redraw_initial: bool = False
    consistent_start: bool = False
    out: str | None = None

    def validate(self) -> "SimConfig":
        def bad(name: str, why: str) -> ConfigError:
            return ConfigError(f"invalid config field '{name}': {why}")

        if not (self.topology in ("path", "random") or self.topology.startswith("file:")):
            raise bad("topology", f"expected path, random or file:<path>, got {self.topology!r}")
        if self.agents < 1:
            raise bad("agents", f"must be >= 1, got {self.agents}")
        if self.iters < 1:
            raise bad("iters", f"must be >= 1, got {self.iters}")
        if self.reals < 1:
            raise bad("reals", f"must be >= 1, got {self.reals}")
        if self.window < 1:
            raise bad("window", f"must be >= 1, got {self.window}")
        if not (self.rho_y > 0):
            raise bad("rho_y", f"must be > 0, got {self.rho_y}")
        if not (self.rho_z > 0):
            raise bad("rho_z", f"must be > 0, got {self.rho_z}")
        if not (self.sigma2 >= 0):
            raise bad("sigma2", f"must be >= 0, got {self.sigma2}")
        if self.seed < 0:
            raise bad("seed", f"must be a non-negative integer, got {self.seed}")
        if not self.algorithms:
            raise bad("algorithms", "at least one algorithm is required")
        for a in self.algorithms:
            if a not in ENGINES:
                raise bad("algorithms", f"unknown algorithm {a!r}; expected one of {ENGINES}")
        try:
            check_weights(self.window, self.weights)
        except ValueError as e:
            raise bad("weights", str(e)) from None
        return self

    @property
    def topology_label(self) -> str:
        if self.topology.startswith("file:"):
            return "file:" + Path(self.topology[5:]).name
        return self.topology

    def build_graph(self) -> Graph:
        if self.topology == "path":
            return path_graph(self.agents)
        if self.topology == "random":
            return random_connected_graph(self.agents, self.avg_degree, self.graph_seed)
        g = read_edge_list(self.topology[5:])
        if g.num_agents != self.agents:
            raise ConfigError(
                f"invalid config field 'agents': {self.agents} but {self.topology} has {g.num_agents}"
            )
        return g

    # flat INI-style persistence, keys spelled like the CLI flags

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp[INI_SECTION] = {}
        sec = cp[INI_SECTION]
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            key = f.name.replace("_", "-")
            if isinstance(v, tuple):
                sec[key] = ",".join(repr(e) if isinstance(e, float) else str(e) for e in v)
            elif isinstance(v, float):
                sec[key] = repr(v)
            else:
                sec[key] = str(v)
        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "SimConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for raw_key, raw in values.items():
            name = raw_key.strip().replace("-", "_")
            if name == "algo":
                name = "algorithms"
            if name not in known:
                raise ConfigError(f"unknown config key {raw_key!r}")
            kwargs[name] = _parse_field(name, str(raw))
        return cls(**kwargs)

    @classmethod
    def from_ini(cls, text: str) -> "SimConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        if INI_SECTION not in cp:
            raise ConfigError(f"config file has no [{INI_SECTION}] section")
        return cls.from_mapping(dict(cp[INI_SECTION]))


_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _parse_field(name: str, raw: str):
    raw = raw.strip()
    try:
        if name in ("agents", "graph_seed", "window", "iters", "reals", "seed"):
            return int(raw)
        if name in ("avg_degree", "sigma2", "rho_y", "rho_z"):
            return float(raw)
        if name in ("dmc_redraw", "redraw_initial", "consistent_start"):
            return _BOOL[raw.lower()]
        if name == "algorithms":
            return tuple(a.strip() for a in raw.replace(" ", ",").split(",") if a.strip())
        if name == "weights":
            return tuple(float(a) for a in raw.split(",") if a.strip())
    except (ValueError, KeyError):
        raise ConfigError(f"invalid config field '{name}': cannot parse {raw!r}") from None
    return raw


def initial_values(seed: int, num_agents: int, cell_key: str | None = None) -> np.ndarray:
    """Standard-normal initial values shared by every cell of an experiment."""
    entropy = [int(seed), int(num_agents), 0x1A1]
    if cell_key is not None:
        entropy.append(zlib.crc32(cell_key.encode()))
    return np.random.default_rng(entropy).standard_normal(num_agents)


@dataclass
class CellResult:
    algorithm: str
    topology: str
    sigma2: float
    window: int  # 0 for engines without a smoothing window
    a_star: float
    curve: MseCurve
    steady: SteadyState
    sample_x: np.ndarray | None = None  # realization 0, shape (K+1, J)

    @property
    def key(self) -> tuple:
        return (self.algorithm, self.topology, self.sigma2, self.window)


@dataclass
class ExperimentResult:
    cells: list[CellResult] = field(default_factory=list)
    configs: list[SimConfig] = field(default_factory=list)

    def cell(self, algorithm: str, **match) -> CellResult:
        hits = [c for c in self.cells if c.algorithm == algorithm
                and all(getattr(c, k) == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} cells match algorithm={algorithm} {match}")
        return hits[0]

    def merged(self, other: "ExperimentResult") -> "ExperimentResult":
        return ExperimentResult(self.cells + other.cells, self.configs + other.configs)


@dataclass(frozen=True)
class _Task:
    cell: int
    engine: str
    cfg: SimConfig
    graph: Graph
    initial: np.ndarray
    realizations: tuple[int, ...]


def _run_task(task: _Task) -> tuple[int, int, np.ndarray, np.ndarray | None]:
    cfg = task.cfg
    inst = ProblemInstance(task.initial)
    batch = simulate(
        task.engine, task.graph, inst, PenaltyParams(cfg.rho_y, cfg.rho_z), cfg.iters,
        window=cfg.window, weights=cfg.weights,
        noise=LinkNoiseModel(cfg.sigma2, cfg.seed),
        realizations=task.realizations,
        dmc_redraw=cfg.dmc_redraw, consistent_start=cfg.consistent_start,
    )
    errors = per_realization_error(batch.x, inst.true_max)
    sample = batch.x[0] if task.realizations[0] == 0 else None
    return task.cell, task.realizations[0], errors, sample


def resolve_workers(requested: int | None = None) -> int:
    cap = os.environ.get("MAXCON_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ConfigError(f"MAXCON_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def run_configs(
    configs: Sequence[SimConfig], workers: int | None = None
) -> ExperimentResult:
    """Run several experiments as one job, sharing a single worker pool."""
    tasks: list[_Task] = []
    meta: list[tuple[SimConfig, str, float]] = []
    for cfg in configs:
        cfg.validate()
        g = cfg.build_graph()
        for algo in cfg.algorithms:
            window = cfg.window if algo == "rdmc" else 0
            key = f"{algo}|{cfg.topology_label}|{cfg.sigma2!r}|{window}"
            a = initial_values(cfg.seed, cfg.agents, key if cfg.redraw_initial else None)
            cell = len(meta)
            meta.append((cfg, algo, float(a.max())))
            for start in range(0, cfg.reals, BATCH_SIZE):
                reals = tuple(range(start, min(cfg.reals, start + BATCH_SIZE)))
                tasks.append(_Task(cell, algo, cfg, g, a, reals))

    n = min(resolve_workers(workers), len(tasks))
    log.info("running %d cells as %d batches on %d worker(s)", len(meta), len(tasks), n)
    if n <= 1:
        outputs = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            outputs = list(pool.map(_run_task, tasks))

    rows: dict[int, dict[int, np.ndarray]] = {i: {} for i in range(len(meta))}
    samples: dict[int, np.ndarray] = {}
    for cell, start, errors, sample in outputs:
        rows[cell][start] = errors
        if sample is not None:
            samples[cell] = sample

    result = ExperimentResult(configs=list(configs))
    for i, (cfg, algo, a_star) in enumerate(meta):
        errors = np.concatenate([rows[i][s] for s in sorted(rows[i])], axis=0)
        window = cfg.window if algo == "rdmc" else 0
        curve = MseCurve.from_errors(
            errors, algorithm=algo, sigma2=cfg.sigma2, window=window,
            topology=cfg.topology_label, seed=cfg.seed,
        )
        result.cells.append(CellResult(
            algo, cfg.topology_label, cfg.sigma2, window, a_star,
            curve, steady_state_mse(curve), samples.get(i),
        ))
    keys = [c.key for c in result.cells]
    if len(set(keys)) != len(keys):
        raise ConfigError("experiment cells are not uniquely identified by their metadata")
    return result


def run_experiment(cfg: SimConfig, workers: int | None = None) -> ExperimentResult:
    return run_configs([cfg], workers)


def figure_preset(
    name: str, seed: int = 0, reals: int = 1000, iters: int = 1000
) -> list[SimConfig]:
    """Named experiment presets.

    fig3: the three algorithms at sigma2 = 0.1, window 3.  fig4/fig5/fig6:
    RD-MC noise-variance sweeps at window 1/2/3.  fig7: RD-MC on the random
    and the path topology.
    """
    base = SimConfig(seed=seed, reals=reals, iters=iters)
    if name == "fig3":
        return [replace(base, algorithms=("naive", "dmc", "rdmc"), sigma2=0.1, window=3)]
    sweeps = {"fig4": (1, (0.0001, 0.01, 0.1)),
              "fig5": (2, (0.001, 0.01, 0.1)),
              "fig6": (3, (0.001, 0.01, 0.1))}
    if name in sweeps:
        window, variances = sweeps[name]
        return [replace(base, window=window, sigma2=s2) for s2 in variances]
    if name == "fig7":
        return [replace(base, topology=t, window=3, sigma2=0.1) for t in ("random", "path")]
    raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")


def run_preset(
    name: str, seed: int = 0, reals: int = 1000, iters: int = 1000, workers: int | None = None
) -> ExperimentResult:
    return run_configs(figure_preset(name, seed, reals, iters), workers)


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def write_csv(result: ExperimentResult, path: str | Path) -> Path:
    path = Path(path)
    cells = sorted(result.cells, key=lambda c: c.key)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for c in cells:
                for k, (m, nd) in enumerate(zip(c.curve.values, c.curve.diverged_count)):
                    w.writerow((k, c.algorithm, c.topology, _fmt(c.sigma2), c.window, _fmt(m), int(nd)))
    except OSError as e:
        raise OSError(f"cannot write CSV to {path}: {e.strerror or e}") from e
    return path


def summary_lines(result: ExperimentResult) -> Iterable[str]:
    for c in sorted(result.cells, key=lambda c: c.key):
        st = c.steady
        flag = f" (diverged points excluded: {st.excluded})" if st.diverged else ""
        yield (f"{c.algorithm:5s} topology={c.topology} sigma2={c.sigma2:g} window={c.window} "
               f"steady-state MSE={st.value:.6g} over last {st.window}{flag}")
