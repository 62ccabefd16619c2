import csv
from dataclasses import replace

import numpy as np
import pytest

from maxcon.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentResult,
    SimConfig,
    figure_preset,
    initial_values,
    run_configs,
    run_experiment,
    write_csv,
)
from maxcon.graph import path_graph, write_edge_list


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_noiseless_naive_path_reaches_zero():
    cfg = SimConfig(topology="path", reals=1, sigma2=0.0, algorithms=("naive",), iters=25)
    cell = run_experiment(cfg, workers=1).cells[0]
    a = initial_values(0, 20)
    from maxcon.graph import eccentricity

    ecc = eccentricity(path_graph(20), int(np.argmax(a)))
    assert ecc <= 19
    assert np.all(cell.curve.values[ecc:] == 0.0)
    assert cell.curve.values[ecc - 1] > 0.0


def test_initial_values_shared_across_cells():
    cfgs = figure_preset("fig7", reals=2, iters=5)
    res = run_configs(cfgs, workers=1)
    assert len({c.a_star for c in res.cells}) == 1
    redraw = run_configs([replace(c, redraw_initial=True) for c in cfgs], workers=1)
    assert len({c.a_star for c in redraw.cells}) == 2


@pytest.mark.parametrize("field,value", [
    ("agents", 0), ("iters", 0), ("reals", 0), ("window", 0), ("rho_y", 0.0),
    ("rho_z", -1.0), ("sigma2", -0.1), ("algorithms", ("bogus",)), ("algorithms", ()),
    ("topology", "ring"), ("weights", (0.2, 0.2, 0.2)), ("seed", -1),
])
def test_validation_names_field(field, value):
    with pytest.raises(ConfigError, match=f"'{field}'"):
        replace(SimConfig(), **{field: value}).validate()


def test_presets():
    fig3 = figure_preset("fig3")
    assert len(fig3) == 1 and fig3[0].algorithms == ("naive", "dmc", "rdmc")
    assert (fig3[0].sigma2, fig3[0].window) == (0.1, 3)
    for name, C, variances in [("fig4", 1, (0.0001, 0.01, 0.1)),
                               ("fig5", 2, (0.001, 0.01, 0.1)),
                               ("fig6", 3, (0.001, 0.01, 0.1))]:
        cfgs = figure_preset(name)
        assert [c.window for c in cfgs] == [C] * 3
        assert tuple(c.sigma2 for c in cfgs) == variances
        assert all(c.algorithms == ("rdmc",) for c in cfgs)
    fig7 = figure_preset("fig7")
    assert [c.topology for c in fig7] == ["random", "path"]
    assert replace(fig7[0], topology="path") == fig7[1]
    with pytest.raises(ConfigError):
        figure_preset("fig9")


def test_csv_empty_result(tmp_path):
    p = write_csv(ExperimentResult(), tmp_path / "e.csv")
    assert p.read_text() == ",".join(CSV_HEADER) + "\n"


def test_csv_one_cell(tmp_path):
    cfg = SimConfig(iters=2, reals=3, sigma2=0.01)
    rows = read_rows(write_csv(run_experiment(cfg, workers=1), tmp_path / "o.csv"))
    assert rows[0] == list(CSV_HEADER)
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    assert rows[1][1:5] == ["rdmc", "random", "0.01", "3"]
    # 17 significant digits
    assert rows[1][3] == format(0.01, ".17g")
    assert float(rows[2][5]) == run_experiment(cfg, workers=1).cells[0].curve.values[1]


def test_csv_sorted_and_unwritable(tmp_path):
    res = run_configs(figure_preset("fig3", reals=2, iters=3), workers=1)
    rows = read_rows(write_csv(res, tmp_path / "f.csv"))[1:]
    keys = [(r[1], r[2], float(r[3]), int(r[4]), int(r[0])) for r in rows]
    assert keys == sorted(keys)
    with pytest.raises(OSError, match="nope"):
        write_csv(res, tmp_path / "nope" / "x.csv")


def test_parallel_and_batching_bitwise(tmp_path, monkeypatch):
    cfg = SimConfig(algorithms=("naive", "dmc", "rdmc"), iters=80, reals=60)
    a = write_csv(run_experiment(cfg, workers=1), tmp_path / "a.csv").read_bytes()
    b = write_csv(run_experiment(cfg, workers=4), tmp_path / "b.csv").read_bytes()
    import maxcon.harness as h

    monkeypatch.setattr(h, "BATCH_SIZE", 7)
    c = write_csv(run_experiment(cfg, workers=1), tmp_path / "c.csv").read_bytes()
    assert a == b == c


def test_workers_env_cap(monkeypatch):
    from maxcon.harness import resolve_workers

    monkeypatch.setenv("MAXCON_THREADS", "2")
    assert resolve_workers(8) == 2
    monkeypatch.setenv("MAXCON_THREADS", "x")
    with pytest.raises(ConfigError):
        resolve_workers(1)


def test_config_round_trip():
    cfg = SimConfig(topology="path", agents=12, algorithms=("dmc", "rdmc"), sigma2=0.01,
                    window=2, weights=(0.25, 0.75), rho_y=0.5, iters=17, reals=3, seed=42,
                    dmc_redraw=True, out="x.csv")
    back = SimConfig.from_ini(cfg.to_ini())
    assert back == cfg
    a = run_experiment(cfg, workers=1)
    b = run_experiment(back, workers=1)
    for ca, cb in zip(a.cells, b.cells):
        assert np.array_equal(ca.curve.values, cb.curve.values)


def test_config_parse_errors():
    with pytest.raises(ConfigError):
        SimConfig.from_ini("[other]\nagents = 3\n")
    with pytest.raises(ConfigError, match="unknown"):
        SimConfig.from_ini("[maxcon]\ncolour = red\n")
    with pytest.raises(ConfigError, match="'agents'"):
        SimConfig.from_ini("[maxcon]\nagents = many\n")


def test_file_topology(tmp_path):
    p = tmp_path / "g.txt"
    write_edge_list(path_graph(20), p)
    cfg = SimConfig(topology=f"file:{p}", reals=2, iters=5)
    ref = SimConfig(topology="path", reals=2, iters=5)
    got = run_experiment(cfg, workers=1).cells[0]
    assert got.topology == "file:g.txt"
    assert np.array_equal(got.curve.values, run_experiment(ref, workers=1).cells[0].curve.values)
    with pytest.raises(ConfigError):
        run_experiment(replace(cfg, agents=21), workers=1)


def test_divergence_counts_reach_csv(tmp_path):
    cfg = SimConfig(topology="path", agents=4, algorithms=("naive",), sigma2=1e12, iters=30, reals=3)
    res = run_experiment(cfg, workers=1)
    cell = res.cells[0]
    assert cell.curve.diverged_count[-1] == 3
    assert cell.steady.diverged
    rows = read_rows(write_csv(res, tmp_path / "d.csv"))
    assert rows[-1][5] == "inf" and rows[-1][6] == "3"
