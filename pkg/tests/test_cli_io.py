import json

import numpy as np
import pytest

from clacorr import io
from clacorr.cli import main
from clacorr.core_stats import TimeSeriesMatrix
from clacorr.errors import ConfigError, ConsistencyError, ParseError
from clacorr.io import RunConfig, parse_config_text


def write(path, text):
    path.write_text(text)
    return path


def test_timeseries_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    a = TimeSeriesMatrix("A", ("v1", "v2"), rng.standard_normal((2, 4)))
    io.save_timeseries(tmp_path / "ts.csv", [a], tmp_path / "parc.csv")
    back = io.load_timeseries(tmp_path / "ts.csv", tmp_path / "parc.csv")
    assert list(back) == ["A"]
    assert back["A"].voxel_ids == a.voxel_ids
    assert np.array_equal(back["A"].values, a.values)
    assert (tmp_path / "ts.csv").read_text().splitlines()[0] == "voxel_id,t0001,t0002,t0003,t0004"


def test_duplicate_voxel(tmp_path):
    ts = write(tmp_path / "ts.csv", "voxel_id,t0001,t0002,t0003\nv1,1,2,3\nv1,3,2,1\n")
    with pytest.raises(ConsistencyError, match="'v1'"):
        io.read_timeseries_csv(ts)


def test_nan_cell_reports_position(tmp_path):
    ts = write(tmp_path / "ts.csv", "voxel_id,t0001,t0002,t0003\nv1,1,2,3\nv2,3,nan,1\n")
    with pytest.raises(ParseError) as exc:
        io.read_timeseries_csv(ts)
    assert (exc.value.row, exc.value.column) == (3, 3)


def test_ragged_and_non_numeric(tmp_path):
    with pytest.raises(ParseError) as exc:
        io.read_timeseries_csv(write(tmp_path / "a.csv", "voxel_id,t0001,t0002,t0003\nv1,1,2\n"))
    assert exc.value.row == 2
    with pytest.raises(ParseError):
        io.read_timeseries_csv(write(tmp_path / "b.csv", "voxel_id,t0001,t0002,t0003\nv1,1,x,2\n"))


def test_parcellation_mismatch(tmp_path):
    ts = write(tmp_path / "ts.csv", "voxel_id,t0001,t0002,t0003\nv1,1,2,3\nv2,3,2,2\n")
    p1 = write(tmp_path / "p1.csv", "voxel_id,region\nv1,A\n")
    p2 = write(tmp_path / "p2.csv", "voxel_id,region\nv1,A\nv2,B\nv3,B\n")
    with pytest.raises(ConsistencyError, match="v2"):
        io.load_timeseries(ts, p1)
    with pytest.raises(ConsistencyError, match="v3"):
        io.load_timeseries(ts, p2)


def test_config_parsing():
    raw = parse_config_text("# comment\nmodel = toeplitz1d\neta_minus = 0.8  # both\nn = 100\n")
    cfg = RunConfig.from_mapping(raw, seed=5)
    assert cfg.scenario.eta_minus_a == cfg.scenario.eta_minus_b == 0.8
    assert cfg.scenario.n_times == 100 and cfg.scenario.seed == 5
    with pytest.raises(ConfigError):
        parse_config_text("novalue\n")
    with pytest.raises(ConfigError):
        parse_config_text("a=1\na=2\n")
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"colour": "red"})
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"height": "fixed:-2"})
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"sweep.rho": "0.1,0.2", "sweep.eta_minus": "0.2"})


def test_config_defaults_are_logged(caplog):
    with caplog.at_level("INFO", logger="clacorr.io"):
        RunConfig.from_mapping({})
    assert "seed not set" in caplog.text


def test_sweep_expansion():
    cfg = RunConfig.from_mapping({"sweep.eta_minus_a": "0.2,0.8", "sweep.gamma2": "0.5,1"})
    specs = cfg.sweep_scenarios()
    assert [(s.eta_minus_a, s.gamma2_a, s.gamma2_b) for s in specs] == [(0.2, 0.5, 0.5), (0.8, 1.0, 1.0)]


def three_region_data(tmp_path, n_vox=(4, 3, 5), n_times=40):
    rng = np.random.default_rng(3)
    regs = [TimeSeriesMatrix(lab, tuple(f"{lab}{i}" for i in range(n)), rng.standard_normal((n, n_times)))
            for lab, n in zip("CAB", n_vox)]
    io.save_timeseries(tmp_path / "ts.csv", regs, tmp_path / "parc.csv")
    return write(tmp_path / "run.cfg", "timeseries = ts.csv\nparcellation = parc.csv\n")


def test_estimate_three_regions(tmp_path):
    cfg = three_region_data(tmp_path)
    out = tmp_path / "out"
    assert main(["estimate", "--config", str(cfg), "--out", str(out)]) == 0
    est = io.read_table(out / "estimates.csv", io.ESTIMATES_HEADER)
    assert sorted({(r["region_a"], r["region_b"]) for r in est}) == [("A", "B"), ("A", "C"), ("B", "C")]
    assert {r["estimator"] for r in est} == {"AC", "CA", "CLA"}
    heights = io.read_table(out / "heights.csv", io.HEIGHTS_HEADER)
    assert [h["region"] for h in heights] == ["A", "B", "C"]
    assert all(float(h["h_used"]) == float(h["h_max"]) for h in heights)
    clusters = io.read_table(out / "clusters.csv", io.CLUSTERS_HEADER)
    assert len(clusters) == 12
    dist = io.read_table(out / "cla_distribution.csv", io.DISTRIBUTION_HEADER)
    for ra, rb in [("A", "B"), ("A", "C"), ("B", "C")]:
        vals = [float(r["value"]) for r in dist if (r["region_a"], r["region_b"]) == (ra, rb)]
        cla = next(float(r["value"]) for r in est if (r["region_a"], r["region_b"], r["estimator"]) == (ra, rb, "CLA"))
        assert np.mean(vals) == pytest.approx(cla, abs=1e-15)


def test_single_voxel_regions(tmp_path):
    cfg = three_region_data(tmp_path, n_vox=(1, 1, 1))
    out = tmp_path / "out"
    assert main(["estimate", "--config", str(cfg), "--out", str(out)]) == 0
    est = io.read_estimates(out / "estimates.csv")
    for ra, rb in [("A", "B"), ("A", "C"), ("B", "C")]:
        assert est[(ra, rb, "AC")] == est[(ra, rb, "CA")] == est[(ra, rb, "CLA")]


def outputs(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir())}


@pytest.mark.parametrize("command,extra", [
    ("simulate", "n_voxels = 8\nn = 30\n"),
    ("estimate", None),
    ("benchmark", "n_voxels = 8\nn = 30\nreplicates = 3\nclusterings = ward,kmeans,random\n"
                  "sweep.eta_minus_b = 0.2,0.8\n"),
    ("surface", "n_voxels = 8\nn = 30\nn_grid = 4\n"),
])
def test_reruns_are_byte_identical(tmp_path, command, extra):
    cfg = three_region_data(tmp_path) if extra is None else write(tmp_path / "run.cfg", extra)
    runs = []
    for name, threads in (("one", "1"), ("two", "2")):
        out = tmp_path / name
        assert main([command, "--config", str(cfg), "--out", str(out), "--seed", "9", "--threads", threads]) == 0
        runs.append(outputs(out))
    assert runs[0] == runs[1] and runs[0]


def test_ccc_rerun_identical(tmp_path, capsys):
    cfg = three_region_data(tmp_path)
    main(["estimate", "--config", str(cfg), "--out", str(tmp_path / "e")])
    est = str(tmp_path / "e" / "estimates.csv")
    capsys.readouterr()
    assert main(["ccc", est, est, "--out", str(tmp_path / "c1")]) == 0
    printed = capsys.readouterr().out
    assert printed.splitlines() == ["AC,1", "CA,1", "CLA,1"]
    main(["ccc", est, est, "--out", str(tmp_path / "c2")])
    assert outputs(tmp_path / "c1") == outputs(tmp_path / "c2")


def test_simulate_then_estimate(tmp_path):
    sim = tmp_path / "sim"
    cfg = write(tmp_path / "sim.cfg", "n_voxels = 10\nn = 50\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(sim)]) == 0
    truth = {r["quantity"]: float(r["value"]) for r in io.read_table(sim / "ground_truth.csv", ("quantity", "value"))}
    assert truth["rho"] == 0.3 and truth["limit_voxel"] == pytest.approx(0.2)
    run = write(tmp_path / "est.cfg", f"timeseries = {sim / 'timeseries.csv'}\nparcellation = {sim / 'parcellation.csv'}\n")
    assert main(["estimate", "--config", str(run), "--out", str(tmp_path / "est")]) == 0


def test_surface_corners_match_estimate(tmp_path):
    cfg = three_region_data(tmp_path, n_vox=(4, 3, 5))
    text = cfg.read_text() + "region_a = A\nregion_b = B\nrho_true = 0.3\nn_grid = 3\n"
    write(cfg, text)
    assert main(["surface", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    rows = io.read_table(tmp_path / "s" / "surface.csv", ("h_a", "h_b", "error"))
    corner_lo = float(rows[0]["error"])
    corner_hi = float(rows[-1]["error"])
    for height, corner in (("fixed:0", corner_lo), ("fixed:1e6", corner_hi)):
        out = tmp_path / height.replace(":", "_")
        assert main(["estimate", "--config", str(cfg), "--out", str(out), "--height", height]) == 0
        dist = io.read_table(out / "cla_distribution.csv", io.DISTRIBUTION_HEADER)
        vals = np.array([float(r["value"]) for r in dist if (r["region_a"], r["region_b"]) == ("A", "B")])
        assert np.mean((vals - 0.3) ** 2) == pytest.approx(corner, abs=1e-12)


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--bogus"])
    assert exc.value.code == 2
    assert main(["estimate", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["benchmark", "--config", str(write(tmp_path / "b.cfg", "estimators = xy\n"))]) == 2

    ts = write(tmp_path / "ts.csv", "voxel_id,t0001,t0002,t0003\nv1,1,2,3\nv2,3,nan,1\n")
    write(tmp_path / "parc.csv", "voxel_id,region\nv1,A\nv2,B\n")
    cfg = write(tmp_path / "d.cfg", "timeseries = ts.csv\nparcellation = parc.csv\n")
    capsys.readouterr()
    assert main(["estimate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    record = json.loads(capsys.readouterr().err.strip().splitlines()[0])
    assert record["error"] == "ParseError" and record["row"] == 3 and record["column"] == 3
    assert json.loads((tmp_path / "o" / "error.json").read_text()) == record

    psd = write(tmp_path / "p.cfg", "eta_minus = 0.0\nrho = 0.5\n")
    assert main(["simulate", "--config", str(psd), "--out", str(tmp_path / "p")]) == 4
    record = json.loads((tmp_path / "p" / "error.json").read_text())
    assert record["error"] == "NotPSD" and record["min_eigenvalue"] < 0

    write(tmp_path / "ts.csv", "voxel_id,t0001,t0002,t0003\nv1,1,2,3\nv2,2,2,2\n")
    assert main(["estimate", "--config", str(cfg), "--out", str(tmp_path / "z")]) == 4
