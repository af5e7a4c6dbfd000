import json
from pathlib import Path

import pytest

from relay_dmt import __version__
from relay_dmt.cli import main, parse_snr
from relay_dmt.rng import SEED_ENV

from conftest import DIAMOND, MESH_TEXT, GAPPED_PATHS, DENSE_PATHS, gapped_timing, dense_timing

DATA = Path(__file__).parent / "data"


def _schedule_text(paths, timing):
    ps = ";".join("(" + ",".join(map(str, p)) + ")" for p in paths)
    ts = "; ".join(",".join(map(str, row)) for row in timing)
    return f"paths: {ps}\ntiming: {ts}\n"


@pytest.fixture
def files(tmp_path):
    (tmp_path / "mesh.topo").write_text(MESH_TEXT)
    (tmp_path / "gapped.sched").write_text(_schedule_text(GAPPED_PATHS, gapped_timing()))
    (tmp_path / "dense.sched").write_text(_schedule_text(DENSE_PATHS, dense_timing()))
    bad = [list(r) for r in gapped_timing()]
    bad[2][1] = bad[2][0]
    (tmp_path / "bad.sched").write_text(_schedule_text(GAPPED_PATHS, bad))
    (tmp_path / "diamond.topo").write_text(DIAMOND)
    (tmp_path / "star3.topo").write_text("nodes 5; edges 0-1 0-2 0-3 1-4 2-4 3-4; src 0; sink 4")
    (tmp_path / "mimo.topo").write_text("nodes 3; ant 0:2 1:1 2:2; edges 0-1 1-2; src 0; sink 2")
    (tmp_path / "isolated.topo").write_text("nodes 4; edges 0-1 1-2; src 0; sink 3")
    (tmp_path / "broken.topo").write_text("nodes 4; edges 0-1 0-1; src 0; sink 3")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _csv_rows(text):
    return [ln.split(",") for ln in text.splitlines()[1:] if not ln.startswith("#")]


# -- analyze -------------------------------------------------------------------

def test_analyze_two_hop(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "--curve", "two_hop", "--K", 2, "--B", 1,
                       "--out", tmp_path, "--no-plot")
    assert code == 0
    rows = _csv_rows(out)
    assert rows[0][:2] == ["0", "2"]
    assert (tmp_path / "dmt_two_hop.csv").read_text() == out
    man = json.loads((tmp_path / "analyze.manifest.json").read_text())
    assert man["command"] == "analyze" and man["version"] == __version__
    assert str(tmp_path / "dmt_two_hop.csv") in man["outputs"]


def test_analyze_af_mac_point(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "--curve", "af_mac", "--M", 2, "--sym-r", 0.2,
                       "--out", tmp_path)
    assert code == 0
    assert _csv_rows(out) == [["0.2", "0.2", "af_mac M=2"]]


def test_analyze_exact_and_bounds(capsys, files):
    sched = files / "serial.sched"
    sched.write_text("builder: maxflow_serial L0=1\n")
    code, out, _ = run(capsys, "analyze", "--curve", "exact_ni", "--topology", files / "diamond.topo",
                       "--schedule", sched, "--r", 0, "--out", files)
    assert code == 0 and _csv_rows(out)[0][1] == "2"
    code, out, _ = run(capsys, "analyze", "--curve", "bounds", "--topology", files / "mesh.topo",
                       "--out", files, "--no-plot")
    assert code == 0
    labels = {row[2] for row in _csv_rows(out)}
    assert labels == {"upper", "lower"}


def test_analyze_plot_written(capsys, tmp_path):
    assert run(capsys, "analyze", "--curve", "ddf_mac", "--M", 1, "--out", tmp_path)[0] == 0
    assert (tmp_path / "dmt_ddf_mac.png").stat().st_size > 0


def test_analyze_exact_rejects_interfering(capsys, files):
    code, _, err = run(capsys, "analyze", "--curve", "exact_ni", "--topology", files / "mesh.topo",
                       "--schedule", files / "gapped.sched", "--out", files)
    assert code == 3 and "non-interfering" in err


# -- bundle --------------------------------------------------------------------

def test_bundle(capsys, tmp_path):
    code, out, _ = run(capsys, "bundle", "--out", tmp_path)
    assert code == 0
    for name in ("dm_wi.csv", "dm_mac.csv", "figures.gp", "dm_wi.png", "dm_mac.png",
                 "bundle.manifest.json"):
        assert (tmp_path / name).exists()
    assert "'dm_wi.csv'" in (tmp_path / "figures.gp").read_text()


# -- validate ------------------------------------------------------------------

def test_validate_gapped_ok(capsys, files):
    code, out, _ = run(capsys, "validate", "--topology", files / "mesh.topo",
                       "--schedule", files / "gapped.sched", "--out", files)
    assert code == 0 and out.startswith("ok")


def test_validate_dense_interfering(capsys, files):
    code, out, _ = run(capsys, "validate", "--topology", files / "mesh.topo",
                       "--schedule", files / "dense.sched", "--require-non-interfering", "--out", files)
    assert code == 1
    assert "not non-interfering" in out
    assert "slot 3: path 3 hop 1 hears path 1 hop 3, path 2 hop 2" in out
    assert "slot 4: path 4 hop 1 hears path 2 hop 3, path 3 hop 2" in out


def test_validate_corrupted_timing(capsys, files):
    code, out, _ = run(capsys, "validate", "--topology", files / "mesh.topo",
                       "--schedule", files / "bad.sched", "--out", files)
    assert code == 1
    assert "(3)" in out or "property 3" in out


def test_validate_parse_failure(capsys, files):
    (files / "junk.sched").write_text("paths: (0,1\n")
    code, _, err = run(capsys, "validate", "--schedule", files / "junk.sched", "--out", files)
    assert code == 3 and "input error" in err
    code, _, _ = run(capsys, "validate", "--topology", files / "broken.topo",
                     "--schedule", files / "gapped.sched", "--out", files)
    assert code == 3
    code, _, _ = run(capsys, "validate", "--schedule", files / "missing.sched", "--out", files)
    assert code == 3


# -- maxdiv --------------------------------------------------------------------

def test_maxdiv_star(capsys, files):
    code, out, _ = run(capsys, "maxdiv", "--topology", files / "star3.topo", "--out", files)
    assert code == 0
    assert out.startswith("d_G = 3")
    for k in (1, 2, 3):
        assert f"  (0,{k},4)\n" in out
    assert (files / "maxdiv.manifest.json").exists()


def test_maxdiv_mimo_and_isolated(capsys, files):
    assert run(capsys, "maxdiv", "--topology", files / "mimo.topo", "--out", files)[1] \
        .startswith("d_G = 2")
    code, out, _ = run(capsys, "maxdiv", "--topology", files / "isolated.topo", "--out", files)
    assert code == 0 and out.startswith("d_G = 0")
    assert "unreachable" in out


# -- simulate ------------------------------------------------------------------

SMALL = ["--K", 2, "--B", 1, "--R", 1, "--snr", "5:15:5", "--trials-max", 50000,
         "--events", 100, "--no-plot"]


def test_simulate_golden(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--K", 2, "--B", 1, "--R", 1, "--seed", 7,
                       "--snr", "20:40:5", "--out", tmp_path, "--no-plot")
    assert code == 0
    assert out == (DATA / "golden_two_hop_k2_b1_seed7.csv").read_text()


def test_simulate_workers_identical(capsys, tmp_path):
    a = run(capsys, "simulate", *SMALL, "--seed", 3, "--workers", 1, "--out", tmp_path / "a")
    b = run(capsys, "simulate", *SMALL, "--seed", 3, "--workers", 2, "--out", tmp_path / "b")
    assert a[0] == b[0] == 0
    assert a[1] == b[1]
    assert (tmp_path / "a" / "outage.csv").read_bytes() == (tmp_path / "b" / "outage.csv").read_bytes()


def test_simulate_manifest_reproduces(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "12345")
    code, first, _ = run(capsys, "simulate", *SMALL, "--out", tmp_path)
    man = json.loads((tmp_path / "simulate.manifest.json").read_text())
    assert man["seed"] == 12345
    assert man["config"]["mode"] == "p2p"
    monkeypatch.delenv(SEED_ENV)
    code2, again, _ = run(capsys, "simulate", *SMALL, "--seed", man["seed"], "--out", tmp_path / "re")
    assert code == code2 == 0 and first == again


def test_simulate_config_file(capsys, files):
    (files / "serial.sched").write_text("builder: maxflow_serial L0=1\n")
    cfg = files / "run.cfg"
    cfg.write_text("# p2p on the 3-hop fixture\nmode = p2p\ntopology = mesh.topo\n"
                   "schedule = serial.sched\nR = 0.5\nsnr = 0:10:5\nevents = 100\n"
                   "max_trials = 20000\n")
    code, out, _ = run(capsys, "simulate", "--config", cfg, "--seed", 1, "--out", files, "--no-plot")
    assert code == 0
    rows = _csv_rows(out)
    assert [r[0] for r in rows] == ["0", "5", "10"]
    # S = 12 slots at R = 0.5
    assert rows[0][2] == "6"


def test_simulate_fit_and_censored(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--mode", "ddf", "--M", 1, "--r", 0.25, "--snr", "0:20:5",
                       "--events", 100, "--seed", 2, "--fit", "--out", tmp_path)
    assert code == 0 and "# diversity_slope=" in out
    assert (tmp_path / "outage.png").exists()
    code, out, err = run(capsys, "simulate", "--mode", "af", "--M", 1, "--R", 0, "--snr", "0:10:5",
                         "--trials-max", 2000, "--events", 100, "--fit", "--out", tmp_path, "--no-plot")
    assert code == 4
    assert "fit unavailable" in out and "error" in err
    assert all(r[-1] == "1" for r in _csv_rows(out))


def test_simulate_mac(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--mode", "mac", "--K", 2, "--M", 2, "--sym-r", 0.1,
                       "--snr", "10:20:10", "--trials-max", 5000, "--events", 100,
                       "--out", tmp_path, "--no-plot")
    assert code == 0
    # two users over S = 3 slots: threshold for the full set is 3 * 0.2 * log2(P)
    assert float(_csv_rows(out)[0][2]) == pytest.approx(3 * 0.2 * 10 / 3.0103, rel=1e-3)


# -- exit-code matrix ----------------------------------------------------------

@pytest.mark.parametrize("argv, code", [
    (["analyze", "--curve", "two_hop", "--K", "0"], 2),
    (["analyze", "--curve", "spiral"], 2),
    (["analyze", "--curve", "two_hop"], 2),
    (["analyze", "--curve", "bounds"], 2),
    (["analyze", "--curve", "bounds", "--topology", "nope.topo"], 3),
    (["frobnicate"], 2),
    ([], 2),
    (["simulate", "--K", "2"], 2),
    (["simulate", "--K", "2", "--R", "1", "--snr", "40:20:5"], 2),
    (["simulate", "--K", "2", "--R", "1", "--events", "50"], 2),
    (["simulate", "--R", "1"], 2),
    (["simulate", "--topology", "nope.topo", "--schedule", "nope.sched", "--R", "1"], 3),
    (["maxdiv"], 2),
])
def test_exit_codes(capsys, tmp_path, monkeypatch, argv, code):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code


def test_parse_snr():
    assert parse_snr("20:40:5") == (20.0, 25.0, 30.0, 35.0, 40.0)
    assert parse_snr("20:45:5")[-1] == 45.0
    assert parse_snr("1,2.5") == (1.0, 2.5)
