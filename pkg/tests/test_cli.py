import csv
import shutil

import pytest

from cuasradar.cli import EXIT_OUTPUT, EXIT_SCENARIO, EXIT_USAGE, RunConfig, main

from conftest import DATA


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_smoke(tmp_path, capsys):
    assert main(["run", "six_targets", "--frames", "10", "--output-dir", str(tmp_path)]) == 0
    for name in ("detections.csv", "tracks.csv", "classifications.csv", "frames.jsonl"):
        assert (tmp_path / name).exists()
    assert len(rows(tmp_path / "detections.csv")) > 1
    assert len(rows(tmp_path / "tracks.csv")) > 1
    out = capsys.readouterr().out
    assert "mean DRT (ms)" in out and "wrote" in out


def test_run_missing_path(tmp_path, capsys):
    bad = tmp_path / "nope.json"
    assert main(["run", str(bad), "--output-dir", str(tmp_path)]) == EXIT_USAGE
    assert str(bad) in capsys.readouterr().err


def test_run_invalid_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"radar": {"carrier_frequency": 1e10}}')
    assert main(["run", str(bad), "--output-dir", str(tmp_path / "o")]) == EXIT_SCENARIO
    assert "prf" in capsys.readouterr().err


def test_run_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "six_targets", "--frames", "1", "--output-dir", str(blocker / "sub")]) == EXIT_OUTPUT


def test_run_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "six_targets", "--frames", "3", "--output-dir", str(d)]) == 0
    for name in ("detections.csv", "tracks.csv", "classifications.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_override(tmp_path):
    assert main(["--seed", "7", "run", "six_targets", "--frames", "2", "--output-dir", str(tmp_path / "a")]) == 0
    assert main(["run", "six_targets", "--frames", "2", "--seed", "8", "--output-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "detections.csv").read_bytes() != (tmp_path / "b" / "detections.csv").read_bytes()


def test_run_all_artifacts(tmp_path):
    emit = "detections,tracks,frames,rd_maps,spectrograms,plots"
    assert main(["run", "six_targets", "--frames", "1", "--emit", emit, "--output-dir", str(tmp_path)]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert {"rd_000.csv", "rd_000.pgm", "rd_000.png", "tracks.png"} <= names
    assert any(n.startswith("spec_000_") and n.endswith(".csv") for n in names)
    assert (tmp_path / "rd_000.pgm").read_bytes().startswith(b"P5\n")
    assert (tmp_path / "rd_000.png").read_bytes()[:4] == b"\x89PNG"


def test_run_bad_emit(tmp_path):
    assert main(["run", "six_targets", "--emit", "bogus", "--output-dir", str(tmp_path)]) == EXIT_USAGE


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("x.json", frames=0)


def test_config_dir_env(tmp_path, monkeypatch):
    cfg = tmp_path / "configs"
    cfg.mkdir()
    shutil.copy(DATA / "quad_rotor.json", cfg / "mine.json")
    monkeypatch.setenv("CUASRADAR_CONFIG_DIR", str(cfg))
    assert main(["run", "mine", "--frames", "1", "--emit", "tracks", "--output-dir", str(tmp_path / "o")]) == 0


def test_sweep_rows_in_order(tmp_path):
    assert main(["sweep", "quad_rotor", "--cpis", "89,2.7,20", "--output-dir", str(tmp_path)]) == 0
    table = rows(tmp_path / "sweep.csv")
    assert table[0] == ["cpi_ms", "ratio", "detectable"]
    assert [float(r[0]) for r in table[1:]] == pytest.approx([89.0, 2.8, 20.0])
    assert all(r[2] in ("true", "false") for r in table[1:])


def test_sweep_three_rows_and_plot(tmp_path):
    assert main(["sweep", "quad_rotor", "--cpis", "2.7,20,89", "--plot", "--output-dir", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "sweep.csv")) == 4
    assert (tmp_path / "sweep.png").exists()


@pytest.mark.parametrize("cpis", ["", ",", "abc", "-5"])
def test_sweep_bad_list(tmp_path, cpis):
    assert main(["sweep", "quad_rotor", "--cpis", cpis, "--output-dir", str(tmp_path)]) == EXIT_USAGE


def test_size_range(capsys):
    assert main(["size", "range", "--rcs", "0.01", "--ref-range", "60000", "--ref-rcs", "100"]) == 0
    out = capsys.readouterr().out
    assert "6000 m" in out and "6 km" in out


def test_size_range_from_budget(capsys):
    args = ["size", "range", "--csv", "--rcs", "1", "--snr", "13", "--power", "1000", "--gain", "1000",
            "--frequency", "1e10", "--noise-bandwidth", "1e6"]
    assert main(args) == 0
    from cuasradar.scenario import LinkBudget
    from cuasradar.tradestudy import detection_range

    expect = detection_range(LinkBudget(1000.0, 1000.0, 1000.0, 290.0, 1e6), 0.03, 1.0, 13.0)
    row = dict((r[0], r[1]) for r in csv.reader(capsys.readouterr().out.splitlines()[1:]))
    assert float(row["range"]) == pytest.approx(expect, rel=1e-5)


def test_size_latency(capsys):
    assert main(["size", "latency", "--drl", "10", "--srl", "500", "--rrl", "400", "--com", "50"]) == 0
    assert "960" in capsys.readouterr().out


def test_size_sphere_csv(capsys):
    assert main(["size", "sphere-rcs", "--radius", "1", "--wavelength", "0.03", "--csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "quantity,value,unit"
    assert lines[1] == "rcs,3.14159,m^2"


def test_size_other_calculators(capsys):
    assert main(["size", "angular", "--wavelength", "0.03", "--aperture", "0.3", "--csv"]) == 0
    assert "0.122" in capsys.readouterr().out
    assert main(["size", "alert", "--range", "6000", "--speed-kmh", "185", "--csv"]) == 0
    assert "116.7" in capsys.readouterr().out
    assert main(["size", "resolution", "--bandwidth", "12.5e6", "--frequency", "1e10", "--cpi-ms", "20", "--csv"]) == 0
    out = capsys.readouterr().out
    assert "12" in out and "0.75" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["size", "range"],
        ["size", "angular", "--wavelength", "0.03"],
        ["size", "sphere-rcs", "--radius", "-1", "--wavelength", "0.03"],
        ["size", "alert", "--range", "100"],
        ["size", "latency", "--drl", "-1"],
    ],
)
def test_size_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 2
