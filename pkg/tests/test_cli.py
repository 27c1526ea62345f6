import csv
import json

import pytest
import yaml

from qdlnsim.cli import main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_strain(tmp_path):
    assert main(["strain", "--theta", "30", "--v", "100", "--out", str(tmp_path)]) == 0
    (row,) = rows(tmp_path / "strain.csv")
    assert float(row["eps_xx"]) != 0
    manifest = json.loads((tmp_path / "strain.manifest.json").read_text())
    assert manifest["command"] == "strain" and any(p.endswith("strain.csv") for p in manifest["outputs"])


def test_strain_zero_bias(tmp_path):
    main(["strain", "--theta", "30", "--v", "0", "--out", str(tmp_path)])
    (row,) = rows(tmp_path / "strain.csv")
    assert all(row[k] == "0.0" for k in row if k.startswith("eps"))


def test_bad_config_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["strain", "--theta", "0", "--v", "1", "--config", str(tmp_path / "nope.yaml"), "--out", str(out)])
    assert rc == 1
    assert not out.exists() or not any(out.iterdir())
    assert "error" in capsys.readouterr().err


def test_malformed_config(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("gaas: {compliance: {s11: soft}}\n")
    assert main(["strain", "--theta", "0", "--v", "1", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert not (tmp_path / "strain.csv").exists()


def test_theta_sweep(tmp_path):
    args = ["sweep", "--mode", "theta", "--start", "0", "--stop", "180", "--step", "1", "--out", str(tmp_path)]
    assert main(args) == 0
    report = yaml.safe_load((tmp_path / "sweep_theta.yaml").read_text())
    assert any(150 <= a <= 170 for a in report["sign_changes_deg"])
    assert rows(tmp_path / "sweep_theta.csv")[0].keys() == {"theta_deg", "delta_e_ueV"}


def test_calibrated_voltage_sweep(tmp_path):
    args = ["sweep", "--mode", "voltage", "--start", "-200", "--stop", "200", "--step", "10",
            "--calibrate", "-0.46", "--out", str(tmp_path)]
    assert main(args) == 0
    report = yaml.safe_load((tmp_path / "sweep_voltage.yaml").read_text())
    assert report["span_meV"] == pytest.approx(-0.184, rel=0.05)
    assert report["fitted_rate_ueV_per_V"] == pytest.approx(-0.46, rel=1e-6)


def test_empty_range_is_usage_error(tmp_path):
    args = ["sweep", "--mode", "theta", "--start", "10", "--stop", "0", "--step", "1", "--out", str(tmp_path)]
    assert main(args) == 2


def test_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        main(["strain", "--bogus"])
    assert exc.value.code == 2


def test_align_sample(tmp_path):
    assert main(["align", "--sample", "--seed", "3", "--out", str(tmp_path)]) == 0
    report = yaml.safe_load((tmp_path / "alignment.yaml").read_text())
    assert 1 <= report["aligned_count"] <= 20
    assert len(rows(tmp_path / "channels.csv")) == 20


def test_align_sample_needs_seed(tmp_path):
    assert main(["align", "--sample", "--out", str(tmp_path)]) == 2


def test_align_single_channel(tmp_path):
    f = tmp_path / "ch.csv"
    f.write_text("id,e0_eV,rate_ueV_per_V,vmin,vmax\n7,1.35,-4.1,-100,100\n")
    assert main(["align", "--channels", str(f), "--out", str(tmp_path)]) == 0
    (row,) = rows(tmp_path / "alignment.csv")
    assert float(row["voltage_V"]) == 0.0 and row["aligned"] in ("true", "True", "1")


def test_align_bad_file(tmp_path, capsys):
    f = tmp_path / "ch.csv"
    f.write_text("id,e0_eV,rate_ueV_per_V,vmin,vmax\n1,1.35,-4,-100,100\n2,x,-4,-100,100\n")
    assert main(["align", "--channels", str(f), "--out", str(tmp_path)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_tpi_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["tpi", "simulate", "--pulses", "50000", "--seed", "4", "--no-fit", "--out", str(d)]) == 0
    assert (a / "histogram.csv").read_bytes() == (b / "histogram.csv").read_bytes()


def test_tpi_needs_seed(tmp_path):
    assert main(["tpi", "simulate", "--out", str(tmp_path)]) == 2


def test_tpi_distinguishable_and_refit(tmp_path):
    args = ["tpi", "simulate", "--pulses", "1000000", "--seed", "6", "--mode-overlap", "0", "--out", str(tmp_path)]
    assert main(args) == 0
    fit = yaml.safe_load((tmp_path / "fit.yaml").read_text())
    assert fit["area_ratio"] == pytest.approx(0.5, abs=0.02)
    refit_dir = tmp_path / "refit"
    assert main(["tpi", "fit", "--histogram", str(tmp_path / "histogram.csv"), "--out", str(refit_dir)]) == 0
    assert yaml.safe_load((refit_dir / "fit.yaml").read_text())["area_ratio"] == fit["area_ratio"]


def test_budget(tmp_path):
    assert main(["budget", "--out", str(tmp_path)]) == 0
    report = yaml.safe_load((tmp_path / "budget.yaml").read_text())
    assert report["coincidence_rate_hz"] == pytest.approx(76e6 * report["end_to_end"]["qd1"] ** 2 * 0.5)
    stages = {(r["chain"], r["stage"]) for r in rows(tmp_path / "budget.csv")}
    assert ("qd2", "grating") in stages
