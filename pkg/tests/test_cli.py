from __future__ import annotations

import json

import numpy as np

from offgrid.cli import main


def test_certify_writes_outputs(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grid: {T: 512}\ncertify: {s: 2, gap: 9.0}\n")
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["exit_code"] == 0 and "certificates.json" in man["outputs"]


def test_certify_failure_exit_code(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grid: {limit: true, a: -20, b: 20}\ncertify: {s: 2, gap: 1.2}\n")
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_fit_subcommand(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grid: {T: 512}\nnoise: {sigma: 0.1}\n")
    assert main(["fit", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    est = json.loads((tmp_path / "o" / "estimate.json").read_text())
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert len(est["theta"]) >= 3 and err["I3"] >= 0


def test_fit_from_data_file(tmp_path):
    t = -6 + 12 * np.arange(1, 301) / 300
    y = np.exp(-(t - 0.5) ** 2 / 2)
    np.savetxt(tmp_path / "d.csv", np.column_stack([t, np.full(300, 0.04), y]), delimiter=",")
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"data: {tmp_path / 'd.csv'}\ngrid: {{T: 300, a: -6, b: 6}}\nsolver: {{kappa: 0.0001}}\n")
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    est = json.loads((tmp_path / "o" / "estimate.json").read_text())
    assert abs(est["theta"][0] - 0.5) < 1e-4


def test_rates_and_noise_check_small(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("rates: {T: [128, 256], reps: 3}\nnoise_check: {T: 128, reps: 50}\n")
    assert main(["rates", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "rates.csv").read_text().count("\n") == 7
    assert main(["noise-check", "--config", str(cfg), "--out", str(tmp_path / "n")]) == 0


def test_invalid_config_exit_code(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grid: {T: -5}\n")
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text("unknown_section: 1\n")
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text("grid: [unbalanced\n")
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert main(["fit", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")]) == 2
    assert main(["bogus"]) == 2
