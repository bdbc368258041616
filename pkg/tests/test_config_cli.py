import csv

import numpy as np
import pytest

from cryoreadout import device, ivfit
from cryoreadout.cli import main
from cryoreadout.config import ConfigError, load_config


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# -- config ----------------------------------------------------------------

def test_defaults_match_module_defaults():
    cfg = load_config(None)
    net, ref = cfg.network(), device.default_network()
    for f in ("v_supply", "r_upper", "r_lower", "r_collector", "r_emitter",
              "c_in", "c_out", "c_bypass"):
        # scale multiplication may differ from the literal by one ULP
        assert getattr(net, f) == pytest.approx(getattr(ref, f), rel=1e-14)
    params = cfg.transistor()
    assert params.i_sat == pytest.approx(6.352589914763768e-08, rel=1e-12)
    assert params.beta_f == 160.0 and params.v_early == 124.0
    geom = cfg.geometry()
    assert geom.s_over_d == pytest.approx(5.65e-3)
    ens = cfg.ensemble()
    assert ens.n_s == pytest.approx(1e12)     # 1e8 cm^-2
    assert ens.v_resonance == 11.6
    assert cfg.seed == 0


def test_unit_suffix_scaling(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[network]\nr_upper_kohm = 100\n[ensemble]\ntau_relax_us = 2\n")
    cfg = load_config(p)
    assert cfg.network().r_upper == pytest.approx(1e5)
    assert cfg.ensemble().tau_relax == pytest.approx(2e-6)


@pytest.mark.parametrize("text", [
    "[network]\nr_upper_ohm = 100\n",        # wrong unit suffix = unknown key
    "[mystery]\nx = 1\n",
    "[network]\nr_upper_kohm = abc\n",
    "[run]\nseed = 1.5\n",
])
def test_config_rejects_bad_input(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")


def test_config_roundtrip(tmp_path):
    cfg = load_config(None)
    p = tmp_path / "resolved.ini"
    p.write_text(cfg.as_text())
    cfg2 = load_config(p)
    assert cfg2._values == cfg._values


def test_explicit_i_sat(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[device]\ni_sat_A = 1e-12\n")
    assert load_config(p).transistor().i_sat == 1e-12


# -- cli -------------------------------------------------------------------

def test_cli_opp(capsys):
    assert main(["opp"]) == 0
    out = capsys.readouterr().out
    assert "I_c" in out and "uW" in out
    assert "mixing_chamber" in out and "[margin < 10x dissipation]" in out


def test_cli_s21_first_stage(tmp_path):
    assert main(["--out", str(tmp_path), "s21", "--stage", "first"]) == 0
    header, rows = _read_csv(tmp_path / "s21_first.csv")
    assert header == ["f_Hz", "s21_dB"]
    assert len(rows) == 200
    db = np.array([float(r[1]) for r in rows])
    assert np.all(np.abs(db) <= 1.0)


def test_cli_s21_single_point(tmp_path):
    assert main(["--out", str(tmp_path), "s21", "--f-min", "1e6",
                 "--f-max", "1e6"]) == 0
    _, rows = _read_csv(tmp_path / "s21_both.csv")
    assert len(rows) == 1


def test_cli_gen_and_fit_iv(tmp_path):
    out_csv = tmp_path / "family.csv"
    in_csv = tmp_path / "diode.csv"
    assert main(["gen-iv", "--kind", "output", "--path", str(out_csv)]) == 0
    assert main(["gen-iv", "--kind", "input", "--path", str(in_csv)]) == 0
    assert main(["--out", str(tmp_path), "fit-iv", "--output-chars",
                 str(out_csv), "--input", str(in_csv)]) == 0
    _, rows = _read_csv(tmp_path / "fit_iv_report.csv")
    report = dict(rows)
    assert float(report["v_early_V"]) == pytest.approx(124.0, rel=0.005)
    assert float(report["beta_f"]) == pytest.approx(160.0, rel=0.01)
    assert float(report["v_teff_V"]) == pytest.approx(25e-3, rel=0.01)
    assert report["classification"] == "usable"
    assert float(report["intrinsic_gain"]) == pytest.approx(4960.0, rel=0.02)


def test_cli_fit_iv_ndr_exit_code(tmp_path):
    ds = ivfit.synth_output_family()
    sweeps = list(ds.sweeps)
    s = sweeps[5]
    current = s.current.copy()
    current[(s.voltage >= 1.0) & (s.voltage <= 1.3)] *= 0.85
    sweeps[5] = ivfit.IVSweep(label=s.label, voltage=s.voltage, current=current)
    bad = ivfit.IVDataset(kind="output_characteristics", sweeps=tuple(sweeps))
    path = tmp_path / "ndr.csv"
    ivfit.save_iv_dataset(bad, path)
    assert main(["--out", str(tmp_path), "fit-iv",
                 "--output-chars", str(path)]) == 1


def test_cli_fit_iv_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    assert main(["fit-iv", "--input", str(p)]) == 2


def test_cli_fit_iv_numerical_failure(tmp_path):
    # perfectly flat output family: every Early-fit curve is excluded
    v = np.linspace(0.0, 2.0, 30)
    sweeps = tuple(ivfit.IVSweep(label=ib, voltage=v,
                                 current=np.full(30, ib * 160.0))
                   for ib in (300e-9, 400e-9, 500e-9))
    ds = ivfit.IVDataset(kind="output_characteristics", sweeps=sweeps)
    path = tmp_path / "flat.csv"
    ivfit.save_iv_dataset(ds, path)
    assert main(["--out", str(tmp_path), "fit-iv",
                 "--output-chars", str(path)]) == 3


def test_cli_fit_iv_requires_input():
    assert main(["fit-iv"]) == 2


def test_cli_bad_grid_spec(tmp_path):
    assert main(["--out", str(tmp_path), "sweep", "--axis", "vbc",
                 "--grid", "1:2"]) == 2
    assert main(["--out", str(tmp_path), "sweep", "--axis", "vbc",
                 "--grid", "2:1:5"]) == 2
    assert main(["--out", str(tmp_path), "sweep", "--axis", "fm",
                 "--grid", "0:1e6:5:log"]) == 2


def test_cli_bad_config_exit_code(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[mystery]\nx = 1\n")
    assert main(["--config", str(p), "opp"]) == 2


def test_cli_sweep_and_manifest_rerun(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["--out", str(out1), "sweep", "--axis", "vbc",
                 "--grid", "11.5:11.7:3:lin"]) == 0
    manifest = out1 / "sweep_vbc_manifest.ini"
    assert manifest.exists()
    assert main(["--config", str(manifest), "--out", str(out2), "sweep"]) == 0
    assert (out1 / "sweep_vbc.csv").read_bytes() == \
        (out2 / "sweep_vbc.csv").read_bytes()
    header, rows = _read_csv(out1 / "sweep_vbc.csv")
    assert header == ["x_value", "R_V", "phase_rad"]
    assert len(rows) == 3


def test_cli_sweep_fm_small_grid(tmp_path):
    assert main(["--out", str(tmp_path), "sweep", "--axis", "fm",
                 "--grid", "2e5:1e6:3:log"]) == 0
    _, rows = _read_csv(tmp_path / "sweep_fm.csv")
    assert len(rows) == 3
    assert float(rows[0][0]) == pytest.approx(2e5)


def test_cli_entry_point_installed():
    import shutil
    import subprocess
    exe = shutil.which("cryoreadout")
    assert exe is not None
    proc = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
