import subprocess
import sys

import pytest

from tflnbsa.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

COARSE = ["--set", "grid.dx_nm=20", "--set", "grid.dy_nm=20", "--set", "fiber_grid.dx_nm=20", "--set", "fiber_grid.dy_nm=20"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fidelity_golden(capsys, tmp_path):
    code, out, _ = run(capsys, "fidelity", "--splits", "49.7", "48.9", "50.7", "48.3", "-o", str(tmp_path))
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[:3] == [
        "fidelity = 0.9997383065",
        "error = 0.0002616934724",
        "coincidence_probability = 0.2500491733",
    ]
    assert lines[3] == "heralded_state:" and len(lines) == 8


def test_fidelity_balanced_bucket(capsys):
    code, out, _ = run(capsys, "fidelity", "--coeffs", "0.7071067812", "0.7071067812", "0.7071067812", "0.7071067812",
                       "--detection", "bucket_coincidence")
    assert code == EXIT_OK
    assert "coincidence_probability = 0.25" in out


def test_fidelity_with_coupling_efficiencies(capsys):
    a = run(capsys, "fidelity", "--splits", "49.7", "48.9", "50.7", "48.3")[1]
    b = run(capsys, "fidelity", "--splits", "49.7", "48.9", "50.7", "48.3", "--eta", "0.8", "0.6")[1]
    assert a.splitlines()[1] == b.splitlines()[1]


def test_config_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "fidelity", "--coeffs", "-1", "0", "1", "0")[0] == EXIT_CONFIG
    assert run(capsys, "fidelity", "--splits", "0", "0", "50", "50")[0] == EXIT_CONFIG
    code, _, err = run(capsys, "modes", "--set", "device.rib.widht_nm=3")
    assert code == EXIT_CONFIG and "widht_nm" in err
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid:\n  dx_nm: [\n")
    code, _, err = run(capsys, "modes", "-c", str(bad))
    assert code == EXIT_CONFIG and "bad.yaml:" in err
    assert run(capsys, "sweep", "--axis", "q:0:1:3")[0] == EXIT_CONFIG
    assert run(capsys, "sweep", "--axis", "w:400:500:3", "--axis", "NA:0.1:0.2:2")[0] == EXIT_CONFIG
    with pytest.raises(SystemExit) as e:
        main(["reproduce", "fig99"])
    assert e.value.code == 2


def test_numerical_failures_exit_3(capsys):
    code, _, err = run(capsys, "fidelity", "--coeffs", "1", "0", "0", "1")
    assert code == EXIT_NUMERIC and "numerical failure" in err
    code, _, err = run(capsys, "modes", "--structure", "pair", "--set", "grid.width_um=0.5")
    assert code == EXIT_NUMERIC and "margin" in err


def test_cladding_has_no_guided_modes(capsys, tmp_path):
    code, out, _ = run(capsys, "modes", "--structure", "cladding", "-o", str(tmp_path), *COARSE)
    assert code == EXIT_OK and out.strip() == "no guided modes"


def test_modes_table_and_fields(capsys, tmp_path):
    code, out, _ = run(capsys, "modes", "--fields", "-o", str(tmp_path), *COARSE)
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "mode,n_eff,polarization,te_fraction,symmetry"
    assert lines[1].split(",")[2] == "TE" and lines[2].split(",")[2] == "TM"
    assert (tmp_path / "modes.csv").read_text() == out
    head = (tmp_path / "mode_0_field.csv").read_text().splitlines()[0]
    assert head == "x_um,y_um,E_x,E_y"


def test_coupling_strength(capsys):
    code, out, _ = run(capsys, "coupling-strength", "--gap", "65", *COARSE)
    assert code == EXIT_OK
    header, row = out.splitlines()
    assert header == "gap_nm,dn_TE,dn_TM,xi"
    xi = float(row.split(",")[3])
    assert 0.9 < xi < 1.1


def test_output_dir_env_and_flag(capsys, tmp_path, monkeypatch):
    env_dir, flag_dir = tmp_path / "env", tmp_path / "flag"
    monkeypatch.setenv("TFLNBSA_OUTPUT_DIR", str(env_dir))
    assert run(capsys, "fiber", "--samples", "1", *COARSE)[0] == EXIT_OK
    assert (env_dir / "fiber.csv").read_text().startswith("NA,eta_TE,eta_TM\n")
    assert run(capsys, "fiber", "--samples", "1", "-o", str(flag_dir), *COARSE)[0] == EXIT_OK
    assert (flag_dir / "fiber.csv").exists()


def test_transfer_uses_cached_table(capsys, dn_table, request):
    path = request.config.cache.mkdir("tflnbsa") / "delta_n_table.json"
    code, out, _ = run(capsys, "transfer", "--set", f"table.cache={path}")
    assert code == EXIT_OK
    vals = dict(line.split(" = ") for line in out.splitlines())
    t_h, r_h = float(vals["t_h"]), float(vals["r_h"])
    assert t_h**2 + r_h**2 == pytest.approx(1.0, abs=1e-12)
    assert float(vals["P3_TE"]) == pytest.approx(t_h**2, abs=1e-9)
    assert 0 < float(vals["transmission_TE"]) <= 1


def test_gap_length_sweep(capsys, dn_table, request, tmp_path):
    path = request.config.cache.mkdir("tflnbsa") / "delta_n_table.json"
    code, out, _ = run(capsys, "sweep", "--axis", "g:30:50:3", "--axis", "L_c:13:14:2",
                       "--set", f"table.cache={path}", "-o", str(tmp_path))
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "g,L_c,zeta,error"
    assert len(lines) == 1 + 6 + 1 and lines[-1].startswith("# min_error = ")


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "tflnbsa", "--help"], capture_output=True, text=True)
    assert p.returncode == 0
    for cmd in ("modes", "coupling-strength", "transfer", "fidelity", "fiber", "sweep", "reproduce"):
        assert cmd in p.stdout
