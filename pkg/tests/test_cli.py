import csv
import re

import pytest

from dfqkd import cli
from dfqkd.config import OUTPUT_ENV, ConfigError, build, parse_range


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_range():
    assert parse_range("0:50:10") == [0.0, 10.0, 20.0, 30.0, 40.0]
    assert parse_range("5, 7") == [5.0, 7.0]
    with pytest.raises(ValueError):
        parse_range("0:10")


def test_build_rejects_unknown_keys():
    with pytest.raises(ConfigError) as exc:
        build("scs", {"global": {"p_dark": "1e-9"}})
    assert exc.value.key == "global.p_dark"
    with pytest.raises(ConfigError) as exc:
        build("scs", {"extras": {}})
    assert exc.value.key == "extras"
    with pytest.raises(ConfigError) as exc:
        build("npp", {"source": {"a_v0": "0.9"}})
    assert exc.value.key == "source"


def test_sweep_writes_csv(tmp_path, capsys):
    code, out, _ = run(["scs", "sweep", "--preset", "table1", "--N", "1e12,1e13",
                        "--L", "0:30:10", "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = read_rows(tmp_path / "scs_sweep.csv")
    assert list(rows[0]) == cli.CSV_COLUMNS
    assert len(rows) == 3 * 3
    assert [r["mode"] for r in rows[:3]] == ["exact", "exact", "asymptotic"]
    assert "max distance with key" in out
    assert (tmp_path / "scs_sweep_summary.txt").exists()


def test_csv_number_format(tmp_path, capsys):
    run(["npp", "sweep", "--N", "1e13", "--L", "20", "--no-asymptotic", "--grid-points", "6",
         "--max-refine", "30", "--out", str(tmp_path)], capsys)
    (row,) = read_rows(tmp_path / "npp_sweep.csv")
    assert row["c0"] == ""
    for key in ("mu", "rate_per_pulse", "ln_inv_eps0"):
        digits = row[key].split("e")[0].replace(".", "").replace("-", "").lstrip("0")
        assert len(digits) <= 12
    assert float(row["eps_bar"]) == pytest.approx(1e-10 / 3, rel=1e-11)


def test_env_var_sets_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    code, _, _ = run(["scs", "sweep", "--N", "1e13", "--L", "10", "--no-asymptotic"], capsys)
    assert code == 0
    assert (tmp_path / "scs_sweep.csv").exists()


def test_config_file_and_flag_override(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[global]\ne_d = 0.02\n[run]\nN = 1e13\nL = 10\nasymptotic = no\n")
    run(["scs", "sweep", "--config", str(ini), "--out", str(tmp_path / "a")], capsys)
    run(["scs", "sweep", "--config", str(ini), "--e-d", "0.04", "--out", str(tmp_path / "b")],
        capsys)
    a = read_rows(tmp_path / "a" / "scs_sweep.csv")
    b = read_rows(tmp_path / "b" / "scs_sweep.csv")
    assert len(a) == len(b) == 1
    assert float(a[0]["rate_per_pulse"]) > float(b[0]["rate_per_pulse"])


def test_bad_config_key_exits_2(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[global]\nfoo = 1\n")
    code, _, err = run(["scs", "sweep", "--config", str(ini)], capsys)
    assert code == 2
    assert "global.foo" in err


def test_bad_value_exits_2(capsys):
    code, _, err = run(["npp", "sweep", "--eps-tot", "2"], capsys)
    assert code == 2 and "global.eps_tot" in err


def test_zero_key_everywhere_exits_3(tmp_path, capsys):
    code, _, _ = run(["scs", "sweep", "--N", "1e12", "--L", "400", "--out", str(tmp_path)],
                     capsys)
    assert code == 3


def test_eval_prints_terms(tmp_path, capsys):
    code, out, _ = run(["scs", "eval", "--L", "50", "--N", "1e13", "--mu", "0.012", "--p", "0.2",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "phase_error" in out and "chain_rule" in out
    (row,) = read_rows(tmp_path / "scs_eval.csv")
    assert float(row["mu"]) == 0.012


def test_eval_missing_param_exits_2(tmp_path, capsys):
    code, _, err = run(["npp", "eval", "--mu", "0.02", "--out", str(tmp_path)], capsys)
    assert code == 2 and "params.nu" in err


def test_validate_mc(capsys):
    code, out, _ = run(["validate", "mc", "--protocol", "scs", "--rounds", "1e6", "--seed", "7",
                        "--seeds", "3"], capsys)
    assert code == 0
    assert out.strip().endswith("PASS")
    assert len(re.findall(r"^PASS +n_", out, re.M)) == 3


def test_definetti(capsys):
    code, out, _ = run(["definetti", "--N", "1e12", "--x", "64"], capsys)
    assert code == 0
    exact = float(out.split("ln_g exact:")[1].split()[0])
    bound = float(out.split("ln_g bound:")[1].split()[0])
    assert exact == pytest.approx(1539.8, abs=0.5)
    assert bound == pytest.approx(1542.8, abs=0.5)
    code, out, _ = run(["definetti", "--N", "1e13", "--dims", "6,6,3"], capsys)
    assert "x=11664" in out


def test_definetti_bad_input(capsys):
    code, _, err = run(["definetti", "--N", "1.5"], capsys)
    assert code == 2
