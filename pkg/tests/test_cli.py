"""Command line surface: config parsing, subcommands, exit codes."""

import json
import math
import subprocess
import sys

import pytest

from nmsse.cli import ConfigError, main, parse_config
from nmsse.core import HBAR_SI

BASE = """\
m = 1.0
lambda = 0.1
gamma = 1.0
t_max = 1.0
sigma0 = 1.0
N = 257
n_times = 8
"""


def _cfg_file(tmp_path, text=BASE, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_defaults():
    cfg = parse_config(BASE)
    assert cfg.m == 1.0 and cfg.lam == 0.1 and cfg.gammas == (1.0,)
    assert cfg.hbar == 1.0 and cfg.unit_mode == "scaled"
    assert cfg.n_nodes == 257 and cfg.n_times == 8
    assert cfg.n_traj == 1 and cfg.master_seed == 42
    assert cfg.fmt == "both" and cfg.out_dir == "."
    assert cfg.t_min is None and cfg.log_times is False


def test_si_mode_defaults_hbar():
    cfg = parse_config(BASE + "unit_mode = si\n")
    assert cfg.unit_mode == "SI"
    assert cfg.hbar == HBAR_SI


def test_comments_and_blank_lines_are_ignored():
    text = "# leading comment\n\n" + BASE + "x0 = 2.0  # trailing comment\n"
    cfg = parse_config(text)
    assert cfg.x0 == 2.0


def test_gamma_list_with_infinity():
    cfg = parse_config(BASE.replace("gamma = 1.0", "gamma = 2, 10, inf"))
    assert cfg.gammas == (2.0, 10.0, math.inf)


@pytest.mark.parametrize("text,fragment", [
    (BASE + "bogus = 1\n", "unknown key"),
    (BASE + "m = 2.0\n", "duplicate key"),
    (BASE.replace("sigma0 = 1.0\n", ""), "missing required"),
    (BASE.replace("m = 1.0", "m = abc"), "malformed number"),
    (BASE.replace("m = 1.0", "m ="), "empty value"),
    (BASE.replace("gamma = 1.0", "gamma = -1"), "must be positive"),
    (BASE.replace("gamma = 1.0", "gamma = 1, soup"), "malformed gamma"),
    (BASE + "log_times = maybe\n", "malformed boolean"),
    (BASE + "format = xml\n", "format must be"),
    (BASE + "unit_mode = planck\n", "unit_mode must be"),
    (BASE + "t_min = 2.0\n", "t_min"),
    (BASE.replace("sigma0 = 1.0", "sigma0 = 0"), "sigma0"),
    (BASE.replace("N = 257", "N = 1"), "n must be"),
    (BASE + "just words\n", "expected `key = value`"),
])
def test_parse_errors_name_the_problem(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_spread_end_to_end(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)
    out = tmp_path / "out"
    assert main(["spread", "--config", cfg, "--out", str(out)]) == 0
    csv_text = (out / "spread.csv").read_text()
    assert csv_text.startswith("t,sigma,sigma_inf\n")
    assert len(csv_text.strip().split("\n")) == 9
    payload = json.loads((out / "spread.json").read_text())
    assert payload["unit_mode"] == "scaled"
    svg = (out / "spread.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "FAIL" not in capsys.readouterr().out


def test_spread_reruns_are_byte_identical(tmp_path):
    cfg = _cfg_file(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["spread", "--config", cfg, "--out", str(a)]) == 0
    assert main(["spread", "--config", cfg, "--out", str(b)]) == 0
    for name in ("spread.csv", "spread.json", "spread.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_format_and_plot_flags_limit_outputs(tmp_path):
    cfg = _cfg_file(tmp_path)
    out = tmp_path / "out"
    rc = main(["spread", "--config", cfg, "--out", str(out),
               "--format", "csv", "--plot", "none"])
    assert rc == 0
    assert (out / "spread.csv").exists()
    assert not (out / "spread.json").exists()
    assert not (out / "spread.svg").exists()


def test_multi_gamma_spread_orders_curves(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, BASE.replace("gamma = 1.0", "gamma = 1, 4"))
    out = tmp_path / "out"
    assert main(["spread", "--config", cfg, "--out", str(out), "--plot", "none"]) == 0
    header = (out / "spread.csv").read_text().split("\n", 1)[0]
    assert header == "t,sigma[g=1],sigma_inf[g=1],sigma[g=4],sigma_inf[g=4]"
    stdout = capsys.readouterr().out
    assert "check ordering[g=4<=g=1]: PASS" in stdout


def test_ensemble_end_to_end(tmp_path, capsys):
    text = BASE + "n_traj = 96\nx0 = 1.0\np0 = 0.5\nn_times = 4\n"
    cfg = _cfg_file(tmp_path, text.replace("n_times = 8\n", ""))
    out = tmp_path / "out"
    assert main(["ensemble", "--config", cfg, "--out", str(out)]) == 0
    csv_text = (out / "ensemble.csv").read_text()
    assert csv_text.startswith("t,mean_q,se_q,mean_p,se_p,Vq,sigma,se_vq,ess\n")
    stdout = capsys.readouterr().out
    assert "check classical-mean-q: PASS" in stdout
    assert "check classical-mean-p: PASS" in stdout


def test_single_trajectory_ensemble_skips_mean_checks(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)  # n_traj defaults to 1
    out = tmp_path / "out"
    assert main(["ensemble", "--config", cfg, "--out", str(out), "--plot", "none"]) == 0
    assert "SKIP" in capsys.readouterr().out


def test_ensemble_rejects_gamma_lists_and_inf(tmp_path, capsys):
    multi = _cfg_file(tmp_path, BASE.replace("gamma = 1.0", "gamma = 1, 2"), "m.ini")
    assert main(["ensemble", "--config", multi]) == 2
    inf_cfg = _cfg_file(tmp_path, BASE.replace("gamma = 1.0", "gamma = inf"), "i.ini")
    assert main(["ensemble", "--config", inf_cfg]) == 2
    err = capsys.readouterr().err
    assert "config error" in err


def test_kernels_end_to_end(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)
    out = tmp_path / "out"
    assert main(["kernels", "--config", cfg, "--out", str(out)]) == 0
    header = (out / "kernels.csv").read_text().split("\n", 1)[0]
    assert header == ("s,f_re,f_im,h_re,h_im,f_colloc_re,f_colloc_im,"
                      "h_colloc_re,h_colloc_im")
    report = json.loads((out / "kernels_report.json").read_text())
    assert {"boundary", "derivatives", "roots", "route_deviation"} <= set(report)
    assert "FAIL" not in capsys.readouterr().out


def test_oracle_check_end_to_end(tmp_path, capsys):
    # seed 7's path converges monotonically through all four resolutions;
    # not every realization does, so the fixture pins it
    cfg = _cfg_file(tmp_path, BASE + "master_seed = 7\n")
    out = tmp_path / "out"
    assert main(["oracle-check", "--config", cfg, "--out", str(out),
                 "--plot", "none"]) == 0
    lines = (out / "oracle.csv").read_text().strip().split("\n")
    assert lines[0] == "n_segments,err_A,err_B,err_C,err_D,err_E,err_max"
    assert len(lines) == 5
    stdout = capsys.readouterr().out
    assert "check oracle-error-decreasing: PASS" in stdout
    assert "check oracle-final-error: PASS" in stdout


def test_figure1_preset(tmp_path):
    out = tmp_path / "out"
    rc = main(["figure1", "--n-times", "12", "--out", str(out),
               "--format", "csv", "--plot", "none"])
    assert rc == 0
    header = (out / "figure1.csv").read_text().split("\n", 1)[0]
    assert header.split(",")[0] == "t"
    for lab in ("2", "10", "100", "inf"):
        assert f"sigma[g={lab}]" in header


def test_missing_config_file_exits_2(capsys):
    assert main(["spread", "--config", "/nonexistent/nowhere.ini"]) == 2
    assert "config error" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, BASE + "bogus = 1\n")
    assert main(["spread", "--config", cfg]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_seed_flag_overrides_and_validates(tmp_path):
    text = BASE + "n_traj = 8\n"
    cfg = _cfg_file(tmp_path, text)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["ensemble", "--config", cfg, "--out", str(a), "--seed", "1",
                 "--format", "csv", "--plot", "none"]) == 0
    assert main(["ensemble", "--config", cfg, "--out", str(b), "--seed", "2",
                 "--format", "csv", "--plot", "none"]) == 0
    assert (a / "ensemble.csv").read_text() != (b / "ensemble.csv").read_text()
    assert main(["ensemble", "--config", cfg, "--seed", str(2 ** 64)]) == 2


def test_module_entrypoint_runs(tmp_path):
    cfg = _cfg_file(tmp_path)
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "nmsse.cli", "spread", "--config", cfg,
         "--out", str(out), "--format", "csv", "--plot", "none"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "spread.csv").exists()
    assert "check" in proc.stdout
