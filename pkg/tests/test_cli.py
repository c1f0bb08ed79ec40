import os

import pytest

from excursion_lab.cli import ConfigError, main, parse_config


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


GOOD = """
[quick-functionals]
experiment = E2
seed = 42
replications = 150
workers = 1
"""


def test_list_prints_the_catalog(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 8
    assert [ln.split()[0] for ln in lines] == [f"E{i}" for i in range(1, 9)]


def test_run_writes_report_and_exits_zero(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, GOOD)
    assert main(["run", cfg]) == 0
    out = capsys.readouterr().out
    assert "quick-functionals (E2): 3/3 checks passed" in out
    report = (tmp_path / "report.csv").read_text()
    lines = report.strip().split("\n")
    assert lines[0] == "experiment,statistic,value,threshold,n,reps,seed,pass"
    assert len(lines) == 4 and all(",true" in ln for ln in lines[1:])


def test_same_config_reproduces_report_byte_for_byte(tmp_path, monkeypatch):
    cfg_text = GOOD + "out_dir = {d}\n"
    d1, d2 = tmp_path / "a", tmp_path / "b"
    c1 = write(tmp_path, cfg_text.format(d=d1), "one.ini")
    c2 = write(tmp_path, cfg_text.format(d=d2), "two.ini")
    assert main(["run", c1]) == 0
    assert main(["run", c2]) == 0
    assert (d1 / "report.csv").read_bytes() == (d2 / "report.csv").read_bytes()


def test_worker_count_does_not_change_the_report(tmp_path):
    base = """
[w]
experiment = E4
seed = 3
replications = 400
workers = {w}
out_dir = {d}
"""
    d1, d2 = tmp_path / "serial", tmp_path / "fanned"
    c1 = write(tmp_path, base.format(w=1, d=d1), "w1.ini")
    c2 = write(tmp_path, base.format(w=3, d=d2), "w3.ini")
    assert main(["run", c1]) == 0
    assert main(["run", c2]) == 0
    assert (d1 / "report.csv").read_bytes() == (d2 / "report.csv").read_bytes()


def test_missing_seed_names_the_key(tmp_path, capsys):
    cfg = write(tmp_path, "[s]\nexperiment = E1\n")
    assert main(["run", cfg]) == 2
    err = capsys.readouterr().err
    assert "'seed'" in err and "[s]" in err


def test_unknown_key_is_rejected(tmp_path, capsys):
    cfg = write(tmp_path, "[s]\nexperiment = E1\nseed = 1\nrepz = 5\n")
    assert main(["run", cfg]) == 2
    assert "'repz'" in capsys.readouterr().err


def test_bad_values_exit_two(tmp_path, capsys):
    for body in ("experiment = E42\nseed = 1",
                 "experiment = E1\nseed = x",
                 "experiment = E1\nseed = 1\nfamily = weibull",
                 "experiment = E1\nseed = 1\nn_ladder = 50, 25"):
        cfg = write(tmp_path, f"[s]\n{body}\n")
        assert main(["run", cfg]) == 2
        assert "config error" in capsys.readouterr().err


def test_missing_or_empty_config_exits_two(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.ini")]) == 2
    capsys.readouterr()
    cfg = write(tmp_path, "# no sections here\n")
    assert main(["run", cfg]) == 2


def test_failing_check_exits_one(tmp_path, monkeypatch, capsys):
    # two ladder rungs one apart cannot halve the collapse distance
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, """
[wont-shrink]
experiment = E8
seed = 5
replications = 30
n_ladder = 25, 26
workers = 1
""")
    assert main(["run", cfg]) == 1
    report = (tmp_path / "report.csv").read_text()
    assert ",false" in report


def test_default_section_and_multiple_runs(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, """
[DEFAULT]
seed = 9
workers = 1

[first]
experiment = E1
replications = 40

[second]
experiment = E2
replications = 120
""")
    assert main(["run", cfg]) == 0
    out = capsys.readouterr().out
    assert "first (E1)" in out and "second (E2)" in out
    report = (tmp_path / "report.csv").read_text()
    assert report.count("\nE1,") == 2 and report.count("\nE2,") == 3


def test_plots_key_writes_sample_files(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, GOOD + "plots = true\n")
    assert main(["run", cfg]) == 0
    names = os.listdir(tmp_path)
    assert any(n.startswith("quick-functionals-E2-area") for n in names)


def test_parse_config_surface(tmp_path):
    cfg = write(tmp_path, """
[s]
experiment = E6
seed = 1
lambda = 2.0
alpha = 0.5
family = uniform
n_ladder = 10, 20
eps = 0.1
dt = 1e-3
replications = 50
workers = 2
out_dir = sub
""")
    ((section, parsed, plots),) = parse_config(cfg)
    assert section == "s" and not plots
    assert parsed.lam == 2.0 and parsed.alpha == 0.5
    assert parsed.n_ladder == (10, 20) and parsed.out_dir == "sub"
    assert parsed.workers == 2 and parsed.dt == 1e-3
    with pytest.raises(ConfigError):
        parse_config(str(tmp_path / "missing.ini"))
