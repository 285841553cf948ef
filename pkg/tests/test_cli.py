import json
import os
import subprocess
import sys

import pytest

from ustlab import cli


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "ustlab.cli", *args],
                          capture_output=True, text=True)
    return proc


def test_list_contains_required_experiments():
    rc = cli.main(["list"])
    assert rc == 0
    proc = run_cli("list")
    names = proc.stdout.split()
    assert "one-arm" in names and "avalanche-tails" in names


def test_describe_prints_target_law(capsys):
    rc = cli.main(["describe", "one-arm"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "(log n)^(1/3)/n" in out


def test_describe_unknown_exits_2():
    assert cli.main(["describe", "not-an-experiment"]) == 2


def test_run_invalid_configs(tmp_path):
    bad1 = tmp_path / "bad1.toml"
    bad1.write_text('experiment = "nope"\n')
    assert cli.main(["run", str(bad1)]) == 2
    bad2 = tmp_path / "bad2.toml"
    bad2.write_text('experiment = "one-arm"\nbogus_key = 1\n')
    assert cli.main(["run", str(bad2)]) == 2
    bad3 = tmp_path / "bad3.toml"
    bad3.write_text('experiment = "one-arm"\n[params]\nnot_a_param = 3\n')
    assert cli.main(["run", str(bad3)]) == 2


def test_run_and_reproducibility(tmp_path):
    cfg = tmp_path / "noninter.toml"
    cfg.write_text(
        'experiment = "nonintersection"\n'
        "seed = 7\n"
        f'out_dir = "{tmp_path}/out1"\n'
        "[params]\n"
        "ns = [64, 128]\n"
        "samples = 60\n")
    assert cli.main(["run", str(cfg)]) == 0
    csv1 = open(tmp_path / "out1" / "nonintersection.csv", "rb").read()
    cfg2 = tmp_path / "noninter2.toml"
    cfg2.write_text(cfg.read_text().replace("out1", "out2"))
    assert cli.main(["run", str(cfg2), "--workers", "2"]) == 0
    csv2 = open(tmp_path / "out2" / "nonintersection.csv", "rb").read()
    assert csv1 == csv2  # same config + seed -> byte-identical CSV
    summary = json.load(open(tmp_path / "out1" / "nonintersection.json"))
    assert summary["name"] == "nonintersection"


def test_run_budget_exceeded(tmp_path):
    cfg = tmp_path / "arm.toml"
    cfg.write_text(
        'experiment = "one-arm"\n'
        "seed = 1\n"
        f'out_dir = "{tmp_path}/out"\n'
        "budget_seconds = 1e-9\n"
        "[params]\n"
        'models = ["ust"]\n'
        "ns = [8, 16, 32]\n"
        "samples = 2000\n")
    rc = cli.main(["run", str(cfg)])
    assert rc == 3
    assert os.path.exists(tmp_path / "out" / "one-arm.csv")


def test_verify_unknown_suite():
    assert cli.main(["verify", "--suite", "bogus"]) == 2
