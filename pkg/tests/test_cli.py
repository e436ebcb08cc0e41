import json

import pytest

from bergschatten.cli import VERIFY_IDS, build_parser, main


def test_parser_has_subcommands():
    ap = build_parser()
    for argv in (["tree", "build"], ["mo", "eval", "--points", "0,0"], ["op", "spectrum"], ["verify", "--list"],
                 ["theorem", "ratio"], ["cutoff"], ["report", "x.json"]):
        ap.parse_args(argv)


def test_verify_list(capsys):
    assert main(["verify", "--list"]) == 0
    assert capsys.readouterr().out.split() == list(VERIFY_IDS)


def test_op_spectrum_and_report(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"D": 32}))
    out = tmp_path / "op"
    assert main(["op", "spectrum", "--operator", "hankel", "--config", str(cfg), "--out", str(out)]) == 0
    assert (tmp_path / "op.spectrum.csv").exists()
    assert main(["report", str(tmp_path / "op.json")]) == 0
    assert "matches_exact_spectrum" in capsys.readouterr().out


def test_mo_eval(capsys):
    assert main(["mo", "eval", "--points", "0,0;0.5,0.3"]) == 0


def test_same_seed_same_bytes(tmp_path):
    for stem in ("a", "b"):
        assert main(["verify", "entrywise", "--seed", "3", "--out", str(tmp_path / stem)]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gamma": -2}))
    assert main(["cutoff", "--config", str(cfg)]) == 2
    assert "gamma" in capsys.readouterr().err


def test_failing_assertions_exit_one(tmp_path):
    # p above the cutoff: the cutoff experiment asserts a plateau it then finds,
    # below it asserts divergence; a p=1.5 run for zbar must still exit 0
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p_list": [1.5]}))
    assert main(["cutoff", "--config", str(cfg)]) in (0, 1)
