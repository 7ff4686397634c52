import json

import pytest

from hrec.cli import build_parser, run
from hrec.config import ConfigError, parse_config
from hrec.dataset import load_dataset
from hrec.evaluator import read_predictions, write_predictions

SYNTH = ["--videos", "6", "--t-n-min", "6", "--t-n-max", "8", "--t-g", "6", "--fd", "4", "--wd", "3", "--seed", "1"]
SMALL = ["--dim", "6", "--epochs", "2", "--ns", "3", "--lr", "0.01"]


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert run(["synth", *SYNTH, "--out", str(out)]) == 0
    return out


def test_synth_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run(["synth", "--videos", "5", "--seed", "1", "--out", str(tmp_path / name)]) == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    assert len(load_dataset(tmp_path / "a")) == 5


def test_validate(data_dir, capsys):
    assert run(["validate", "--data", str(data_dir / "manifest.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["videos"] == 6 and out["dims"] == {"t_g": 6, "fd": 4, "wd": 3}


def test_validate_missing_file(tmp_path, capsys):
    assert run(["validate", "--data", str(tmp_path / "nope.json")]) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("hrec validate: error: missing manifest") and "\n" not in err


def test_gradcheck_single_seed(capsys):
    assert run(["gradcheck", "--seed", "0"]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert last.startswith("max relative error")
    assert float(last.split()[3]) <= 1e-4


def test_eval_perfect_submission(tmp_path, data_dir, capsys):
    ds = load_dataset(data_dir)
    write_predictions(tmp_path / "p.csv", {r.video_id: r.importance for r in ds})
    assert run(["eval", "--data", str(data_dir), "--predictions", str(tmp_path / "p.csv"), "--ns", "3", "--out", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["mean"] == 1.0
    assert "summary_score 1.0" in capsys.readouterr().out


def test_baseline_exact(tmp_path, data_dir):
    out = tmp_path / "b.json"
    assert run(["baseline", "--data", str(data_dir), "--ns", "3", "--mode", "exact", "--out", str(out)]) == 0
    result = json.loads(out.read_text())
    assert result["mode"] == "exact" and 0 < result["mean"] < 1


def _pipeline(root, data_dir):
    data = str(data_dir / "manifest.json")
    assert run(["train", "--data", data, "--out", str(root / "sup"), *SMALL]) == 0
    assert run(["pretrain", "--data", data, "--out", str(root / "pre"), *SMALL]) == 0
    assert run(["train-multitask", "--data", data, "--out", str(root / "mt"), "--pretrained", str(root / "pre/checkpoint.hrec"), "--alpha", "0.3", *SMALL]) == 0
    for name in ("sup", "mt"):
        ckpt = str(root / name / "checkpoint.hrec")
        assert run(["predict", "--checkpoint", ckpt, "--data", data, "--out", str(root / f"{name}.csv")]) == 0
        assert run(["eval", "--data", data, "--predictions", str(root / f"{name}.csv"), "--ns", "3", "--out", str(root / f"{name}.json")]) == 0
    preds = [str(root / "sup.csv"), str(root / "mt.csv")]
    assert run(["ensemble-fit", "--data", data, "--predictions", *preds, "--out", str(root / "w.json")]) == 0
    assert run(["ensemble-apply", "--weights", str(root / "w.json"), "--predictions", *preds, "--out", str(root / "ens.csv")]) == 0


def test_full_pipeline_is_deterministic(tmp_path, data_dir, capsys):
    _pipeline(tmp_path / "a", data_dir)
    _pipeline(tmp_path / "b", data_dir)
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a == b
    for f in ("sup/checkpoint.hrec", "sup/best.hrec", "sup/history.csv", "pre/history.csv", "sup.csv", "ens.csv", "mt.json", "w.json"):
        assert f in a
    assert len(read_predictions(tmp_path / "a/ens.csv")) == 6
    history = (tmp_path / "a/pre/history.csv").read_text().splitlines()
    assert len(history) == 3


def test_pretrain_defaults_alpha(tmp_path, data_dir):
    assert run(["pretrain", "--data", str(data_dir), "--out", str(tmp_path), "--dim", "4", "--epochs", "0"]) == 0
    from hrec.trainer import Checkpoint

    assert Checkpoint.load(tmp_path / "checkpoint.hrec").config.alpha == 0.15


def test_predict_rejects_other_dims(tmp_path, data_dir, capsys):
    assert run(["train", "--data", str(data_dir), "--out", str(tmp_path / "m"), "--dim", "4", "--epochs", "0"]) == 0
    assert run(["synth", "--videos", "2", "--t-g", "6", "--fd", "5", "--wd", "3", "--out", str(tmp_path / "d2")]) == 0
    code = run(["predict", "--checkpoint", str(tmp_path / "m/checkpoint.hrec"), "--data", str(tmp_path / "d2"), "--out", str(tmp_path / "p.csv")])
    assert code == 1
    assert "do not match" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path, data_dir):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"beta": 1.0, "alpha": 0.3, "sfd": 5}))
    assert run(["train-multitask", "--data", str(data_dir), "--out", str(tmp_path / "o"), "--config", str(cfg), "--beta", "0", "--vd", "6", "--d-h", "6", "--epochs", "0"]) == 0
    from hrec.trainer import Checkpoint

    config = Checkpoint.load(tmp_path / "o/checkpoint.hrec").config
    assert (config.beta, config.alpha, config.sfd, config.vd) == (0.0, 0.3, 5, 6)


def test_parse_config_defaults_and_ranges(tmp_path):
    config = parse_config()
    assert (config.sfd, config.vd, config.alpha, config.beta, config.n_s) == (256, 256, 0.02, 1.0, 6)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"alpha": 1.5}))
    with pytest.raises(ConfigError, match=r"alpha=1.5 out of range: must be in \[0, 1\]"):
        parse_config(bad)
    assert parse_config(None, {"beta": 0.0}).beta == 0.0


def test_bad_config_reports_field(tmp_path, data_dir, capsys):
    assert run(["train", "--data", str(data_dir), "--out", str(tmp_path), "--alpha", "1.5"]) == 1
    assert "alpha=1.5 out of range" in capsys.readouterr().err


def _subcommands():
    return sorted(build_parser()._subparsers._group_actions[0].choices)


@pytest.mark.parametrize("name", _subcommands())
def test_help_lists_defaults(name, capsys):
    with pytest.raises(SystemExit) as exc:
        run([name, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "usage: hrec " + name in text
    if name in ("train", "pretrain", "train-multitask"):
        assert "(default: 0.001)" in text and "(default: 256)" in text
    elif name in ("synth", "baseline"):
        assert "(default: " in text


def test_every_command_is_registered():
    expected = {"synth", "validate", "train", "pretrain", "train-multitask", "predict", "eval", "baseline", "ensemble-fit", "ensemble-apply", "gradcheck"}
    assert set(_subcommands()) == expected


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2
    assert "usage:" in capsys.readouterr().err
