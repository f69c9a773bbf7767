import json

import pytest

from termcee.cli import run
from termcee.corpus import ingest_parsed
from termcee.pipeline import Checkpoint

from conftest import DATA


def test_complexity_prints_cells(capsys):
    assert run(["complexity", "--scheme", "de-ppn", "--n", "10", "--m", "34", "--r", "6"]) == 0
    out, err = capsys.readouterr()
    assert out.strip() == "2040"
    assert json.loads(err.splitlines()[0])["command"] == "complexity"


def test_complexity_missing_input_is_validation_error(capsys):
    assert run(["complexity", "--scheme", "git", "--n", "10"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_flag_and_bad_ablation_rejected(capsys):
    assert run(["complexity", "--scheme", "git", "--bogus", "1"]) == 1
    assert run(["train", "--corpus", "x", "--out", "y", "--ablate", "trigger"]) == 1


def test_synth_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(["synth", "--docs", "20", "--seed", "7", "--out", str(a)]) == 0
    assert run(["synth", "--docs", "20", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(ingest_parsed(a)) == 20


def test_synth_infeasible_config(tmp_path, capsys):
    assert run(["synth", "--docs", "2", "--events", "1,9", "--m", "8", "--out", str(tmp_path / "x")]) == 1


def test_ingest_split_and_build_gold(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    run(["synth", "--docs", "10", "--seed", "1", "--out", str(corpus)])
    assert run(["ingest", "--corpus", str(corpus), "--split", "0.8,0.1,0.1", "--out", str(tmp_path / "s")]) == 0
    assert "10 documents" in capsys.readouterr().out
    assert [len(ingest_parsed(tmp_path / f"s.{n}.jsonl")) for n in ("train", "dev", "test")] == [8, 1, 1]
    gold = tmp_path / "gold.jsonl"
    assert run(["build-gold", "--corpus", str(corpus), "--m", "8", "--out", str(gold)]) == 0
    rows = [json.loads(line) for line in gold.read_text().splitlines()]
    assert len(rows) == 10 and len(rows[0]["matrices"]) == 5


def test_ingest_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert run(["ingest", "--corpus", str(bad)]) == 1
    assert run(["ingest", "--corpus", str(tmp_path / "missing.jsonl")]) == 1


def test_train_predict_eval_roundtrip(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    run(["synth", "--docs", "3", "--seed", "2", "--tokens", "10", "--out", str(corpus)])
    capsys.readouterr()
    ckpt = tmp_path / "model.ckpt"
    assert run(["train", "--corpus", str(corpus), "--epochs", "2", "--seed", "3", "--ablate", "pos",
                "--out", str(ckpt)]) == 0
    err = capsys.readouterr().err
    resolved = json.loads(err.splitlines()[0])["config"]["train_config"]
    assert resolved["features"]["ablation"] == ["pos"] and resolved["epochs"] == 2
    loaded = Checkpoint.load(ckpt)
    assert loaded.config.features.ablation == {"pos"}
    assert "emb.pos" not in loaded.params
    log_lines = (tmp_path / "model.ckpt.log.jsonl").read_text().splitlines()
    assert [json.loads(x)["epoch"] for x in log_lines] == [1, 2]
    weights = json.loads((tmp_path / "model.ckpt.class_weights.json").read_text())
    assert set(weights) == {"EF", "ER", "EU", "EO", "EP"}

    preds = tmp_path / "pred.jsonl"
    assert run(["predict", "--checkpoint", str(ckpt), "--corpus", str(corpus), "--out", str(preds)]) == 0
    assert len(preds.read_text().splitlines()) == 3
    assert run(["predict", "--checkpoint", str(ckpt), "--corpus", str(corpus), "--ablate", "dep"]) == 1

    report = tmp_path / "report.json"
    assert run(["eval", "--pred", str(preds), "--gold", str(corpus), "--out", str(report)]) == 0
    assert "Avg" in capsys.readouterr().out
    assert json.loads(report.read_text())["doc_count"] == 3

    # predictions over a stopword-filtered doc cannot be scored against unfiltered gold
    sample = str(DATA / "sample_doc.jsonl")
    sample_pred = tmp_path / "sample_pred.jsonl"
    assert run(["predict", "--checkpoint", str(ckpt), "--corpus", sample, "--out", str(sample_pred)]) == 0
    assert run(["eval", "--pred", str(sample_pred), "--gold", sample]) == 0
    capsys.readouterr()
    assert run(["eval", "--pred", str(sample_pred), "--gold", sample, "--no-stoplist"]) == 1
    assert "row plan" in capsys.readouterr().err


def test_train_idempotent(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    run(["synth", "--docs", "2", "--seed", "4", "--tokens", "8", "--out", str(corpus)])
    for name in ("a", "b"):
        assert run(["train", "--corpus", str(corpus), "--epochs", "1", "--seed", "9",
                    "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert (tmp_path / "a.log.jsonl").read_bytes() == (tmp_path / "b.log.jsonl").read_bytes()


def test_gradcheck_subcommand(capsys):
    assert run(["gradcheck", "--coords", "20"]) == 0
    assert "0 failure(s)" in capsys.readouterr().out


def test_clip_norm_default_and_disable(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    run(["synth", "--docs", "1", "--seed", "2", "--tokens", "6", "--out", str(corpus)])
    for flags, want in (([], 5.0), (["--clip-norm", "0"], None), (["--clip-norm", "2.5"], 2.5)):
        capsys.readouterr()
        assert run(["train", "--corpus", str(corpus), "--epochs", "1", "--out", str(tmp_path / "m.ckpt"), *flags]) == 0
        assert json.loads(capsys.readouterr().err.splitlines()[0])["config"]["train_config"]["clip_norm"] == want
