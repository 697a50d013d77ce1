from __future__ import annotations

import shutil

import pytest

from multirep.cli import benchmark, main
from multirep.config import ConfigError, RunConfig, resolve_config

from conftest import CORPUS

FAST = ["--set", "dim=16", "--set", "epochs=3", "--set", "batch_size=16", "--set", "workers=1"]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, run = root / "data", root / "run"
    assert main(["extract", "--input", str(CORPUS), "--out", str(data), *FAST]) == 0
    assert main(["train", "--data", str(data), "--out", str(run), *FAST]) == 0
    return data, run


def test_extract_writes_dataset_and_table(tmp_path, capsys):
    out = tmp_path / "d"
    assert main(["extract", "--input", str(CORPUS), "--out", str(out), *FAST]) == 0
    printed = capsys.readouterr().out
    header, values = printed.splitlines()[:2]
    assert header.split() == ["samples", "AST", "CFG", "PDG"]
    assert int(values.split()[0]) == 60
    for name in ("train.txt", "test.txt", "validation.txt", "vocab.tsv", "drops.csv", "config.txt", "VERSION",
                 "extract_metrics.csv", "extract_summary.txt"):
        assert (out / name).exists(), name


def test_extract_is_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, workers in ((a, "1"), (b, "2")):
        assert main(["extract", "--input", str(CORPUS), "--out", str(out), "--workers", workers]) == 0
    for name in ("train.txt", "test.txt", "validation.txt", "vocab.tsv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_extract_on_empty_directory_fails(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["extract", "--input", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == 2
    assert "no .c or .dot files" in capsys.readouterr().err


def test_extract_with_too_small_classes_fails(tmp_path):
    src = tmp_path / "src" / "1"
    src.mkdir(parents=True)
    for f in sorted(CORPUS.glob("1/*.c"))[:3]:
        shutil.copy(f, src)
    assert main(["extract", "--input", str(tmp_path / "src"), "--out", str(tmp_path / "o")]) == 2


def test_eval_without_checkpoint_names_train(pipeline, tmp_path, capsys):
    data, _ = pipeline
    assert main(["eval", "--data", str(data), "--out", str(tmp_path / "nothing")]) == 2
    assert "multirep train" in capsys.readouterr().err


def test_train_without_dataset_names_extract(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "r")]) == 2
    assert "multirep extract" in capsys.readouterr().err


def test_full_pipeline(pipeline, capsys):
    data, run = pipeline
    assert (run / "model.ckpt").exists() and (run / "train_log.csv").exists()
    assert main(["eval", "--data", str(data), "--out", str(run), *FAST]) == 0
    assert "accuracy" in capsys.readouterr().out
    assert (run / "confusion.csv").exists()
    assert main(["embed", "--data", str(data), "--out", str(run), *FAST]) == 0
    assert (run / "vectors.tsv").read_text().splitlines()[0] == "48\t12"
    capsys.readouterr()
    assert main(["clones", "--out", str(run), "--set", "clone_classes=2", "--set", "clone_true=2",
                 "--set", "clone_false=2"]) == 0
    text = capsys.readouterr().out
    assert "theta=0.4" in text and "best theta" in text
    assert main(["sweep", "--out", str(run)]) == 0
    assert (run / "sweep.csv").exists() and (run / "sweep_metrics.csv").exists()


def test_clones_warns_when_pairs_run_short(pipeline, tmp_path, caplog):
    data, run = pipeline
    assert main(["embed", "--data", str(data), "--out", str(tmp_path), "--checkpoint", str(run / "model.ckpt"),
                 *FAST]) == 0
    assert main(["clones", "--out", str(tmp_path)]) == 0
    assert "non-clone pairs available" in caplog.text


def test_eval_reports_vocab_mismatch(pipeline, tmp_path, capsys):
    data, run = pipeline
    other = tmp_path / "other"
    shutil.copytree(data, other)
    (other / "vocab.tsv").write_text((other / "vocab.tsv").read_text() + "label\textra\t6\t1\n")
    assert main(["eval", "--data", str(other), "--out", str(run)]) == 2
    assert "different vocabularies" in capsys.readouterr().err


def test_representation_subset_trains(pipeline, tmp_path):
    data, _ = pipeline
    assert main(["train", "--data", str(data), "--out", str(tmp_path / "r"), "--representations", "ast,pdg",
                 *FAST]) == 0
    assert "representations = ast,pdg" in (tmp_path / "r" / "config.txt").read_text()


def test_usage_errors_exit_one(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["train", "--data", "x", "--out", "y", "--representations", "cfg"]) == 1
    assert main(["train", "--data", "x", "--out", "y", "--set", "nonsense"]) == 1
    assert main(["train", "--data", "x", "--out", "y", "--set", "no_such_key=1"]) == 1
    capsys.readouterr()


def test_synth_command(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "s"), "--classes", "2", "--per-class", "3"]) == 0
    assert len(list((tmp_path / "s").rglob("*.c"))) == 6
    assert main(["synth", "--out", str(tmp_path / "s"), "--classes", "500"]) == 1
    capsys.readouterr()


# ---------------------------------------------------------------------------
# Configuration

def test_config_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ndim = 32\nepochs = 7\nlr = 0.01\n")
    env = {"MULTIREP_EPOCHS": "9", "MULTIREP_DIM": "64"}
    config = resolve_config(path, {"dim": "8"}, env)
    assert (config.dim, config.epochs, config.lr) == (8, 9, 0.01)


def test_config_rejects_bad_values(tmp_path):
    with pytest.raises(ConfigError):
        resolve_config(None, {"dim": "big"}, {})
    with pytest.raises(ConfigError):
        resolve_config(tmp_path / "missing.cfg", {}, {})
    with pytest.raises(ConfigError):
        RunConfig(bench_reps=2)


def test_config_dump_round_trips():
    config = RunConfig(dim=12, representations="ast,cfg")
    from multirep.config import parse_config_text
    assert RunConfig().with_overrides(parse_config_text(config.dumps())) == config


def test_full_size_clone_preset():
    clones = RunConfig(clone_preset="paper-ojclone").clones
    assert (clones.n_classes, clones.n_true, clones.n_false) == (15, 50000, 50000)
    assert RunConfig(clone_true=10).clones.n_true == 10


# ---------------------------------------------------------------------------
# Benchmarks

def test_bench_reports_na_without_samples():
    rows = benchmark("extract", RunConfig(), sources=[])
    assert [r["mean"] for r in rows] == ["n/a"] * 4
    assert [r["representations"] for r in rows] == ["AST", "AST+CFG", "AST+PDG", "AST+CFG+PDG"]


def test_bench_command_writes_csv(pipeline, tmp_path, capsys):
    data, _ = pipeline
    assert main(["bench", "--phase", "infer", "--data", str(data), "--out", str(tmp_path / "b"), *FAST]) == 0
    rows = (tmp_path / "b" / "bench_infer.csv").read_text().splitlines()
    assert rows[0] == "representations,unit,mean,std,reps" and len(rows) == 5
    assert main(["bench", "--phase", "extract", "--out", str(tmp_path / "b")]) == 1
    capsys.readouterr()


def test_bench_training_rates_are_stable(pipeline):
    from multirep.corpus import Vocabularies, read_dataset
    data, _ = pipeline
    splits = {s: read_dataset(data / f"{s}.txt") for s in ("train", "test")}
    rows = benchmark("train", RunConfig(bench_reps=5, dim=16, batch_size=16), splits=splits,
                     vocabs=Vocabularies.load(data / "vocab.tsv"))
    assert all(r["reps"] == 5 and r["std"] / r["mean"] < 0.25 for r in rows)
