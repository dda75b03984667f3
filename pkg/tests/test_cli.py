import json

import numpy as np
import pytest

from gmk import synth
from gmk.cli import main
from gmk.motion import PoseSequence, load_with_manifest


@pytest.fixture
def static_inputs(tmp_path):
    pose = synth.write_pose(synth.static_sequence(3.0), tmp_path / "static.csv")
    words = synth.write_words([{"word": "a", "start": 0.0, "end": 0.5},
                               {"word": "b", "start": 0.5, "end": 1.0},
                               {"word": "c", "start": 1.0, "end": 1.5}], tmp_path / "words.jsonl")
    return pose, words


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def small_config(tmp_path, **tok):
    cfg = {"tokenizer": {"n": 2, "d": 3, "K": 16, "iters": 15, **tok}}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_analyze_static(static_inputs, capsys):
    pose, words = static_inputs
    code, out, _ = run(["analyze", pose, "--words", words], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["canonicalized"] is True
    (win,) = rep["windows"]
    assert win["words"] == ["a", "b", "c"]
    assert all(r["magnitude"] == "static" for r in win["regions"])
    assert rep["config"]["tokenizer"]["K"] == 8192


def test_analyze_deterministic(tmp_path, capsys):
    rng = np.random.default_rng(0)
    pose = synth.write_pose(synth.gesture_sequence(rng, 6.0), tmp_path / "g.csv")
    words = synth.write_words(synth.word_timings(rng, 6.0), tmp_path / "w.jsonl")
    for name in ("a.json", "b.json"):
        assert run(["analyze", pose, "--words", words, "--out", tmp_path / name], capsys)[0] == 0
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a == b
    rep = json.loads(a)
    assert len(rep["windows"]) >= 3
    assert any(r["magnitude"] != "static" for w in rep["windows"] for r in w["regions"])


def test_analyze_missing_manifest(static_inputs, capsys):
    pose, words = static_inputs
    pose.with_suffix(".json").unlink()
    code, _, err = run(["analyze", pose, "--words", words], capsys)
    assert code == 2
    msg = json.loads(err)
    assert "static.json" in msg["message"] and msg["error"] == "MissingFile"


def test_config_error_exit_code(static_inputs, tmp_path, capsys):
    pose, words = static_inputs
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"tokenizer": {"bogus": 1}}))
    code, _, err = run(["analyze", pose, "--words", words, "--config", bad], capsys)
    assert code == 3 and json.loads(err)["error"] == "ConfigError"


def test_windows_subcommand(static_inputs, capsys):
    _, words = static_inputs
    code, out, _ = run(["windows", "--words", words, "--fps", "30"], capsys)
    assert code == 0
    assert json.loads(out)["windows"][0]["frame_span"] == [0, 45]


def _corpus(tmp_path, n=3):
    rng = np.random.default_rng(1)
    return [synth.write_pose(synth.gesture_sequence(rng, 2.0), tmp_path / f"p{i}.csv") for i in range(n)]


def test_train_codebook_deterministic_and_monotone(tmp_path, capsys):
    poses = _corpus(tmp_path)
    cfg = small_config(tmp_path)
    for name in ("a.cb", "b.cb"):
        code, out, _ = run(["train-codebook", "--poses", *poses, "--config", cfg, "--seed", 5,
                            "--out", tmp_path / name], capsys)
        assert code == 0
    assert (tmp_path / "a.cb").read_bytes() == (tmp_path / "b.cb").read_bytes()
    assert (tmp_path / "a.cb.codec").read_bytes() == (tmp_path / "b.cb.codec").read_bytes()
    log = [json.loads(line) for line in (tmp_path / "a.cb.log.jsonl").read_text().splitlines()]
    errs = [row["mean_error"] for row in log]
    assert len(errs) == 15 and all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    header = json.loads((tmp_path / "a.cb").read_bytes().split(b"\n", 1)[0])
    assert header["seed"] == 5 and header["K"] == 16


def test_train_codebook_reduces_k(tmp_path, capsys):
    poses = _corpus(tmp_path, n=1)
    cfg = small_config(tmp_path, K=1000)
    code, out, err = run(["train-codebook", "--poses", *poses, "--config", cfg, "--out", tmp_path / "c.cb"], capsys)
    assert code == 0 and "reducing K" in err
    header = json.loads((tmp_path / "c.cb").read_bytes().split(b"\n", 1)[0])
    assert header["K"] == 60 and header["K_requested"] == 1000


def test_train_codebook_dimension_config_error(tmp_path, capsys):
    poses = _corpus(tmp_path, n=1)
    code, _, err = run(["train-codebook", "--poses", *poses, "--out", tmp_path / "x.cb"], capsys)
    assert code == 3


def test_tokenize(tmp_path, capsys):
    poses = _corpus(tmp_path)
    cfg = small_config(tmp_path)
    run(["train-codebook", "--poses", *poses, "--config", cfg, "--out", tmp_path / "a.cb"], capsys)
    code, out, _ = run(["tokenize", poses[0], "--codebook", tmp_path / "a.cb"], capsys)
    assert code == 0
    rows = [list(map(int, line.split(","))) for line in out.splitlines()]
    assert len(rows) == 60 and all(len(r) == 2 and all(0 <= v < 16 for v in r) for r in rows)


def test_evaluate_self_and_offset(tmp_path, capsys):
    real = _corpus(tmp_path)
    cfg = small_config(tmp_path)
    run(["train-codebook", "--poses", *real, "--config", cfg, "--out", tmp_path / "a.cb"], capsys)
    q = np.random.default_rng(2).normal(size=(1, 4))
    np.savetxt(tmp_path / "q.csv", q, delimiter=",")
    np.savetxt(tmp_path / "t.csv", -q, delimiter=",")
    ecfg = tmp_path / "ecfg.json"
    ecfg.write_text(json.dumps({"metrics": {"k_list": [1]}}))

    code, out, _ = run(["evaluate", "--real", *real, "--generated", *real, "--codebook", tmp_path / "a.cb",
                        "--queries", tmp_path / "q.csv", "--targets", tmp_path / "t.csv", "--config", ecfg], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["fgd"] <= 1e-9
    assert rep["l1_diversity"] == rep["l1_diversity_real"]
    assert rep["bc"] == 1.0
    assert rep["recall"]["global"]["r1"] == 100.0 and rep["recall"]["per_batch"]["r1"] == 100.0
    assert rep["rfgd"] is not None and rep["rfgd"] >= 0

    shifted = []
    for i, p in enumerate(real):
        seq = load_with_manifest(p)
        shifted.append(synth.write_pose(PoseSequence(seq.data + 0.3, seq.fps, seq.channels), tmp_path / f"s{i}.csv"))
    code, out, _ = run(["evaluate", "--real", *real, "--generated", *shifted], capsys)
    rep = json.loads(out)
    C = len(synth.upper_body_layout())
    assert rep["fgd"] == pytest.approx(C * 0.09, abs=1e-6)


def test_stats(tmp_path, capsys):
    rng = np.random.default_rng(3)
    recs = synth.annotation_corpus(rng, 60)
    p = tmp_path / "ann.jsonl"
    p.write_text("".join(json.dumps(r) + "\n" for r in recs))
    code, out, _ = run(["stats", p, "--cooccur-csv", tmp_path / "co.csv"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["n_records"] == 60
    assert sum(rep["split_counts"].values()) == 60
    assert abs(sum(rep["share"].values()) - 1.0) <= 1e-12
    assert rep["correlations"]["word_count"] > 0.5
    lines = (tmp_path / "co.csv").read_text().splitlines()
    assert len(lines) == 17
