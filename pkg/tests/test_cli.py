import json
import subprocess
import sys
from pathlib import Path

import pytest

from advedit.cli import main
from advedit.edits import apply_script, parse_script
from advedit.trees import parse


@pytest.fixture
def pair(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("a(b(c,d),e)\n")
    b.write_text("a(c,g(d),f)\n")
    return str(a), str(b)


def test_dist_and_script(pair, capsys):
    assert main(["dist", *pair]) == 0
    assert capsys.readouterr().out == "3\n"
    assert main(["script", *pair]) == 0
    out = capsys.readouterr().out.strip()
    assert out == "del(2);rep(4,f);ins(1,2,1,g)"
    assert apply_script(parse("a(b(c,d),e)"), parse_script(out)) == parse("a(c,g(d),f)")


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("a(b")
    assert main(["dist", str(bad), str(bad)]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["attack", "--method", "gradient", "--model", "m", "--data", "d"])


def test_train_attack_roundtrip(tmp_path, capsys):
    data = tmp_path / "d.jsonl"
    model = tmp_path / "m.json"
    assert main(["synth", "--out", str(data), "--n", "16", "--seed", "1"]) == 0
    assert len(data.read_text().splitlines()) == 16
    assert main(["train", "--kind", "sst", "--data", str(data), "--out", str(model)]) == 0
    for method in ("backtrace", "random"):
        out = tmp_path / f"{method}.jsonl"
        assert main(["attack", "--method", method, "--model", str(model), "--data", str(data),
                     "--seed", "3", "--cap", "20", "--out", str(out)]) == 0
        recs = [json.loads(l) for l in out.read_text().splitlines()]
        assert recs
        for r in recs:
            assert {"origin", "method", "success", "prefix_length", "queries",
                    "d_zx", "d_zy", "ratio", "z"} <= set(r)
            assert r["method"] == method
    again = tmp_path / "again.jsonl"
    main(["attack", "--method", "random", "--model", str(model), "--data", str(data),
          "--seed", "3", "--cap", "20", "--out", str(again)])
    assert again.read_text() == (tmp_path / "random.jsonl").read_text()


def test_eval_writes_report_and_sidecar(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synthetic": {"n_examples": 18}, "classifiers": ["linear"], "folds": 3}))
    out = tmp_path / "r.csv"
    assert main(["eval", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "classifier,attack,accuracy_mean,accuracy_std,success_mean,success_std,ratio_mean,ratio_std"
    assert len(lines) == 3
    meta = json.loads(Path(str(out) + ".meta.json").read_text())
    assert {"seed", "grids", "normalize", "conventions"} <= set(meta)


def test_eval_help_documents_keys(capsys):
    with pytest.raises(SystemExit):
        main(["eval", "--help"])
    text = capsys.readouterr().out
    for key in ("dataset", "synthetic", "classifiers", "grids", "folds", "inner_folds", "seed",
                "attacks", "normalize", "tes_ridge", "rec_max_iter"):
        assert key in text


def test_benchmark_runs():
    root = Path(__file__).resolve().parents[1]
    out = subprocess.run([sys.executable, str(root / "benchmarks" / "bench_ted.py"), "--sizes", "5", "--pairs", "2"],
                         capture_output=True, text=True, check=True)
    assert "default backend" in out.stdout
