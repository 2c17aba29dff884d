import json
import subprocess
import sys

import numpy as np
import pytest

import helpers
from embkit.cli import dispatch
from embkit.manifest import load_manifest


@pytest.fixture(autouse=True)
def _run_in_tmp(tmp_path, monkeypatch):
    # commands without an explicit --manifest write one into the CWD
    monkeypatch.chdir(tmp_path)


@pytest.fixture(scope="module")
def train_corpus(tmp_path_factory):
    rng = np.random.default_rng(0)
    words = [f"ord{i}" for i in range(30)]
    lines = [
        " ".join(rng.choice(words, size=8)) for _ in range(300)
    ]
    path = tmp_path_factory.mktemp("corpus") / "corpus.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def trained_model(tmp_path_factory, train_corpus):
    out = tmp_path_factory.mktemp("model") / "m.bin"
    code = dispatch([
        "train", "-input", str(train_corpus), "-output", str(out),
        "-dim", "8", "-epoch", "1", "-bucket", "2000", "-minCount", "1",
        "-sample", "0",
    ])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def conll_file(tmp_path_factory):
    rng = np.random.default_rng(1)
    entities = {"stockholm": "B-LOC", "anna": "B-PER"}
    fillers = ["bor", "i", "ser", "en", "bil"]
    lines = []
    for _ in range(20):
        for _ in range(int(rng.integers(3, 6))):
            if rng.random() < 0.4:
                w = list(entities)[int(rng.integers(0, 2))]
                lines.append(f"{w} {entities[w]}")
            else:
                lines.append(f"{fillers[int(rng.integers(0, 5))]} O")
        lines.append("")
    path = tmp_path_factory.mktemp("ner") / "data.conll"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


NER_FAST = [
    "--model-dim", "16", "--layers", "1", "--heads", "2",
    "--batch-size", "8", "--max-len", "16", "--lr", "0.01",
    "--dropout", "0",
]


class TestParsing:
    def test_version_exits_zero(self, capsys):
        assert dispatch(["--version"]) == 0
        assert "embkit" in capsys.readouterr().out

    def test_no_subcommand_is_usage_error(self, capsys):
        assert dispatch([]) == 2

    def test_unknown_subcommand(self, capsys):
        assert dispatch(["frobnicate"]) == 2

    def test_unknown_flag(self, capsys):
        assert dispatch(["nn", "--model", "x", "--word", "y", "--zzz"]) == 2


class TestTrain:
    def test_contradictory_mode_flags(self, train_corpus, tmp_path, capsys):
        code = dispatch([
            "train", "-input", str(train_corpus),
            "-output", str(tmp_path / "m.bin"),
            "-mode", "word2vec", "-minn", "2",
        ])
        assert code == 2
        err = capsys.readouterr().err
        assert err.count("\n") == 1
        assert err.startswith("embkit: error: config:")
        assert "-minn" in err

    def test_missing_input_fails_and_marks_manifest(self, tmp_path, capsys):
        out = tmp_path / "m.bin"
        code = dispatch([
            "train", "-input", str(tmp_path / "absent.txt"),
            "-output", str(out), "-epoch", "1",
        ])
        assert code == 1
        manifest = load_manifest(str(out) + ".manifest.json")
        assert manifest["status"] == "failed"

    def test_outputs_and_manifest(self, trained_model):
        vec = str(trained_model) + ".vec"
        manifest = load_manifest(str(trained_model) + ".manifest.json")
        assert trained_model.exists()
        assert manifest["status"] == "completed"
        assert manifest["subcommand"] == "train"
        assert manifest["seeds"] == {"seed": 1}
        assert manifest["flags"]["dim"] == 8
        assert manifest["inputs"]["input"].startswith("sha256:")
        assert manifest["outputs"]["vectors"] == vec
        assert manifest["finished_at"] is not None
        header = open(vec, encoding="utf-8").readline().split()
        assert header[1] == "8"

    def test_json_output(self, train_corpus, tmp_path, capsys):
        out = tmp_path / "j.bin"
        code = dispatch([
            "train", "-input", str(train_corpus), "-output", str(out),
            "-dim", "8", "-epoch", "2", "-bucket", "2000", "-minCount", "1",
            "--json",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["dim"] == 8
        assert len(payload["epoch_losses"]) == 2

    def test_rerun_reproduces_bytes(self, train_corpus, tmp_path):
        outs = []
        for name in ("a.bin", "b.bin"):
            out = tmp_path / name
            code = dispatch([
                "train", "-input", str(train_corpus), "-output", str(out),
                "-dim", "8", "-epoch", "1", "-bucket", "2000",
                "-minCount", "1", "-seed", "7",
            ])
            assert code == 0
            outs.append(out)
        assert outs[0].read_bytes() == outs[1].read_bytes()
        a_vec = (tmp_path / "a.bin.vec").read_bytes()
        b_vec = (tmp_path / "b.bin.vec").read_bytes()
        assert a_vec == b_vec


class TestEvalCommands:
    def test_eval_analogy_json(self, trained_model, tmp_path, capsys):
        ts = tmp_path / "analogy.txt"
        ts.write_text(
            ": sem-test\nord0 ord1 ord2 ord3\nord4 ord5 ord6 ord7\n",
            encoding="utf-8",
        )
        code = dispatch([
            "eval-analogy", "--model", str(trained_model),
            "--test-set", str(ts), "--json",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["sections"]["sem-test"]["attempted"] == 2

    def test_eval_analogy_text_table(self, trained_model, tmp_path, capsys):
        ts = tmp_path / "analogy.txt"
        ts.write_text(": sem-test\nord0 ord1 ord2 ord3\n", encoding="utf-8")
        code = dispatch([
            "eval-analogy", "--model", str(trained_model), "--test-set", str(ts),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "sem-test" in out and "[overall]" in out

    def test_eval_wordsim(self, trained_model, tmp_path, capsys):
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text(
            "ord0\tord1\t5.0\nord2\tord3\t3.0\nord4\tord5\t1.0\n",
            encoding="utf-8",
        )
        code = dispatch([
            "eval-wordsim", "--model", str(trained_model),
            "--pairs", str(pairs), "--json",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["used"] == 3
        assert -1.0 <= payload["spearman"] <= 1.0

    def test_nn_text_and_binary_agree(self, trained_model, capsys):
        assert dispatch([
            "nn", "--model", str(trained_model), "--word", "ord0",
            "--k", "3", "--json",
        ]) == 0
        from_bin = json.loads(capsys.readouterr().out)
        assert dispatch([
            "nn", "--model", str(trained_model) + ".vec", "--word", "ord0",
            "--k", "3", "--json",
        ]) == 0
        from_text = json.loads(capsys.readouterr().out)
        assert [n["word"] for n in from_bin["neighbors"]] == \
               [n["word"] for n in from_text["neighbors"]]

    def test_nn_oov_word(self, trained_model, capsys):
        code = dispatch([
            "nn", "--model", str(trained_model) + ".vec", "--word", "xyzzy",
        ])
        assert code == 1
        assert capsys.readouterr().err.startswith("embkit: error: oov:")


class TestValidateSet:
    def test_clean_swedish_layout(self, tmp_path, capsys):
        f = tmp_path / "set.txt"
        f.write_text("\n".join(helpers.swedish_shaped_lines()), encoding="utf-8")
        code = dispatch(["validate-set", str(f), "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["ok"] is True
        assert payload["total"] == 20_637

    def test_mismatch_exits_one_manifest_completed(self, tmp_path, capsys):
        counts = dict(helpers.SWEDISH_SECTION_COUNTS)
        counts["family"] += 2
        f = tmp_path / "set.txt"
        f.write_text(
            "\n".join(helpers.synthetic_analogy_lines(counts)), encoding="utf-8"
        )
        mpath = tmp_path / "m.json"
        code = dispatch([
            "validate-set", str(f), "--json", "--manifest", str(mpath),
        ])
        assert code == 1
        payload = json.loads(capsys.readouterr().out)
        assert any("family" in d for d in payload["discrepancies"])
        # the run completed; the exit code alone carries the verdict
        assert load_manifest(mpath)["status"] == "completed"

    def test_layout_none_summarizes_only(self, tmp_path, capsys):
        f = tmp_path / "set.txt"
        f.write_text(": tiny\na b c d\n", encoding="utf-8")
        code = dispatch(["validate-set", str(f), "--layout", "none", "--json"])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["total"] == 1


class TestNerCommands:
    def test_train_eval_cycle(self, conll_file, tmp_path, capsys):
        out = tmp_path / "run"
        code = dispatch([
            "ner", "train", "--data", str(conll_file), "--out", str(out),
            "--runs", "1", "--epochs", "2", "--seed", "3", *NER_FAST, "--json",
        ])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert len(report["runs"]) == 1
        assert (out / "runs.json").exists()
        assert (out / "tagger.pt").exists()
        assert load_manifest(out / "manifest.json")["status"] == "completed"

        code = dispatch([
            "ner", "eval", "--model", str(out), "--data", str(conll_file),
            "--split", "test", "--json",
        ])
        assert code == 0
        metrics = json.loads(capsys.readouterr().out)
        assert 0.0 <= metrics["f1"] <= 1.0

        code = dispatch([
            "ner", "eval", "--model", str(out), "--data", str(conll_file),
            "--split", "all", "--json",
        ])
        assert code == 0

    def test_search_writes_trials(self, conll_file, tmp_path, capsys):
        out = tmp_path / "searchdir"
        code = dispatch([
            "ner", "search", "--data", str(conll_file), "--budget", "2",
            "--proxy-epochs", "1", "--epochs", "2", *NER_FAST,
            "--out", str(out), "--json",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["trials"]) == 2
        assert "best" in payload
        on_disk = json.loads((out / "search.json").read_text(encoding="utf-8"))
        assert on_disk["trials"]

    def test_search_without_heads_flag(self, conll_file, capsys):
        # default --heads 6 does not divide 16; search must still run
        # because every trial picks its own head count
        code = dispatch([
            "ner", "search", "--data", str(conll_file), "--budget", "1",
            "--proxy-epochs", "1", "--epochs", "1", "--model-dim", "16",
            "--layers", "1", "--batch-size", "8", "--max-len", "16",
            "--lr", "0.01", "--dropout", "0", "--json",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["best"]["model_dim"] == 16
        assert payload["best"]["heads"] in (2, 4)


class TestStatsCommand:
    def test_bootstrap_json(self, tmp_path, capsys):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        a.write_text("0.9\n0.91\n0.92\n", encoding="utf-8")
        b.write_text("0.5\n0.52\n0.51\n", encoding="utf-8")
        code = dispatch([
            "stats", "bootstrap", "--a", str(a), "--b", str(b),
            "--resamples", "500", "--seed", "1",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["significant"] is True
        assert payload["lo"] <= payload["point_estimate"] <= payload["hi"]

    def test_bootstrap_from_runs_json(self, tmp_path, capsys):
        a = tmp_path / "runs_a.json"
        b = tmp_path / "b.txt"
        a.write_text(json.dumps({
            "runs": [
                {"test": {"f1": 0.8}}, {"test": {"f1": 0.82}},
                {"test": {"f1": 0.81}},
            ]
        }), encoding="utf-8")
        b.write_text("0.80\n0.81\n0.82\n", encoding="utf-8")
        code = dispatch([
            "stats", "bootstrap", "--a", str(a), "--b", str(b),
            "--resamples", "500",
        ])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["significant"] is False


class TestConsoleScript:
    def test_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "embkit.cli", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "embkit" in proc.stdout
