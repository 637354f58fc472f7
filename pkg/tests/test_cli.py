"""CLI thin client: subcommands, exit codes, resolved-config echo."""

import json

import pytest

from forumcohort.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def synth_args(out, seed="1"):
    return [
        "synth",
        "--out",
        out,
        "--seed",
        seed,
        "--set",
        "synth_mode=unigram",
        "--set",
        "synth_users_per_class=15",
        "--set",
        "synth_posts_per_user=2,3",
        "--set",
        "synth_doc_len=4,8",
        "--set",
        "min_count=1",
    ]


def result_of(stdout):
    return json.loads(stdout.split("# result\n", 1)[1])


class TestHappyPath:
    def test_full_pipeline_through_cli(self, capsys, tmp_path):
        out = str(tmp_path)

        code, stdout, _ = run(capsys, *synth_args(out))
        assert code == 0
        assert "# resolved config" in stdout
        assert "synth_mode = unigram" in stdout
        synth = result_of(stdout)

        code, stdout, _ = run(
            capsys, "split", "--out", out, "--seed", "1", "--labeled", synth["corpus_path"]
        )
        assert code == 0
        split = result_of(stdout)

        code, stdout, _ = run(
            capsys,
            "train",
            "--out",
            out,
            "--seed",
            "1",
            "--train",
            split["train_path"],
            "--model",
            "nb",
            "--set",
            "min_count=1",
        )
        assert code == 0
        train = result_of(stdout)

        code, stdout, _ = run(
            capsys,
            "evaluate",
            "--out",
            out,
            "--model",
            train["model_path"],
            "--vocab",
            train["vocab_path"],
            "--test",
            split["test_path"],
        )
        assert code == 0
        evaluation = result_of(stdout)
        assert evaluation["n_examples"] == split["n_test"]

        with open(split["test_path"], encoding="utf-8") as fh:
            post_id = json.loads(fh.readline())["id"]
        code, stdout, _ = run(
            capsys,
            "explain",
            "--out",
            out,
            "--model",
            train["model_path"],
            "--vocab",
            train["vocab_path"],
            "--store",
            split["test_path"],
            "--post-id",
            post_id,
            "--max-phrase-len",
            "2",
        )
        assert code == 0
        explain = result_of(stdout)
        assert explain["tsv_path"].endswith(".tsv")

        code, stdout, _ = run(
            capsys,
            "report",
            "--out",
            out,
            "--eval",
            evaluation["eval_path"],
            "--manifest",
            split["manifest_path"],
        )
        assert code == 0
        report = result_of(stdout)
        assert report["n_models"] == 1

    def test_predict_roundtrip(self, capsys, tmp_path):
        out = str(tmp_path)
        run(capsys, *synth_args(out))
        code, stdout, _ = run(
            capsys, "split", "--out", out, "--seed", "1", "--labeled", f"{out}/synth.ndjson"
        )
        split = result_of(stdout)
        code, stdout, _ = run(
            capsys, "train", "--out", out, "--train", split["train_path"],
            "--model", "lr", "--set", "min_count=1", "--set", "lr_epochs=50",
        )
        train = result_of(stdout)
        code, stdout, _ = run(
            capsys, "predict", "--model", train["model_path"], "--vocab",
            train["vocab_path"], "--text", "sigpos w001",
        )
        assert code == 0
        probs = result_of(stdout)["probabilities"]
        assert len(probs) == 1 and len(probs[0]) == 2


class TestExitCodes:
    def test_usage_error_is_1(self, capsys, tmp_path):
        code, _, err = run(capsys, "synth", "--out", str(tmp_path), "--set", "bogus=1")
        assert code == 1
        assert "usage" in err

    def test_data_error_is_2(self, capsys, tmp_path):
        code, _, err = run(
            capsys, "label", "--out", str(tmp_path), "--posts", str(tmp_path / "missing.ndjson")
        )
        assert code == 2
        assert "data" in err

    def test_numeric_error_is_3(self, capsys, tmp_path):
        out = str(tmp_path)
        run(capsys, *synth_args(out))
        code, stdout, _ = run(capsys, "split", "--out", out, "--labeled", f"{out}/synth.ndjson")
        split = result_of(stdout)
        # an infinite learning rate drives the loss non-finite immediately
        code, _, err = run(
            capsys,
            "train",
            "--out",
            out,
            "--train",
            split["train_path"],
            "--model",
            "transformer",
            "--set",
            "min_count=1",
            "--set",
            "max_len=10",
            "--set",
            "d_model=8",
            "--set",
            "n_heads=2",
            "--set",
            "n_layers=1",
            "--set",
            "d_ff=16",
            "--set",
            "epochs=2",
            "--set",
            "learning_rate=1e400",
        )
        assert code == 3
        assert "numeric" in err

    def test_bad_arguments_exit_1(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["train", "--model", "nb"])  # missing --train
        assert excinfo.value.code == 1

    def test_unknown_subcommand_exits_1(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["transmogrify"])
        assert excinfo.value.code == 1

    def test_malformed_set_flag(self, capsys, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["synth", "--out", str(tmp_path), "--set", "no-equals-sign"])
        assert excinfo.value.code == 1
