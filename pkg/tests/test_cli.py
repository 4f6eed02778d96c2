"""End-to-end command line behaviour through main(argv)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from bleubound.cli import GRADCHECK_THRESHOLD, main


@pytest.fixture
def corpus(tmp_path):
    cand = tmp_path / "cand.txt"
    ref = tmp_path / "ref.txt"
    cand.write_text("the cat the cat\n")
    ref.write_text("the cat sat\n")
    return str(cand), str(ref)


@pytest.fixture
def uniform_instance(tmp_path):
    logits = tmp_path / "logits.csv"
    ref = tmp_path / "ref.txt"
    np.savetxt(logits, np.zeros((2, 2)), delimiter=",")
    ref.write_text("a b\n")
    return str(logits), str(ref)


class TestBleuCommand:
    def test_jsonl_output(self, corpus, capsys):
        cand, ref = corpus
        assert main(["bleu", cand, ref, "--max-order", "2"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        pair = json.loads(lines[0])
        assert pair["score"] == pytest.approx((1.0 / 6.0) ** 0.5, abs=1e-9)
        assert pair["overlaps"] == [2, 1]
        corpus_row = json.loads(lines[1])
        assert corpus_row["corpus"]["score"] == pytest.approx(
            (1.0 / 6.0) ** 0.5, abs=1e-9
        )

    def test_csv_output(self, corpus, capsys):
        cand, ref = corpus
        assert main(["bleu", cand, ref, "--max-order", "2", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "pair,score,bp,cand_len,ref_len,p1,p2,o1,o2"
        assert len(lines) == 3
        assert lines[1].startswith("0,")
        assert lines[2].startswith("corpus,")

    def test_output_file(self, corpus, tmp_path, capsys):
        cand, ref = corpus
        out = tmp_path / "scores.jsonl"
        assert main(["bleu", cand, ref, "--output", str(out)]) == 0
        assert capsys.readouterr().out == ""
        assert len(out.read_text().strip().splitlines()) == 2

    def test_mismatched_line_counts(self, tmp_path, capsys):
        cand = tmp_path / "c.txt"
        ref = tmp_path / "r.txt"
        cand.write_text("a b\n")
        ref.write_text("a b\nc d\n")
        assert main(["bleu", str(cand), str(ref)]) == 2
        err = capsys.readouterr().err
        assert "1" in err and "2" in err

    def test_missing_file(self, tmp_path, capsys):
        ref = tmp_path / "r.txt"
        ref.write_text("a\n")
        assert main(["bleu", str(tmp_path / "nope.txt"), str(ref)]) == 3
        assert "error" in capsys.readouterr().err

    def test_bad_weights(self, corpus, capsys):
        cand, ref = corpus
        assert main(["bleu", cand, ref, "--max-order", "2", "--weights", "0.9"]) == 2
        assert main(["bleu", cand, ref, "--max-order", "2", "--weights", "x,y"]) == 2
        capsys.readouterr()


class TestLbCommand:
    def test_uniform_values(self, uniform_instance, capsys):
        logits, ref = uniform_instance
        assert main(["lb", logits, ref, "--max-order", "1"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {
            "lb_overlaps",
            "lb_precisions",
            "smoothed",
            "aggregate",
            "bound_value",
        }
        assert payload["lb_overlaps"][0] == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert payload["aggregate"] == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_smoothing_flag(self, uniform_instance, capsys):
        logits, ref = uniform_instance
        assert main(["lb", logits, ref, "--max-order", "1", "--smoothing"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["aggregate"] == pytest.approx(7.0 / 9.0, abs=1e-12)

    def test_csv_format(self, uniform_instance, capsys):
        logits, ref = uniform_instance
        assert main(["lb", logits, ref, "--max-order", "1", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        rows = dict(line.split(",", 1) for line in lines)
        assert float(rows["aggregate"]) == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert ";" not in rows["aggregate"]

    def test_header_row_skipped(self, tmp_path, capsys):
        logits = tmp_path / "logits.csv"
        logits.write_text("c0,c1\n0.0,0.0\n0.0,0.0\n")
        ref = tmp_path / "ref.txt"
        ref.write_text("a b\n")
        assert main(["lb", str(logits), str(ref), "--max-order", "1", "--header"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["aggregate"] == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_vocab_mismatch(self, tmp_path, capsys):
        logits = tmp_path / "logits.csv"
        np.savetxt(logits, np.zeros((2, 2)), delimiter=",")
        ref = tmp_path / "ref.txt"
        ref.write_text("a b\n")
        vocab = tmp_path / "vocab.txt"
        vocab.write_text("a\nb\nc\n")
        assert main(["lb", str(logits), str(ref), "--vocab", str(vocab)]) == 2
        assert "columns" in capsys.readouterr().err

    def test_multi_line_ref_rejected(self, tmp_path, capsys):
        logits = tmp_path / "logits.csv"
        np.savetxt(logits, np.zeros((2, 2)), delimiter=",")
        ref = tmp_path / "ref.txt"
        ref.write_text("a b\nc d\n")
        assert main(["lb", str(logits), str(ref)]) == 2
        capsys.readouterr()

    def test_unparseable_logits(self, tmp_path, capsys):
        logits = tmp_path / "logits.csv"
        logits.write_text("zero,one\n")
        ref = tmp_path / "ref.txt"
        ref.write_text("a b\n")
        assert main(["lb", str(logits), str(ref)]) == 3
        capsys.readouterr()

    def test_output_file(self, uniform_instance, tmp_path, capsys):
        logits, ref = uniform_instance
        out = tmp_path / "lb.json"
        assert main(["lb", logits, ref, "--max-order", "1", "--output", str(out)]) == 0
        assert capsys.readouterr().out == ""
        assert json.loads(out.read_text())["aggregate"] == pytest.approx(2.0 / 3.0)


class TestExpectedCommand:
    def test_exhaustive_bleu(self, uniform_instance, capsys):
        logits, ref = uniform_instance
        assert main(["expected", logits, ref, "--max-order", "1", "--mode", "exhaustive"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["value"] == pytest.approx(0.75, abs=1e-12)
        assert payload["outcomes"] == 4

    def test_order_precision(self, uniform_instance, capsys):
        logits, ref = uniform_instance
        args = ["expected", logits, ref, "--mode", "exhaustive", "--order", "1", "--precision"]
        assert main(args) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["value"] == pytest.approx(0.75, abs=1e-12)

    def test_order_overlap(self, uniform_instance, capsys):
        logits, ref = uniform_instance
        args = ["expected", logits, ref, "--mode", "exhaustive", "--order", "2"]
        assert main(args) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["value"] == pytest.approx(0.25, abs=1e-12)

    def test_order_requires_exhaustive(self, uniform_instance, capsys):
        logits, ref = uniform_instance
        assert main(["expected", logits, ref, "--order", "1"]) == 2
        capsys.readouterr()

    def test_mc_deterministic_and_close(self, uniform_instance, capsys):
        logits, ref = uniform_instance
        args = [
            "expected", logits, ref,
            "--max-order", "1", "--samples", "4096", "--seed", "5",
        ]
        assert main(args) == 0
        first = json.loads(capsys.readouterr().out)
        assert main(args) == 0
        second = json.loads(capsys.readouterr().out)
        assert first == second
        assert set(first) == {"mean", "std_error", "samples", "seed"}
        assert first["samples"] == 4096
        assert abs(first["mean"] - 0.75) <= 4.0 * first["std_error"]

    def test_enumeration_cap_exit(self, tmp_path, capsys):
        logits = tmp_path / "logits.csv"
        np.savetxt(logits, np.zeros((21, 2)), delimiter=",")
        ref = tmp_path / "ref.txt"
        ref.write_text("a b\n")
        args = ["expected", str(logits), str(ref), "--mode", "exhaustive"]
        assert main(args) == 4
        assert "error" in capsys.readouterr().err


class TestGradcheckCommand:
    def test_clean_run_exits_zero(self, capsys):
        assert main(["gradcheck", "--instances", "3", "--max-order", "2"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {
            "max_rel_error",
            "max_abs_error",
            "step",
            "entries_checked",
        }
        assert payload["max_rel_error"] < GRADCHECK_THRESHOLD

    def test_corrupt_run_exits_one(self, capsys):
        assert main(["gradcheck", "--instances", "2", "--corrupt", "0.01"]) == 1
        payload = json.loads(capsys.readouterr().out)
        assert payload["max_rel_error"] >= GRADCHECK_THRESHOLD


TOY_ARGS = [
    "toy",
    "--len", "3",
    "--vocab-size", "5",
    "--steps", "4",
    "--eval-every", "2",
    "--samples", "64",
    "--max-order", "1",
    "--seed", "3",
]


class TestToyCommand:
    def test_stdout_curve_and_stderr_summary(self, capsys):
        assert main(TOY_ARGS) == 0
        captured = capsys.readouterr()
        lines = captured.out.strip().splitlines()
        assert lines[0] == "step,lb,exact_argmax_bleu,mc_mean,mc_stderr"
        assert len(lines) == 4  # header + evals at steps 0, 2, 4
        summary = json.loads(captured.err)
        assert summary["steps"] == 4
        assert "figure" not in summary

    def test_output_file_renders_figure(self, tmp_path, capsys):
        out = tmp_path / "curve.csv"
        assert main(TOY_ARGS + ["--output", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["curve_csv"] == str(out)
        figure = tmp_path / "curve.png"
        assert summary["figure"] == str(figure)
        assert figure.stat().st_size > 0
        header = out.read_text().splitlines()[0]
        assert header == "step,lb,exact_argmax_bleu,mc_mean,mc_stderr"

    def test_no_plot_skips_figure(self, tmp_path, capsys):
        out = tmp_path / "curve.csv"
        assert main(TOY_ARGS + ["--output", str(out), "--no-plot"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert "figure" not in summary
        assert not (tmp_path / "curve.png").exists()

    def test_explicit_plot_path(self, tmp_path, capsys):
        fig = tmp_path / "fig.png"
        assert main(TOY_ARGS + ["--plot", str(fig)]) == 0
        capsys.readouterr()
        assert fig.stat().st_size > 0

    def test_invalid_config(self, capsys):
        assert main(["toy", "--len", "0"]) == 2
        capsys.readouterr()


class TestCompareGradCommand:
    def test_json_schema_and_plot(self, tmp_path, capsys):
        fig = tmp_path / "var.png"
        args = [
            "compare-grad",
            "--samples", "64",
            "--repeats", "4",
            "--seed", "1",
            "--no-bp",
            "--plot", str(fig),
        ]
        assert main(args) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {
            "exact_grad",
            "lb_grad",
            "lb_deterministic",
            "cosine_lb_vs_exact",
            "reinforce",
        }
        assert payload["lb_deterministic"] is True
        assert len(payload["reinforce"]) == 3
        assert fig.stat().st_size > 0


class TestParserPlumbing:
    def test_threads_must_be_positive(self, corpus, capsys):
        cand, ref = corpus
        with pytest.raises(SystemExit) as exc:
            main(["bleu", cand, ref, "--threads", "0"])
        assert exc.value.code == 2
        capsys.readouterr()

    def test_unknown_command(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
        capsys.readouterr()

    def test_console_script_smoke(self, corpus):
        cand, ref = corpus
        proc = subprocess.run(
            [sys.executable, "-m", "bleubound.cli", "bleu", cand, ref],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert '"score"' in proc.stdout
