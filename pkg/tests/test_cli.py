"""End-to-end command-line behavior: flows, echo discipline, exit codes."""

import subprocess
import sys

import pytest

from charcrnn.cli import EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, main
from charcrnn.converters import motif_corpus, write_tsv
from charcrnn.corpus import load_corpus, stats, stats_csv


@pytest.fixture(scope="module")
def motif_tsv(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpora") / "motif.tsv"
    return str(write_tsv(motif_corpus().records, path))


SMALL_MODEL = [
    "--filters", "8", "--hidden", "8", "--window", "5",
    "--pool", "2", "--seq-len", "36",
]


def run_train(motif_tsv, out_dir, extra=()):
    return main([
        "train", motif_tsv, "--out-dir", str(out_dir),
        "--steps", "5", "--batch-size", "5", *SMALL_MODEL, *extra,
    ])


class TestStats:
    def test_csv_output(self, motif_tsv, capsys):
        assert main(["stats", motif_tsv, "--format", "csv"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("# resolved-config\n")
        expected = stats_csv([stats(load_corpus(motif_tsv))])
        assert out.endswith(expected + "\n")

    def test_table_output(self, motif_tsv, capsys):
        assert main(["stats", motif_tsv]) == EXIT_OK
        out = capsys.readouterr().out
        assert "motif" in out and "20" in out

    def test_missing_file(self, capsys):
        assert main(["stats", "/nonexistent/corpus.tsv"]) == EXIT_USAGE
        assert "error:" in capsys.readouterr().err

    def test_unknown_config_key(self, motif_tsv, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus_key=1\n")
        assert main(["stats", motif_tsv, "--config", str(cfg)]) == EXIT_USAGE
        assert "unknown key 'bogus_key'" in capsys.readouterr().err

    def test_malformed_config_line(self, motif_tsv, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("filters 16\n")
        assert main(["stats", motif_tsv, "--config", str(cfg)]) == EXIT_USAGE
        assert "expected key=value" in capsys.readouterr().err


class TestSettingsResolution:
    def test_flag_beats_config_beats_default(self, motif_tsv, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("filters=16\nhidden=16\nclip=2.5  # comment survives\n")
        code = run_train(motif_tsv, tmp_path / "out", ["--config", str(cfg)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        echo = out.split("\n\n")[0].split("\n")
        assert "filters=8" in echo  # flag wins over the file's 16
        assert "hidden=8" in echo
        assert "clip=2.5" in echo  # file wins over the 5.0 default

    def test_echo_comes_first_and_reports_split(self, motif_tsv, tmp_path, capsys):
        assert run_train(motif_tsv, tmp_path / "out") == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("# resolved-config\n")
        echo = out.split("\n\n")[0].split("\n")
        assert "train_count=18" in echo  # 20 records, default test = size // 10
        assert "test_count=2" in echo


class TestTrainEval:
    def test_round_trip(self, motif_tsv, tmp_path, capsys):
        out_dir = tmp_path / "run"
        assert run_train(motif_tsv, out_dir, ["--format", "csv"]) == EXIT_OK
        out = capsys.readouterr().out
        assert f"checkpoint={out_dir / 'model.ckpt'}" in out
        assert f"trace={out_dir / 'trace.csv'}" in out
        assert "class,precision,recall,f1" in out

        trace = (out_dir / "trace.csv").read_text().strip().split("\n")
        assert trace[0] == "step,loss,test_f1"
        assert len(trace) == 6  # header + 5 steps

        code = main(["eval", str(out_dir / "model.ckpt"), motif_tsv, "--format", "csv"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("# resolved-config\n")
        assert "macro," in out

    def test_same_seed_reproduces_trace(self, motif_tsv, tmp_path, capsys):
        assert run_train(motif_tsv, tmp_path / "a", ["--seed", "5"]) == EXIT_OK
        assert run_train(motif_tsv, tmp_path / "b", ["--seed", "5"]) == EXIT_OK
        assert run_train(motif_tsv, tmp_path / "c", ["--seed", "6"]) == EXIT_OK
        capsys.readouterr()
        a = (tmp_path / "a" / "trace.csv").read_bytes()
        b = (tmp_path / "b" / "trace.csv").read_bytes()
        c = (tmp_path / "c" / "trace.csv").read_bytes()
        assert a == b
        assert a != c

    def test_bad_alpha_is_usage_error(self, motif_tsv, tmp_path, capsys):
        code = run_train(motif_tsv, tmp_path / "out", ["--alpha", "1.5"])
        assert code == EXIT_USAGE
        assert "alpha" in capsys.readouterr().err

    def test_eval_corrupt_checkpoint(self, motif_tsv, tmp_path, capsys):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint at all")
        assert main(["eval", str(bad), motif_tsv]) == EXIT_USAGE
        assert "error:" in capsys.readouterr().err

    def test_eval_missing_checkpoint(self, motif_tsv, capsys):
        assert main(["eval", "/nonexistent.ckpt", motif_tsv]) == EXIT_USAGE
        capsys.readouterr()

    def test_eval_class_count_mismatch(self, motif_tsv, tmp_path, capsys):
        out_dir = tmp_path / "run"
        assert run_train(motif_tsv, out_dir) == EXIT_OK
        three = tmp_path / "three.tsv"
        three.write_text("a\tone one\nb\ttwo two\nc\tthree three\n")
        code = main(["eval", str(out_dir / "model.ckpt"), str(three)])
        assert code == EXIT_USAGE
        assert "trained for 2 classes but the corpus has 3" in capsys.readouterr().err


class TestSweep:
    def test_single_alpha(self, motif_tsv, tmp_path, capsys):
        code = main([
            "sweep", motif_tsv, "--alphas", "0.5", "--steps", "3",
            "--batch-size", "5", *SMALL_MODEL,
        ])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "alpha,precision,recall,f1" in out
        assert out.strip().endswith("best_alpha=0.5")


class TestBench:
    def test_reports_param_counts_and_timings(self, motif_tsv, capsys):
        code = main([
            "bench", motif_tsv, "--cells", "mgu", "--steps", "30",
            "--batch-size", "4", *SMALL_MODEL,
        ])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "param_count[mgu]=272" in out  # 2 * (8*8 + 8*8 + 8)
        assert "cell,mean_ms,median_ms,std_ms,steps" in out

    def test_unknown_cell(self, motif_tsv, capsys):
        assert main(["bench", motif_tsv, "--cells", "rnn"]) == EXIT_USAGE
        assert "unknown cell" in capsys.readouterr().err


class TestGradcheck:
    def test_passes_at_default_tolerance(self, capsys):
        code = main(["gradcheck", "--cells", "mgu", "--samples", "5"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "mgu: max_rel_err=" in out
        assert out.strip().endswith("PASS")

    def test_fails_at_impossible_tolerance(self, capsys):
        code = main(["gradcheck", "--cells", "mgu", "--samples", "5", "--tol", "1e-9"])
        assert code == EXIT_CHECK_FAILED
        assert "FAIL" in capsys.readouterr().out

    def test_unknown_cell(self, capsys):
        assert main(["gradcheck", "--cells", "bogus"]) == EXIT_USAGE
        assert "unknown cell" in capsys.readouterr().err


class TestParsing:
    def test_no_command_prints_help(self, capsys):
        assert main([]) == EXIT_USAGE
        assert "usage:" in capsys.readouterr().out

    def test_help_exits_clean(self, capsys):
        assert main(["--help"]) == EXIT_OK
        capsys.readouterr()

    def test_missing_positional(self, capsys):
        assert main(["stats"]) == EXIT_USAGE
        capsys.readouterr()


class TestSubprocess:
    def test_console_entry_end_to_end(self, motif_tsv, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "charcrnn.cli", "train", motif_tsv,
             "--out-dir", str(tmp_path), "--steps", "3", "--batch-size", "5",
             *SMALL_MODEL],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.startswith("# resolved-config\n")
        assert (tmp_path / "model.ckpt").exists()
        assert (tmp_path / "trace.csv").exists()
