import csv
import json

import numpy as np
import pytest

from cone_attention.attention import AttentionBatch, multi_head, pairwise_logits
from cone_attention import oracle
from cone_attention.cli import main
from cone_attention.io import read_embeddings, read_matrix_csv, write_embeddings
from cone_attention.kernels import KernelConfig


@pytest.fixture
def files(tmp_path):
    def make(name, content):
        path = tmp_path / name
        if isinstance(content, dict):
            path.write_text(json.dumps(content))
        elif isinstance(content, np.ndarray):
            write_embeddings(content, path)
        else:
            path.write_text(content)
        return str(path)

    return make


POINTS = np.array([[0.0, 0.1], [0.3, -0.2], [-0.5, 0.4]])


def test_kernel_matches_library(files, tmp_path):
    out = str(tmp_path / "k.csv")
    code = main(["kernel", "--config", files("c.json", {"kernel": "penumbral"}), "--input", files("x.txt", POINTS),
                 "--output", out])
    assert code == 0
    ref = pairwise_logits(AttentionBatch(POINTS, POINTS, np.zeros((3, 1))), KernelConfig()).logits
    np.testing.assert_array_equal(read_matrix_csv(out), ref)


def test_kernel_single_point(files, tmp_path):
    out = str(tmp_path / "k.csv")
    assert main(["kernel", "--config", files("c.json", {}), "--input", files("x.txt", POINTS[:1]), "--output", out]) == 0
    assert read_matrix_csv(out).shape == (1, 1)


def test_attend_multi_head(files, tmp_path, rng):
    q, k, v = rng.normal(size=(4, 6)), rng.normal(size=(5, 6)), rng.normal(size=(5, 4))
    out = str(tmp_path / "o.csv")
    cfg = {"kernel": "umbral", "heads": 2}
    code = main(["attend", "--config", files("c.json", cfg), "--queries", files("q.txt", q),
                 "--keys", files("k.txt", k), "--values", files("v.txt", v), "--output", out])
    assert code == 0
    ref = multi_head(AttentionBatch(q, k, v), KernelConfig(kind="umbral", heads=2), 2)
    np.testing.assert_array_equal(read_matrix_csv(out), ref)


@pytest.mark.parametrize("kernel", ["penumbral", "umbral"])
def test_oracle_check(files, kernel, capsys):
    code = main(["oracle-check", "--config", files("c.json", {"kernel": kernel}), "--samples", "5", "--seed", "1"])
    assert code == 0
    assert "worst" in capsys.readouterr().out


def test_oracle_check_reports_mismatch(files, monkeypatch):
    monkeypatch.setattr(oracle, "oracle_bruteforce_height", lambda u, v, config, grid: 0.0)
    args = ["oracle-check", "--config", files("c.json", {"kernel": "umbral"}), "--samples", "3", "--seed", "1"]
    assert main(args) == 1


def test_grad_check(files, capsys):
    assert main(["grad-check", "--config", files("c.json", {"kernel": "umbral"}), "--samples", "10", "--seed", "0"]) == 0
    assert "umbral/psi" in capsys.readouterr().out


def test_tree_bench(files, tmp_path):
    out, emb = tmp_path / "r.json", tmp_path / "e.txt"
    code = main(["tree-bench", "--config", files("c.json", {"kernel": "umbral"}), "--generate", "complete_binary",
                 "--size", "15", "--output", str(out), "--embeddings", str(emb), "--train", "--steps", "20",
                 "--seed", "0"])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["constructive"]["triple_agreement"] == 1.0
    assert len(report["train"]["loss_curve"]) == 21
    assert read_embeddings(emb).shape[0] == 15


def test_tree_bench_from_file(files, tmp_path):
    out = tmp_path / "r.json"
    tree = files("t.txt", "0 -1\n1 0\n2 0\n3 1\n4 1\n")
    assert main(["tree-bench", "--config", files("c.json", {}), "--tree", tree, "--output", str(out)]) == 0
    assert json.loads(out.read_text())["leaves"] == 3


def test_perf(files, tmp_path, capsys):
    out = tmp_path / "p.csv"
    code = main(["perf", "--config", files("c.json", {"kernel": "dot"}), "--sizes", "8,16,32", "--d", "4",
                 "--repetitions", "3", "--seed", "0", "--output", str(out)])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["n"]) for r in rows] == [8, 16, 32]
    assert "scaling exponent" in capsys.readouterr().out


@pytest.mark.parametrize(
    "extra",
    [
        ["tree-bench", "--generate", "random_attachment", "--output", "x.json"],
        ["tree-bench", "--generate", "complete_binary", "--train", "--output", "x.json"],
    ],
)
def test_seed_required(files, extra, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = files("c.json", {})
    assert main([extra[0], "--config", cfg, *extra[1:]]) == 2


@pytest.mark.parametrize("command", [["oracle-check"], ["grad-check"], ["perf", "--output", "p.csv"]])
def test_seed_is_mandatory_flag(files, command):
    with pytest.raises(SystemExit) as exc:
        main([command[0], "--config", files("c.json", {}), *command[1:]])
    assert exc.value.code == 2


class TestExitCodes:
    def test_missing_file(self, files, tmp_path):
        args = ["kernel", "--config", files("c.json", {}), "--input", str(tmp_path / "nope.txt"),
                "--output", str(tmp_path / "o.csv")]
        assert main(args) == 2

    def test_bad_number_reports_line(self, files, tmp_path, capsys):
        args = ["kernel", "--config", files("c.json", {}), "--input", files("x.txt", "2 2\n0 0.1\n0 oops\n"),
                "--output", str(tmp_path / "o.csv")]
        assert main(args) == 2
        assert ":3:" in capsys.readouterr().err

    @pytest.mark.parametrize("config", ['{"kernel": "cosine"}', '{"gama": 1}', "[1]", "{"])
    def test_bad_config(self, files, tmp_path, config):
        args = ["kernel", "--config", files("c.json", config), "--input", files("x.txt", POINTS),
                "--output", str(tmp_path / "o.csv")]
        assert main(args) == 2

    def test_numeric_range(self, files, tmp_path, capsys):
        x = np.array([[0.0, 0.0], [0.0, 900.0]])
        args = ["kernel", "--config", files("c.json", {"kernel": "umbral"}), "--input", files("x.txt", x),
                "--output", str(tmp_path / "o.csv")]
        assert main(args) == 3
        assert "row 1" in capsys.readouterr().err

    def test_oracle_check_needs_cone(self, files):
        assert main(["oracle-check", "--config", files("c.json", {"kernel": "dot"}), "--seed", "0"]) == 2


def test_module_entry_point(files, tmp_path):
    import subprocess
    import sys

    out = tmp_path / "k.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "cone_attention", "kernel", "--config", files("c.json", {}),
         "--input", files("x.txt", POINTS), "--output", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert read_matrix_csv(out).shape == (3, 3)
