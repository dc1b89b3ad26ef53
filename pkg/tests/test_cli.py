import json

import numpy as np
import pytest

from qadwh.cli import main
from qadwh.fileio import (
    read_checkpoint,
    read_codes,
    read_dataset,
    read_rankings,
    write_checkpoint,
    write_codes,
    write_dataset,
)
from qadwh.index import build_index, encode, rank_exact, rank_hamming, retrieve
from qadwh.model import Dataset, init_params
from qadwh.pipeline import encode_dataset, lsh_params

SMALL = ["--set", "model.hidden=8", "--set", "model.code_length=8"]


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    """A full gen-synth, train, encode chain on a small dataset."""
    d = tmp_path_factory.mktemp("run")
    paths = {k: d / v for k, v in dict(db="db.tsv", q="q.tsv", ckpt="model.txt", log="loss.tsv", codes="db.qdwh").items()}
    assert main(["gen-synth", "--out", str(paths["db"]), "--query-out", str(paths["q"]), "--n", "150",
                 "--num-queries", "12", "--d", "5", "--c", "3", "--seed", "1"]) == 0
    assert main(["train", "--data", str(paths["db"]), "--checkpoint", str(paths["ckpt"]), "--loss-log", str(paths["log"]),
                 "--max-steps", "60", *SMALL]) == 0
    assert main(["encode", "--checkpoint", str(paths["ckpt"]), "--data", str(paths["db"]), "--out", str(paths["codes"])]) == 0
    return paths


def test_gen_synth_files(run):
    db, q = read_dataset(run["db"]), read_dataset(run["q"])
    assert db.num_items == 150 and q.num_items == 12 and db.feature_dim == 5


def test_gen_synth_deterministic(tmp_path):
    for name in ("a.tsv", "b.tsv"):
        assert main(["gen-synth", "--out", str(tmp_path / name), "--n", "30", "--seed", "4"]) == 0
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()


def test_train_outputs(run):
    params, step, cfg = read_checkpoint(run["ckpt"])
    assert step == 60 and cfg["model.code_length"] == 8
    lines = run["log"].read_text().splitlines()
    assert lines[0] == "step\tJ_R\tJ_C\tlr" and len(lines) == 61


def test_zero_steps_is_initialization(tmp_path, run):
    ckpt = tmp_path / "m.txt"
    assert main(["train", "--data", str(run["db"]), "--checkpoint", str(ckpt), "--max-steps", "0", *SMALL]) == 0
    params, step, _ = read_checkpoint(ckpt)
    assert step == 0
    np.testing.assert_array_equal(params.flatten(), init_params([5, 8], 8, 3, seed=0).flatten())


def test_encode_matches_in_memory(run):
    params, _, _ = read_checkpoint(run["ckpt"])
    db = read_dataset(run["db"])
    codes = read_codes(run["codes"])
    np.testing.assert_array_equal(codes.unpack(), encode(params, db.features))
    assert run["codes"].stat().st_size == 15 + 150 * 1


def test_query_matches_rank_exact(tmp_path, run):
    out = tmp_path / "r.tsv"
    assert main(["query", "--checkpoint", str(run["ckpt"]), "--codes", str(run["codes"]),
                 "--queries", str(run["q"]), "--out", str(out)]) == 0
    params, _, _ = read_checkpoint(run["ckpt"])
    codes = read_codes(run["codes"])
    got = read_rankings(out)
    for i, x in enumerate(read_dataset(run["q"]).features):
        assert list(got[i]) == list(retrieve(params, x, codes))


def test_two_phase_full_radius_equals_exact(tmp_path, run):
    base = ["query", "--checkpoint", str(run["ckpt"]), "--codes", str(run["codes"]), "--queries", str(run["q"])]
    assert main([*base, "--out", str(tmp_path / "e.tsv")]) == 0
    assert main([*base, "--mode", "two-phase", "--radius", "8", "--k", "150", "--out", str(tmp_path / "t.tsv")]) == 0
    assert (tmp_path / "e.tsv").read_bytes() == (tmp_path / "t.tsv").read_bytes()


def test_all_ones_weights_give_hamming_order(tmp_path, run):
    params, _, _ = read_checkpoint(run["ckpt"])
    params.class_weights[...] = 1.0
    write_checkpoint(params, tmp_path / "ones.txt")
    assert main(["query", "--checkpoint", str(tmp_path / "ones.txt"), "--codes", str(run["codes"]),
                 "--queries", str(run["q"]), "--out", str(tmp_path / "r.tsv")]) == 0
    got = read_rankings(tmp_path / "r.tsv")
    codes = read_codes(run["codes"])
    for i, x in enumerate(read_dataset(run["q"]).features):
        ham = rank_hamming(codes, encode(params, x[None])[0])
        assert got[i].indices.tolist() == ham.indices.tolist()


def test_eval_report(tmp_path, run):
    out = tmp_path / "rep.json"
    args = ["eval", "--checkpoint", str(run["ckpt"]), "--codes", str(run["codes"]), "--queries", str(run["q"]),
            "--database", str(run["db"]), "--out", str(out)]
    assert main(args) == 0
    rep = json.loads(out.read_text())
    assert set(rep) == {"map", "precision_at_k", "precision_within_radius2", "pr_curve", "metadata"}
    assert rep["metadata"]["code_length"] == 8 and rep["metadata"]["num_items"] == 150
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first


def _perfect_fixture(tmp_path):
    """Four database items; the query shares a label with items 0 and 2."""
    db = Dataset(np.eye(4), [[1, 0], [0, 1], [1, 0], [0, 1]])
    queries = Dataset(np.zeros((1, 4)), [[1, 0]])
    write_dataset(db, tmp_path / "db.tsv")
    write_dataset(queries, tmp_path / "q.tsv")
    p = lsh_params(4, 4, 2, seed=0)
    write_checkpoint(p, tmp_path / "m.txt")
    write_codes(encode_dataset(p, db), tmp_path / "c.qdwh")
    return ["eval", "--checkpoint", str(tmp_path / "m.txt"), "--codes", str(tmp_path / "c.qdwh"),
            "--queries", str(tmp_path / "q.tsv"), "--database", str(tmp_path / "db.tsv"),
            "--out", str(tmp_path / "rep.json"), "--set", "eval.ks=1,4"]


@pytest.mark.parametrize("order,expected", [([0, 2, 1, 3], 1.0), ([0, 1, 2, 3], 0.8333333333333334)])
def test_eval_from_rankings(tmp_path, order, expected):
    args = _perfect_fixture(tmp_path)
    lines = [f"0\t{r}\t{i}\t{float(r)!r}" for r, i in enumerate(order, start=1)]
    (tmp_path / "r.tsv").write_text("\n".join(lines) + "\n")
    assert main([*args, "--rankings", str(tmp_path / "r.tsv")]) == 0
    assert abs(json.loads((tmp_path / "rep.json").read_text())["map"] - expected) <= 1e-9


def test_eval_missing_rankings(tmp_path, capsys):
    args = _perfect_fixture(tmp_path)
    (tmp_path / "r.tsv").write_text("")
    assert main([*args, "--rankings", str(tmp_path / "r.tsv")]) == 1
    assert "missing for queries [0]" in capsys.readouterr().err
    assert not (tmp_path / "rep.json").exists()


class TestBaseline:
    def test_lsh_deterministic(self, tmp_path, run):
        for name in ("a", "b"):
            assert main(["baseline", "--variant", "lsh", "--database", str(run["db"]), "--queries", str(run["q"]),
                         "--out-dir", str(tmp_path / name), *SMALL]) == 0
        for f in ("codes.qdwh", "rankings.tsv", "report.json", "checkpoint.txt"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        assert not (tmp_path / "a" / "loss.tsv").exists()

    def test_dwh_from_checkpoint(self, tmp_path, run):
        assert main(["baseline", "--variant", "dwh", "--database", str(run["db"]), "--queries", str(run["q"]),
                     "--checkpoint", str(run["ckpt"]), "--out-dir", str(tmp_path), *SMALL]) == 0
        params, _, cfg = read_checkpoint(tmp_path / "checkpoint.txt")
        trained, _, _ = read_checkpoint(run["ckpt"])
        assert cfg["variant"] == "dwh"
        np.testing.assert_array_equal(params.class_weights, np.tile(trained.class_weights.mean(axis=0), (3, 1)))

    def test_unknown_variant(self, tmp_path, run):
        assert main(["baseline", "--variant", "nope", "--database", str(run["db"]), "--queries", str(run["q"]),
                     "--out-dir", str(tmp_path)]) == 1

    def test_checkpoint_only_for_dwh(self, tmp_path, run):
        assert main(["baseline", "--variant", "lsh", "--database", str(run["db"]), "--queries", str(run["q"]),
                     "--checkpoint", str(run["ckpt"]), "--out-dir", str(tmp_path / "o")]) == 1


class TestErrors:
    def test_usage(self):
        assert main(["train"]) == 1

    def test_unknown_config_key(self, run, tmp_path):
        assert main(["train", "--data", str(run["db"]), "--checkpoint", str(tmp_path / "m"), "--set", "train.speed=9"]) == 1
        assert not (tmp_path / "m").exists()

    def test_q_mismatch(self, tmp_path, run, capsys):
        write_codes(build_index(np.zeros((150, 12), dtype=np.uint8)), tmp_path / "c.qdwh")
        assert main(["query", "--checkpoint", str(run["ckpt"]), "--codes", str(tmp_path / "c.qdwh"),
                     "--queries", str(run["q"])]) == 1
        assert "q=12" in capsys.readouterr().err

    def test_dimension_mismatch(self, tmp_path, run):
        write_dataset(Dataset(np.zeros((2, 7)), [[1, 0, 0], [0, 1, 0]]), tmp_path / "x.tsv")
        assert main(["encode", "--checkpoint", str(run["ckpt"]), "--data", str(tmp_path / "x.tsv"),
                     "--out", str(tmp_path / "c")]) == 1
        assert not (tmp_path / "c").exists()

    def test_missing_file(self, tmp_path):
        assert main(["encode", "--checkpoint", str(tmp_path / "none"), "--data", str(tmp_path / "none"),
                     "--out", str(tmp_path / "c")]) == 1

    def test_parse_error(self, tmp_path):
        (tmp_path / "bad.tsv").write_text("1\t2\t2\n1.0\t0.0\t5\n")
        assert main(["train", "--data", str(tmp_path / "bad.tsv"), "--checkpoint", str(tmp_path / "m")]) == 1

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_exit_code(self, tmp_path, run, capsys):
        rc = main(["train", "--data", str(run["db"]), "--checkpoint", str(tmp_path / "m"), "--max-steps", "50",
                   "--set", "train.initial_lr=1e305", *SMALL])
        assert rc == 2
        assert "diverged at step" in capsys.readouterr().err
        assert not (tmp_path / "m").exists()


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "qadwh", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "gen-synth" in out.stdout
