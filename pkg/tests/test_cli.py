import json
import os

import numpy as np
import pytest

from splab import proxgen
from splab.cli import main
from splab.jsonl import load_jsonl, save_jsonl
from splab.fixtures import fixture_graph
from splab.graphs import Dataset


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_gen_prox_cli(tmp_path, capsys):
    out_path = tmp_path / "p.jsonl"
    code, out = run_cli(capsys, "gen-prox", "--h", "1", "--pairs", "6",
                        "--seed", "3", "--out", str(out_path))
    assert code == 0
    ds = load_jsonl(out_path)
    assert len(ds) == 12
    assert ds.meta["prox_spec"]["h"] == 1


def test_kernel_check_cli(tmp_path, capsys):
    path = tmp_path / "figs.jsonl"
    save_jsonl(Dataset([fixture_graph("two_squares"), fixture_graph("octagon")]), path)
    code, out = run_cli(capsys, "kernel-check", "--graphs", str(path))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "pair,wl,sp,sp_wl"
    assert lines[1] == "g0-g1,False,True,True"


def test_logic_cli(tmp_path, capsys):
    formula = tmp_path / "f.txt"
    formula.write_text("<e2>^>=2 True\n")
    graphs = tmp_path / "g.jsonl"
    save_jsonl(Dataset([fixture_graph("two_squares"), fixture_graph("octagon")]), graphs)
    code, out = run_cli(capsys, "logic", "--formula", str(formula),
                        "--graphs", str(graphs), "--k", "2")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "graph,node,compiled,oracle"
    assert "0,0,False,False" in lines
    assert "1,0,True,True" in lines


def test_squash_cli(capsys):
    code, out = run_cli(capsys, "squash", "--l", "5", "--w", "2", "--k", "4")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "r,model,k,T,norm,bound"
    assert len(lines) == 1 + 2 * 4


def test_hop_hist_cli(tmp_path, capsys):
    path = tmp_path / "g.jsonl"
    save_jsonl(Dataset([fixture_graph("hop_showcase")]), path)
    code, out = run_cli(capsys, "hop-hist", "--graphs", str(path), "--k", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "graph,node,hop1,hop2,hop3,infinity"
    assert lines[1] == "0,0,3,4,4,0"


def _make_dataset(tmp_path):
    ds = proxgen.generate_dataset(proxgen.ProxSpec(h=1, n_pairs=6, seed=5,
                                                   l_range=(4, 5), w_range=(2, 3)))
    path = tmp_path / "prox.jsonl"
    save_jsonl(ds, path)
    return str(path)


def test_train_eval_alphas_cli(tmp_path, capsys):
    data = _make_dataset(tmp_path)
    out_dir = tmp_path / "runs"
    code, out = run_cli(capsys, "train", "--dataset", data, "--model", "spn",
                        "--k", "2", "--layers", "2", "--dim", "8", "--epochs", "2",
                        "--n-splits", "1", "--run-repeats", "1", "--seed", "4",
                        "--batch-size", "6", "--dropout", "0.0",
                        "--out-dir", str(out_dir), "--save-checkpoints")
    assert code == 0
    summary = json.loads(out)
    assert "mean" in summary and len(summary["per_split"]) == 1
    ckpt = sorted(f for f in os.listdir(out_dir) if f.startswith("ckpt-"))[0]

    code, out = run_cli(capsys, "alphas", "--checkpoint", str(out_dir / ckpt))
    assert code == 0
    layers = json.loads(out)["layers"]
    assert len(layers) == 2 and all(abs(sum(a) - 1.0) < 1e-9 for a in layers)

    code, out = run_cli(capsys, "eval", "--checkpoint", str(out_dir / ckpt),
                        "--dataset", data)
    assert code == 0
    payload = json.loads(out)
    assert payload["graphs"] == 12 and 0.0 <= payload["accuracy"] <= 1.0


def test_train_config_file_with_override(tmp_path, capsys):
    data = _make_dataset(tmp_path)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "dataset": data, "model": "spn", "k": 1, "layers": 2, "dim": 8,
        "epochs": 1, "n_splits": 1, "run_repeats": 1, "seed": 2,
        "batch_size": 6, "dropout": 0.0,
    }))
    code, out = run_cli(capsys, "train", "--config", str(cfg_path), "--epochs", "2")
    assert code == 0


def test_train_requires_dataset(capsys):
    assert main(["train"]) == 2
    assert "dataset" in capsys.readouterr().err
