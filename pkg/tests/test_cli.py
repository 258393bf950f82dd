import json
from importlib import resources

import pytest

from devnous.cli import main

GOLDEN = str(resources.files("devnous.data").joinpath("golden_dialogue.jsonl"))


def run(argv):
    return main(argv)


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as err:
        run(["replay", "missing-mode.jsonl"])
    assert err.value.code == 2


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as err:
        run(["frobnicate"])
    assert err.value.code == 2


def test_evaluate_identity_is_perfect(tmp_path, capsys):
    code = run(["evaluate", GOLDEN, GOLDEN])
    out = capsys.readouterr().out
    assert code == 0
    assert "multiset precision: 1.000  recall: 1.000  F1: 1.000" in out
    assert "exact match turn accuracy: 1.000" in out


def test_evaluate_json_mode(capsys):
    code = run(["evaluate", GOLDEN, GOLDEN, "--json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["multiset_f1"] == 1.0
    assert payload["n_turns"] == 20


def test_evaluate_threshold_violation_exits_1(tmp_path, capsys):
    # degrade predictions: drop every predicted tuple
    from devnous.evaluation import load_benchmark, write_dialogues
    from devnous.model import IntentMultiset

    dialogues = load_benchmark(GOLDEN)
    for turn in dialogues[0].turns:
        turn.predicted = IntentMultiset()
        turn.ground_truth = None  # force predictions_of to see empties
    pred_path = tmp_path / "empty_pred.jsonl"
    write_dialogues(dialogues, pred_path)
    code = run(["evaluate", GOLDEN, str(pred_path), "--min-f1", "0.9"])
    assert code == 1
    assert "threshold violated" in capsys.readouterr().err


def test_evaluate_misaligned_exits_1(tmp_path, capsys):
    from devnous.evaluation import load_benchmark, write_dialogues

    dialogues = load_benchmark(GOLDEN)
    dialogues[0].turns = dialogues[0].turns[:10]
    short = tmp_path / "short.jsonl"
    write_dialogues(dialogues, short)
    code = run(["evaluate", GOLDEN, str(short)])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_evaluate_rejects_unannotated_ground_truth(tmp_path, capsys):
    from devnous.evaluation import load_benchmark, write_dialogues

    dialogues = load_benchmark(GOLDEN)
    dialogues[0].turns[0].ground_truth = None
    bad = tmp_path / "unannotated.jsonl"
    write_dialogues(dialogues, bad)
    code = run(["evaluate", str(bad), GOLDEN])
    assert code == 1


def test_replay_stateless_golden_exact(tmp_path, capsys):
    out = tmp_path / "pred.jsonl"
    code = run(["replay", "--stateless", GOLDEN, "--backend", "rule", "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "exact match turn accuracy: 1.000" in text
    assert out.exists()


def test_replay_live_golden_exact(tmp_path, capsys):
    out = tmp_path / "pred_live.jsonl"
    code = run(["replay", "--live", GOLDEN, "--out", str(out)])
    assert code == 0
    assert "exact match turn accuracy: 1.000" in capsys.readouterr().out


def test_agree_on_replay_outputs(tmp_path, capsys):
    live_out = tmp_path / "live.jsonl"
    stateless_out = tmp_path / "stateless.jsonl"
    assert run(["replay", "--live", GOLDEN, "--out", str(live_out)]) == 0
    assert run(["replay", "--stateless", GOLDEN, "--out", str(stateless_out)]) == 0
    capsys.readouterr()
    code = run(["agree", str(live_out), str(stateless_out), "--json"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["agreement"] == 1.0


def test_simulate_writes_loadable_dataset(tmp_path, capsys):
    out = tmp_path / "sim"
    code = run(["simulate", "--dialogues", "2", "--turns", "5", "--out", str(out)])
    assert code == 0
    from devnous.evaluation import dataset_shape, load_benchmark

    dialogues = load_benchmark(out / "benchmark.jsonl")
    shape = dataset_shape(dialogues)
    assert (shape.n_dialogues, shape.n_turns) == (2, 10)
    audit = (out / "prompt_audit.jsonl").read_text(encoding="utf-8").strip().splitlines()
    assert len(audit) == 10


def test_missing_dataset_exits_1(capsys):
    code = run(["replay", "--stateless", "no-such-file.jsonl"])
    assert code == 1
    assert "error:" in capsys.readouterr().err
