"""Operator command line: simulate, replay, evaluate, agree, serve.

Exit codes: 0 success, 1 task failure (bad data, failed threshold),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .errors import DevnousError
from .evaluation import (
    dataset_shape,
    evaluate,
    ground_truth_of,
    interrun_agreement,
    load_benchmark,
    predictions_of,
    render_report,
    replay_dataset,
    write_dialogues,
)
from .orchestrator import EngineConfig
from .simulator import ScriptedSGA, SimulationConfig, run_simulation, write_audit_log


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("rule", "http"), default="rule",
                        help="classification backend (default: rule)")
    parser.add_argument("--roster", help="team roster JSON file")
    parser.add_argument("--backlog", help="seed backlog JSON file")
    parser.add_argument("--prompts-dir", help="directory overriding the packaged prompt pack")
    parser.add_argument("--out", help="output path")


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    return EngineConfig(
        backend=args.backend,
        roster=args.roster,
        backlog=args.backlog,
        prompts_dir=Path(args.prompts_dir) if args.prompts_dir else None,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="devnous",
        description="Ambient project-management agent: simulate, replay, evaluate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="generate benchmark dialogues against the engine")
    _common_flags(simulate)
    simulate.add_argument("--dialogues", type=int, default=8)
    simulate.add_argument("--turns", type=int, default=20)
    simulate.add_argument("--script", help="scripted generator fixture (wire-message JSON list)")
    simulate.set_defaults(handler=cmd_simulate)

    replay = sub.add_parser("replay", help="run a protocol over a dataset and score it")
    _common_flags(replay)
    mode = replay.add_mutually_exclusive_group(required=True)
    mode.add_argument("--stateless", action="store_true",
                      help="re-instantiate the engine per turn with the logged transcript")
    mode.add_argument("--live", action="store_true",
                      help="one persistent engine per dialogue")
    replay.add_argument("dataset", help="benchmark JSONL file or directory")
    replay.add_argument("--json", action="store_true", help="machine-readable report")
    replay.set_defaults(handler=cmd_replay)

    eval_cmd = sub.add_parser("evaluate", help="score predictions against ground truth")
    _common_flags(eval_cmd)
    eval_cmd.add_argument("ground_truth", help="annotated benchmark JSONL")
    eval_cmd.add_argument("predictions", help="prediction log JSONL")
    eval_cmd.add_argument("--json", action="store_true")
    eval_cmd.add_argument("--min-f1", type=float, help="fail (exit 1) below this multiset F1")
    eval_cmd.add_argument("--min-accuracy", type=float,
                          help="fail (exit 1) below this exact-match accuracy")
    eval_cmd.set_defaults(handler=cmd_evaluate)

    agree = sub.add_parser("agree", help="inter-run agreement between two prediction logs")
    _common_flags(agree)
    agree.add_argument("run1")
    agree.add_argument("run2")
    agree.add_argument("--json", action="store_true")
    agree.set_defaults(handler=cmd_agree)

    serve = sub.add_parser("serve", help="start the HTTP + SSE service")
    _common_flags(serve)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8470)
    serve.add_argument("--token", help="require this static bearer token")
    serve.set_defaults(handler=cmd_serve)

    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.script:
        script = json.loads(Path(args.script).read_text(encoding="utf-8"))
        backend = ScriptedSGA(script)
    elif args.backend == "http":
        from .classifier import HttpCompletionBackend

        backend = HttpCompletionBackend()
    else:
        packaged = resources.files("devnous.data").joinpath("sga_script.json")
        backend = ScriptedSGA(json.loads(packaged.read_text(encoding="utf-8")))
    config = SimulationConfig(
        backend=backend,
        n_dialogues=args.dialogues,
        turns_per_dialogue=args.turns,
        prompts_dir=Path(args.prompts_dir) if args.prompts_dir else None,
    )
    audit: list = []
    dialogues = run_simulation(config, _engine_config(args), audit=audit)

    out = Path(args.out) if args.out else Path("sga_output")
    if out.suffix == ".jsonl":
        dataset_path, audit_path = out, out.with_suffix(".audit.jsonl")
    else:
        dataset_path, audit_path = out / "benchmark.jsonl", out / "prompt_audit.jsonl"
    write_dialogues(dialogues, dataset_path)
    write_audit_log(audit, audit_path)
    shape = dataset_shape(dialogues)
    print(f"wrote {shape.n_dialogues} dialogues / {shape.n_turns} turns to {dataset_path}")
    print(f"prompt audit log: {audit_path}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    dialogues = load_benchmark(args.dataset)
    logs = replay_dataset(_engine_config(args), dialogues, live=args.live)
    out = Path(args.out) if args.out else Path("predictions.jsonl")
    write_dialogues(logs, out)
    print(f"wrote predictions to {out}")

    annotated = all(t.ground_truth is not None for d in dialogues for t in d.turns)
    if not annotated:
        print("dataset is unannotated; skipping the report")
        return 0
    gt = ground_truth_of(dialogues)
    pred = predictions_of(logs)
    report = evaluate(gt, pred)
    print(json.dumps(report.to_dict(), indent=2) if args.json else render_report(report))
    return 0


def _require_annotations(dialogues, path: str) -> None:
    if any(t.ground_truth is None for d in dialogues for t in d.turns):
        raise DevnousError(f"{path}: dataset has unannotated turns; cannot serve as ground truth")


def cmd_evaluate(args: argparse.Namespace) -> int:
    gt_dialogues = load_benchmark(args.ground_truth)
    _require_annotations(gt_dialogues, args.ground_truth)
    pred_dialogues = load_benchmark(args.predictions)
    gt = ground_truth_of(gt_dialogues)
    pred = predictions_of(pred_dialogues)
    report = evaluate(gt, pred)
    print(json.dumps(report.to_dict(), indent=2) if args.json else render_report(report))
    failed = []
    if args.min_f1 is not None and report.multiset_f1 < args.min_f1:
        failed.append(f"multiset F1 {report.multiset_f1:.3f} < {args.min_f1}")
    if args.min_accuracy is not None and report.exact_match_accuracy < args.min_accuracy:
        failed.append(f"exact match {report.exact_match_accuracy:.3f} < {args.min_accuracy}")
    for reason in failed:
        print(f"threshold violated: {reason}", file=sys.stderr)
    return 1 if failed else 0


def cmd_agree(args: argparse.Namespace) -> int:
    run1 = predictions_of(load_benchmark(args.run1))
    run2 = predictions_of(load_benchmark(args.run2))
    score = interrun_agreement(run1, run2)
    if args.json:
        print(json.dumps({"agreement": score}))
    else:
        print(f"inter-run multiset F1 agreement: {score:.3f}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    serve(_engine_config(args), host=args.host, port=args.port, token=args.token)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except DevnousError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
