"""Benchmark loading, the multiset metric suite, and the two experimental
protocols (live run and stateless turn-by-turn replay).

All metrics use the min-count rule over per-turn multisets: a label
predicted once against a ground-truth count of two contributes one true
positive and one false negative.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .errors import FormatError, LengthMismatch
from .model import (
    Dialogue,
    IntentMultiset,
    IntentTuple,
    Task,
    TeamMember,
    TurnRecord,
    canonical_json,
    parse_wire_message,
)
from .orchestrator import EngineConfig

logger = logging.getLogger(__name__)

MultisetSeq = Sequence[IntentMultiset]


def _check_aligned(gt: MultisetSeq, pred: MultisetSeq) -> None:
    if len(gt) != len(pred):
        raise LengthMismatch(f"{len(gt)} ground-truth turns vs {len(pred)} predicted")


def multiset_counts(gt: MultisetSeq, pred: MultisetSeq) -> tuple[int, int, int]:
    """Global (TP, FP, FN) over aligned turns with per-tuple min matching."""
    _check_aligned(gt, pred)
    tp = fp = fn = 0
    for g, p in zip(gt, pred):
        for label in g.distinct() | p.distinct():
            matched = min(g.count(label), p.count(label))
            tp += matched
            fp += p.count(label) - matched
            fn += g.count(label) - matched
    return tp, fp, fn


def _safe_ratio(numerator: int, denominator: int, *, empty_everywhere: bool) -> float:
    if denominator == 0:
        return 1.0 if empty_everywhere else 0.0
    return numerator / denominator


def multiset_f1(gt: MultisetSeq, pred: MultisetSeq) -> tuple[float, float, float]:
    """(precision, recall, f1). When both sides are empty on every turn all
    three are 1.0; otherwise an undefined component is 0.0."""
    tp, fp, fn = multiset_counts(gt, pred)
    empty = tp == 0 and fp == 0 and fn == 0
    precision = _safe_ratio(tp, tp + fp, empty_everywhere=empty)
    recall = _safe_ratio(tp, tp + fn, empty_everywhere=empty)
    f1 = 1.0 if empty else (2 * tp) / (2 * tp + fp + fn)
    return precision, recall, f1


def exact_match_accuracy(gt: MultisetSeq, pred: MultisetSeq) -> float:
    """Fraction of turns whose predicted multiset equals the ground truth
    exactly, duplicate counts included. Vacuously 1.0 over zero turns."""
    _check_aligned(gt, pred)
    if not gt:
        return 1.0
    hits = sum(1 for g, p in zip(gt, pred) if g == p)
    return hits / len(gt)


@dataclass
class LabelCounts:
    """Per-label confusion counts. tp + fn always equals support."""

    tp: int
    fp: int
    fn: int
    support: int

    @property
    def precision(self) -> float:
        return _safe_ratio(self.tp, self.tp + self.fp, empty_everywhere=self.fn == 0)

    @property
    def recall(self) -> float:
        return _safe_ratio(self.tp, self.tp + self.fn, empty_everywhere=self.fp == 0)

    @property
    def f1(self) -> float:
        if self.tp == 0 and self.fp == 0 and self.fn == 0:
            return 1.0
        return (2 * self.tp) / (2 * self.tp + self.fp + self.fn)


def labelwise_metrics(gt: MultisetSeq, pred: MultisetSeq) -> dict[IntentTuple, LabelCounts]:
    """Per unique (category, action) tuple: min-count confusion counts.
    Labels absent from both sides do not appear."""
    _check_aligned(gt, pred)
    labels: set[IntentTuple] = set()
    for ms in list(gt) + list(pred):
        labels |= ms.distinct()
    table: dict[IntentTuple, LabelCounts] = {}
    for label in labels:
        tp = fp = fn = support = 0
        for g, p in zip(gt, pred):
            matched = min(g.count(label), p.count(label))
            tp += matched
            fp += p.count(label) - matched
            fn += g.count(label) - matched
            support += g.count(label)
        table[label] = LabelCounts(tp, fp, fn, support)
    return table


def interrun_agreement(run1: MultisetSeq, run2: MultisetSeq) -> float:
    """Symmetric overlap between two prediction runs:
    2 * sum(min counts) / sum(all counts). 1.0 when both runs are empty."""
    _check_aligned(run1, run2)
    overlap = 0
    total = 0
    for a, b in zip(run1, run2):
        for label in a.distinct() | b.distinct():
            overlap += min(a.count(label), b.count(label))
            total += a.count(label) + b.count(label)
    if total == 0:
        return 1.0
    return 2 * overlap / total


@dataclass
class EvalReport:
    exact_match_accuracy: float
    multiset_precision: float
    multiset_recall: float
    multiset_f1: float
    per_label: dict[IntentTuple, LabelCounts]
    n_turns: int
    n_tuples: int

    def to_dict(self) -> dict:
        return {
            "exact_match_accuracy": self.exact_match_accuracy,
            "multiset_precision": self.multiset_precision,
            "multiset_recall": self.multiset_recall,
            "multiset_f1": self.multiset_f1,
            "n_turns": self.n_turns,
            "n_tuples": self.n_tuples,
            "per_label": [
                {
                    "label": label.to_dict(),
                    "precision": counts.precision,
                    "recall": counts.recall,
                    "f1": counts.f1,
                    "support": counts.support,
                }
                for label, counts in sorted(
                    self.per_label.items(), key=lambda kv: -kv[1].support
                )
            ],
        }


def evaluate(gt: MultisetSeq, pred: MultisetSeq) -> EvalReport:
    precision, recall, f1 = multiset_f1(gt, pred)
    per_label = labelwise_metrics(gt, pred)
    return EvalReport(
        exact_match_accuracy=exact_match_accuracy(gt, pred),
        multiset_precision=precision,
        multiset_recall=recall,
        multiset_f1=f1,
        per_label=per_label,
        n_turns=len(gt),
        n_tuples=sum(ms.total() for ms in gt),
    )


def render_report(report: EvalReport) -> str:
    """Aligned-column human layout: headline rates, then the per-label table."""
    lines = [
        f"turns: {report.n_turns}    ground-truth tuples: {report.n_tuples}",
        f"exact match turn accuracy: {report.exact_match_accuracy:.3f}",
        f"multiset precision: {report.multiset_precision:.3f}  "
        f"recall: {report.multiset_recall:.3f}  F1: {report.multiset_f1:.3f}",
        "",
    ]
    header = f"{'label':<58}{'P':>8}{'R':>8}{'F1':>8}{'support':>9}"
    lines.append(header)
    lines.append("-" * len(header))
    for label, counts in sorted(report.per_label.items(), key=lambda kv: -kv[1].support):
        name = f"({label.category.value}, {label.action.value})"
        lines.append(
            f"{name:<58}{counts.precision:>8.3f}{counts.recall:>8.3f}"
            f"{counts.f1:>8.3f}{counts.support:>9}"
        )
    return "\n".join(lines)


# --- dataset format -----------------------------------------------------------

_HEADER_ID_KEYS = ("id", "dialogue_id", "dialogue", "name")
_TEAM_KEYS = ("team", "members", "team_members", "team_info")
_BACKLOG_KEYS = ("initial_backlog", "backlog", "tasks", "trello_tasks")
_TURN_KEYS = ("turn", "turn_index", "index", "t")
_USER_KEYS = ("user", "author", "username", "handle")
_TIME_KEYS = ("time", "timestamp", "date")
_MESSAGE_KEYS = ("message", "text", "content", "message_text")
_GT_KEYS = ("ground_truth", "labels", "annotations", "intents", "gold")
_OUTPUT_KEYS = ("agent_outputs", "responses", "agent_responses", "outputs")
_PRED_KEYS = ("predicted", "prediction", "predictions", "predicted_tuples")
_CATEGORY_KEYS = ("category", "message_category", "Category")
_ACTION_KEYS = ("action", "action_type", "Action")


def _first_key(record: Mapping, keys: Iterable[str]) -> Optional[str]:
    for key in keys:
        if key in record:
            return key
    return None


def _parse_tuple_list(raw: Any, where: str) -> IntentMultiset:
    if raw is None:
        return IntentMultiset()
    if not isinstance(raw, list):
        raise FormatError(f"{where}: intent list must be a JSON array")
    ms = IntentMultiset()
    for item in raw:
        if isinstance(item, Mapping):
            cat_key = _first_key(item, _CATEGORY_KEYS)
            act_key = _first_key(item, _ACTION_KEYS)
            if cat_key is None or act_key is None:
                raise FormatError(f"{where}: tuple needs category and action fields")
            payload = {"category": item[cat_key], "action": item[act_key]}
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            payload = {"category": item[0], "action": item[1]}
        else:
            raise FormatError(f"{where}: unrecognized tuple shape {item!r}")
        try:
            ms.add(IntentTuple.from_dict(payload))
        except Exception as exc:
            raise FormatError(f"{where}: {exc}") from exc
    return ms


def _parse_turn_record(record: Mapping, where: str) -> TurnRecord:
    turn_key = _first_key(record, _TURN_KEYS)
    user_key = _first_key(record, _USER_KEYS)
    msg_key = _first_key(record, _MESSAGE_KEYS)
    time_key = _first_key(record, _TIME_KEYS)
    if msg_key is None or user_key is None:
        raise FormatError(f"{where}: turn record needs user and message fields")
    try:
        message = parse_wire_message(
            {
                "user": record[user_key],
                "message": record[msg_key],
                "time": record.get(time_key, "01-01-2025 00:00:00") if time_key else "01-01-2025 00:00:00",
            }
        )
    except Exception as exc:
        raise FormatError(f"{where}: {exc}") from exc

    gt_key = _first_key(record, _GT_KEYS)
    gt_raw = record.get(gt_key) if gt_key else None
    ground_truth = None if gt_raw is None else _parse_tuple_list(gt_raw, where)

    pred_key = _first_key(record, _PRED_KEYS)
    predicted = _parse_tuple_list(record.get(pred_key), where) if pred_key else IntentMultiset()

    out_key = _first_key(record, _OUTPUT_KEYS)
    outputs_raw = record.get(out_key, []) if out_key else []
    if not isinstance(outputs_raw, list):
        raise FormatError(f"{where}: agent outputs must be a list")

    turn_index = record.get(turn_key, 0) if turn_key else 0
    if not isinstance(turn_index, int) or turn_index < 0:
        raise FormatError(f"{where}: turn index must be a nonnegative integer")
    return TurnRecord(
        turn_index=turn_index,
        message=message,
        predicted=predicted,
        ground_truth=ground_truth,
        agent_outputs=[str(x) for x in outputs_raw],
    )


def _is_header(record: Mapping) -> bool:
    has_id = _first_key(record, _HEADER_ID_KEYS) is not None
    has_message = _first_key(record, _MESSAGE_KEYS) is not None
    return has_id and not has_message


def _parse_dialogue_stream(lines: Iterable[str], where: str) -> list[Dialogue]:
    dialogues: list[Dialogue] = []
    current: Optional[Dialogue] = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        here = f"{where}:{lineno}"
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{here}: invalid JSON ({exc})") from exc
        if not isinstance(record, Mapping):
            raise FormatError(f"{here}: expected a JSON object per line")
        if _is_header(record):
            team_key = _first_key(record, _TEAM_KEYS)
            backlog_key = _first_key(record, _BACKLOG_KEYS)
            try:
                team = [TeamMember.from_dict(m) for m in record.get(team_key, [])] if team_key else []
                backlog = [Task.from_dict(t) for t in record.get(backlog_key, [])] if backlog_key else []
            except Exception as exc:
                raise FormatError(f"{here}: {exc}") from exc
            current = Dialogue(
                id=str(record[_first_key(record, _HEADER_ID_KEYS)]),
                team=team,
                initial_backlog=backlog,
            )
            dialogues.append(current)
            continue
        if current is None:
            current = Dialogue(id=f"{where}", team=[], initial_backlog=[])
            dialogues.append(current)
        turn = _parse_turn_record(record, here)
        if turn.turn_index == 0 and current.turns:
            turn.turn_index = current.turns[-1].turn_index + 1
        current.turns.append(turn)
    for dialogue in dialogues:
        indices = [t.turn_index for t in dialogue.turns]
        if len(set(indices)) != len(indices):
            raise FormatError(f"{where}: duplicate turn indices in dialogue {dialogue.id!r}")
        if indices != sorted(indices):
            raise FormatError(f"{where}: turns out of order in dialogue {dialogue.id!r}")
    return dialogues


def load_benchmark(path: Any) -> list[Dialogue]:
    """Load dialogues from a JSONL file or a directory of JSONL files.

    The import adapter tolerates the field-name variants found in archive
    exports and maps them onto the canonical shape; structural problems
    raise FormatError with path-and-line diagnostics.
    """
    target = Path(path)
    if not target.exists():
        raise FormatError(f"{target}: no such file or directory")
    if target.is_dir():
        files = sorted(p for p in target.iterdir() if p.suffix in (".jsonl", ".json"))
        if not files:
            raise FormatError(f"{target}: directory holds no .jsonl files")
        dialogues: list[Dialogue] = []
        for file in files:
            dialogues.extend(load_benchmark(file))
        return dialogues
    try:
        text = target.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{target}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("["):
        # Whole-file JSON array export: treat each element as one record line.
        try:
            records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{target}: invalid JSON ({exc})") from exc
        lines = [json.dumps(r) for r in records]
        return _parse_dialogue_stream(lines, str(target))
    return _parse_dialogue_stream(text.splitlines(), str(target))


def write_dialogues(dialogues: Iterable[Dialogue], path: Any) -> None:
    """Write canonical JSONL: a header record then one record per turn,
    repeated per dialogue."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as fh:
        for dialogue in dialogues:
            fh.write(canonical_json(dialogue.header_dict()) + "\n")
            for turn in dialogue.turns:
                fh.write(canonical_json(turn.to_dict()) + "\n")


@dataclass
class DatasetShape:
    n_dialogues: int
    n_turns: int
    n_tuples: int
    label_supports: dict[IntentTuple, int]

    def to_dict(self) -> dict:
        return {
            "n_dialogues": self.n_dialogues,
            "n_turns": self.n_turns,
            "n_tuples": self.n_tuples,
            "label_supports": [
                {"label": label.to_dict(), "support": support}
                for label, support in sorted(self.label_supports.items(), key=lambda kv: -kv[1])
            ],
        }


def dataset_shape(dialogues: Sequence[Dialogue]) -> DatasetShape:
    supports: dict[IntentTuple, int] = {}
    n_turns = 0
    n_tuples = 0
    for dialogue in dialogues:
        for turn in dialogue.turns:
            n_turns += 1
            if turn.ground_truth is None:
                continue
            for label in turn.ground_truth:
                supports[label] = supports.get(label, 0) + 1
                n_tuples += 1
    return DatasetShape(len(dialogues), n_turns, n_tuples, supports)


# --- extraction helpers ---------------------------------------------------------

def predictions_from_trace(records: Iterable[Mapping]) -> list[IntentMultiset]:
    """Per-turn predicted multisets from the structured trace log (never
    from response prose)."""
    out = []
    for record in records:
        ms = IntentMultiset()
        for item in record.get("classifications", []):
            ms.add(IntentTuple.from_dict(item))
        out.append(ms)
    return out


def ground_truth_of(dialogues: Sequence[Dialogue]) -> list[IntentMultiset]:
    out: list[IntentMultiset] = []
    for dialogue in dialogues:
        out.extend(dialogue.ground_truth_multisets())
    return out


def predictions_of(dialogues: Sequence[Dialogue]) -> list[IntentMultiset]:
    """Predicted multisets when present, else ground truth (so a dataset
    file can stand in as its own perfect prediction log)."""
    out: list[IntentMultiset] = []
    for dialogue in dialogues:
        for turn in dialogue.turns:
            if not turn.predicted.is_empty():
                out.append(turn.predicted)
            elif turn.ground_truth is not None:
                out.append(turn.ground_truth)
            else:
                out.append(IntentMultiset())
    return out


# --- experimental protocols -------------------------------------------------------

def replay_stateless(config: EngineConfig, dialogue: Dialogue) -> list[IntentMultiset]:
    """Per-turn re-instantiation: for each turn a fresh engine receives the
    verbatim prior transcript (human messages and logged agent outputs),
    then the turn's message. No state leaks between turns."""
    predictions: list[IntentMultiset] = []
    for index, turn in enumerate(dialogue.turns):
        engine = config.build(team=dialogue.team, backlog=dialogue.initial_backlog)
        entries: list[tuple[str, Mapping]] = []
        for prior in dialogue.turns[:index]:
            entries.append(("human", prior.message.to_wire()))
            for output in prior.agent_outputs:
                entries.append(
                    ("agent", {"message": output, "time": prior.message.wire_time()})
                )
        engine.seed_transcript(entries)
        try:
            outcome = engine.process(turn.message.to_wire())
            predictions.append(outcome.emitted)
        except Exception as exc:
            logger.error(
                "stateless replay failed on %s turn %d: %s", dialogue.id, turn.turn_index, exc
            )
            predictions.append(
                IntentMultiset(
                    [IntentTuple.from_dict({"category": "REGULAR_CONVERSATION", "action": "NO_ACTION"})]
                )
            )
    return predictions


def run_live(
    config: EngineConfig,
    message_source: Iterable[Mapping],
    *,
    team: Optional[list[TeamMember]] = None,
    initial_backlog: Optional[list[Task]] = None,
    dialogue_id: str = "live",
) -> tuple[Dialogue, list[IntentMultiset]]:
    """One persistent engine processes every message in order, building its
    own conversational memory. Returns a replayable dialogue log plus the
    per-turn predictions."""
    engine = config.build(team=team, backlog=initial_backlog)
    predictions: list[IntentMultiset] = []
    for raw in message_source:
        outcome = engine.process(raw)
        predictions.append(outcome.emitted)
    dialogue = Dialogue(
        id=dialogue_id,
        team=list(engine.state.team),
        initial_backlog=initial_backlog if initial_backlog is not None else config.resolve_backlog(),
        turns=list(engine.turn_records),
    )
    return dialogue, predictions


def replay_dataset(
    config: EngineConfig, dialogues: Sequence[Dialogue], *, live: bool
) -> list[Dialogue]:
    """Run either protocol over a loaded dataset, producing prediction logs
    in the canonical format (ground truth carried over)."""
    out: list[Dialogue] = []
    for dialogue in dialogues:
        if live:
            log, predictions = run_live(
                config,
                (turn.message.to_wire() for turn in dialogue.turns),
                team=dialogue.team,
                initial_backlog=dialogue.initial_backlog,
                dialogue_id=dialogue.id,
            )
            turns = log.turns
        else:
            predictions = replay_stateless(config, dialogue)
            turns = [
                TurnRecord(
                    turn_index=turn.turn_index,
                    message=turn.message,
                    predicted=prediction,
                    ground_truth=turn.ground_truth,
                    agent_outputs=list(turn.agent_outputs),
                )
                for turn, prediction in zip(dialogue.turns, predictions)
            ]
        if live:
            for source_turn, logged_turn in zip(dialogue.turns, turns):
                logged_turn.ground_truth = source_turn.ground_truth
        out.append(
            Dialogue(
                id=dialogue.id,
                team=dialogue.team,
                initial_backlog=dialogue.initial_backlog,
                turns=turns,
            )
        )
    return out
