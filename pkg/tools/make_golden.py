"""Regenerate the bundled golden dialogue.

Runs the 20-turn script below through a rule-backend engine (live
protocol), checks every emitted classification against the hand-audited
expectations, then freezes the log with those expectations as ground
truth into src/devnous/data/golden_dialogue.jsonl.

Run from the repo root: python tools/make_golden.py
"""

from pathlib import Path

from devnous.evaluation import run_live, write_dialogues
from devnous.model import ActionType as A
from devnous.model import IntentMultiset, IntentTuple
from devnous.model import MessageCategory as K
from devnous.orchestrator import EngineConfig

OUT = Path(__file__).resolve().parent.parent / "src" / "devnous" / "data" / "golden_dialogue.jsonl"

SCRIPT = [
    # (user, message, audited (category, action))
    ("mchen", "morning! CI pipeline speedup is finally looking green on my branch",
     (K.EXISTING_TASK, A.UPDATE_CONTEXT)),
    ("edavis", "nice", (K.REGULAR_CONVERSATION, A.NO_ACTION)),
    ("jpark", "anyone ordering lunch?", (K.REGULAR_CONVERSATION, A.NO_ACTION)),
    ("snovak", "new bug: export button crashes on empty reports",
     (K.NEW_TASK, A.CREATE_TASK)),
    ("snovak",
     "title: Fix export crash description: export button crashes when the report list is empty "
     "priority: High assignee: jpark",
     (K.WORKFLOW_RESPONSE, A.CONTINUE_WORKFLOW)),
    ("edavis", "@jpark can you also check the csv path? label: export",
     (K.WORKFLOW_RESPONSE, A.CONTINUE_WORKFLOW)),
    ("snovak", "yes", (K.WORKFLOW_RESPONSE, A.CONTINUE_WORKFLOW)),
    ("mchen", "lol the linter just ate my whole morning", (K.REGULAR_CONVERSATION, A.NO_ACTION)),
    ("edavis", "Bug fix for user profiles is blocked, waiting on new avatar specs",
     (K.EXISTING_TASK, A.UPDATE_CONTEXT)),
    ("jpark", "ugh, tokens keep expiring mid-request", (K.REGULAR_CONVERSATION, A.NO_ACTION)),
    ("mchen", "OAuth implementation passing all integration tests now",
     (K.EXISTING_TASK, A.UPDATE_CONTEXT)),
    ("arivera", "we should add rate limiting on the public API", (K.NEW_TASK, A.CREATE_TASK)),
    ("arivera",
     "title: API rate limiting description: add per-key rate limits to the public API "
     "priority: Medium assignee: mchen",
     (K.WORKFLOW_RESPONSE, A.CONTINUE_WORKFLOW)),
    ("jpark", "@snovak did the export fix land in staging yet?",
     (K.REGULAR_CONVERSATION, A.NO_ACTION)),
    ("arivera", "confirm", (K.WORKFLOW_RESPONSE, A.CONTINUE_WORKFLOW)),
    ("snovak", "planning to run the full regression suite tomorrow",
     (K.REGULAR_CONVERSATION, A.NO_ACTION)),
    ("mchen", "@devnous can you generate today's team summary?",
     (K.SUMMARY_TRIGGER, A.GENERATE_SUMMARY)),
    ("mchen", "yes", (K.WORKFLOW_RESPONSE, A.CONTINUE_WORKFLOW)),
    ("edavis", "blockers: need final avatar sizes from design",
     (K.WORKFLOW_RESPONSE, A.CONTINUE_WORKFLOW)),
    ("edavis", "yes", (K.WORKFLOW_RESPONSE, A.CONTINUE_WORKFLOW)),
]


def main() -> None:
    messages = []
    for index, (user, text, _) in enumerate(SCRIPT):
        minute = index * 5
        messages.append(
            {
                "user": user,
                "message": text,
                "time": f"12-03-2025 {9 + minute // 60:02d}:{minute % 60:02d}:00",
            }
        )
    config = EngineConfig(backend="rule")
    dialogue, predictions = run_live(config, messages, dialogue_id="golden-1")

    for index, ((_, text, expected), predicted) in enumerate(zip(SCRIPT, predictions)):
        want = IntentMultiset([IntentTuple(*expected)])
        if predicted != want:
            raise SystemExit(
                f"turn {index}: engine produced {predicted}, audit expected {want}\n  {text!r}"
            )
    for turn, (_, _, expected) in zip(dialogue.turns, SCRIPT):
        turn.ground_truth = IntentMultiset([IntentTuple(*expected)])

    write_dialogues([dialogue], OUT)
    responders = sum(1 for t in dialogue.turns if t.agent_outputs)
    print(f"wrote {OUT} ({len(dialogue.turns)} turns, {responders} with responses)")


if __name__ == "__main__":
    main()
