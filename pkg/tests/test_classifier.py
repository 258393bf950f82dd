import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from devnous.classifier import (
    RuleConfig,
    classify,
    detect_cross_talk,
    rule_classify,
    validate_classifier_output,
)
from devnous.errors import ClassifierFailure, SchemaViolation
from devnous.model import (
    ActionType,
    IntentTuple,
    MessageCategory,
    WorkflowKind,
    ingest_message,
)
from devnous.workflows import start_workflow
from conftest import wire


def ingest(state, user, text):
    _, message = ingest_message(state, wire(user, text))
    return message


# --- validate_classifier_output ------------------------------------------------


def test_validator_accepts_object_and_normalizes_action():
    raw = json.dumps(
        {
            "category": "NEW_TASK",
            "confidence": 0.9,
            "explanation": "proposes untracked work",
            "action": "create_task",
        }
    )
    result = validate_classifier_output(raw)
    assert len(result) == 1
    assert result[0].action is ActionType.CREATE_TASK
    assert result[0].is_cross_talk is False


def test_validator_accepts_list():
    raw = json.dumps(
        [
            {"category": "NEW_TASK", "confidence": 0.8, "explanation": "a", "action": "CREATE_TASK"},
            {"category": "REGULAR_CONVERSATION", "confidence": 0.3, "explanation": "b",
             "action": "NO_ACTION", "is_cross_talk": True},
        ]
    )
    result = validate_classifier_output(raw)
    assert len(result) == 2
    assert result[1].is_cross_talk is True


def test_validator_strips_prose_and_fences():
    raw = (
        "Sure! Here is the classification:\n```json\n"
        '{"category": "SUMMARY_TRIGGER", "confidence": 1.0, "explanation": "asked", '
        '"action": "generate_summary"}\n```\nLet me know.'
    )
    result = validate_classifier_output(raw)
    assert result[0].category is MessageCategory.SUMMARY_TRIGGER


@pytest.mark.parametrize(
    "payload,bad_field",
    [
        ({"category": "LUNCH", "confidence": 0.5, "explanation": "x", "action": "NO_ACTION"}, "category"),
        ({"category": "NEW_TASK", "confidence": 1.3, "explanation": "x", "action": "NO_ACTION"}, "confidence"),
        ({"category": "NEW_TASK", "confidence": -0.1, "explanation": "x", "action": "NO_ACTION"}, "confidence"),
        ({"category": "NEW_TASK", "confidence": 0.5, "explanation": "", "action": "NO_ACTION"}, "explanation"),
        ({"category": "NEW_TASK", "confidence": 0.5, "explanation": "x", "action": "EAT"}, "action"),
        ({"confidence": 0.5, "explanation": "x", "action": "NO_ACTION"}, "category"),
    ],
)
def test_validator_rejects_field(payload, bad_field):
    with pytest.raises(SchemaViolation) as err:
        validate_classifier_output(json.dumps(payload))
    assert err.value.field == bad_field


@given(st.text(max_size=200))
def test_validator_never_panics_on_fuzz(raw):
    try:
        result = validate_classifier_output(raw)
    except SchemaViolation:
        return
    for item in result:
        assert 0.0 <= item.confidence <= 1.0
        assert item.explanation.strip()


# --- classify through a backend --------------------------------------------------


class ScriptedBackend:
    concurrent = False

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def complete(self, prompt, context):
        self.calls.append((prompt, context))
        if not self.replies:
            raise RuntimeError("script exhausted")
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


def good_reply(category="REGULAR_CONVERSATION", action="no_action", confidence=0.7):
    return json.dumps(
        {"category": category, "confidence": confidence, "explanation": "scripted", "action": action}
    )


def test_classify_fills_prompt_slots(state):
    message = ingest(state, "mchen", "Priority should be high")
    backend = ScriptedBackend([good_reply()])
    classify(state, message, backend)
    prompt, context = backend.calls[0]
    assert "mchen" in prompt  # team_info
    assert "OAuth implementation" in prompt  # trello_tasks
    assert "12-03-2025 10:15:00" in prompt  # _time
    assert "Priority should be high" in context


def test_classify_orders_by_confidence_desc(state):
    message = ingest(state, "mchen", "hello")
    backend = ScriptedBackend(
        [
            json.dumps(
                [
                    {"category": "NEW_TASK", "confidence": 0.4, "explanation": "a", "action": "create_task"},
                    {"category": "EXISTING_TASK", "confidence": 0.9, "explanation": "b", "action": "update_context"},
                ]
            )
        ]
    )
    result = classify(state, message, backend)
    assert [c.confidence for c in result] == [0.9, 0.4]


def test_classify_ties_keep_backend_order(state):
    message = ingest(state, "mchen", "hello")
    backend = ScriptedBackend(
        [
            json.dumps(
                [
                    {"category": "EXISTING_TASK", "confidence": 0.5, "explanation": "first", "action": "update_context"},
                    {"category": "NEW_TASK", "confidence": 0.5, "explanation": "second", "action": "create_task"},
                ]
            )
        ]
    )
    result = classify(state, message, backend)
    assert [c.explanation for c in result] == ["first", "second"]


def test_classify_retries_then_fails(state):
    message = ingest(state, "mchen", "hello")
    backend = ScriptedBackend(["not json at all", "still prose"])
    with pytest.raises(ClassifierFailure):
        classify(state, message, backend)
    assert len(backend.calls) == 2
    # the retry prompt quotes the validation error
    assert "rejected" in backend.calls[1][0]


def test_classify_retry_recovers(state):
    message = ingest(state, "mchen", "hello")
    backend = ScriptedBackend(["garbage", good_reply()])
    result = classify(state, message, backend)
    assert result[0].category is MessageCategory.REGULAR_CONVERSATION


# --- rule backend -------------------------------------------------------------------


def test_rule_summary_trigger(state):
    message = ingest(state, "mchen", "@devnous can you generate today's team summary?")
    (result,) = rule_classify(state, message)
    assert result.intent() == IntentTuple(
        MessageCategory.SUMMARY_TRIGGER, ActionType.GENERATE_SUMMARY
    )
    assert result.confidence == 1.0


def test_rule_workflow_response_during_active_workflow(state):
    start_workflow(state, WorkflowKind.TASK, {"phase": "gathering"})
    message = ingest(state, "mchen", "Priority should be high")
    (result,) = rule_classify(state, message)
    assert result.intent() == IntentTuple(
        MessageCategory.WORKFLOW_RESPONSE, ActionType.CONTINUE_WORKFLOW
    )


def test_rule_existing_task_mention_when_idle(state):
    message = ingest(state, "mchen", "OAuth implementation is nearly done")
    (result,) = rule_classify(state, message)
    assert result.intent() == IntentTuple(
        MessageCategory.EXISTING_TASK, ActionType.UPDATE_CONTEXT
    )


def test_rule_new_task_trigger(state):
    message = ingest(state, "mchen", "new bug: dropdown overlaps footer on small screens")
    (result,) = rule_classify(state, message)
    assert result.intent() == IntentTuple(MessageCategory.NEW_TASK, ActionType.CREATE_TASK)


def test_rule_default_branch(state):
    message = ingest(state, "mchen", "anyone ordering lunch?")
    (result,) = rule_classify(state, message)
    assert result.intent() == IntentTuple(
        MessageCategory.REGULAR_CONVERSATION, ActionType.NO_ACTION
    )


def test_rule_cross_talk_not_workflow_response(state):
    start_workflow(state, WorkflowKind.TASK, {"phase": "gathering"})
    message = ingest(state, "snovak", "Margherita for me! @mchen nice catch on the CI issue")
    (result,) = rule_classify(state, message)
    assert result.category is MessageCategory.REGULAR_CONVERSATION
    assert result.is_cross_talk is True


def test_rule_cross_talk_with_field_pattern_continues_workflow(state):
    start_workflow(state, WorkflowKind.TASK, {"phase": "gathering"})
    message = ingest(state, "snovak", "@edavis we should set label: backend on that one")
    (result,) = rule_classify(state, message)
    assert result.intent() == IntentTuple(
        MessageCategory.WORKFLOW_RESPONSE, ActionType.CONTINUE_WORKFLOW
    )
    assert result.is_cross_talk is True


def test_rule_configured_override(state):
    rules = RuleConfig(
        overrides=(
            ("ugh, this bug is tricky",
             IntentTuple(MessageCategory.EXISTING_TASK, ActionType.NO_ACTION)),
        )
    )
    message = ingest(state, "mchen", "Ugh, this bug is tricky")
    (result,) = rule_classify(state, message, rules)
    assert result.intent() == IntentTuple(MessageCategory.EXISTING_TASK, ActionType.NO_ACTION)


def test_rule_determinism(state):
    message = ingest(state, "mchen", "OAuth implementation update")
    first = rule_classify(state, message)
    for _ in range(1000):
        again = rule_classify(state, message)
        assert [c.to_dict() for c in again] == [c.to_dict() for c in first]


def test_cross_talk_detection_ignores_agent_mention(state):
    message = ingest(state, "mchen", "@devnous ping")
    assert detect_cross_talk(state, message) is False
    message2 = ingest(state, "mchen", "@edavis ping")
    assert detect_cross_talk(state, message2) is True


def test_serial_backend_calls_never_overlap(state):
    import threading
    import time

    from devnous.classifier import backend_call

    class SerialBackend:
        concurrent = False

        def __init__(self):
            self.inside = 0
            self.max_inside = 0
            self.guard = threading.Lock()

        def complete(self, prompt, context):
            with self.guard:
                self.inside += 1
                self.max_inside = max(self.max_inside, self.inside)
            time.sleep(0.002)
            with self.guard:
                self.inside -= 1
            return good_reply()

    backend = SerialBackend()
    threads = [
        threading.Thread(target=backend_call, args=(backend, "p", "c")) for _ in range(8)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert backend.max_inside == 1


def test_classification_canonical_round_trip():
    from devnous.classifier import serialize_classification
    from devnous.classifier import Classification

    original = Classification(
        MessageCategory.NEW_TASK, 0.75, "proposes untracked work",
        ActionType.CREATE_TASK, is_cross_talk=True,
    )
    text = serialize_classification(original)
    (parsed,) = validate_classifier_output(text)
    assert serialize_classification(parsed) == text
    assert list(json.loads(text)) == [
        "category", "confidence", "explanation", "action", "is_cross_talk",
    ]
