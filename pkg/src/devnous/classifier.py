"""Message intent classification.

Maps (state, message) to an ordered list of (category, action)
classifications, either through a pluggable completion backend with strict
schema validation, or through the deterministic rule backend used for
tests and replay.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Protocol, runtime_checkable

from .errors import ClassifierFailure, SchemaViolation
from .model import (
    AGENT_HANDLE,
    ActionType,
    IntentTuple,
    Message,
    MessageCategory,
    ProjectState,
    canonical_json,
)
from .prompts import render_agent_prompt

logger = logging.getLogger(__name__)


@dataclass
class Classification:
    """Validated classifier output for one intent."""

    category: MessageCategory
    confidence: float
    explanation: str
    action: ActionType
    is_cross_talk: bool = False

    def intent(self) -> IntentTuple:
        return IntentTuple(self.category, self.action)

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "confidence": self.confidence,
            "explanation": self.explanation,
            "action": self.action.value,
            "is_cross_talk": self.is_cross_talk,
        }


def serialize_classification(classification: Classification) -> str:
    return canonical_json(classification.to_dict())


@runtime_checkable
class CompletionBackend(Protocol):
    """A text-completion provider. `concurrent=False` declares a serial
    backend; the engine will not overlap calls to it."""

    concurrent: bool

    def complete(self, prompt: str, context: str) -> str: ...


def backend_call(backend: "CompletionBackend", prompt: str, context: str) -> str:
    """Invoke a backend, serializing calls to backends that declare
    themselves serial (distinct channels may share one instance)."""
    if getattr(backend, "concurrent", False):
        return backend.complete(prompt, context)
    lock = getattr(backend, "_serial_lock", None)
    if lock is None:
        lock = threading.Lock()
        try:
            setattr(backend, "_serial_lock", lock)
        except AttributeError:
            return backend.complete(prompt, context)
    with lock:
        return backend.complete(prompt, context)


class HttpCompletionBackend:
    """OpenAI-style chat-completions client configured from the environment.

    Reads DEVNOUS_LLM_ENDPOINT, DEVNOUS_LLM_MODEL and DEVNOUS_LLM_API_KEY.
    Credential values are never logged.
    """

    concurrent = True

    ENDPOINT_VAR = "DEVNOUS_LLM_ENDPOINT"
    MODEL_VAR = "DEVNOUS_LLM_MODEL"
    KEY_VAR = "DEVNOUS_LLM_API_KEY"

    def __init__(self, endpoint: Optional[str] = None, model: Optional[str] = None,
                 api_key: Optional[str] = None, timeout: float = 60.0):
        self.endpoint = endpoint or os.environ.get(self.ENDPOINT_VAR, "")
        self.model = model or os.environ.get(self.MODEL_VAR, "")
        self._api_key = api_key or os.environ.get(self.KEY_VAR, "")
        self.timeout = timeout
        if not self.endpoint:
            raise ValueError(f"{self.ENDPOINT_VAR} is not configured")

    def complete(self, prompt: str, context: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt},
                {"role": "user", "content": context},
            ],
        }
        response = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
        response.raise_for_status()
        payload = response.json()
        return payload["choices"][0]["message"]["content"]


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json_payload(raw: str) -> Any:
    """Pull the structured payload out of `raw`, tolerating surrounding
    prose and code fences."""
    if not isinstance(raw, str) or not raw.strip():
        raise SchemaViolation("payload", "empty classifier output")
    fenced = _FENCE_RE.search(raw)
    text = fenced.group(1) if fenced else raw
    decoder = json.JSONDecoder()
    for start, char in enumerate(text):
        if char in "[{":
            try:
                value, _ = decoder.raw_decode(text[start:])
                return value
            except json.JSONDecodeError:
                continue
    raise SchemaViolation("payload", "no JSON object or list found in classifier output")


def _validate_one(raw: Any) -> Classification:
    if not isinstance(raw, dict):
        raise SchemaViolation("payload", f"expected object, got {type(raw).__name__}")
    for required in ("category", "confidence", "explanation", "action"):
        if required not in raw:
            raise SchemaViolation(required, "required field missing")
    category = MessageCategory.parse(raw["category"])
    action = ActionType.parse(raw["action"])
    confidence = raw["confidence"]
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
        raise SchemaViolation("confidence", f"expected number, got {type(confidence).__name__}")
    confidence = float(confidence)
    if not 0.0 <= confidence <= 1.0:
        raise SchemaViolation("confidence", f"{confidence} outside [0,1]")
    explanation = raw["explanation"]
    if not isinstance(explanation, str) or not explanation.strip():
        raise SchemaViolation("explanation", "must be a nonempty string")
    is_cross_talk = raw.get("is_cross_talk", False)
    if not isinstance(is_cross_talk, bool):
        raise SchemaViolation("is_cross_talk", "must be a boolean")
    return Classification(category, confidence, explanation, action, is_cross_talk)


def validate_classifier_output(raw: str) -> list[Classification]:
    """Validate raw backend text into one or more Classifications.

    Accepts a single object or a list; strips fences/prose around the
    payload; rejects unknown enum strings and out-of-range confidence with
    a field-level SchemaViolation.
    """
    payload = extract_json_payload(raw)
    items = payload if isinstance(payload, list) else [payload]
    if not items:
        raise SchemaViolation("payload", "classification list is empty")
    return [_validate_one(item) for item in items]


def classify(
    state: ProjectState,
    message: Message,
    backend: CompletionBackend,
    *,
    history_window: int = 50,
    prompts_dir: Optional[Path] = None,
) -> list[Classification]:
    """Run the classifier prompt through `backend` and validate the result.

    One retry on backend error or schema violation (the retry re-prompts
    with the validation error appended); after that, ClassifierFailure.
    Returned list is ordered by descending confidence, ties keeping
    backend order.
    """
    prompt = render_agent_prompt(
        "classifier", state, message, history_window=history_window, prompts_dir=prompts_dir
    )
    context = message.render()
    last_error: Exception | None = None
    for attempt in range(2):
        try:
            raw = backend_call(backend, prompt, context)
        except Exception as exc:
            last_error = exc
            logger.warning("classifier backend error (attempt %d): %s", attempt + 1, exc)
            continue
        try:
            results = validate_classifier_output(raw)
        except SchemaViolation as exc:
            last_error = exc
            prompt = f"{prompt}\n\nYour previous reply was rejected ({exc}). Return valid JSON only."
            continue
        return sorted(results, key=lambda c: -c.confidence)
    raise ClassifierFailure(str(last_error))


NEW_TASK_TRIGGERS = (
    "new task",
    "new bug",
    "we should add",
    "we should track",
    "create a task",
    "needs to be tracked",
)

_SUMMARY_RE = re.compile(rf"@{AGENT_HANDLE}\b.*\bsummar", re.IGNORECASE | re.DOTALL)
_MENTION_RE = re.compile(r"@([A-Za-z0-9_.\-]+)")
_FIELD_HINT_RE = re.compile(
    r"\b(title|description|priority|assignee|label|labels)\s*:", re.IGNORECASE
)

# Phrases the engine's own workflow questions always contain. When a fresh
# engine replays a transcript it has no workflow state, so continuation is
# inferred from the last agent message instead.
CONTINUATION_MARKERS = (
    "I still need:",
    "Reply 'yes' to create it",
    "say 'yes' to retry",
    "Anything missing?",
)


@dataclass(frozen=True)
class RuleConfig:
    """Knobs for the deterministic rule backend."""

    new_task_triggers: tuple[str, ...] = NEW_TASK_TRIGGERS
    affirmative: tuple[str, ...] = ("yes", "confirm", "confirmed", "yep")
    abandon: tuple[str, ...] = ("cancel", "nevermind", "never mind", "abort")
    overrides: tuple[tuple[str, IntentTuple], ...] = ()
    agent_handle: str = AGENT_HANDLE


DEFAULT_RULES = RuleConfig()


def detect_cross_talk(state: ProjectState, message: Message, config: RuleConfig = DEFAULT_RULES) -> bool:
    """Cross-talk = the message @-mentions a roster member other than the agent."""
    mentioned = {m.lower() for m in _MENTION_RE.findall(message.content)}
    mentioned.discard(config.agent_handle)
    handles = {h.lower() for h in state.handles()}
    return bool(mentioned & handles)


def workflow_continuation_signal(state: ProjectState) -> bool:
    """True when a workflow is active, or (for re-instantiated engines with
    only a transcript) when the agent's last message was a workflow question."""
    if state.active_workflow() is not None:
        return True
    for message in reversed(state.history):
        if message.user == AGENT_HANDLE:
            return any(marker in message.content for marker in CONTINUATION_MARKERS)
    return False


def rule_classify(
    state: ProjectState, message: Message, config: RuleConfig = DEFAULT_RULES
) -> list[Classification]:
    """Deterministic keyword/state classifier. Pure function of its inputs;
    confidence is fixed at 1.0."""
    content = message.content.casefold()
    cross_talk = detect_cross_talk(state, message, config)

    def result(category: MessageCategory, action: ActionType, why: str) -> list[Classification]:
        return [Classification(category, 1.0, why, action, is_cross_talk=cross_talk)]

    for phrase, intent in config.overrides:
        if phrase.casefold() in content:
            return result(intent.category, intent.action, f"configured rule for {phrase!r}")

    if workflow_continuation_signal(state):
        if not cross_talk:
            return result(
                MessageCategory.WORKFLOW_RESPONSE,
                ActionType.CONTINUE_WORKFLOW,
                "workflow in progress and message is not cross-talk",
            )
        if _FIELD_HINT_RE.search(message.content):
            return result(
                MessageCategory.WORKFLOW_RESPONSE,
                ActionType.CONTINUE_WORKFLOW,
                "cross-talk carrying workflow field values",
            )

    if _SUMMARY_RE.search(message.content):
        return result(
            MessageCategory.SUMMARY_TRIGGER, ActionType.GENERATE_SUMMARY, "summary requested"
        )

    for phrase in config.new_task_triggers:
        if phrase.casefold() in content:
            return result(
                MessageCategory.NEW_TASK, ActionType.CREATE_TASK, f"matched trigger {phrase!r}"
            )

    if state.find_task(message.content) is not None:
        return result(
            MessageCategory.EXISTING_TASK, ActionType.UPDATE_CONTEXT, "mentions a tracked task"
        )

    return result(MessageCategory.REGULAR_CONVERSATION, ActionType.NO_ACTION, "no rule matched")
