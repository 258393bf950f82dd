"""Human-in-the-loop workflow state machines.

Two multi-turn procedures run on top of the single WorkflowState slot:
task formalization (gather fields, confirm, create) and per-member
summary synthesis (draft, confirm member by member). Both stay silent on
cross-talk and never touch an ended workflow.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import date as date_type
from datetime import datetime
from typing import Any, Mapping, Optional, Protocol

from .classifier import Classification, RuleConfig, DEFAULT_RULES, backend_call
from .errors import (
    NoActiveWorkflow,
    PMBackendFailure,
    SchemaViolation,
    ToolError,
    WorkflowAlreadyActive,
)
from .model import (
    AGENT_HANDLE,
    ActionType,
    Message,
    ProjectState,
    Summary,
    TeamMember,
    WorkflowKind,
    WorkflowState,
    canonical_json,
)
from .trace import Trace

PRIORITY_LEVELS = ("High", "Medium", "Low")

_KIND_ALIASES = {
    "task_workflow": WorkflowKind.TASK,
    "task_creation": WorkflowKind.TASK,
    "task": WorkflowKind.TASK,
    "summary_workflow": WorkflowKind.SUMMARY,
    "summary_generation": WorkflowKind.SUMMARY,
    "summary": WorkflowKind.SUMMARY,
}


def parse_workflow_kind(raw: Any) -> WorkflowKind:
    if isinstance(raw, WorkflowKind):
        return raw
    if isinstance(raw, str) and raw.strip().lower() in _KIND_ALIASES:
        return _KIND_ALIASES[raw.strip().lower()]
    raise SchemaViolation("kind", f"unknown workflow kind {raw!r}")


def _clean_data(data: Mapping[str, Any]) -> dict[str, str]:
    out: dict[str, str] = {}
    for key, value in data.items():
        if not isinstance(key, str) or not key:
            raise ValueError("workflow data keys must be nonempty strings")
        out[key] = value if isinstance(value, str) else canonical_json(value)
    return out


class ToolInvoker(Protocol):
    """What the FSMs need from the toolbox: grant-checked invocation."""

    def invoke(
        self, agent_id: str, tool_name: str, args: Mapping, state: ProjectState,
        trace: Optional[Trace] = None,
    ) -> tuple[Any, ProjectState]: ...


# --- workflow state primitives -------------------------------------------

def start_workflow(
    state: ProjectState,
    kind: Any,
    initial_data: Mapping[str, Any],
    *,
    started_by: str = "",
    started_at: Optional[datetime] = None,
) -> ProjectState:
    if state.active_workflow() is not None:
        raise WorkflowAlreadyActive(f"{state.workflow.kind.value} already in progress")
    if started_at is None:
        started_at = state.history[-1].timestamp if state.history else datetime.utcnow()
    state.workflow = WorkflowState(
        kind=parse_workflow_kind(kind),
        is_active=True,
        data=_clean_data(initial_data),
        started_by=started_by,
        started_at=started_at,
    )
    return state


def update_workflow_data(state: ProjectState, delta: Mapping[str, Any]) -> ProjectState:
    """Merge `delta` into the active workflow's data, last write winning."""
    workflow = state.active_workflow()
    if workflow is None:
        raise NoActiveWorkflow("no active workflow to update")
    workflow.data.update(_clean_data(delta))
    return state


def get_workflow_state(state: ProjectState) -> Optional[WorkflowState]:
    return state.workflow


def end_workflow(state: ProjectState, result: Mapping[str, Any]) -> ProjectState:
    workflow = state.active_workflow()
    if workflow is None:
        raise NoActiveWorkflow("no active workflow to end")
    workflow.data.update(_clean_data(result))
    workflow.is_active = False
    return state


def _trace_workflow_op(trace: Optional[Trace], agent: str, name: str, args: Mapping) -> None:
    if trace is not None:
        trace.add("tool", agent=agent, tool=name, args=dict(args), outcome="ok", mutating=True)


# --- task formalization ----------------------------------------------------

@dataclass
class TaskDraft:
    """The fields gathered so far. Complete once title, description,
    priority and assignee are all present; labels stay optional."""

    title: Optional[str] = None
    description: Optional[str] = None
    priority: Optional[str] = None
    assignee: Optional[str] = None
    labels: list[str] = field(default_factory=list)
    confirmed: bool = False

    REQUIRED = ("title", "description", "priority", "assignee")

    def missing(self) -> list[str]:
        return [name for name in self.REQUIRED if not getattr(self, name)]

    def is_complete(self) -> bool:
        return not self.missing()

    def to_data(self) -> dict[str, str]:
        data: dict[str, str] = {}
        for name in self.REQUIRED:
            value = getattr(self, name)
            if value:
                data[name] = value
        data["labels"] = canonical_json(self.labels)
        data["confirmed"] = "true" if self.confirmed else "false"
        return data

    @classmethod
    def from_data(cls, data: Mapping[str, str]) -> "TaskDraft":
        labels_raw = data.get("labels", "[]")
        try:
            labels = json.loads(labels_raw)
        except json.JSONDecodeError:
            labels = [labels_raw]
        return cls(
            title=data.get("title") or None,
            description=data.get("description") or None,
            priority=data.get("priority") or None,
            assignee=data.get("assignee") or None,
            labels=[str(x) for x in labels] if isinstance(labels, list) else [str(labels)],
            confirmed=data.get("confirmed") == "true",
        )


_FIELD_MARKER = re.compile(
    r"\b(title|description|priority|assignee|labels|label)\s*[:=]\s*", re.IGNORECASE
)


def extract_draft_fields(text: str) -> dict[str, Any]:
    """Pull `field: value` segments out of free text.

    The rule backend recognizes only this explicit pattern; richer
    extraction is the completion backend's job.
    """
    markers = list(_FIELD_MARKER.finditer(text))
    out: dict[str, Any] = {}
    for i, marker in enumerate(markers):
        start = marker.end()
        end = markers[i + 1].start() if i + 1 < len(markers) else len(text)
        value = text[start:end].strip().strip(".,;")
        if not value:
            continue
        name = marker.group(1).lower()
        first_token = value.split()[0].strip(".,;!?")
        if name == "labels":
            out["labels"] = [part.strip() for part in value.split(",") if part.strip()]
        elif name == "label":
            # Singular marker names exactly one label; drop trailing prose.
            out.setdefault("labels", []).append(first_token)
        elif name == "priority":
            level = first_token.title()
            if level in PRIORITY_LEVELS:
                out["priority"] = level
        elif name == "assignee":
            out["assignee"] = first_token.lstrip("@")
        else:
            out[name] = value
    return out


def _backend_extract(backend, prompt_context: str, text: str) -> dict[str, Any]:
    """Ask a completion backend for field values; fall back to the literal
    pattern on anything unparseable."""
    if backend is None:
        return extract_draft_fields(text)
    try:
        raw = backend_call(backend, prompt_context, text)
        payload = json.loads(raw)
        fields = payload.get("fields", {}) if isinstance(payload, dict) else {}
        cleaned: dict[str, Any] = {}
        for name in ("title", "description", "assignee"):
            if isinstance(fields.get(name), str) and fields[name].strip():
                cleaned[name] = fields[name].strip()
        if isinstance(fields.get("priority"), str):
            level = fields["priority"].strip().title()
            if level in PRIORITY_LEVELS:
                cleaned["priority"] = level
        if isinstance(fields.get("labels"), list):
            cleaned["labels"] = [str(x) for x in fields["labels"]]
        return cleaned
    except Exception:
        return extract_draft_fields(text)


def _absorb(draft: TaskDraft, found: Mapping[str, Any]) -> bool:
    changed = False
    for name in ("title", "description", "priority", "assignee"):
        if found.get(name) and found[name] != getattr(draft, name):
            setattr(draft, name, found[name])
            changed = True
    for label in found.get("labels", []):
        if label not in draft.labels:
            draft.labels.append(label)
            changed = True
    return changed


def _first_word(text: str) -> str:
    stripped = text.strip().casefold()
    word = stripped.split()[0] if stripped.split() else ""
    return word.strip(".,!?:;")


def detect_disposition(text: str, rules: RuleConfig = DEFAULT_RULES) -> str:
    """affirmative | abandon | other, by the fixed phrase sets."""
    lowered = text.casefold()
    if _first_word(text) in rules.affirmative:
        return "affirmative"
    for phrase in rules.abandon:
        if re.search(rf"\b{re.escape(phrase)}\b", lowered):
            return "abandon"
    return "other"


def _recap(draft: TaskDraft) -> str:
    parts = []
    for name in ("title", "description", "priority", "assignee"):
        value = getattr(draft, name)
        if value:
            parts.append(f"{name}: {value}")
    if draft.labels:
        parts.append(f"labels: {', '.join(draft.labels)}")
    return "; ".join(parts)


def _ask_missing(draft: TaskDraft) -> str:
    fields = ", ".join(draft.missing())
    return f"Working on a task draft. I still need: {fields}. Reply with `field: value`."


def _confirm_prompt(draft: TaskDraft) -> str:
    return (
        f"Draft so far: {_recap(draft)}. "
        "Reply 'yes' to create it, 'cancel' to drop it, or correct any `field: value`."
    )


BUSY_TEMPLATE = "A {kind} workflow is already in progress; finish or cancel it first."


def task_step(
    state: ProjectState,
    message: Message,
    classification: Classification,
    backend=None,
    *,
    tools: Optional[ToolInvoker] = None,
    trace: Optional[Trace] = None,
    rules: RuleConfig = DEFAULT_RULES,
) -> tuple[list[str], ProjectState]:
    """One step of the task-formalization FSM.

    Gathering absorbs field values and asks for exactly what is missing;
    Confirming creates, corrects, or abandons. Cross-talk is absorbed
    silently.
    """
    workflow = state.active_workflow()

    if workflow is not None and workflow.kind is not WorkflowKind.TASK:
        # A summary workflow holds the slot; a new task cannot start.
        return [BUSY_TEMPLATE.format(kind=workflow.kind.value)], state

    found = _backend_extract(backend, "Extract task fields as JSON {\"fields\": {...}}", message.content)

    if workflow is None:
        if classification.action is not ActionType.CREATE_TASK:
            raise NoActiveWorkflow("continue requested but no task workflow is active")
        draft = TaskDraft()
        _absorb(draft, found)
        data = draft.to_data()
        data["phase"] = "gathering"
        state = start_workflow(
            state, WorkflowKind.TASK, data, started_by=message.user, started_at=message.timestamp
        )
        _trace_workflow_op(trace, "task_creator", "start_workflow", {"kind": "task_workflow"})
        workflow = state.workflow
        draft = TaskDraft.from_data(workflow.data)
        if classification.is_cross_talk:
            return [], state
        if draft.is_complete():
            _set_phase(state, "confirming", trace)
            return [_confirm_prompt(draft)], state
        return [_ask_missing(draft)], state

    draft = TaskDraft.from_data(workflow.data)
    phase = workflow.data.get("phase", "gathering")

    if classification.is_cross_talk:
        if _absorb(draft, found):
            _store_draft(state, draft, trace)
        return [], state

    if phase == "gathering" or classification.action is ActionType.CREATE_TASK:
        _absorb(draft, found)
        _store_draft(state, draft, trace)
        if draft.is_complete():
            _set_phase(state, "confirming", trace)
            return [_confirm_prompt(draft)], state
        return [_ask_missing(draft)], state

    # Confirming
    disposition = _adjudicate(backend, message, rules)
    if disposition == "affirmative":
        return _create_task_from_draft(state, draft, tools, trace)
    if disposition == "abandon":
        state = end_workflow(state, {"status": "abandoned"})
        _trace_workflow_op(trace, "task_creator", "end_workflow", {"status": "abandoned"})
        return ["Okay, dropping the task draft."], state
    if _absorb(draft, found):
        _store_draft(state, draft, trace)
    return [_confirm_prompt(draft)], state


def _adjudicate(backend, message: Message, rules: RuleConfig) -> str:
    if backend is not None:
        try:
            raw = backend_call(
                backend,
                "Classify the reply as affirmative, abandon or other. Return JSON {\"disposition\": ...}",
                message.content,
            )
            payload = json.loads(raw)
            value = payload.get("disposition") if isinstance(payload, dict) else None
            if value in ("affirmative", "abandon", "other"):
                return value
        except Exception:
            pass
    return detect_disposition(message.content, rules)


def _store_draft(state: ProjectState, draft: TaskDraft, trace: Optional[Trace]) -> None:
    delta = draft.to_data()
    update_workflow_data(state, delta)
    _trace_workflow_op(trace, "task_creator", "update_workflow_data", delta)


def _set_phase(state: ProjectState, phase: str, trace: Optional[Trace]) -> None:
    update_workflow_data(state, {"phase": phase})
    _trace_workflow_op(trace, "task_creator", "update_workflow_data", {"phase": phase})


def _create_task_from_draft(
    state: ProjectState,
    draft: TaskDraft,
    tools: Optional[ToolInvoker],
    trace: Optional[Trace],
) -> tuple[list[str], ProjectState]:
    labels = list(draft.labels)
    if draft.priority:
        labels.append(f"priority:{draft.priority}")
    args = {
        "name": draft.title,
        "description": draft.description,
        "list_name": "Backlog",
        "labels": labels,
        "assignee": draft.assignee,
    }
    if tools is None:
        failure: Exception = PMBackendFailure("no project-management backend configured")
        task = None
    else:
        try:
            task, state = tools.invoke("task_creator", "create_task", args, state, trace=trace)
            failure = None
        except (PMBackendFailure, ToolError) as exc:
            task, failure = None, exc
    if task is None:
        return [
            f"Could not create the task ({failure}); say 'yes' to retry or 'cancel' to drop it."
        ], state
    state = end_workflow(
        state, {"status": "created", "task_id": task.id, "url": task.url, "phase": "done"}
    )
    _trace_workflow_op(trace, "task_creator", "end_workflow", {"status": "created", "task_id": task.id})
    return [f"Created task '{task.name}' ({task.url})."], state


# --- progress summaries ------------------------------------------------------

_BLOCKER_WORDS = ("blocked", "blocker", "stuck", "waiting on")
_PLAN_WORDS = ("tomorrow", "next up", "planning to", "plan to", "will start")
_SECTION_RE = re.compile(r"\b(accomplished|planned|blockers)\s*:\s*(.+)", re.IGNORECASE | re.DOTALL)

SECTION_LIMIT = 5


def synthesize_member_summary(
    state: ProjectState, member: TeamMember, date: date_type
) -> Summary:
    """Rule-backed draft: bucket the member's messages into the three
    standup sections, five bullets each at most."""
    accomplished: list[str] = []
    planned: list[str] = []
    blockers: list[str] = []
    for message in state.history:
        if message.user != member.handle or message.user == AGENT_HANDLE:
            continue
        lowered = message.content.casefold()
        if any(word in lowered for word in _BLOCKER_WORDS):
            blockers.append(message.content)
        elif any(word in lowered for word in _PLAN_WORDS):
            planned.append(message.content)
        elif state.find_task(message.content) is not None:
            accomplished.append(message.content)
    return Summary(
        team_member=member.handle,
        date=date,
        accomplished=accomplished[:SECTION_LIMIT],
        planned=planned[:SECTION_LIMIT],
        blockers=blockers[:SECTION_LIMIT],
    )


def _present_summary(summary: Summary) -> str:
    def block(title: str, items: list[str]) -> str:
        body = "\n".join(f"- {item}" for item in items) if items else "- (none)"
        return f"{title}:\n{body}"

    return (
        f"Summary for @{summary.team_member} ({summary.to_dict()['date']})\n"
        f"{block('accomplished', summary.accomplished)}\n"
        f"{block('planned', summary.planned)}\n"
        f"{block('blockers', summary.blockers)}\n"
        "Anything missing?"
    )


def _load_draftset(workflow: WorkflowState) -> tuple[list[str], int, dict[str, Summary]]:
    order = json.loads(workflow.data.get("order", "[]"))
    cursor = int(workflow.data.get("cursor", "0"))
    drafts = {
        handle: Summary.from_dict(json.loads(workflow.data[f"draft:{handle}"]))
        for handle in order
    }
    return order, cursor, drafts


def _store_draft_summary(state: ProjectState, summary: Summary, trace: Optional[Trace]) -> None:
    delta = {f"draft:{summary.team_member}": canonical_json(summary.to_dict())}
    update_workflow_data(state, delta)
    _trace_workflow_op(trace, "summary_generator", "update_workflow_data", delta)


def summary_step(
    state: ProjectState,
    message: Message,
    classification: Classification,
    backend=None,
    *,
    tools: Optional[ToolInvoker] = None,
    trace: Optional[Trace] = None,
    rules: RuleConfig = DEFAULT_RULES,
) -> tuple[list[str], ProjectState]:
    """One step of the summary workflow: synthesize drafts for the whole
    roster, then walk member by member collecting confirmations."""
    workflow = state.active_workflow()

    if workflow is not None and workflow.kind is not WorkflowKind.SUMMARY:
        return [BUSY_TEMPLATE.format(kind=workflow.kind.value)], state

    if workflow is None:
        if classification.action is not ActionType.GENERATE_SUMMARY:
            raise NoActiveWorkflow("continue requested but no summary workflow is active")
        return _begin_summary(state, message, trace)

    if classification.is_cross_talk:
        return [], state

    if classification.action is ActionType.GENERATE_SUMMARY:
        order, cursor, drafts = _load_draftset(workflow)
        return [_present_summary(drafts[order[cursor]])], state

    order, cursor, drafts = _load_draftset(workflow)
    current = drafts[order[cursor]]
    disposition = _adjudicate(backend, message, rules)

    if disposition == "affirmative":
        current.confirmed = True
        _store_draft_summary(state, current, trace)
        cursor += 1
        if cursor >= len(order):
            result = {
                "status": "completed",
                "summaries": canonical_json([drafts[h].to_dict() for h in order]),
            }
            state = end_workflow(state, result)
            _trace_workflow_op(trace, "summary_generator", "end_workflow", {"status": "completed"})
            return ["All summaries confirmed."], state
        update_workflow_data(state, {"cursor": str(cursor)})
        _trace_workflow_op(trace, "summary_generator", "update_workflow_data", {"cursor": str(cursor)})
        return [_present_summary(drafts[order[cursor]])], state

    section_match = _SECTION_RE.search(message.content)
    if section_match:
        section = section_match.group(1).lower()
        addition = section_match.group(2).strip().strip(".,;")
        items = getattr(current, section)
        items.append(addition)
        del items[:-SECTION_LIMIT]
        _store_draft_summary(state, current, trace)
    return [_present_summary(current)], state


def _begin_summary(
    state: ProjectState, message: Message, trace: Optional[Trace]
) -> tuple[list[str], ProjectState]:
    activity = [
        m for m in state.history if m.user != AGENT_HANDLE and m.seq < message.seq
    ]
    state = start_workflow(
        state,
        WorkflowKind.SUMMARY,
        {"phase": "confirming", "cursor": "0"},
        started_by=message.user,
        started_at=message.timestamp,
    )
    _trace_workflow_op(trace, "summary_generator", "start_workflow", {"kind": "summary_workflow"})
    if not activity or not state.team:
        state = end_workflow(state, {"status": "no_activity"})
        _trace_workflow_op(trace, "summary_generator", "end_workflow", {"status": "no_activity"})
        return ["No recent activity found to summarize."], state
    order = [member.handle for member in state.team]
    day = message.timestamp.date()
    delta: dict[str, str] = {"order": canonical_json(order), "date": day.isoformat()}
    for member in state.team:
        summary = synthesize_member_summary(state, member, day)
        delta[f"draft:{member.handle}"] = canonical_json(summary.to_dict())
    update_workflow_data(state, delta)
    _trace_workflow_op(trace, "summary_generator", "update_workflow_data", {"drafts": len(order)})
    first = Summary.from_dict(json.loads(state.workflow.data[f"draft:{order[0]}"]))
    return [_present_summary(first)], state


# --- silent context capture --------------------------------------------------

def topic_hash(content: str) -> str:
    """Stable 8-hex digest of whitespace-normalized, casefolded content."""
    normalized = " ".join(content.casefold().split())
    return hashlib.sha1(normalized.encode("utf-8")).hexdigest()[:8]


def context_key(state: ProjectState, message: Message) -> str:
    task = state.find_task(message.content)
    topic = task.id if task is not None else topic_hash(message.content)
    return f"ctx:{topic}:{message.seq}"


def record_context_update(
    state: ProjectState, message: Message, *, trace: Optional[Trace] = None
) -> ProjectState:
    """Silently file the message content under a task- or topic-scoped
    memory key. No outward response; backlog untouched."""
    key = context_key(state, message)
    state.memory[key] = message.content
    if trace is not None:
        trace.add(
            "tool", agent="root", tool="memorize_string",
            args={"key": key}, outcome="ok", mutating=True,
        )
    return state
