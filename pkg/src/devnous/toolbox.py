"""Tool registry with per-agent least-privilege grants plus reference
backends: an in-memory PM store, an in-memory chat transcript, and the
adapter contracts external services plug into.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Protocol, runtime_checkable

from . import workflows
from .errors import (
    ChatDeliveryError,
    PermissionDenied,
    PMBackendFailure,
    RosterParseError,
    ToolError,
    UnknownTool,
)
from .model import (
    AGENT_HANDLE,
    Message,
    ProjectState,
    Task,
    TeamMember,
    ingest_message,
)
from .trace import Trace


class ToolKind(str, Enum):
    MEMORY = "Memory"
    CHAT = "Chat"
    PM = "PM"
    WORKFLOW = "Workflow"


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    kind: ToolKind
    params: tuple[tuple[str, str], ...]  # (name, semantic type)
    mutating: bool


TOOL_TABLE: tuple[ToolDescriptor, ...] = (
    ToolDescriptor("memorize_string", ToolKind.MEMORY, (("key", "str"), ("value", "str")), True),
    ToolDescriptor("get_conversation_history", ToolKind.MEMORY, (("n", "int"),), False),
    ToolDescriptor("load_team_info", ToolKind.MEMORY, (("source", "path-or-list"),), True),
    ToolDescriptor("process_message", ToolKind.CHAT, (("raw", "wire-message"),), True),
    ToolDescriptor("send_message", ToolKind.CHAT, (("channel", "str"), ("text", "str")), True),
    ToolDescriptor("get_tasks", ToolKind.PM, (), False),
    ToolDescriptor(
        "create_task", ToolKind.PM,
        (("name", "str"), ("description", "str?"), ("list_name", "str"),
         ("labels", "list[str]"), ("assignee", "str?")),
        True,
    ),
    ToolDescriptor("update_task", ToolKind.PM, (("id", "str"), ("delta", "map")), True),
    ToolDescriptor("start_workflow", ToolKind.WORKFLOW, (("kind", "str"), ("initial_data", "map")), True),
    ToolDescriptor("update_workflow_data", ToolKind.WORKFLOW, (("delta", "map"),), True),
    ToolDescriptor("get_workflow_state", ToolKind.WORKFLOW, (), False),
    ToolDescriptor("end_workflow", ToolKind.WORKFLOW, (("result", "map"),), True),
)

TOOL_NAMES = tuple(descriptor.name for descriptor in TOOL_TABLE)

AGENT_IDS = ("root", "classifier", "task_creator", "summary_generator")

_READ_TOOLS = frozenset({"get_conversation_history", "get_tasks", "get_workflow_state"})

# Static least-privilege grants: the classifier and summary generator see
# but never touch; the task creator owns workflow transitions and PM
# writes; the root agent owns chat and memory.
DEFAULT_GRANTS: dict[str, frozenset[str]] = {
    "root": _READ_TOOLS | {"process_message", "send_message", "memorize_string", "load_team_info"},
    "classifier": _READ_TOOLS,
    "task_creator": frozenset(
        {"start_workflow", "update_workflow_data", "get_workflow_state", "end_workflow",
         "create_task", "update_task"}
    ),
    "summary_generator": _READ_TOOLS,
}


@dataclass(frozen=True)
class AgentGrant:
    agent_id: str
    allowed: frozenset[str]


@runtime_checkable
class PMAdapter(Protocol):
    """Contract for project-management backends (the in-memory reference
    store or an external service plugin)."""

    def get_tasks(self) -> list[Task]: ...

    def create_task(self, name: str, description: Optional[str], list_name: str,
                    labels: list[str], assignee: Optional[str]) -> Task: ...

    def update_task(self, task_id: str, delta: Mapping) -> Task: ...


class InMemoryPM:
    """Reference PM store. Assigns unique ids and urls on create."""

    def __init__(self, seed: Optional[list[Task]] = None):
        self._tasks: list[Task] = [Task.from_dict(t.to_dict()) for t in (seed or [])]
        self._counter = len(self._tasks)

    def get_tasks(self) -> list[Task]:
        return [Task.from_dict(t.to_dict()) for t in self._tasks]

    def create_task(self, name, description, list_name, labels, assignee) -> Task:
        self._counter += 1
        task_id = f"T-{self._counter}"
        while any(t.id == task_id for t in self._tasks):
            self._counter += 1
            task_id = f"T-{self._counter}"
        task = Task(
            id=task_id,
            name=name,
            description=description,
            list_name=list_name or "Backlog",
            labels=list(labels or []),
            assignee=assignee,
            url=f"https://tasks.local/{task_id}",
        )
        self._tasks.append(task)
        return Task.from_dict(task.to_dict())

    def update_task(self, task_id: str, delta: Mapping) -> Task:
        for task in self._tasks:
            if task.id == task_id:
                merged = task.to_dict()
                merged.update({k: v for k, v in delta.items() if k != "id"})
                updated = Task.from_dict(merged)
                self._tasks[self._tasks.index(task)] = updated
                return Task.from_dict(updated.to_dict())
        raise PMBackendFailure(f"unknown task id {task_id!r}")


class ChatAdapter(Protocol):
    def deliver(self, channel: str, message: Message) -> None: ...


class InMemoryChat:
    """Reference chat backend: per-channel transcripts of delivered messages."""

    def __init__(self):
        self.transcripts: dict[str, list[Message]] = {}

    def deliver(self, channel: str, message: Message) -> None:
        self.transcripts.setdefault(channel, []).append(message)

    def transcript(self, channel: str) -> list[Message]:
        return list(self.transcripts.get(channel, []))


def load_roster(source: Any) -> list[TeamMember]:
    """Parse a roster from a JSON file path, JSON text, or a parsed list."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        raw_text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, str):
        raw_text = source
    elif isinstance(source, list):
        raw_text = json.dumps(source)
    else:
        raise RosterParseError(f"unsupported roster source {type(source).__name__}")
    try:
        payload = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise RosterParseError(f"roster is not valid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise RosterParseError("roster must be a JSON list of members")
    try:
        members = [TeamMember.from_dict(item) for item in payload]
    except Exception as exc:
        raise RosterParseError(str(exc)) from exc
    handles = [m.handle for m in members]
    if len(set(handles)) != len(handles):
        raise RosterParseError("duplicate handles in roster")
    return members


def load_backlog_file(source: Any) -> list[Task]:
    if isinstance(source, (str, Path)):
        payload = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        payload = source
    return [Task.from_dict(item) for item in payload]


class Toolbox:
    """The registered tool set plus grant enforcement.

    Out-of-grant invocations raise PermissionDenied before any handler
    runs, so they cause zero state change; every invocation (including
    denials) is appended to the per-turn trace.
    """

    def __init__(
        self,
        pm: Optional[PMAdapter] = None,
        chat: Optional[InMemoryChat] = None,
        grants: Optional[Mapping[str, frozenset[str]]] = None,
    ):
        self.pm = pm if pm is not None else InMemoryPM()
        self.chat = chat if chat is not None else InMemoryChat()
        self.grants = dict(grants) if grants is not None else dict(DEFAULT_GRANTS)
        self.registry: dict[str, ToolDescriptor] = {d.name: d for d in TOOL_TABLE}

    def describe(self, tool_name: str) -> ToolDescriptor:
        try:
            return self.registry[tool_name]
        except KeyError:
            raise UnknownTool(tool_name) from None

    def grant_for(self, agent_id: str) -> AgentGrant:
        return AgentGrant(agent_id, self.grants.get(agent_id, frozenset()))

    def is_allowed(self, agent_id: str, tool_name: str) -> bool:
        return tool_name in self.grants.get(agent_id, frozenset())

    def invoke(
        self,
        agent_id: str,
        tool_name: str,
        args: Mapping,
        state: ProjectState,
        trace: Optional[Trace] = None,
    ) -> tuple[Any, ProjectState]:
        descriptor = self.describe(tool_name)
        if not self.is_allowed(agent_id, tool_name):
            if trace is not None:
                trace.add(
                    "tool", agent=agent_id, tool=tool_name, args=dict(args),
                    outcome="denied", mutating=False,
                )
            raise PermissionDenied(f"{agent_id} may not call {tool_name}")
        try:
            result, state = self._dispatch(tool_name, args, state)
        except Exception as exc:
            if trace is not None:
                trace.add(
                    "tool", agent=agent_id, tool=tool_name, args=dict(args),
                    outcome=f"error: {exc}", mutating=False,
                )
            raise
        if trace is not None:
            trace.add(
                "tool", agent=agent_id, tool=tool_name, args=dict(args),
                outcome="ok", mutating=descriptor.mutating,
            )
        return result, state

    def _dispatch(self, tool_name: str, args: Mapping, state: ProjectState):
        if tool_name == "memorize_string":
            return None, memorize_string(str(args["key"]), str(args["value"]), state)
        if tool_name == "get_conversation_history":
            return get_conversation_history(state, int(args.get("n", 50))), state
        if tool_name == "load_team_info":
            return None, load_team_info(args["source"], state)
        if tool_name == "process_message":
            state, message = ingest_message(
                state, args["raw"], channel=str(args.get("channel", "main"))
            )
            return message, state
        if tool_name == "send_message":
            return None, self._send_message(str(args["channel"]), str(args["text"]), state,
                                            time=args.get("time"))
        if tool_name == "get_tasks":
            try:
                return self.pm.get_tasks(), state
            except Exception as exc:
                raise ToolError(f"get_tasks failed: {exc}") from exc
        if tool_name == "create_task":
            if not args.get("name"):
                raise ValueError("task name must be nonempty")
            try:
                task = self.pm.create_task(
                    args["name"], args.get("description"), args.get("list_name", "Backlog"),
                    list(args.get("labels", [])), args.get("assignee"),
                )
            except PMBackendFailure:
                raise
            except Exception as exc:
                raise ToolError(f"create_task failed: {exc}") from exc
            state.backlog.append(task)
            return task, state
        if tool_name == "update_task":
            task = self.pm.update_task(str(args["id"]), args.get("delta", {}))
            state.backlog = [task if t.id == task.id else t for t in state.backlog]
            return task, state
        if tool_name == "start_workflow":
            state = workflows.start_workflow(
                state, args["kind"], args.get("initial_data", {}),
                started_by=str(args.get("started_by", "")),
            )
            return state.workflow, state
        if tool_name == "update_workflow_data":
            state = workflows.update_workflow_data(state, args.get("delta", {}))
            return state.workflow, state
        if tool_name == "get_workflow_state":
            return workflows.get_workflow_state(state), state
        if tool_name == "end_workflow":
            state = workflows.end_workflow(state, args.get("result", {}))
            return state.workflow, state
        raise UnknownTool(tool_name)

    def _send_message(self, channel: str, text: str, state: ProjectState,
                      time=None) -> ProjectState:
        if not text or not text.strip():
            raise ValueError("message text must be nonempty")
        from datetime import datetime, timezone

        timestamp = time if time is not None else datetime.now(timezone.utc)
        outbound = Message(
            content=text, user=AGENT_HANDLE, timestamp=timestamp, channel=channel,
            seq=state.next_seq(channel),
        )
        try:
            self.chat.deliver(channel, outbound)
        except ChatDeliveryError:
            raise
        except Exception as exc:
            raise ChatDeliveryError(str(exc)) from exc
        # Delivery succeeded; the agent's own message becomes part of the
        # conversational memory it maintains.
        state.history.append(outbound)
        return state


def memorize_string(key: str, value: str, state: ProjectState) -> ProjectState:
    """Store a key-value pair in session memory, overwriting same-key entries."""
    if not key:
        raise ValueError("memory key must be nonempty")
    state.memory[key] = value
    return state


def get_conversation_history(state: ProjectState, n: int) -> list[Message]:
    """Last min(n, |history|) messages in order, newest last."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return []
    return list(state.history[-n:])


def load_team_info(source: Any, state: ProjectState) -> ProjectState:
    """Replace the roster from a roster file (JSON list of members)."""
    state.team = load_roster(source)
    return state
