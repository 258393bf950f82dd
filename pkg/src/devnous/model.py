"""Core domain types: messages, intents, tasks, summaries, and project state.

Everything downstream (classification, workflows, evaluation) is expressed
in terms of these types. Canonical JSON field names and orders are fixed
here so serialize/parse round-trips are bit-exact.
"""

from __future__ import annotations

import copy
import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import date as date_type
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping, Optional

from .errors import MalformedMessage, SchemaViolation

WIRE_TIME_FORMAT = "%d-%m-%Y %H:%M:%S"
WIRE_DATE_FORMAT = "%Y-%m-%d"

AGENT_HANDLE = "devnous"


def canonical_json(payload: Any) -> str:
    """Compact JSON with insertion key order preserved (the canonical form)."""
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def parse_wire_time(raw: str) -> datetime:
    """Parse a `DD-MM-YYYY HH:MM:SS` timestamp into an aware UTC instant."""
    try:
        return datetime.strptime(raw, WIRE_TIME_FORMAT).replace(tzinfo=timezone.utc)
    except (TypeError, ValueError) as exc:
        raise MalformedMessage(f"unparseable timestamp: {raw!r}") from exc


def format_wire_time(instant: datetime) -> str:
    return instant.strftime(WIRE_TIME_FORMAT)


class MessageCategory(str, Enum):
    NEW_TASK = "NEW_TASK"
    EXISTING_TASK = "EXISTING_TASK"
    WORKFLOW_RESPONSE = "WORKFLOW_RESPONSE"
    REGULAR_CONVERSATION = "REGULAR_CONVERSATION"
    SUMMARY_TRIGGER = "SUMMARY_TRIGGER"

    @classmethod
    def parse(cls, raw: Any) -> "MessageCategory":
        if isinstance(raw, cls):
            return raw
        if not isinstance(raw, str):
            raise SchemaViolation("category", f"expected string, got {type(raw).__name__}")
        try:
            return cls(raw.strip().upper())
        except ValueError:
            raise SchemaViolation("category", f"unknown category {raw!r}") from None


class ActionType(str, Enum):
    CREATE_TASK = "CREATE_TASK"
    CONTINUE_WORKFLOW = "CONTINUE_WORKFLOW"
    UPDATE_CONTEXT = "UPDATE_CONTEXT"
    GENERATE_SUMMARY = "GENERATE_SUMMARY"
    NO_ACTION = "NO_ACTION"

    @classmethod
    def parse(cls, raw: Any) -> "ActionType":
        """Accept both enum names and the lowercase spellings used in prompts."""
        if isinstance(raw, cls):
            return raw
        if not isinstance(raw, str):
            raise SchemaViolation("action", f"expected string, got {type(raw).__name__}")
        try:
            return cls(raw.strip().upper())
        except ValueError:
            raise SchemaViolation("action", f"unknown action {raw!r}") from None


@dataclass(frozen=True)
class IntentTuple:
    """The (category, action) unit of evaluation. Any pairing is permitted."""

    category: MessageCategory
    action: ActionType

    def to_dict(self) -> dict:
        return {"category": self.category.value, "action": self.action.value}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "IntentTuple":
        return cls(MessageCategory.parse(raw.get("category")), ActionType.parse(raw.get("action")))


class IntentMultiset:
    """A counted bag of IntentTuple. Counts for present tuples are >= 1."""

    __slots__ = ("_counts",)

    def __init__(self, items: Iterable[IntentTuple] = ()):
        self._counts: Counter = Counter(items)
        self._prune()

    def _prune(self) -> None:
        for key in [k for k, n in self._counts.items() if n <= 0]:
            del self._counts[key]

    @classmethod
    def from_counts(cls, counts: Mapping[IntentTuple, int]) -> "IntentMultiset":
        ms = cls()
        ms._counts = Counter({k: int(n) for k, n in counts.items() if n > 0})
        return ms

    @classmethod
    def from_dicts(cls, raw: Iterable[Mapping]) -> "IntentMultiset":
        return cls(IntentTuple.from_dict(item) for item in raw)

    def to_dicts(self) -> list[dict]:
        """Deterministic listing: tuples sorted by name, duplicates expanded."""
        out = []
        for t in sorted(self._counts, key=lambda t: (t.category.value, t.action.value)):
            out.extend(t.to_dict() for _ in range(self._counts[t]))
        return out

    def add(self, item: IntentTuple, count: int = 1) -> None:
        if count > 0:
            self._counts[item] += count

    def count(self, item: IntentTuple) -> int:
        return self._counts.get(item, 0)

    def total(self) -> int:
        return sum(self._counts.values())

    def distinct(self) -> set[IntentTuple]:
        return set(self._counts)

    def is_empty(self) -> bool:
        return not self._counts

    def union(self, other: "IntentMultiset") -> "IntentMultiset":
        """Additive union: |a.union(b)| == |a| + |b|."""
        return IntentMultiset.from_counts(self._counts + other._counts)

    def min_intersection(self, other: "IntentMultiset") -> "IntentMultiset":
        common = {t: min(self.count(t), other.count(t)) for t in self.distinct() & other.distinct()}
        return IntentMultiset.from_counts(common)

    def __len__(self) -> int:
        return self.total()

    def __iter__(self) -> Iterator[IntentTuple]:
        return iter(self._counts.elements())

    def __contains__(self, item: IntentTuple) -> bool:
        return item in self._counts

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntentMultiset):
            return NotImplemented
        return self._counts == other._counts

    def __repr__(self) -> str:
        inner = ", ".join(
            f"({t.category.value},{t.action.value})x{n}" for t, n in sorted(
                self._counts.items(), key=lambda kv: (kv[0].category.value, kv[0].action.value)
            )
        )
        return f"IntentMultiset[{inner}]"


@dataclass
class Message:
    """One chat utterance. `seq` is the engine-assigned ingestion index."""

    content: str
    user: str
    timestamp: datetime
    channel: str = "main"
    seq: int = 0

    def wire_time(self) -> str:
        return format_wire_time(self.timestamp)

    def to_wire(self) -> dict:
        return {"user": self.user, "message": self.content, "time": self.wire_time()}

    def render(self) -> str:
        """Single transcript line, the form prompts and context windows use."""
        return f"{self.user} [{self.wire_time()}]: {self.content}"


def parse_wire_message(raw: Mapping, *, channel: str = "main") -> Message:
    """Validate a `{user, message, time}` payload into a Message (seq unset).

    Rejects rather than repairs: empty content or a bad timestamp raises
    MalformedMessage.
    """
    if not isinstance(raw, Mapping):
        raise MalformedMessage(f"expected an object payload, got {type(raw).__name__}")
    content = raw.get("message")
    if not isinstance(content, str) or not content.strip():
        raise MalformedMessage("empty message content")
    user = raw.get("user")
    if not isinstance(user, str) or not user.strip():
        raise MalformedMessage("missing user handle")
    timestamp = parse_wire_time(raw.get("time"))
    return Message(
        content=content,
        user=user.strip(),
        timestamp=timestamp,
        channel=str(raw.get("channel") or channel),
    )


def serialize_wire_message(message: Message) -> str:
    return canonical_json(message.to_wire())


@dataclass
class TeamMember:
    display_name: str
    handle: str
    role: str

    def to_dict(self) -> dict:
        return {"display_name": self.display_name, "handle": self.handle, "role": self.role}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "TeamMember":
        try:
            return cls(str(raw["display_name"]), str(raw["handle"]), str(raw["role"]))
        except KeyError as exc:
            raise SchemaViolation("team_member", f"missing field {exc}") from None


class WorkflowKind(str, Enum):
    TASK = "task_workflow"
    SUMMARY = "summary_workflow"


@dataclass
class WorkflowState:
    """Scratch state of the single in-flight workflow.

    Once is_active goes false the state is terminal; mutating operations
    refuse to touch it.
    """

    kind: WorkflowKind
    is_active: bool
    data: dict[str, str]
    started_by: str
    started_at: datetime

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "is_active": self.is_active,
            "data": dict(self.data),
            "started_by": self.started_by,
            "started_at": self.started_at.isoformat(),
        }


@dataclass
class Task:
    """A backlog entry. Field names and order are the canonical wire schema."""

    id: str
    name: str
    description: Optional[str]
    list_name: str
    labels: list[str] = field(default_factory=list)
    assignee: Optional[str] = None
    url: str = ""

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise SchemaViolation("name", "task name must be nonempty")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "list_name": self.list_name,
            "labels": list(self.labels),
            "assignee": self.assignee,
            "url": self.url,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Task":
        if not isinstance(raw, Mapping):
            raise SchemaViolation("task", f"expected object, got {type(raw).__name__}")
        missing = [k for k in ("id", "name", "list_name") if raw.get(k) in (None, "")]
        if missing:
            raise SchemaViolation(missing[0], "required task field missing")
        labels = raw.get("labels", [])
        if not isinstance(labels, list):
            raise SchemaViolation("labels", "labels must be a list")
        return cls(
            id=str(raw["id"]),
            name=str(raw["name"]),
            description=raw.get("description"),
            list_name=str(raw["list_name"]),
            labels=[str(x) for x in labels],
            assignee=raw.get("assignee"),
            url=str(raw.get("url", "")),
        )


def serialize_task(task: Task) -> str:
    return canonical_json(task.to_dict())


@dataclass
class Summary:
    """A standup-style per-member report."""

    team_member: str
    date: date_type
    accomplished: list[str]
    planned: list[str]
    blockers: list[str] = field(default_factory=list)
    confirmed: bool = False

    def to_dict(self) -> dict:
        return {
            "team_member": self.team_member,
            "date": self.date.strftime(WIRE_DATE_FORMAT),
            "accomplished": list(self.accomplished),
            "planned": list(self.planned),
            "blockers": list(self.blockers),
            "confirmed": self.confirmed,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Summary":
        if not isinstance(raw, Mapping):
            raise SchemaViolation("summary", f"expected object, got {type(raw).__name__}")
        if not raw.get("team_member"):
            raise SchemaViolation("team_member", "required summary field missing")
        try:
            when = datetime.strptime(str(raw.get("date")), WIRE_DATE_FORMAT).date()
        except ValueError:
            raise SchemaViolation("date", f"bad date {raw.get('date')!r}") from None
        def str_list(key: str) -> list[str]:
            value = raw.get(key, [])
            if not isinstance(value, list):
                raise SchemaViolation(key, f"{key} must be a list")
            return [str(x) for x in value]
        return cls(
            team_member=str(raw["team_member"]),
            date=when,
            accomplished=str_list("accomplished"),
            planned=str_list("planned"),
            blockers=str_list("blockers"),
            confirmed=bool(raw.get("confirmed", False)),
        )


def serialize_summary(summary: Summary) -> str:
    return canonical_json(summary.to_dict())


@dataclass
class ProjectState:
    """Everything the agent knows about one channel: backlog, history,
    the active workflow, the roster, and the persistent memory map.

    A ProjectState is a value owned by exactly one channel session; it is
    never shared for concurrent mutation. Use snapshot_state for copies.
    """

    backlog: list[Task] = field(default_factory=list)
    history: list[Message] = field(default_factory=list)
    workflow: Optional[WorkflowState] = None
    team: list[TeamMember] = field(default_factory=list)
    memory: dict[str, str] = field(default_factory=dict)

    def next_seq(self, channel: str) -> int:
        prior = [m.seq for m in self.history if m.channel == channel]
        return (max(prior) + 1) if prior else 1

    def active_workflow(self) -> Optional[WorkflowState]:
        if self.workflow is not None and self.workflow.is_active:
            return self.workflow
        return None

    def handles(self) -> set[str]:
        return {member.handle for member in self.team}

    def find_task(self, text: str) -> Optional[Task]:
        """First backlog task whose id or name is mentioned in `text`."""
        lowered = text.casefold()
        for task in self.backlog:
            if task.id and task.id.casefold() in lowered:
                return task
            if task.name and task.name.casefold() in lowered:
                return task
        return None


def ingest_message(
    state: ProjectState, raw: Mapping, *, channel: str = "main"
) -> tuple[ProjectState, Message]:
    """Parse and store one incoming chat message.

    The returned Message carries the next ingestion seq for its channel;
    history grows by exactly one element and nothing else changes.
    """
    message = parse_wire_message(raw, channel=channel)
    message.seq = state.next_seq(message.channel)
    state.history.append(message)
    return state, message


def snapshot_state(state: ProjectState) -> ProjectState:
    """Deep, independent copy; mutating the copy never affects the original."""
    return copy.deepcopy(state)


@dataclass
class TurnRecord:
    """One benchmark unit: the message, what the agent did, and (when
    annotated) what it should have done."""

    turn_index: int
    message: Message
    predicted: IntentMultiset
    ground_truth: Optional[IntentMultiset] = None
    agent_outputs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        record = {
            "turn": self.turn_index,
            "user": self.message.user,
            "time": self.message.wire_time(),
            "message": self.message.content,
            "ground_truth": None if self.ground_truth is None else self.ground_truth.to_dicts(),
            "agent_outputs": list(self.agent_outputs),
            "predicted": self.predicted.to_dicts(),
        }
        return record


@dataclass
class Dialogue:
    id: str
    team: list[TeamMember]
    initial_backlog: list[Task]
    turns: list[TurnRecord] = field(default_factory=list)

    def header_dict(self) -> dict:
        return {
            "id": self.id,
            "team": [m.to_dict() for m in self.team],
            "initial_backlog": [t.to_dict() for t in self.initial_backlog],
        }

    def ground_truth_multisets(self) -> list[IntentMultiset]:
        return [t.ground_truth if t.ground_truth is not None else IntentMultiset() for t in self.turns]

    def predicted_multisets(self) -> list[IntentMultiset]:
        return [t.predicted for t in self.turns]
