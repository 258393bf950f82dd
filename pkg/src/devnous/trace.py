"""Per-turn structured event log.

Every classification, routing decision, tool invocation and outward
response during a turn lands here in causal order. The JSON-lines record
built from a trace is the log format the evaluation harness parses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator


def jsonable(value: Any) -> Any:
    """Coerce a value into something json.dumps accepts, stringifying leaves
    it does not know."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return str(value)


@dataclass
class TraceEvent:
    kind: str  # classify | route | tool | respond | error
    data: dict[str, Any]


@dataclass
class Trace:
    events: list[TraceEvent] = field(default_factory=list)

    def add(self, kind: str, **data: Any) -> TraceEvent:
        event = TraceEvent(kind, jsonable(data))
        self.events.append(event)
        return event

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def tool_calls(self) -> list[dict]:
        return [e.data for e in self.events if e.kind == "tool"]

    def mutating_tool_calls(self) -> list[dict]:
        return [
            e.data
            for e in self.events
            if e.kind == "tool" and e.data.get("mutating") and e.data.get("outcome") == "ok"
        ]

    def to_record(self, turn: int, responses: list[str]) -> dict:
        """The per-turn JSONL record: {turn, classifications[], routes[],
        tool_calls[], responses[]}."""
        return {
            "turn": turn,
            "classifications": [e.data["classification"] for e in self.of_kind("classify")],
            "routes": [e.data["route"] for e in self.of_kind("route")],
            "tool_calls": self.tool_calls(),
            "responses": list(responses),
        }
