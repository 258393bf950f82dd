"""Root policy: classify each incoming message, route by action and
workflow state, dispatch sub-policies, or stay silent.

The Engine bundles one channel's state with the configured backends and
exposes the turn loop used by the live run, the replay protocols, and the
HTTP service.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional

from .classifier import (
    Classification,
    CompletionBackend,
    DEFAULT_RULES,
    HttpCompletionBackend,
    RuleConfig,
    backend_call,
    classify,
    rule_classify,
)
from .errors import ChatDeliveryError, ClassifierFailure, ToolError
from .model import (
    ActionType,
    IntentMultiset,
    Message,
    MessageCategory,
    ProjectState,
    Task,
    TeamMember,
    TurnRecord,
    WorkflowKind,
    WorkflowState,
)
from .toolbox import InMemoryChat, InMemoryPM, Toolbox, load_backlog_file, load_roster
from .trace import Trace
from .workflows import record_context_update, summary_step, task_step

logger = logging.getLogger(__name__)

FALLBACK_TEMPLATE = "I could not match this to an active workflow."


class Route(Enum):
    SILENT = "Silent"
    TASK_WORKFLOW = "TaskWorkflow"
    SUMMARY_WORKFLOW = "SummaryWorkflow"
    FALLBACK = "Fallback"


def route_action(action: ActionType, workflow: Optional[WorkflowState]) -> Route:
    """Total routing function over (action, optional workflow state)."""
    if action in (ActionType.NO_ACTION, ActionType.UPDATE_CONTEXT):
        return Route.SILENT
    if action is ActionType.CREATE_TASK:
        return Route.TASK_WORKFLOW
    if action is ActionType.GENERATE_SUMMARY:
        return Route.SUMMARY_WORKFLOW
    if action is ActionType.CONTINUE_WORKFLOW and workflow is not None and workflow.is_active:
        if workflow.kind is WorkflowKind.TASK:
            return Route.TASK_WORKFLOW
        return Route.SUMMARY_WORKFLOW
    return Route.FALLBACK


@dataclass
class TurnOutcome:
    """Everything one turn produced: outward responses (possibly none),
    the state after all sub-policy effects, the multiset of classifications
    acted on, and the causal event trace."""

    responses: list[str]
    state_after: ProjectState
    emitted: IntentMultiset
    trace: Trace


def generate_response(
    state: ProjectState, message: Message, backend: Optional[CompletionBackend] = None
) -> str:
    """Fallback response. Never raises: with no backend (or a failing one)
    the deterministic template is returned."""
    if backend is not None:
        try:
            text = backend_call(
                backend,
                "You are DevNous. Reply briefly to the message you could not route.",
                message.render(),
            )
            if isinstance(text, str) and text.strip():
                return text.strip()
        except Exception as exc:
            logger.warning("fallback backend failed: %s", exc)
    return FALLBACK_TEMPLATE


@dataclass
class EngineConfig:
    """Recipe for building engines: which backend, whose roster, what
    seed backlog, where the prompt pack lives."""

    backend: Any = "rule"  # "rule" | "http" | a CompletionBackend instance
    roster: Any = None  # path, JSON text, or list[TeamMember]
    backlog: Any = None  # path or list[Task]
    prompts_dir: Optional[Path] = None
    history_window: int = 50
    rules: RuleConfig = DEFAULT_RULES
    channel: str = "main"

    def resolve_backend(self) -> Optional[CompletionBackend]:
        if self.backend in (None, "rule"):
            return None
        if self.backend == "http":
            return HttpCompletionBackend()
        return self.backend

    def resolve_team(self) -> list[TeamMember]:
        if self.roster is None:
            return default_team()
        if isinstance(self.roster, list) and all(isinstance(m, TeamMember) for m in self.roster):
            return list(self.roster)
        return load_roster(self.roster)

    def resolve_backlog(self) -> list[Task]:
        if self.backlog is None:
            return default_backlog()
        if isinstance(self.backlog, list) and all(isinstance(t, Task) for t in self.backlog):
            return [Task.from_dict(t.to_dict()) for t in self.backlog]
        return load_backlog_file(self.backlog)

    def build(
        self,
        *,
        team: Optional[list[TeamMember]] = None,
        backlog: Optional[list[Task]] = None,
        channel: Optional[str] = None,
    ) -> "Engine":
        return Engine(
            team=team if team is not None else self.resolve_team(),
            backlog_seed=backlog if backlog is not None else self.resolve_backlog(),
            backend=self.resolve_backend(),
            rules=self.rules,
            prompts_dir=self.prompts_dir,
            history_window=self.history_window,
            channel=channel or self.channel,
        )


def default_team() -> list[TeamMember]:
    from importlib import resources
    import json

    raw = resources.files("devnous.data").joinpath("roster.json").read_text(encoding="utf-8")
    return [TeamMember.from_dict(item) for item in json.loads(raw)]


def default_backlog() -> list[Task]:
    from importlib import resources
    import json

    raw = resources.files("devnous.data").joinpath("backlog.json").read_text(encoding="utf-8")
    return [Task.from_dict(item) for item in json.loads(raw)]


class Engine:
    """One channel's policy loop. Owns the ProjectState for that channel;
    callers serialize turns (one in-flight execute per channel)."""

    def __init__(
        self,
        *,
        team: list[TeamMember],
        backlog_seed: Optional[list[Task]] = None,
        backend: Optional[CompletionBackend] = None,
        rules: RuleConfig = DEFAULT_RULES,
        prompts_dir: Optional[Path] = None,
        history_window: int = 50,
        channel: str = "main",
        toolbox: Optional[Toolbox] = None,
    ):
        self.channel = channel
        self.backend = backend
        self.rules = rules
        self.prompts_dir = prompts_dir
        self.history_window = history_window
        self.toolbox = toolbox if toolbox is not None else Toolbox(
            pm=InMemoryPM(seed=backlog_seed or []), chat=InMemoryChat()
        )
        self.state = ProjectState(backlog=self.toolbox.pm.get_tasks(), team=list(team))
        self.turn_records: list[TurnRecord] = []
        self.trace_records: list[dict] = []
        self.listeners: list[Callable[[dict], None]] = []

    # -- classification -----------------------------------------------------

    def classify_message(self, state: ProjectState, message: Message) -> list[Classification]:
        if self.backend is None:
            return rule_classify(state, message, self.rules)
        return classify(
            state, message, self.backend,
            history_window=self.history_window, prompts_dir=self.prompts_dir,
        )

    # -- the policy ----------------------------------------------------------

    def execute_policy(
        self, state: ProjectState, message: Message, trace: Optional[Trace] = None
    ) -> TurnOutcome:
        """Classify, then fold the routing ladder over the ordered
        classifications, threading state through each sub-policy."""
        trace = trace if trace is not None else Trace()
        if not state.history or state.history[-1] is not message:
            if message.seq == 0:
                message.seq = state.next_seq(message.channel)
            state.history.append(message)

        try:
            classifications = self.classify_message(state, message)
        except ClassifierFailure as exc:
            logger.error("classifier failed, staying silent: %s", exc)
            trace.add("error", stage="classify", reason=str(exc))
            fallback = Classification(
                MessageCategory.REGULAR_CONVERSATION, 0.0,
                f"classifier failure: {exc}", ActionType.NO_ACTION,
            )
            trace.add("classify", classification=fallback.to_dict(), degraded=True)
            emitted = IntentMultiset([fallback.intent()])
            return TurnOutcome([], state, emitted, trace)

        responses: list[str] = []
        emitted = IntentMultiset()
        for item in classifications:
            trace.add("classify", classification=item.to_dict())
            route = route_action(item.action, state.workflow)
            trace.add("route", route=route.value, action=item.action.value)
            emitted.add(item.intent())
            if route is Route.SILENT:
                if item.action is ActionType.UPDATE_CONTEXT:
                    state = record_context_update(state, message, trace=trace)
                continue
            if route is Route.TASK_WORKFLOW:
                step_responses, state = task_step(
                    state, message, item, self.backend,
                    tools=self.toolbox, trace=trace, rules=self.rules,
                )
            elif route is Route.SUMMARY_WORKFLOW:
                step_responses, state = summary_step(
                    state, message, item, self.backend,
                    tools=self.toolbox, trace=trace, rules=self.rules,
                )
            else:
                step_responses = [generate_response(state, message, self.backend)]
            for text in step_responses:
                trace.add("respond", text=text)
            responses.extend(step_responses)

        return TurnOutcome(responses, state, emitted, trace)

    # -- the turn loop ---------------------------------------------------------

    def process(self, raw: Mapping) -> TurnOutcome:
        """Ingest one wire message, run the policy, deliver responses, log
        the turn. Raises MalformedMessage on a bad payload."""
        trace = Trace()
        state = self.state
        try:
            tasks, state = self.toolbox.invoke("root", "get_tasks", {}, state, trace=trace)
            state.backlog = tasks
        except ToolError as exc:
            # PM outage: keep the cached backlog rather than dropping the turn.
            logger.warning("backlog refresh failed, using cache: %s", exc)
        message, state = self.toolbox.invoke(
            "root", "process_message", {"raw": raw, "channel": self.channel}, state, trace=trace
        )
        outcome = self.execute_policy(state, message, trace=trace)
        state = outcome.state_after
        for text in outcome.responses:
            try:
                _, state = self.toolbox.invoke(
                    "root", "send_message",
                    {"channel": self.channel, "text": text, "time": message.timestamp},
                    state, trace=trace,
                )
            except ChatDeliveryError as exc:
                logger.warning("chat delivery failed: %s", exc)
        self.state = state

        turn = len(self.turn_records)
        record = trace.to_record(turn, outcome.responses)
        self.trace_records.append(record)
        self.turn_records.append(
            TurnRecord(
                turn_index=turn,
                message=message,
                predicted=outcome.emitted,
                ground_truth=None,
                agent_outputs=list(outcome.responses),
            )
        )
        for listener in list(self.listeners):
            try:
                listener(record)
            except Exception:
                logger.exception("turn listener failed")
        return outcome

    def seed_transcript(self, entries: Iterable[tuple[str, Mapping]]) -> None:
        """Preload history from (kind, payload) pairs without running the
        policy: kind 'human' ingests a wire message, kind 'agent' appends
        an agent message. Used by the stateless replay protocol."""
        from .model import ingest_message

        for kind, payload in entries:
            if kind == "human":
                self.state, _ = ingest_message(self.state, payload, channel=self.channel)
            else:
                agent_wire = {
                    "user": payload.get("user", "devnous"),
                    "message": payload["message"],
                    "time": payload["time"],
                }
                self.state, _ = ingest_message(self.state, agent_wire, channel=self.channel)
