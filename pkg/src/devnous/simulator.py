"""Synthetic dialogue generation: a teammate-simulator converses with the
engine turn by turn, producing path-dependent benchmark dialogues.

Each generated message is validated against the roster (the generator may
never speak as the agent) and the full prompt/response exchange is kept in
an audit log so path dependence is checkable after the fact.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .classifier import CompletionBackend, extract_json_payload
from .errors import ImpersonationError, MalformedMessage, SchemaViolation
from .model import (
    AGENT_HANDLE,
    Dialogue,
    Task,
    TeamMember,
    canonical_json,
    parse_wire_time,
)
from .orchestrator import EngineConfig
from .prompts import render_sga_prompt

logger = logging.getLogger(__name__)

EMPTY_CONTEXT = "(no messages yet)"


@dataclass
class SimulationConfig:
    """Defaults reproduce the benchmark shape: 8 dialogues of 20 turns."""

    backend: CompletionBackend
    n_dialogues: int = 8
    turns_per_dialogue: int = 20
    roster: Any = None
    backlog: Any = None
    prompts_dir: Optional[Path] = None
    dialogue_prefix: str = "sga"
    max_consecutive_failures: int = 3


class ScriptedSGA:
    """Fixture-replay generator: emits prewritten wire messages in order,
    cycling when the script is shorter than the run. Lets the whole
    pipeline run hermetically."""

    concurrent = False

    def __init__(self, messages: Sequence[Mapping], cycle: bool = True):
        self.messages = list(messages)
        self.cycle = cycle
        self.cursor = 0

    def complete(self, prompt: str, context: str) -> str:
        if self.cursor >= len(self.messages):
            if not self.cycle:
                raise RuntimeError("script exhausted")
            self.cursor = 0
        message = self.messages[self.cursor]
        self.cursor += 1
        return canonical_json(dict(message))


def _validate_generated(payload: Any, handles: set[str]) -> dict:
    if not isinstance(payload, dict):
        raise SchemaViolation("payload", f"expected object, got {type(payload).__name__}")
    for required in ("user", "message", "time"):
        if not isinstance(payload.get(required), str) or not payload[required].strip():
            raise SchemaViolation(required, "required field missing or empty")
    user = payload["user"].strip()
    if user == AGENT_HANDLE:
        raise ImpersonationError("generator spoke as the agent")
    if user not in handles:
        raise SchemaViolation("user", f"{user!r} is not a roster handle")
    try:
        parse_wire_time(payload["time"])
    except MalformedMessage as exc:
        raise SchemaViolation("time", str(exc)) from exc
    return {"user": user, "message": payload["message"], "time": payload["time"]}


def generate_turn(
    context: str,
    config: SimulationConfig,
    *,
    team: Sequence[TeamMember],
    backlog_info: str,
    audit: Optional[list] = None,
) -> dict:
    """Produce one validated `{user, message, time}` wire message.

    A reply speaking as the agent (or failing the schema) gets one
    re-prompt with the problem quoted; a second failure raises.
    """
    handles = {member.handle for member in team}
    team_info = "\n".join(canonical_json(member.to_dict()) for member in team)
    prompt = render_sga_prompt(team_info, backlog_info, prompts_dir=config.prompts_dir)
    problem: Optional[Exception] = None
    for attempt in range(2):
        effective_prompt = prompt
        if problem is not None:
            effective_prompt = (
                f"{prompt}\n\nYour previous message was rejected ({problem}). "
                "Generate ONE valid team-member message now."
            )
        raw = config.backend.complete(effective_prompt, context)
        if audit is not None:
            audit.append({"prompt": effective_prompt, "context": context, "response": raw})
        try:
            payload = extract_json_payload(raw)
            return _validate_generated(payload, handles)
        except (ImpersonationError, SchemaViolation) as exc:
            problem = exc
            logger.warning("generated message rejected (attempt %d): %s", attempt + 1, exc)
    raise problem


def _transcript_line(user: str, time: str, text: str) -> str:
    return f"{user} [{time}]: {text}"


def run_simulation(
    config: SimulationConfig,
    engine_config: EngineConfig,
    *,
    audit: Optional[list] = None,
) -> list[Dialogue]:
    """Alternate generator and engine for every dialogue: the generated
    message is processed live, then both the message and the engine's
    responses join the context for the next generation.

    A dialogue is abandoned (kept as generated so far) after
    `max_consecutive_failures` failed generations; the batch continues.
    """
    team = engine_config.resolve_team() if config.roster is None else _resolve_team(config.roster)
    backlog = (
        engine_config.resolve_backlog() if config.backlog is None else _resolve_backlog(config.backlog)
    )
    backlog_info = "\n".join(canonical_json(task.to_dict()) for task in backlog)

    dialogues: list[Dialogue] = []
    for index in range(config.n_dialogues):
        dialogue_id = f"{config.dialogue_prefix}-{index + 1}"
        engine = engine_config.build(team=team, backlog=backlog)
        context = EMPTY_CONTEXT
        failures = 0
        turns_done = 0
        while turns_done < config.turns_per_dialogue:
            turn_audit: list = [] if audit is not None else None
            try:
                wire = generate_turn(
                    context, config, team=team, backlog_info=backlog_info, audit=turn_audit
                )
                outcome = engine.process(wire)
            except Exception as exc:
                failures += 1
                logger.error(
                    "%s turn %d generation failed (%d consecutive): %s",
                    dialogue_id, turns_done, failures, exc,
                )
                if failures >= config.max_consecutive_failures:
                    logger.error("%s aborted after %d consecutive failures", dialogue_id, failures)
                    break
                continue
            finally:
                if audit is not None and turn_audit:
                    for entry in turn_audit:
                        entry.update({"dialogue": dialogue_id, "turn": turns_done})
                        audit.append(entry)
            failures = 0
            lines = [] if context == EMPTY_CONTEXT else [context]
            lines.append(_transcript_line(wire["user"], wire["time"], wire["message"]))
            for response in outcome.responses:
                lines.append(_transcript_line(AGENT_HANDLE, wire["time"], response))
            context = "\n".join(lines)
            turns_done += 1
        dialogues.append(
            Dialogue(
                id=dialogue_id,
                team=list(team),
                initial_backlog=[Task.from_dict(t.to_dict()) for t in backlog],
                turns=list(engine.turn_records),
            )
        )
    return dialogues


def _resolve_team(roster: Any) -> list[TeamMember]:
    from .toolbox import load_roster

    if isinstance(roster, list) and all(isinstance(m, TeamMember) for m in roster):
        return list(roster)
    return load_roster(roster)


def _resolve_backlog(backlog: Any) -> list[Task]:
    from .toolbox import load_backlog_file

    if isinstance(backlog, list) and all(isinstance(t, Task) for t in backlog):
        return [Task.from_dict(t.to_dict()) for t in backlog]
    return load_backlog_file(backlog)


def write_audit_log(audit: Iterable[Mapping], path) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as fh:
        for entry in audit:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
