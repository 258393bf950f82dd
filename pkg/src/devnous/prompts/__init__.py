"""Prompt pack loading and slot rendering.

Each agent prompt ships as a text file with `{placeholder}` slots. Literal
braces inside prompt bodies are escaped `{{ }}` so `str.format` renders
them; slot names stay single-braced.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Optional

from ..model import Message, ProjectState, canonical_json, format_wire_time

PROMPT_NAMES = ("root", "classifier", "task_creator", "summary_generator", "sga")


def load_prompt(name: str, prompts_dir: Optional[Path] = None) -> str:
    """Read one prompt by name, from `prompts_dir` or the packaged defaults."""
    if name not in PROMPT_NAMES:
        raise KeyError(f"unknown prompt {name!r}; expected one of {PROMPT_NAMES}")
    if prompts_dir is not None:
        return (Path(prompts_dir) / f"{name}.txt").read_text(encoding="utf-8")
    return resources.files("devnous.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def render_team_info(state: ProjectState) -> str:
    return "\n".join(canonical_json(member.to_dict()) for member in state.team) or "(no team loaded)"


def render_backlog(state: ProjectState) -> str:
    return "\n".join(canonical_json(task.to_dict()) for task in state.backlog) or "(backlog empty)"


def render_workflow(state: ProjectState) -> str:
    if state.workflow is None:
        return "No active workflow."
    return canonical_json(state.workflow.to_dict())


def render_history(state: ProjectState, window: int) -> str:
    if window <= 0:
        return ""
    recent = state.history[-window:]
    return "\n".join(message.render() for message in recent)


def context_slots(state: ProjectState, message: Message, *, history_window: int = 50) -> dict:
    """The slot values shared by the root/classifier/workflow prompts."""
    return {
        "team_info": render_team_info(state),
        "_time": format_wire_time(message.timestamp),
        "trello_tasks": render_backlog(state),
        "workflow_state": render_workflow(state),
        "conversation_history": render_history(state, history_window),
    }


def render_agent_prompt(
    name: str,
    state: ProjectState,
    message: Message,
    *,
    history_window: int = 50,
    prompts_dir: Optional[Path] = None,
) -> str:
    template = load_prompt(name, prompts_dir)
    return template.format(**context_slots(state, message, history_window=history_window))


def render_sga_prompt(
    team_info: str, backlog_info: str, *, prompts_dir: Optional[Path] = None
) -> str:
    template = load_prompt("sga", prompts_dir)
    return template.format(team_members=team_info, trello_tasks=backlog_info)
