import json
from importlib import resources

import pytest

from devnous.errors import ImpersonationError, SchemaViolation
from devnous.evaluation import dataset_shape, load_benchmark, write_dialogues
from devnous.orchestrator import EngineConfig
from devnous.simulator import (
    ScriptedSGA,
    SimulationConfig,
    generate_turn,
    run_simulation,
)


def packaged_script():
    raw = resources.files("devnous.data").joinpath("sga_script.json").read_text(encoding="utf-8")
    return json.loads(raw)


def make_config(backend, **kwargs):
    return SimulationConfig(backend=backend, **kwargs)


def team_and_backlog():
    config = EngineConfig()
    return config.resolve_team(), config.resolve_backlog()


def backlog_info(backlog):
    return "\n".join(json.dumps(t.to_dict()) for t in backlog)


def test_generate_turn_passes_fixture_through():
    team, backlog = team_and_backlog()
    script = packaged_script()
    config = make_config(ScriptedSGA(script))
    wire = generate_turn("(no messages yet)", config, team=team, backlog_info=backlog_info(backlog))
    assert wire == script[0]


def test_generate_turn_rejects_impersonation_twice():
    team, backlog = team_and_backlog()
    impostor = {"user": "devnous", "message": "I created the task", "time": "12-03-2025 10:00:00"}
    config = make_config(ScriptedSGA([impostor, impostor]))
    with pytest.raises(ImpersonationError):
        generate_turn("ctx", config, team=team, backlog_info=backlog_info(backlog))


def test_generate_turn_reprompt_recovers():
    team, backlog = team_and_backlog()
    impostor = {"user": "devnous", "message": "done!", "time": "12-03-2025 10:00:00"}
    good = {"user": "mchen", "message": "hello", "time": "12-03-2025 10:00:00"}
    audit = []
    config = make_config(ScriptedSGA([impostor, good]))
    wire = generate_turn("ctx", config, team=team, backlog_info=backlog_info(backlog), audit=audit)
    assert wire["user"] == "mchen"
    assert len(audit) == 2
    assert "rejected" in audit[1]["prompt"]


def test_generate_turn_rejects_unknown_handle():
    team, backlog = team_and_backlog()
    stranger = {"user": "nobody", "message": "hi", "time": "12-03-2025 10:00:00"}
    config = make_config(ScriptedSGA([stranger, stranger]))
    with pytest.raises(SchemaViolation):
        generate_turn("ctx", config, team=team, backlog_info=backlog_info(backlog))


def test_run_simulation_default_shape(tmp_path):
    config = make_config(ScriptedSGA(packaged_script()))
    dialogues = run_simulation(config, EngineConfig(backend="rule"))
    assert len(dialogues) == 8
    assert all(len(d.turns) == 20 for d in dialogues)
    # unannotated: ground truth stays empty
    assert all(t.ground_truth is None for d in dialogues for t in d.turns)
    # output loadable by the benchmark loader without the import adapter
    out = tmp_path / "sim.jsonl"
    write_dialogues(dialogues, out)
    loaded = load_benchmark(out)
    shape = dataset_shape(loaded)
    assert (shape.n_dialogues, shape.n_turns) == (8, 160)


def test_run_simulation_single_turn_boundary():
    config = make_config(ScriptedSGA(packaged_script()), n_dialogues=1, turns_per_dialogue=1)
    dialogues = run_simulation(config, EngineConfig(backend="rule"))
    assert len(dialogues) == 1
    assert len(dialogues[0].turns) == 1


def test_path_dependence_context_carries_agent_responses():
    audit = []
    config = make_config(ScriptedSGA(packaged_script()), n_dialogues=1, turns_per_dialogue=20)
    dialogues = run_simulation(config, EngineConfig(backend="rule"), audit=audit)
    turns = dialogues[0].turns
    by_turn = {entry["turn"]: entry for entry in audit}
    for turn in turns:
        if not turn.agent_outputs:
            continue
        next_index = turn.turn_index + 1
        if next_index not in by_turn:
            continue
        context = by_turn[next_index]["context"]
        for response in turn.agent_outputs:
            assert response in context, f"turn {next_index} context misses a turn-{turn.turn_index} response"


def test_roster_closure():
    config = make_config(ScriptedSGA(packaged_script()), n_dialogues=2)
    dialogues = run_simulation(config, EngineConfig(backend="rule"))
    for dialogue in dialogues:
        handles = {m.handle for m in dialogue.team}
        for turn in dialogue.turns:
            assert turn.message.user in handles


def test_dialogue_abort_keeps_batch_going():
    bad = {"user": "devnous", "message": "I did it", "time": "12-03-2025 10:00:00"}
    good_script = packaged_script()

    class FirstDialogueBroken(ScriptedSGA):
        def __init__(self):
            super().__init__(good_script)
            self.poisoned = 6  # enough failed generations to abort dialogue 1

        def complete(self, prompt, context):
            if self.poisoned > 0:
                self.poisoned -= 1
                return json.dumps(bad)
            return super().complete(prompt, context)

    config = make_config(FirstDialogueBroken(), n_dialogues=2, turns_per_dialogue=5)
    dialogues = run_simulation(config, EngineConfig(backend="rule"))
    assert len(dialogues) == 2
    assert len(dialogues[0].turns) == 0  # aborted before any turn landed
    assert len(dialogues[1].turns) == 5
