import assert from "node:assert/strict";
import { test } from "node:test";

import type { StateView, TraceRecord } from "../src/types.js";
import {
  backlogByList,
  initialState,
  reduce,
  type Action,
  type ConsoleState,
} from "../src/viewmodel.js";

function apply(actions: Action[], start?: ConsoleState): ConsoleState {
  return actions.reduce((state, action) => reduce(state, action), start ?? initialState("main"));
}

const TASK = {
  id: "T-1",
  name: "OAuth implementation",
  description: null,
  list_name: "In Progress",
  labels: ["auth"],
  assignee: "mchen",
  url: "https://tasks.local/T-1",
};

function stateView(overrides: Partial<StateView> = {}): StateView {
  return {
    channel: "main",
    team: [{ display_name: "Maya Chen", handle: "mchen", role: "Backend engineer" }],
    backlog: [TASK],
    workflow: null,
    history_length: 0,
    memory_size: 0,
    turns: 0,
    ...overrides,
  };
}

function record(turn: number, responses: string[]): TraceRecord {
  return { turn, classifications: [], routes: [], tool_calls: [], responses };
}

test("stateLoaded fills team, backlog and workflow panel", () => {
  const state = apply([{ type: "stateLoaded", view: stateView() }]);
  assert.equal(state.team.length, 1);
  assert.equal(state.backlog.length, 1);
  assert.deepEqual(state.workflow, { kind: "none" });
});

test("backlog groups by list name", () => {
  const second = { ...TASK, id: "T-2", name: "Profiles bug", list_name: "Backlog" };
  const third = { ...TASK, id: "T-3", name: "CI speedup", list_name: "Backlog" };
  const groups = backlogByList([TASK, second, third]);
  assert.deepEqual([...groups.keys()], ["In Progress", "Backlog"]);
  assert.equal(groups.get("Backlog")?.length, 2);
});

test("task workflow panel decodes draft fields", () => {
  const view = stateView({
    workflow: {
      kind: "task_workflow",
      is_active: true,
      data: {
        phase: "confirming",
        title: "Dark mode",
        priority: "Low",
        labels: '["ui","feature"]',
      },
      started_by: "mchen",
      started_at: "2025-03-12T09:00:00+00:00",
    },
  });
  const state = apply([{ type: "stateLoaded", view }]);
  assert.equal(state.workflow.kind, "task");
  if (state.workflow.kind !== "task") return;
  assert.equal(state.workflow.active, true);
  assert.equal(state.workflow.draft.title, "Dark mode");
  assert.deepEqual(state.workflow.draft.labels, ["ui", "feature"]);
  assert.equal(state.workflow.draft.assignee, null);
});

test("summary workflow panel walks the cursor", () => {
  const draft = (member: string, confirmed: boolean) =>
    JSON.stringify({
      team_member: member,
      date: "2025-03-12",
      accomplished: ["x"],
      planned: [],
      blockers: [],
      confirmed,
    });
  const view = stateView({
    workflow: {
      kind: "summary_workflow",
      is_active: true,
      data: {
        order: '["mchen","edavis"]',
        cursor: "1",
        "draft:mchen": draft("mchen", true),
        "draft:edavis": draft("edavis", false),
      },
      started_by: "mchen",
      started_at: "2025-03-12T17:00:00+00:00",
    },
  });
  const state = apply([{ type: "stateLoaded", view }]);
  assert.equal(state.workflow.kind, "summary");
  if (state.workflow.kind !== "summary") return;
  assert.deepEqual(
    state.workflow.drafts.map((d) => [d.member, d.confirmed, d.current]),
    [
      ["mchen", true, false],
      ["edavis", false, true],
    ],
  );
});

test("turn events append agent responses and mark state stale", () => {
  const state = apply([{ type: "turnEvent", record: record(0, ["hello from the agent"]) }]);
  assert.equal(state.transcript.length, 1);
  assert.equal(state.transcript[0].agent, true);
  assert.equal(state.stateStale, true);
});

test("duplicate turn events are dropped (de-dup by turn index)", () => {
  const state = apply([
    { type: "turnEvent", record: record(0, ["once"]) },
    { type: "turnEvent", record: record(0, ["once"]) },
  ]);
  assert.equal(state.transcript.length, 1);
});

test("own POST result renders before the event arrives, without doubling", () => {
  const state = apply([
    { type: "sendSucceeded", user: "mchen", text: "hi", turn: 0, responses: ["reply"] },
    { type: "turnEvent", record: record(0, ["reply"]) },
  ]);
  const keys = state.transcript.map((entry) => entry.key);
  assert.deepEqual(keys, ["turn:0:human", "turn:0:agent:0"]);
});

test("history hydration replaces the transcript idempotently", () => {
  const messages = [
    { seq: 1, user: "mchen", time: "12-03-2025 09:00:00", message: "hello" },
    { seq: 2, user: "devnous", time: "12-03-2025 09:00:00", message: "hi" },
  ];
  const once = apply([{ type: "historyLoaded", messages }]);
  const twice = apply([{ type: "historyLoaded", messages }], once);
  assert.deepEqual(once.transcript, twice.transcript);
  assert.equal(twice.transcript.length, 2);
  assert.equal(twice.transcript[1].agent, true);
});

test("send lifecycle toggles inFlight and surfaces errors", () => {
  let state = apply([{ type: "sendStarted" }]);
  assert.equal(state.inFlight, true);
  state = reduce(state, { type: "sendFailed", error: "409: a turn is already in flight" });
  assert.equal(state.inFlight, false);
  assert.match(state.lastError ?? "", /409/);
});

test("replaying the same event log rebuilds identical panels", () => {
  const log: Action[] = [
    { type: "stateLoaded", view: stateView() },
    { type: "sendSucceeded", user: "mchen", text: "go", turn: 0, responses: ["ack"] },
    { type: "turnEvent", record: record(1, ["more"]) },
    { type: "stateRefreshed" },
  ];
  const a = apply(log);
  const b = apply(log);
  assert.deepEqual(a, b);
});
