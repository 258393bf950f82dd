// Pure console state: transcript, backlog panel, workflow panel,
// connection. Reduced exclusively from service payloads; replaying the
// same events always rebuilds the same panels.

import type {
  ConnectionStatus,
  HistoryMessage,
  StateView,
  Task,
  TeamMember,
  TraceRecord,
  WorkflowView,
} from "./types.js";

export const AGENT_HANDLE = "devnous";

export type TranscriptEntry = {
  key: string;
  author: string;
  text: string;
  time: string;
  agent: boolean;
};

export type TaskDraftPanel = {
  title: string | null;
  description: string | null;
  priority: string | null;
  assignee: string | null;
  labels: string[];
  phase: string;
};

export type SummaryDraftPanel = {
  member: string;
  accomplished: string[];
  planned: string[];
  blockers: string[];
  confirmed: boolean;
  current: boolean;
};

export type WorkflowPanel =
  | { kind: "none" }
  | { kind: "task"; active: boolean; draft: TaskDraftPanel }
  | { kind: "summary"; active: boolean; drafts: SummaryDraftPanel[] };

export type ConsoleState = {
  channel: string;
  team: TeamMember[];
  transcript: TranscriptEntry[];
  seenTurns: number[];
  backlog: Task[];
  workflow: WorkflowPanel;
  connection: ConnectionStatus;
  inFlight: boolean;
  lastError: string | null;
  stateStale: boolean;
};

export function initialState(channel: string): ConsoleState {
  return {
    channel,
    team: [],
    transcript: [],
    seenTurns: [],
    backlog: [],
    workflow: { kind: "none" },
    connection: "connecting",
    inFlight: false,
    lastError: null,
    stateStale: false,
  };
}

export function backlogByList(tasks: Task[]): Map<string, Task[]> {
  const groups = new Map<string, Task[]>();
  for (const task of tasks) {
    const list = groups.get(task.list_name) ?? [];
    list.push(task);
    groups.set(task.list_name, list);
  }
  return groups;
}

function workflowPanel(view: WorkflowView | null): WorkflowPanel {
  if (view === null) {
    return { kind: "none" };
  }
  if (view.kind === "task_workflow") {
    let labels: string[] = [];
    try {
      const parsed = JSON.parse(view.data["labels"] ?? "[]");
      if (Array.isArray(parsed)) labels = parsed.map(String);
    } catch {
      labels = [];
    }
    return {
      kind: "task",
      active: view.is_active,
      draft: {
        title: view.data["title"] ?? null,
        description: view.data["description"] ?? null,
        priority: view.data["priority"] ?? null,
        assignee: view.data["assignee"] ?? null,
        labels,
        phase: view.data["phase"] ?? "gathering",
      },
    };
  }
  const drafts: SummaryDraftPanel[] = [];
  let order: string[] = [];
  try {
    const parsed = JSON.parse(view.data["order"] ?? "[]");
    if (Array.isArray(parsed)) order = parsed.map(String);
  } catch {
    order = [];
  }
  const cursor = Number.parseInt(view.data["cursor"] ?? "0", 10);
  order.forEach((member, index) => {
    const raw = view.data[`draft:${member}`];
    if (!raw) return;
    try {
      const summary = JSON.parse(raw) as {
        accomplished?: string[];
        planned?: string[];
        blockers?: string[];
        confirmed?: boolean;
      };
      drafts.push({
        member,
        accomplished: summary.accomplished ?? [],
        planned: summary.planned ?? [],
        blockers: summary.blockers ?? [],
        confirmed: summary.confirmed ?? false,
        current: view.is_active && index === cursor,
      });
    } catch {
      // skip unparseable drafts rather than breaking the panel
    }
  });
  return { kind: "summary", active: view.is_active, drafts };
}

export type Action =
  | { type: "connection"; status: ConnectionStatus }
  | { type: "stateLoaded"; view: StateView }
  | { type: "historyLoaded"; messages: HistoryMessage[] }
  | { type: "sendStarted" }
  | { type: "sendSucceeded"; user: string; text: string; turn: number; responses: string[] }
  | { type: "sendFailed"; error: string }
  | { type: "turnEvent"; record: TraceRecord }
  | { type: "stateRefreshed" };

export function reduce(state: ConsoleState, action: Action): ConsoleState {
  switch (action.type) {
    case "connection":
      return { ...state, connection: action.status };

    case "stateLoaded":
      return {
        ...state,
        team: action.view.team,
        backlog: action.view.backlog,
        workflow: workflowPanel(action.view.workflow),
        stateStale: false,
      };

    case "historyLoaded": {
      // Source of truth on (re)connect: rebuild the transcript, keyed by
      // seq, so a reconnect never duplicates entries.
      const transcript = action.messages.map((message) => ({
        key: `seq:${message.seq}`,
        author: message.user,
        text: message.message,
        time: message.time,
        agent: message.user === AGENT_HANDLE,
      }));
      return { ...state, transcript };
    }

    case "sendStarted":
      return { ...state, inFlight: true, lastError: null };

    case "sendSucceeded": {
      const entries: TranscriptEntry[] = [
        {
          key: `turn:${action.turn}:human`,
          author: action.user,
          text: action.text,
          time: "",
          agent: false,
        },
        ...action.responses.map((text, index) => ({
          key: `turn:${action.turn}:agent:${index}`,
          author: AGENT_HANDLE,
          text,
          time: "",
          agent: true,
        })),
      ];
      return {
        ...state,
        inFlight: false,
        transcript: [...state.transcript, ...entries],
        seenTurns: [...state.seenTurns, action.turn],
        stateStale: true,
      };
    }

    case "sendFailed":
      return { ...state, inFlight: false, lastError: action.error };

    case "turnEvent": {
      // De-dup by turn index: our own POST already rendered this turn.
      if (state.seenTurns.includes(action.record.turn)) {
        return { ...state, stateStale: true };
      }
      const entries = action.record.responses.map((text, index) => ({
        key: `turn:${action.record.turn}:agent:${index}`,
        author: AGENT_HANDLE,
        text,
        time: "",
        agent: true,
      }));
      return {
        ...state,
        transcript: [...state.transcript, ...entries],
        seenTurns: [...state.seenTurns, action.record.turn],
        stateStale: true,
      };
    }

    case "stateRefreshed":
      return { ...state, stateStale: false };

    default:
      return state;
  }
}
