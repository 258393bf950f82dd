// Wire shapes of the v1 API. The console performs no policy logic: every
// displayed fact originates from one of these payloads.

export type TeamMember = {
  display_name: string;
  handle: string;
  role: string;
};

export type Task = {
  id: string;
  name: string;
  description: string | null;
  list_name: string;
  labels: string[];
  assignee: string | null;
  url: string;
};

export type WorkflowView = {
  kind: "task_workflow" | "summary_workflow";
  is_active: boolean;
  data: Record<string, string>;
  started_by: string;
  started_at: string;
};

export type StateView = {
  channel: string;
  team: TeamMember[];
  backlog: Task[];
  workflow: WorkflowView | null;
  history_length: number;
  memory_size: number;
  turns: number;
};

export type HistoryMessage = {
  seq: number;
  user: string;
  time: string;
  message: string;
};

export type IntentTuple = {
  category: string;
  action: string;
};

export type PostResult = {
  turn: number;
  responses: string[];
  emitted: IntentTuple[];
};

export type TraceRecord = {
  turn: number;
  classifications: Array<{
    category: string;
    confidence: number;
    explanation: string;
    action: string;
    is_cross_talk: boolean;
  }>;
  routes: string[];
  tool_calls: Array<Record<string, unknown>>;
  responses: string[];
};

export type ConnectionStatus = "connecting" | "open" | "retrying" | "closed";
