// Thin client over the v1 endpoints. All policy lives server-side; this
// module only moves JSON.

import type { HistoryMessage, PostResult, StateView } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ConsoleClient {
  constructor(
    public baseUrl: string,
    public channel: string,
    private token?: string,
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const base: Record<string, string> = { ...extra };
    if (this.token) {
      base["authorization"] = `Bearer ${this.token}`;
    }
    return base;
  }

  private url(path: string): string {
    return `${this.baseUrl}/v1/channels/${encodeURIComponent(this.channel)}${path}`;
  }

  private async parse<T>(response: Response): Promise<T> {
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const reason =
        typeof (body as { error?: string }).error === "string"
          ? (body as { error: string }).error
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, reason);
    }
    return body as T;
  }

  async postMessage(user: string, text: string): Promise<PostResult> {
    const response = await fetch(this.url("/messages"), {
      method: "POST",
      headers: this.headers({ "content-type": "application/json" }),
      body: JSON.stringify({ user, text }),
    });
    return this.parse<PostResult>(response);
  }

  async getState(): Promise<StateView> {
    const response = await fetch(this.url("/state"), { headers: this.headers() });
    return this.parse<StateView>(response);
  }

  async getHistory(n = 200): Promise<HistoryMessage[]> {
    const response = await fetch(this.url(`/history?n=${n}`), { headers: this.headers() });
    const body = await this.parse<{ messages: HistoryMessage[] }>(response);
    return body.messages;
  }

  eventsUrl(replay = false): string {
    return this.url(`/events${replay ? "?replay=1" : ""}`);
  }

  authHeaders(): Record<string, string> {
    return this.headers();
  }
}
