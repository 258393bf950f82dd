// Thin client over the v1 endpoints. All policy lives server-side; this
// module only moves JSON.
export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
export class ConsoleClient {
    constructor(baseUrl, channel, token) {
        this.baseUrl = baseUrl;
        this.channel = channel;
        this.token = token;
    }
    headers(extra = {}) {
        const base = { ...extra };
        if (this.token) {
            base["authorization"] = `Bearer ${this.token}`;
        }
        return base;
    }
    url(path) {
        return `${this.baseUrl}/v1/channels/${encodeURIComponent(this.channel)}${path}`;
    }
    async parse(response) {
        const body = await response.json().catch(() => ({}));
        if (!response.ok) {
            const reason = typeof body.error === "string"
                ? body.error
                : `HTTP ${response.status}`;
            throw new ApiError(response.status, reason);
        }
        return body;
    }
    async postMessage(user, text) {
        const response = await fetch(this.url("/messages"), {
            method: "POST",
            headers: this.headers({ "content-type": "application/json" }),
            body: JSON.stringify({ user, text }),
        });
        return this.parse(response);
    }
    async getState() {
        const response = await fetch(this.url("/state"), { headers: this.headers() });
        return this.parse(response);
    }
    async getHistory(n = 200) {
        const response = await fetch(this.url(`/history?n=${n}`), { headers: this.headers() });
        const body = await this.parse(response);
        return body.messages;
    }
    eventsUrl(replay = false) {
        return this.url(`/events${replay ? "?replay=1" : ""}`);
    }
    authHeaders() {
        return this.headers();
    }
}
//# sourceMappingURL=api.js.map