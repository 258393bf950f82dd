// Live session: wires the HTTP client, the event stream and the reducer
// together. No DOM here; main.ts subscribes for rendering and the
// integration tests drive this directly.
import { ApiError, ConsoleClient } from "./api.js";
import { subscribeWithRetry } from "./sse.js";
import { initialState, reduce } from "./viewmodel.js";
export class ConsoleSession {
    constructor(options) {
        this.listeners = [];
        this.stopStream = null;
        this.refreshing = false;
        this.client = new ConsoleClient(options.baseUrl, options.channel, options.token);
        this.state = initialState(options.channel);
    }
    current() {
        return this.state;
    }
    subscribe(listener) {
        this.listeners.push(listener);
        listener(this.state);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== listener);
        };
    }
    dispatch(action) {
        this.state = reduce(this.state, action);
        for (const listener of this.listeners) {
            listener(this.state);
        }
        if (this.state.stateStale && !this.refreshing) {
            void this.refreshState();
        }
    }
    /** Subscribe to events and hydrate from /state and /history. */
    async connect() {
        this.dispatch({ type: "connection", status: "connecting" });
        this.stopStream = subscribeWithRetry(this.client.eventsUrl(), {
            onOpen: () => {
                this.dispatch({ type: "connection", status: "open" });
                // Re-hydrate after a gap; keyed transcript entries dedup this.
                void this.hydrate();
            },
            onRecord: (data) => {
                try {
                    const record = JSON.parse(data);
                    this.dispatch({ type: "turnEvent", record });
                }
                catch {
                    // ignore undecodable frames
                }
            },
            onError: () => this.dispatch({ type: "connection", status: "retrying" }),
        }, this.client.authHeaders());
        await this.hydrate();
    }
    async hydrate() {
        const view = await this.client.getState();
        this.dispatch({ type: "stateLoaded", view });
        const messages = await this.client.getHistory();
        this.dispatch({ type: "historyLoaded", messages });
    }
    async refreshState() {
        this.refreshing = true;
        try {
            const view = await this.client.getState();
            this.dispatch({ type: "stateLoaded", view });
            const messages = await this.client.getHistory();
            this.dispatch({ type: "historyLoaded", messages });
            this.dispatch({ type: "stateRefreshed" });
        }
        catch {
            // transient; the next event retries
        }
        finally {
            this.refreshing = false;
        }
    }
    /** Post one message as a roster member. Input stays disabled (inFlight)
     * until the reply lands; a 409 surfaces inline. */
    async sendAs(user, text) {
        if (this.state.inFlight) {
            return;
        }
        if (!text.trim()) {
            this.dispatch({ type: "sendFailed", error: "message text is empty" });
            return;
        }
        this.dispatch({ type: "sendStarted" });
        try {
            const result = await this.client.postMessage(user, text);
            this.dispatch({
                type: "sendSucceeded",
                user,
                text,
                turn: result.turn,
                responses: result.responses,
            });
        }
        catch (error) {
            const reason = error instanceof ApiError ? `${error.status}: ${error.message}` : String(error);
            this.dispatch({ type: "sendFailed", error: reason });
        }
    }
    close() {
        this.stopStream?.();
        this.stopStream = null;
        this.dispatch({ type: "connection", status: "closed" });
    }
    /** Wait until `predicate` holds for the session state. */
    async waitFor(predicate, timeoutMs = 5000) {
        if (predicate(this.state)) {
            return this.state;
        }
        return new Promise((resolve, reject) => {
            const timer = setTimeout(() => {
                unsubscribe();
                reject(new Error("timed out waiting for console state"));
            }, timeoutMs);
            const unsubscribe = this.subscribe((state) => {
                if (predicate(state)) {
                    clearTimeout(timer);
                    unsubscribe();
                    resolve(state);
                }
            });
        });
    }
}
//# sourceMappingURL=session.js.map