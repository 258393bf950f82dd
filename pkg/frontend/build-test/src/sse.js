// Minimal SSE reader over fetch + ReadableStream. Used instead of
// EventSource so the identical code runs in the browser and in Node tests.
export function parseSSEChunk(buffer) {
    const events = [];
    let working = buffer;
    for (;;) {
        const split = working.indexOf("\n\n");
        if (split < 0)
            break;
        const block = working.slice(0, split);
        working = working.slice(split + 2);
        const dataLines = block
            .split("\n")
            .filter((line) => line.startsWith("data:"))
            .map((line) => line.slice(5).trimStart());
        if (dataLines.length > 0) {
            events.push(dataLines.join("\n"));
        }
    }
    return { events, rest: working };
}
export async function readSSE(url, handlers, signal, headers = {}) {
    const response = await fetch(url, {
        headers: { accept: "text/event-stream", ...headers },
        signal,
    });
    if (!response.ok || response.body === null) {
        throw new Error(`event stream failed: HTTP ${response.status}`);
    }
    handlers.onOpen?.();
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
        const { done, value } = await reader.read();
        if (done)
            break;
        buffer += decoder.decode(value, { stream: true });
        const { events, rest } = parseSSEChunk(buffer);
        buffer = rest;
        for (const event of events) {
            handlers.onRecord(event);
        }
    }
}
/** Keep an SSE subscription alive with exponential backoff. Returns a stop
 * function. */
export function subscribeWithRetry(url, handlers, headers = {}) {
    const controller = new AbortController();
    let stopped = false;
    let backoffMs = 500;
    const loop = async () => {
        while (!stopped) {
            try {
                await readSSE(url, handlers, controller.signal, headers);
                backoffMs = 500; // clean close; reconnect quickly
            }
            catch (error) {
                if (stopped)
                    return;
                handlers.onError?.(error);
            }
            if (stopped)
                return;
            await new Promise((resolve) => setTimeout(resolve, backoffMs));
            backoffMs = Math.min(backoffMs * 2, 10_000);
        }
    };
    void loop();
    return () => {
        stopped = true;
        controller.abort();
    };
}
//# sourceMappingURL=sse.js.map