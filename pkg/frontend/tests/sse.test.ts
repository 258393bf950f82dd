import assert from "node:assert/strict";
import { test } from "node:test";

import { parseSSEChunk } from "../src/sse.js";

test("parses complete events and keeps the remainder", () => {
  const { events, rest } = parseSSEChunk('data: {"a":1}\n\ndata: {"b":2}\n\ndata: {"c"');
  assert.deepEqual(events, ['{"a":1}', '{"b":2}']);
  assert.equal(rest, 'data: {"c"');
});

test("ignores keepalive comments", () => {
  const { events, rest } = parseSSEChunk(": keepalive\n\ndata: {}\n\n");
  assert.deepEqual(events, ["{}"]);
  assert.equal(rest, "");
});

test("joins multi-line data fields", () => {
  const { events } = parseSSEChunk("data: line1\ndata: line2\n\n");
  assert.deepEqual(events, ["line1\nline2"]);
});

test("empty buffer yields nothing", () => {
  assert.deepEqual(parseSSEChunk(""), { events: [], rest: "" });
});
