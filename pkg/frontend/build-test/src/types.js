// Wire shapes of the v1 API. The console performs no policy logic: every
// displayed fact originates from one of these payloads.
export {};
//# sourceMappingURL=types.js.map