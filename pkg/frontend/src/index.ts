export * from "./types.js";
export * from "./raw.js";
export * from "./format.js";
export * from "./api.js";
export * from "./state.js";
export * from "./map.js";
export * from "./report.js";
