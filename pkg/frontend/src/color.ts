import type { BoardColor, RequestState } from "./api.js";

// Must stay identical to the server's board tags: live rows are red until
// the terminal completes them, then they render black.
export function colorForState(state: RequestState): BoardColor {
  return state === "HANDLED" ? "black" : "red";
}

export function isLive(state: RequestState): boolean {
  return colorForState(state) === "red";
}
