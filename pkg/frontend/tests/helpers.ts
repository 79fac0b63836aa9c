import type { Esc, FetchLike, RequestRow } from "../src/api.js";

export function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (err: unknown) => void;
}

export function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (err: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

export function row(overrides: Partial<RequestRow> = {}): RequestRow {
  return {
    request_key: "0770~2026-01-01T00:00:00.000",
    patient_id: "0770",
    patient_name: "Rose Maher",
    request_time: "2026-01-01 00:00:00.000",
    received_time: "2026-01-01 00:00:00.100",
    received_time2: null,
    latitude: 36.85126,
    longitude: 42.99551,
    is_reserved: "t",
    terminal_id: "Amb5",
    state: "RESERVED",
    color: "red",
    address: null,
    ...overrides,
  };
}

export function esc(overrides: Partial<Esc> = {}): Esc {
  return { id: "Amb5", latitude: 36.853527, longitude: 43.000917, status: "FREE", ...overrides };
}

export type Route = (init: RequestInit | undefined) => Response | Promise<Response>;

/**
 * Tiny fetch fake: exact-match routes keyed by "METHOD path", plus a call
 * log. Unrouted paths 404 so a typo fails loudly instead of hanging.
 */
export function fakeFetch(routes: Record<string, Route>): FetchLike & { calls: string[] } {
  const fn = (async (url: string, init?: RequestInit) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const key = `${method} ${path}`;
    fn.calls.push(key);
    const route = routes[key];
    if (!route) {
      return jsonResponse({ error: "NOT_FOUND", message: `no fake route for ${key}` }, 404);
    }
    return route(init);
  }) as FetchLike & { calls: string[] };
  fn.calls = [];
  return fn;
}

export async function until(
  cond: () => boolean,
  timeoutMs = 10_000,
  stepMs = 25,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error("condition not met in time");
    await new Promise((r) => setTimeout(r, stepMs));
  }
}
