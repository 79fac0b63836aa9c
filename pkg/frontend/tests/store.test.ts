import { describe, expect, it } from "vitest";
import { DispatchApi } from "../src/api.js";
import type { AssignmentPush } from "../src/api.js";
import { ConsoleStore } from "../src/store.js";
import { deferred, esc, fakeFetch, jsonResponse, row, until } from "./helpers.js";

function push(key: string): AssignmentPush {
  return {
    request_key: key,
    patient_id: "0770",
    patient_name: "Rose Maher",
    disease_name: "Asthma",
    latitude: 36.85126,
    longitude: 42.99551,
    distance_km: 0.543,
    assigned_at: "2026-01-01 00:00:00.000",
  };
}

function storeWith(routes: Parameters<typeof fakeFetch>[0]) {
  const fetchFn = fakeFetch(routes);
  const store = new ConsoleStore(new DispatchApi("http://svc", fetchFn));
  return { store, fetchFn };
}

describe("refreshBoard", () => {
  it("loads rows and fleet and clears the banner", async () => {
    const { store } = storeWith({
      "GET /requests?status=all": () => jsonResponse({ requests: [row()] }),
      "GET /escs": () => jsonResponse({ escs: [esc()] }),
    });
    store.state.banner = "stale";
    await store.refreshBoard();
    expect(store.state.rows).toHaveLength(1);
    expect(store.state.fleet).toHaveLength(1);
    expect(store.state.banner).toBeNull();
  });

  it("keeps stale rows and raises the banner when the service drops", async () => {
    let up = true;
    const { store } = storeWith({
      "GET /requests?status=all": () => {
        if (!up) throw new TypeError("fetch failed");
        return jsonResponse({ requests: [row()] });
      },
      "GET /escs": () => jsonResponse({ escs: [] }),
    });
    await store.refreshBoard();
    expect(store.state.rows).toHaveLength(1);

    up = false;
    await store.refreshBoard();
    expect(store.state.banner).toMatch(/unreachable/);
    expect(store.state.rows).toHaveLength(1); // board still readable

    up = true;
    await store.refreshBoard();
    expect(store.state.banner).toBeNull();
  });

  it("counts red and black rows", async () => {
    const { store } = storeWith({
      "GET /requests?status=all": () =>
        jsonResponse({
          requests: [
            row({ request_key: "a" }),
            row({ request_key: "b", state: "HANDLED", color: "black" }),
            row({ request_key: "c", state: "RECEIVED" }),
          ],
        }),
      "GET /escs": () => jsonResponse({ escs: [] }),
    });
    await store.refreshBoard();
    expect(store.counts()).toEqual({ red: 2, black: 1 });
  });
});

describe("selectRow", () => {
  it("opens the info panel with patient details and the row address", async () => {
    const { store } = storeWith({
      "GET /requests?status=all": () =>
        jsonResponse({ requests: [row({ request_key: "a", address: "Market St 3" })] }),
      "GET /escs": () => jsonResponse({ escs: [] }),
      "GET /patients/0770": () =>
        jsonResponse({
          id: "0770",
          first_name: "Rose",
          last_name: "Maher",
          emergency_contact1: "07505841793",
          emergency_contact2: null,
          birth_date: "1989-04-09",
          disease_name: "Asthma",
          reg_date: "2013-03-01",
        }),
    });
    await store.refreshBoard();
    await store.selectRow("a");
    expect(store.state.selectedKey).toBe("a");
    expect(store.state.info?.patient?.first_name).toBe("Rose");
    expect(store.state.info?.address).toBe("Market St 3");

    store.clearSelection();
    expect(store.state.selectedKey).toBeNull();
    expect(store.state.info).toBeNull();
  });

  it("still opens the panel when the patient lookup fails", async () => {
    const { store } = storeWith({
      "GET /requests?status=all": () => jsonResponse({ requests: [row({ request_key: "a" })] }),
      "GET /escs": () => jsonResponse({ escs: [] }),
      "GET /patients/0770": () => jsonResponse({ error: "NOT_FOUND", message: "gone" }, 404),
    });
    await store.refreshBoard();
    await store.selectRow("a");
    expect(store.state.info?.patient).toBeNull();
    expect(store.state.info?.row.request_key).toBe("a");
  });
});

describe("terminal state", () => {
  it("dedupes assignment pushes by request key", () => {
    const { store } = storeWith({});
    store.openTerminal("Amb5");
    store.receiveAssignment(push("k1"));
    store.receiveAssignment(push("k1")); // reconnect replay
    store.receiveAssignment(push("k2"));
    expect(store.state.terminal.assignments.map((a) => a.request_key)).toEqual(["k1", "k2"]);
    expect(store.state.terminal.alertCount).toBe(2);
  });

  it("notifies subscribers on every mutation", () => {
    const { store } = storeWith({});
    let seen = 0;
    const off = store.subscribe(() => (seen += 1));
    store.openTerminal("Amb5");
    store.receiveAssignment(push("k1"));
    off();
    store.receiveAssignment(push("k2"));
    expect(seen).toBe(2);
  });

  it("surfaces WRONG_TERMINAL and BAD_STATE inline instead of throwing", async () => {
    const { store } = storeWith({
      "POST /requests/k1/ack": () =>
        jsonResponse({ error: "WRONG_TERMINAL", message: "not yours" }, 409),
      "POST /requests/k1/complete": () =>
        jsonResponse({ error: "BAD_STATE", message: "already handled" }, 409),
    });
    store.openTerminal("Amb3");
    expect(await store.acknowledge("k1")).toBe(false);
    expect(store.state.terminal.errors.k1).toBe("WRONG_TERMINAL: not yours");
    expect(await store.complete("k1")).toBe(false);
    expect(store.state.terminal.errors.k1).toBe("BAD_STATE: already handled");
    expect(store.state.banner).toBeNull();
  });

  it("raises the banner for transport failures on actions", async () => {
    const { store } = storeWith({
      "POST /requests/k1/ack": () => {
        throw new TypeError("fetch failed");
      },
    });
    store.openTerminal("Amb5");
    expect(await store.acknowledge("k1")).toBe(false);
    expect(store.state.banner).toMatch(/unreachable/);
  });

  it("serializes actions on the same request key", async () => {
    const first = deferred<Response>();
    let completeCalls = 0;
    const { store, fetchFn } = storeWith({
      "POST /requests/k1/complete": () => {
        completeCalls += 1;
        if (completeCalls === 1) return first.promise;
        return jsonResponse({ error: "BAD_STATE", message: "already handled" }, 409);
      },
      "GET /requests?status=all": () => jsonResponse({ requests: [] }),
      "GET /escs": () => jsonResponse({ escs: [] }),
    });
    store.openTerminal("Amb5");

    const a = store.complete("k1");
    const b = store.complete("k1"); // double click
    await new Promise((r) => setTimeout(r, 20));
    expect(completeCalls).toBe(1); // second waits for the first

    first.resolve(jsonResponse({ request_key: "k1", state: "HANDLED", esc_id: "Amb5" }));
    expect(await a).toBe(true);
    expect(await b).toBe(false);
    expect(completeCalls).toBe(2);
    expect(store.state.terminal.errors.k1).toMatch(/BAD_STATE/);
    expect(fetchFn.calls.filter((c) => c.startsWith("POST"))).toHaveLength(2);
  });

  it("lets actions on different keys run independently", async () => {
    const slow = deferred<Response>();
    const { store } = storeWith({
      "POST /requests/k1/ack": () => slow.promise,
      "POST /requests/k2/ack": () => jsonResponse({ request_key: "k2", state: "ACKNOWLEDGED" }),
      "GET /requests?status=all": () => jsonResponse({ requests: [] }),
      "GET /escs": () => jsonResponse({ escs: [] }),
    });
    store.openTerminal("Amb5");
    const blocked = store.acknowledge("k1");
    const free = store.acknowledge("k2");
    await until(() => store.state.terminal.errors.k2 === undefined && true);
    expect(await free).toBe(true); // k2 finished while k1 still parked
    slow.resolve(jsonResponse({ request_key: "k1", state: "ACKNOWLEDGED" }));
    expect(await blocked).toBe(true);
  });
});
