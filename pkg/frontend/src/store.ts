/**
 * ConsoleStore - the single source of truth for console UI state.
 *
 * Board refreshes, assignment pushes, and user actions from any pane all
 * mutate this one store; views subscribe and re-render. Actions that hit
 * the same request key are serialized so a double click can never race
 * itself, and action failures that are a terminal's business
 * (WRONG_TERMINAL, BAD_STATE) are surfaced inline instead of thrown.
 */

import { ApiError, DispatchApi } from "./api.js";
import type { AssignmentPush, Esc, Patient, RequestRow } from "./api.js";

export interface InfoPanel {
  row: RequestRow;
  patient: Patient | null;
  address: string | null;
}

export interface TerminalState {
  escId: string | null;
  connected: boolean;
  /** Incoming assignments, oldest first, deduped by request key. */
  assignments: AssignmentPush[];
  /** Bumped on every fresh push; the DOM layer turns this into the alert. */
  alertCount: number;
  /** Inline per-request action errors, e.g. "BAD_STATE: ...". */
  errors: Record<string, string>;
}

export interface ConsoleState {
  rows: RequestRow[];
  fleet: Esc[];
  selectedKey: string | null;
  info: InfoPanel | null;
  /** Set while the service is unreachable; the board stays usable read-only. */
  banner: string | null;
  terminal: TerminalState;
}

export type Listener = (state: ConsoleState) => void;

export class ConsoleStore {
  readonly state: ConsoleState = {
    rows: [],
    fleet: [],
    selectedKey: null,
    info: null,
    banner: null,
    terminal: {
      escId: null,
      connected: false,
      assignments: [],
      alertCount: 0,
      errors: {},
    },
  };

  private listeners = new Set<Listener>();
  private chains = new Map<string, Promise<unknown>>();

  constructor(readonly api: DispatchApi) {}

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  // -- board ---------------------------------------------------------------

  /** Pull the request board and fleet; on failure keep stale rows, set banner. */
  async refreshBoard(): Promise<void> {
    try {
      const [rows, fleet] = await Promise.all([
        this.api.listRequests("all"),
        this.api.listEscs(),
      ]);
      this.state.rows = rows;
      this.state.fleet = fleet;
      this.state.banner = null;
      if (this.state.selectedKey !== null) {
        const row = rows.find((r) => r.request_key === this.state.selectedKey);
        if (row && this.state.info) {
          this.state.info = { ...this.state.info, row, address: row.address };
        }
      }
    } catch (err) {
      this.state.banner = `service unreachable: ${describe(err)}`;
    }
    this.emit();
  }

  counts(): { red: number; black: number } {
    let red = 0;
    let black = 0;
    for (const row of this.state.rows) {
      if (row.color === "red") red += 1;
      else black += 1;
    }
    return { red, black };
  }

  /** Row click: single marker + info panel with patient details and address. */
  async selectRow(key: string): Promise<void> {
    const row = this.state.rows.find((r) => r.request_key === key);
    if (!row) return;
    this.state.selectedKey = key;
    let patient: Patient | null = null;
    try {
      patient = await this.api.getPatient(row.patient_id);
    } catch {
      // stale row for a purged patient: the panel still shows the row itself
    }
    this.state.info = { row, patient, address: row.address };
    this.emit();
  }

  clearSelection(): void {
    this.state.selectedKey = null;
    this.state.info = null;
    this.emit();
  }

  // -- terminal ------------------------------------------------------------

  openTerminal(escId: string): void {
    this.state.terminal = {
      escId,
      connected: false,
      assignments: [],
      alertCount: 0,
      errors: {},
    };
    this.emit();
  }

  setTerminalConnected(connected: boolean): void {
    if (this.state.terminal.connected !== connected) {
      this.state.terminal.connected = connected;
      this.emit();
    }
  }

  /** Merge one assignment push into terminal state. Safe under concurrency:
   * pushes for the same key (reconnect replays) collapse to one card. */
  receiveAssignment(push: AssignmentPush): void {
    const t = this.state.terminal;
    if (!t.assignments.some((a) => a.request_key === push.request_key)) {
      t.assignments = [...t.assignments, push];
      t.alertCount += 1;
    }
    this.emit();
  }

  /** Acknowledge from the terminal view. Resolves true on success. */
  acknowledge(key: string): Promise<boolean> {
    return this.terminalAction(key, () =>
      this.api.ackRequest(key, this.requireTerminal()),
    );
  }

  /** Complete from the terminal view; refreshes the board so the row flips
   * to black without any reload. Resolves true on success. */
  complete(key: string): Promise<boolean> {
    return this.terminalAction(key, () =>
      this.api.completeRequest(key, this.requireTerminal()),
    );
  }

  private requireTerminal(): string {
    const escId = this.state.terminal.escId;
    if (!escId) throw new Error("no terminal selected");
    return escId;
  }

  private terminalAction(key: string, call: () => Promise<unknown>): Promise<boolean> {
    return this.enqueue(key, async () => {
      try {
        await call();
        delete this.state.terminal.errors[key];
        await this.refreshBoard();
        return true;
      } catch (err) {
        if (err instanceof ApiError) {
          this.state.terminal.errors = {
            ...this.state.terminal.errors,
            [key]: `${err.code}: ${err.message}`,
          };
          this.emit();
          return false;
        }
        this.state.banner = `service unreachable: ${describe(err)}`;
        this.emit();
        return false;
      }
    });
  }

  /** Serialize async work per request key: later actions wait for earlier
   * ones on the same key, independent keys run freely. */
  private enqueue<T>(key: string, fn: () => Promise<T>): Promise<T> {
    const prev = this.chains.get(key) ?? Promise.resolve();
    const next = prev.then(fn, fn);
    this.chains.set(
      key,
      next.catch(() => undefined),
    );
    return next;
  }
}

function describe(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}
