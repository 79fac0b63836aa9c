/**
 * Typed client for the dispatch service HTTP/JSON API.
 *
 * Every console action goes through this module; there are no private
 * channels and no dispatch logic on the client side.
 */

// ===== WIRE TYPES =====

export type RequestState = "RECEIVED" | "RESERVED" | "ACKNOWLEDGED" | "HANDLED";
export type BoardColor = "red" | "black";
export type EscStatus = "FREE" | "RESERVED";

export interface RequestRow {
  request_key: string;
  patient_id: string;
  patient_name: string | null;
  request_time: string;
  received_time: string;
  received_time2: string | null;
  reply_time?: string;
  latitude: number;
  longitude: number;
  is_reserved: "t" | "f" | null;
  terminal_id: string | null;
  state: RequestState;
  color: BoardColor;
  address: string | null;
}

export interface Esc {
  id: string;
  latitude: number;
  longitude: number;
  status: EscStatus;
}

export interface Patient {
  id: string;
  first_name: string;
  last_name: string;
  emergency_contact1: string;
  emergency_contact2: string | null;
  birth_date: string;
  disease_name: string | null;
  reg_date: string;
}

export interface PatientInput {
  id: string;
  first_name: string;
  last_name: string;
  emergency_contact1: string;
  emergency_contact2?: string;
  birth_date: string;
  disease_name?: string;
}

export type SubmitOutcome =
  | {
      outcome: "ASSIGNED";
      request_key: string;
      patient_id: string;
      esc_id: string;
      distance_km: number;
      assigned_at: string;
    }
  | {
      outcome: "QUEUED";
      request_key: string;
      patient_id: string;
      position: number;
      received_time: string;
    };

/** Payload pushed over the per-ESC assignment channel. */
export interface AssignmentPush {
  request_key: string;
  patient_id: string;
  patient_name: string;
  disease_name: string | null;
  latitude: number;
  longitude: number;
  distance_km: number;
  assigned_at: string;
}

export interface Stats {
  submitted: number;
  rejected: number;
  assigned_live: number;
  queued: number;
  handled: number;
  escs_free: number;
  escs_reserved: number;
}

export type ErrorCode =
  | "VALIDATION"
  | "NOT_FOUND"
  | "UNKNOWN_PATIENT"
  | "UNKNOWN_ESC"
  | "UNKNOWN_TABLE"
  | "DUPLICATE"
  | "DUPLICATE_ID"
  | "WRONG_TERMINAL"
  | "BAD_STATE"
  | "EMPTY_FLEET"
  | "STORAGE_FAILURE"
  | "INTERNAL";

// ===== CLIENT =====

/** A non-2xx reply from the service, carrying its machine-readable code. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: ErrorCode,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class DispatchApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = fetch,
  ) {}

  // -- requests --

  listRequests(status: "new" | "handled" | "all" = "all"): Promise<RequestRow[]> {
    return this.get<{ requests: RequestRow[] }>(`/requests?status=${status}`).then(
      (r) => r.requests,
    );
  }

  submitHelp(body: {
    patient_id: string;
    latitude: number;
    longitude: number;
    request_time: string;
  }): Promise<SubmitOutcome> {
    return this.send<SubmitOutcome>("POST", "/help", body);
  }

  ackRequest(key: string, terminalId: string): Promise<{ request_key: string; state: RequestState }> {
    return this.send("POST", `/requests/${encodeURIComponent(key)}/ack`, {
      terminal_id: terminalId,
    });
  }

  completeRequest(
    key: string,
    terminalId: string,
  ): Promise<{ request_key: string; state: "HANDLED"; esc_id: string }> {
    return this.send("POST", `/requests/${encodeURIComponent(key)}/complete`, {
      terminal_id: terminalId,
    });
  }

  // -- fleet --

  listEscs(): Promise<Esc[]> {
    return this.get<{ escs: Esc[] }>("/escs").then((r) => r.escs);
  }

  getEsc(id: string): Promise<Esc> {
    return this.get(`/escs/${encodeURIComponent(id)}`);
  }

  createEsc(body: { id: string; latitude: number; longitude: number }): Promise<Esc> {
    return this.send("POST", "/escs", body);
  }

  moveEsc(id: string, latitude: number, longitude: number): Promise<Esc> {
    return this.send("PUT", `/escs/${encodeURIComponent(id)}`, { latitude, longitude });
  }

  /**
   * Long-poll the ESC's assignment channel. Resolves with whatever was
   * pending (possibly []) after at most `timeoutS` seconds server-side.
   */
  pollAssignments(
    escId: string,
    timeoutS: number,
    signal?: AbortSignal,
  ): Promise<AssignmentPush[]> {
    const path = `/escs/${encodeURIComponent(escId)}/assignments?timeout_s=${timeoutS}`;
    return this.get<{ assignments: AssignmentPush[] }>(path, signal).then(
      (r) => r.assignments,
    );
  }

  // -- patients --

  getPatient(id: string): Promise<Patient> {
    return this.get(`/patients/${encodeURIComponent(id)}`);
  }

  registerPatient(body: PatientInput): Promise<Patient> {
    return this.send("POST", "/patients", body);
  }

  updatePatient(id: string, fields: Partial<Omit<PatientInput, "id">>): Promise<Patient> {
    return this.send("PUT", `/patients/${encodeURIComponent(id)}`, fields);
  }

  // -- monitoring --

  health(): Promise<{ status: string; counts: Record<string, number> }> {
    return this.get("/health");
  }

  stats(): Promise<Stats> {
    return this.get("/stats");
  }

  // -- plumbing --

  private get<T>(path: string, signal?: AbortSignal): Promise<T> {
    return this.exchange<T>(path, { signal: signal ?? null });
  }

  private send<T>(method: "POST" | "PUT", path: string, body: unknown): Promise<T> {
    return this.exchange<T>(path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  private async exchange<T>(path: string, init: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    const payload: unknown = await resp.json();
    if (!resp.ok) {
      const err = payload as { error?: ErrorCode; message?: string };
      throw new ApiError(resp.status, err.error ?? "INTERNAL", err.message ?? resp.statusText);
    }
    return payload as T;
  }
}
