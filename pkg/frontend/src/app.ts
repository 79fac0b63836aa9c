/**
 * Browser entry point: wires the store, poll loops, and DOM together.
 *
 * Three panes on one page: the request board (list + map + info panel),
 * the ESC terminal (assignment channel, acknowledge/complete), and the
 * management forms (patients and fleet). All state lives in ConsoleStore;
 * this module only renders it and forwards user input.
 */

import { ApiError, DispatchApi } from "./api.js";
import type { RequestRow } from "./api.js";
import { ConsoleStore } from "./store.js";
import { AssignmentSubscription, IntervalRefresher } from "./poll.js";
import { buildMarkers, renderSvg } from "./map.js";
import {
  validateEscForm,
  validateHelpForm,
  validatePatientForm,
  wireTimestamp,
} from "./validate.js";
import type { FieldErrors } from "./validate.js";

const BOARD_REFRESH_MS = 3000;

// -- tiny DOM helpers ---------------------------------------------------------

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

// -- audible alert --------------------------------------------------------------

let audioCtx: AudioContext | null = null;

function beep(): void {
  try {
    audioCtx = audioCtx ?? new AudioContext();
    const osc = audioCtx.createOscillator();
    const gain = audioCtx.createGain();
    osc.frequency.value = 880;
    gain.gain.value = 0.15;
    osc.connect(gain).connect(audioCtx.destination);
    osc.start();
    osc.stop(audioCtx.currentTime + 0.4);
  } catch {
    // no audio device: the visual flash still fires
  }
}

// -- page ------------------------------------------------------------------------

class ConsolePage {
  api: DispatchApi;
  store: ConsoleStore;
  refresher: IntervalRefresher;
  subscription: AssignmentSubscription | null = null;
  seenAlerts = 0;

  constructor(baseUrl: string) {
    this.api = new DispatchApi(baseUrl);
    this.store = new ConsoleStore(this.api);
    this.refresher = new IntervalRefresher(() => void this.store.refreshBoard(), BOARD_REFRESH_MS);
    this.store.subscribe(() => this.render());
  }

  start(): void {
    void this.store.refreshBoard();
    this.refresher.start();
  }

  stop(): void {
    this.refresher.stop();
    this.subscription?.stop();
  }

  // -- rendering --

  render(): void {
    const s = this.store.state;

    const banner = byId<HTMLDivElement>("banner");
    banner.textContent = s.banner ?? "";
    banner.style.display = s.banner ? "block" : "none";

    const { red, black } = this.store.counts();
    byId<HTMLSpanElement>("board-counts").textContent = `${red} live / ${black} handled`;

    this.renderRows(s.rows);
    this.renderMap();
    this.renderInfo();
    this.renderTerminal();
    this.renderFleetOptions();

    if (s.terminal.alertCount > this.seenAlerts) {
      this.seenAlerts = s.terminal.alertCount;
      beep();
      document.body.classList.add("alerting");
      setTimeout(() => document.body.classList.remove("alerting"), 1200);
    }
  }

  renderRows(rows: RequestRow[]): void {
    const tbody = byId<HTMLTableSectionElement>("board-body");
    clear(tbody);
    for (const row of rows) {
      const tr = el(
        "tr",
        { class: `row-${row.color}`, "data-key": row.request_key },
        el("td", {}, el("span", { class: `dot ${row.color}` }), row.patient_name ?? row.patient_id),
        el("td", {}, row.state),
        el("td", {}, row.request_time),
        el("td", {}, row.terminal_id ?? ""),
        el("td", {}, `${row.latitude.toFixed(5)}, ${row.longitude.toFixed(5)}`),
      );
      if (row.request_key === this.store.state.selectedKey) tr.classList.add("selected");
      tr.addEventListener("click", () => void this.store.selectRow(row.request_key));
      tbody.append(tr);
    }
  }

  renderMap(): void {
    const s = this.store.state;
    const set = buildMarkers(s.rows, s.fleet, s.selectedKey);
    byId<HTMLDivElement>("map").innerHTML = renderSvg(set, { width: 640, height: 420 });
  }

  renderInfo(): void {
    const panel = byId<HTMLDivElement>("info");
    clear(panel);
    const info = this.store.state.info;
    if (!info) {
      panel.append(el("p", { class: "hint" }, "Click a request row to inspect it."));
      return;
    }
    const p = info.patient;
    panel.append(
      el("h3", {}, p ? `${p.first_name} ${p.last_name}` : info.row.patient_id),
      el("p", {}, `State: ${info.row.state}`),
      el("p", {}, `Requested: ${info.row.request_time}`),
      el("p", {}, `Location: ${info.row.latitude}, ${info.row.longitude}`),
    );
    if (info.address) panel.append(el("p", {}, `Address: ${info.address}`));
    if (p) {
      panel.append(
        el("p", {}, `Born: ${p.birth_date}  Disease: ${p.disease_name ?? "unknown"}`),
        el("p", {}, `Contacts: ${[p.emergency_contact1, p.emergency_contact2].filter(Boolean).join(", ")}`),
      );
    }
    const back = el("button", {}, "Show all markers");
    back.addEventListener("click", () => this.store.clearSelection());
    panel.append(back);
  }

  renderTerminal(): void {
    const t = this.store.state.terminal;
    byId<HTMLSpanElement>("terminal-status").textContent = t.escId
      ? `${t.escId}: ${t.connected ? "listening" : "connecting..."}`
      : "not subscribed";

    const list = byId<HTMLDivElement>("terminal-cards");
    clear(list);
    for (const a of [...t.assignments].reverse()) {
      const err = t.errors[a.request_key];
      const ack = el("button", {}, "Acknowledge");
      ack.addEventListener("click", () => void this.store.acknowledge(a.request_key));
      const done = el("button", {}, "Complete");
      done.addEventListener("click", () => void this.store.complete(a.request_key));
      const handled = this.rowState(a.request_key) === "HANDLED";
      const card = el(
        "div",
        { class: `card${handled ? " done" : ""}` },
        el("h4", {}, `${a.patient_name} - ${a.distance_km.toFixed(3)} km`),
        el("p", {}, `Disease: ${a.disease_name ?? "unknown"}`),
        el("p", {}, `Location: ${a.latitude}, ${a.longitude}`),
        el("p", {}, `Assigned: ${a.assigned_at}`),
        el("div", { class: "actions" }, ack, done),
        el("p", { class: "inline-error" }, err ?? ""),
      );
      list.append(card);
    }
  }

  rowState(key: string): string | null {
    const row = this.store.state.rows.find((r) => r.request_key === key);
    return row ? row.state : null;
  }

  renderFleetOptions(): void {
    const select = byId<HTMLSelectElement>("terminal-esc");
    const current = select.value;
    clear(select);
    select.append(el("option", { value: "" }, "select unit"));
    for (const esc of this.store.state.fleet) {
      select.append(el("option", { value: esc.id }, `${esc.id} (${esc.status})`));
    }
    select.value = current;
  }

  // -- terminal wiring --

  subscribeTerminal(escId: string): void {
    this.subscription?.stop();
    this.store.openTerminal(escId);
    this.seenAlerts = 0;
    this.subscription = new AssignmentSubscription(this.api, escId, {
      onAssignment: (push) => {
        this.store.receiveAssignment(push);
        void this.store.refreshBoard();
      },
      onStatus: (up) => this.store.setTerminalConnected(up),
    });
    this.subscription.start();
  }
}

// -- forms -----------------------------------------------------------------------

function readForm(form: HTMLFormElement): Record<string, string> {
  const data = new FormData(form);
  const out: Record<string, string> = {};
  for (const [k, v] of data.entries()) out[k] = String(v).trim();
  return out;
}

function showErrors(form: HTMLFormElement, errors: FieldErrors): void {
  for (const span of form.querySelectorAll<HTMLSpanElement>(".field-error")) {
    span.textContent = errors[span.dataset.for ?? ""] ?? "";
  }
  const summary = form.querySelector<HTMLParagraphElement>(".form-status");
  if (summary) summary.textContent = "";
}

function showStatus(form: HTMLFormElement, message: string, ok: boolean): void {
  const summary = form.querySelector<HTMLParagraphElement>(".form-status");
  if (summary) {
    summary.textContent = message;
    summary.className = `form-status ${ok ? "ok" : "error"}`;
  }
}

async function handleServerError(form: HTMLFormElement, err: unknown): Promise<void> {
  if (err instanceof ApiError) {
    showStatus(form, `${err.code}: ${err.message}`, false);
  } else {
    showStatus(form, `service unreachable: ${err instanceof Error ? err.message : err}`, false);
  }
}

function wireForms(page: ConsolePage): void {
  const patientForm = byId<HTMLFormElement>("patient-form");
  patientForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const f = readForm(patientForm);
    const errors = validatePatientForm({
      id: f.id ?? "",
      first_name: f.first_name ?? "",
      last_name: f.last_name ?? "",
      emergency_contact1: f.emergency_contact1 ?? "",
      emergency_contact2: f.emergency_contact2 ?? "",
      birth_date: f.birth_date ?? "",
      disease_name: f.disease_name ?? "",
    });
    showErrors(patientForm, errors);
    if (Object.keys(errors).length > 0) return;
    void page.api
      .registerPatient({
        id: f.id ?? "",
        first_name: f.first_name ?? "",
        last_name: f.last_name ?? "",
        emergency_contact1: f.emergency_contact1 ?? "",
        emergency_contact2: f.emergency_contact2 || undefined,
        birth_date: f.birth_date ?? "",
        disease_name: f.disease_name || undefined,
      })
      .then((p) => showStatus(patientForm, `registered ${p.id}`, true))
      .catch((err) => handleServerError(patientForm, err));
  });

  const escForm = byId<HTMLFormElement>("esc-form");
  escForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const f = readForm(escForm);
    const errors = validateEscForm({
      id: f.id ?? "",
      latitude: f.latitude ?? "",
      longitude: f.longitude ?? "",
    });
    showErrors(escForm, errors);
    if (Object.keys(errors).length > 0) return;
    const lat = Number(f.latitude);
    const lon = Number(f.longitude);
    const existing = page.store.state.fleet.some((e) => e.id === f.id);
    const call = existing
      ? page.api.moveEsc(f.id ?? "", lat, lon)
      : page.api.createEsc({ id: f.id ?? "", latitude: lat, longitude: lon });
    void call
      .then((esc) => {
        showStatus(escForm, `${existing ? "moved" : "created"} ${esc.id}`, true);
        return page.store.refreshBoard();
      })
      .catch((err) => handleServerError(escForm, err));
  });

  const helpForm = byId<HTMLFormElement>("help-form");
  byId<HTMLInputElement>("help-time").value = wireTimestamp();
  helpForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const f = readForm(helpForm);
    const errors = validateHelpForm({
      patient_id: f.patient_id ?? "",
      latitude: f.latitude ?? "",
      longitude: f.longitude ?? "",
      request_time: f.request_time ?? "",
    });
    showErrors(helpForm, errors);
    if (Object.keys(errors).length > 0) return;
    void page.api
      .submitHelp({
        patient_id: f.patient_id ?? "",
        latitude: Number(f.latitude),
        longitude: Number(f.longitude),
        request_time: f.request_time ?? "",
      })
      .then((outcome) => {
        const text =
          outcome.outcome === "ASSIGNED"
            ? `assigned ${outcome.esc_id} at ${outcome.distance_km.toFixed(3)} km`
            : `queued at position ${outcome.position}`;
        showStatus(helpForm, text, true);
        byId<HTMLInputElement>("help-time").value = wireTimestamp();
        return page.store.refreshBoard();
      })
      .catch((err) => handleServerError(helpForm, err));
  });
}

// -- boot ------------------------------------------------------------------------

function defaultBaseUrl(): string {
  const params = new URLSearchParams(location.search);
  return params.get("api") ?? "http://127.0.0.1:8350";
}

function main(): void {
  const urlInput = byId<HTMLInputElement>("base-url");
  urlInput.value = defaultBaseUrl();

  let page = new ConsolePage(urlInput.value);
  page.start();
  wireForms(page);

  byId<HTMLButtonElement>("connect").addEventListener("click", () => {
    page.stop();
    page = new ConsolePage(urlInput.value);
    page.start();
    wireForms(page);
  });

  byId<HTMLButtonElement>("terminal-subscribe").addEventListener("click", () => {
    const escId = byId<HTMLSelectElement>("terminal-esc").value;
    if (escId) page.subscribeTerminal(escId);
  });
}

document.addEventListener("DOMContentLoaded", main);
