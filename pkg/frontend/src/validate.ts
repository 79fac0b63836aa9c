/**
 * Client-side form validation.
 *
 * The rules mirror what the service enforces so that obviously bad input
 * never leaves the browser; the server remains the authority and its
 * VALIDATION replies are still rendered per-field when they occur.
 */

export const ID_MAX = 32;
export const ESC_ID_MAX = 10;
export const NAME_MAX = 50;
export const PHONE_MAX = 32;
export const DISEASE_MAX = 50;

export type FieldErrors = Record<string, string>;

const DATE_RE = /^\d{4}-\d{2}-\d{2}$/;
const TS_RE = /^\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2}\.\d{3}$/;

export function parseCoord(raw: string, kind: "latitude" | "longitude"): number | string {
  const value = Number(raw.trim());
  if (raw.trim() === "" || !Number.isFinite(value)) {
    return `${kind} must be a number`;
  }
  const limit = kind === "latitude" ? 90 : 180;
  if (value < -limit || value > limit) {
    return `${kind} must be within [-${limit}, ${limit}]`;
  }
  return value;
}

export interface PatientForm {
  id: string;
  first_name: string;
  last_name: string;
  emergency_contact1: string;
  emergency_contact2: string;
  birth_date: string;
  disease_name: string;
}

export function validatePatientForm(form: PatientForm, today = new Date()): FieldErrors {
  const errors: FieldErrors = {};
  if (!form.id || form.id.length > ID_MAX) {
    errors.id = `patient id must be 1-${ID_MAX} characters`;
  }
  if (!form.first_name.trim() || form.first_name.length > NAME_MAX) {
    errors.first_name = `first name must be 1-${NAME_MAX} characters`;
  }
  if (!form.last_name.trim() || form.last_name.length > NAME_MAX) {
    errors.last_name = `last name must be 1-${NAME_MAX} characters`;
  }
  if (!form.emergency_contact1 || form.emergency_contact1.length > PHONE_MAX) {
    errors.emergency_contact1 = `a primary contact number is required (1-${PHONE_MAX} characters)`;
  }
  if (form.emergency_contact2.length > PHONE_MAX) {
    errors.emergency_contact2 = "second contact number too long";
  }
  if (form.disease_name.length > DISEASE_MAX) {
    errors.disease_name = "disease name too long";
  }
  if (!DATE_RE.test(form.birth_date) || Number.isNaN(Date.parse(form.birth_date))) {
    errors.birth_date = "birth date must be YYYY-MM-DD";
  } else if (form.birth_date > isoDate(today)) {
    errors.birth_date = "birth date must not be in the future";
  }
  return errors;
}

export interface EscForm {
  id: string;
  latitude: string;
  longitude: string;
}

export function validateEscForm(form: EscForm): FieldErrors {
  const errors: FieldErrors = {};
  if (!form.id || form.id.length > ESC_ID_MAX) {
    errors.id = `esc id must be 1-${ESC_ID_MAX} characters`;
  }
  const lat = parseCoord(form.latitude, "latitude");
  if (typeof lat === "string") errors.latitude = lat;
  const lon = parseCoord(form.longitude, "longitude");
  if (typeof lon === "string") errors.longitude = lon;
  return errors;
}

export interface HelpForm {
  patient_id: string;
  latitude: string;
  longitude: string;
  request_time: string;
}

export function validateHelpForm(form: HelpForm): FieldErrors {
  const errors: FieldErrors = {};
  if (!form.patient_id || form.patient_id.length > ID_MAX) {
    errors.patient_id = `patient id must be 1-${ID_MAX} characters`;
  }
  const lat = parseCoord(form.latitude, "latitude");
  if (typeof lat === "string") errors.latitude = lat;
  const lon = parseCoord(form.longitude, "longitude");
  if (typeof lon === "string") errors.longitude = lon;
  if (!TS_RE.test(form.request_time)) {
    errors.request_time = "request time must be YYYY-MM-DD HH:MM:SS.mmm";
  }
  return errors;
}

/** Format a timestamp the way the wire expects, millisecond precision. */
export function wireTimestamp(at = new Date()): string {
  const pad = (n: number, w = 2) => String(n).padStart(w, "0");
  return (
    `${at.getFullYear()}-${pad(at.getMonth() + 1)}-${pad(at.getDate())} ` +
    `${pad(at.getHours())}:${pad(at.getMinutes())}:${pad(at.getSeconds())}.` +
    pad(at.getMilliseconds(), 3)
  );
}

function isoDate(d: Date): string {
  const pad = (n: number) => String(n).padStart(2, "0");
  return `${d.getFullYear()}-${pad(d.getMonth() + 1)}-${pad(d.getDate())}`;
}
