"""SMS rendering and fan-out to emergency contacts and the hospital.

Delivery goes through a pluggable transport; the real carrier stack is out
of scope, so the shipped transports are an in-memory recorder (tests) and a
line-per-message file log. Fan-out is fire-and-forget: failures end up in
the message status, never as exceptions.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from datetime import datetime

from .errors import ValidationError
from .geodesy import GeoPoint
from .model import PatientRecord, fmt_date

BODY_MAX = 480
DELIVERY_ATTEMPTS = 3


@dataclass(frozen=True)
class HospitalEndpoint:
    name: str
    msisdn: str

    def validate(self) -> "HospitalEndpoint":
        if not self.msisdn:
            raise ValidationError("hospital msisdn must be non-empty")
        return self


@dataclass
class SmsMessage:
    to: str
    body: str
    created_at: datetime
    delivery_status: str = "PENDING"  # PENDING | SENT | FAILED
    attempts: int = 0


def render_contact_sms(patient: PatientRecord, loc: GeoPoint, address: str | None = None) -> str:
    body = (
        f"EMERGENCY: {patient.first_name.strip()} {patient.last_name.strip()} "
        f"needs help at ({loc.lat_deg:.6f}, {loc.lon_deg:.6f})."
    )
    if address:
        body += f" {address}"
    return body[:BODY_MAX]


def render_hospital_sms(patient: PatientRecord, loc: GeoPoint) -> str:
    disease = patient.disease_name.strip() or "unknown"
    body = (
        f"INCOMING: {patient.first_name.strip()} {patient.last_name.strip()}, "
        f"disease: {disease}, born {fmt_date(patient.birth_date)}, "
        f"location ({loc.lat_deg:.6f}, {loc.lon_deg:.6f})."
    )
    return body[:BODY_MAX]


class TransportError(Exception):
    """Raised by a transport when one send attempt fails."""


class RecordingTransport:
    """Keeps sent messages in memory; can be scripted to fail."""

    def __init__(self, fail_all: bool = False, fail_first: int = 0):
        self._lock = threading.Condition()
        self._sent: list[tuple[str, str]] = []
        self.fail_all = fail_all
        self._fail_remaining = fail_first

    def send(self, to: str, body: str) -> None:
        with self._lock:
            if self.fail_all:
                raise TransportError("transport configured to fail")
            if self._fail_remaining > 0:
                self._fail_remaining -= 1
                raise TransportError("scripted failure")
            self._sent.append((to, body))
            self._lock.notify_all()

    def drain(self) -> list[tuple[str, str]]:
        with self._lock:
            out = list(self._sent)
            self._sent.clear()
            return out

    def sent_count(self) -> int:
        with self._lock:
            return len(self._sent)

    def wait_for(self, count: int, timeout: float = 5.0) -> bool:
        """Block until at least ``count`` messages were recorded."""
        deadline = time.monotonic() + timeout
        with self._lock:
            while len(self._sent) < count:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._lock.wait(remaining)
            return True


class FileTransport:
    """Appends one ``timestamp | to | body`` line per message."""

    def __init__(self, path: str):
        self._path = path
        self._lock = threading.Lock()

    def send(self, to: str, body: str) -> None:
        line = f"{datetime.now().isoformat()} | {to} | {body}\n"
        try:
            with self._lock, open(self._path, "a", encoding="utf-8") as fh:
                fh.write(line)
        except OSError as exc:
            raise TransportError(str(exc)) from exc


def build_transport(selector: str):
    """``recording`` or ``file:<path>``."""
    if selector == "recording":
        return RecordingTransport()
    if selector.startswith("file:"):
        return FileTransport(selector[len("file:"):])
    raise ValidationError(f"unknown sms transport {selector!r}")


class Notifier:
    """Renders and delivers the per-request notification set."""

    def __init__(self, transport, attempts: int = DELIVERY_ATTEMPTS):
        self.transport = transport
        self.attempts = attempts

    def fan_out(
        self,
        patient: PatientRecord,
        loc: GeoPoint,
        hospital: HospitalEndpoint,
        address: str | None = None,
    ) -> list[SmsMessage]:
        """One message per present emergency contact plus one to the hospital.

        Never raises on delivery failure; statuses carry the outcome.
        """
        contact_body = render_contact_sms(patient, loc, address)
        outgoing = [(contact, contact_body) for contact in patient.contacts]
        outgoing.append((hospital.msisdn, render_hospital_sms(patient, loc)))

        messages = []
        for to, body in outgoing:
            msg = SmsMessage(to=to, body=body, created_at=datetime.now())
            for _ in range(self.attempts):
                msg.attempts += 1
                try:
                    self.transport.send(to, body)
                    msg.delivery_status = "SENT"
                    break
                except Exception:
                    msg.delivery_status = "FAILED"
            messages.append(msg)
        return messages
