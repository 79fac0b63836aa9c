"""Domain records for the four tracking tables, plus serialization helpers.

Coordinates are held as decimal strings at the table boundary (the source
schema stores them as short varchars, and exports must round-trip
byte-for-byte) and exposed as parsed :class:`GeoPoint` values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum

from .errors import ValidationError
from .geodesy import GeoPoint

TS_FORMAT = "%Y-%m-%d %H:%M:%S.%f"
DATE_FORMAT = "%Y-%m-%d"

ID_MAX = 32
ESC_ID_MAX = 10
NAME_MAX = 50
PHONE_MAX = 32
DISEASE_MAX = 50


def fmt_ts(ts: datetime) -> str:
    """Render a timestamp as ``YYYY-MM-DD HH:MM:SS.mmm``."""
    return ts.strftime(TS_FORMAT)[:-3]


def parse_ts(text: str) -> datetime:
    try:
        return datetime.strptime(text, TS_FORMAT)
    except ValueError:
        raise ValidationError(f"bad timestamp {text!r}, expected YYYY-MM-DD HH:MM:SS.mmm") from None


def fmt_date(value: date) -> str:
    return value.strftime(DATE_FORMAT)


def parse_date(text: str) -> date:
    try:
        return datetime.strptime(text, DATE_FORMAT).date()
    except ValueError:
        raise ValidationError(f"bad date {text!r}, expected YYYY-MM-DD") from None


def truncate_ms(ts: datetime) -> datetime:
    """Drop sub-millisecond precision so formatted values round-trip."""
    return ts.replace(microsecond=(ts.microsecond // 1000) * 1000)


def fmt_coord(value: float) -> str:
    """Decimal string with up to 6 fractional digits, trailing zeros trimmed."""
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    if text in ("", "-0", "-"):
        return "0"
    return text


def parse_coord(text: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ValidationError(f"bad coordinate {text!r}") from None


def make_request_key(patient_id: str, request_time: datetime) -> str:
    """URL-safe key for a live request: ``<patient_id>~<time with T separator>``."""
    return f"{patient_id}~{request_time.strftime('%Y-%m-%dT%H:%M:%S.%f')[:-3]}"


def parse_request_key(key: str) -> tuple[str, datetime]:
    patient_id, sep, stamp = key.rpartition("~")
    if not sep or not patient_id:
        raise ValidationError(f"bad request key {key!r}")
    try:
        request_time = datetime.strptime(stamp, "%Y-%m-%dT%H:%M:%S.%f")
    except ValueError:
        raise ValidationError(f"bad request key {key!r}") from None
    return patient_id, request_time


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


@dataclass(frozen=True)
class PatientRecord:
    """A row of the patient registration table."""

    id: str
    first_name: str
    last_name: str
    emergency_contact1: str
    emergency_contact2: str | None
    birth_date: date
    disease_name: str
    reg_date: date

    def validate(self, today: date | None = None) -> None:
        today = today or date.today()
        _require(bool(self.id) and len(self.id) <= ID_MAX, "patient id must be 1-32 characters")
        _require(bool(self.first_name.strip()) and len(self.first_name) <= NAME_MAX,
                 "first name must be 1-50 characters")
        _require(bool(self.last_name.strip()) and len(self.last_name) <= NAME_MAX,
                 "last name must be 1-50 characters")
        _require(
            bool(self.emergency_contact1) and len(self.emergency_contact1) <= PHONE_MAX,
            "emergency_contact1 is required (1-32 characters)",
        )
        if self.emergency_contact2:
            _require(len(self.emergency_contact2) <= PHONE_MAX, "emergency_contact2 too long")
        _require(len(self.disease_name) <= DISEASE_MAX, "disease name too long")
        _require(self.birth_date <= self.reg_date, "birth_date must not be after reg_date")
        _require(self.reg_date <= today, "reg_date must not be in the future")

    @property
    def full_name(self) -> str:
        return f"{self.first_name.strip()} {self.last_name.strip()}".strip()

    @property
    def contacts(self) -> list[str]:
        return [c for c in (self.emergency_contact1, self.emergency_contact2) if c]


class EscStatus(str, Enum):
    FREE = "FREE"
    RESERVED = "RESERVED"


@dataclass
class EscRecord:
    """An emergency service unit with a fixed location and availability."""

    id: str
    latitude: str
    longitude: str
    status: EscStatus = EscStatus.FREE

    @classmethod
    def at(cls, esc_id: str, lat: float, lon: float, status: EscStatus = EscStatus.FREE) -> "EscRecord":
        return cls(esc_id, fmt_coord(lat), fmt_coord(lon), status)

    @property
    def location(self) -> GeoPoint:
        return GeoPoint(parse_coord(self.latitude), parse_coord(self.longitude))

    def validate(self) -> None:
        _require(bool(self.id) and len(self.id) <= ESC_ID_MAX, "esc id must be 1-10 characters")
        self.location  # raises on bad coordinates or out-of-range values


class RequestState(str, Enum):
    RECEIVED = "RECEIVED"
    RESERVED = "RESERVED"
    ACKNOWLEDGED = "ACKNOWLEDGED"
    HANDLED = "HANDLED"


def color_for(state: RequestState) -> str:
    """Board color tag: live requests render red, handled ones black."""
    return "black" if state is RequestState.HANDLED else "red"


@dataclass
class HelpRequest:
    """A live request row. ``request_time`` is the untrusted client clock;
    ``received_time`` is the authoritative server clock."""

    patient_id: str
    request_time: datetime
    received_time: datetime
    latitude: str
    longitude: str
    is_reserved: bool = False
    terminal_id: str | None = None

    @property
    def key(self) -> str:
        return make_request_key(self.patient_id, self.request_time)

    @property
    def location(self) -> GeoPoint:
        return GeoPoint(parse_coord(self.latitude), parse_coord(self.longitude))


@dataclass(frozen=True)
class HandledRequest:
    """A completed request row. ``received_time2`` is the unit's
    acknowledgment time; it may be absent on imported historical rows."""

    patient_id: str
    request_time: datetime
    received_time: datetime
    received_time2: datetime | None
    latitude: str
    longitude: str
    reply_time: datetime
    esc_id: str

    @property
    def key(self) -> str:
        return make_request_key(self.patient_id, self.request_time)

    @property
    def location(self) -> GeoPoint:
        return GeoPoint(parse_coord(self.latitude), parse_coord(self.longitude))


@dataclass(frozen=True)
class Assignment:
    """Outcome of reserving the nearest free unit for a request."""

    patient_id: str
    request_time: datetime
    esc_id: str
    distance_km: float
    assigned_at: datetime

    @property
    def request_key(self) -> str:
        return make_request_key(self.patient_id, self.request_time)


@dataclass(frozen=True)
class QueuedAck:
    """Returned when no unit is free; the request waits in FIFO order."""

    patient_id: str
    request_time: datetime
    received_time: datetime
    position: int

    @property
    def request_key(self) -> str:
        return make_request_key(self.patient_id, self.request_time)
