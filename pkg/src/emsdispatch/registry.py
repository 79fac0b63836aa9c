"""The four-table tracking data model with CSV fixture import/export.

Table rows round-trip byte-for-byte through export -> import -> export:
coordinates stay the decimal strings they arrived as, timestamps are
millisecond-precision, reservation flags are 't'/'f' characters.

Referential integrity (terminal ids must name a registered unit) is
enforced for new writes only; fixture imports are accepted as printed.
"""

from __future__ import annotations

import csv
import io
import os
import threading
from datetime import datetime

from . import storage
from .errors import (
    DuplicateIdError,
    DuplicateRequestError,
    NotFoundError,
    UnknownTableError,
    ValidationError,
)
from .model import (
    EscRecord,
    EscStatus,
    HandledRequest,
    HelpRequest,
    PatientRecord,
    fmt_date,
    fmt_ts,
    make_request_key,
    parse_date,
    parse_ts,
)

TABLE_COLUMNS = {
    storage.REGISTRATION: [
        "ID", "F_Name", "L_Name", "Emergency_Contact1", "Emergency_Contact2",
        "BirthDate", "Disease_Name", "Reg_Date",
    ],
    storage.ESC: ["ID", "Latitude", "Longitude"],
    storage.NEW_REQUEST: [
        "ID", "request_time", "received_time", "latitude", "longitude",
        "isReserved", "Terminal_ID",
    ],
    storage.REQUEST_INFO: [
        "ID", "request_time", "received_time", "received_time2", "latitude",
        "longitude", "reply_time", "Esc_ID",
    ],
}

MUTABLE_PATIENT_FIELDS = {
    "first_name", "last_name", "emergency_contact1", "emergency_contact2", "disease_name",
}


def builtin_fixture_dir() -> str:
    """Directory holding the packaged fixture CSVs."""
    from importlib.resources import files

    return str(files("emsdispatch").joinpath("fixtures"))


class Registry:
    """Owns the Registration, ESC, New_Request and Request_Info tables.

    All mutations are serialized through one lock; reads return copies.
    """

    def __init__(self, backend: storage.MemoryBackend | None = None):
        self._backend = backend or storage.MemoryBackend()
        self._lock = threading.RLock()

    def close(self) -> None:
        self._backend.close()

    # -- patients ------------------------------------------------------------

    def register_patient(self, rec: PatientRecord) -> str:
        rec.validate()
        with self._lock:
            if self._backend.get(storage.REGISTRATION, rec.id) is not None:
                raise DuplicateIdError(f"patient {rec.id} already registered")
            self._backend.apply([("put", storage.REGISTRATION, rec.id, _patient_to_row(rec))])
        return rec.id

    def get_patient(self, patient_id: str) -> PatientRecord:
        with self._lock:
            row = self._backend.get(storage.REGISTRATION, patient_id)
        if row is None:
            raise NotFoundError(f"patient {patient_id} not found")
        return _row_to_patient(row)

    def update_patient(self, patient_id: str, **fields) -> PatientRecord:
        unknown = set(fields) - MUTABLE_PATIENT_FIELDS
        if unknown:
            raise ValidationError(f"immutable or unknown patient fields: {sorted(unknown)}")
        with self._lock:
            current = self.get_patient(patient_id)
            merged = {**current.__dict__, **fields}
            updated = PatientRecord(**merged)
            updated.validate()
            self._backend.apply([("put", storage.REGISTRATION, patient_id, _patient_to_row(updated))])
        return updated

    def list_patients(self) -> list[PatientRecord]:
        with self._lock:
            return [_row_to_patient(row) for _, row in self._backend.scan(storage.REGISTRATION)]

    # -- emergency service units ----------------------------------------------

    def upsert_esc(self, rec: EscRecord) -> None:
        rec.validate()
        with self._lock:
            existing = self._backend.get(storage.ESC, rec.id)
            # reservation state is owned by the dispatcher; location edits keep it
            status = existing["status"] if existing else rec.status.value
            row = {"id": rec.id, "latitude": rec.latitude, "longitude": rec.longitude, "status": status}
            self._backend.apply([("put", storage.ESC, rec.id, row)])

    def get_esc(self, esc_id: str) -> EscRecord:
        with self._lock:
            row = self._backend.get(storage.ESC, esc_id)
        if row is None:
            raise NotFoundError(f"esc {esc_id} not found")
        return _row_to_esc(row)

    def list_escs(self) -> list[EscRecord]:
        with self._lock:
            return [_row_to_esc(row) for _, row in self._backend.scan(storage.ESC)]

    def set_esc_status(self, esc_id: str, status: EscStatus) -> None:
        with self._lock:
            row = self._backend.get(storage.ESC, esc_id)
            if row is None:
                raise NotFoundError(f"esc {esc_id} not found")
            row["status"] = status.value
            self._backend.apply([("put", storage.ESC, esc_id, row)])

    # -- live requests ---------------------------------------------------------

    def add_request(self, req: HelpRequest) -> None:
        req.location  # validates coordinates
        with self._lock:
            key = req.key
            if self._backend.get(storage.NEW_REQUEST, key) is not None:
                raise DuplicateRequestError(f"request {key} already live")
            if self._backend.get(storage.REQUEST_INFO, key) is not None:
                raise DuplicateRequestError(f"request {key} already handled")
            self._check_terminal(req.terminal_id)
            self._backend.apply([("put", storage.NEW_REQUEST, key, _request_to_row(req))])

    def update_request_reservation(self, key: str, is_reserved: bool, terminal_id: str | None) -> None:
        with self._lock:
            row = self._backend.get(storage.NEW_REQUEST, key)
            if row is None:
                raise NotFoundError(f"request {key} not found")
            self._check_terminal(terminal_id)
            row["is_reserved"] = "t" if is_reserved else "f"
            row["terminal_id"] = terminal_id or ""
            self._backend.apply([("put", storage.NEW_REQUEST, key, row)])

    def get_request(self, key: str) -> HelpRequest:
        with self._lock:
            row = self._backend.get(storage.NEW_REQUEST, key)
        if row is None:
            raise NotFoundError(f"request {key} not found")
        return _row_to_request(row)

    def list_new_requests(self) -> list[HelpRequest]:
        with self._lock:
            return [_row_to_request(row) for _, row in self._backend.scan(storage.NEW_REQUEST)]

    def live_request_for_patient(self, patient_id: str) -> HelpRequest | None:
        with self._lock:
            for _, row in self._backend.scan(storage.NEW_REQUEST):
                if row["patient_id"] == patient_id:
                    return _row_to_request(row)
        return None

    # -- handled requests --------------------------------------------------------

    def complete_request(self, key: str, handled: HandledRequest) -> None:
        """Atomically move a live row into the handled table."""
        with self._lock:
            if self._backend.get(storage.NEW_REQUEST, key) is None:
                raise NotFoundError(f"request {key} not live")
            if self._backend.get(storage.REQUEST_INFO, key) is not None:
                raise DuplicateRequestError(f"request {key} already handled")
            self._check_terminal(handled.esc_id)
            self._backend.apply([
                ("delete", storage.NEW_REQUEST, key),
                ("put", storage.REQUEST_INFO, key, _handled_to_row(handled)),
            ])

    def get_handled(self, key: str) -> HandledRequest:
        with self._lock:
            row = self._backend.get(storage.REQUEST_INFO, key)
        if row is None:
            raise NotFoundError(f"handled request {key} not found")
        return _row_to_handled(row)

    def list_handled_requests(self) -> list[HandledRequest]:
        with self._lock:
            return [_row_to_handled(row) for _, row in self._backend.scan(storage.REQUEST_INFO)]

    def counts(self) -> dict:
        with self._lock:
            escs = self._backend.scan(storage.ESC)
            reserved = sum(1 for _, row in escs if row["status"] == EscStatus.RESERVED.value)
            return {
                "patients": self._backend.count(storage.REGISTRATION),
                "escs": len(escs),
                "escs_free": len(escs) - reserved,
                "escs_reserved": reserved,
                "new_requests": self._backend.count(storage.NEW_REQUEST),
                "handled_requests": self._backend.count(storage.REQUEST_INFO),
            }

    # -- CSV import/export ---------------------------------------------------------

    def export_table(self, table: str) -> str:
        columns = TABLE_COLUMNS.get(table)
        if columns is None:
            raise UnknownTableError(f"unknown table {table!r}")
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        with self._lock:
            for _, row in self._backend.scan(table):
                writer.writerow(_row_to_csv(table, row))
        return out.getvalue()

    def import_table(self, table: str, csv_text: str) -> int:
        """Load rows as printed; no integrity or ordering checks."""
        columns = TABLE_COLUMNS.get(table)
        if columns is None:
            raise UnknownTableError(f"unknown table {table!r}")
        reader = csv.reader(io.StringIO(csv_text))
        header = next(reader, None)
        if header != columns:
            raise ValidationError(f"bad header for {table}: {header!r}")
        count = 0
        with self._lock:
            for values in reader:
                if not values:
                    continue
                if len(values) != len(columns):
                    raise ValidationError(f"{table} row has {len(values)} fields, expected {len(columns)}")
                key, row = _csv_to_row(table, values)
                self._backend.apply([("put", table, key, row)])
                count += 1
        return count

    def load_fixture_dir(self, path: str) -> dict:
        """Import any of the four table CSVs found in ``path``, then derive
        unit reservation state from the live rows."""
        loaded = {}
        for table in storage.TABLES:
            file_path = os.path.join(path, f"{table}.csv")
            if os.path.exists(file_path):
                with open(file_path, "r", encoding="utf-8", newline="") as fh:
                    loaded[table] = self.import_table(table, fh.read())
        self._sync_esc_reservations()
        return loaded

    def _sync_esc_reservations(self) -> None:
        with self._lock:
            reserved = {
                row["terminal_id"]
                for _, row in self._backend.scan(storage.NEW_REQUEST)
                if row["is_reserved"] == "t" and row["terminal_id"]
            }
            for esc_id, row in self._backend.scan(storage.ESC):
                row["status"] = (
                    EscStatus.RESERVED.value if esc_id in reserved else EscStatus.FREE.value
                )
                self._backend.apply([("put", storage.ESC, esc_id, row)])

    def _check_terminal(self, terminal_id: str | None) -> None:
        if terminal_id and self._backend.get(storage.ESC, terminal_id) is None:
            raise ValidationError(f"terminal {terminal_id!r} is not a registered esc")


# -- row conversions (storage rows are flat string dicts for the journal) -------


def _patient_to_row(rec: PatientRecord) -> dict:
    return {
        "id": rec.id,
        "f_name": rec.first_name,
        "l_name": rec.last_name,
        "emergency_contact1": rec.emergency_contact1,
        "emergency_contact2": rec.emergency_contact2 or "",
        "birth_date": fmt_date(rec.birth_date),
        "disease_name": rec.disease_name,
        "reg_date": fmt_date(rec.reg_date),
    }


def _row_to_patient(row: dict) -> PatientRecord:
    return PatientRecord(
        id=row["id"],
        first_name=row["f_name"],
        last_name=row["l_name"],
        emergency_contact1=row["emergency_contact1"],
        emergency_contact2=row["emergency_contact2"] or None,
        birth_date=parse_date(row["birth_date"]),
        disease_name=row["disease_name"],
        reg_date=parse_date(row["reg_date"]),
    )


def _row_to_esc(row: dict) -> EscRecord:
    return EscRecord(
        id=row["id"],
        latitude=row["latitude"],
        longitude=row["longitude"],
        status=EscStatus(row["status"]),
    )


def _request_to_row(req: HelpRequest) -> dict:
    return {
        "patient_id": req.patient_id,
        "request_time": fmt_ts(req.request_time),
        "received_time": fmt_ts(req.received_time),
        "latitude": req.latitude,
        "longitude": req.longitude,
        "is_reserved": "t" if req.is_reserved else "f",
        "terminal_id": req.terminal_id or "",
    }


def _row_to_request(row: dict) -> HelpRequest:
    return HelpRequest(
        patient_id=row["patient_id"],
        request_time=parse_ts(row["request_time"]),
        received_time=parse_ts(row["received_time"]),
        latitude=row["latitude"],
        longitude=row["longitude"],
        is_reserved=row["is_reserved"] == "t",
        terminal_id=row["terminal_id"] or None,
    )


def _handled_to_row(handled: HandledRequest) -> dict:
    return {
        "patient_id": handled.patient_id,
        "request_time": fmt_ts(handled.request_time),
        "received_time": fmt_ts(handled.received_time),
        "received_time2": fmt_ts(handled.received_time2) if handled.received_time2 else "",
        "latitude": handled.latitude,
        "longitude": handled.longitude,
        "reply_time": fmt_ts(handled.reply_time),
        "esc_id": handled.esc_id,
    }


def _row_to_handled(row: dict) -> HandledRequest:
    return HandledRequest(
        patient_id=row["patient_id"],
        request_time=parse_ts(row["request_time"]),
        received_time=parse_ts(row["received_time"]),
        received_time2=parse_ts(row["received_time2"]) if row["received_time2"] else None,
        latitude=row["latitude"],
        longitude=row["longitude"],
        reply_time=parse_ts(row["reply_time"]),
        esc_id=row["esc_id"],
    )


def _row_to_csv(table: str, row: dict) -> list[str]:
    if table == storage.REGISTRATION:
        return [row["id"], row["f_name"], row["l_name"], row["emergency_contact1"],
                row["emergency_contact2"], row["birth_date"], row["disease_name"], row["reg_date"]]
    if table == storage.ESC:
        return [row["id"], row["latitude"], row["longitude"]]
    if table == storage.NEW_REQUEST:
        return [row["patient_id"], row["request_time"], row["received_time"],
                row["latitude"], row["longitude"], row["is_reserved"], row["terminal_id"]]
    return [row["patient_id"], row["request_time"], row["received_time"], row["received_time2"],
            row["latitude"], row["longitude"], row["reply_time"], row["esc_id"]]


def _csv_to_row(table: str, values: list[str]) -> tuple[str, dict]:
    if table == storage.REGISTRATION:
        row = {
            "id": values[0], "f_name": values[1], "l_name": values[2],
            "emergency_contact1": values[3], "emergency_contact2": values[4],
            "birth_date": fmt_date(parse_date(values[5])),
            "disease_name": values[6],
            "reg_date": fmt_date(parse_date(values[7])),
        }
        return row["id"], row
    if table == storage.ESC:
        row = {"id": values[0], "latitude": values[1], "longitude": values[2],
               "status": EscStatus.FREE.value}
        return row["id"], row
    if table == storage.NEW_REQUEST:
        row = {
            "patient_id": values[0],
            "request_time": fmt_ts(parse_ts(values[1])),
            "received_time": fmt_ts(parse_ts(values[2])),
            "latitude": values[3], "longitude": values[4],
            "is_reserved": values[5], "terminal_id": values[6],
        }
        if row["is_reserved"] not in ("t", "f"):
            raise ValidationError(f"isReserved must be 't' or 'f', got {row['is_reserved']!r}")
        return _key_from_row(row), row
    row = {
        "patient_id": values[0],
        "request_time": fmt_ts(parse_ts(values[1])),
        "received_time": fmt_ts(parse_ts(values[2])),
        "received_time2": fmt_ts(parse_ts(values[3])) if values[3] else "",
        "latitude": values[4], "longitude": values[5],
        "reply_time": fmt_ts(parse_ts(values[6])),
        "esc_id": values[7],
    }
    return _key_from_row(row), row


def _key_from_row(row: dict) -> str:
    return make_request_key(row["patient_id"], parse_ts(row["request_time"]))
