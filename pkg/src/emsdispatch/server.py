"""HTTP/JSON wire surface over the registry and dispatcher.

Endpoints:

    GET  /health
    POST /patients                    register a patient
    GET  /patients/{id}
    PUT  /patients/{id}               update mutable fields
    POST /help                        submit a help request (request-reply)
    GET  /requests?status=new|handled|all
    POST /requests/{key}/ack          body: {"terminal_id": ...}
    POST /requests/{key}/complete     body: {"terminal_id": ...}
    GET  /escs
    POST /escs                        create a unit
    GET  /escs/{id}
    PUT  /escs/{id}                   edit coordinates
    GET  /escs/{id}/assignments       long-poll for pushed assignments
    GET  /stats                       live counters (load harness drain)
    GET  /assignments/log?since=N     sequenced assign/release event feed

Errors are JSON {"error": CODE, "message": ...} with the natural HTTP
status for the code. Timestamps use "YYYY-MM-DD HH:MM:SS.mmm" throughout.

Built on the stdlib threading server: one thread per connection suits the
long-poll channel (a waiting poll parks its thread without starving an
event loop) and keeps the dependency surface small.
"""

from __future__ import annotations

import json
import logging
import threading
from datetime import date, datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

from .config import ServiceConfig
from .dispatcher import Dispatcher
from .errors import (
    BindError,
    DispatchError,
    NotFoundError,
    StorageError,
    ValidationError,
)
from .geocode import build_geocoder, reverse_geocode
from .geodesy import GeoPoint
from .model import (
    EscRecord,
    PatientRecord,
    fmt_date,
    fmt_ts,
    parse_coord,
    parse_date,
    parse_ts,
)
from .notifier import HospitalEndpoint, Notifier, build_transport
from .registry import MUTABLE_PATIENT_FIELDS, Registry, builtin_fixture_dir
from .storage import open_backend

logger = logging.getLogger(__name__)

MAX_BODY_BYTES = 1 << 20

STATUS_FOR_CODE = {
    "VALIDATION": 400,
    "NOT_FOUND": 404,
    "UNKNOWN_PATIENT": 404,
    "UNKNOWN_ESC": 404,
    "UNKNOWN_TABLE": 404,
    "DUPLICATE": 409,
    "DUPLICATE_ID": 409,
    "WRONG_TERMINAL": 409,
    "BAD_STATE": 409,
    "EMPTY_FLEET": 409,
    "STORAGE_FAILURE": 500,
}


class ServiceApp:
    """Wires storage, registry, notifier, geocoder, and dispatcher together
    and exposes one method per endpoint. The HTTP handler only routes."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.backend = open_backend(config.store)
        self.registry = Registry(self.backend)
        self.transport = build_transport(config.sms_transport)
        hospital = HospitalEndpoint(config.hospital_name, config.hospital_msisdn).validate()
        self.notifier = Notifier(self.transport)
        self.geocoder = build_geocoder(config.geocoder)
        self.dispatcher = Dispatcher(
            self.registry,
            notifier=self.notifier,
            hospital=hospital,
            radius_km=config.radius_km,
            geocoder=self.geocoder,
        )

    def load_fixtures(self, source: str) -> None:
        path = builtin_fixture_dir() if source == "builtin" else source
        self.registry.load_fixture_dir(path)

    def close(self) -> None:
        self.dispatcher.close()
        self.backend.close()

    # -- endpoint bodies: each returns (http_status, payload dict) --------------

    def health(self) -> tuple[int, dict]:
        return 200, {"status": "ok", "counts": self.registry.counts()}

    def register_patient(self, body: dict) -> tuple[int, dict]:
        rec = PatientRecord(
            id=_str_field(body, "id"),
            first_name=_str_field(body, "first_name"),
            last_name=_str_field(body, "last_name"),
            emergency_contact1=_str_field(body, "emergency_contact1"),
            emergency_contact2=_str_field(body, "emergency_contact2", required=False),
            birth_date=_date_field(body, "birth_date"),
            disease_name=_str_field(body, "disease_name"),
            reg_date=_date_field(body, "reg_date", required=False) or date.today(),
        )
        self.registry.register_patient(rec)
        return 201, _patient_payload(rec)

    def get_patient(self, patient_id: str) -> tuple[int, dict]:
        return 200, _patient_payload(self.registry.get_patient(patient_id))

    def update_patient(self, patient_id: str, body: dict) -> tuple[int, dict]:
        fields = {}
        for name in body:
            if name not in MUTABLE_PATIENT_FIELDS:
                raise ValidationError(f"field {name!r} is not updatable")
        for name in MUTABLE_PATIENT_FIELDS & body.keys():
            if name == "birth_date":
                fields[name] = _date_field(body, name)
            else:
                fields[name] = _str_field(body, name,
                                          required=name != "emergency_contact2")
        if not fields:
            raise ValidationError("no updatable fields in body")
        rec = self.registry.update_patient(patient_id, **fields)
        return 200, _patient_payload(rec)

    def submit_help(self, body: dict) -> tuple[int, dict]:
        patient_id = _str_field(body, "patient_id")
        loc = GeoPoint(_coord_field(body, "latitude"), _coord_field(body, "longitude"))
        request_time = _ts_field(body, "request_time")
        outcome = self.dispatcher.submit_help(patient_id, loc, request_time)
        if hasattr(outcome, "esc_id"):
            return 200, {
                "outcome": "ASSIGNED",
                "request_key": outcome.request_key,
                "patient_id": outcome.patient_id,
                "esc_id": outcome.esc_id,
                "distance_km": outcome.distance_km,
                "assigned_at": fmt_ts(outcome.assigned_at),
            }
        return 200, {
            "outcome": "QUEUED",
            "request_key": outcome.request_key,
            "patient_id": outcome.patient_id,
            "position": outcome.position,
            "received_time": fmt_ts(outcome.received_time),
        }

    def list_requests(self, status: str) -> tuple[int, dict]:
        rows = self.dispatcher.list_requests(status)
        for row in rows:
            row["address"] = reverse_geocode(
                self.geocoder, GeoPoint(row["latitude"], row["longitude"]))
        return 200, {"requests": rows}

    def ack_request(self, key: str, body: dict) -> tuple[int, dict]:
        terminal_id = _str_field(body, "terminal_id")
        self.dispatcher.require_esc(terminal_id)
        state = self.dispatcher.esc_ack(key, terminal_id)
        return 200, {"request_key": key, "state": state.value}

    def complete_request(self, key: str, body: dict) -> tuple[int, dict]:
        terminal_id = _str_field(body, "terminal_id")
        self.dispatcher.require_esc(terminal_id)
        handled = self.dispatcher.esc_complete(key, terminal_id)
        return 200, {
            "request_key": handled.key,
            "state": "HANDLED",
            "esc_id": handled.esc_id,
            "reply_time": fmt_ts(handled.reply_time),
            "received_time2": fmt_ts(handled.received_time2) if handled.received_time2 else None,
        }

    def list_escs(self) -> tuple[int, dict]:
        return 200, {"escs": [_esc_payload(e) for e in self.registry.list_escs()]}

    def get_esc(self, esc_id: str) -> tuple[int, dict]:
        return 200, _esc_payload(self.registry.get_esc(esc_id))

    def upsert_esc(self, esc_id: str, body: dict, create: bool) -> tuple[int, dict]:
        loc = GeoPoint(_coord_field(body, "latitude"), _coord_field(body, "longitude"))
        if create and _exists_esc(self.registry, esc_id):
            raise ValidationError(f"esc {esc_id} already exists; PUT /escs/{esc_id} to edit")
        if not create:
            self.registry.get_esc(esc_id)  # NOT_FOUND if absent
        self.dispatcher.upsert_esc(EscRecord.at(esc_id, loc.lat_deg, loc.lon_deg))
        return (201 if create else 200), _esc_payload(self.registry.get_esc(esc_id))

    def poll_assignments(self, esc_id: str, timeout_s: float | None) -> tuple[int, dict]:
        self.dispatcher.require_esc(esc_id)
        timeout = self.config.poll_timeout_s if timeout_s is None else timeout_s
        timeout = max(0.0, min(timeout, 60.0))
        payloads = self.dispatcher.channel.poll(esc_id, timeout)
        return 200, {"esc_id": esc_id, "assignments": payloads}

    def stats(self) -> tuple[int, dict]:
        return 200, self.dispatcher.stats()

    def assignment_log(self, since: int) -> tuple[int, dict]:
        return 200, {"events": self.dispatcher.dispatch_log(since_seq=since)}


def _exists_esc(registry: Registry, esc_id: str) -> bool:
    try:
        registry.get_esc(esc_id)
        return True
    except NotFoundError:
        return False


# -- wire field validation -------------------------------------------------------


def _body_error(name: str, why: str) -> ValidationError:
    return ValidationError(f"field {name!r} {why}")


def _str_field(body: dict, name: str, required: bool = True) -> str | None:
    value = body.get(name)
    if value is None or value == "":
        if required:
            raise _body_error(name, "is required")
        return None
    if not isinstance(value, str):
        raise _body_error(name, "must be a string")
    return value.strip()


def _coord_field(body: dict, name: str) -> float:
    value = body.get(name)
    if value is None:
        raise _body_error(name, "is required")
    if isinstance(value, bool):
        raise _body_error(name, "must be a number")
    if isinstance(value, str):
        try:
            value = parse_coord(value)
        except ValidationError:
            raise _body_error(name, f"is not a number: {value!r}") from None
    if not isinstance(value, (int, float)):
        raise _body_error(name, "must be a number")
    return float(value)


def _ts_field(body: dict, name: str, required: bool = True) -> datetime | None:
    raw = _str_field(body, name, required)
    if raw is None:
        return None
    try:
        return parse_ts(raw)
    except ValidationError:
        raise _body_error(name, f'must look like "YYYY-MM-DD HH:MM:SS.mmm", got {raw!r}') from None


def _date_field(body: dict, name: str, required: bool = True) -> date | None:
    raw = _str_field(body, name, required)
    if raw is None:
        return None
    try:
        return parse_date(raw)
    except ValidationError:
        raise _body_error(name, f'must look like "YYYY-MM-DD", got {raw!r}') from None


def _patient_payload(rec: PatientRecord) -> dict:
    return {
        "id": rec.id,
        "first_name": rec.first_name,
        "last_name": rec.last_name,
        "emergency_contact1": rec.emergency_contact1,
        "emergency_contact2": rec.emergency_contact2,
        "birth_date": fmt_date(rec.birth_date),
        "disease_name": rec.disease_name,
        "reg_date": fmt_date(rec.reg_date),
    }


def _esc_payload(rec: EscRecord) -> dict:
    return {
        "id": rec.id,
        "latitude": rec.location.lat_deg,
        "longitude": rec.location.lon_deg,
        "status": rec.status.value,
    }


# -- HTTP plumbing ---------------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    timeout = 75  # reap idle keep-alive connections; longer than any poll wait
    app: ServiceApp = None  # set by make_server on the handler subclass

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_OPTIONS(self):
        # CORS preflight for browser clients; JSON POSTs are non-simple requests
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Max-Age", "600")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _dispatch(self, method: str) -> None:
        try:
            status, payload = self._route(method)
        except DispatchError as exc:
            status = STATUS_FOR_CODE.get(exc.code, 500)
            payload = {"error": exc.code, "message": exc.message}
        except Exception:
            logger.exception("unhandled error serving %s %s", method, self.path)
            status = 500
            payload = {"error": "INTERNAL", "message": "internal error"}
        try:
            self._reply(status, payload)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client gave up; nothing to salvage

    def _route(self, method: str) -> tuple[int, dict]:
        url = urlsplit(self.path)
        parts = [unquote(p) for p in url.path.split("/") if p]
        query = parse_qs(url.query)
        app = self.app

        if method == "GET":
            if parts == ["health"]:
                return app.health()
            if parts == ["stats"]:
                return app.stats()
            if parts == ["requests"]:
                return app.list_requests(_one(query, "status", "all"))
            if parts == ["escs"]:
                return app.list_escs()
            if len(parts) == 2 and parts[0] == "patients":
                return app.get_patient(parts[1])
            if len(parts) == 2 and parts[0] == "escs":
                return app.get_esc(parts[1])
            if len(parts) == 3 and parts[0] == "escs" and parts[2] == "assignments":
                return app.poll_assignments(parts[1], _float_param(query, "timeout_s"))
            if parts == ["assignments", "log"]:
                return app.assignment_log(_int_param(query, "since", 0))
        elif method == "POST":
            if parts == ["patients"]:
                return app.register_patient(self._json_body())
            if parts == ["help"]:
                return app.submit_help(self._json_body())
            if parts == ["escs"]:
                body = self._json_body()
                return app.upsert_esc(_str_field(body, "id"), body, create=True)
            if len(parts) == 3 and parts[0] == "requests" and parts[2] == "ack":
                return app.ack_request(parts[1], self._json_body())
            if len(parts) == 3 and parts[0] == "requests" and parts[2] == "complete":
                return app.complete_request(parts[1], self._json_body())
        elif method == "PUT":
            if len(parts) == 2 and parts[0] == "patients":
                return app.update_patient(parts[1], self._json_body())
            if len(parts) == 2 and parts[0] == "escs":
                return app.upsert_esc(parts[1], self._json_body(), create=False)
        raise NotFoundError(f"no route for {method} {url.path}")

    def _json_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY_BYTES:
            raise ValidationError(f"body exceeds {MAX_BODY_BYTES} bytes")
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValidationError("request body must be a JSON object")
        try:
            body = json.loads(raw)
        except ValueError:
            raise ValidationError("request body is not valid JSON") from None
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        return body

    def _reply(self, status: int, payload: dict) -> None:
        blob = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        logger.debug("%s - %s", self.address_string(), format % args)


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 128  # survive connection stampedes from many clients


def make_server(app: ServiceApp) -> ThreadingHTTPServer:
    """Bind the configured address and return the (not yet running) server."""
    handler = type("BoundHandler", (_Handler,), {"app": app})
    try:
        return _Server((app.config.host, app.config.port), handler)
    except OSError as exc:
        raise BindError(
            f"cannot bind {app.config.host}:{app.config.port}: {exc}") from exc


def serve(config: ServiceConfig, fixtures: str | None = None) -> int:
    """Run until SIGINT/SIGTERM. Returns the process exit code."""
    import signal

    try:
        app = ServiceApp(config)
    except (StorageError, ValidationError) as exc:
        logger.error("startup failed: %s", exc.message)
        return 2
    if fixtures:
        # seed the live backend: works for memory stores too, where priming
        # a separate throwaway backend would be lost before the bind
        try:
            app.load_fixtures(fixtures)
        except DispatchError as exc:
            logger.error("fixture load failed: %s", exc.message)
            app.close()
            return 2
    try:
        server = make_server(app)
    except BindError as exc:
        logger.error("startup failed: %s", exc.message)
        app.close()
        return 2

    stop = threading.Event()

    def _signal(_signum, _frame):
        stop.set()

    signal.signal(signal.SIGINT, _signal)
    signal.signal(signal.SIGTERM, _signal)

    thread = threading.Thread(target=server.serve_forever, name="http", daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    logger.info("listening on %s:%s (store=%s)", host, port, config.store)
    print(f"emsdispatch listening on http://{host}:{port}", flush=True)
    try:
        stop.wait()
    finally:
        app.dispatcher.channel.close()  # wake parked long-polls before shutdown
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
        app.close()
    return 0


class BackgroundServer:
    """In-process server for tests: start, use base_url, then close()."""

    def __init__(self, config: ServiceConfig):
        self.app = ServiceApp(config)
        self.server = make_server(self.app)
        host, port = self.server.server_address[:2]
        self.base_url = f"http://{host}:{port}"
        self.port = port
        self._thread = threading.Thread(target=self.server.serve_forever,
                                        name="http-test", daemon=True)
        self._thread.start()

    def close(self) -> None:
        self.app.dispatcher.channel.close()
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)
        self.app.close()


def _one(query: dict, name: str, default: str) -> str:
    values = query.get(name)
    return values[0] if values else default


def _float_param(query: dict, name: str) -> float | None:
    values = query.get(name)
    if not values:
        return None
    try:
        return float(values[0])
    except ValueError:
        raise ValidationError(f"query param {name!r} must be a number") from None


def _int_param(query: dict, name: str, default: int) -> int:
    values = query.get(name)
    if not values:
        return default
    try:
        return int(values[0])
    except ValueError:
        raise ValidationError(f"query param {name!r} must be an integer") from None
