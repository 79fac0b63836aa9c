"""Request lifecycle: receive, reserve the nearest free unit, notify, track.

All state transitions (submit, ack, complete, queue drain) are linearized
through one lock, so check-nearest-then-reserve is a single atomic action
and no unit can ever be double-booked. Notification fan-out runs on a
worker pool after the state commit and never holds that lock.

Every assignment and release is appended to a sequenced dispatch log that
an external checker can replay against a brute-force nearest-free oracle.
"""

from __future__ import annotations

import concurrent.futures
import logging
import threading
import time
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timedelta

from .errors import (
    BadStateError,
    DuplicateRequestError,
    NotFoundError,
    UnknownEscError,
    UnknownPatientError,
    ValidationError,
    WrongTerminalError,
)
from .geocode import reverse_geocode
from .geodesy import EARTH_RADIUS_KM, GeoPoint, rank_by_distance
from .model import (
    Assignment,
    EscRecord,
    EscStatus,
    HandledRequest,
    HelpRequest,
    QueuedAck,
    RequestState,
    color_for,
    fmt_coord,
    fmt_ts,
    truncate_ms,
)
from .notifier import HospitalEndpoint, Notifier
from .registry import Registry

logger = logging.getLogger(__name__)

_MS = timedelta(milliseconds=1)


class Clock:
    """Millisecond-precision wall clock that never runs backwards.

    Consecutive reads are strictly increasing, which keeps per-request
    timestamp chains monotone even if the system clock steps back.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._last = datetime.min

    def now(self) -> datetime:
        with self._lock:
            t = truncate_ms(datetime.now())
            if t <= self._last:
                t = self._last + _MS
            self._last = t
            return t


class AssignmentChannel:
    """Per-unit pending assignment payloads for the push/long-poll surface.

    Payloads are retained until a poll picks them up, so an assignment made
    while the terminal is offline is delivered on its next subscription.
    A payload is handed out exactly once.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._pending: dict[str, deque] = defaultdict(deque)
        self._closed = False

    def publish(self, esc_id: str, payload: dict) -> None:
        with self._cond:
            self._pending[esc_id].append(payload)
            self._cond.notify_all()

    def poll(self, esc_id: str, timeout: float) -> list[dict]:
        """Pop everything pending for ``esc_id``, waiting up to ``timeout``
        seconds for the first payload. Empty list on timeout."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while not self._pending[esc_id] and not self._closed:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                self._cond.wait(remaining)
            queue = self._pending[esc_id]
            out = list(queue)
            queue.clear()
            return out

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class _LiveState:
    __slots__ = ("state", "esc_id", "assigned_at", "ack_time")

    def __init__(self, state: RequestState, esc_id: str | None = None,
                 assigned_at: datetime | None = None, ack_time: datetime | None = None):
        self.state = state
        self.esc_id = esc_id
        self.assigned_at = assigned_at
        self.ack_time = ack_time


class Dispatcher:
    """Drives help requests through RECEIVED -> RESERVED -> ACKNOWLEDGED -> HANDLED."""

    def __init__(
        self,
        registry: Registry,
        notifier: Notifier | None = None,
        hospital: HospitalEndpoint | None = None,
        radius_km: float = EARTH_RADIUS_KM,
        clock: Clock | None = None,
        geocoder=None,
        notify_workers: int = 4,
    ):
        self.registry = registry
        self.notifier = notifier
        self.hospital = hospital
        self.geocoder = geocoder
        self.radius_km = radius_km
        self.clock = clock or Clock()
        self.channel = AssignmentChannel()
        self._lock = threading.RLock()
        self._states: dict[str, _LiveState] = {}
        self._queue: deque[str] = deque()
        self._events: list[dict] = []
        self._seq = 0
        self._submitted = 0
        self._rejected = 0
        self._notify_pool = ThreadPoolExecutor(max_workers=notify_workers,
                                               thread_name_prefix="notify")
        self._notify_futures: deque = deque(maxlen=256)

    # -- lifecycle operations ---------------------------------------------------

    def submit_help(self, patient_id: str, location: GeoPoint,
                    request_time: datetime) -> Assignment | QueuedAck:
        """Persist the request, then atomically reserve the nearest free unit.

        Falls back to a FIFO queue when the whole fleet is busy.
        """
        with self._lock:
            self._submitted += 1
            try:
                try:
                    patient = self.registry.get_patient(patient_id)
                except NotFoundError:
                    raise UnknownPatientError(f"patient {patient_id} is not registered") from None
                request_time = truncate_ms(request_time)
                if self.registry.live_request_for_patient(patient_id) is not None:
                    raise DuplicateRequestError(f"patient {patient_id} already has a live request")
                received_time = self.clock.now()
                req = HelpRequest(
                    patient_id=patient_id,
                    request_time=request_time,
                    received_time=received_time,
                    latitude=fmt_coord(location.lat_deg),
                    longitude=fmt_coord(location.lon_deg),
                )
                self.registry.add_request(req)  # raises DUPLICATE on key reuse
                self._states[req.key] = _LiveState(RequestState.RECEIVED)

                free = self._free_fleet()
                if not free:
                    self._queue.append(req.key)
                    return QueuedAck(patient_id, request_time, received_time,
                                     position=len(self._queue))
                assignment = self._reserve(req.key, patient, location, free)
            except Exception:
                self._rejected += 1
                raise
        self._schedule_fan_out(patient, location)
        return assignment

    def esc_ack(self, key: str, esc_id: str, ack_time: datetime | None = None) -> RequestState:
        with self._lock:
            st = self._states.get(key)
            if st is None or st.state is not RequestState.RESERVED:
                raise BadStateError(f"request {key} is not awaiting acknowledgment")
            if st.esc_id != esc_id:
                raise WrongTerminalError(f"request {key} is not assigned to {esc_id}")
            st.ack_time = truncate_ms(ack_time) if ack_time else self.clock.now()
            st.state = RequestState.ACKNOWLEDGED
            return st.state

    def esc_complete(self, key: str, esc_id: str,
                     reply_time: datetime | None = None) -> HandledRequest:
        """Move the request to the handled table and free its unit; if anything
        is queued, the oldest request is dispatched immediately."""
        with self._lock:
            st = self._states.get(key)
            if st is None or st.state not in (RequestState.RESERVED, RequestState.ACKNOWLEDGED):
                raise BadStateError(f"request {key} is not assigned")
            if st.esc_id != esc_id:
                raise WrongTerminalError(f"request {key} is not assigned to {esc_id}")
            req = self.registry.get_request(key)
            reply_time = truncate_ms(reply_time) if reply_time else self.clock.now()
            handled = HandledRequest(
                patient_id=req.patient_id,
                request_time=req.request_time,
                received_time=req.received_time,
                received_time2=st.ack_time or reply_time,
                latitude=req.latitude,
                longitude=req.longitude,
                reply_time=reply_time,
                esc_id=esc_id,
            )
            self.registry.complete_request(key, handled)
            self.registry.set_esc_status(esc_id, EscStatus.FREE)
            self._log_event("released", esc_id, key, req.patient_id)
            del self._states[key]
            drained = self._drain_queue()
        for patient, location in drained:
            self._schedule_fan_out(patient, location)
        return handled

    def upsert_esc(self, rec: EscRecord) -> None:
        """Register or edit a unit; a newly free unit drains the queue."""
        drained = []
        with self._lock:
            self.registry.upsert_esc(rec)
            drained = self._drain_queue()
        for patient, location in drained:
            self._schedule_fan_out(patient, location)

    # -- views -----------------------------------------------------------------

    def list_requests(self, status: str = "ALL") -> list[dict]:
        status = status.upper()
        if status not in ("NEW", "HANDLED", "ALL"):
            raise ValidationError(f"unknown status filter {status!r}")
        out = []
        with self._lock:
            if status in ("NEW", "ALL"):
                for req in self.registry.list_new_requests():
                    st = self._states.get(req.key)
                    state = st.state if st else (
                        RequestState.RESERVED if req.is_reserved else RequestState.RECEIVED)
                    out.append(self._live_view(req, state))
            if status in ("HANDLED", "ALL"):
                for handled in self.registry.list_handled_requests():
                    out.append(self._handled_view(handled))
        return out

    def request_state(self, key: str) -> RequestState:
        with self._lock:
            st = self._states.get(key)
            if st is not None:
                return st.state
            try:
                req = self.registry.get_request(key)
                return RequestState.RESERVED if req.is_reserved else RequestState.RECEIVED
            except NotFoundError:
                self.registry.get_handled(key)  # raises NOT_FOUND if truly unknown
                return RequestState.HANDLED

    def stats(self) -> dict:
        with self._lock:
            counts = self.registry.counts()
            live = counts["new_requests"]
            queued = len(self._queue)
            return {
                "submitted": self._submitted,
                "rejected": self._rejected,
                "assigned_live": live - queued,
                "queued": queued,
                "handled": counts["handled_requests"],
                "escs_free": counts["escs_free"],
                "escs_reserved": counts["escs_reserved"],
            }

    def dispatch_log(self, since_seq: int = 0) -> list[dict]:
        with self._lock:
            return [dict(ev) for ev in self._events if ev["seq"] > since_seq]

    # -- helpers ---------------------------------------------------------------

    def _free_fleet(self) -> list[tuple[str, GeoPoint]]:
        return [(esc.id, esc.location) for esc in self.registry.list_escs()
                if esc.status is EscStatus.FREE]

    def _reserve(self, key: str, patient, location: GeoPoint,
                 free: list[tuple[str, GeoPoint]]) -> Assignment:
        """Pick the nearest free unit and flip it to RESERVED. Lock held."""
        esc_id, distance_km = rank_by_distance(location, free, self.radius_km)[0]
        self.registry.set_esc_status(esc_id, EscStatus.RESERVED)
        self.registry.update_request_reservation(key, True, esc_id)
        assigned_at = self.clock.now()
        st = self._states[key]
        st.state = RequestState.RESERVED
        st.esc_id = esc_id
        st.assigned_at = assigned_at
        req = self.registry.get_request(key)
        self._log_event("assigned", esc_id, key, req.patient_id,
                        lat=location.lat_deg, lon=location.lon_deg,
                        distance_km=distance_km)
        assignment = Assignment(req.patient_id, req.request_time, esc_id,
                                distance_km, assigned_at)
        self.channel.publish(esc_id, {
            "request_key": key,
            "patient_id": patient.id,
            "patient_name": patient.full_name,
            "disease_name": patient.disease_name,
            "latitude": location.lat_deg,
            "longitude": location.lon_deg,
            "distance_km": distance_km,
            "assigned_at": fmt_ts(assigned_at),
        })
        return assignment

    def _drain_queue(self) -> list[tuple]:
        """Assign queued requests (oldest first) while any unit is free.
        Lock held. Returns (patient, location) pairs needing fan-out."""
        drained = []
        while self._queue:
            free = self._free_fleet()
            if not free:
                break
            key = self._queue.popleft()
            req = self.registry.get_request(key)
            patient = self.registry.get_patient(req.patient_id)
            location = req.location
            self._reserve(key, patient, location, free)
            drained.append((patient, location))
        return drained

    def _log_event(self, event: str, esc_id: str, key: str, patient_id: str,
                   lat: float | None = None, lon: float | None = None,
                   distance_km: float | None = None) -> None:
        self._seq += 1
        entry = {
            "seq": self._seq,
            "event": event,
            "ts": fmt_ts(self.clock.now()),
            "esc_id": esc_id,
            "request_key": key,
            "patient_id": patient_id,
        }
        if event == "assigned":
            entry.update({"latitude": lat, "longitude": lon, "distance_km": distance_km})
        self._events.append(entry)

    def _schedule_fan_out(self, patient, location: GeoPoint) -> None:
        if self.notifier is None or self.hospital is None:
            return
        future = self._notify_pool.submit(
            self._fan_out_safely, patient, location)
        self._notify_futures.append(future)

    def _fan_out_safely(self, patient, location: GeoPoint) -> None:
        try:
            address = reverse_geocode(self.geocoder, location)
            self.notifier.fan_out(patient, location, self.hospital, address=address)
        except Exception:
            logger.exception("notification fan-out failed for patient %s", patient.id)

    def flush_notifications(self, timeout: float = 10.0) -> None:
        """Wait for scheduled fan-outs to finish (tests and shutdown)."""
        pending = list(self._notify_futures)
        if pending:
            concurrent.futures.wait(pending, timeout=timeout)

    def _live_view(self, req: HelpRequest, state: RequestState) -> dict:
        st = self._states.get(req.key)
        patient_name = self._patient_name(req.patient_id)
        return {
            "request_key": req.key,
            "patient_id": req.patient_id,
            "patient_name": patient_name,
            "request_time": fmt_ts(req.request_time),
            "received_time": fmt_ts(req.received_time),
            "latitude": req.location.lat_deg,
            "longitude": req.location.lon_deg,
            "is_reserved": "t" if req.is_reserved else "f",
            "terminal_id": req.terminal_id,
            "state": state.value,
            "color": color_for(state),
            "received_time2": fmt_ts(st.ack_time) if st and st.ack_time else None,
        }

    def _handled_view(self, handled: HandledRequest) -> dict:
        return {
            "request_key": handled.key,
            "patient_id": handled.patient_id,
            "patient_name": self._patient_name(handled.patient_id),
            "request_time": fmt_ts(handled.request_time),
            "received_time": fmt_ts(handled.received_time),
            "received_time2": fmt_ts(handled.received_time2) if handled.received_time2 else None,
            "reply_time": fmt_ts(handled.reply_time),
            "latitude": handled.location.lat_deg,
            "longitude": handled.location.lon_deg,
            "is_reserved": None,
            "terminal_id": handled.esc_id,
            "state": RequestState.HANDLED.value,
            "color": color_for(RequestState.HANDLED),
        }

    def _patient_name(self, patient_id: str) -> str | None:
        try:
            return self.registry.get_patient(patient_id).full_name
        except NotFoundError:
            return None

    def require_esc(self, esc_id: str) -> EscRecord:
        try:
            return self.registry.get_esc(esc_id)
        except NotFoundError:
            raise UnknownEscError(f"esc {esc_id} is not registered") from None

    def close(self) -> None:
        self.channel.close()
        self._notify_pool.shutdown(wait=True)
