"""Load generator and reconciliation checker for a running dispatch service.

Drives the full pipeline over the wire: registers a deterministic world of
patients and units, submits help requests at a fixed rate while simulated
unit terminals long-poll, acknowledge, and complete their assignments, then
waits for the system to drain and audits the run:

  * every assignment event in the server's dispatch log is replayed against
    a local brute-force nearest-free-unit scan (mismatches must be zero);
  * conservation: submitted = live + queued + handled + rejected.

The target store must start quiescent (no live requests, no reserved
units); the generator refuses to run otherwise, since the replay starts
from an all-free fleet.

CLI:

    emsdispatch-loadgen gen --seed 42 --patients 100 --escs 10 --out ./world
    emsdispatch-loadgen run --target http://127.0.0.1:8350 --rate 5 \\
        --duration 10 --seed 42 --report report.json
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import random
import sys
import threading
import time
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta

import requests

from .errors import TargetUnreachableError, ValidationError
from .geodesy import GeoPoint, haversine_km
from .model import EscRecord, PatientRecord, fmt_date, fmt_ts
from .registry import Registry
from .storage import MemoryBackend

logger = logging.getLogger(__name__)

DEFAULT_BBOX = (36.84, 42.96, 36.88, 43.01)  # lat_min, lon_min, lat_max, lon_max
REQUEST_TIME_BASE = datetime(2026, 1, 1, 0, 0, 0)

_FIRST_NAMES = [
    "Rose", "Suha", "Aram", "Dilan", "Hevi", "Karwan", "Lana", "Miran",
    "Narin", "Omar", "Peri", "Rojan", "Sara", "Tara", "Veyan", "Zane",
]
_LAST_NAMES = [
    "Maher", "Raml", "Barzan", "Doski", "Hassan", "Jamil", "Khalid",
    "Nermo", "Omer", "Qasim", "Rashid", "Salim", "Tahir", "Yousif",
]
_DISEASES = [
    "asthma", "diabetes", "epilepsy", "heart disease", "hypertension",
    "kidney failure", "none",
]


@dataclass
class World:
    seed: int
    bbox: tuple[float, float, float, float]
    patients: list[PatientRecord]
    escs: list[EscRecord]


def generate_world(seed: int, n_patients: int, n_escs: int,
                   bbox: tuple[float, float, float, float] = DEFAULT_BBOX) -> World:
    """Deterministic patients and units for a seed. Same seed, same world."""
    if n_patients < 1 or n_escs < 1:
        raise ValidationError("n_patients and n_escs must be >= 1")
    lat_min, lon_min, lat_max, lon_max = bbox
    if not (lat_min < lat_max and lon_min < lon_max):
        raise ValidationError(f"bad bounding box {bbox}")
    for lat in (lat_min, lat_max):
        if not -90.0 <= lat <= 90.0:
            raise ValidationError(f"bbox latitude {lat} out of range")
    for lon in (lon_min, lon_max):
        if not -180.0 <= lon <= 180.0:
            raise ValidationError(f"bbox longitude {lon} out of range")

    rng = random.Random(seed)
    patients = []
    for i in range(n_patients):
        birth = date(1950, 1, 1) + timedelta(days=rng.randrange(0, 365 * 60))
        reg = date(2013, 1, 1) + timedelta(days=rng.randrange(0, 365 * 12))
        patients.append(PatientRecord(
            id=f"0770{i:07d}",
            first_name=rng.choice(_FIRST_NAMES),
            last_name=rng.choice(_LAST_NAMES),
            emergency_contact1=f"075{rng.randrange(10**8):08d}",
            emergency_contact2=(f"076{rng.randrange(10**8):08d}"
                                if rng.random() < 0.5 else None),
            birth_date=birth,
            disease_name=rng.choice(_DISEASES),
            reg_date=reg,
        ))
    escs = []
    for i in range(n_escs):
        lat = round(rng.uniform(lat_min, lat_max), 6)
        lon = round(rng.uniform(lon_min, lon_max), 6)
        escs.append(EscRecord.at(f"LG{i:03d}", lat, lon))
    return World(seed=seed, bbox=bbox, patients=patients, escs=escs)


def write_world(world: World, out_dir: str) -> list[str]:
    """Materialize a world as the four-table CSV fixture layout."""
    import os

    registry = Registry(MemoryBackend())
    for patient in world.patients:
        registry.register_patient(patient)
    for esc in world.escs:
        registry.upsert_esc(esc)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for table in ("Registration", "ESC", "New_Request", "Request_Info"):
        path = os.path.join(out_dir, f"{table}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(registry.export_table(table))
        written.append(path)
    return written


@dataclass
class LoadReport:
    """Outcome of one run. ``submitted = accepted + failed`` always holds;
    a passing run has zero mismatches and exact conservation."""

    submitted: int = 0
    accepted: int = 0
    assigned: int = 0
    queued: int = 0
    failed: int = 0
    achieved_rps: float = 0.0
    p50_ms: float = 0.0
    p95_ms: float = 0.0
    p99_ms: float = 0.0
    oracle_mismatches: int = 0
    mismatch_details: list = field(default_factory=list)
    conservation_ok: bool = True
    drained: bool = True
    duration_s: float = 0.0
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        lines = [
            f"submitted {self.submitted}  accepted {self.accepted} "
            f"(assigned {self.assigned}, queued {self.queued})  failed {self.failed}",
            f"throughput {self.achieved_rps:.2f} req/s over {self.duration_s:.1f} s",
            f"latency ms p50 {self.p50_ms:.1f}  p95 {self.p95_ms:.1f}  p99 {self.p99_ms:.1f}",
            f"oracle mismatches {self.oracle_mismatches}  "
            f"conservation {'ok' if self.conservation_ok else 'BROKEN'}  "
            f"drained {'yes' if self.drained else 'NO'}",
        ]
        if self.errors:
            lines.append(f"first errors: {self.errors[:3]}")
        return "\n".join(lines)


def replay_log(events: list[dict], fleet: dict[str, GeoPoint]) -> list[str]:
    """Check every assignment decision against a brute-force nearest scan.

    ``fleet`` maps unit id to its coordinates; all units start free. Returns
    one description per mismatch (empty means the log is clean).
    """
    free = set(fleet)
    mismatches = []
    for ev in events:
        esc_id = ev["esc_id"]
        seq = ev["seq"]
        if esc_id not in fleet:
            mismatches.append(f"seq {seq}: unknown unit {esc_id}")
            continue
        if ev["event"] == "assigned":
            if esc_id not in free:
                mismatches.append(f"seq {seq}: {esc_id} assigned while busy")
                continue
            origin = GeoPoint(ev["latitude"], ev["longitude"])
            expect = _nearest_free(origin, free, fleet)
            if expect != esc_id:
                mismatches.append(
                    f"seq {seq}: assigned {esc_id}, oracle says {expect}")
            free.discard(esc_id)
        elif ev["event"] == "released":
            if esc_id in free:
                mismatches.append(f"seq {seq}: {esc_id} released while free")
            free.add(esc_id)
        else:
            mismatches.append(f"seq {seq}: unknown event {ev['event']!r}")
    return mismatches


def _nearest_free(origin: GeoPoint, free: set, fleet: dict) -> str:
    """Plain min scan with lexicographic id tie-break; deliberately not the
    sort-based ranking the service uses."""
    best_id = None
    best_d = math.inf
    for esc_id in free:
        d = haversine_km(origin, fleet[esc_id])
        if d < best_d or (d == best_d and (best_id is None or esc_id < best_id)):
            best_id = esc_id
            best_d = d
    return best_id


class EscSimulator(threading.Thread):
    """Terminal stand-in: long-poll for assignments, ack, then complete."""

    def __init__(self, base_url: str, esc_id: str, ack_ms: float, complete_ms: float,
                 stop: threading.Event, errors: list, errors_lock: threading.Lock):
        super().__init__(name=f"sim-{esc_id}", daemon=True)
        self.base_url = base_url
        self.esc_id = esc_id
        self.ack_s = ack_ms / 1000.0
        self.complete_s = complete_ms / 1000.0
        self.stop = stop
        self.errors = errors
        self.errors_lock = errors_lock

    def run(self):
        session = requests.Session()
        try:
            while not self.stop.is_set():
                try:
                    resp = session.get(
                        f"{self.base_url}/escs/{self.esc_id}/assignments",
                        params={"timeout_s": 1.0}, timeout=10)
                    resp.raise_for_status()
                    for payload in resp.json()["assignments"]:
                        self._service(session, payload["request_key"])
                except requests.RequestException as exc:
                    if self.stop.is_set():
                        break
                    self._record(f"sim {self.esc_id}: {exc}")
                    time.sleep(0.2)
        finally:
            session.close()

    def _service(self, session: requests.Session, key: str) -> None:
        time.sleep(self.ack_s)
        body = {"terminal_id": self.esc_id}
        try:
            resp = session.post(f"{self.base_url}/requests/{key}/ack",
                                json=body, timeout=10)
            if resp.status_code != 200:
                self._record(f"ack {key} -> {resp.status_code} {resp.text[:120]}")
                return
            time.sleep(self.complete_s)
            resp = session.post(f"{self.base_url}/requests/{key}/complete",
                                json=body, timeout=10)
            if resp.status_code != 200:
                self._record(f"complete {key} -> {resp.status_code} {resp.text[:120]}")
        except requests.RequestException as exc:
            self._record(f"sim {self.esc_id} servicing {key}: {exc}")

    def _record(self, message: str) -> None:
        with self.errors_lock:
            self.errors.append(message)


def run_load(
    target: str,
    rate: float,
    duration: float,
    seed: int = 42,
    n_escs: int = 10,
    ack_ms: float = 100.0,
    complete_ms: float = 500.0,
    bbox: tuple[float, float, float, float] = DEFAULT_BBOX,
    submit_workers: int | None = None,
    drain_timeout_s: float | None = None,
) -> LoadReport:
    """Paced load against ``target``; see module docstring for the audit."""
    if rate <= 0:
        raise ValidationError(f"rate must be positive, got {rate}")
    if duration < 0:
        raise ValidationError(f"duration must be >= 0, got {duration}")
    n = round(rate * duration)
    if n == 0:
        return LoadReport()

    base = target.rstrip("/")
    _probe(base)
    stats0 = _get_json(base, "/stats")
    if stats0["assigned_live"] or stats0["queued"] or stats0["escs_reserved"]:
        raise ValidationError(
            "target store is not quiescent (live or reserved state present); "
            "start the service on a fresh store")
    last_seq0 = max((ev["seq"] for ev in _get_json(base, "/assignments/log")["events"]),
                    default=0)

    world = generate_world(seed, n_patients=n, n_escs=n_escs, bbox=bbox)
    _setup_world(base, world)
    roster = {
        esc["id"]: GeoPoint(esc["latitude"], esc["longitude"])
        for esc in _get_json(base, "/escs")["escs"]
    }

    plan = _submission_plan(world, n, rate)
    stop = threading.Event()
    errors: list[str] = []
    errors_lock = threading.Lock()
    sims = [EscSimulator(base, esc_id, ack_ms, complete_ms, stop, errors, errors_lock)
            for esc_id in roster]
    for sim in sims:
        sim.start()

    results: list[dict] = [None] * n
    counter = itertools.count()
    workers = submit_workers or min(100, max(8, int(rate)))
    t0 = time.monotonic()

    def _submitter():
        session = requests.Session()
        try:
            while True:
                i = next(counter)
                if i >= n:
                    return
                fire_at, payload = plan[i]
                delay = t0 + fire_at - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                results[i] = _submit_one(session, base, payload)
        finally:
            session.close()

    threads = [threading.Thread(target=_submitter, name=f"submit-{w}", daemon=True)
               for w in range(min(workers, n))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    submit_window = time.monotonic() - t0

    drain_budget = drain_timeout_s
    if drain_budget is None:
        # worst case every request drains through one serial service pipeline
        drain_budget = 30.0 + n * (ack_ms + complete_ms) / 1000.0 / max(1, len(roster))
    drained = _wait_drained(base, deadline=time.monotonic() + drain_budget)
    events = _get_json(base, "/assignments/log", params={"since": last_seq0})["events"]
    stop.set()
    for sim in sims:
        sim.join(timeout=5)

    mismatches = replay_log(events, roster)
    stats1 = _get_json(base, "/stats")
    report = _build_report(results, submit_window, mismatches, errors,
                           stats0, stats1, drained)
    return report


def _submission_plan(world: World, n: int, rate: float) -> list[tuple[float, dict]]:
    """Deterministic (fire_offset_s, request_body) list: one request per
    patient, locations uniform in the world's box, millisecond-striped
    declared request times."""
    rng = random.Random(world.seed + 1)
    lat_min, lon_min, lat_max, lon_max = world.bbox
    plan = []
    for i in range(n):
        patient = world.patients[i]
        body = {
            "patient_id": patient.id,
            "latitude": round(rng.uniform(lat_min, lat_max), 6),
            "longitude": round(rng.uniform(lon_min, lon_max), 6),
            "request_time": fmt_ts(REQUEST_TIME_BASE + timedelta(milliseconds=i)),
        }
        plan.append((i / rate, body))
    return plan


def _submit_one(session: requests.Session, base: str, body: dict) -> dict:
    start = time.monotonic()
    try:
        resp = session.post(f"{base}/help", json=body, timeout=30)
        latency_ms = (time.monotonic() - start) * 1000.0
        if resp.status_code != 200:
            return {"ok": False, "latency_ms": latency_ms,
                    "error": f"{resp.status_code} {resp.text[:120]}"}
        outcome = resp.json().get("outcome")
        return {"ok": True, "latency_ms": latency_ms, "outcome": outcome}
    except requests.RequestException as exc:
        latency_ms = (time.monotonic() - start) * 1000.0
        return {"ok": False, "latency_ms": latency_ms, "error": str(exc)}


def _setup_world(base: str, world: World) -> None:
    session = requests.Session()
    try:
        for patient in world.patients:
            body = {
                "id": patient.id,
                "first_name": patient.first_name,
                "last_name": patient.last_name,
                "emergency_contact1": patient.emergency_contact1,
                "emergency_contact2": patient.emergency_contact2,
                "birth_date": fmt_date(patient.birth_date),
                "disease_name": patient.disease_name,
                "reg_date": fmt_date(patient.reg_date),
            }
            resp = session.post(f"{base}/patients", json=body, timeout=10)
            if resp.status_code not in (201, 409):
                raise TargetUnreachableError(
                    f"patient setup failed: {resp.status_code} {resp.text[:120]}")
        for esc in world.escs:
            body = {"id": esc.id,
                    "latitude": esc.location.lat_deg,
                    "longitude": esc.location.lon_deg}
            resp = session.post(f"{base}/escs", json=body, timeout=10)
            if resp.status_code == 400 and "already exists" in resp.text:
                resp = session.put(f"{base}/escs/{esc.id}", json=body, timeout=10)
            if resp.status_code not in (200, 201):
                raise TargetUnreachableError(
                    f"esc setup failed: {resp.status_code} {resp.text[:120]}")
    finally:
        session.close()


def _probe(base: str) -> None:
    try:
        resp = requests.get(f"{base}/health", timeout=5)
        resp.raise_for_status()
    except requests.RequestException as exc:
        raise TargetUnreachableError(f"cannot reach {base}: {exc}") from exc


def _get_json(base: str, path: str, params: dict | None = None) -> dict:
    resp = requests.get(f"{base}{path}", params=params, timeout=30)
    resp.raise_for_status()
    return resp.json()


def _wait_drained(base: str, deadline: float) -> bool:
    while time.monotonic() < deadline:
        stats = _get_json(base, "/stats")
        if stats["assigned_live"] == 0 and stats["queued"] == 0:
            return True
        time.sleep(0.25)
    return False


def _build_report(results, submit_window, mismatches, sim_errors,
                  stats0, stats1, drained) -> LoadReport:
    report = LoadReport()
    latencies = []
    for res in results:
        if res is None:
            continue
        report.submitted += 1
        latencies.append(res["latency_ms"])
        if res["ok"]:
            report.accepted += 1
            if res["outcome"] == "ASSIGNED":
                report.assigned += 1
            elif res["outcome"] == "QUEUED":
                report.queued += 1
        else:
            report.failed += 1
            if len(report.errors) < 10:
                report.errors.append(res["error"])
    for err in sim_errors[:10 - len(report.errors)]:
        report.errors.append(err)

    report.duration_s = submit_window
    report.achieved_rps = report.accepted / submit_window if submit_window > 0 else 0.0
    if latencies:
        ordered = sorted(latencies)
        report.p50_ms = _percentile(ordered, 0.50)
        report.p95_ms = _percentile(ordered, 0.95)
        report.p99_ms = _percentile(ordered, 0.99)
    report.oracle_mismatches = len(mismatches)
    report.mismatch_details = mismatches[:10]
    report.drained = drained

    d_submitted = stats1["submitted"] - stats0["submitted"]
    d_handled = stats1["handled"] - stats0["handled"]
    d_rejected = stats1["rejected"] - stats0["rejected"]
    live_now = stats1["assigned_live"] + stats1["queued"]
    report.conservation_ok = d_submitted == d_handled + d_rejected + live_now
    if report.failed == 0:
        # with no client-side failures the server must have seen every submit
        report.conservation_ok = (report.conservation_ok
                                  and d_submitted == report.submitted
                                  and d_rejected == 0)
    return report


def _percentile(ordered: list, q: float) -> float:
    """Nearest-rank percentile on a pre-sorted list."""
    idx = max(0, math.ceil(q * len(ordered)) - 1)
    return ordered[idx]


# -- CLI -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emsdispatch-loadgen",
        description="Load generator and reconciliation checker for the dispatch service.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a deterministic fixture world")
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--patients", type=int, default=100)
    gen.add_argument("--escs", type=int, default=10)
    gen.add_argument("--bbox", default=",".join(str(v) for v in DEFAULT_BBOX),
                     help="lat_min,lon_min,lat_max,lon_max")
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run paced load and reconcile")
    run.add_argument("--target", required=True, help="service base URL")
    run.add_argument("--rate", type=float, required=True, help="requests per second")
    run.add_argument("--duration", type=float, required=True, help="seconds")
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--escs", type=int, default=10)
    run.add_argument("--ack-ms", type=float, default=100.0)
    run.add_argument("--complete-ms", type=float, default=500.0)
    run.add_argument("--bbox", default=",".join(str(v) for v in DEFAULT_BBOX))
    run.add_argument("--report", help="write the JSON report here")
    return parser


def _parse_bbox(raw: str) -> tuple[float, float, float, float]:
    try:
        parts = tuple(float(v) for v in raw.split(","))
    except ValueError:
        raise ValidationError(f"bad bbox {raw!r}") from None
    if len(parts) != 4:
        raise ValidationError(f"bbox needs 4 numbers, got {raw!r}")
    return parts


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen":
            world = generate_world(args.seed, args.patients, args.escs,
                                   _parse_bbox(args.bbox))
            for path in write_world(world, args.out):
                print(f"wrote {path}")
            return 0
        report = run_load(
            args.target, args.rate, args.duration, seed=args.seed,
            n_escs=args.escs, ack_ms=args.ack_ms, complete_ms=args.complete_ms,
            bbox=_parse_bbox(args.bbox),
        )
    except (ValidationError, TargetUnreachableError) as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 2
    print(report.summary())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        print(f"report written to {args.report}")
    ok = (report.failed == 0 and report.oracle_mismatches == 0
          and report.conservation_ok and report.drained)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
