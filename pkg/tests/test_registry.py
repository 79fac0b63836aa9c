"""Table CRUD, reservation bookkeeping, fixture import/export round-trip,
and persistence across a journal reopen."""

from pathlib import Path

import pytest

from emsdispatch.errors import (
    DuplicateIdError,
    DuplicateRequestError,
    NotFoundError,
    ValidationError,
)
from emsdispatch.model import (
    EscRecord,
    EscStatus,
    HandledRequest,
    HelpRequest,
    parse_ts,
)
from emsdispatch.registry import Registry, builtin_fixture_dir
from emsdispatch.storage import JournalBackend, MemoryBackend
from tests.conftest import make_patient, seed_fleet

T0 = parse_ts("2013-03-05 16:33:36.000")
T1 = parse_ts("2013-03-05 16:33:37.180")
T2 = parse_ts("2013-03-05 16:40:00.000")


def make_request(pid="07504407758", request_time=T0, received_time=T1,
                 lat="36.85126", lon="42.99551"):
    return HelpRequest(patient_id=pid, request_time=request_time,
                       received_time=received_time, latitude=lat, longitude=lon)


class TestPatients:
    def test_register_and_get(self, registry):
        rec = make_patient()
        registry.register_patient(rec)
        assert registry.get_patient(rec.id) == rec

    def test_register_rejects_duplicate_id(self, registry):
        registry.register_patient(make_patient())
        with pytest.raises(DuplicateIdError):
            registry.register_patient(make_patient(first="Other"))

    def test_register_validates(self, registry):
        with pytest.raises(ValidationError):
            registry.register_patient(make_patient(pid=""))

    def test_update_mutable_fields(self, registry):
        registry.register_patient(make_patient())
        updated = registry.update_patient("07504401111", disease_name="Epilepsy",
                                          emergency_contact2=None)
        assert updated.disease_name == "Epilepsy"
        assert updated.emergency_contact2 is None
        assert registry.get_patient("07504401111").disease_name == "Epilepsy"

    def test_update_rejects_unknown_and_immutable_fields(self, registry):
        registry.register_patient(make_patient())
        with pytest.raises(ValidationError):
            registry.update_patient("07504401111", reg_date=None)
        with pytest.raises(ValidationError):
            registry.update_patient("07504401111", nope="x")

    def test_update_unknown_patient(self, registry):
        with pytest.raises(NotFoundError):
            registry.update_patient("0000", disease_name="x")


class TestEscs:
    def test_upsert_preserves_reservation(self, registry):
        seed_fleet(registry)
        registry.set_esc_status("Amb5", EscStatus.RESERVED)
        registry.upsert_esc(EscRecord.at("Amb5", 36.9, 43.1))
        esc = registry.get_esc("Amb5")
        assert esc.status is EscStatus.RESERVED  # moving a unit keeps its booking
        assert esc.latitude == "36.9"

    def test_list_keeps_insertion_order(self, registry):
        seed_fleet(registry)
        assert [e.id for e in registry.list_escs()] == ["Amb1", "Amb3", "Amb4", "Amb5"]

    def test_get_unknown(self, registry):
        with pytest.raises(NotFoundError):
            registry.get_esc("AmbX")


class TestRequests:
    def test_add_and_fetch(self, registry):
        req = make_request()
        registry.add_request(req)
        got = registry.get_request(req.key)
        assert got.patient_id == req.patient_id
        assert not got.is_reserved

    def test_duplicate_key_rejected_even_after_handling(self, registry):
        seed_fleet(registry)
        req = make_request()
        registry.add_request(req)
        with pytest.raises(DuplicateRequestError):
            registry.add_request(make_request())
        handled = HandledRequest(
            patient_id=req.patient_id, request_time=req.request_time,
            received_time=req.received_time, received_time2=T2,
            latitude=req.latitude, longitude=req.longitude,
            reply_time=T2, esc_id="Amb5",
        )
        registry.complete_request(req.key, handled)
        with pytest.raises(DuplicateRequestError):
            registry.add_request(make_request())  # key now lives in the handled table

    def test_reservation_update(self, registry):
        seed_fleet(registry)
        req = make_request()
        registry.add_request(req)
        registry.update_request_reservation(req.key, True, "Amb5")
        got = registry.get_request(req.key)
        assert got.is_reserved and got.terminal_id == "Amb5"

    def test_live_request_for_patient(self, registry):
        assert registry.live_request_for_patient("07504407758") is None
        registry.add_request(make_request())
        assert registry.live_request_for_patient("07504407758") is not None

    def test_complete_moves_between_tables(self, registry):
        seed_fleet(registry)
        req = make_request()
        registry.add_request(req)
        handled = HandledRequest(
            patient_id=req.patient_id, request_time=req.request_time,
            received_time=req.received_time, received_time2=T2,
            latitude=req.latitude, longitude=req.longitude,
            reply_time=T2, esc_id="Amb5",
        )
        registry.complete_request(req.key, handled)
        assert registry.list_new_requests() == []
        assert registry.get_handled(req.key).esc_id == "Amb5"
        with pytest.raises(NotFoundError):
            registry.get_request(req.key)


class TestFixtures:
    def test_builtin_fixture_counts(self, registry):
        registry.load_fixture_dir(builtin_fixture_dir())
        counts = registry.counts()
        assert counts["patients"] == 27
        assert counts["escs"] == 4
        assert counts["new_requests"] == 3
        assert counts["handled_requests"] == 4

    def test_fixture_load_derives_reservations(self, registry):
        registry.load_fixture_dir(builtin_fixture_dir())
        # live rows name terminals Amb2 (not in fleet), Amb1, and Amb3 (f row)
        assert registry.get_esc("Amb1").status is EscStatus.RESERVED
        assert registry.get_esc("Amb3").status is EscStatus.FREE
        assert registry.get_esc("Amb4").status is EscStatus.FREE

    def test_round_trip_is_byte_exact(self, registry):
        fixture_dir = Path(builtin_fixture_dir())
        registry.load_fixture_dir(str(fixture_dir))
        for table in ("Registration", "ESC", "New_Request", "Request_Info"):
            original = (fixture_dir / f"{table}.csv").read_text(encoding="utf-8")
            assert registry.export_table(table) == original, f"{table} diverged"

    def test_import_rejects_wrong_header(self, registry):
        with pytest.raises(ValidationError):
            registry.import_table("ESC", "ID,Lat,Lon\nAmb1,1,2\n")


def test_registry_survives_journal_reopen(tmp_path):
    path = str(tmp_path / "j.jsonl")
    reg = Registry(JournalBackend(path))
    reg.register_patient(make_patient())
    seed_fleet(reg)
    req = make_request()
    reg.add_request(req)
    reg.update_request_reservation(req.key, True, "Amb5")
    reg.set_esc_status("Amb5", EscStatus.RESERVED)
    reg.close()

    reg2 = Registry(JournalBackend(path))
    assert reg2.get_patient("07504401111").first_name == "Rose"
    assert reg2.get_esc("Amb5").status is EscStatus.RESERVED
    got = reg2.get_request(req.key)
    assert got.is_reserved and got.terminal_id == "Amb5"
    reg2.close()


def test_counts_empty(registry):
    counts = registry.counts()
    assert counts == {
        "patients": 0, "escs": 0, "escs_free": 0, "escs_reserved": 0,
        "new_requests": 0, "handled_requests": 0,
    }
