"""Value formatting and record validation: millisecond timestamps, decimal
coordinate strings, request keys, and field limits."""

from datetime import date, datetime

import pytest

from emsdispatch.errors import ValidationError
from emsdispatch.model import (
    EscRecord,
    EscStatus,
    HelpRequest,
    RequestState,
    color_for,
    fmt_coord,
    fmt_date,
    fmt_ts,
    make_request_key,
    parse_coord,
    parse_request_key,
    parse_ts,
    truncate_ms,
)
from tests.conftest import make_patient


def test_timestamp_round_trip_keeps_milliseconds():
    raw = "2013-03-05 16:33:36.180"
    assert fmt_ts(parse_ts(raw)) == raw
    assert parse_ts(raw).microsecond == 180000


def test_timestamp_requires_millisecond_field():
    with pytest.raises(ValidationError):
        parse_ts("2013-03-05 16:33:36")
    with pytest.raises(ValidationError):
        parse_ts("not a time")


def test_truncate_ms_drops_sub_millisecond_digits():
    t = datetime(2013, 3, 5, 16, 33, 36, 180999)
    assert truncate_ms(t) == datetime(2013, 3, 5, 16, 33, 36, 180000)
    assert fmt_ts(truncate_ms(t)) == "2013-03-05 16:33:36.180"


def test_coordinate_strings_keep_trailing_zeros():
    # table cells are decimal strings, so 43.003630 must not collapse
    assert parse_coord("43.003630") == 43.00363
    assert fmt_coord(43.00363) == "43.00363"
    assert fmt_coord(36.85126) == "36.85126"
    assert fmt_coord(36.0) == "36"
    assert fmt_coord(-0.0) == "0"


def test_coordinate_rejects_garbage():
    with pytest.raises(ValidationError):
        parse_coord("abc")
    with pytest.raises(ValidationError):
        parse_coord("")


def test_request_key_round_trip():
    t = parse_ts("2013-03-05 16:33:36.000")
    key = make_request_key("07504407758", t)
    assert key == "07504407758~2013-03-05T16:33:36.000"
    pid, ts = parse_request_key(key)
    assert pid == "07504407758"
    assert ts == t


def test_request_key_patient_id_may_contain_tilde_free_text():
    with pytest.raises(ValidationError):
        parse_request_key("no-separator-here")


def test_patient_record_validation():
    good = make_patient()
    good.validate(today=date(2013, 3, 1))

    with pytest.raises(ValidationError):
        make_patient(pid="").validate(today=date(2013, 3, 1))
    with pytest.raises(ValidationError):
        make_patient(pid="x" * 33).validate(today=date(2013, 3, 1))
    with pytest.raises(ValidationError):
        make_patient(birth="2014-01-01").validate(today=date(2013, 3, 1))
    with pytest.raises(ValidationError):
        make_patient(first="").validate(today=date(2013, 3, 1))


def test_patient_contacts_skip_missing_second():
    assert make_patient().contacts == ["07505841793", "07504662547"]
    assert make_patient(contact2=None).contacts == ["07505841793"]


def test_esc_record_exposes_location():
    esc = EscRecord.at("Amb5", 36.853527, 43.000917)
    assert esc.id == "Amb5"
    assert esc.status is EscStatus.FREE
    assert esc.location.lat_deg == 36.853527
    assert esc.latitude == "36.853527"


def test_help_request_key_and_location():
    req = HelpRequest(
        patient_id="07504407758",
        request_time=parse_ts("2013-03-05 16:33:36.000"),
        received_time=parse_ts("2013-03-05 16:33:37.180"),
        latitude="36.85126",
        longitude="42.99551",
    )
    assert req.key == "07504407758~2013-03-05T16:33:36.000"
    assert req.location.lon_deg == 42.99551
    assert not req.is_reserved


def test_color_mapping_is_state_function():
    assert color_for(RequestState.RECEIVED) == "red"
    assert color_for(RequestState.RESERVED) == "red"
    assert color_for(RequestState.ACKNOWLEDGED) == "red"
    assert color_for(RequestState.HANDLED) == "black"


def test_dates_format_iso():
    assert fmt_date(date(1989, 4, 9)) == "1989-04-09"
