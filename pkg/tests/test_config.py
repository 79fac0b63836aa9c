"""Config file parsing, flag overrides, and validation."""

import pytest

from emsdispatch.config import ServiceConfig, load_config, parse_config_file
from emsdispatch.errors import ValidationError
from emsdispatch.geocode import NullGeocoder, TableGeocoder, build_geocoder, reverse_geocode
from emsdispatch.geodesy import GeoPoint


def test_defaults_validate():
    cfg = load_config()
    assert cfg.port == 8350
    assert cfg.radius_km == 6371.0
    assert cfg.store == "memory"


def test_file_then_flag_precedence(tmp_path):
    path = tmp_path / "svc.conf"
    path.write_text(
        "# service settings\n"
        "port = 9000\n"
        "store = memory\n"
        "radius_km = 6000\n",
        encoding="utf-8",
    )
    cfg = load_config(str(path), port=9100, hospital_msisdn="+100")
    assert cfg.port == 9100          # flag beats file
    assert cfg.radius_km == 6000.0   # file beats default
    assert cfg.hospital_msisdn == "+100"


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "svc.conf"
    path.write_text("prot = 1\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        parse_config_file(str(path))


def test_malformed_line_rejected(tmp_path):
    path = tmp_path / "svc.conf"
    path.write_text("just some words\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        parse_config_file(str(path))


def test_bad_numeric_value(tmp_path):
    path = tmp_path / "svc.conf"
    path.write_text("port = lots\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        parse_config_file(str(path))


@pytest.mark.parametrize("bad", [
    {"port": 70000},
    {"port": -1},
    {"radius_km": 0.0},
    {"radius_km": -10.0},
    {"poll_timeout_s": 0.0},
    {"hospital_msisdn": "  "},
])
def test_invalid_settings_rejected(bad):
    with pytest.raises(ValidationError):
        ServiceConfig(**bad).validate()


def test_null_geocoder_returns_absent():
    assert reverse_geocode(NullGeocoder(), GeoPoint(36.85, 42.99)) is None
    assert reverse_geocode(None, GeoPoint(36.85, 42.99)) is None


def test_table_geocoder_returns_known_address():
    table = TableGeocoder()
    table.add(GeoPoint(36.85126, 42.99551), "Duhok, Zakho Rd")
    assert reverse_geocode(table, GeoPoint(36.85126, 42.99551)) == "Duhok, Zakho Rd"
    assert reverse_geocode(table, GeoPoint(36.8513, 42.9955)) == "Duhok, Zakho Rd"
    assert reverse_geocode(table, GeoPoint(40.0, 30.0)) is None  # beyond max_km


def test_provider_failure_degrades_to_absent():
    class Exploding:
        def reverse(self, loc):
            raise RuntimeError("provider down")

    assert reverse_geocode(Exploding(), GeoPoint(36.85, 42.99)) is None


def test_build_geocoder_selectors():
    assert isinstance(build_geocoder("null"), NullGeocoder)
    assert isinstance(build_geocoder("table"), TableGeocoder)
    with pytest.raises(ValueError):
        build_geocoder("osm")
