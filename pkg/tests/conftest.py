import pytest
import requests

from emsdispatch.config import ServiceConfig
from emsdispatch.dispatcher import Dispatcher
from emsdispatch.geodesy import GeoPoint
from emsdispatch.model import EscRecord, PatientRecord, parse_date
from emsdispatch.registry import Registry
from emsdispatch.server import BackgroundServer
from emsdispatch.storage import MemoryBackend

# the four-unit fleet and first request location used throughout the suite
FLEET = {
    "Amb1": (36.849723, 43.003630),
    "Amb3": (36.870231, 42.966564),
    "Amb4": (36.855982, 43.008771),
    "Amb5": (36.853527, 43.000917),
}
REQUEST_POINT = GeoPoint(36.85126, 42.99551)


def make_patient(pid="07504401111", first="Rose", last="Maher",
                 contact1="07505841793", contact2="07504662547",
                 birth="1989-04-09", disease="Asthma", reg="2013-03-01"):
    return PatientRecord(
        id=pid, first_name=first, last_name=last,
        emergency_contact1=contact1, emergency_contact2=contact2,
        birth_date=parse_date(birth), disease_name=disease,
        reg_date=parse_date(reg),
    )


def seed_fleet(registry: Registry, fleet: dict = FLEET) -> None:
    for esc_id, (lat, lon) in fleet.items():
        registry.upsert_esc(EscRecord.at(esc_id, lat, lon))


@pytest.fixture
def registry():
    reg = Registry(MemoryBackend())
    yield reg
    reg.close()


@pytest.fixture
def dispatcher(registry):
    d = Dispatcher(registry)
    yield d
    d.close()


@pytest.fixture
def server():
    srv = BackgroundServer(ServiceConfig(host="127.0.0.1", port=0))
    yield srv
    srv.close()


@pytest.fixture
def client(server):
    session = requests.Session()
    yield session
    session.close()


@pytest.fixture
def base_url(server):
    return srv_url(server)


def srv_url(server: BackgroundServer) -> str:
    return server.base_url
