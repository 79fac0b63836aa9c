"""Emergency dispatch service: nearest-unit assignment over HTTP/JSON.

Core pieces:

  * :mod:`emsdispatch.geodesy` - great-circle distance and fleet ranking
  * :mod:`emsdispatch.registry` - the four persistent tables + CSV round-trip
  * :mod:`emsdispatch.dispatcher` - request lifecycle and unit reservation
  * :mod:`emsdispatch.notifier` - SMS fan-out with pluggable transports
  * :mod:`emsdispatch.server` - the HTTP/JSON wire surface
  * :mod:`emsdispatch.loadgen` - load harness and reconciliation checker
"""

from .config import ServiceConfig, load_config
from .dispatcher import AssignmentChannel, Clock, Dispatcher
from .errors import DispatchError
from .geodesy import EARTH_RADIUS_KM, GeoPoint, haversine_km, rank_by_distance
from .model import (
    Assignment,
    EscRecord,
    EscStatus,
    HandledRequest,
    HelpRequest,
    PatientRecord,
    QueuedAck,
    RequestState,
)
from .notifier import HospitalEndpoint, Notifier, SmsMessage
from .registry import Registry
from .server import BackgroundServer, ServiceApp, serve

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "AssignmentChannel",
    "BackgroundServer",
    "Clock",
    "DispatchError",
    "Dispatcher",
    "EARTH_RADIUS_KM",
    "EscRecord",
    "EscStatus",
    "GeoPoint",
    "HandledRequest",
    "HelpRequest",
    "HospitalEndpoint",
    "Notifier",
    "PatientRecord",
    "QueuedAck",
    "Registry",
    "RequestState",
    "ServiceApp",
    "ServiceConfig",
    "SmsMessage",
    "haversine_km",
    "load_config",
    "rank_by_distance",
    "serve",
    "__version__",
]
