"""Service configuration: key=value file, overridden by command-line flags.

File format, one setting per line:

    # comment
    host = 0.0.0.0
    port = 8350
    store = /var/lib/emsdispatch/journal.jsonl
    hospital_msisdn = +9647501000000
    hospital_name = Duhok Emergency Hospital
    sms_transport = file:/var/log/emsdispatch/sms.log
    radius_km = 6371.0
    poll_timeout_s = 25.0
    geocoder = null

Unknown keys are rejected so typos fail loudly at startup.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ValidationError

DEFAULT_PORT = 8350
DEFAULT_RADIUS_KM = 6371.0
DEFAULT_POLL_TIMEOUT_S = 25.0


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    store: str = "memory"
    hospital_msisdn: str = "+9647501000000"
    hospital_name: str = "Central Hospital"
    sms_transport: str = "recording"
    radius_km: float = DEFAULT_RADIUS_KM
    poll_timeout_s: float = DEFAULT_POLL_TIMEOUT_S
    geocoder: str = "null"

    def validate(self) -> "ServiceConfig":
        if not (0 <= self.port <= 65535):
            raise ValidationError(f"port {self.port} out of range")
        if not self.radius_km > 0:
            raise ValidationError(f"radius_km must be positive, got {self.radius_km}")
        if not self.poll_timeout_s > 0:
            raise ValidationError(f"poll_timeout_s must be positive, got {self.poll_timeout_s}")
        if not self.hospital_msisdn.strip():
            raise ValidationError("hospital_msisdn must not be empty")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(ServiceConfig)}
_INT_KEYS = {"port"}
_FLOAT_KEYS = {"radius_km", "poll_timeout_s"}


def parse_config_file(path: str) -> dict:
    """Read ``key = value`` lines into a dict of typed settings."""
    settings = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_TYPES:
                raise ValidationError(f"{path}:{lineno}: unknown setting {key!r}")
            settings[key] = _coerce(key, value, f"{path}:{lineno}")
    return settings


def _coerce(key: str, value: str, where: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise ValidationError(f"{where}: bad value for {key}: {value!r}") from None
    return value


def load_config(path: str | None = None, **overrides) -> ServiceConfig:
    """Defaults, then file settings, then non-None flag overrides."""
    settings = parse_config_file(path) if path else {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ValidationError(f"unknown setting {key!r}")
        settings[key] = value
    return ServiceConfig(**settings).validate()
