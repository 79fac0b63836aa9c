"""Pluggable table storage: in-memory for tests, journal-backed for operation.

Rows are flat JSON-compatible dicts keyed by strings. Mutations arrive as
op batches so multi-table moves (live row -> handled row) commit atomically.
"""

from __future__ import annotations

import json
import logging
import os
from typing import Iterable

from .errors import StorageError, UnknownTableError

logger = logging.getLogger(__name__)

REGISTRATION = "Registration"
ESC = "ESC"
NEW_REQUEST = "New_Request"
REQUEST_INFO = "Request_Info"
TABLES = (REGISTRATION, ESC, NEW_REQUEST, REQUEST_INFO)

# An op is ("put", table, key, row) or ("delete", table, key).
Op = tuple


class MemoryBackend:
    """Dict-of-dicts store preserving insertion order per table."""

    def __init__(self):
        self._tables: dict[str, dict[str, dict]] = {t: {} for t in TABLES}

    def apply(self, ops: Iterable[Op]) -> None:
        for op in ops:
            self._apply_one(op)

    def _apply_one(self, op: Op) -> None:
        kind, table = op[0], op[1]
        if table not in self._tables:
            raise UnknownTableError(f"unknown table {table!r}")
        if kind == "put":
            _, _, key, row = op
            self._tables[table][key] = dict(row)
        elif kind == "delete":
            _, _, key = op
            self._tables[table].pop(key, None)
        else:
            raise StorageError(f"unknown op kind {kind!r}")

    def get(self, table: str, key: str) -> dict | None:
        row = self._table(table).get(key)
        return dict(row) if row is not None else None

    def scan(self, table: str) -> list[tuple[str, dict]]:
        return [(key, dict(row)) for key, row in self._table(table).items()]

    def count(self, table: str) -> int:
        return len(self._table(table))

    def close(self) -> None:
        pass

    def _table(self, table: str) -> dict[str, dict]:
        try:
            return self._tables[table]
        except KeyError:
            raise UnknownTableError(f"unknown table {table!r}") from None


class JournalBackend(MemoryBackend):
    """Write-ahead journal over the in-memory store.

    Each commit is one JSON line holding the full op batch; the line is
    flushed and fsynced before the ops touch memory, so a torn tail line
    after a crash is simply discarded on replay.
    """

    def __init__(self, path: str):
        super().__init__()
        self._path = path
        try:
            self._replay()
            self._fh = open(path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot open journal {path!r}: {exc}") from exc

    def _replay(self) -> None:
        """Apply every committed batch. A final unterminated line is a torn
        write from a crash: discard it and truncate the file so the next
        append starts clean. A complete line that fails to parse means real
        corruption and refuses to open."""
        if not os.path.exists(self._path):
            return
        with open(self._path, "rb") as fh:
            data = fh.read()
        pos = 0
        lineno = 0
        while pos < len(data):
            nl = data.find(b"\n", pos)
            if nl == -1:
                logger.warning("discarding torn journal tail at byte %d in %s",
                               pos, self._path)
                os.truncate(self._path, pos)
                return
            line = data[pos:nl].strip()
            lineno += 1
            if line:
                try:
                    batch = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StorageError(
                        f"journal {self._path!r} corrupted at line {lineno}: {exc}"
                    ) from exc
                super().apply([tuple(op) for op in batch["ops"]])
            pos = nl + 1

    def apply(self, ops: Iterable[Op]) -> None:
        batch = list(ops)
        try:
            self._fh.write(json.dumps({"ops": batch}, separators=(",", ":")) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except (OSError, ValueError) as exc:
            raise StorageError(f"journal write failed: {exc}") from exc
        super().apply(batch)

    def close(self) -> None:
        try:
            self._fh.close()
        except OSError:
            pass


def open_backend(selector: str) -> MemoryBackend:
    """Build a backend from a config selector: ``memory`` or a journal path."""
    if selector == "memory":
        return MemoryBackend()
    path = selector[len("journal:"):] if selector.startswith("journal:") else selector
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise StorageError(f"journal directory does not exist: {parent!r}")
    return JournalBackend(path)
