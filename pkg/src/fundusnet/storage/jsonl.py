import json
import logging
import os
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Any

from ..errors import RunStoreError
from .schema import Record
from .store import R, RunStore, RunStoreSession, get_record_class, matches

logger = logging.getLogger(__name__)


class JsonlSession(RunStoreSession):
    """One ``<table>.jsonl`` file per record type; writes are buffered until commit."""

    def __init__(self, directory: Path):
        self.directory = directory
        self._pending: dict[str, list[dict[str, Any]]] = {}
        self._in_transaction = False

    def path_for(self, record: type[Record]) -> Path:
        return self.directory / f"{record.table}.jsonl"

    def _read(self, record: type[Record]) -> list[dict[str, Any]]:
        path = self.path_for(record)
        rows = []
        if path.exists():
            with path.open("r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        rows.append(json.loads(line))
                    except json.JSONDecodeError as e:
                        raise RunStoreError(f"{path}:{lineno}: invalid record: {e.msg}") from e
        rows.extend(self._pending.get(record.table, []))
        return rows

    def _flush(self):
        for table, rows in self._pending.items():
            path = self.directory / f"{table}.jsonl"
            with path.open("a", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
        self._pending.clear()

    async def connect(self):
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise RunStoreError(f"cannot create run store at {self.directory}: {e}") from e
        return self

    async def close(self):
        self._pending.clear()

    async def begin(self):
        self._in_transaction = True

    async def commit(self):
        self._flush()
        self._in_transaction = False

    async def rollback(self):
        self._pending.clear()
        self._in_transaction = False

    async def init_schema(self, record: type[Record]):
        self.path_for(record).touch(exist_ok=True)

    async def create(self, record: R) -> R:
        cls = get_record_class(record)
        record.id = len(self._read(cls)) + 1
        self._pending.setdefault(cls.table, []).append(record.to_dict())
        if not self._in_transaction:
            self._flush()
        return record

    async def list(self, record, filters=None, limit=None) -> list:
        cls = get_record_class(record)
        found = []
        for row in self._read(cls):
            if not matches(row, filters):
                continue
            try:
                found.append(cls.from_row(row))
            except TypeError as e:
                raise RunStoreError(f"{self.path_for(cls)}: record does not fit {cls.__name__}: {e}") from e
            if limit is not None and len(found) >= limit:
                break
        return found


class JsonlRunStore(RunStore):
    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)

    @asynccontextmanager
    async def session(self):
        session = JsonlSession(self.directory)
        try:
            await session.connect()
            yield session
        finally:
            await session.close()
