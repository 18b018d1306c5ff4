import os
from pathlib import Path

from ..errors import RunStoreError
from .schema import Record, RunRecord, EpochRecord, MetricRecord, RECORD_TYPES
from .store import RunStore, RunStoreSession, save_run
from .jsonl import JsonlRunStore

SQLITE_SUFFIXES = (".db", ".sqlite", ".sqlite3")


def open_store(location: str | os.PathLike) -> RunStore:
    """SQLite for ``*.db``/``*.sqlite`` paths, otherwise a JSONL directory."""
    path = Path(location)
    if path.suffix in SQLITE_SUFFIXES:
        try:
            from .sqlite import SQLiteRunStore
        except ImportError as e:
            raise RunStoreError(f"{path}: SQLite run stores need the sqlite extra ({e})") from e

        return SQLiteRunStore(path)
    return JsonlRunStore(path)


__all__ = [
    "Record",
    "RunRecord",
    "EpochRecord",
    "MetricRecord",
    "RECORD_TYPES",
    "RunStore",
    "RunStoreSession",
    "save_run",
    "JsonlRunStore",
    "open_store",
]
