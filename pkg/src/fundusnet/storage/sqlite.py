import json
import logging
import os
from contextlib import asynccontextmanager
from dataclasses import MISSING
from typing import Any

import aiosqlite

from ..errors import RunStoreError
from .schema import Record
from .store import R, RunStore, RunStoreSession, get_record_class

logger = logging.getLogger(__name__)

SQL_TYPES = {
    "str": "TEXT",
    "int": "INTEGER",
    "bool": "INTEGER",
    "float": "REAL",
    "json": "TEXT",
}


class SQLiteSession(RunStoreSession):
    def __init__(self, conn_uri: str):
        self.conn_uri = conn_uri
        self.connection: aiosqlite.Connection | None = None

    def column_sql(self, name: str, info: dict[str, Any]) -> str:
        sql_type = SQL_TYPES.get(info["type"], "TEXT")
        if info["primary_key"]:
            parts = [name, sql_type, "PRIMARY KEY"]
            if info["auto_increment"]:
                parts.append("AUTOINCREMENT")
            return " ".join(parts)
        parts = [name, sql_type]
        if not info["nullable"]:
            parts.append("NOT NULL")
        default = info["default"]
        if default is not MISSING and info["type"] != "json":
            if default is None:
                parts.append("DEFAULT NULL")
            elif isinstance(default, str):
                parts.append("DEFAULT '" + default.replace("'", "''") + "'")
            else:
                parts.append(f"DEFAULT {default}")
        return " ".join(parts)

    def encode(self, schema: dict, values: dict) -> dict:
        return {
            k: json.dumps(v, sort_keys=True) if schema[k]["type"] == "json" and v is not None else v
            for k, v in values.items()
            if k in schema
        }

    def decode(self, schema: dict, row: dict) -> dict:
        decoded = {}
        for k, v in row.items():
            kind = schema.get(k, {}).get("type")
            if kind == "json" and v is not None:
                v = json.loads(v)
            elif kind == "bool" and v is not None:
                v = bool(v)
            decoded[k] = v
        return decoded

    async def connect(self):
        self.connection = await aiosqlite.connect(self.conn_uri)
        return self

    async def close(self):
        if self.connection is not None:
            await self.connection.close()
            self.connection = None

    async def begin(self):
        # IMMEDIATE takes the write lock up front so concurrent writers fail fast
        await self.connection.execute("BEGIN IMMEDIATE")

    async def commit(self):
        await self.connection.commit()

    async def rollback(self):
        await self.connection.rollback()

    async def init_schema(self, record: type[Record]) -> str:
        schema = record.get_schema()
        columns = ",\n  ".join(self.column_sql(name, info) for name, info in schema.items())
        create = f"CREATE TABLE IF NOT EXISTS {record.table} (\n  {columns}\n);"
        try:
            await self.connection.execute(create)
            for name, info in schema.items():
                if info["index"]:
                    await self.connection.execute(
                        f"CREATE INDEX IF NOT EXISTS {record.table}_{name}_idx "
                        f"ON {record.table}({name})"
                    )
        except Exception as e:
            raise self.process_exception(e) from e
        return create

    async def create(self, record: R) -> R:
        cls = get_record_class(record)
        values = self.encode(cls.get_schema(), record.get_values())
        columns = ",".join(values)
        placeholders = ",".join("?" for _ in values)
        sql = f"INSERT INTO {cls.table} ({columns}) VALUES ({placeholders})"
        try:
            async with self.connection.execute(sql, list(values.values())) as cursor:
                record.id = cursor.lastrowid
        except Exception as e:
            raise self.process_exception(e) from e
        return record

    async def list(self, record, filters=None, limit=None) -> list:
        cls = get_record_class(record)
        schema = cls.get_schema()
        where, values = "", []
        if filters:
            unknown = set(filters) - set(schema)
            if unknown:
                raise RunStoreError(f"unknown {cls.table} columns: {sorted(unknown)}")
            clauses = []
            for key, value in filters.items():
                if value is None:
                    clauses.append(f"{key} IS NULL")
                else:
                    clauses.append(f"{key} = ?")
                    values.append(value)
            where = "WHERE " + " AND ".join(clauses)
        sql = f"SELECT * FROM {cls.table} {where} ORDER BY id ASC"
        if limit is not None:
            sql += f" LIMIT {int(limit)}"
        try:
            async with self.connection.execute(sql, values) as cursor:
                names = [d[0] for d in cursor.description]
                rows = await cursor.fetchall()
        except Exception as e:
            raise self.process_exception(e) from e
        return [cls.from_row(self.decode(schema, dict(zip(names, row)))) for row in rows]

    def process_exception(self, e: Exception) -> Exception:
        if isinstance(e, RunStoreError):
            return e
        if isinstance(e, aiosqlite.IntegrityError):
            msg = str(e)
            if "NOT NULL constraint failed" in msg:
                return RunStoreError(f"missing required field: {msg}")
            return RunStoreError(f"integrity error: {msg}")
        if isinstance(e, aiosqlite.OperationalError):
            msg = str(e)
            if "no such table" in msg:
                return RunStoreError(f"table not found: {msg}")
            if "no such column" in msg:
                return RunStoreError(f"invalid column: {msg}")
            return RunStoreError(f"operational error: {msg}")
        return e


class SQLiteRunStore(RunStore):
    def __init__(self, path: str | os.PathLike):
        self.conn_uri = os.fspath(path)

    @asynccontextmanager
    async def session(self):
        session = SQLiteSession(self.conn_uri)
        try:
            await session.connect()
            yield session
        finally:
            await session.close()
