from dataclasses import dataclass, asdict, field, fields, MISSING
from datetime import datetime, timezone
from types import UnionType
from typing import Any, ClassVar, Union, get_args, get_origin


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _type_name(tp) -> str:
    if get_origin(tp) in (list, dict) or tp in (list, dict):
        return "json"
    return getattr(tp, "__name__", str(tp))


@dataclass
class Record:
    """Base of every persisted run-store row.

    Fields map to columns; ``id`` is assigned by the store on create.
    """

    table: ClassVar[str] = "record"
    exclude: ClassVar[list[str]] = ["id"]

    id: int | None = field(
        default=None,
        metadata={"primary_key": True, "auto_increment": True},
        init=False,
    )

    def to_dict(self, include_id: bool = True) -> dict[str, Any]:
        data = asdict(self)
        if not include_id:
            data.pop("id")
        return data

    def get_values(self) -> dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if k not in self.exclude}

    @classmethod
    def get_schema(cls, exclude: list[str] | None = None) -> dict[str, dict[str, Any]]:
        """Column name -> {type, nullable, default, primary_key, auto_increment, index}."""
        exclude = exclude or []
        schema = {}
        for f in fields(cls):
            if f.name in exclude:
                continue
            tp = f.type
            nullable = False
            if get_origin(tp) in (Union, UnionType):
                args = [a for a in get_args(tp) if a is not type(None)]
                nullable = len(args) != len(get_args(tp))
                tp = args[0]
            # factory defaults are filled in on the Python side
            default = f.default
            schema[f.name] = {
                "type": _type_name(tp),
                "nullable": nullable,
                "default": default,
                "primary_key": f.metadata.get("primary_key", False),
                "auto_increment": f.metadata.get("auto_increment", False),
                "index": f.metadata.get("index", False),
            }
        return schema

    @classmethod
    def from_row(cls, row: dict[str, Any]) -> "Record":
        values = {k: v for k, v in row.items() if k != "id"}
        record = cls(**values)
        record.id = row.get("id")
        return record


@dataclass
class RunRecord(Record):
    table: ClassVar[str] = "runs"

    run_id: str = field(default="", metadata={"index": True})
    command: str = ""
    created: str = field(default_factory=utc_now)
    seed: int | None = None
    checkpoint: str | None = None
    config: dict = field(default_factory=dict)


@dataclass
class EpochRecord(Record):
    table: ClassVar[str] = "history"

    run_id: str = field(default="", metadata={"index": True})
    epoch: int = 0
    loss: float = 0.0
    accuracy: float = 0.0
    seconds: float = 0.0


@dataclass
class MetricRecord(Record):
    """One scalar; ``grade`` is None for macro averages and whole-matrix values."""

    table: ClassVar[str] = "metrics"

    run_id: str = field(default="", metadata={"index": True})
    model: str = ""
    metric: str = ""
    grade: int | None = None
    value: float | None = None


RECORD_TYPES: tuple[type[Record], ...] = (RunRecord, EpochRecord, MetricRecord)
