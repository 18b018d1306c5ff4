from abc import ABC, abstractmethod
from contextlib import AbstractAsyncContextManager, asynccontextmanager
from typing import Any, AsyncGenerator, Iterable, TypeVar

from .schema import RECORD_TYPES, EpochRecord, MetricRecord, Record, RunRecord

R = TypeVar("R", bound=Record)


def get_record_class(record: R | type[R]) -> type[R]:
    if isinstance(record, Record):
        return type(record)
    if isinstance(record, type) and issubclass(record, Record):
        return record
    raise TypeError(f"not a run-store record: {record!r}")


def matches(values: dict[str, Any], filters: dict[str, Any] | None) -> bool:
    return all(values.get(k) == v for k, v in (filters or {}).items())


class RunStoreSession(ABC):
    @abstractmethod
    async def connect(self) -> "RunStoreSession": ...
    @abstractmethod
    async def close(self): ...
    @abstractmethod
    async def begin(self): ...
    @abstractmethod
    async def commit(self): ...
    @abstractmethod
    async def rollback(self): ...
    @abstractmethod
    async def init_schema(self, record: type[Record]): ...
    @abstractmethod
    async def create(self, record: R) -> R: ...
    @abstractmethod
    async def list(
        self,
        record: type[R],
        filters: dict[str, Any] | None = None,
        limit: int | None = None,
    ) -> list[R]: ...

    async def get(self, record: type[R], filters: dict[str, Any]) -> R | None:
        if not filters:
            raise ValueError("filters must be provided")
        found = await self.list(record, filters, limit=1)
        return found[0] if found else None

    async def init_all(self):
        for record in RECORD_TYPES:
            await self.init_schema(record)


class RunStore(ABC):
    """Where training histories, run configs and metrics are persisted."""

    @abstractmethod
    def session(self) -> AbstractAsyncContextManager[RunStoreSession]:
        pass

    @asynccontextmanager
    async def begin(self) -> AsyncGenerator[RunStoreSession, Any]:
        async with self.session() as session:
            try:
                await session.begin()
                yield session
                await session.commit()
            except Exception:
                await session.rollback()
                raise


async def save_run(
    store: RunStore,
    run: RunRecord,
    epochs: Iterable[EpochRecord] = (),
    metrics: Iterable[MetricRecord] = (),
) -> RunRecord:
    """Persist one run with its epochs and metrics in a single transaction."""
    async with store.begin() as session:
        await session.init_all()
        await session.create(run)
        for epoch in epochs:
            await session.create(epoch)
        for metric in metrics:
            await session.create(metric)
    return run
