"""Queue selection: rq on Redis when reachable, the in-process fallback otherwise."""

from __future__ import annotations

import logging
from typing import Any, Optional

from redis import Redis
from rq import Queue

from app.config import Settings, get_settings
from taskqueue.fallback import InMemoryQueue, InMemoryRedis

logger = logging.getLogger(__name__)


def get_redis(settings: Optional[Settings] = None) -> Any:
    settings = settings or get_settings()
    if settings.queue_backend == "memory":
        return InMemoryRedis.from_url("memory://local")
    connection = Redis.from_url(settings.redis_url)
    if settings.queue_backend == "auto":
        try:
            connection.ping()
        except Exception as exc:  # pragma: no cover - depends on a live server
            logger.warning(
                "Redis unavailable, using the in-memory queue",
                extra={"redis_url": settings.redis_url, "error": repr(exc)},
            )
            return InMemoryRedis.from_url("memory://local")
    return connection


def get_queue(name: Optional[str] = None, settings: Optional[Settings] = None) -> Any:
    settings = settings or get_settings()
    name = name or settings.rq_default_queue
    connection = get_redis(settings)
    if isinstance(connection, InMemoryRedis):
        return InMemoryQueue(name, connection=connection)
    return Queue(name, connection=connection)
