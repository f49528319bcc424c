"""Thread-backed stand-in for an rq queue so sweeps run without Redis.

Only the calls the load sweep makes are provided: ``enqueue`` on the queue
and ``get_status`` / ``return_value`` / ``exc_info`` / ``meta`` on the job.
"""

from __future__ import annotations

import threading
import time
import uuid
from typing import Any, Callable, Dict, Optional, Tuple

from taskqueue import tasks


class InMemoryRedis:
    """Connection marker returned by ``get_redis`` for the memory backend."""

    def __init__(self, url: str = "memory://local") -> None:
        self.url = url

    @staticmethod
    def from_url(url: str) -> "InMemoryRedis":
        return InMemoryRedis(url)

    def ping(self) -> bool:  # pragma: no cover - trivial
        return True


class InMemoryJob:
    """Job executed in a daemon thread.

    A job still running after ``job_timeout`` seconds reports ``failed``; its
    thread is left to finish on its own and its result is discarded.
    """

    def __init__(
        self,
        func: Callable[..., Any],
        args: Tuple[Any, ...],
        kwargs: Dict[str, Any],
        *,
        meta: Optional[Dict[str, Any]] = None,
        job_timeout: Optional[float] = None,
    ) -> None:
        self.id = str(uuid.uuid4())
        self.meta: Dict[str, Any] = {"status": "queued", "progress": 0, **(meta or {})}
        self.timeout = job_timeout
        self._func = func
        self._args = args
        self._kwargs = kwargs
        self._result: Any = None
        self._error: Optional[str] = None
        self._started = time.monotonic()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def get_status(self) -> str:
        if self._thread.is_alive():
            if self.timeout is not None and time.monotonic() - self._started > self.timeout:
                if self._error is None:
                    self._error = f"JobTimeoutException: exceeded {self.timeout} s"
                    self.meta.update(status="failed", error_message=self._error)
                return "failed"
            return "started"
        return "failed" if self._error is not None else "finished"

    def save_meta(self) -> None:
        pass

    def return_value(self) -> Any:
        return None if self._error is not None else self._result

    @property
    def exc_info(self) -> Optional[str]:
        return self._error

    def _run(self) -> None:
        tasks.set_current_job(self)
        self.meta["status"] = "started"
        try:
            result = self._func(*self._args, **self._kwargs)
        except Exception as exc:
            if self._error is None:
                self._error = repr(exc)
                self.meta.update(status="failed", error_message=str(exc))
        else:
            if self._error is None:
                self._result = result
                if self.meta.get("status") != "completed":
                    self.meta["status"] = "completed"
        finally:
            tasks.clear_current_job()


class InMemoryQueue:
    def __init__(self, name: str, connection: Optional[InMemoryRedis] = None) -> None:
        self.name = name
        self.connection = connection or InMemoryRedis()

    def enqueue(self, func: Callable[..., Any], *args: Any, **kwargs: Any) -> InMemoryJob:
        meta = kwargs.pop("meta", None)
        job_timeout = kwargs.pop("job_timeout", None)
        return InMemoryJob(func, args, kwargs, meta=meta, job_timeout=job_timeout)
