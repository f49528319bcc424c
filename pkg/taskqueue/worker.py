"""rq worker for load-sweep jobs."""

import logging

from redis import Redis
from rq import Queue, Worker

from app.config import get_settings

logger = logging.getLogger(__name__)


def run_worker() -> None:
    settings = get_settings()
    redis_conn = Redis.from_url(settings.redis_url)
    listen_queues = [settings.rq_default_queue]

    worker = Worker([Queue(name, connection=redis_conn) for name in listen_queues], connection=redis_conn)
    logger.info("Worker listening", extra={"queues": listen_queues, "redis_url": settings.redis_url})
    worker.work(with_scheduler=False)


if __name__ == "__main__":
    run_worker()
