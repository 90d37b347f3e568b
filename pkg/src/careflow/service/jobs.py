"""In-process job registry for long-running tune and scenario work.

Jobs run on daemon threads; status moves Pending → Running → Done/Failed
and never backwards.  At most one active job is allowed per (kind,
discipline) pair, mirroring the engine's single-writer file layout.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

log = logging.getLogger(__name__)


class ActiveJobConflict(Exception):
    """A job of this kind is already running for the discipline."""


class JobStatus(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"


@dataclass
class Job:
    id: str
    kind: str
    discipline: str
    status: JobStatus = JobStatus.PENDING
    error: str | None = None
    result: dict | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "discipline": self.discipline,
            "status": self.status.value,
            "error": self.error,
            "result": self.result if self.status is JobStatus.DONE else None,
        }


class JobRegistry:
    def __init__(self) -> None:
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def submit(self, kind: str, discipline: str, work: Callable[[], dict]) -> Job:
        """Start ``work`` on a thread; refuse if one is already active."""
        with self._lock:
            for job in self._jobs.values():
                if (
                    job.kind == kind
                    and job.discipline == discipline
                    and job.status in (JobStatus.PENDING, JobStatus.RUNNING)
                ):
                    raise ActiveJobConflict(f"{kind} job already active for {discipline}")
            self._counter += 1
            job = Job(id=f"job-{self._counter}", kind=kind, discipline=discipline)
            self._jobs[job.id] = job

        def runner() -> None:
            with self._lock:
                job.status = JobStatus.RUNNING
            try:
                result = work()
            except Exception as exc:  # noqa: BLE001 - job boundary
                log.exception("job %s failed", job.id)
                with self._lock:
                    job.status = JobStatus.FAILED
                    job.error = str(exc)
                return
            with self._lock:
                job.result = result
                job.status = JobStatus.DONE

        threading.Thread(target=runner, name=job.id, daemon=True).start()
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)
