import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Tuple

from tqdm import tqdm

from src.default_constants import THREADS_ENV_VAR
from src.errors import ConfigError

log = logging.getLogger(__name__)


@dataclass
class Job:
    """A function call run in a worker; fn must be importable at module level.

    context (seed, stream ids) is appended to the error of a failed job.
    """

    key: Tuple
    fn: Callable
    kwargs: dict = field(default_factory=dict)
    context: dict = field(default_factory=dict)

    def run(self) -> "JobResult":
        try:
            return JobResult(self.key, value=self.fn(**self.kwargs))
        except Exception as e:
            where = ", ".join(f"{name}={value}" for name, value in self.context.items())
            error = f"{type(e).__name__}: {e}"
            return JobResult(self.key, error=f"{error} [{where}]" if where else error)


@dataclass
class JobResult:
    key: Tuple
    value: Any = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def _run_job(job: Job) -> JobResult:
    return job.run()


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count from the flag, then the environment variable, then 1."""
    if requested is None:
        value = os.environ.get(THREADS_ENV_VAR)
        if value is None:
            return 1
        try:
            requested = int(value)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got '{value}'")
    if requested < 1:
        raise ConfigError(f"worker count must be at least 1, got {requested}")
    return requested


class JobManager:
    """Runs jobs in a process pool and hands back their results sorted by key"""

    def __init__(self, workers: int = 1, progress: bool = False, description: str = "jobs"):
        if workers < 1:
            raise ConfigError(f"worker count must be at least 1, got {workers}")
        self.workers = workers
        self.progress = progress
        self.description = description
        # jobs waiting to run
        self.jobs: List[Job] = []
        self.executor: Optional[ProcessPoolExecutor] = None

    def submit(self, job: Job):
        self.jobs.append(job)

    def run_all(self) -> List[JobResult]:
        """Runs every submitted job; the order of the results does not depend on scheduling."""
        jobs, self.jobs = self.jobs, []
        log.info("running %d %s on %d worker(s)", len(jobs), self.description, self.workers)
        bar = tqdm(total=len(jobs), desc=self.description, disable=not self.progress)
        results = []
        try:
            if self.workers == 1 or len(jobs) < 2:
                for job in jobs:
                    results.append(self._finished(job.run(), bar))
            else:
                self.executor = ProcessPoolExecutor(max_workers=min(self.workers, len(jobs)))
                futures = [self.executor.submit(_run_job, job) for job in jobs]
                for future in as_completed(futures):
                    results.append(self._finished(future.result(), bar))
        finally:
            self.stop_all()
            bar.close()
        return sorted(results, key=lambda result: result.key)

    def _finished(self, result: JobResult, bar) -> JobResult:
        if result.failed:
            log.warning("job %s failed: %s", result.key, result.error)
        bar.update(1)
        return result

    def stop_all(self):
        """Cancels the jobs that have not started yet"""
        if self.executor is not None:
            self.executor.shutdown(wait=True, cancel_futures=True)
            self.executor = None
