import pytest

from src.default_constants import THREADS_ENV_VAR
from src.errors import ConfigError
from src.threading.job_manager import Job, JobManager, resolve_workers


def power_jobs(keys):
    return [Job(key=(k,), fn=pow, kwargs={"base": 2, "exp": k}) for k in keys]


class TestJobManager:
    def test_results_sorted_by_key(self):
        manager = JobManager()
        for job in power_jobs([3, 1, 2]):
            manager.submit(job)
        results = manager.run_all()
        assert [r.key for r in results] == [(1,), (2,), (3,)]
        assert [r.value for r in results] == [2, 4, 8]
        assert manager.jobs == []

    def test_failure_is_recorded(self):
        manager = JobManager()
        manager.submit(Job(key=(0,), fn=pow, kwargs={"base": 0, "exp": -1}))
        manager.submit(*power_jobs([1]))
        failed, ok = manager.run_all()
        assert failed.failed and "ZeroDivisionError" in failed.error
        assert not ok.failed and ok.value == 2

    def test_any_exception_is_recorded_with_context(self):
        manager = JobManager()
        manager.submit(Job(key=(0,), fn=pow, kwargs={"base": "2", "exp": 2}, context={"seed": 3, "stream": 12}))
        (result,) = manager.run_all()
        assert result.error.startswith("TypeError: ")
        assert result.error.endswith("[seed=3, stream=12]")

    def test_pool_matches_serial(self):
        serial, pooled = JobManager(1), JobManager(2)
        for manager in (serial, pooled):
            for job in power_jobs([5, 0, 4, 2]):
                manager.submit(job)
        assert [r.value for r in serial.run_all()] == [r.value for r in pooled.run_all()]

    def test_invalid_worker_count(self):
        with pytest.raises(ConfigError):
            JobManager(0)


class TestResolveWorkers:
    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "8")
        assert resolve_workers(3) == 3

    def test_environment_fallback(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "4")
        assert resolve_workers() == 4
        monkeypatch.delenv(THREADS_ENV_VAR)
        assert resolve_workers() == 1

    def test_invalid_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "many")
        with pytest.raises(ConfigError, match=THREADS_ENV_VAR):
            resolve_workers()
