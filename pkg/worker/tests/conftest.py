import pytest

from workerproc import FIXTURE_MODEL, WorkerProc


@pytest.fixture(scope="module")
def worker():
    w = WorkerProc()
    yield w
    w.close()


@pytest.fixture(scope="module")
def service():
    from mlm_worker import WorkerService

    return WorkerService(str(FIXTURE_MODEL))
