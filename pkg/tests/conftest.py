import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from trajgraph.model import Trajectory, TrajectoryStore

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_traj(rng, n, tid="t", scale=1.0, origin=(0.0, 0.0)):
    xy = np.asarray(origin) + np.cumsum(rng.normal(0, scale, size=(n, 2)), axis=0)
    return Trajectory(tid, xy)


def random_store(rng, n_traj, len_lo=4, len_hi=10, spread=10.0):
    trajs = []
    for i in range(n_traj):
        n = int(rng.integers(len_lo, len_hi + 1))
        origin = rng.uniform(-spread, spread, size=2)
        trajs.append(random_traj(rng, n, f"t{i:03d}", 0.5, origin))
    return TrajectoryStore(trajs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
