import time

import pytest

import erdob


def _timed_run(cfg):
    start = time.perf_counter()
    trace = erdob.run(cfg)
    return trace, time.perf_counter() - start


@pytest.fixture(scope="session")
def ex1_replay_30():
    """Benchmark 1, replay mode, stock defaults, 30 s horizon."""
    return _timed_run(erdob.SimConfig(scenario="example1", t_end=30.0, mode="replay"))


@pytest.fixture(scope="session")
def ex1_baseline_60():
    """Benchmark 1, plain gradient law only, 60 s horizon."""
    return _timed_run(erdob.SimConfig(scenario="example1", t_end=60.0, mode="baseline"))


@pytest.fixture(scope="session")
def ex2_replay_30():
    """Benchmark 2 (two-mass-spring), replay mode, defaults, 30 s."""
    return _timed_run(erdob.SimConfig(scenario="example2", t_end=30.0, mode="replay"))


# Acceleration comparisons run at a gentle adaptation gain so the baseline
# law is visibly slow and the replay speed-up is measurable well inside the
# horizon; both modes share the identical configuration.

@pytest.fixture(scope="session")
def ex1_compare_pair():
    base = dict(scenario="example1", t_end=60.0, gamma=5.0, kappa=10.0)
    tb, _ = _timed_run(erdob.SimConfig(mode="baseline", **base))
    tr, _ = _timed_run(erdob.SimConfig(mode="replay", **base))
    return tb, tr


@pytest.fixture(scope="session")
def ex2_compare_pair():
    base = dict(scenario="example2", t_end=60.0, gamma=2.0, kappa=25.0)
    tb, _ = _timed_run(erdob.SimConfig(mode="baseline", **base))
    tr, _ = _timed_run(erdob.SimConfig(mode="replay", **base))
    return tb, tr


@pytest.fixture(scope="session")
def ex1_rate_run():
    """Gentle gains so the estimation decay is measurable over [T+1, T+3]."""
    trace, _ = _timed_run(
        erdob.SimConfig(scenario="example1", t_end=15.0, mode="replay", gamma=2.0, kappa=1.0)
    )
    return trace
