import datetime

import numpy as np
import pytest

from tremorid.pipeline import PipelineConfig, dataset_features
from tremorid.signal_io import SensorRecording
from tremorid.synth import generate_dataset

# (criterion number, title, passed, detail) collected by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail}")


def make_recording(x, y=None, z=None, *, sensor="accelerometer", rate=100.0, subject="S01",
                   session="s1", date=datetime.date(2016, 3, 1), device="dev", t_ms=None):
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(x) if y is None else np.asarray(y, dtype=float)
    z = np.zeros_like(x) if z is None else np.asarray(z, dtype=float)
    if t_ms is None:
        t_ms = np.round(np.arange(len(x)) * 1000.0 / rate).astype(np.int64)
    return SensorRecording(subject_id=subject, session_id=session, session_date=date,
                           device_id=device, sensor=sensor, sample_rate_hz=rate,
                           t_ms=t_ms, x=x, y=y, z=z)


@pytest.fixture(scope="session")
def small_sessions():
    """4 subjects x 3 sessions x 20 s of synthetic recordings."""
    _, sessions = generate_dataset(4, 3, seed=5, duration_s=20.0)
    return sessions


@pytest.fixture(scope="session")
def small_features(small_sessions):
    return dataset_features(small_sessions, PipelineConfig())
