import numpy as np
import pytest

from sbw_dob import dynamics
from sbw_dob.simulation import ScenarioConfig, run_scenario


@pytest.fixture(scope="session")
def ref_hw():
    return dynamics.HwParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def nonlinear_runs():
    """Nonlinear plant with KF and EKF observers, same seed, rejection off/on."""
    runs = {}
    for filt in ("kf", "ekf"):
        for rej in (False, True):
            cfg = ScenarioConfig(model="nonlinear", filter=filt).with_rejection(rej)
            runs[filt, rej] = (cfg, run_scenario(cfg))
    return runs


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.TITLES):
        if n not in mod.RESULTS:
            terminalreporter.write_line(f"criterion {n}: NOT RUN  {mod.TITLES[n]}")
            continue
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if ok else 'FAIL'}  {mod.TITLES[n]}  [{detail}]")
