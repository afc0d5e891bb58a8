from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from magforest.dataset import TargetSpec, chronological_split  # noqa: E402
from magforest.metrics import drms  # noqa: E402
from magforest.models import make_model  # noqa: E402
from magforest.preprocess import apply_scaler, fit_scaler  # noqa: E402
from magforest.synth import POSITION_FEATURES, SynthConfig, gen_flight, tl_calibration_config  # noqa: E402

FIXTURE_SEED = 1002

_outcomes: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    tags = [v for k, v in report.user_properties if k == "acceptance"]
    if not tags:
        return
    number, title = tags[0]
    status = _outcomes.get(number, ("PASS", title))[0]
    if report.failed:
        status = "FAIL"
    elif report.skipped and status != "FAIL":
        status = "SKIP"
    _outcomes[number] = (status, title)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            item.user_properties.append(("acceptance", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status, title = _outcomes[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")


@pytest.fixture(scope="session")
def flight():
    """Default synthetic survey flight (seed 1002, 30 minutes)."""
    return gen_flight(SynthConfig(seed=FIXTURE_SEED))


@pytest.fixture(scope="session")
def calibration_flight():
    return gen_flight(tl_calibration_config(), calibrate=False)


@pytest.fixture(scope="session")
def positioning(flight):
    """Test DRMS of each model kind on the default positioning features."""
    start = time.perf_counter()
    train, test = chronological_split(flight.frame, 0.2)
    target = TargetSpec.position()
    feats = list(POSITION_FEATURES)
    params = fit_scaler(train.matrix(feats))
    X_tr = apply_scaler(params, train.matrix(feats))
    X_te = apply_scaler(params, test.matrix(feats))
    out = {}
    for kind in ("forest", "tree", "knn"):
        model = make_model({"kind": kind}).fit(X_tr, target.values(train))
        out[kind] = drms(model.predict(X_te), target.values(test))
    out["seconds"] = time.perf_counter() - start
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
