import numpy as np
import pytest

from loadsplit.constraints import ConstraintSet, build_B, build_Y
from loadsplit.synth import SynthSpec, generate


def planted_constraints(ds):
    """Constraint set built from a synthetic dataset's own indicators."""
    t, cm = ds.truth, ds.curves
    B = build_B(cm.E, cm.dates)
    Y = build_Y(t.msi, t.monthly.sum(axis=0), B.sum(axis=1))
    return ConstraintSet.with_unit_sources(t.S_true.shape[0], cm.p, B, t.A, Y)


@pytest.fixture(scope="session")
def planted():
    return generate(SynthSpec(n_days=180, n_sources=3))


@pytest.fixture(scope="session")
def planted_noisy():
    return generate(SynthSpec(n_days=180, n_sources=3, noise=0.01))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_load(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("timestamp,load_mw\n")
        for ts, v in rows:
            fh.write(f"{ts},{v}\n")
    return path


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
