import os
from pathlib import Path

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mitdb_dir():
    """Directory with real MIT-BIH files (100.hea/.dat/.atr), if the user has them."""
    d = os.environ.get("ECGFUSION_MITDB")
    if not d or not (Path(d) / "100.hea").exists():
        pytest.skip("set ECGFUSION_MITDB to a directory holding MIT-BIH record 100")
    return Path(d)


def tiny_config(**dataset):
    """Small synthetic experiment used across the harness and CLI tests."""
    ds = {"synthetic_records": 1, "synthetic_beats": 150, "L": 64}
    ds.update(dataset)
    return {
        "seed": 3,
        "dataset": ds,
        "gaf": {"res": 8},
        "models": {
            "rnn": {"hidden_size": 8, "dense": [16, 8], "stride": 4},
            "mlp": {"hidden": [32, 16]},
            "train": {"max_epochs": 4, "patience": 2},
        },
        "sweep": {"snrs": [10, 0], "kinds": ["awgn", "bw"], "workers": 2},
    }


@pytest.fixture
def tiny():
    return tiny_config


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in results.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
