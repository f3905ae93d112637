import numpy as np
import pytest
import torch

from ecgt2t.synth_data import BeatTemplate, generate_record


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def clean_record():
    return generate_record(BeatTemplate(), "normal", heart_rate=60, duration=10, fs=500, seed=3)


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import summary_lines
    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
