import numpy as np
import pytest

from flowids.model import ModelConfig

# seq_len 6, units 8/8/4/8/8/4/1
SHRUNKEN = ModelConfig(seq_len=6, lstm1_units=8, lstm2_units=8, attn_units=4,
                       lstm3_units=8, dense1_units=8, dense2_units=4, seed=11)


# filled by test_acceptance, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_config():
    return SHRUNKEN


def separable_set(n=128, seq_len=8, seed=1):
    """Two well-separated classes of [0, 1] feature rows, balanced."""
    r = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    r.shuffle(y)
    X = np.clip(np.where(y[:, None] == 1, 0.7, 0.3) + r.normal(0, 0.1, (n, seq_len)), 0, 1)
    return X, y
