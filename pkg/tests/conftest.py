import numpy as np
import pytest

from qimaging.model import FrameStack, row_bytes


def random_sparse_stack(rng, n_frames, width, height, p):
    """iid Bernoulli(p) stack built as a count draw plus distinct positions."""
    total = n_frames * height * width
    k = int(rng.binomial(total, p))
    pos = np.unique(rng.integers(0, total, size=k))
    while pos.size < k:
        extra = rng.integers(0, total, size=k - pos.size)
        pos = np.unique(np.concatenate([pos, extra]))
    f, rem = np.divmod(pos, height * width)
    y, x = np.divmod(rem, width)
    packed = np.zeros((n_frames, height, row_bytes(width)), np.uint8)
    np.bitwise_or.at(packed, (f, y, x >> 3), (1 << (x & 7)).astype(np.uint8))
    return FrameStack(width, height, packed)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


# one line per acceptance criterion, printed after the test summary
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
