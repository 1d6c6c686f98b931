import numpy as np
import pytest

from avmac.channel import builtin_channel, random_channel

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def gubner():
    return builtin_channel("gubner")


@pytest.fixture(scope="session")
def xor():
    return builtin_channel("xor")


@pytest.fixture(scope="session")
def adder():
    return builtin_channel("adder-noiseless")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_random_channels(count, seed=0, max_dims=(2, 2, 3, 2)):
    out = []
    for i in range(count):
        r = np.random.default_rng([seed, i])
        nx, ny, nz, ns = (int(r.integers(1, d + 1)) for d in max_dims)
        nz = max(nz, 2)
        out.append(random_channel(nx, ny, nz, ns, r, concentration=0.7))
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, note = ACCEPTANCE[k]
        terminalreporter.write_line(f"ACCEPTANCE {k} {'PASS' if ok else 'FAIL'}  {note}")
