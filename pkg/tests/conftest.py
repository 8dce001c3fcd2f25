import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from ncva.chain import TABLE1, ChainModel, build_system

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

W42 = 2 * math.pi * 4.2
W83 = 2 * math.pi * 8.3


@pytest.fixture(scope="session")
def table1():
    return build_system(TABLE1)


def random_chain(rng, d=None, p=None, n=None, damped=True, d_max=8):
    d = int(rng.integers(1, d_max + 1)) if d is None else d
    p = int(rng.integers(1, d + 1)) if p is None else p
    n = int(rng.integers(p, d + 1)) if n is None else n
    masses = rng.uniform(0.2, 2.0, d)
    stiff = rng.uniform(200.0, 1500.0, d + 1)
    damp = rng.uniform(0.3, 5.0, d + 1) if damped else np.zeros(d + 1)
    ab = (rng.uniform(0.2, 1.0), rng.uniform(100.0, 800.0),
          rng.uniform(0.3, 3.0) if damped else 0.0)
    return ChainModel(masses, stiff, damp, ab, p, n, d)


@st.composite
def chains(draw, d_max=8, damped=True):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_chain(np.random.default_rng(seed), d_max=d_max, damped=damped)


# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
