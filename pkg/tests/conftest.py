import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cellcontext import CellLayout  # noqa: E402

DOM = (0.0, 0.0, 100.0, 100.0)

# acceptance-criterion id -> (passed, detail); printed at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def octagon_layout(radius=30.0, center=(50.0, 50.0), domain=DOM):
    th = np.arange(8) * np.pi / 4
    xy = np.c_[center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]
    return CellLayout(xy, [0] * 8, domain, ["ring"])


def two_clusters_layout(seed=1):
    r = np.random.default_rng(seed)
    a = r.normal([30, 30], 7, (30, 2))
    b = r.normal([70, 65], 7, (30, 2))
    return CellLayout(np.clip(np.r_[a, b], 0, 100), [0] * 30 + [1] * 30, DOM, ["a", "b"])


def annulus_layout(seed=2):
    r = np.random.default_rng(seed)
    th = r.uniform(0, 2 * np.pi, 60)
    rad = r.uniform(30, 38, 60)
    ring = np.c_[50 + rad * np.cos(th), 50 + rad * np.sin(th)]
    core = r.normal([50, 50], 5, (15, 2))
    return CellLayout(np.r_[ring, core], [0] * 60 + [1] * 15, DOM, ["ring", "core"])


def random_layout(rng, n, n_classes=2, domain=DOM):
    x0, y0, x1, y1 = domain
    xy = np.c_[rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)]
    labels = rng.integers(0, n_classes, n)
    return CellLayout(xy, labels, domain, [f"c{k}" for k in range(n_classes)])


@pytest.fixture
def octagon():
    return octagon_layout()


@pytest.fixture
def clusters():
    return two_clusters_layout()


@pytest.fixture
def annulus():
    return annulus_layout()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
