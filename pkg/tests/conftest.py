from __future__ import annotations

import numpy as np
import pytest

from matres.geometry import PotentialSpec, random_potential


def well(v0: float = 1.0, a: float = 0.0, b: float = 1.0) -> PotentialSpec:
    return PotentialSpec(1, [a, b], [[[v0]]])


def diag_wells() -> PotentialSpec:
    """diag(V=1 on [0,1], V=1 on [0,2])."""
    return PotentialSpec(2, [0.0, 1.0, 2.0], [np.diag([1.0, 1.0]), np.diag([0.0, 1.0])])


def random_set(seed: int, count: int, n_max: int = 3, l1_max: float = 10.0, **kw):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, n_max + 1))
        pieces = int(rng.integers(1, 4))
        span = float(rng.uniform(0.5, 2.0))
        out.append(random_potential(rng, n, pieces, span, l1_max, **kw))
    return out


@pytest.fixture
def scalar_well():
    return well()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def well_disk_set():
    """Resonances of the [0, 1] well covering the lower half disk of radius 200."""
    from matres.asymptotics import Sector, region_for
    from matres.resonances import locate_resonances

    r = region_for([Sector("positive"), Sector("negative"), Sector.interior(0.3, 2.8)], 200.0)
    return locate_resonances(well(), r)


# --- acceptance reporting ------------------------------------------------------

ACCEPTANCE: dict = {}


def record(criterion: int, part: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAIL'} ({d})" for name, good, d in parts)
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
