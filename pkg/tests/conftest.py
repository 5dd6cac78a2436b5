from __future__ import annotations

import pytest

from compound_render.config import parse_config
from compound_render.simrender.scene import david_like_mesh, procedural_volume
from compound_render.simrender.simulator import CostModel, SimConfig, simulate

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
    ACCEPTANCE[number] = (title, bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mesh():
    return david_like_mesh(5000, seed=1, radius=1.4)


@pytest.fixture(scope="session")
def volume():
    return procedural_volume(32, seed=0)


def run(text: str, scene, frames: int = 1, cost: CostModel | None = None, **sim):
    return simulate(parse_config(text), scene, cost or CostModel(), SimConfig(frames=frames, **sim))


ZERO_COST = dict(
    per_triangle=0,
    per_fragment=0,
    per_pixel_readback=0,
    per_byte_transmit=0,
    per_pixel_assemble=0,
    fixed_per_task=0,
    draw_fixed=0,
    readback_fixed=0,
    assemble_fixed=0,
)
