import numpy as np
import pytest
from hypothesis import settings

from crlqa.mask_io import LabelMask
from crlqa.phantom import PhantomSpec, render

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def grid(shape, **regions):
    """Label grid from slices: grid((10, 10), head=np.s_[0:3, 0:3])."""
    codes = {"head": 1, "body": 2, "palate": 3}
    labels = np.zeros(shape, dtype=np.uint8)
    for name, where in regions.items():
        labels[where] = codes[name]
    return LabelMask(labels)


@pytest.fixture(scope="session")
def default_case():
    return render(PhantomSpec(), "default")


# Acceptance results: criterion number -> list of (part, passed, detail).
ACCEPTANCE = {}


def record(criterion: int, part: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[criterion]
        ok = all(p for _, p, _ in parts)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}")
        for part, passed, detail in parts:
            mark = "pass" if passed else "FAIL"
            terminalreporter.write_line(f"    [{mark}] {part}" + (f": {detail}" if detail else ""))
