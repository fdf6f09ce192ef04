import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vjamp.cascade import Cascade, HaarFeature, Stage, WeakClassifier  # noqa: E402
from vjamp.imaging import Rect  # noqa: E402

DATA = Path(__file__).parents[1] / "src" / "vjamp" / "data"

# filled by test_acceptance.py, printed once at the end of the session
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0].rstrip("ab")), k)):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{status:4s}  {key}: {detail}")


def random_feature(rng, ww=24, wh=24) -> HaarFeature:
    n = int(rng.integers(2, 4))
    rects = []
    for _ in range(n):
        w = int(rng.integers(1, ww + 1))
        h = int(rng.integers(1, wh + 1))
        x = int(rng.integers(0, ww - w + 1))
        y = int(rng.integers(0, wh - h + 1))
        rects.append((Rect(x, y, w, h), int(rng.choice([-2, -1, 1, 2, 3]))))
    return HaarFeature(tuple(rects))


def random_cascade(rng, n_stages=None, ww=24, wh=24) -> Cascade:
    """Cascade with random features whose stage thresholds pass roughly half the windows."""
    n_stages = n_stages or int(rng.integers(1, 6))
    stages = []
    for _ in range(n_stages):
        weak = []
        for _ in range(int(rng.integers(1, 6))):
            f = random_feature(rng, ww, wh)
            weak.append(WeakClassifier(f, int(rng.integers(-3000, 3000)), int(rng.integers(-500, 1000)),
                                       int(rng.integers(-500, 1000))))
        lo = sum(min(w.left_val, w.right_val) for w in weak)
        hi = sum(max(w.left_val, w.right_val) for w in weak)
        stages.append(Stage(tuple(weak), int(rng.integers(lo, hi + 1))))
    return Cascade(tuple(stages), ww, wh)


@pytest.fixture(scope="session")
def reference_cascade():
    from vjamp.cascade import load_cascade

    return load_cascade(DATA / "reference.vjc")


@pytest.fixture(scope="session")
def corpus_entries():
    from vjamp.corpus import read_manifest

    return read_manifest(DATA / "faces" / "manifest.txt")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
