import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.spatial.transform import Rotation

from ri3d.geometry import diameter, select_key_vectors

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TIE_GAP = 1e-7  # relative gap required around every ordering the key-vector scan depends on


def random_cloud(rng: np.random.Generator, n: int) -> np.ndarray:
    """Anisotropic Gaussian, box or shell cloud with random scale and offset."""
    kind = rng.integers(3)
    if kind == 0:
        pts = rng.normal(size=(n, 3)) * rng.uniform(0.2, 3.0, size=3)
    elif kind == 1:
        pts = rng.uniform(-1, 1, size=(n, 3)) * rng.uniform(0.2, 3.0, size=3)
    else:
        g = rng.normal(size=(n, 3))
        pts = g / np.linalg.norm(g, axis=1, keepdims=True) * rng.uniform(0.5, 1.5, size=(n, 1))
    return pts * rng.uniform(0.1, 10.0) + rng.uniform(-5, 5, size=3)


def well_separated(pts: np.ndarray, gap: float = TIE_GAP) -> bool:
    """True when the distance orderings that decide the key vectors have gaps > gap * diameter."""
    c = pts.mean(axis=0)
    d = np.linalg.norm(pts - c, axis=1)
    key = select_key_vectors(pts, c)
    tol = gap * diameter(pts)
    desc = np.sort(d)[::-1]
    k2 = int(np.flatnonzero(np.argsort(-d, kind="stable") == key.idx2)[0])
    if np.any(np.diff(desc[:k2 + 2]) > -tol):
        return False
    asc = np.sort(d)
    k3 = int(np.flatnonzero(np.argsort(d, kind="stable") == key.idx3)[0])
    return not np.any(np.diff(asc[:k3 + 2]) < tol)


def screened_clouds(seed: int, count: int, n_range=(50, 2048)):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        pts = random_cloud(rng, int(rng.integers(n_range[0], n_range[1] + 1)))
        if well_separated(pts):
            out.append(pts)
    return out


def random_motion(rng: np.random.Generator):
    rot = Rotation.random(random_state=rng).as_matrix()
    return rot, rng.uniform(-10, 10, size=3)


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
