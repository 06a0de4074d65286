import numpy as np
import pytest

from atomstress import _backend
from atomstress.core import ParticleState, SimulationCell, build_fcc_lattice
from atomstress.potentials import LennardJones

A_LJ = 1.556517851


@pytest.fixture
def lj():
    return LennardJones()


@pytest.fixture
def fcc4():
    return build_fcc_lattice(4, 4, 4, A_LJ)


@pytest.fixture(params=["python", "compiled"])
def backend(request):
    """Run a test under each kernel backend, restoring the default afterwards."""
    saved = _backend.kernels
    try:
        _backend.use(request.param)
    except ImportError:
        pytest.skip("compiled extension not built")
    yield request.param
    _backend.kernels = saved
    _backend.BACKEND = saved.NAME


def free_state(points, velocities=None, masses=1.0, pad=10.0):
    p = np.asarray(points, dtype=float)
    cell = SimulationCell.orthogonal(np.ptp(p, axis=0) + 2 * pad, (False, False, False), p.min(axis=0) - pad)
    n = len(p)
    return ParticleState(p, velocities, np.broadcast_to(masses, (n,)), np.full(n, "X", dtype=object), cell)


def random_cluster(rng, n, min_dist=0.9, box=3.0):
    """Random points with a minimum separation (rejection sampling)."""
    pts = []
    while len(pts) < n:
        p = rng.uniform(0, box, 3)
        if all(np.linalg.norm(p - q) >= min_dist for q in pts):
            pts.append(p)
    return np.array(pts)


# acceptance outcomes collected by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
