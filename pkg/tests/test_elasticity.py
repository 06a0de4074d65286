import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomstress.elasticity import (
    CubicConstants,
    Moduli,
    characteristic_roots,
    cubic_constants_fd,
    engineering_moduli,
    isotropic_constants,
    kirsch_anisotropic,
    kirsch_concentration,
    kirsch_isotropic,
    plane_strain_compliance,
    relaxed_lattice_constant,
    thermal_stress,
    uniaxial_cell_strain,
)
from atomstress.potentials import LennardJones

LJ_C = CubicConstants(87.652, 50.379, 50.379)


@pytest.fixture(scope="module")
def lj_constants():
    a = relaxed_lattice_constant(LennardJones())
    return a, cubic_constants_fd(LennardJones(), a)


def test_relaxed_lattice_and_constants(lj_constants):
    a, c = lj_constants
    assert a == pytest.approx(1.556, abs=1e-3)
    assert c.c11 == pytest.approx(87.652, abs=0.5)
    assert c.c12 == pytest.approx(50.379, abs=0.5)
    assert c.c44 == pytest.approx(50.379, abs=0.5)


def test_constants_converged_in_amplitude(lj_constants):
    a, c = lj_constants
    half = cubic_constants_fd(LennardJones(), a, amplitude=5e-5)
    for x, y in ((c.c11, half.c11), (c.c12, half.c12), (c.c44, half.c44)):
        assert abs(x - y) / abs(x) < 1e-3


def test_unrelaxed_reference_rejected():
    with pytest.raises(ValueError):
        cubic_constants_fd(LennardJones(), 1.50)


def test_engineering_moduli():
    m = engineering_moduli(LJ_C)
    assert m.E == pytest.approx(50.877, abs=1e-3)
    assert m.nu == pytest.approx(0.365, abs=1e-3)
    assert m.mu == 50.379
    # uniaxial stress along a cube axis: E = 1/s11, nu = -s12/s11
    S = np.linalg.inv(LJ_C.stiffness())
    assert m.E == pytest.approx(1 / S[0, 0], rel=1e-12)
    assert m.nu == pytest.approx(-S[0, 1] / S[0, 0], rel=1e-12)
    with pytest.raises(ValueError):
        Moduli(-1.0, 1.0, 0.3)
    with pytest.raises(ValueError):
        CubicConstants(1.0, 2.0, 1.0)


def test_uniaxial_cell_and_thermal_stress():
    l1, l2, l3 = uniaxial_cell_strain(1.0, engineering_moduli(LJ_C), 10, 1.0)
    assert l1 == pytest.approx(10.197, abs=1e-3)
    assert l2 == pytest.approx(9.928, abs=1e-3) and l3 == l2
    assert thermal_stress(CubicConstants(118.1, 62.3, 28.0), 1.6e-5, 310.0) == pytest.approx(-1.204, abs=1e-3)


def kirsch_polar_oracle(p, a, r, th):
    """Textbook isotropic Kirsch stresses in polar components, rotated to Cartesian."""
    srr = p / 2 * (1 - a**2 / r**2) + p / 2 * (1 + 3 * a**4 / r**4 - 4 * a**2 / r**2) * np.cos(2 * th)
    stt = p / 2 * (1 + a**2 / r**2) - p / 2 * (1 + 3 * a**4 / r**4) * np.cos(2 * th)
    srt = -p / 2 * (1 - 3 * a**4 / r**4 + 2 * a**2 / r**2) * np.sin(2 * th)
    c, s = np.cos(th), np.sin(th)
    Q = np.array([[c, -s], [s, c]]).transpose(2, 0, 1)
    P = np.array([[srr, srt], [srt, stt]]).transpose(2, 0, 1)
    return Q @ P @ Q.transpose(0, 2, 1)


def test_isotropic_limit_matches_textbook():
    rng = np.random.default_rng(4)
    r = rng.uniform(1.0, 5.0, 200)
    th = rng.uniform(0, 2 * np.pi, 200)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    ref = kirsch_polar_oracle(1.0, 1.0, r, th)
    iso = kirsch_isotropic(1.0, 1.0, pts).stress
    assert np.abs(iso - ref).max() < 1e-12
    # the anisotropic solver on isotropic constants
    ani = kirsch_anisotropic(isotropic_constants(1.0, 0.3), 1.0, 1.0, pts).stress
    assert np.abs(ani - ref).max() < 1e-5
    assert kirsch_concentration(isotropic_constants(2.0, 0.25)) == pytest.approx(3.0, abs=1e-5)


def test_isotropic_displacement_limit():
    rng = np.random.default_rng(5)
    r = rng.uniform(1.2, 4.0, 50)
    th = rng.uniform(0, 2 * np.pi, 50)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    E, nu = 3.0, 0.3
    a = kirsch_anisotropic(isotropic_constants(E, nu), 1.0, 1.0, pts).displacement
    b = kirsch_isotropic(1.0, 1.0, pts, E=E, nu=nu).displacement
    assert np.abs(a - b).max() < 1e-5


def test_lj_concentration_and_far_field():
    # reduced compliances give two roots off the real axis
    mu = characteristic_roots(plane_strain_compliance(LJ_C.stiffness()))
    assert np.all(mu.imag > 0)
    k = kirsch_concentration(LJ_C)
    assert 2.3 < k < 2.6
    far = kirsch_anisotropic(LJ_C, 0.5, 1.0, np.array([[400.0, 300.0]])).stress[0]
    assert far == pytest.approx(np.array([[0.5, 0.0], [0.0, 0.0]]), abs=1e-5)


@given(st.floats(0, 2 * np.pi))
@settings(max_examples=40, deadline=None)
def test_rim_is_traction_free(th):
    n = np.array([np.cos(th), np.sin(th)])
    s = kirsch_anisotropic(LJ_C, 1.0, 2.0, 2.0 * n).stress
    assert np.abs(s @ n).max() < 1e-9


def fd_grad(f, pts, h=1e-5):
    out = []
    for e in np.eye(2):
        out.append((f(pts + h * e) - f(pts - h * e)) / (2 * h))
    return out


def test_equilibrium_and_constitutive_law():
    rng = np.random.default_rng(6)
    r = rng.uniform(1.3, 4.0, 40)
    th = rng.uniform(0, 2 * np.pi, 40)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    sig = lambda p: kirsch_anisotropic(LJ_C, 1.0, 1.0, p).stress
    dx, dy = fd_grad(sig, pts)
    div = np.stack([dx[:, 0, 0] + dy[:, 0, 1], dx[:, 1, 0] + dy[:, 1, 1]], axis=1)
    assert np.abs(div).max() < 1e-6
    # plane strain: stress from the symmetric gradient of the displacement
    disp = lambda p: kirsch_anisotropic(LJ_C, 1.0, 1.0, p).displacement
    ux, uy = fd_grad(disp, pts)
    e11, e22 = ux[:, 0], uy[:, 1]
    g12 = ux[:, 1] + uy[:, 0]
    s = sig(pts)
    c = LJ_C
    assert np.allclose(s[:, 0, 0], c.c11 * e11 + c.c12 * e22, atol=1e-6)
    assert np.allclose(s[:, 1, 1], c.c12 * e11 + c.c11 * e22, atol=1e-6)
    assert np.allclose(s[:, 0, 1], c.c44 * g12, atol=1e-6)


def test_points_inside_hole_are_zeroed():
    f = kirsch_anisotropic(LJ_C, 1.0, 2.0, np.array([[0.5, 0.5], [3.0, 0.0]]))
    assert f.inside.tolist() == [True, False]
    assert np.all(f.stress[0] == 0) and np.all(f.displacement[0] == 0)
