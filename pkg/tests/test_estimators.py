import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomstress.core import ParticleState, SimulationCell, Snapshot, build_fcc_lattice
from atomstress.dynamics import MinimizerConfig, initialize_velocities, minimize
from atomstress.estimators import (
    FieldGrid,
    PlanarProbe,
    a_hat,
    assemble_tensor_from_tractions,
    continuum_fields,
    crossing_velocity,
    da_stress,
    global_virial,
    hardy_kinetic_bruteforce,
    hardy_stress,
    hardy_stress_1d,
    stress_star_counterexample,
    tsai_traction,
    tsai_traction_many,
    virial_pressure,
    virial_stress,
    virial_stress_many,
)
from atomstress.potentials import LennardJones, chain_pair_terms_1d, evaluate
from atomstress.weighting import WeightingFunction

from conftest import A_LJ, free_state


def lj_dvdr(r):
    return 4 * (-12 * r**-13 + 6 * r**-7) - 2 * 0.0078 * r


def sharp(R):
    return WeightingFunction("constant-mollified", R, epsilon=0.0)


def strained_crystal(n=6, f=(1.01, 0.995, 0.995), T=0.0, seed=1):
    s = build_fcc_lattice(n, n, n, A_LJ)
    f = np.asarray(f)
    s = s.replace(positions=s.positions * f, cell=s.cell.scaled(f))
    if T > 0:
        s = initialize_velocities(s, T, seed)
    return s


# ------------------------------------------------------------ continuum fields


def test_continuum_fields_examples():
    wf = sharp(1.0)
    one = free_state([[0.0, 0, 0]], velocities=[[1.0, 2.0, 3.0]], masses=2.5)
    rho, mom, vel = continuum_fields(one, wf, FieldGrid.single([0, 0, 0]))
    assert rho[0] == pytest.approx(2.5 * 3 / (4 * np.pi), rel=1e-14)
    assert np.allclose(vel[0], [1, 2, 3])
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 3, (30, 3))
    st_ = free_state(x, velocities=np.tile([0.3, -0.1, 0.2], (30, 1)), masses=rng.uniform(1, 2, 30))
    _, _, vel = continuum_fields(st_, WeightingFunction("gaussian", 0.7), FieldGrid(rng.uniform(0, 3, (5, 3))))
    assert np.allclose(vel, [0.3, -0.1, 0.2], atol=1e-13)
    _, _, vel = continuum_fields(one, wf, FieldGrid.single([10, 0, 0]))
    assert np.all(np.isnan(vel))


def test_fcc_density(fcc4):
    wf = WeightingFunction("constant-mollified", 2.0 * A_LJ, epsilon=A_LJ)
    rho, _, _ = continuum_fields(fcc4, wf, FieldGrid.single(fcc4.cell.lengths / 2 + 0.1))
    assert rho[0] == pytest.approx(4 / A_LJ**3, rel=0.02)


# ------------------------------------------------------------ Hardy and virial


def test_single_bond_hardy_and_virial():
    r = 1.2
    s = free_state([[0, 0, 0], [r, 0, 0]])
    snap = Snapshot(0.0, s, evaluate(s, LennardJones()))
    R = 3.0
    V = 4 / 3 * np.pi * R**3
    # -f12 (x1 - x2) / V with f12 = phi'(r) (x2 - x1)/r
    expect = np.zeros((3, 3))
    expect[0, 0] = lj_dvdr(r) * r / V
    h = hardy_stress(snap, sharp(R), FieldGrid.single([0.6, 0, 0]), LennardJones())
    assert np.allclose(h.potential[0], expect, rtol=1e-12)
    assert np.all(h.kinetic[0] == 0)
    v = virial_stress(snap, [0.6, 0, 0], R, LennardJones())
    assert np.allclose(v.potential[0], expect, rtol=1e-12)


def test_virial_kinetic_single_particle():
    s = free_state([[0.0, 0, 0]], velocities=[[1.0, -2.0, 0.5]], masses=3.0)
    R = 1.0
    v = virial_stress(s, [0, 0, 0], R, LennardJones(), reference_velocity=np.zeros(3))
    vel = np.array([1.0, -2.0, 0.5])
    assert np.allclose(v.kinetic[0], -3.0 * np.outer(vel, vel) / (4 / 3 * np.pi), rtol=1e-14)
    with pytest.warns(RuntimeWarning):
        empty = virial_stress(s, [50, 0, 0], R, LennardJones())
    assert empty.metadata["empty"]
    with pytest.raises(ValueError):
        virial_stress(s, [0, 0, 0], 0.0, LennardJones())


def test_hardy_equals_virial_when_kernel_covers_cluster(lj):
    rng = np.random.default_rng(2)
    s = build_fcc_lattice(3, 3, 3, A_LJ, periodic=(False,) * 3)
    s = minimize(s, lj, MinimizerConfig(ftol=1e-6)).state
    s = s.replace(velocities=rng.normal(scale=0.1, size=(s.n, 3)))
    c = s.positions.mean(axis=0)
    R = 20.0
    h = hardy_stress(s, sharp(R), FieldGrid.single(c), lj).total[0]
    v = virial_stress(s, c, R, lj).total[0]
    assert np.trace(h) == pytest.approx(np.trace(v), abs=1e-10)
    assert np.allclose(h, v, atol=1e-10)


@given(st.integers(0, 10**6))
@settings(max_examples=10, deadline=None)
def test_symmetry_hardy_virial(seed):
    rng = np.random.default_rng(seed)
    s = strained_crystal(4, T=0.1, seed=seed)
    s = s.replace(positions=s.positions + rng.normal(scale=0.03, size=(s.n, 3)))
    model = LennardJones()
    snap = Snapshot(0.0, s, evaluate(s, model))
    pts = rng.uniform(0, 1, (3, 3)) * s.cell.lengths
    for wf in (WeightingFunction("quartic-spline", 2.0), WeightingFunction("constant-mollified", 2.5, epsilon=0.5)):
        h = hardy_stress(snap, wf, FieldGrid(pts), model)
        for t in (h.potential, h.kinetic):
            for q in t:
                assert np.abs(q - q.T).max() <= 1e-12 * np.abs(q).max()
    v = virial_stress_many(snap, pts, 2.5, model)
    for q in v.total:
        assert np.abs(q - q.T).max() <= 1e-12 * np.abs(q).max()


def test_hardy_virial_ladder_and_whole_cell_limit(lj):
    s = strained_crystal(6, T=0.05)
    snap = Snapshot(0.0, s, evaluate(s, lj))
    x = s.cell.lengths / 2 + 0.013
    diffs = []
    for R in (2 * A_LJ, 4 * A_LJ, 6 * A_LJ, 8 * A_LJ):
        h = hardy_stress(snap, sharp(R), FieldGrid.single(x), lj).total[0]
        v = virial_stress(snap, x, R, lj).total[0]
        diffs.append(np.linalg.norm(h - v) / np.linalg.norm(h))
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    # whole-cell averaging: kernel with the cell's volume against the cell virial
    V = s.cell.volume
    k, p = global_virial(s, snap.report, V)
    R = (3 * V / (4 * np.pi)) ** (1 / 3)
    wf = WeightingFunction("constant-mollified", R, epsilon=0.5 * R)
    h = hardy_stress(snap, wf, FieldGrid.single(x), lj).total[0]
    assert np.linalg.norm(h - (k + p)) / np.linalg.norm(k + p) < 0.01


@given(st.integers(0, 10**6), st.integers(2, 20))
@settings(max_examples=25, deadline=None)
def test_hardy_kinetic_vs_bruteforce(seed, n):
    rng = np.random.default_rng(seed)
    L = rng.uniform(5.5, 9, 3)
    per = tuple(bool(b) for b in rng.integers(0, 2, 3))
    s = ParticleState(
        rng.uniform(0, 1, (n, 3)) * L, rng.normal(size=(n, 3)), rng.uniform(0.5, 2, n), "X",
        SimulationCell.orthogonal(L, per),
    )
    wf = WeightingFunction("constant-mollified", rng.uniform(1, 4), epsilon=0.3)
    x = rng.uniform(0, 1, 3) * L
    fast = hardy_stress(s, wf, FieldGrid.single(x), LennardJones()).kinetic[0]
    brute = hardy_kinetic_bruteforce(s, wf, x)
    assert np.abs(fast - brute).max() <= 1e-12 * max(np.abs(brute).max(), 1e-300)


def test_grid_order_independence(lj):
    s = strained_crystal(4, T=0.1)
    snap = Snapshot(0.0, s, evaluate(s, lj))
    pts = np.random.default_rng(4).uniform(0, 6, (6, 3))
    wf = WeightingFunction("gaussian", 0.8, gaussian_cutoff=3.0)
    a = hardy_stress(snap, wf, FieldGrid(pts), lj).total
    b = hardy_stress(snap, wf, FieldGrid(pts[::-1]), lj).total[::-1]
    assert np.array_equal(a, b)


def test_time_average_is_mean(lj):
    s = strained_crystal(4, T=0.1)
    s2 = s.replace(velocities=-s.velocities)
    snaps = [Snapshot(0.0, s), Snapshot(0.1, s2)]
    wf = sharp(2.0)
    grid = FieldGrid.single([3, 3, 3])
    avg = hardy_stress(snaps, wf, grid, lj).total
    one = hardy_stress(snaps[0], wf, grid, lj).total
    assert np.allclose(avg, one, atol=1e-13)


def test_virial_pressure_ideal_gas():
    rng = np.random.default_rng(9)
    n = 200
    s = ParticleState(rng.uniform(0, 50, (n, 3)), rng.normal(size=(n, 3)), 1.0, "X",
                      SimulationCell.orthogonal([50, 50, 50]))
    s = s.replace(velocities=s.velocities - s.velocities.mean(axis=0))
    rep = evaluate(s, LennardJones())
    pk, pv, pt = virial_pressure(s, rep, 50.0**3)
    assert pk == pytest.approx(np.sum(s.velocities**2) / (3 * 50.0**3), rel=1e-12)
    assert pt == pytest.approx(pk + pv)


# ------------------------------------------------------------ double average


def da_monte_carlo(a, b, R, samples=1_000_000, seed=0):
    """MC estimate of int_0^1 ds int dz w(a - s z) w(b + (1-s) z) z for a sharp kernel."""
    rng = np.random.default_rng(seed)
    c = 3 / (4 * np.pi * R**3)
    s = rng.uniform(0, 1, samples)
    s = s[(s > 1e-6) & (s < 1 - 1e-6)]
    # sample z in the smaller of the two balls that carry the integrand
    use1 = s >= 0.5
    center = np.where(use1[:, None], a / s[:, None], -b / (1 - s)[:, None])
    rad = np.where(use1, R / s, R / (1 - s))
    d = rng.normal(size=(s.size, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    z = center + d * (rad * rng.uniform(0, 1, s.size) ** (1 / 3))[:, None]
    vol = 4 / 3 * np.pi * rad**3
    w1 = np.linalg.norm(a - s[:, None] * z, axis=1) < R
    w2 = np.linalg.norm(b + (1 - s)[:, None] * z, axis=1) < R
    vals = (c * c * vol * (w1 & w2))[:, None] * z
    return vals.sum(axis=0) / samples


def test_da_single_pair_vs_monte_carlo(backend):
    from atomstress import _backend

    R = 1.5
    wf = sharp(R)
    a = np.array([[-0.4, 0.1, 0.0]])
    b = np.array([[0.6, -0.2, 0.3]])
    I = _backend.kernels.da_integrals(wf.params, wf.radii_of_interest(), a, b)[0]
    ref = da_monte_carlo(a[0], b[0], R)
    assert np.allclose(I, ref, rtol=0.01, atol=0.01 * np.abs(ref).max())


def test_da_disjoint_supports(lj):
    s = free_state([[0, 0, 0], [1.1, 0, 0]])
    snap = Snapshot(0.0, s, evaluate(s, lj))
    far = da_stress(snap, sharp(1.0), FieldGrid.single([0.55, 5.0, 0]), lj)
    assert np.all(far.potential == 0)


def test_da_profile_integrates_to_bond_vector(backend):
    from atomstress import _backend

    # int dx I(x_a - x, x_b - x) = x_a - x_b, checked by Monte-Carlo over x
    R = 2.0
    wf = sharp(R)
    xa, xb = np.array([-0.55, 0.1, 0]), np.array([0.55, -0.1, 0.2])
    rng = np.random.default_rng(0)
    L = R + 1.0
    X = rng.uniform(-L, L, (100_000, 3))
    I = _backend.kernels.da_integrals(wf.params, wf.radii_of_interest(), xa - X, xb - X)
    got = I.mean(axis=0) * (2 * L) ** 3
    assert np.allclose(got, xa - xb, atol=0.03)


def test_da_homogeneous_normalization(lj):
    s = strained_crystal(5)
    snap = Snapshot(0.0, s, evaluate(s, lj))
    x = s.cell.lengths / 2 + 0.013
    wf = WeightingFunction("constant-mollified", 3 * A_LJ, epsilon=1.5 * A_LJ)
    k, p = global_virial(s, snap.report, s.cell.volume)
    da = da_stress(snap, wf, FieldGrid.single(x), lj).potential[0]
    assert da[0, 0] == pytest.approx(p[0, 0], rel=0.05)


# ------------------------------------------------------------ Tsai


def test_tsai_single_bond_and_parallel_bond(lj):
    r = 1.2
    s = free_state([[-0.6, 0, 0], [0.6, 0, 0]])
    snap = Snapshot(0.0, s, evaluate(s, lj))
    probe = PlanarProbe.square([0, 0, 0], [1, 0, 0], 2.0)
    t = tsai_traction(snap, probe, lj)
    assert t.total == pytest.approx([lj_dvdr(r) / 4.0, 0, 0], rel=1e-12)
    assert np.all(t.kinetic == 0)
    par = tsai_traction(snap, PlanarProbe.square([0, 0, 0], [0, 1, 0], 2.0), lj)
    assert np.all(par.total == 0)
    on_plane = PlanarProbe.square([0.6, 0, 0], [1, 0, 0], 2.0)
    assert np.all(np.isfinite(tsai_traction(snap, on_plane, lj).total))


def test_tsai_relaxed_lattice_zero(fcc4, lj):
    # full periodic cross-sections of the zero-pressure lattice carry no traction
    c = fcc4.cell.lengths / 2 + 0.21
    ts = [tsai_traction(fcc4, PlanarProbe.square(c, e, 100.0), lj) for e in np.eye(3)]
    k, p = global_virial(fcc4, evaluate(fcc4, lj), fcc4.cell.volume)
    assert np.abs(p).max() < 1e-6
    assert np.abs(assemble_tensor_from_tractions(*ts)).max() < 1e-6


def test_assemble_cauchy_relation():
    from atomstress.estimators import TractionSample

    sig = np.array([[1.0, 0.2, -0.3], [0.2, 2.0, 0.5], [-0.3, 0.5, -1.0]])
    Q, _ = np.linalg.qr(np.random.default_rng(3).normal(size=(3, 3)))
    samples = []
    for k in range(3):
        n = Q[:, k]
        t = sig @ n
        samples.append(TractionSample(PlanarProbe.square([0, 0, 0], n, 1.0), t, np.zeros(3), 0, (0, 0)))
    assert np.allclose(assemble_tensor_from_tractions(*samples), sig, atol=1e-14)
    bad = [samples[0], samples[0], samples[2]]
    with pytest.raises(ValueError):
        assemble_tensor_from_tractions(*bad)


def test_tsai_uniform_state_near_applied_stress(lj):
    s = strained_crystal(8)
    snap = Snapshot(0.0, s, evaluate(s, lj))
    k, p = global_virial(s, snap.report, s.cell.volume)
    c = s.cell.lengths / 2 + 0.013
    # a probe spanning the periodic cross-section gives the cell average exactly
    t = tsai_traction(snap, PlanarProbe.square(c, [1, 0, 0], 100.0), lj)
    assert t.metadata["clamped"]
    assert t.total[0] == pytest.approx(p[0, 0], rel=1e-3)


def test_tsai_kinetic_crossings():
    # one particle crossing the plane at constant velocity in a free box
    cell = SimulationCell.orthogonal([20, 20, 20], (False,) * 3)
    mk = lambda x: ParticleState([[x, 10, 10], [1, 1, 1]], [[1.0, 0, 0], [0, 0, 0]], [2.0, 1.0], "X", cell)
    snaps = [Snapshot(0.0, mk(9.5)), Snapshot(1.0, mk(10.5))]
    probe = PlanarProbe.square([10, 10, 10], [1, 0, 0], 4.0)
    # a unit step is coarse next to the cutoff, which the estimator reports
    with pytest.warns(RuntimeWarning, match="reduce dt"):
        t = tsai_traction(snaps, probe, LennardJones())
    assert t.crossings == 1
    assert t.metadata["velocity_rule"] == "crossing"
    # v_rel = 0 relative to the crossing-limit velocity
    assert np.allclose(t.kinetic, 0)
    none = tsai_traction(snaps[:1] + [Snapshot(1.0, mk(9.6))], probe, LennardJones())
    assert none.metadata["velocity_rule"] == "slab-fallback"
    with pytest.raises(ValueError):
        tsai_traction_many([snaps[1], snaps[0]], [probe], LennardJones())


def test_crossing_velocity_weights():
    v = np.array([[1.0, 0, 0], [-2.0, 0, 0]])
    m = np.array([1.0, 1.0])
    # weights m/|v.n| = 1 and 1/2
    assert np.allclose(crossing_velocity(m, v, np.array([1.0, 0, 0])), [0.0, 0, 0])


def test_probe_validation():
    with pytest.raises(ValueError):
        PlanarProbe([0, 0, 0], [1, 1, 0], (1, 1))
    with pytest.raises(ValueError):
        PlanarProbe([0, 0, 0], [1, 0, 0], (0, 1))


# ------------------------------------------------------------ sigma star and 1D


def test_a_hat_limits():
    wf = sharp(1.0)
    assert a_hat(wf, 0.0)[0] == pytest.approx(float(wf.radial(0.0)) / 3)
    for u in (1.0, 2.0, 7.5):
        assert a_hat(wf, u)[0] == pytest.approx(1 / (4 * np.pi * u**3), rel=1e-10)
    assert a_hat(wf, 0.5)[0] == pytest.approx(float(wf.radial(0.0)) / 3, rel=1e-10)


def stationary_body(n):
    # a free lattice held at fixed positions: interior forces balance, surface ones do not
    return build_fcc_lattice(n, n, n, A_LJ, periodic=(False,) * 3)


def test_sigma_star_nonzero_outside_body(lj):
    s = stationary_body(3)
    snap = Snapshot(0.0, s, evaluate(s, lj))
    outside = s.positions.max(axis=0) + 3.0
    wf = sharp(1.0)
    star = stress_star_counterexample(snap, wf, FieldGrid.single(outside), lj).potential[0]
    h = hardy_stress(snap, wf, FieldGrid.single(outside), lj).total[0]
    assert np.abs(star).max() > 1e-4
    assert np.all(h == 0)


def test_sigma_star_interior_atoms_do_not_contribute(lj):
    s = stationary_body(6)
    f = evaluate(s, lj).forces
    x = s.positions
    lo, hi = x.min(axis=0) + 2.6, x.max(axis=0) - 2.6
    interior = np.all((x > lo) & (x < hi), axis=1)
    assert interior.any()
    assert np.abs(f[interior]).max() < 1e-10
    assert np.abs(f[~interior]).max() > 1e-2


def test_hardy_1d_window_matches_bond_overlap():
    x = np.arange(10, dtype=float) * 1.1
    i, j, f = chain_pair_terms_1d(x)
    # window covers whole bonds 3-4 and 4-5 only for nearest neighbours
    val = hardy_stress_1d(x, i, j, f, center=4.4, length=2.2)
    ref = 0.0
    for a, b, ff in zip(i, j, f):
        lo, hi = x[a], x[b]
        ov = max(0.0, min(hi, 5.5) - max(lo, 3.3))
        ref += ff * ov / 2.2
    assert val == pytest.approx(ref, rel=1e-12)


@given(st.integers(0, 10**6), st.floats(2.0, 60.0), st.floats(0.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_hardy_1d_extension_difference_vanishes(seed, length, lam):
    # every cut of a chain is a complete cut, so the extensions agree exactly
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.uniform(1.0, 1.25, 200))
    i, j, f0 = chain_pair_terms_1d(x)
    _, _, f1 = chain_pair_terms_1d(x, lam=lam)
    c = rng.uniform(x[60], x[140])
    h0 = hardy_stress_1d(x, i, j, f0, c, length)
    h1 = hardy_stress_1d(x, i, j, f1, c, length)
    scale = np.abs(f1).max() * 200 / length
    assert abs(h1 - h0) <= 1e-12 * scale
