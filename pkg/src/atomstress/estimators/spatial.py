"""Spatially averaged fields: density, velocity, Hardy, virial, double-average and the sigma* counterexample.

Periodic cells are handled by summing over every image of an atom or bond that
reaches the averaging kernel, so kernels larger than half the cell are allowed.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.spatial import cKDTree

from .. import _backend
from ..core import ParticleState
from ..potentials import ForceReport
from ..weighting import WeightingFunction
from ._common import (
    FieldGrid,
    StressField,
    as_snapshots,
    image_offsets,
    report_for,
    window_of,
)


class _Atoms:
    """Wrapped atom positions with a search tree."""

    def __init__(self, state: ParticleState):
        self.state = state
        self.x = state.cell.wrap(state.positions)
        self.tree = cKDTree(self.x)

    def near(self, point, radius):
        """``(index, image offset)`` for every atom image within ``radius`` of ``point``."""
        cell = self.state.cell
        p = cell.wrap(np.asarray(point, dtype=float))
        idx, offs = [], []
        for o in image_offsets(cell, radius):
            hit = self.tree.query_ball_point(p - o, radius)
            if hit:
                hit = np.sort(np.asarray(hit, dtype=np.intp))
                idx.append(hit)
                offs.append(np.broadcast_to(o, (hit.size, 3)))
        if not idx:
            return np.zeros(0, dtype=np.intp), np.zeros((0, 3)), p
        return np.concatenate(idx), np.concatenate(offs), p


class _Bonds:
    """Bond segments stored as wrapped midpoints with half vectors."""

    def __init__(self, state: ParticleState, report: ForceReport):
        cell = state.cell
        self.cell = cell
        self.report = report
        self.half = 0.5 * report.rvec
        self.mid = cell.wrap(state.positions[report.i] + self.half)
        self.coef = report.dvdr / report.r  # tensor weight dvdr/r
        self.maxhalf = float(np.sqrt(np.max(np.einsum("ij,ij->i", self.half, self.half)))) if report.i.size else 0.0
        self.tree = cKDTree(self.mid) if report.i.size else None

    def near(self, point, radius):
        """Bond images whose segment may come within ``radius`` of ``point``.

        Returns ``(bond index, start u, end v)`` with ``u = x_i`` and ``v = x_j``
        images relative to the wrapped ``point``.
        """
        p = self.cell.wrap(np.asarray(point, dtype=float))
        if self.tree is None:
            return np.zeros(0, dtype=np.intp), np.zeros((0, 3)), np.zeros((0, 3)), p
        reach = radius + self.maxhalf
        idx, offs = [], []
        for o in image_offsets(self.cell, reach):
            hit = self.tree.query_ball_point(p - o, reach)
            if hit:
                hit = np.sort(np.asarray(hit, dtype=np.intp))
                idx.append(hit)
                offs.append(np.broadcast_to(o, (hit.size, 3)))
        if not idx:
            return np.zeros(0, dtype=np.intp), np.zeros((0, 3)), np.zeros((0, 3)), p
        k = np.concatenate(idx)
        m = self.mid[k] + np.concatenate(offs)
        return k, m - self.half[k], m + self.half[k], p


def _outer_sum(weights, vecs_a, vecs_b):
    return np.einsum("k,ki,kj->ij", weights, vecs_a, vecs_b)


# ------------------------------------------------------------------ density


def continuum_fields(state: ParticleState, wf: WeightingFunction, grid: FieldGrid):
    """Mass density, momentum density and velocity at every grid point.

    The velocity is ``nan`` where the density vanishes.
    """
    atoms = _Atoms(state)
    n = len(grid)
    rho = np.zeros(n)
    mom = np.zeros((n, 3))
    m = state.masses
    v = state.velocities
    for g, x in enumerate(grid.points):
        k, off, p = atoms.near(x, wf.support)
        if k.size == 0:
            continue
        w = wf(atoms.x[k] + off - p)
        rho[g] = np.sum(m[k] * w)
        mom[g] = (m[k] * w) @ v[k]
    with np.errstate(invalid="ignore", divide="ignore"):
        vel = np.where(rho[:, None] > 0, mom / np.where(rho > 0, rho, 1.0)[:, None], np.nan)
    return rho, mom, vel


def _kinetic_at(atoms: _Atoms, wf, x):
    k, off, p = atoms.near(x, wf.support)
    if k.size == 0:
        return np.zeros((3, 3))
    st = atoms.state
    w = wf(atoms.x[k] + off - p)
    mw = st.masses[k] * w
    tot = mw.sum()
    if tot <= 0:
        return np.zeros((3, 3))
    vbar = mw @ st.velocities[k] / tot
    vr = st.velocities[k] - vbar
    return -_outer_sum(mw, vr, vr)


def _hardy_potential_at(bonds: _Bonds, wf, x):
    k, u, v, p = bonds.near(x, wf.support)
    if k.size == 0:
        return np.zeros((3, 3))
    b = _backend.kernels.bond_function(wf.params, wf.radii_of_interest(), p, u, v)
    hit = b != 0.0
    if not np.any(hit):
        return np.zeros((3, 3))
    k, b = k[hit], b[hit]
    rv = bonds.report.rvec[k]
    return _outer_sum(bonds.coef[k] * b, rv, rv)


def hardy_stress(traj, wf: WeightingFunction, grid: FieldGrid, model) -> StressField:
    """Time-averaged Hardy stress.

    Potential part ``sum_pairs (dV/dr / r) r_ab (x) r_ab b(x; x_a, x_b)``, the
    unordered-pair form of ``-1/2 sum f_ab (x) (x_a - x_b) b``.  Kinetic part
    ``-sum w m v_rel (x) v_rel`` with ``v_rel`` relative to the kernel-weighted
    velocity at the same point.  Both are averaged over the snapshots.
    """
    snaps = as_snapshots(traj)
    g = len(grid)
    kin = np.zeros((g, 3, 3))
    pot = np.zeros((g, 3, 3))
    for snap in snaps:
        atoms = _Atoms(snap.state)
        bonds = _Bonds(snap.state, report_for(snap, model))
        for n, x in enumerate(grid.points):
            kin[n] += _kinetic_at(atoms, wf, x)
            pot[n] += _hardy_potential_at(bonds, wf, x)
    kin /= len(snaps)
    pot /= len(snaps)
    return StressField(grid.points, kin, pot, "hardy", window_of(snaps))


def hardy_kinetic_bruteforce(state: ParticleState, wf: WeightingFunction, x) -> np.ndarray:
    """Direct double loop over all atoms and images; used to audit the fast path."""
    from ._common import image_offsets as _imgs

    cell = state.cell
    xw = cell.wrap(state.positions)
    pw = cell.wrap(np.asarray(x, dtype=float))
    offs = _imgs(cell, wf.support + float(np.max(cell.lengths)))
    rho = 0.0
    mom = np.zeros(3)
    terms = []
    for a in range(state.n):
        for o in offs:
            w = float(wf(xw[a] + o - pw))
            if w > 0:
                rho += state.masses[a] * w
                mom += state.masses[a] * w * state.velocities[a]
                terms.append((a, w))
    if rho == 0:
        return np.zeros((3, 3))
    vbar = mom / rho
    out = np.zeros((3, 3))
    for a, w in terms:
        vr = state.velocities[a] - vbar
        out -= w * state.masses[a] * np.outer(vr, vr)
    return out


# ------------------------------------------------------------------ virial


def _virial_sums(atoms: _Atoms, bonds: _Bonds, center, radius, reference_velocity=None):
    state = atoms.state
    k, off, p = atoms.near(center, radius)
    kin = np.zeros((3, 3))
    if k.size:
        m = state.masses[k]
        v = state.velocities[k]
        vbar = m @ v / m.sum() if reference_velocity is None else np.asarray(reference_velocity, float)
        vr = v - vbar
        kin = -_outer_sum(m, vr, vr)
    b, u, w, p = bonds.near(center, radius)
    pot = np.zeros((3, 3))
    if b.size:
        r2 = radius * radius
        inside = (np.einsum("ij,ij->i", u - p, u - p) <= r2) & (np.einsum("ij,ij->i", w - p, w - p) <= r2)
        b = b[inside]
        rv = bonds.report.rvec[b]
        pot = _outer_sum(bonds.coef[b], rv, rv)
    return kin, pot, k.size


def virial_stress_many(traj, centers, radius: float, model, reference_velocity=None) -> StressField:
    """Virial stress of equal spheres about each of ``centers``; see :func:`virial_stress`."""
    if not radius > 0:
        raise ValueError("domain radius must be positive")
    snaps = as_snapshots(traj)
    pts = np.asarray(centers, dtype=float).reshape(-1, 3)
    vol = 4.0 / 3.0 * np.pi * radius**3
    kin = np.zeros((len(pts), 3, 3))
    pot = np.zeros((len(pts), 3, 3))
    empty = np.ones(len(pts), dtype=bool)
    for snap in snaps:
        atoms = _Atoms(snap.state)
        bonds = _Bonds(snap.state, report_for(snap, model))
        for n, c in enumerate(pts):
            k, v, count = _virial_sums(atoms, bonds, c, radius, reference_velocity)
            kin[n] += k
            pot[n] += v
            empty[n] &= count == 0
    if np.any(empty):
        warnings.warn(f"{int(empty.sum())} virial domain(s) contain no particles", RuntimeWarning, stacklevel=2)
    return StressField(
        pts,
        kin / (len(snaps) * vol),
        pot / (len(snaps) * vol),
        "virial",
        window_of(snaps),
        {"empty": empty, "volume": vol},
    )


def virial_stress(traj, center, radius: float, model, reference_velocity=None) -> StressField:
    """Virial stress of a spherical domain; only bonds with both ends inside count.

    ``v_rel`` is taken relative to the mass-weighted mean velocity of the
    particles in the domain unless ``reference_velocity`` is given.  An empty
    domain yields zero with ``metadata["empty"] = True`` and a warning.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        f = virial_stress_many(traj, center, radius, model, reference_velocity)
    f.metadata["empty"] = bool(f.metadata["empty"][0])
    if f.metadata["empty"]:
        warnings.warn("virial domain contains no particles", RuntimeWarning, stacklevel=2)
    return f


def global_virial(state: ParticleState, report: ForceReport, volume: float, reference_velocity=None):
    """Whole-system virial ``(kinetic, potential)`` tensors over ``volume``."""
    m = state.masses
    v = state.velocities
    vbar = m @ v / m.sum() if reference_velocity is None else np.asarray(reference_velocity, float)
    vr = v - vbar
    kin = -_outer_sum(m, vr, vr) / volume
    pot = _outer_sum(report.dvdr / report.r, report.rvec, report.rvec) / volume
    return kin, pot


def virial_pressure(state: ParticleState, report: ForceReport, volume: float, reference_velocity=None):
    """``(kinetic, potential, total)`` pressure ``p = -tr(sigma)/3``."""
    kin, pot = global_virial(state, report, volume, reference_velocity)
    pk = -np.trace(kin) / 3.0
    pv = -np.trace(pot) / 3.0
    return pk, pv, pk + pv


# ----------------------------------------------------------- double average


def da_stress(state, wf: WeightingFunction, grid: FieldGrid, model) -> StressField:
    """Double-average stress; the kinetic part is the Hardy kinetic stress.

    Potential part ``-sum_pairs f_ab (x) I(x_a - x, x_b - x)`` with
    ``I(a, b) = int ds int dz w(a - s z) w(b + (1 - s) z) z``.  Only bonds
    whose segment passes within the kernel support of ``x`` contribute.
    """
    snaps = as_snapshots(state)
    g = len(grid)
    kin = np.zeros((g, 3, 3))
    pot = np.zeros((g, 3, 3))
    for snap in snaps:
        atoms = _Atoms(snap.state)
        rep = report_for(snap, model)
        bonds = _Bonds(snap.state, rep)
        for n, x in enumerate(grid.points):
            kin[n] += _kinetic_at(atoms, wf, x)
            k, u, v, p = bonds.near(x, wf.support)
            if k.size == 0:
                continue
            # chord test: the segment must enter the support
            d = v - u
            a = u - p
            A = np.einsum("ij,ij->i", d, d)
            s = np.clip(-np.einsum("ij,ij->i", a, d) / np.where(A > 0, A, 1.0), 0.0, 1.0)
            closest = a + s[:, None] * d
            hit = np.einsum("ij,ij->i", closest, closest) < wf.support**2
            if not np.any(hit):
                continue
            k, u, v = k[hit], u[hit], v[hit]
            I = _backend.kernels.da_integrals(wf.params, wf.radii_of_interest(), u - p, v - p)
            f = (bonds.coef[k])[:, None] * rep.rvec[k]
            pot[n] -= np.einsum("ki,kj->ij", f, I)
    kin /= len(snaps)
    pot /= len(snaps)
    return StressField(grid.points, kin, pot, "da", window_of(snaps))


# ------------------------------------------------------------ sigma star


def a_hat(wf: WeightingFunction, u) -> np.ndarray:
    """``u^-3 int_0^u s^2 w(s) ds``, with the limit ``w(0)/3`` at ``u = 0``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty_like(u)
    full = 1.0 / (4.0 * np.pi)
    for n, val in enumerate(u):
        if val == 0.0:
            out[n] = wf.max_value() / 3.0
        elif val >= wf.support:
            out[n] = full / val**3
        else:
            out[n] = wf.shell_integral(val) / val**3
    return out


def stress_star_counterexample(state, wf: WeightingFunction, grid: FieldGrid, model) -> StressField:
    """The rejected estimator ``sum_{a != b} f_ab (x) (x - x_a) a_hat(|x - x_a|)``.

    The pair sum collapses to the net internal force on each particle, so
    only particles with unbalanced forces contribute, at any distance.
    """
    snaps = as_snapshots(state)
    g = len(grid)
    pot = np.zeros((g, 3, 3))
    for snap in snaps:
        st = snap.state
        F = report_for(snap, model).forces
        for n, x in enumerate(grid.points):
            d = np.asarray(x, dtype=float) - st.positions
            for k in range(3):
                if st.cell.periodic[k]:
                    L = st.cell.lengths[k]
                    d[:, k] -= L * np.round(d[:, k] / L)
            u = np.sqrt(np.einsum("ij,ij->i", d, d))
            pot[n] += np.einsum("k,ki,kj->ij", a_hat(wf, u), F, d)
    pot /= len(snaps)
    return StressField(grid.points, np.zeros_like(pot), pot, "sigma-star", window_of(snaps))


# ------------------------------------------------------------------- 1D


def hardy_stress_1d(x, i, j, f, center: float, length: float) -> float:
    """Hardy stress of a 1D chain with a uniform window ``[center - L/2, center + L/2]``.

    ``f[k]`` is the scalar force on ``i[k]`` due to ``j[k]``; the bond
    function is the overlap of the bond with the window over ``r * length``.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = center - 0.5 * length, center + 0.5 * length
    xa, xb = x[i], x[j]
    left = np.minimum(xa, xb)
    right = np.maximum(xa, xb)
    overlap = np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0.0, None)
    # -f (x_a - x_b) b = f r overlap / (r length) with r = x_b - x_a
    sign = np.sign(xb - xa)
    return float(np.sum(np.asarray(f) * sign * overlap) / length)
