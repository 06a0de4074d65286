"""Interatomic potentials and the central-force decomposition of internal forces.

The force on particle ``a`` is written as a sum of pair terms

    f_ab = dV/dr_ab * (x_b - x_a) / r_ab,

so a positive derivative (a stretched bond) pulls ``a`` towards ``b``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend
from .core import NeighborList, ParticleState, SimulationCell, build_neighbor_list
from .distgeo import SquaredDistanceSet, cayley_menger_gradient

OVERLAP = 1e-9


class SingularityError(FloatingPointError):
    """Two particles closer than the overlap threshold."""


# ------------------------------------------------------------------ models


LJ_COEFFS = (4.0, 4.0, -0.0078, 0.0651)
LJ_CUTOFF = 2.5


def lj_eval(r):
    """Modified Lennard-Jones ``phi(r) = 4(r^-12 - r^-6) - 0.0078 r^2 + 0.0651`` and ``phi'(r)``.

    Both vanish identically for ``r >= 2.5``.  Works elementwise on arrays.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    a12, a6, q, c0 = LJ_COEFFS
    inside = r < LJ_CUTOFF
    ri = 1.0 / r
    r6 = ri**6
    phi = np.where(inside, a12 * r6 * r6 - a6 * r6 + q * r * r + c0, 0.0)
    dphi = np.where(inside, (-12.0 * a12 * r6 * r6 + 6.0 * a6 * r6) * ri + 2.0 * q * r, 0.0)
    if phi.ndim == 0:
        return float(phi), float(dphi)
    return phi, dphi


@dataclass(frozen=True)
class LennardJones:
    """Quadratically shifted 12-6 potential ``a12 r^-12 - a6 r^-6 + q r^2 + c0``."""

    coeffs: tuple = LJ_COEFFS
    cutoff: float = LJ_CUTOFF
    kind: str = field(default="lj", init=False)

    def pair(self, r):
        a12, a6, q, c0 = self.coeffs
        r = np.asarray(r, dtype=float)
        inside = r < self.cutoff
        ri = 1.0 / np.where(r > 0, r, 1.0)
        r6 = ri**6
        phi = np.where(inside, a12 * r6 * r6 - a6 * r6 + q * r * r + c0, 0.0)
        dphi = np.where(inside, (-12.0 * a12 * r6 * r6 + 6.0 * a6 * r6) * ri + 2.0 * q * r, 0.0)
        return phi, dphi


@dataclass(frozen=True)
class EAM:
    """Analytic embedded-atom model.

    ``V(r) = A (rc - r)^2 exp(-p r)``, density ``f(r) = (rc - r)^2 exp(-q r)``,
    embedding ``U(rho) = -D sqrt(rho)``; all pair functions vanish beyond ``rc``.
    """

    A: float = 8.0
    p: float = 2.0
    q: float = 1.0
    D: float = 1.5
    cutoff: float = 2.5
    kind: str = field(default="eam", init=False)

    def pair(self, r):
        r = np.asarray(r, dtype=float)
        g = np.where(r < self.cutoff, self.cutoff - r, 0.0)
        e = np.exp(-self.p * r)
        return self.A * g * g * e, self.A * e * (-2.0 * g - self.p * g * g)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        g = np.where(r < self.cutoff, self.cutoff - r, 0.0)
        e = np.exp(-self.q * r)
        return g * g * e, e * (-2.0 * g - self.q * g * g)

    def embed(self, rho):
        rho = np.asarray(rho, dtype=float)
        sq = np.sqrt(rho)
        dU = np.where(rho > 0, -0.5 * self.D / np.where(rho > 0, sq, 1.0), 0.0)
        return -self.D * sq, dU


class PairTable:
    """Pair potential given as a table of ``(r, dV/dr)`` with cubic interpolation.

    ``V(r) = -int_r^rc dV/dr``; the last tabulated radius is the cutoff.
    """

    kind = "pair-table"

    def __init__(self, r, dvdr):
        r = np.asarray(r, dtype=float)
        dvdr = np.asarray(dvdr, dtype=float)
        if r.ndim != 1 or r.size < 4 or r.shape != dvdr.shape:
            raise ValueError("pair table needs at least 4 rows of (r, dV/dr)")
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValueError("pair table radii must be positive and increasing")
        self.r = r
        self.cutoff = float(r[-1])
        self._spline = CubicSpline(r, dvdr)
        self._anti = self._spline.antiderivative()
        self._anti_rc = float(self._anti(self.cutoff))

    @classmethod
    def from_csv(cls, path) -> "PairTable":
        with open(path) as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
        try:
            data = np.array(rows, dtype=float)
        except ValueError:
            data = np.array(rows[1:], dtype=float)  # header row
        return cls(data[:, 0], data[:, 1])

    def pair(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r[0]):
            raise ValueError(f"pair distance below table start {self.r[0]}")
        inside = r < self.cutoff
        rr = np.where(inside, r, self.cutoff)
        return (
            np.where(inside, self._anti(rr) - self._anti_rc, 0.0),
            np.where(inside, self._spline(rr), 0.0),
        )


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class BondForceTerm:
    alpha: int
    beta: int
    force: np.ndarray  # on alpha due to beta


@dataclass(frozen=True, eq=False)
class ForceReport:
    """Energy, per-particle forces and the central pair terms.

    Pair ``k`` couples ``i[k] < j[k]`` (or an image of ``j``); ``rvec[k]`` is
    ``x_j - x_i`` including the image shift, and ``dvdr[k]`` the derivative of
    the energy with respect to that pair distance.  Only pairs inside the
    cutoff are kept.
    """

    energy: float
    forces: np.ndarray
    i: np.ndarray
    j: np.ndarray
    rvec: np.ndarray
    dvdr: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return np.sqrt(np.einsum("ij,ij->i", self.rvec, self.rvec))

    @property
    def pair_forces(self) -> np.ndarray:
        """``f_ij`` (force on ``i`` due to ``j``) for each listed pair."""
        return (self.dvdr / self.r)[:, None] * self.rvec

    def bond_terms(self) -> list[BondForceTerm]:
        """Both ``f_ab`` and ``f_ba`` for every pair, sorted by ``(alpha, beta)``."""
        f = self.pair_forces
        terms = []
        for k in range(self.i.size):
            a, b = int(self.i[k]), int(self.j[k])
            terms.append(BondForceTerm(a, b, f[k]))
            terms.append(BondForceTerm(b, a, -f[k]))
        terms.sort(key=lambda t: (t.alpha, t.beta))
        return terms

    def forces_from_terms(self) -> np.ndarray:
        n = self.forces.shape[0]
        f = self.pair_forces
        out = np.zeros((n, 3))
        for d in range(3):
            out[:, d] = np.bincount(self.i, f[:, d], n) - np.bincount(self.j, f[:, d], n)
        return out


def _check_overlap(r, i, j):
    if r.size and r.min() < OVERLAP:
        k = int(np.argmin(r))
        raise SingularityError(f"particles {i[k]} and {j[k]} overlap (r={r[k]:.3g})")


def _accumulate(n, i, j, dvdr, rvec, r):
    f = (dvdr / r)[:, None] * rvec
    out = np.zeros((n, 3))
    for d in range(3):
        out[:, d] = np.bincount(i, f[:, d], n) - np.bincount(j, f[:, d], n)
    return out


def multibody_eval(state: ParticleState, nl: NeighborList, model) -> ForceReport:
    """Energy, forces and central pair terms of ``model`` for ``state``."""
    x = state.positions
    n = state.n
    L = state.cell.lengths
    if isinstance(model, LennardJones):
        try:
            energy, forces, dvdr, rvec = _backend.kernels.lj_forces(
                x, nl.i, nl.j, nl.shift.astype(float), L, model.cutoff, model.coeffs
            )
        except FloatingPointError as exc:
            raise SingularityError(str(exc)) from None
        keep = np.einsum("ij,ij->i", rvec, rvec) < model.cutoff**2
        return ForceReport(energy, forces, nl.i[keep], nl.j[keep], rvec[keep], dvdr[keep])
    rvec = nl.bond_vectors(x)
    r = np.sqrt(np.einsum("ij,ij->i", rvec, rvec))
    _check_overlap(r, nl.i, nl.j)
    keep = r < model.cutoff
    i, j, rvec, r = nl.i[keep], nl.j[keep], rvec[keep], r[keep]
    V, dV = model.pair(r)
    energy = float(V.sum())
    if isinstance(model, EAM):
        f, df = model.density(r)
        rho = np.bincount(i, f, n) + np.bincount(j, f, n)
        U, dU = model.embed(rho)
        energy += float(U.sum())
        dvdr = dV + (dU[i] + dU[j]) * df
    else:
        dvdr = dV
    forces = _accumulate(n, i, j, dvdr, rvec, r)
    return ForceReport(energy, forces, i, j, rvec, dvdr)


def evaluate(state: ParticleState, model, skin: float = 0.0) -> ForceReport:
    """Convenience wrapper that builds a fresh neighbor list."""
    return multibody_eval(state, build_neighbor_list(state, model.cutoff, skin), model)


def _cluster(points) -> ParticleState:
    p = np.asarray(points, dtype=float)
    span = np.ptp(p, axis=0) + 10.0
    cell = SimulationCell.orthogonal(span, (False, False, False), p.min(axis=0) - 5.0)
    return ParticleState(p, None, np.ones(len(p)), np.full(len(p), "X", dtype=object), cell)


def isolated_cluster(points) -> ParticleState:
    """Unit-mass particles in a non-periodic box around ``points``."""
    return _cluster(points)


# ------------------------------------------------- alternative decompositions


def noncentral_three_body_decomposition(cluster: ParticleState, model) -> dict:
    """``fbar_ab = (f_a - f_b) / 3`` for an isolated three-particle cluster.

    These terms obey the weak law of action and reaction but are not, in
    general, parallel to the bonds.
    """
    if cluster.n != 3:
        raise ValueError("three-body decomposition needs exactly 3 particles")
    f = evaluate(cluster, model).forces
    return {(a, b): (f[a] - f[b]) / 3.0 for a in range(3) for b in range(3) if a != b}


def chi3(r12, r13, r23):
    """Three-point Cayley-Menger determinant in factored form."""
    return (r12 - r13 - r23) * (r23 - r12 - r13) * (r13 - r23 - r12) * (r12 + r13 + r23)


def chi3_gradient(r12, r13, r23):
    """``(d chi/d r12, d chi/d r13, d chi/d r23)``."""
    f1 = r12 - r13 - r23
    f2 = r23 - r12 - r13
    f3 = r13 - r23 - r12
    f4 = r12 + r13 + r23
    d12 = f2 * f3 * f4 - f1 * f3 * f4 - f1 * f2 * f4 + f1 * f2 * f3
    d13 = -f2 * f3 * f4 - f1 * f3 * f4 + f1 * f2 * f4 + f1 * f2 * f3
    d23 = -f2 * f3 * f4 + f1 * f3 * f4 - f1 * f2 * f4 + f1 * f2 * f3
    return d12, d13, d23


def alternate_extension_forces_1d(x1: float, x2: float, x3: float, model=None) -> dict:
    """Pair terms on particle 1 for two extensions of the same collinear energy.

    The standard extension uses the pair potential alone; the alternative one
    adds the three-point Cayley-Menger determinant, which vanishes on every
    collinear configuration but not its distance derivatives.
    """
    if not x1 < x2 < x3:
        raise ValueError("positions must satisfy x1 < x2 < x3")
    model = LennardJones() if model is None else model
    r12, r23, r13 = x2 - x1, x3 - x2, x3 - x1
    _, d = model.pair(np.array([r12, r13]))
    f12, f13 = float(d[0]), float(d[1])
    g12, g13, _ = chi3_gradient(r12, r13, r23)
    return {
        "standard": {"f12": f12, "f13": f13},
        "extended": {"f12": f12 + g12, "f13": f13 + g13},
    }


def chain_pair_terms_1d(x, model=None, lam: float = 0.0):
    """Scalar pair terms ``f_ab`` (force on ``a`` from ``b``, ``a < b``) on a 1D chain.

    ``lam`` scales the determinant term added on every consecutive triple;
    ``lam = 0`` is the ordinary pair decomposition.  Returns ``(i, j, f)``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ValueError("chain positions must be strictly increasing")
    model = LennardJones() if model is None else model
    i, j = np.triu_indices(x.size, 1)
    r = x[j] - x[i]
    keep = r < model.cutoff
    i, j, r = i[keep], j[keep], r[keep]
    _, d = model.pair(r)
    f = np.array(d, dtype=float)
    if lam:
        index = {(a, b): k for k, (a, b) in enumerate(zip(i.tolist(), j.tolist()))}
        extra = {}
        for a in range(x.size - 2):
            r12, r23, r13 = x[a + 1] - x[a], x[a + 2] - x[a + 1], x[a + 2] - x[a]
            g12, g13, g23 = chi3_gradient(r12, r13, r23)
            for key, g in (((a, a + 1), g12), ((a, a + 2), g13), ((a + 1, a + 2), g23)):
                extra[key] = extra.get(key, 0.0) + lam * g
        for key, g in extra.items():
            if key not in index:
                raise ValueError("determinant term couples particles beyond the pair cutoff")
            f[index[key]] += g
    return i, j, f


def cayley_menger_extension_terms(state: ParticleState, report: ForceReport, clusters, lambdas) -> ForceReport:
    """Add ``sum_k lam_k chi_k`` over 5- or 6-particle clusters to the energy extension.

    ``chi_k`` vanishes for every physical configuration, so energy and
    per-particle forces are unchanged while the pair terms shift by
    ``lam_k d chi_k / d r_ab``.  Clusters must use non-periodic coordinates.
    """
    if len(clusters) != len(lambdas):
        raise ValueError("one multiplier per cluster")
    x = state.positions
    index = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(report.i, report.j))}
    i, j = list(report.i), list(report.j)
    rvec = [v for v in report.rvec]
    dvdr = list(report.dvdr)
    for members, lam in zip(clusters, lambdas):
        members = [int(m) for m in members]
        if len(members) not in (5, 6):
            raise ValueError("clusters need 5 or 6 particles")
        g = cayley_menger_gradient(SquaredDistanceSet.from_points(x[members]))
        for p in range(len(members)):
            for q in range(p + 1, len(members)):
                a, b = sorted((members[p], members[q]))
                d = x[b] - x[a]
                r = float(np.linalg.norm(d))
                extra = lam * g[p, q] * 2.0 * r  # d chi / d r = 2 r d chi / d s
                k = index.get((a, b))
                if k is None:
                    index[(a, b)] = len(i)
                    i.append(a)
                    j.append(b)
                    rvec.append(d)
                    dvdr.append(extra)
                else:
                    dvdr[k] += extra
    i = np.array(i, dtype=np.intp)
    j = np.array(j, dtype=np.intp)
    rvec = np.array(rvec, dtype=float).reshape(-1, 3)
    dvdr = np.array(dvdr, dtype=float)
    r = np.sqrt(np.einsum("ij,ij->i", rvec, rvec))
    forces = _accumulate(state.n, i, j, dvdr, rvec, r)
    return ForceReport(report.energy, forces, i, j, rvec, dvdr)


def model_from_config(section: dict):
    """Build a potential from a ``[potential]`` config section."""
    kind = section.get("kind", "lj")
    if kind == "lj":
        return LennardJones()
    if kind == "eam":
        keys = ("A", "p", "q", "D", "cutoff")
        kw = {k: float(section[k]) for k in keys if k in section}
        return EAM(**kw)
    if kind == "pair-table":
        if "table" not in section:
            raise ValueError("pair-table potential needs a 'table' CSV path")
        return PairTable.from_csv(section["table"])
    raise ValueError(f"unknown potential kind {kind!r}")
