"""Continuum reference data: cubic constants from a potential, moduli, the
anisotropic plate-with-hole field, uniaxial cell strains and thermal stress."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import build_fcc_lattice
from .estimators.spatial import global_virial
from .potentials import evaluate


@dataclass(frozen=True)
class CubicConstants:
    c11: float
    c12: float
    c44: float

    def __post_init__(self):
        if not (self.c11 > abs(self.c12) and self.c44 > 0 and self.c11 + 2 * self.c12 > 0):
            raise ValueError(f"unstable cubic constants {self}")

    def stiffness(self) -> np.ndarray:
        """6x6 Voigt stiffness (engineering shear strains)."""
        C = np.zeros((6, 6))
        C[:3, :3] = self.c12
        C[[0, 1, 2], [0, 1, 2]] = self.c11
        C[[3, 4, 5], [3, 4, 5]] = self.c44
        return C

    @property
    def zener_ratio(self) -> float:
        return 2.0 * self.c44 / (self.c11 - self.c12)


@dataclass(frozen=True)
class Moduli:
    E: float
    mu: float
    nu: float

    def __post_init__(self):
        if not (self.E > 0 and -1.0 < self.nu < 0.5):
            raise ValueError(f"inadmissible moduli {self}")


def engineering_moduli(c: CubicConstants) -> Moduli:
    E = (c.c11**2 + c.c11 * c.c12 - 2.0 * c.c12**2) / (c.c11 + c.c12)
    return Moduli(E, c.c44, c.c12 / (c.c11 + c.c12))


def isotropic_constants(E: float, nu: float) -> CubicConstants:
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    return CubicConstants(lam + 2 * mu, lam, mu)


# ------------------------------------------------------------ from the potential


def _fcc_pressure(model, a, cells):
    s = build_fcc_lattice(cells, cells, cells, a)
    rep = evaluate(s, model)
    _, pot = global_virial(s, rep, s.cell.volume)
    return -np.trace(pot) / 3.0


def _cells_for(model, a):
    # smallest periodic fcc box whose half-length exceeds the cutoff
    return int(np.floor(2.0 * model.cutoff / a)) + 1


def relaxed_lattice_constant(model, bracket=(1.45, 1.7), xtol: float = 1e-13) -> float:
    """Lattice constant of the zero-pressure fcc crystal (root of the virial pressure)."""
    cells = _cells_for(model, bracket[0])
    return float(brentq(lambda a: _fcc_pressure(model, a, cells), *bracket, xtol=xtol))


def _strained_energy(model, base, F):
    s = base.replace(positions=base.positions @ F.T, cell=base.cell.scaled(np.diag(F)))
    return evaluate(s, model).energy


def cubic_constants_fd(model, a: float | None = None, amplitude: float = 1e-4, cells: int | None = None,
                       pressure_tol: float = 1e-6) -> CubicConstants:
    """Second central differences of the energy density under uniaxial, biaxial
    and simple-shear strains about the relaxed fcc crystal.

    ``a=None`` searches the relaxed lattice constant first.  A reference with
    residual pressure at or above ``pressure_tol`` is rejected because the
    prestress would contaminate the second derivatives.
    """
    if a is None:
        a = relaxed_lattice_constant(model)
    cells = cells or _cells_for(model, a)
    p = _fcc_pressure(model, a, cells)
    if abs(p) >= pressure_tol:
        raise ValueError(f"reference lattice a={a:g} is not relaxed (pressure {p:.3g}); use the relaxed constant")
    base = build_fcc_lattice(cells, cells, cells, a)
    V0 = base.cell.volume
    h = amplitude
    I = np.eye(3)
    e0 = _strained_energy(model, base, I)

    def d2(eps):
        ep = _strained_energy(model, base, I + eps * h)
        em = _strained_energy(model, base, I - eps * h)
        return (ep - 2.0 * e0 + em) / (h * h * V0)

    u = np.diag([1.0, 0.0, 0.0])
    b = np.diag([1.0, 1.0, 0.0])
    w11 = d2(u)
    wbb = d2(b)
    c11 = w11
    c12 = 0.5 * wbb - c11
    c44 = _shear_d2(model, a, cells, h)
    return CubicConstants(c11, c12, c44)


def _shear_d2(model, a, cells, h):
    """``c44`` from simple shear ``gamma = h`` in the (x, y) plane.

    The orthogonal cell cannot carry the shear, so the crystal is rebuilt in
    a box rotated 45 degrees about z (periodic because (110) directions are
    lattice vectors); there the engineering shear becomes the orthorhombic
    strain ``diag(h/2, -h/2, 0)`` whose energy is ``c44 h^2 / 2`` per volume.
    """
    st = _rotated_fcc(a, cells)
    V0 = st.cell.volume
    e0 = evaluate(st, model).energy
    eps = np.diag([0.5, -0.5, 0.0])
    ep = _strained_energy(model, st, np.eye(3) + h * eps)
    em = _strained_energy(model, st, np.eye(3) - h * eps)
    return (ep - 2.0 * e0 + em) / (h * h * V0)


def _rotated_fcc(a, cells):
    """fcc crystal whose box axes are [110], [-110], [001]."""
    from .core import FCC_BASIS, ParticleState, SimulationCell

    m = cells
    # the rotated box of side m*a/sqrt(2)*2 in x, y holds whole lattice periods
    n = 2 * m
    idx = np.indices((n, n, m)).reshape(3, -1).T - np.array([n // 2, n // 2, 0])
    pts = (idx[:, None, :] + FCC_BASIS[None]).reshape(-1, 3) * a
    c, s = np.sqrt(0.5), np.sqrt(0.5)
    R = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    q = pts @ R.T
    Lxy = m * a * np.sqrt(2.0)
    L = np.array([Lxy, Lxy, m * a])
    q = q - np.floor(q / L + 1e-9) * L
    # deduplicate images that landed on the same site
    key = np.round(q / (a * 1e-6)).astype(np.int64)
    key = np.mod(key, np.round(L / (a * 1e-6)).astype(np.int64))
    _, keep = np.unique(key, axis=0, return_index=True)
    q = q[np.sort(keep)]
    expected = 4 * cells**3 * 2
    if q.shape[0] != expected:
        raise RuntimeError(f"rotated crystal has {q.shape[0]} sites, expected {expected}")
    nn = q.shape[0]
    return ParticleState(q, np.zeros((nn, 3)), np.ones(nn), np.full(nn, "X", dtype=object),
                         SimulationCell.orthogonal(L))


# ------------------------------------------------------------ plate with a hole


def plane_strain_compliance(C6: np.ndarray) -> np.ndarray:
    """Reduced compliances ``b_ij = s_ij - s_i3 s_j3 / s_33`` on the (1, 2, 6) Voigt slots."""
    S = np.linalg.inv(C6)
    k = [0, 1, 5]
    b = np.empty((3, 3))
    for p, i in enumerate(k):
        for q, j in enumerate(k):
            b[p, q] = S[i, j] - S[i, 2] * S[j, 2] / S[2, 2]
    return b


def characteristic_roots(b: np.ndarray) -> np.ndarray:
    """Roots with positive imaginary part of
    ``b11 m^4 - 2 b16 m^3 + (2 b12 + b66) m^2 - 2 b26 m + b22``."""
    b11, b12, b16 = b[0, 0], b[0, 1], b[0, 2]
    b22, b26, b66 = b[1, 1], b[1, 2], b[2, 2]
    r = np.roots([b11, -2 * b16, 2 * b12 + b66, -2 * b26, b22])
    r = r[r.imag > 0]
    if r.size != 2:
        raise ValueError("compliances do not give two roots in the upper half plane")
    return np.sort_complex(r)


@dataclass(frozen=True, eq=False)
class KirschField:
    """In-plane displacement ``(N, 2)`` and stress ``(N, 2, 2)``; zeros where ``inside``."""

    displacement: np.ndarray
    stress: np.ndarray
    inside: np.ndarray


def _lekhnitskii(b, sigma_inf, R, x, y):
    mu = characteristic_roots(b)
    b11, b12, b16 = b[0, 0], b[0, 1], b[0, 2]
    b22, b26 = b[1, 1], b[1, 2]
    A = -1j * sigma_inf * R / (2.0 * (mu[0] - mu[1]))
    coef = (A, -A)
    sxx = np.full(x.shape, float(sigma_inf))
    syy = np.zeros(x.shape)
    sxy = np.zeros(x.shape)
    ux = sigma_inf * (b11 * x + 0.5 * b16 * y)
    uy = sigma_inf * (b12 * y + 0.5 * b16 * x)
    for Ak, m in zip(coef, mu):
        z = x + m * y
        sq = np.sqrt(z * z - R * R * (1.0 + m * m))
        den = R * (1.0 - 1j * m)
        zp, zm = (z + sq) / den, (z - sq) / den
        pick = np.abs(zp) >= np.abs(zm)
        zeta = np.where(pick, zp, zm)
        sq = np.where(pick, sq, -sq)
        phi = Ak / zeta
        dphi = -Ak / (zeta * sq)
        sxx += 2.0 * (m * m * dphi).real
        syy += 2.0 * dphi.real
        sxy += -2.0 * (m * dphi).real
        p = b11 * m * m + b12 - b16 * m
        q = b12 * m + b22 / m - b26
        ux += 2.0 * (p * phi).real
        uy += 2.0 * (q * phi).real
    return ux, uy, sxx, syy, sxy


def kirsch_anisotropic(c, sigma_inf: float, hole_radius: float, points, split: float = 1e-4) -> KirschField:
    """Plane-strain field of an infinite plate with a circular hole under remote ``sigma_11``.

    ``c`` is a :class:`CubicConstants` or a 6x6 stiffness; cube axes are the
    plate axes.  The solution uses two complex potentials ``A_k / zeta_k``
    with the exterior conformal map of each affine plane ``z_k = x + mu_k y``.
    Displacements include the homogeneous far-field strain and vanish at the
    hole center only in the rigid-body sense (no translation, no rotation).

    Nearly equal roots (isotropy) make the potentials singular individually,
    so the field is computed for two split materials and extrapolated.
    """
    C6 = c.stiffness() if isinstance(c, CubicConstants) else np.asarray(c, dtype=float)
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    R = float(hole_radius)
    inside = np.hypot(x, y) < R * (1.0 - 1e-12)
    xo, yo = np.where(inside, R + 1.0, x), np.where(inside, 0.0, y)
    b = plane_strain_compliance(C6)
    mu = characteristic_roots(b)
    if abs(mu[0] - mu[1]) < 1e-3 * abs(mu[0]):
        b1, b2 = b.copy(), b.copy()
        b1[2, 2] *= 1.0 + split
        b2[2, 2] *= 1.0 + 2.0 * split
        f1 = np.array(_lekhnitskii(b1, sigma_inf, R, xo, yo))
        f2 = np.array(_lekhnitskii(b2, sigma_inf, R, xo, yo))
        # the field is analytic in b66, so linear extrapolation to the split origin
        f = 2.0 * f1 - f2
    else:
        f = np.array(_lekhnitskii(b, sigma_inf, R, xo, yo))
    ux, uy, sxx, syy, sxy = f
    u = np.column_stack([ux, uy])
    s = np.stack([np.column_stack([sxx, sxy]), np.column_stack([sxy, syy])], axis=1)
    u[inside] = 0.0
    s[inside] = 0.0
    if single:
        return KirschField(u[0], s[0], inside[0])
    return KirschField(u, s, inside)


def kirsch_isotropic(sigma_inf: float, hole_radius: float, points, E: float = 1.0, nu: float = 0.25) -> KirschField:
    """Classical closed-form plane-strain Kirsch field."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    r = np.hypot(pts[:, 0], pts[:, 1])
    th = np.arctan2(pts[:, 1], pts[:, 0])
    inside = r < hole_radius * (1.0 - 1e-12)
    r = np.where(inside, hole_radius, r)
    p, a = sigma_inf, hole_radius
    q2, q4 = (a / r) ** 2, (a / r) ** 4
    c2, s2 = np.cos(2 * th), np.sin(2 * th)
    srr = 0.5 * p * (1 - q2) + 0.5 * p * (1 - 4 * q2 + 3 * q4) * c2
    stt = 0.5 * p * (1 + q2) - 0.5 * p * (1 + 3 * q4) * c2
    srt = -0.5 * p * (1 + 2 * q2 - 3 * q4) * s2
    mu = E / (2 * (1 + nu))
    kap = 3 - 4 * nu
    k = p * a / (8 * mu)
    ur = k * ((r / a) * (kap - 1 + 2 * c2) + (2 * a / r) * (1 + (1 + kap) * c2) - 2 * (a / r) ** 3 * c2)
    ut = -k * ((r / a) * 2 + (2 * a / r) * (kap - 1) + 2 * (a / r) ** 3) * s2
    c, s = np.cos(th), np.sin(th)
    sxx = srr * c * c + stt * s * s - 2 * srt * s * c
    syy = srr * s * s + stt * c * c + 2 * srt * s * c
    sxy = (srr - stt) * s * c + srt * (c * c - s * s)
    u = np.column_stack([ur * c - ut * s, ur * s + ut * c])
    st = np.stack([np.column_stack([sxx, sxy]), np.column_stack([sxy, syy])], axis=1)
    u[inside] = 0.0
    st[inside] = 0.0
    return KirschField(u, st, inside)


def kirsch_concentration(c, hole_radius: float = 1.0) -> float:
    """``sigma_11 / sigma_inf`` at the rim point on the ``x_1 = 0`` line."""
    f = kirsch_anisotropic(c, 1.0, hole_radius, np.array([0.0, hole_radius]))
    return float(f.stress[0, 0])


# ------------------------------------------------------------ simple predictions


def uniaxial_cell_strain(sigma11: float, m: Moduli, n_cells: int, a: float) -> tuple:
    """Periodic box lengths that carry uniaxial ``sigma11`` in linear elasticity."""
    e = sigma11 / m.E
    L = n_cells * a
    return (L * (1.0 + e), L * (1.0 - m.nu * e), L * (1.0 - m.nu * e))


def thermal_stress(c: CubicConstants, alpha_T: float, dT: float) -> float:
    """Equal triaxial stress of a fully constrained cubic crystal heated by ``dT``."""
    return -(c.c11 + 2.0 * c.c12) * alpha_T * dT
