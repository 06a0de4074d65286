"""Pure numpy implementations of the hot kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature and the same node set, so both backends agree to rounding.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

GL_S = np.polynomial.legendre.leggauss(16)
GL_R = np.polynomial.legendre.leggauss(12)


def radial_weight(params, r):
    kind, R, rw, eps, c = params
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    kind = int(kind)
    if kind == 0:
        if eps > 0:
            inner = r < R - eps
            shell = (r >= R - eps) & (r < R)
            out[inner] = c
            out[shell] = 0.5 * c * (1.0 - np.cos(np.pi * (R - r[shell]) / eps))
        else:
            out[r <= R] = c
    elif kind == 1:
        m = r <= R
        out[m] = c * np.exp(-((r[m] / rw) ** 2))
    else:
        m = r < rw
        q = r[m] / rw
        out[m] = c * (1.0 + 3.0 * q) * (1.0 - q) ** 3
    return out


def _segment_breaks(A, B, C, radii):
    """Breakpoints of ``s in [0, 1]`` for ``|p(s)|^2 = A s^2 + 2 B s + C``."""
    P = A.shape[0]
    k = 3 + 2 * len(radii)
    br = np.ones((P, k))
    br[:, 0] = 0.0
    safe = np.where(A > 0, A, 1.0)
    br[:, 2] = np.where(A > 0, -B / safe, 1.0)
    for n, rho in enumerate(radii):
        disc = B * B - A * (C - rho * rho)
        ok = (disc > 0) & (A > 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        br[:, 3 + 2 * n] = np.where(ok, (-B - sq) / safe, 1.0)
        br[:, 4 + 2 * n] = np.where(ok, (-B + sq) / safe, 1.0)
    np.clip(br, 0.0, 1.0, out=br)
    br.sort(axis=1)
    return br


def bond_function(params, radii, x, u, v):
    """Composite Gauss-Legendre line integral of the kernel along each segment."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    p0 = u - x
    d = v - u
    A = np.einsum("ij,ij->i", d, d)
    B = np.einsum("ij,ij->i", p0, d)
    C = np.einsum("ij,ij->i", p0, p0)
    br = _segment_breaks(A, B, C, np.asarray(radii, dtype=float))
    lo, hi = br[:, :-1], br[:, 1:]
    half = 0.5 * (hi - lo)
    t, wt = GL_S
    s = lo[..., None] + half[..., None] * (t + 1.0)
    r2 = A[:, None, None] * s * s + 2.0 * B[:, None, None] * s + C[:, None, None]
    w = radial_weight(params, np.sqrt(np.maximum(r2, 0.0)))
    out = np.einsum("pk,pkn,n->p", half, w, wt)
    return out


def lj_forces(x, i, j, shift, L, rc, coeffs):
    """Modified Lennard-Jones energy, per-particle forces and per-pair terms.

    ``coeffs = (a12, a6, q, c0)`` for ``phi = a12 r^-12 - a6 r^-6 + q r^2 + c0``.
    Returns ``(energy, forces, dvdr, rvec)``; pairs at or beyond ``rc`` get
    ``dvdr = 0``.
    """
    a12, a6, q, c0 = coeffs
    rvec = x[j] - x[i] + shift * L
    r = np.sqrt(np.einsum("ij,ij->i", rvec, rvec))
    if r.size and r.min() < 1e-9:
        k = int(np.argmin(r))
        raise FloatingPointError(f"particles {i[k]} and {j[k]} overlap (r={r[k]:.3g})")
    inside = r < rc
    ri = np.where(inside, 1.0 / np.where(inside, r, 1.0), 0.0)
    r6 = ri**6
    phi = np.where(inside, a12 * r6 * r6 - a6 * r6 + q * r * r + c0, 0.0)
    dvdr = np.where(inside, (-12.0 * a12 * r6 * r6 + 6.0 * a6 * r6) * ri + 2.0 * q * r, 0.0)
    fpair = (dvdr * ri)[:, None] * rvec
    n = x.shape[0]
    forces = np.zeros((n, 3))
    for d in range(3):
        forces[:, d] = np.bincount(i, fpair[:, d], n) - np.bincount(j, fpair[:, d], n)
    return float(phi.sum()), forces, dvdr, rvec


# ------------------------------------------------------------ double average


def _pieces(lo, hi, cuts):
    pts = [lo, hi] + [c for c in cuts if lo < c < hi]
    pts.sort()
    return pts


def _da_inner(params, radii, c1, c2, s):
    """``int g1(|z-c1|) g2(|z-c2|) z dz`` for one value of ``s``."""
    R = params[1]
    R1, R2 = R / s, R / (1.0 - s)
    e = c2 - c1
    D = float(np.sqrt(e @ e))
    t1, w1 = GL_R
    rad1 = [rho / s for rho in radii]
    rad2 = [rho / (1.0 - s) for rho in radii]
    if D < 1e-12 * (R1 + R2):
        pts = _pieces(0.0, min(R1, R2), rad1 + rad2)
        tot = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            r = a + 0.5 * (b - a) * (t1 + 1.0)
            g = radial_weight(params, s * r) * radial_weight(params, (1.0 - s) * r)
            tot += 0.5 * (b - a) * np.sum(w1 * g * 4.0 * np.pi * r * r)
        return tot * c1
    eh = e / D
    lo1, hi1 = max(0.0, D - R2), min(R1, D + R2)
    if hi1 <= lo1:
        return np.zeros(3)
    cuts = rad1 + [D, R2 - D] + [D + q for q in rad2] + [D - q for q in rad2] + [q - D for q in rad2]
    pts = _pieces(lo1, hi1, cuts)
    m0 = 0.0
    m1 = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        r1 = a + 0.5 * (b - a) * (t1 + 1.0)
        g1 = radial_weight(params, s * r1)
        for k in range(r1.size):
            if g1[k] == 0.0:
                continue
            lo2, hi2 = abs(r1[k] - D), min(r1[k] + D, R2)
            if hi2 <= lo2:
                continue
            p2 = _pieces(lo2, hi2, rad2)
            for a2, b2 in zip(p2[:-1], p2[1:]):
                r2 = a2 + 0.5 * (b2 - a2) * (t1 + 1.0)
                g = radial_weight(params, (1.0 - s) * r2) * r2 * w1
                wgt = 0.5 * (b - a) * w1[k] * g1[k] * r1[k] * 0.5 * (b2 - a2)
                tt = (r1[k] * r1[k] - r2 * r2 + D * D) / (2.0 * D)
                m0 += wgt * np.sum(g)
                m1 += wgt * np.sum(g * tt)
    return 2.0 * np.pi / D * (m0 * c1 + m1 * eh)


def da_integrals(params, radii, a, b):
    """``I = int_0^1 ds int dz w(a - s z) w(b + (1 - s) z) z`` per bond.

    ``a = x_alpha - x`` and ``b = x_beta - x``.  For fixed ``s`` the two
    factors are radial kernels about ``a/s`` and ``-b/(1-s)``; their product
    is integrated in bipolar coordinates.  The ``s`` range is the chord of the
    segment ``(1-s) a + s b`` inside the kernel support, where the two
    supports overlap.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    radii = [float(q) for q in radii]
    R = params[1]
    out = np.zeros((a.shape[0], 3))
    ts, ws = GL_S
    for p in range(a.shape[0]):
        d = b[p] - a[p]
        A = float(d @ d)
        B = float(a[p] @ d)
        C = float(a[p] @ a[p])
        br = _segment_breaks(np.array([A]), np.array([B]), np.array([C]), np.array([R]))[0]
        for lo, hi in zip(br[:-1], br[1:]):
            if hi - lo <= 1e-13:
                continue
            mid = 0.5 * (lo + hi)
            if A * mid * mid + 2 * B * mid + C >= R * R:
                continue
            for tk, wk in zip(ts, ws):
                s = lo + 0.5 * (hi - lo) * (tk + 1.0)
                if s <= 0.0 or s >= 1.0:
                    continue
                J = _da_inner(params, radii, a[p] / s, -b[p] / (1.0 - s), s)
                out[p] += 0.5 * (hi - lo) * wk * J
    return out
