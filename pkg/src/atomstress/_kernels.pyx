# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; mirrors ``_pykernels`` function by function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, exp, fabs, M_PI

cnp.import_array()

NAME = "compiled"

_ts, _ws = np.polynomial.legendre.leggauss(16)
_tr, _wr = np.polynomial.legendre.leggauss(12)
cdef double[16] TS
cdef double[16] WS
cdef double[12] TR
cdef double[12] WR
for _k in range(16):
    TS[_k] = _ts[_k]
    WS[_k] = _ws[_k]
for _k in range(12):
    TR[_k] = _tr[_k]
    WR[_k] = _wr[_k]

cdef enum:
    MAXR = 32
    MAXB = 80


cdef struct Kern:
    int kind
    double R
    double rw
    double eps
    double c


cdef Kern _kern(params):
    cdef Kern k
    k.kind = <int> params[0]
    k.R = params[1]
    k.rw = params[2]
    k.eps = params[3]
    k.c = params[4]
    return k


cdef inline double wval(Kern* k, double r) nogil:
    cdef double q
    if k.kind == 0:
        if k.eps > 0:
            if r < k.R - k.eps:
                return k.c
            if r < k.R:
                return 0.5 * k.c * (1.0 - cos(M_PI * (k.R - r) / k.eps))
            return 0.0
        return k.c if r <= k.R else 0.0
    if k.kind == 1:
        if r <= k.R:
            return k.c * exp(-(r / k.rw) * (r / k.rw))
        return 0.0
    if r < k.rw:
        q = r / k.rw
        return k.c * (1.0 + 3.0 * q) * (1.0 - q) * (1.0 - q) * (1.0 - q)
    return 0.0


cdef inline void isort(double* a, int n) nogil:
    cdef int i, j
    cdef double t
    for i in range(1, n):
        t = a[i]
        j = i - 1
        while j >= 0 and a[j] > t:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = t


cdef inline double clip01(double s) nogil:
    if s < 0.0:
        return 0.0
    if s > 1.0:
        return 1.0
    return s


cdef int segment_breaks(double A, double B, double C, double* radii, int nrad, double* br) nogil:
    cdef int n, k = 3 + 2 * nrad
    cdef double disc, sq
    br[0] = 0.0
    br[1] = 1.0
    br[2] = clip01(-B / A) if A > 0 else 1.0
    for n in range(nrad):
        disc = B * B - A * (C - radii[n] * radii[n])
        if disc > 0 and A > 0:
            sq = sqrt(disc)
            br[3 + 2 * n] = clip01((-B - sq) / A)
            br[4 + 2 * n] = clip01((-B + sq) / A)
        else:
            br[3 + 2 * n] = 1.0
            br[4 + 2 * n] = 1.0
    isort(br, k)
    return k


def radial_weight(params, r):
    cdef Kern k = _kern(params)
    arr = np.asarray(r, dtype=float)
    flat = np.ascontiguousarray(arr.ravel())
    cdef const double[::1] rv = flat
    out = np.empty(flat.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(rv.shape[0]):
        ov[i] = wval(&k, rv[i])
    return out.reshape(arr.shape)


def bond_function(params, radii, x, u, v):
    cdef Kern k = _kern(params)
    cdef const double[::1] rad = np.ascontiguousarray(radii, dtype=float)
    cdef int nrad = rad.shape[0]
    if nrad > MAXR:
        raise ValueError("too many kernel radii")
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef const double[:, ::1] uv = np.ascontiguousarray(u, dtype=float)
    cdef const double[:, ::1] vv = np.ascontiguousarray(v, dtype=float)
    cdef Py_ssize_t P = uv.shape[0], p
    out = np.zeros(P)
    cdef double[::1] ov = out
    cdef double br[MAXB]
    cdef double p0[3]
    cdef double d[3]
    cdef double A, B, C, lo, hi, half, s, acc, tot
    cdef int nb, m, n, q
    with nogil:
        for p in range(P):
            for q in range(3):
                p0[q] = uv[p, q] - xv[q]
                d[q] = vv[p, q] - uv[p, q]
            A = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
            B = p0[0] * d[0] + p0[1] * d[1] + p0[2] * d[2]
            C = p0[0] * p0[0] + p0[1] * p0[1] + p0[2] * p0[2]
            nb = segment_breaks(A, B, C, &rad[0], nrad, br)
            tot = 0.0
            for m in range(nb - 1):
                lo = br[m]
                hi = br[m + 1]
                half = 0.5 * (hi - lo)
                acc = 0.0
                for n in range(16):
                    s = lo + half * (TS[n] + 1.0)
                    acc = acc + WS[n] * wval(&k, sqrt(max(A * s * s + 2.0 * B * s + C, 0.0)))
                tot = tot + half * acc
            ov[p] = tot
    return out


def lj_forces(x, i, j, shift, L, double rc, coeffs):
    cdef double a12 = coeffs[0], a6 = coeffs[1], qq = coeffs[2], c0 = coeffs[3]
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef const Py_ssize_t[::1] iv = np.ascontiguousarray(i, dtype=np.intp)
    cdef const Py_ssize_t[::1] jv = np.ascontiguousarray(j, dtype=np.intp)
    cdef const double[:, ::1] sv = np.ascontiguousarray(shift, dtype=float)
    cdef const double[::1] Lv = np.ascontiguousarray(L, dtype=float)
    cdef Py_ssize_t P = iv.shape[0], N = xv.shape[0], p, a, b
    forces = np.zeros((N, 3))
    dvdr = np.zeros(P)
    rvec = np.empty((P, 3))
    cdef double[:, ::1] fv = forces
    cdef double[::1] dv = dvdr
    cdef double[:, ::1] rv = rvec
    cdef double energy = 0.0, r2, r, ri, r6, g, dx, dy, dz
    cdef Py_ssize_t bad = -1
    cdef double badr = 0.0
    with nogil:
        for p in range(P):
            a = iv[p]
            b = jv[p]
            dx = xv[b, 0] - xv[a, 0] + sv[p, 0] * Lv[0]
            dy = xv[b, 1] - xv[a, 1] + sv[p, 1] * Lv[1]
            dz = xv[b, 2] - xv[a, 2] + sv[p, 2] * Lv[2]
            rv[p, 0] = dx
            rv[p, 1] = dy
            rv[p, 2] = dz
            r2 = dx * dx + dy * dy + dz * dz
            r = sqrt(r2)
            if r < 1e-9:
                if bad < 0:
                    bad = p
                    badr = r
                continue
            if r >= rc:
                continue
            ri = 1.0 / r
            r6 = ri * ri * ri * ri * ri * ri
            energy += a12 * r6 * r6 - a6 * r6 + qq * r2 + c0
            dv[p] = (-12.0 * a12 * r6 * r6 + 6.0 * a6 * r6) * ri + 2.0 * qq * r
            g = dv[p] * ri
            fv[a, 0] += g * dx
            fv[a, 1] += g * dy
            fv[a, 2] += g * dz
            fv[b, 0] -= g * dx
            fv[b, 1] -= g * dy
            fv[b, 2] -= g * dz
    if bad >= 0:
        raise FloatingPointError(f"particles {iv[bad]} and {jv[bad]} overlap (r={badr:.3g})")
    return float(energy), forces, dvdr, rvec


# ------------------------------------------------------------ double average


cdef int pieces(double lo, double hi, double* cuts, int nc, double* out) nogil:
    cdef int n = 2, k
    out[0] = lo
    out[1] = hi
    for k in range(nc):
        if lo < cuts[k] < hi:
            out[n] = cuts[k]
            n += 1
    isort(out, n)
    return n


cdef void da_inner(Kern* k, double* radii, int nrad, double* c1, double* c2, double s,
                   double* J) nogil:
    cdef double R1 = k.R / s, R2 = k.R / (1.0 - s)
    cdef double e[3]
    cdef double D, lo1, hi1, a, b, a2, b2, r1, r2, g1, g2, tt, wgt, m0 = 0.0, m1 = 0.0, tot
    cdef double cuts[4 * MAXR + 8]
    cdef double pts[4 * MAXR + 10]
    cdef double rad2[MAXR]
    cdef double pts2[MAXR + 2]
    cdef int nc = 0, np_, np2, q, m, mm, n, n2
    for q in range(3):
        e[q] = c2[q] - c1[q]
    D = sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
    for q in range(nrad):
        rad2[q] = radii[q] / (1.0 - s)
    J[0] = 0.0
    J[1] = 0.0
    J[2] = 0.0
    if D < 1e-12 * (R1 + R2):
        for q in range(nrad):
            cuts[nc] = radii[q] / s
            nc += 1
        for q in range(nrad):
            cuts[nc] = rad2[q]
            nc += 1
        np_ = pieces(0.0, min(R1, R2), cuts, nc, pts)
        tot = 0.0
        for m in range(np_ - 1):
            a = pts[m]
            b = pts[m + 1]
            for n in range(12):
                r1 = a + 0.5 * (b - a) * (TR[n] + 1.0)
                tot += 0.5 * (b - a) * WR[n] * wval(k, s * r1) * wval(k, (1.0 - s) * r1) * 4.0 * M_PI * r1 * r1
        for q in range(3):
            J[q] = tot * c1[q]
        return
    lo1 = max(0.0, D - R2)
    hi1 = min(R1, D + R2)
    if hi1 <= lo1:
        return
    for q in range(nrad):
        cuts[nc] = radii[q] / s
        nc += 1
    cuts[nc] = D
    cuts[nc + 1] = R2 - D
    nc += 2
    for q in range(nrad):
        cuts[nc] = D + rad2[q]
        cuts[nc + 1] = D - rad2[q]
        cuts[nc + 2] = rad2[q] - D
        nc += 3
    np_ = pieces(lo1, hi1, cuts, nc, pts)
    for m in range(np_ - 1):
        a = pts[m]
        b = pts[m + 1]
        for n in range(12):
            r1 = a + 0.5 * (b - a) * (TR[n] + 1.0)
            g1 = wval(k, s * r1)
            if g1 == 0.0:
                continue
            a2 = fabs(r1 - D)
            b2 = min(r1 + D, R2)
            if b2 <= a2:
                continue
            np2 = pieces(a2, b2, rad2, nrad, pts2)
            for mm in range(np2 - 1):
                a2 = pts2[mm]
                b2 = pts2[mm + 1]
                wgt = 0.5 * (b - a) * WR[n] * g1 * r1 * 0.5 * (b2 - a2)
                for n2 in range(12):
                    r2 = a2 + 0.5 * (b2 - a2) * (TR[n2] + 1.0)
                    g2 = wval(k, (1.0 - s) * r2) * r2 * WR[n2]
                    tt = (r1 * r1 - r2 * r2 + D * D) / (2.0 * D)
                    m0 += wgt * g2
                    m1 += wgt * g2 * tt
    for q in range(3):
        J[q] = 2.0 * M_PI / D * (m0 * c1[q] + m1 * e[q] / D)


def da_integrals(params, radii, a, b):
    cdef Kern k = _kern(params)
    cdef const double[::1] rad = np.ascontiguousarray(radii, dtype=float)
    cdef int nrad = rad.shape[0]
    if nrad > MAXR:
        raise ValueError("too many kernel radii")
    cdef const double[:, ::1] av = np.ascontiguousarray(np.atleast_2d(a), dtype=float)
    cdef const double[:, ::1] bv = np.ascontiguousarray(np.atleast_2d(b), dtype=float)
    cdef Py_ssize_t P = av.shape[0], p
    out = np.zeros((P, 3))
    cdef double[:, ::1] ov = out
    cdef double br[MAXB]
    cdef double d[3]
    cdef double c1[3]
    cdef double c2[3]
    cdef double J[3]
    cdef double A, B, C, lo, hi, mid, s, Rr = k.R
    cdef int nb, m, n, q
    with nogil:
        for p in range(P):
            for q in range(3):
                d[q] = bv[p, q] - av[p, q]
            A = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
            B = av[p, 0] * d[0] + av[p, 1] * d[1] + av[p, 2] * d[2]
            C = av[p, 0] * av[p, 0] + av[p, 1] * av[p, 1] + av[p, 2] * av[p, 2]
            nb = segment_breaks(A, B, C, &Rr, 1, br)
            for m in range(nb - 1):
                lo = br[m]
                hi = br[m + 1]
                if hi - lo <= 1e-13:
                    continue
                mid = 0.5 * (lo + hi)
                if A * mid * mid + 2 * B * mid + C >= Rr * Rr:
                    continue
                for n in range(16):
                    s = lo + 0.5 * (hi - lo) * (TS[n] + 1.0)
                    if s <= 0.0 or s >= 1.0:
                        continue
                    for q in range(3):
                        c1[q] = av[p, q] / s
                        c2[q] = -bv[p, q] / (1.0 - s)
                    da_inner(&k, &rad[0], nrad, c1, c2, s, J)
                    for q in range(3):
                        ov[p, q] += 0.5 * (hi - lo) * WS[n] * J[q]
    return out

