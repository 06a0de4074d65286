"""Cayley-Menger determinants and embeddability of distance sets in R^3."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
import scipy.linalg

MAX_POINTS = 12

# conditions by subset size: 3 -> chi <= 0, 4 -> chi >= 0, 5 and 6 -> chi == 0
CONDITIONS = {3: 1, 4: 2, 5: 3, 6: 4}


class NoEmbeddingError(ValueError):
    pass


class SquaredDistanceSet:
    """Symmetric table of squared distances ``s_ab = zeta_ab**2`` with zero diagonal.

    Entries may be floats or exact rationals (``int``/``Fraction``); exact input
    keeps determinants exact.
    """

    def __init__(self, s):
        rows = [list(r) for r in s]
        n = len(rows)
        if n < 1 or any(len(r) != n for r in rows):
            raise ValueError("squared distances must form a square table")
        exact = all(isinstance(v, Rational) for r in rows for v in r)
        for a in range(n):
            if rows[a][a] != 0:
                raise ValueError("diagonal of a squared distance table must be zero")
            for b in range(a + 1, n):
                if rows[a][b] != rows[b][a]:
                    raise ValueError(f"table not symmetric at ({a}, {b})")
                if rows[a][b] < 0:
                    raise ValueError("squared distances must be non-negative")
        self.n = n
        self.exact = exact
        self._rows = rows
        self.s = np.array(rows, dtype=object if exact else float)

    @classmethod
    def from_points(cls, points) -> "SquaredDistanceSet":
        p = np.asarray(points, dtype=float)
        d = p[:, None, :] - p[None, :, :]
        s = np.einsum("abk,abk->ab", d, d)
        return cls(0.5 * (s + s.T))

    @classmethod
    def from_distances(cls, d) -> "SquaredDistanceSet":
        d = np.asarray(d, dtype=float)
        return cls(d * d)

    def subset(self, idx) -> "SquaredDistanceSet":
        return SquaredDistanceSet([[self._rows[a][b] for b in idx] for a in idx])

    def scale(self) -> float:
        return float(max((float(v) for r in self._rows for v in r), default=0.0))


def bordered_matrix(dists: SquaredDistanceSet):
    n = dists.n
    if dists.exact:
        m = [[Fraction(0)] + [Fraction(1)] * n]
        m += [[Fraction(1)] + [Fraction(v) for v in row] for row in dists.s.tolist()]
        return m
    m = np.ones((n + 1, n + 1))
    m[0, 0] = 0.0
    m[1:, 1:] = dists.s
    return m


def _exact_det(m) -> Fraction:
    m = [row[:] for row in m]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                for k in range(c, n):
                    m[r][k] -= f * m[c][k]
    return det


def cayley_menger(dists: SquaredDistanceSet):
    """Determinant of the ``(n+1) x (n+1)`` bordered squared-distance matrix.

    Exact (``Fraction``) for rational input, LU with partial pivoting otherwise.
    """
    if not 2 <= dists.n <= 6:
        raise ValueError("cayley_menger needs 2 <= n <= 6 points")
    m = bordered_matrix(dists)
    if dists.exact:
        return _exact_det(m)
    with warnings.catch_warnings():
        # exactly singular matrices are the expected case for embedded 5- and 6-point sets
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    sign = (-1) ** int(np.sum(piv != np.arange(piv.size)))
    return float(sign * np.prod(np.diag(lu)))


def cayley_menger_gradient(dists: SquaredDistanceSet) -> np.ndarray:
    """``d chi / d s_ab`` for every pair (symmetric, zero diagonal).

    Each ``s_ab`` sits twice in the bordered matrix, so the derivative is twice
    the cofactor.  Cofactors are taken from explicit minors, which stay valid
    when the matrix is singular (embedded 5- and 6-point sets).
    """
    m = np.asarray(bordered_matrix(dists), dtype=float)
    n = dists.n
    g = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            minor = np.delete(np.delete(m, a + 1, axis=0), b + 1, axis=1)
            cof = (-1) ** (a + b) * np.linalg.det(minor)
            g[a, b] = g[b, a] = 2.0 * cof
    return g


@dataclass(frozen=True)
class EmbeddabilityVerdict:
    embeddable: bool
    first_violated: tuple | None = None  # (condition id, index tuple, chi)

    def __bool__(self):
        return self.embeddable


def embeddability_check(dists: SquaredDistanceSet, tolerance: float = 1e-8) -> EmbeddabilityVerdict:
    """Check the sign conditions on every 3-, 4-, 5- and 6-point subset.

    ``tolerance`` is relative: a subset of ``k`` points compares ``chi`` with
    ``tolerance * scale**(k-1)``, ``scale`` the largest squared distance in it.
    """
    n = dists.n
    if n < 3:
        raise ValueError("embeddability needs at least 3 points")
    if n > MAX_POINTS:
        raise ValueError(f"at most {MAX_POINTS} points are supported")
    for k in range(3, min(n, 6) + 1):
        cond = CONDITIONS[k]
        for idx in itertools.combinations(range(n), k):
            sub = dists.subset(idx)
            chi = float(cayley_menger(sub))
            bound = tolerance * max(sub.scale(), np.finfo(float).tiny) ** (k - 1)
            bad = (k == 3 and chi > bound) or (k == 4 and chi < -bound) or (k >= 5 and abs(chi) > bound)
            if bad:
                return EmbeddabilityVerdict(False, (cond, idx, chi))
    return EmbeddabilityVerdict(True, None)


def tenth_distance_candidates(dists: SquaredDistanceSet, unknown=(3, 4), rel_tol: float = 1e-10) -> list[float]:
    """Real values of the missing squared distance that make five points embeddable.

    ``dists`` is a 5-point table whose ``unknown`` entry is ignored.  The
    determinant is quadratic in that entry; its coefficients are recovered by
    evaluating it at three trial values.
    """
    if dists.n != 5:
        raise ValueError("need a 5-point distance table")
    a, b = unknown
    base = np.array(dists.s, dtype=float)
    scale = max(dists.scale(), 1e-300)

    def chi(x):
        t = base.copy()
        t[a, b] = t[b, a] = x
        return cayley_menger(SquaredDistanceSet(t))

    xs = np.array([0.0, scale, 2.0 * scale])
    ys = np.array([chi(x) for x in xs])
    # exact quadratic through three equally spaced samples
    A = (ys[2] - 2.0 * ys[1] + ys[0]) / (2.0 * scale * scale)
    B = (ys[1] - ys[0]) / scale - A * scale
    C = ys[0]
    if A == 0.0:
        raise NoEmbeddingError("determinant does not depend on the missing distance")
    disc = B * B - 4.0 * A * C
    if disc < -rel_tol * B * B:
        raise NoEmbeddingError("no embedding extends these nine distances")
    if disc <= rel_tol * B * B:
        return [-B / (2.0 * A)]
    q = -0.5 * (B + np.copysign(np.sqrt(disc), B))
    roots = sorted([q / A, C / q])
    return roots
