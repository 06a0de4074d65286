"""Normalized spherical averaging kernels, the bond function and the bond vector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erf

from . import _backend

KINDS = ("constant-mollified", "gaussian", "quartic-spline")
KIND_CODE = {"constant-mollified": 0, "gaussian": 1, "quartic-spline": 2}

_GL16 = np.polynomial.legendre.leggauss(16)
_GL64 = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class WeightingFunction:
    """Spherically symmetric kernel ``w(r)`` with unit volume integral.

    ``epsilon`` is the width of the cosine mollifier of the constant kernel
    (``None`` selects ``0.1 * r_w``, ``0`` gives the sharp uniform sphere).
    The Gaussian is truncated at ``gaussian_cutoff * r_w`` and renormalized.
    """

    kind: str
    r_w: float
    epsilon: float | None = None
    gaussian_cutoff: float = 6.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weighting kind {self.kind!r}; expected one of {KINDS}")
        if not self.r_w > 0:
            raise ValueError("r_w must be positive")
        if self.kind == "constant-mollified":
            eps = 0.1 * self.r_w if self.epsilon is None else float(self.epsilon)
            if not 0 <= eps <= self.r_w:
                raise ValueError("epsilon must lie in [0, r_w]")
            object.__setattr__(self, "epsilon", eps)
        else:
            object.__setattr__(self, "epsilon", 0.0)
        if self.gaussian_cutoff <= 0:
            raise ValueError("gaussian_cutoff must be positive")
        object.__setattr__(self, "_c", self._normalization())

    @property
    def support(self) -> float:
        if self.kind == "gaussian":
            return self.gaussian_cutoff * self.r_w
        return self.r_w

    @property
    def code(self) -> int:
        return KIND_CODE[self.kind]

    @property
    def params(self) -> np.ndarray:
        """Packed parameters for the compiled kernels: kind, support, r_w, eps, c."""
        return np.array([self.code, self.support, self.r_w, self.epsilon, self._c], dtype=float)

    def _normalization(self) -> float:
        rw = self.r_w
        if self.kind == "quartic-spline":
            return 105.0 / (16.0 * np.pi * rw**3)
        if self.kind == "gaussian":
            x = self.gaussian_cutoff
            mass = erf(x) - 2.0 * x / np.sqrt(np.pi) * np.exp(-x * x)
            return np.pi**-1.5 * rw**-3 / mass
        eps = self.epsilon
        inner = 4.0 / 3.0 * np.pi * (rw - eps) ** 3
        if eps == 0:
            return 1.0 / inner
        t, wt = _GL64
        r = rw - eps + 0.5 * eps * (t + 1.0)
        shell = 0.5 * eps * np.sum(wt * 0.5 * (1.0 - np.cos((rw - r) / eps * np.pi)) * 4.0 * np.pi * r * r)
        return 1.0 / (inner + shell)

    def radial(self, r) -> np.ndarray:
        """Kernel value ``w_hat(r)`` (volume^-1)."""
        return _backend.kernels.radial_weight(self.params, np.asarray(r, dtype=float))

    def __call__(self, vec) -> np.ndarray:
        v = np.asarray(vec, dtype=float)
        return self.radial(np.sqrt(np.sum(v * v, axis=-1)))

    def max_value(self) -> float:
        return float(self.radial(0.0))

    def radii_of_interest(self) -> np.ndarray:
        """Radii where the profile is non-smooth (or, for the Gaussian, panel edges)."""
        if self.kind == "constant-mollified":
            if self.epsilon > 0:
                return np.array([self.r_w - self.epsilon, self.r_w])
            return np.array([self.r_w])
        if self.kind == "quartic-spline":
            return np.array([self.r_w])
        return self.r_w * np.arange(1, int(np.ceil(2 * self.gaussian_cutoff)) + 1) / 2.0

    def shell_integral(self, u: float) -> float:
        """``int_0^u s^2 w_hat(s) ds`` by panel Gauss-Legendre."""
        edges = np.concatenate(([0.0], self.radii_of_interest()))
        edges = np.unique(np.clip(edges, 0.0, u))
        total = 0.0
        t, wt = _GL16
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi <= lo:
                continue
            s = 0.5 * (hi - lo) * (t + 1.0) + lo
            total += 0.5 * (hi - lo) * float(np.sum(wt * s * s * self.radial(s)))
        return total

    def normalization_integral(self) -> float:
        """``4 pi int_0^inf w_hat(r) r^2 dr``; equals 1 by construction."""
        return 4.0 * np.pi * self.shell_integral(self.support)


def weighting_from_config(section: dict, r_w: float) -> WeightingFunction:
    """Kernel of radius ``r_w`` from a ``[weighting]`` section (mollifier width as a fraction of ``r_w``)."""
    kind = section["kind"]
    if kind == "constant-mollified":
        return WeightingFunction(kind, r_w, epsilon=section["epsilon_ratio"] * r_w)
    return WeightingFunction(kind, r_w, gaussian_cutoff=section["gaussian_cutoff"])


def weight_eval(wf: WeightingFunction, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    return wf.radial(r)


def bond_function(wf: WeightingFunction, x, u, v) -> np.ndarray:
    """``b(x; u, v) = int_0^1 w((1-s) u + s v - x) ds``.

    ``u`` and ``v`` may be ``(3,)`` or ``(P, 3)``; the result has the matching
    leading shape.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    single = u.ndim == 1
    u2 = np.ascontiguousarray(np.atleast_2d(u))
    v2 = np.ascontiguousarray(np.atleast_2d(v))
    x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(3))
    out = _backend.kernels.bond_function(wf.params, wf.radii_of_interest(), x, u2, v2)
    return out[0] if single else out


# ----------------------------------------------------------------- bond vector


@dataclass(frozen=True)
class InteractionPath:
    """Contour ``Y_l(s)`` from the origin to ``(l, 0, 0)`` and its derivative."""

    point: Callable[[float, float], np.ndarray]
    tangent: Callable[[float, float], np.ndarray]
    straight: bool = False


def straight_path() -> InteractionPath:
    return InteractionPath(
        point=lambda s, l: np.array([s * l, 0.0, 0.0]),
        tangent=lambda s, l: np.array([l, 0.0, 0.0]),
        straight=True,
    )


def circular_arc_path(sagitta_ratio: float) -> InteractionPath:
    """Planar arc in the (e1, e2) plane with peak height ``sagitta_ratio * l``.

    Parametrized so that ``Y_l(s) . e1 = s l``.
    """
    h = float(sagitta_ratio)

    def point(s, l):
        return np.array([s * l, 4.0 * h * l * s * (1.0 - s), 0.0])

    def tangent(s, l):
        return np.array([l, 4.0 * h * l * (1.0 - 2.0 * s), 0.0])

    return InteractionPath(point, tangent)


def rotation_to(z) -> np.ndarray:
    """Rotation ``Q`` with ``Q e1 = -z/|z|`` of minimal angle (no spin about ``z``)."""
    z = np.asarray(z, dtype=float)
    target = -z / np.linalg.norm(z)
    e1 = np.array([1.0, 0.0, 0.0])
    c = float(e1 @ target)
    k = np.cross(e1, target)
    sn = np.linalg.norm(k)
    if sn < 1e-14:
        if c > 0:
            return np.eye(3)
        # half turn about e3
        return np.diag([-1.0, -1.0, 1.0])
    k = k / sn
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + sn * K + (1 - c) * K @ K


def bond_vector(wf: WeightingFunction, x, u, v, path: InteractionPath | None = None,
                nodes: int = 64) -> np.ndarray:
    """Bond vector for an interaction path from ``u`` to ``v``.

    ``-int_0^1 w(y(s) - x) Q Y'_l(s) ds`` with ``z = u - v``, ``l = |z|``,
    ``y(s) = u + Q Y_l(s)``.  The straight path reduces to ``(u - v) b(x; u, v)``.
    """
    path = straight_path() if path is None else path
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    z = u - v
    l = float(np.linalg.norm(z))
    if path.straight:
        return z * bond_function(wf, x, u, v)
    if l == 0.0:
        raise ValueError("curved interaction path needs distinct endpoints")
    Q = rotation_to(z)
    t, wt = np.polynomial.legendre.leggauss(nodes)
    # panels keep the Gauss rule accurate across the kernel edge
    edges = np.linspace(0.0, 1.0, 17)
    out = np.zeros(3)
    x = np.asarray(x, dtype=float)
    for lo, hi in zip(edges[:-1], edges[1:]):
        for tk, wk in zip(t, wt):
            s = lo + 0.5 * (hi - lo) * (tk + 1.0)
            y = u + Q @ path.point(s, l)
            out -= 0.5 * (hi - lo) * wk * wf(y - x) * (Q @ path.tangent(s, l))
    return out
