"""Shared plumbing for the estimators: grids, result containers, force reports, images."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..core import ParticleState, Snapshot, build_neighbor_list
from ..potentials import ForceReport, multibody_eval

TENSOR_LABELS = ("11", "12", "13", "21", "22", "23", "31", "32", "33")


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Evaluation points, optionally carrying regular-grid metadata."""

    points: np.ndarray
    origin: np.ndarray | None = None
    spacing: np.ndarray | None = None
    counts: tuple | None = None

    def __post_init__(self):
        p = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("grid points must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def regular(cls, origin, spacing, counts) -> "FieldGrid":
        """Points ``origin + (i, j, k) * spacing`` with ``i`` varying slowest."""
        origin = np.asarray(origin, dtype=float)
        spacing = np.asarray(spacing, dtype=float)
        counts = tuple(int(c) for c in counts)
        idx = np.indices(counts).reshape(3, -1).T
        return cls(origin + idx * spacing, origin, spacing, counts)

    @classmethod
    def single(cls, point) -> "FieldGrid":
        return cls(np.asarray(point, dtype=float).reshape(1, 3))

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class StressField:
    """Kinetic and potential 3x3 tensors per grid point."""

    points: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    estimator: str
    window: tuple = (0.0, 0.0)
    metadata: dict = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.potential

    def csv_header(self) -> list[str]:
        cols = ["x", "y", "z"]
        for part in ("kin", "pot", "tot"):
            cols += [f"{part}_{c}" for c in TENSOR_LABELS]
        return cols

    def csv_rows(self):
        k = self.kinetic.reshape(-1, 9)
        v = self.potential.reshape(-1, 9)
        t = self.total.reshape(-1, 9)
        for n in range(self.points.shape[0]):
            yield [float(c) for c in np.concatenate((self.points[n], k[n], v[n], t[n]))]


def as_snapshots(data) -> list[Snapshot]:
    """Accept a ParticleState, a Snapshot, or any iterable of snapshots."""
    if isinstance(data, ParticleState):
        return [Snapshot(0.0, data)]
    if isinstance(data, Snapshot):
        return [data]
    snaps = list(data)
    if not snaps:
        raise ValueError("averaging window holds no snapshots")
    return snaps


def report_for(snap: Snapshot, model) -> ForceReport:
    if isinstance(snap.report, ForceReport):
        return snap.report
    nl = build_neighbor_list(snap.state, model.cutoff, 0.0)
    return multibody_eval(snap.state, nl, model)


def window_of(snaps: Iterable[Snapshot]) -> tuple:
    snaps = list(snaps)
    return (snaps[0].time, snaps[-1].time)


def image_offsets(cell, reach: float) -> np.ndarray:
    """Lattice translations able to bring a wrapped point within ``reach`` of another."""
    L = cell.lengths
    ranges = []
    for d in range(3):
        k = int(np.ceil(reach / L[d])) if cell.periodic[d] else 0
        ranges.append(np.arange(-k, k + 1))
    n = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(3, -1).T
    return n * L


def wrap_points(cell, x) -> np.ndarray:
    return cell.wrap(np.asarray(x, dtype=float))
