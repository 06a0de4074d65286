"""Particle configurations, orthogonal periodic cells and neighbor lists."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree


class GeometryError(ValueError):
    """Raised when a cell is too small for the requested interaction range."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SimulationCell:
    """Orthogonal simulation box.

    ``vectors`` holds the three edge vectors as rows.  Off-diagonal entries
    must vanish; triclinic cells are not supported.
    """

    vectors: np.ndarray
    periodic: tuple = (True, True, True)
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.shape == (3,):
            v = np.diag(v)
        if v.shape != (3, 3):
            raise ValueError("cell vectors must be a 3x3 array or 3 lengths")
        if np.any(np.abs(v - np.diag(np.diag(v))) > 1e-12 * np.abs(v).max()):
            raise ValueError("only orthogonal cells are supported")
        if np.any(np.diag(v) <= 0.0):
            raise ValueError("cell volume must be positive")
        object.__setattr__(self, "vectors", _frozen(v))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
        object.__setattr__(self, "origin", _frozen(self.origin))

    @classmethod
    def orthogonal(cls, lengths, periodic=(True, True, True), origin=(0.0, 0.0, 0.0)):
        return cls(np.diag(np.asarray(lengths, dtype=float)), tuple(periodic), np.asarray(origin, float))

    @property
    def lengths(self) -> np.ndarray:
        return np.diag(self.vectors).copy()

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def pbc(self) -> np.ndarray:
        return np.array(self.periodic, dtype=bool)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map positions into the primary cell along periodic directions."""
        x = np.array(x, dtype=float, copy=True)
        L = self.lengths
        for d in range(3):
            if self.periodic[d]:
                x[..., d] = self.origin[d] + np.mod(x[..., d] - self.origin[d], L[d])
        return x

    def scaled(self, factors) -> "SimulationCell":
        f = np.asarray(factors, dtype=float)
        return SimulationCell(np.diag(self.lengths * f), self.periodic, self.origin * f)

    def __eq__(self, other):
        return (
            isinstance(other, SimulationCell)
            and np.array_equal(self.vectors, other.vectors)
            and self.periodic == other.periodic
            and np.array_equal(self.origin, other.origin)
        )


def minimum_image_displacement(cell: SimulationCell, xa, xb) -> np.ndarray:
    """Shortest periodic representative of ``xb - xa`` (broadcasts over leading axes)."""
    d = np.asarray(xb, dtype=float) - np.asarray(xa, dtype=float)
    L = cell.lengths
    for k in range(3):
        if cell.periodic[k]:
            d[..., k] -= L[k] * np.round(d[..., k] / L[k])
    return d


@dataclass(frozen=True, eq=False)
class ParticleState:
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    species: np.ndarray
    cell: SimulationCell

    def __post_init__(self):
        x = _frozen(self.positions)
        if x.ndim != 2 or x.shape[1] != 3 or x.shape[0] < 1:
            raise ValueError("positions must have shape (N, 3) with N >= 1")
        n = x.shape[0]
        v = np.zeros_like(x) if self.velocities is None else np.asarray(self.velocities, float)
        m = np.broadcast_to(np.asarray(self.masses, dtype=float), (n,))
        s = np.broadcast_to(np.asarray(self.species, dtype=object), (n,))
        if v.shape != x.shape:
            raise ValueError("velocities must match positions")
        if not np.all(np.isfinite(x)):
            raise ValueError("positions must be finite")
        if np.any(m <= 0.0):
            raise ValueError("masses must be positive")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", _frozen(v))
        object.__setattr__(self, "masses", _frozen(m))
        object.__setattr__(self, "species", _frozen(s, dtype=object))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def __len__(self):
        return self.n

    def replace(self, **changes) -> "ParticleState":
        kw = dict(
            positions=self.positions,
            velocities=self.velocities,
            masses=self.masses,
            species=self.species,
            cell=self.cell,
        )
        kw.update(changes)
        return ParticleState(**kw)

    def subset(self, mask) -> "ParticleState":
        return ParticleState(
            self.positions[mask], self.velocities[mask], self.masses[mask], self.species[mask], self.cell
        )

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.masses[:, None] * self.velocities**2))

    def momentum(self) -> np.ndarray:
        return (self.masses[:, None] * self.velocities).sum(axis=0)


@dataclass(frozen=True, eq=False)
class Snapshot:
    time: float
    state: ParticleState
    # force report at these positions; filled by the integrator, never serialized
    report: object = None

    def __post_init__(self):
        if not np.isfinite(self.time):
            raise ValueError("snapshot time must be finite")


class Trajectory(Sequence):
    """Ordered, immutable sequence of snapshots of one particle system."""

    def __init__(self, snapshots: Sequence[Snapshot] = (), metadata: dict | None = None):
        snaps = tuple(snapshots)
        for k in range(1, len(snaps)):
            a, b = snaps[k - 1], snaps[k]
            if b.time < a.time:
                raise ValueError(f"snapshot {k}: time decreases")
            if b.state.n != a.state.n:
                raise ValueError(f"snapshot {k}: particle count changed")
            if not np.array_equal(a.state.masses, b.state.masses) or not np.array_equal(
                a.state.species, b.state.species
            ):
                raise ValueError(f"snapshot {k}: masses or species changed")
            if a.state.cell.periodic != b.state.cell.periodic:
                raise ValueError(f"snapshot {k}: cell topology changed")
        self._snaps = snaps
        self.metadata = dict(metadata or {})

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Trajectory(self._snaps[i], self.metadata)
        return self._snaps[i]

    def __len__(self):
        return len(self._snaps)

    def __iter__(self) -> Iterator[Snapshot]:
        return iter(self._snaps)

    @property
    def dt(self) -> float:
        if len(self._snaps) < 2:
            return 0.0
        return self._snaps[1].time - self._snaps[0].time

    def window(self, t0: float, tau: float) -> "Trajectory":
        """Snapshots with ``t0 <= time <= t0 + tau``."""
        sel = [s for s in self._snaps if t0 - 1e-12 <= s.time <= t0 + tau + 1e-12]
        return Trajectory(sel, self.metadata)


FCC_BASIS = np.array([[0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])


def build_fcc_lattice(nx: int, ny: int, nz: int, a: float, species="X", mass: float = 1.0,
                      periodic=(True, True, True)) -> ParticleState:
    """FCC crystal of ``nx*ny*nz`` cubic unit cells with lattice constant ``a``.

    Atoms are ordered cell by cell (x slowest), four basis atoms per cell.
    """
    counts = np.array([nx, ny, nz])
    if np.any(counts < 1) or np.any(counts != np.floor(counts)):
        raise ValueError("cell counts must be positive integers")
    if not a > 0:
        raise ValueError("lattice constant must be positive")
    idx = np.indices((nx, ny, nz)).reshape(3, -1).T
    pos = (idx[:, None, :] + FCC_BASIS[None, :, :]).reshape(-1, 3) * a
    cell = SimulationCell.orthogonal(counts * a, periodic)
    n = pos.shape[0]
    return ParticleState(pos, np.zeros((n, 3)), np.full(n, float(mass)), np.full(n, species, dtype=object), cell)


def carve_plate_with_hole(state: ParticleState, center, radius: float) -> ParticleState:
    """Remove every particle whose in-plane (x1, x2) distance to ``center`` is below ``radius``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return state
    c = np.asarray(center, dtype=float)
    d = np.hypot(state.positions[:, 0] - c[0], state.positions[:, 1] - c[1])
    return state.subset(d >= radius)


@dataclass(frozen=True, eq=False)
class NeighborList:
    """Half list of pairs ``i < j`` with integer image shifts.

    The bond vector of pair ``k`` is ``x[j] - x[i] + shift[k] * L``.
    """

    i: np.ndarray
    j: np.ndarray
    shift: np.ndarray
    cutoff: float
    skin: float
    reference: np.ndarray
    cell: SimulationCell

    @property
    def npairs(self) -> int:
        return self.i.shape[0]

    def bond_vectors(self, positions) -> np.ndarray:
        x = np.asarray(positions, dtype=float)
        return x[self.j] - x[self.i] + self.shift * self.cell.lengths

    def needs_rebuild(self, positions) -> bool:
        if self.skin <= 0:
            return True
        disp = minimum_image_displacement(self.cell, self.reference, positions)
        return bool(np.max(np.einsum("ij,ij->i", disp, disp)) > (0.5 * self.skin) ** 2)

    def per_particle(self) -> list[list[tuple[int, tuple[int, int, int]]]]:
        """Full symmetric view: ``out[a]`` lists ``(b, shift)`` with bond ``x_b - x_a + shift*L``."""
        n = self.reference.shape[0]
        out: list[list] = [[] for _ in range(n)]
        for a, b, s in zip(self.i.tolist(), self.j.tolist(), self.shift.tolist()):
            out[a].append((b, tuple(s)))
            out[b].append((a, tuple(-v for v in s)))
        return out


def build_neighbor_list(state: ParticleState, cutoff: float, skin: float = 0.3) -> NeighborList:
    """All pairs within ``cutoff + skin`` under the minimum-image convention."""
    if not cutoff > 0 or skin < 0:
        raise ValueError("cutoff must be positive and skin non-negative")
    cell = state.cell
    L = cell.lengths
    reach = cutoff + skin
    for d in range(3):
        if cell.periodic[d] and reach >= 0.5 * L[d]:
            raise GeometryError(
                f"cutoff+skin={reach:g} must be below half the periodic length {L[d]:g} (direction {d})"
            )
    x = state.positions
    xw = cell.wrap(x) - cell.origin
    box = np.empty(3)
    lo = xw.min(axis=0)
    for d in range(3):
        if cell.periodic[d]:
            box[d] = L[d]
            xw[:, d] = np.mod(xw[:, d], L[d])
            # mod can return L for tiny negatives
            xw[xw[:, d] >= L[d], d] = 0.0
        else:
            xw[:, d] -= lo[d]
            box[d] = xw[:, d].max() + 2.0 * reach + 1.0
    tree = cKDTree(xw, boxsize=box)
    pairs = tree.query_pairs(reach, output_type="ndarray")
    if pairs.size == 0:
        pairs = np.zeros((0, 2), dtype=np.intp)
    pairs = np.sort(pairs, axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    i = np.ascontiguousarray(pairs[:, 0], dtype=np.intp)
    j = np.ascontiguousarray(pairs[:, 1], dtype=np.intp)
    raw = x[j] - x[i]
    shift = np.zeros(raw.shape, dtype=np.int64)
    for d in range(3):
        if cell.periodic[d]:
            shift[:, d] = -np.round(raw[:, d] / L[d]).astype(np.int64)
    nl = NeighborList(i, j, shift, float(cutoff), float(skin), _frozen(x), cell)
    return nl
