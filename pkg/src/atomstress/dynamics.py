"""NVE molecular dynamics, velocity initialization and FIRE lattice statics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import _backend
from .core import ParticleState, Snapshot, Trajectory, build_neighbor_list
from .potentials import ForceReport, LennardJones, multibody_eval

log = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    """Integration or minimization produced non-finite or exploding values."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.002
    steps: int = 1000
    stride: int = 10
    seed: int = 0
    skin: float = 0.3
    keep_reports: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.stride < 1 or self.steps < 0:
            raise ValueError("stride must be >= 1 and steps >= 0")


@dataclass(frozen=True)
class MinimizerConfig:
    ftol: float = 1e-8
    maxiter: int = 20000
    dt: float = 0.005
    dtmax: float = 0.05
    skin: float = 0.3

    def __post_init__(self):
        if not self.ftol > 0:
            raise ValueError("force tolerance must be positive")
        if self.maxiter < 0:
            raise ValueError("maxiter must be non-negative")


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    state: ParticleState
    converged: bool
    iterations: int
    energy: float
    fmax: float
    energies: np.ndarray = field(repr=False, default=None)


def rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; the only RNG used by the engine."""
    return np.random.Generator(np.random.Philox(int(seed)))


def kinetic_temperature(state: ParticleState, kb: float = 1.0) -> float:
    """Instantaneous temperature with three COM degrees of freedom removed."""
    dof = 3 * state.n - 3
    return 2.0 * state.kinetic_energy() / (dof * kb)


def initialize_velocities(state: ParticleState, temperature: float, seed: int, kb: float = 1.0) -> ParticleState:
    """Maxwell-Boltzmann velocities rescaled to exactly ``temperature`` with zero total momentum."""
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if state.n < 2:
        raise ValueError("momentum removal needs at least two particles")
    if temperature == 0:
        return state.replace(velocities=np.zeros_like(state.positions))
    m = state.masses
    # drawn at 2T; the exact rescale below makes the draw temperature immaterial
    v = rng(seed).standard_normal((state.n, 3)) * np.sqrt(2.0 * kb * temperature / m)[:, None]
    v -= (m @ v) / m.sum()
    ke = 0.5 * float(np.sum(m[:, None] * v * v))
    target = 0.5 * (3 * state.n - 3) * kb * temperature
    v *= np.sqrt(target / ke)
    # the rescale can leave a rounding-level momentum; remove it again
    v -= (m @ v) / m.sum()
    return state.replace(velocities=v)


class _ForceField:
    """Energy and forces between snapshots without building a full report."""

    def __init__(self, state, model, skin):
        self.state = state
        self.model = model
        self.skin = skin
        self.nl = None
        self.rebuild(state.positions)

    def rebuild(self, x):
        self.nl = build_neighbor_list(self.state.replace(positions=x), self.model.cutoff, self.skin)
        self.shift = self.nl.shift.astype(float)

    def __call__(self, x):
        if self.nl.needs_rebuild(x):
            self.rebuild(x)
        m = self.model
        if isinstance(m, LennardJones):
            e, f, _, _ = _backend.kernels.lj_forces(
                x, self.nl.i, self.nl.j, self.shift, self.state.cell.lengths, m.cutoff, m.coeffs
            )
            return e, f
        rep = multibody_eval(self.state.replace(positions=x), self.nl, m)
        return rep.energy, rep.forces

    def report(self, state):
        return multibody_eval(state, self.nl, self.model)


def iter_nve(state: ParticleState, model, cfg: IntegratorConfig) -> Iterator[Snapshot]:
    """Velocity-Verlet snapshots every ``cfg.stride`` steps, starting at t=0.

    Positions are kept unwrapped so that displacements stay continuous; the
    neighbor list is rebuilt whenever a particle moved more than half the skin.
    """
    x = np.array(state.positions)
    v = np.array(state.velocities)
    m = state.masses[:, None]
    dt = cfg.dt
    field = _ForceField(state, model, cfg.skin)
    rep = field.report(state)
    e0 = rep.energy + state.kinetic_energy()
    bound = 10.0 * max(abs(e0), 1e-12)
    yield Snapshot(0.0, state, rep if cfg.keep_reports else None)
    f = rep.forces
    for step in range(1, cfg.steps + 1):
        v += 0.5 * dt * f / m
        x += dt * v
        epot, f = field(x)
        v += 0.5 * dt * f / m
        if step % cfg.stride == 0 or step == cfg.steps:
            cur = state.replace(positions=x, velocities=v)
            etot = epot + cur.kinetic_energy()
            if not np.isfinite(etot) or abs(etot) > bound:
                raise NumericalFailure(
                    f"energy blow-up at step {step}: E={etot:.6g}, initial E={e0:.6g}; reduce dt"
                )
            yield Snapshot(step * dt, cur, field.report(cur) if cfg.keep_reports else None)


def run_nve(state: ParticleState, model, cfg: IntegratorConfig) -> Trajectory:
    snaps = list(iter_nve(state, model, cfg))
    return Trajectory(snaps, {"dt": cfg.dt, "stride": cfg.stride, "seed": cfg.seed})


def total_energy(snap: Snapshot) -> float:
    if not isinstance(snap.report, ForceReport):
        raise ValueError("snapshot carries no force report")
    return snap.report.energy + snap.state.kinetic_energy()


def minimize(state: ParticleState, model, cfg: MinimizerConfig = MinimizerConfig(), fixed=None) -> MinimizeResult:
    """FIRE relaxation of the free particles until the largest force is below ``cfg.ftol``.

    A trial step that raises the energy beyond rounding is rejected (velocities
    quenched, step halved), so accepted energies never increase.  ``fixed`` is a
    boolean mask of particles held in place.
    """
    n = state.n
    free = np.ones(n, bool) if fixed is None else ~np.asarray(fixed, bool)
    m = state.masses[:, None]
    x = np.array(state.positions)
    cur = state.replace(velocities=np.zeros_like(x))
    nl = build_neighbor_list(cur, model.cutoff, cfg.skin)
    rep = multibody_eval(cur, nl, model)
    if not np.isfinite(rep.energy):
        raise NumericalFailure("initial energy is not finite")
    f = np.where(free[:, None], rep.forces, 0.0)
    e = rep.energy
    v = np.zeros_like(x)
    dt, alpha, npos = cfg.dt, 0.1, 0
    energies = [e]
    it = 0
    fmax = float(np.sqrt(np.max(np.einsum("ij,ij->i", f, f)))) if n else 0.0
    slack = 1e-13 * abs(e) + 1e-15 * n
    while fmax >= cfg.ftol and it < cfg.maxiter:
        it += 1
        p = float(np.sum(f * v))
        if p > 0:
            vn = np.sqrt(np.sum(v * v))
            fn = np.sqrt(np.sum(f * f))
            v = (1.0 - alpha) * v + alpha * vn * f / fn
            npos += 1
            if npos > 5:
                dt = min(1.1 * dt, cfg.dtmax)
                alpha *= 0.99
        else:
            v[:] = 0.0
            dt *= 0.5
            alpha, npos = 0.1, 0
        v += dt * f / m
        v[~free] = 0.0
        xt = x + dt * v
        trial = state.replace(positions=xt, velocities=np.zeros_like(x))
        if nl.needs_rebuild(xt):
            nl = build_neighbor_list(trial, model.cutoff, cfg.skin)
        rt = multibody_eval(trial, nl, model)
        if not np.isfinite(rt.energy):
            raise NumericalFailure(f"non-finite energy at iteration {it}")
        if rt.energy > e + slack:
            v[:] = 0.0
            dt *= 0.5
            alpha, npos = 0.1, 0
            if dt < 1e-12:
                break
            continue
        x, rep, e = xt, rt, rt.energy
        f = np.where(free[:, None], rep.forces, 0.0)
        fmax = float(np.sqrt(np.max(np.einsum("ij,ij->i", f, f))))
        energies.append(e)
    converged = fmax < cfg.ftol
    if not converged:
        log.warning("minimizer stopped after %d iterations with max force %.3g", it, fmax)
    out = state.replace(positions=x, velocities=np.zeros_like(x))
    return MinimizeResult(out, converged, it, e, fmax, np.array(energies))
