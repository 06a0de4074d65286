"""Drivers for the four numerical experiments (desk-scale defaults).

Each driver takes a resolved :class:`RunConfig` and returns an
:class:`ExperimentResult` holding CSV tables and a summary of the checked
quantities; :func:`run_experiment` writes both to an output directory.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Snapshot, build_fcc_lattice, carve_plate_with_hole
from .dynamics import IntegratorConfig, MinimizerConfig, initialize_velocities, iter_nve, kinetic_temperature, minimize
from .elasticity import CubicConstants, engineering_moduli, kirsch_anisotropic, kirsch_concentration, uniaxial_cell_strain
from .estimators import (
    FieldGrid,
    PlanarProbe,
    TractionAccumulator,
    da_stress,
    hardy_stress,
    tsai_traction_many,
    virial_pressure,
    virial_stress,
    virial_stress_many,
)
from .io import write_csv
from .potentials import evaluate, model_from_config
from .runconfig import RunConfig
from .weighting import WeightingFunction, weighting_from_config

log = logging.getLogger(__name__)

# reference values for the kinetic-pressure identity of the aluminum run
KT_300K_EV = 0.02585
VOLUME_PER_ATOM_A3 = 16.387
EV_PER_A3_IN_MPA = 160217.6634


@dataclass
class ExperimentResult:
    number: int
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    summary: dict = field(default_factory=dict)


def _weighting(cfg: RunConfig, diameter: float) -> WeightingFunction:
    return weighting_from_config(cfg["weighting"], 0.5 * diameter)


def _integrator(cfg: RunConfig, steps=None, keep_reports=True) -> IntegratorConfig:
    md = cfg["md"]
    return IntegratorConfig(
        dt=md["dt"],
        steps=md["steps"] if steps is None else steps,
        stride=md["stride"] if steps is None else max(1, steps),
        seed=md["seed"],
        skin=md["skin"],
        keep_reports=keep_reports,
    )


def kinetic_pressure_identity_mpa(kt_ev: float = KT_300K_EV, volume_per_atom: float = VOLUME_PER_ATOM_A3) -> float:
    """``k_B T / (V/N)`` converted from eV/A^3 to MPa."""
    return kt_ev / volume_per_atom * EV_PER_A3_IN_MPA


# ------------------------------------------------------------------ 1


def experiment1(cfg: RunConfig) -> ExperimentResult:
    """Isolated thermalized cube: virial pressure parts versus time."""
    model = model_from_config(cfg["potential"])
    ex, md = cfg["experiment"], cfg["md"]
    a, n = ex["lattice_constant"], ex["cells"]
    cube = build_fcc_lattice(n, n, n, a, periodic=(False, False, False))
    relaxed = minimize(cube, model, MinimizerConfig(ftol=max(cfg["minimize"]["ftol"], 1e-6),
                                                    maxiter=cfg["minimize"]["maxiter"]))
    state = initialize_velocities(relaxed.state, md["temperature"], md["seed"])
    # nominal crystal volume; the free cube has no box
    volume = state.n * a**3 / 4.0
    rows = []
    for snap in iter_nve(state, model, _integrator(cfg)):
        pk, pv, pt = virial_pressure(snap.state, snap.report, volume)
        rows.append([snap.time, pk, pv, pt, kinetic_temperature(snap.state)])
    arr = np.array(rows)
    late = arr[len(arr) // 2:]
    pk, pv, pt, temp = late[:, 1].mean(), late[:, 2].mean(), late[:, 3].mean(), late[:, 4].mean()
    n_atoms = state.n
    summary = {
        "atoms": n_atoms,
        "volume": volume,
        "mean_kinetic_pressure": pk,
        "mean_potential_pressure": pv,
        "mean_total_pressure": pt,
        "total_over_kinetic": abs(pt) / abs(pk),
        "mean_temperature": temp,
        # kinetic part against N k_B T / V with the instantaneous (3N-3) temperature
        "equipartition_ratio": pk / (n_atoms * temp / volume),
        "aluminum_kinetic_pressure_mpa": kinetic_pressure_identity_mpa(),
        "relaxation_converged": relaxed.converged,
    }
    header = ["time", "p_kinetic", "p_potential", "p_total", "temperature"]
    return ExperimentResult(1, {"pressure": (header, rows)}, summary)


# ------------------------------------------------------------------ 2


def plane_offsets(cfg: RunConfig) -> np.ndarray:
    ex = cfg["experiment"]
    return np.linspace(-ex["plane_offset_max"], ex["plane_offset_max"], ex["plane_steps"])


def experiment2(cfg: RunConfig) -> ExperimentResult:
    """Tsai plane swept across a (100) lattice plane of a heated periodic crystal."""
    model = model_from_config(cfg["potential"])
    ex, md = cfg["experiment"], cfg["md"]
    a, n = ex["lattice_constant"], ex["cells"]
    state = initialize_velocities(build_fcc_lattice(n, n, n, a), md["temperature"], md["seed"])
    if md["equilibration"] > 0:
        for snap in iter_nve(state, model, _integrator(cfg, steps=md["equilibration"], keep_reports=False)):
            pass
        state = snap.state
    L = state.cell.lengths
    x_lattice = (n // 2) * a
    spacing = 0.5 * a
    sp = plane_offsets(cfg)
    probes = [
        PlanarProbe.square([x_lattice + s * spacing, 0.5 * L[1], 0.5 * L[2]], [1.0, 0.0, 0.0], L[1]) for s in sp
    ]
    acc = TractionAccumulator(probes, model, slab_halfwidth=spacing, warn_step=0.25 * a)
    temps = []
    for snap in iter_nve(state, model, _integrator(cfg)):
        acc.add(snap)
        temps.append(kinetic_temperature(snap.state))
    res = acc.result()
    kin = np.array([r.kinetic[0] for r in res])
    pot = np.array([r.potential[0] for r in res])
    tot = kin + pot
    rows = [[float(s), k, p, t, r.crossings] for s, k, p, t, r in zip(sp, kin, pot, tot, res)]
    dk = kin - kin.mean()
    dp = pot - pot.mean()
    summary = {
        "mean_temperature": float(np.mean(temps)),
        "mean_total": float(tot.mean()),
        "total_variation": float((tot.max() - tot.min()) / abs(tot.mean())),
        "kinetic_variation": float((kin.max() - kin.min()) / np.abs(kin).max()),
        # uncancelled residual of the two parts relative to the kinetic swing
        "cancellation_residual": float(np.abs(dk + dp).max() / np.abs(dk).max()),
        "crossings_at_lattice_plane": int(res[len(res) // 2].crossings),
    }
    header = ["s_P", "sigma11_kinetic", "sigma11_potential", "sigma11_total", "crossings"]
    return ExperimentResult(2, {"tsai_sweep": (header, rows)}, summary)


# ------------------------------------------------------------------ 3


def uniaxial_crystal(cfg: RunConfig):
    ex = cfg["experiment"]
    a, n = ex["lattice_constant"], ex["cells"]
    c = CubicConstants(ex["c11"], ex["c12"], ex["c44"])
    lengths = np.array(uniaxial_cell_strain(ex["sigma"], engineering_moduli(c), n, a))
    s = build_fcc_lattice(n, n, n, a)
    f = lengths / s.cell.lengths
    return s.replace(positions=s.positions * f, cell=s.cell.scaled(f))


def experiment3(cfg: RunConfig, with_da: bool = True) -> ExperimentResult:
    """sigma_11 at the cell center against averaging-domain size for all estimators."""
    model = model_from_config(cfg["potential"])
    ex = cfg["experiment"]
    a, n = ex["lattice_constant"], ex["cells"]
    state = uniaxial_crystal(cfg)
    snap = Snapshot(0.0, state, evaluate(state, model))
    center = 0.5 * state.cell.lengths + ex["offset"]
    rows = []
    for w in ex["sizes"]:
        d = w * a
        wf = _weighting(cfg, d)
        h = hardy_stress(snap, wf, FieldGrid.single(center), model).total[0, 0, 0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            v = virial_stress(snap, center, 0.5 * d, model).total[0, 0, 0]
        t = tsai_traction_many(snap, [PlanarProbe.square(center, [1.0, 0.0, 0.0], d)], model)[0].total[0]
        da = da_stress(snap, wf, FieldGrid.single(center), model).total[0, 0, 0] if with_da else float("nan")
        rows.append([float(w), d / (n * a), float(h), float(v), float(t), float(da)])
    arr = np.array(rows)
    sigma = ex["sigma"]
    dev = arr[:, 4] / sigma - 1.0
    half = len(dev) // 2
    summary = {
        "hardy_max_error_d_ge_4a": float(np.abs(arr[arr[:, 0] >= 4, 2] / sigma - 1).max()),
        "virial_below_hardy_d_le_4a": bool(np.all(arr[arr[:, 0] <= 4, 3] < arr[arr[:, 0] <= 4, 2])),
        "tsai_deviation": dev.tolist(),
        "tsai_mean_abs_dev_small": float(np.abs(dev[:half]).mean()),
        "tsai_mean_abs_dev_large": float(np.abs(dev[half:]).mean()),
        "box_lengths_over_a": (state.cell.lengths / a).tolist(),
    }
    header = ["size_over_a", "s", "hardy", "virial", "tsai", "da"]
    return ExperimentResult(3, {"domain_size": (header, rows)}, summary)


# ------------------------------------------------------------------ 4


@dataclass
class Plate:
    snapshot: Snapshot
    center: np.ndarray
    radius: float
    half_width: float
    z: float
    constants: CubicConstants
    sigma: float
    a: float


def loaded_plate(cfg: RunConfig, model) -> Plate:
    """Plate with a hole displaced by the anisotropic elastic field (not re-relaxed)."""
    ex = cfg["experiment"]
    a, nc, nz = ex["lattice_constant"], ex["plate_cells"], ex["plate_thickness"]
    c = CubicConstants(ex["c11"], ex["c12"], ex["c44"])
    s = build_fcc_lattice(nc, nc, nz, a, periodic=(False, False, True))
    L = s.cell.lengths
    center = np.array([0.5 * L[0], 0.5 * L[1]])
    R = ex["hole_radius"] * a
    s = carve_plate_with_hole(s, center, R)
    field_ = kirsch_anisotropic(c, ex["sigma"], R, s.positions[:, :2] - center)
    x = np.array(s.positions)
    x[:, :2] += field_.displacement
    s = s.replace(positions=x)
    # outermost lattice planes sit at 0 and (nc - 1/2) a
    half_width = 0.5 * (nc - 0.5) * a
    return Plate(Snapshot(0.0, s, evaluate(s, model)), center, R, half_width, 0.5 * L[2], c, ex["sigma"], a)


def _plane_grid(plate: Plate, count: int, margin: float) -> np.ndarray:
    g = np.linspace(-(plate.half_width - margin), plate.half_width - margin, count)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([plate.center[0] + gx.ravel(), plate.center[1] + gy.ravel(), np.full(gx.size, plate.z)])


def _virial_map(snap, points, radius, model):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return virial_stress_many(snap, points, radius, model).total


def _tsai_map(snap, points, width, model):
    probes = []
    for p in points:
        probes += [PlanarProbe.square(p, [1.0, 0.0, 0.0], width), PlanarProbe.square(p, [0.0, 1.0, 0.0], width)]
    res = tsai_traction_many(snap, probes, model)
    t1 = np.array([r.total for r in res[0::2]])
    t2 = np.array([r.total for r in res[1::2]])
    out = np.zeros((len(points), 3, 3))
    out[:, :, 0] = t1
    out[:, :, 1] = t2
    return out


def _map_rows(points, center, est, ref):
    rows = []
    for p, s, r in zip(points, est, ref):
        rel = abs((s[0, 0] - r[0, 0]) / r[0, 0]) if r[0, 0] != 0 else float("nan")
        rows.append([p[0] - center[0], p[1] - center[1], s[0, 0], s[0, 1], s[1, 0], r[0, 0], r[0, 1], rel])
    return rows


MAP_HEADER = ["x1", "x2", "sigma11", "sigma12", "sigma21", "ref_sigma11", "ref_sigma12", "rel_error_11"]


def experiment4(cfg: RunConfig, with_da: bool = True) -> ExperimentResult:
    """Plate with a hole: estimator maps, x1=0 profiles and the reference field."""
    model = model_from_config(cfg["potential"])
    ex, gr = cfg["experiment"], cfg["grid"]
    plate = loaded_plate(cfg, model)
    snap = plate.snapshot
    d = ex["domain_fraction"] * ex["plate_cells"] * plate.a
    rw = 0.5 * d
    wf = _weighting(cfg, d)
    sig = plate.sigma
    tables = {}
    t0 = time.time()

    def ref_of(points):
        st = kirsch_anisotropic(plate.constants, sig, plate.radius, points[:, :2] - plate.center).stress
        out = np.zeros((len(points), 3, 3))
        out[:, :2, :2] = st
        return out

    # profile along x1 = 0 from the rim outward
    ys = np.linspace(plate.radius, plate.half_width, gr["line_points"])
    line = np.column_stack([np.full(ys.size, plate.center[0]), plate.center[1] + ys, np.full(ys.size, plate.z)])
    line_ref = ref_of(line)
    line_h = hardy_stress(snap, wf, FieldGrid(line), model).total
    line_t = _tsai_map(snap, line, d, model)
    line_v = _virial_map(snap, line, rw, model)
    line_rows = [
        [y, r[0, 0], hh[0, 0], tt[0, 0], vv[0, 0]] for y, r, hh, tt, vv in zip(ys, line_ref, line_h, line_t, line_v)
    ]
    tables["profile_x1_0"] = (["x2", "reference", "hardy", "tsai", "virial"], line_rows)

    # full maps
    pts = _plane_grid(plate, gr["points"], rw)
    ref = ref_of(pts)
    maps = {
        "hardy": hardy_stress(snap, wf, FieldGrid(pts), model).total,
        "tsai": _tsai_map(snap, pts, d, model),
        "virial": _virial_map(snap, pts, rw, model),
    }
    for name, est in maps.items():
        tables[f"map_{name}"] = (MAP_HEADER, _map_rows(pts, plate.center, est, ref))
    tables["map_reference"] = (MAP_HEADER, _map_rows(pts, plate.center, ref, ref))

    summary = {
        "atoms": snap.state.n,
        "averaging_diameter": d,
        "concentration": kirsch_concentration(plate.constants),
    }
    # Hardy along x1=0 where the sphere stays two radii from every free surface
    far = (ys >= plate.radius + 2 * rw) & (ys <= plate.half_width - 2 * rw)
    rel = np.abs(line_h[far, 0, 0] / line_ref[far, 0, 0] - 1.0)
    summary["hardy_profile_points"] = int(far.sum())
    summary["hardy_profile_max_rel_error"] = float(rel.max()) if rel.size else float("nan")

    tsai = maps["tsai"]
    s12, s21 = tsai[:, 0, 1], tsai[:, 1, 0]
    peak = max(np.abs(s12).max(), np.abs(s21).max())
    summary["tsai_shear_mean_abs_diff"] = float(np.abs(s12 - s21).mean())
    summary["tsai_shear_peak"] = float(peak)
    summary["tsai_shear_asymmetry"] = float(np.abs(s12 - s21).mean() / peak)

    if with_da:
        dpts = _plane_grid(plate, gr["da_points"], rw)
        da = da_stress(snap, wf, FieldGrid(dpts), model).total
        hd = hardy_stress(snap, wf, FieldGrid(dpts), model).total
        tables["map_da"] = (MAP_HEADER, _map_rows(dpts, plate.center, da, ref_of(dpts)))
        line_da = da_stress(snap, wf, FieldGrid(line), model).total
        tables["profile_x1_0_da"] = (["x2", "reference", "da"], [[y, r[0, 0], q[0, 0]] for y, r, q in zip(ys, line_ref, line_da)])
        summary["da_peak_on_da_grid"] = float(np.abs(da[:, 0, 0]).max())
        summary["hardy_peak_on_da_grid"] = float(np.abs(hd[:, 0, 0]).max())
        summary["da_peak_on_profile"] = float(np.abs(line_da[:, 0, 0]).max())
        summary["hardy_peak_on_profile"] = float(np.abs(line_h[:, 0, 0]).max())
    summary["seconds"] = time.time() - t0
    return ExperimentResult(4, tables, summary)


DRIVERS = {1: experiment1, 2: experiment2, 3: experiment3, 4: experiment4}


def run_experiment(number: int, cfg: RunConfig, outdir) -> ExperimentResult:
    if number not in DRIVERS:
        raise ValueError(f"unknown experiment {number}; expected one of {sorted(DRIVERS)}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.echo(out)
    res = DRIVERS[number](cfg)
    for name, (header, rows) in res.tables.items():
        write_csv(out / f"experiment{number}_{name}.csv", header, rows)
    (out / f"experiment{number}_summary.json").write_text(json.dumps(res.summary, indent=2, default=_jsonable) + "\n")
    return res


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))
