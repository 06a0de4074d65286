"""Continuum stress fields from atomistic data.

Hardy, virial, Tsai and doubly-averaged (DA) estimators, plus the small MD and
lattice-statics engine needed to generate the states they are applied to.
"""

from .core import (
    GeometryError,
    NeighborList,
    ParticleState,
    SimulationCell,
    Snapshot,
    Trajectory,
    build_fcc_lattice,
    build_neighbor_list,
    carve_plate_with_hole,
    minimum_image_displacement,
)
from ._backend import BACKEND
from .dynamics import (
    IntegratorConfig,
    MinimizerConfig,
    NumericalFailure,
    initialize_velocities,
    minimize,
    run_nve,
)
from .elasticity import CubicConstants, engineering_moduli, kirsch_anisotropic
from .estimators import (
    FieldGrid,
    PlanarProbe,
    da_stress,
    hardy_stress,
    tsai_traction,
    virial_stress,
)
from .potentials import EAM, LennardJones, PairTable, evaluate, multibody_eval
from .runconfig import load_config
from .weighting import WeightingFunction, bond_function

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EAM",
    "CubicConstants",
    "FieldGrid",
    "GeometryError",
    "IntegratorConfig",
    "LennardJones",
    "MinimizerConfig",
    "NeighborList",
    "NumericalFailure",
    "PairTable",
    "ParticleState",
    "PlanarProbe",
    "SimulationCell",
    "Snapshot",
    "Trajectory",
    "WeightingFunction",
    "bond_function",
    "build_fcc_lattice",
    "build_neighbor_list",
    "carve_plate_with_hole",
    "da_stress",
    "engineering_moduli",
    "evaluate",
    "hardy_stress",
    "initialize_velocities",
    "kirsch_anisotropic",
    "load_config",
    "minimize",
    "minimum_image_displacement",
    "multibody_eval",
    "run_nve",
    "tsai_traction",
    "virial_stress",
]
