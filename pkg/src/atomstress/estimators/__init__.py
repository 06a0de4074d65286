"""Continuum-field estimators computed from particle data."""

from ._common import FieldGrid, StressField
from .spatial import (
    a_hat,
    continuum_fields,
    da_stress,
    global_virial,
    hardy_kinetic_bruteforce,
    hardy_stress,
    hardy_stress_1d,
    stress_star_counterexample,
    virial_pressure,
    virial_stress,
    virial_stress_many,
)
from .tsai import (
    PlanarProbe,
    TractionAccumulator,
    TractionSample,
    assemble_tensor_from_tractions,
    crossing_velocity,
    tsai_traction,
    tsai_traction_many,
)

__all__ = [
    "FieldGrid",
    "PlanarProbe",
    "StressField",
    "TractionAccumulator",
    "TractionSample",
    "a_hat",
    "assemble_tensor_from_tractions",
    "continuum_fields",
    "crossing_velocity",
    "da_stress",
    "global_virial",
    "hardy_kinetic_bruteforce",
    "hardy_stress",
    "hardy_stress_1d",
    "stress_star_counterexample",
    "tsai_traction",
    "tsai_traction_many",
    "virial_pressure",
    "virial_stress",
    "virial_stress_many",
]
