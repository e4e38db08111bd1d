"""Hydrothermal expansion model: data, validation and problem builders."""

from .builder import (
    CompactTwoStage, FirstStageLayout, ModelError, build_de, compile_compact,
    first_stage, format_statistics, model_statistics, reassemble_de, split_de_solution,
)
from .instances import d1, d1_spec, d1_system, random_case, random_instance, storage_tight_instance
from .system import (
    SCHEMA_VERSION, Hydro, Line, Renewable, SystemData, Thermal,
    load_system, save_system, system_from_dict, system_to_dict, validate,
)

__all__ = [
    "CompactTwoStage", "FirstStageLayout", "Hydro", "Line", "ModelError", "Renewable",
    "SCHEMA_VERSION", "SystemData", "Thermal", "build_de", "compile_compact", "d1",
    "d1_spec", "d1_system", "first_stage", "format_statistics", "load_system",
    "model_statistics", "random_case", "random_instance", "reassemble_de", "save_system",
    "split_de_solution", "storage_tight_instance", "system_from_dict", "system_to_dict", "validate",
]
