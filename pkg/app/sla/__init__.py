"""Performance surface fitting and SLA offer tables."""
from .surface import BASIS_SIZE, design_matrix, design_row, fit, fit_from_samples, predict, samples_for
from .report import (
    load_models,
    models_from_dict,
    models_to_dict,
    render_csv,
    render_text,
    save_models,
    sla_table,
)

__all__ = [
    "BASIS_SIZE",
    "design_matrix",
    "design_row",
    "fit",
    "fit_from_samples",
    "predict",
    "samples_for",
    "load_models",
    "models_from_dict",
    "models_to_dict",
    "render_csv",
    "render_text",
    "save_models",
    "sla_table",
]
