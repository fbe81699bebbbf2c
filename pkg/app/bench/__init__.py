"""YCSB-style benchmark: key choosers, load/run phases and sweeps."""
from .zipfian import DEFAULT_THETA, UniformGenerator, ZipfianGenerator, zeta, zipf_pmf
from .expected import ExpectedValues, ReadSnapshot
from .workload import (
    AtomicMetrics,
    Endpoints,
    key_name,
    load_phase,
    plan_sessions,
    read_statement,
    run_phase,
    update_statement,
)
from .sweep import CSV_COLUMNS, average_samples, cell_kind, read_csv, sweep, write_csv

__all__ = [
    "DEFAULT_THETA",
    "UniformGenerator",
    "ZipfianGenerator",
    "zeta",
    "zipf_pmf",
    "ExpectedValues",
    "ReadSnapshot",
    "AtomicMetrics",
    "Endpoints",
    "key_name",
    "load_phase",
    "plan_sessions",
    "read_statement",
    "run_phase",
    "update_statement",
    "CSV_COLUMNS",
    "average_samples",
    "cell_kind",
    "read_csv",
    "sweep",
    "write_csv",
]
