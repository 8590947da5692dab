"""Blind-redaction attribution: how predictable is each column once another is removed?"""

from .errors import BlindRedactError, ConfigError, DataError
from .evaluate import BinningConfig, EvalConfig, ScoreTriple, cross_validate
from .redact import RedactionMatrix, RedactionPlan, plan_default_medicare, run_cell, run_matrix, run_plan
from .table import Column, Table, read_table, write_table

__version__ = "0.1.0"

__all__ = [
    "BinningConfig",
    "BlindRedactError",
    "Column",
    "ConfigError",
    "DataError",
    "EvalConfig",
    "RedactionMatrix",
    "RedactionPlan",
    "ScoreTriple",
    "Table",
    "cross_validate",
    "plan_default_medicare",
    "read_table",
    "run_cell",
    "run_matrix",
    "run_plan",
    "write_table",
]
