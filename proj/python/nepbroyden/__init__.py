"""Broyden solvers for nonlinear eigenvalue problems."""

from ._core import CsvError, UsageError, method_ids, problem_ids, read_csv, run

__all__ = ["CsvError", "UsageError", "method_ids", "problem_ids", "read_csv", "run"]
