"""Executable models of transactional memory lower-bound constructions."""
from .core import (ABORT, COMMIT, OK, Execution, History, TMError, TOp, TRY_COMMIT,
                   parse_history, parse_trace, format_history, format_trace, t_read, t_write)
from .serializability import check_strict_serializability
from .tms import TMS, Machine, make_tm
from .harness import Runner, run_schedule

__all__ = [
    "ABORT", "COMMIT", "OK", "Execution", "History", "TMError", "TOp", "TRY_COMMIT",
    "parse_history", "parse_trace", "format_history", "format_trace", "t_read", "t_write",
    "check_strict_serializability", "TMS", "Machine", "make_tm", "Runner", "run_schedule",
]
