"""Single-electron excitation of few-level samples with and without recoil."""

from ._ekick import (
    ConvergenceError,
    __version__,
    boson_nonrecoil,
    find_maximum,
    nonrecoil,
    pointlike,
    poisson,
    recoil,
    run_cli,
    symmetries,
)

__all__ = [
    "ConvergenceError",
    "__version__",
    "boson_nonrecoil",
    "find_maximum",
    "nonrecoil",
    "pointlike",
    "poisson",
    "recoil",
    "run_cli",
    "symmetries",
]
