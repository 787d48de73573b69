"""Position estimators: exact CLS and the unconstrained LS baseline."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import RangeDiffSet, SensorArray, build_system
from .numerics import SingularMatrixError, minnorm_solve, solve_linear, sym_eig
from .solver import ClsSolution, SolverOptions, solve_cls

__all__ = ["Method", "Estimate", "estimate_cls", "estimate_uls", "estimate"]


class Method(str, enum.Enum):
    CLS = "CLS"
    ULS = "ULS"


@dataclass(frozen=True)
class Estimate:
    x_hat: np.ndarray
    method: Method
    diagnostics: dict = field(default_factory=dict)
    solution: Optional[ClsSolution] = None


def _gram_condition(gram) -> float:
    w = np.abs(sym_eig(gram).eigenvalues)
    return float(w.max() / w.min()) if w.min() > 0 else float("inf")


def _common_diagnostics(array, meas, system) -> dict:
    diag = {"condition": _gram_condition(system.gram)}
    bad = meas.infeasible_indices(array) if isinstance(meas, RangeDiffSet) else []
    if bad:
        diag["infeasible_measurements"] = bad
    if array.coincident_sensors:
        diag["coincident_sensors"] = array.coincident_sensors
    return diag


def estimate_cls(array: SensorArray, meas: RangeDiffSet, opts: Optional[SolverOptions] = None) -> Estimate:
    """Source position from the global CLS solution, in the caller's frame."""
    system = build_system(array, meas)
    sol = solve_cls(system, opts)
    diag = _common_diagnostics(array, meas, system)
    diag.update(
        branch=sol.branch.value,
        lam=sol.lambda_opt,
        objective=sol.objective,
        classification=sol.classification.value,
    )
    return Estimate(sol.x_hat, Method.CLS, diag, sol)


def estimate_uls(array: SensorArray, meas: RangeDiffSet) -> Estimate:
    """Unconstrained LS baseline ``y = (A^T A)^{-1} A^T b``, constraints ignored.

    A singular ``A^T A`` falls back to the minimum-norm solution and sets
    ``diagnostics["minnorm_fallback"]``. A negative first entry is kept as is
    and only noted.
    """
    system = build_system(array, meas)
    diag = _common_diagnostics(array, meas, system)
    try:
        y = solve_linear(system.gram, system.atb)
    except SingularMatrixError:
        y = minnorm_solve(system.gram, system.atb)
        diag["minnorm_fallback"] = True
    if y[0] < 0:
        diag["negative_range"] = True
    diag["y"] = y
    return Estimate(y[1:] + array.reference, Method.ULS, diag)


def estimate(method, array: SensorArray, meas: RangeDiffSet, opts: Optional[SolverOptions] = None) -> Estimate:
    method = Method(method)
    if method is Method.CLS:
        return estimate_cls(array, meas, opts)
    return estimate_uls(array, meas)
