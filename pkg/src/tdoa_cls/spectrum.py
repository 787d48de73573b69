"""Multiplier intervals of the pencil ``A^T A + lam * D``.

``phi(lam) = min_eigenvalue(A^T A + lam D)`` is a pointwise minimum of affine
functions of ``lam`` and therefore concave, so ``{phi >= 0}`` is an interval
``[lam_l, lam_u]`` and each endpoint can be found by sign bisection from a
point where the pencil is positive definite.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import RANK_RTOL, LinearizedSystem
from .numerics import min_eigenvalue, sym_eig

__all__ = [
    "DegenerateSpectrum",
    "SpectrumInfo",
    "pd_interval",
    "null_direction",
    "endpoint_crosscheck",
    "phi",
]

_log = logging.getLogger(__name__)

TOL_ABS = 1e-10
TOL_REL = 1e-12


class DegenerateSpectrum(RuntimeError):
    """No multiplier makes ``A^T A + lam D`` positive definite."""


@dataclass(frozen=True)
class SpectrumInfo:
    """Positive-definite interval ``(lambda_l, lambda_u)`` and its endpoint null spaces.

    ``null_l`` / ``null_u`` hold orthonormal null directions as columns, so
    ``null_l.shape == (n + 1, mult_l)``. ``null_tol`` is the eigenvalue
    magnitude below which a direction was counted as null.
    """

    lambda_l: float
    lambda_u: float
    null_l: np.ndarray
    null_u: np.ndarray
    mult_l: int
    mult_u: int
    null_tol: float = 0.0

    @property
    def width(self) -> float:
        return self.lambda_u - self.lambda_l

    @property
    def z_minus(self) -> np.ndarray:
        return self.null_l[:, 0]

    @property
    def z_plus(self) -> np.ndarray:
        return self.null_u[:, 0]


def phi(system: LinearizedSystem, lam: float) -> float:
    """Smallest eigenvalue of ``A^T A + lam D``."""
    return min_eigenvalue(system.pencil(lam))


def _scale(system: LinearizedSystem) -> float:
    return max(1.0, float(np.max(np.abs(system.gram))))


def _bisect(system, inside: float, outside: float, tol_abs: float, tol_rel: float) -> tuple[float, float]:
    # phi(inside) > 0 and phi(outside) <= 0; returns (estimate, final bracket width)
    width0 = abs(outside - inside)
    stop = max(tol_abs, tol_rel * width0)
    while abs(outside - inside) > stop:
        mid = 0.5 * (inside + outside)
        if mid == inside or mid == outside:
            break
        if phi(system, mid) > 0.0:
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside), abs(outside - inside)


def null_direction(system: LinearizedSystem, lambda_endpoint: float, tol: float | None = None) -> tuple[np.ndarray, int]:
    """Orthonormal basis (columns) of the near-null eigenspace at ``lambda_endpoint``.

    ``tol`` is an absolute eigenvalue threshold; by default
    ``RANK_RTOL * max|eigenvalue|``.

    Raises
    ------
    ValueError
        If no eigenvalue is within ``tol`` of zero.
    """
    eig = sym_eig(system.pencil(lambda_endpoint))
    w = eig.eigenvalues
    if tol is None:
        tol = RANK_RTOL * float(np.max(np.abs(w)))
    mask = np.abs(w) <= tol
    if not mask.any():
        raise ValueError(
            f"pencil is not singular at lambda={lambda_endpoint!r} (smallest |eigenvalue| {np.min(np.abs(w)):.3g} > {tol:.3g})"
        )
    basis = eig.eigenvectors[:, mask]
    return basis, int(mask.sum())


def _find_pd_point(system, lo: float, hi: float, tol: float) -> float:
    if phi(system, 0.0) > tol:
        return 0.0
    for lam in np.linspace(lo, hi, 65)[1:-1]:
        if phi(system, lam) > tol:
            return float(lam)
    raise DegenerateSpectrum(
        "A^T A + lambda D is not positive definite anywhere in the bracket; the sensor geometry "
        "or measurements likely violate the boundedness assumption"
    )


def endpoint_crosscheck(system: LinearizedSystem, spec: "SpectrumInfo", rtol: float = 1e-6) -> bool:
    """Check the endpoints against the real eigenvalues of ``-D A^T A``.

    ``det(A^T A + lam D) = 0`` iff ``lam`` is an eigenvalue of ``-D A^T A``
    (``D`` is an involution), which gives a route independent of bisection.
    """
    ev = np.linalg.eigvals(-system.signature @ system.gram)
    real = ev[np.abs(ev.imag) <= 1e-9 * max(1.0, np.max(np.abs(ev)))].real
    scale = max(1.0, abs(spec.lambda_l), abs(spec.lambda_u))
    ok_l = np.any(np.abs(real - spec.lambda_l) <= rtol * scale)
    ok_u = np.any(np.abs(real - spec.lambda_u) <= rtol * scale)
    return bool(ok_l and ok_u)


def pd_interval(
    system: LinearizedSystem,
    tol_abs: float = TOL_ABS,
    tol_rel: float = TOL_REL,
    rank_rtol: float = RANK_RTOL,
    debug: bool = False,
) -> SpectrumInfo:
    """Endpoints of ``I_1 = {lam : A^T A + lam D > 0}`` and their null spaces.

    Brackets: testing ``e_1`` gives ``lam_l >= -(A^T A)_{11}``; testing vectors
    with zero first entry gives ``lam_u <= lambda_min`` of the trailing block.
    Both bounds are checked at runtime before bisecting.

    Raises
    ------
    DegenerateSpectrum
        If no multiplier in the bracket makes the pencil positive definite.
    """
    gram = system.gram
    scale = _scale(system)
    eps = 64 * np.finfo(float).eps * scale
    lo_bound = -float(gram[0, 0])
    hi_bound = min_eigenvalue(gram[1:, 1:])
    for bound in (lo_bound, hi_bound):
        val = phi(system, bound)
        if val > eps:
            raise AssertionError(f"bracket bound {bound!r} is not outside the PD interval (phi={val!r})")
    if not hi_bound > lo_bound:
        raise DegenerateSpectrum("empty multiplier bracket")
    start = _find_pd_point(system, lo_bound, hi_bound, eps)

    # endpoints that coincide with the derived bounds are taken exactly
    ends, widths = [], []
    for bound in (lo_bound, hi_bound):
        if abs(phi(system, bound)) <= eps:
            ends.append(bound)
            widths.append(0.0)
        else:
            lam, w = _bisect(system, start, bound, tol_abs, tol_rel)
            ends.append(lam)
            widths.append(w)
    lam_l, lam_u = ends

    bases = []
    for lam, w in zip(ends, widths):
        eig = sym_eig(system.pencil(lam))
        tol = max(rank_rtol * float(np.max(np.abs(eig.eigenvalues))), 4.0 * w, eps)
        mask = np.abs(eig.eigenvalues) <= tol
        if not mask.any():
            mask = np.zeros_like(mask)
            mask[np.argmin(np.abs(eig.eigenvalues))] = True
        bases.append((eig.eigenvectors[:, mask], int(mask.sum()), tol))

    (null_l, mult_l, tol_l), (null_u, mult_u, tol_u) = bases
    info = SpectrumInfo(float(lam_l), float(lam_u), null_l, null_u, mult_l, mult_u, max(tol_l, tol_u))
    if mult_l != 1:
        _log.warning("left singular point has null multiplicity %d (expected 1)", mult_l)
    if debug and not endpoint_crosscheck(system, info):
        raise AssertionError("bisection endpoints disagree with the eigenvalues of -D A^T A")
    return info
