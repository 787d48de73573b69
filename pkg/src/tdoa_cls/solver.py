"""Global solver for the constrained least squares localization problem.

minimise ||A y - b||^2  subject to  y^T D y = 0,  y_1 >= 0,  D = diag(1, -I_n).

A feasible ``y`` with ``y_1 > 0`` is a global minimiser exactly when it is a
stationary point ``(A^T A + lam D) y = A^T b`` for some multiplier
``lam <= lambda_u``. The solver therefore hunts for such multipliers:

1. the positive-definite interval ``(lambda_l, lambda_u)``, on which
   ``h(lam) = g(y(lam))`` is strictly decreasing, so there is at most one
   root and bisection finds it;
2. the singular endpoints, when ``h`` keeps one sign on the whole interval;
   candidates are ``y_* + alpha z`` with ``z`` a null direction and ``alpha``
   a root of a scalar quadratic;
3. the indefinite interval ``(-inf, lambda_l)``, scanned on an expanding grid.

If none of these yields a candidate with positive first entry, the origin is
the answer.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import RANK_RTOL, LinearizedSystem
from .numerics import SingularMatrixError, minnorm_solve, solve_linear
from .spectrum import DegenerateSpectrum, SpectrumInfo, pd_interval

__all__ = [
    "Branch",
    "Classification",
    "SolverOptions",
    "KktCertificate",
    "GtrsResult",
    "ClsSolution",
    "NoRealCandidate",
    "SingularPencil",
    "DegenerateSpectrum",
    "y_of_lambda",
    "h_of_lambda",
    "limit_point",
    "gtrs_solve",
    "endpoint_candidates",
    "idi_roots",
    "near_endpoint_roots",
    "solve_cls",
    "verify_kkt",
    "classify_uniqueness",
]

_log = logging.getLogger(__name__)


class Branch(str, enum.Enum):
    COLLINEAR_B0 = "collinear_b0"
    INTERIOR_ROOT = "interior_root"
    LEFT_ENDPOINT = "left_endpoint"
    RIGHT_ENDPOINT = "right_endpoint"
    IDI_ROOT = "idi_root"
    ORIGIN = "origin"


class Classification(str, enum.Enum):
    UNIQUE = "unique"
    TWO_POINT = "two_point"
    CONTINUUM = "continuum"
    ORIGIN_ONLY = "origin_only"


class SingularPencil(SingularMatrixError):
    """``A^T A + lam D`` is numerically singular at the requested multiplier."""


class NoRealCandidate(ArithmeticError):
    """The endpoint quadratic has no real root."""


@dataclass(frozen=True)
class SolverOptions:
    """Numerical knobs. Defaults are the ones the test-suite is pinned to."""

    # positive-definite interval bisection
    tol_abs: float = 1e-10
    tol_rel: float = 1e-12
    rank_rtol: float = RANK_RTOL
    # h root finding: |h| <= tol_h * (1 + ||b||)
    tol_h: float = 1e-12
    width_floor: float = 1e-14
    newton_steps: int = 2
    endpoint_eps: float = 1e-6
    # strict positivity of y_1: y_1 > tol_sign * (1 + ||y||)
    tol_sign: float = 1e-9
    # indefinite-interval scan
    idi_delta: float = 1e-6
    idi_max_expansions: int = 60
    idi_subdivisions: int = 4
    # certificate
    tol_stationarity: float = 1e-8
    tol_feasibility: float = 1e-8
    tol_lambda: float = 1e-8
    dedup: float = 1e-8
    # ||b|| <= tol_b * (1 + max ||a_i||^2) counts as b = 0
    tol_b: float = 1e-12
    debug: bool = False


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class KktCertificate:
    """Residuals witnessing global optimality of a nonzero ``y``.

    ``valid`` requires stationarity, feasibility, ``y_1 >= -tol`` and a
    multiplier inside ``(-inf, lambda_u]``.
    """

    stationarity_residual: float
    feasibility_residual: float
    sign_ok: bool
    lam: float
    lambda_in_I: bool
    stationarity_tol: float
    feasibility_tol: float

    @property
    def valid(self) -> bool:
        return (
            self.stationarity_residual <= self.stationarity_tol
            and self.feasibility_residual <= self.feasibility_tol
            and self.sign_ok
            and self.lambda_in_I
        )

    def as_dict(self) -> dict:
        return {
            "stationarity": self.stationarity_residual,
            "feasibility": self.feasibility_residual,
            "sign_ok": self.sign_ok,
            "lambda_in_I": self.lambda_in_I,
            "valid": self.valid,
        }


@dataclass(frozen=True)
class GtrsResult:
    """Outcome of the search over the closed positive-definite interval.

    For ``INTERIOR_ROOT`` ``y`` is ``y(lam)``; for the endpoint branches ``y``
    is the limit point ``y_*`` and ``candidates`` holds ``(alpha, y_* + alpha z)``
    pairs, ``alpha`` descending. ``h_left``/``h_right`` are the probe values
    just inside the interval.
    """

    branch: Branch
    lam: float
    y: np.ndarray
    candidates: list
    null_basis: Optional[np.ndarray] = None
    h_left: float = math.nan
    h_right: float = math.nan


@dataclass(frozen=True)
class ClsSolution:
    y_opt: np.ndarray
    x_hat: np.ndarray
    lambda_opt: float
    objective: float
    classification: Classification
    certificate: KktCertificate
    branch: Branch
    spectrum: Optional[SpectrumInfo] = None
    gtrs: Optional[GtrsResult] = None
    second_solution: Optional[np.ndarray] = None
    continuum_base: Optional[np.ndarray] = None
    continuum_basis: Optional[np.ndarray] = None
    discarded: tuple = ()
    idi: tuple = ()


# ---------------------------------------------------------------------------
# stationary path


def y_of_lambda(system: LinearizedSystem, lam: float) -> np.ndarray:
    """Solution of ``(A^T A + lam D) y = A^T b``.

    Raises
    ------
    SingularPencil
        If the pencil is numerically singular at ``lam``.
    """
    try:
        return solve_linear(system.pencil(lam), system.atb)
    except SingularMatrixError as exc:
        raise SingularPencil(f"A^T A + lambda D is singular at lambda={lam!r}: {exc}") from None


def h_of_lambda(system: LinearizedSystem, lam: float) -> float:
    """``g(y(lam))``."""
    return system.g(y_of_lambda(system, lam))


def limit_point(system: LinearizedSystem, lam: float, basis: np.ndarray, null_tol: float | None = None) -> np.ndarray:
    """``lim y(t)`` as ``t`` approaches a singular endpoint ``lam`` (hard case).

    The limit solves the singular system and is D-orthogonal to the null
    space: from ``(lam - t) z^T D y(t) = z^T A^T b = 0`` for every null vector
    ``z``. Start from the rank-truncated solve and shift along the null basis
    to enforce ``Z^T D y = 0``.
    """
    pencil = system.pencil(lam)
    scale = float(np.max(np.abs(pencil)))
    rtol = RANK_RTOL if null_tol is None or scale == 0.0 else max(RANK_RTOL, 1.5 * null_tol / scale)
    y = minnorm_solve(pencil, system.atb, rtol)
    basis = np.atleast_2d(np.asarray(basis, dtype=float).T).T
    dz = system.signature_diag[:, None] * basis
    k = basis.T @ dz
    try:
        beta = np.linalg.solve(k, -(dz.T @ y))
    except np.linalg.LinAlgError:
        return y
    return y + basis @ beta


# ---------------------------------------------------------------------------
# scalar root finding on h


def _tol_h(system: LinearizedSystem, opts: SolverOptions) -> float:
    return opts.tol_h * (1.0 + float(np.linalg.norm(system.b_vector)))


def _bisect_h(system, lo: float, hi: float, h_lo: float, h_hi: float, tol_h: float, floor: float) -> float:
    # h(lo) and h(hi) straddle zero; works for either orientation
    if h_lo == 0.0:
        return lo
    if h_hi == 0.0:
        return hi
    while hi - lo > floor:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        h_mid = h_of_lambda(system, mid)
        if abs(h_mid) <= tol_h:
            return mid
        if (h_mid > 0.0) == (h_lo > 0.0):
            lo, h_lo = mid, h_mid
        else:
            hi, h_hi = mid, h_mid
    return lo if abs(h_lo) < abs(h_hi) else hi


def _newton_polish(system, lam: float, lo: float, hi: float, steps: int) -> float:
    try:
        h = h_of_lambda(system, lam)
    except SingularPencil:
        return lam
    for _ in range(steps):
        if h == 0.0:
            break
        step = 1e-6 * min(lam - lo, hi - lam, max(1.0, abs(lam)))
        if step <= 0.0:
            break
        try:
            deriv = (h_of_lambda(system, lam + step) - h_of_lambda(system, lam - step)) / (2.0 * step)
        except SingularPencil:
            break
        if deriv == 0.0 or not math.isfinite(deriv):
            break
        cand = lam - h / deriv
        if not lo < cand < hi:
            break
        try:
            h_new = h_of_lambda(system, cand)
        except SingularPencil:
            break
        if abs(h_new) >= abs(h):
            break
        lam, h = cand, h_new
    return lam


def _root(system, lo, hi, h_lo, h_hi, opts) -> float:
    tol_h = _tol_h(system, opts)
    floor = opts.width_floor * (hi - lo)
    lam = _bisect_h(system, lo, hi, h_lo, h_hi, tol_h, floor)
    return _newton_polish(system, lam, lo, hi, opts.newton_steps)


# ---------------------------------------------------------------------------
# endpoint handling


def _quadratic_roots(a: float, half_b: float, c: float, scale: float) -> list[float]:
    # roots of a t^2 + 2 half_b t + c = 0, cancellation-free
    if abs(a) <= 1e-14 * scale:
        if half_b == 0.0:
            raise NoRealCandidate("degenerate endpoint quadratic")
        return [-c / (2.0 * half_b)]
    disc = half_b * half_b - a * c
    if disc < 0.0:
        if disc >= -1e-12 * max(half_b * half_b, abs(a * c), 1e-300):
            disc = 0.0
        else:
            raise NoRealCandidate(f"endpoint quadratic has complex roots (discriminant {disc:.3g})")
    sq = math.sqrt(disc)
    q = -(half_b + math.copysign(sq, half_b)) if half_b != 0.0 else sq
    if q == 0.0:
        return [0.0, 0.0]
    r1, r2 = q / a, c / q
    return sorted([r1, r2], reverse=True)


def endpoint_candidates(system: LinearizedSystem, lambda_endpoint: float, y_star, z, tol: float = 0.0) -> list[tuple[float, np.ndarray]]:
    """Feasible completions ``y_* + alpha z`` of the limit point at a singular endpoint.

    ``alpha`` solves ``g(z) alpha^2 + 2 y_*^T D z alpha + g(y_*) = 0``.
    Returns ``(alpha, y)`` pairs sorted by ``alpha`` descending; a double root
    is returned twice so callers can see it.

    Raises
    ------
    NoRealCandidate
        If the quadratic has complex roots.
    """
    y_star = np.asarray(y_star, dtype=float)
    z = np.asarray(z, dtype=float)
    z = z / np.linalg.norm(z)
    dz = system.signature_diag * z
    a = float(z @ dz)
    half_b = float(y_star @ dz)
    c = system.g(y_star)
    roots = _quadratic_roots(a, half_b, c, 1.0)
    return [(r, y_star + r * z) for r in roots]


def _dedup(ys: list[np.ndarray], rtol: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for y in ys:
        if not any(np.max(np.abs(y - u)) <= rtol * (1.0 + np.linalg.norm(u)) for u in out):
            out.append(y)
    return out


def _approach(system, end: float, start: float, h_start: float, want_positive: bool, steps: int = 12):
    # h has the wrong sign at the probe; walk geometrically towards the
    # endpoint in case the root hides closer to it than the probe offset
    gap = start - end
    prev, h_prev = start, h_start
    for k in range(1, steps + 1):
        lam = end + gap * 10.0**-k
        if lam == end:
            break
        try:
            h = h_of_lambda(system, lam)
        except SingularPencil:
            break
        if (h >= 0.0) == want_positive:
            return lam, h, prev, h_prev
        prev, h_prev = lam, h
    return None


def gtrs_solve(system: LinearizedSystem, spectrum: SpectrumInfo, opts: SolverOptions = DEFAULT_OPTIONS) -> GtrsResult:
    """Locate the multiplier of the sign-free problem on ``[lambda_l, lambda_u]``.

    Probes ``h`` just inside both ends. A sign change means an interior root
    (found by bisection plus Newton polish). Constant positive sign pushes the
    multiplier to ``lambda_u``, constant negative sign to ``lambda_l``; those
    branches return the limit point and its quadratic completions.
    """
    lam_l, lam_u = spectrum.lambda_l, spectrum.lambda_u
    eps = opts.endpoint_eps * (lam_u - lam_l)
    lo, hi = lam_l + eps, lam_u - eps
    h_lo, h_hi = h_of_lambda(system, lo), h_of_lambda(system, hi)

    if h_lo >= 0.0 >= h_hi:
        lam = _root(system, lo, hi, h_lo, h_hi, opts)
        y = y_of_lambda(system, lam)
        return GtrsResult(Branch.INTERIOR_ROOT, lam, y, [(0.0, y)], None, h_lo, h_hi)

    if h_lo > 0.0 and h_hi > 0.0:
        branch, lam, basis = Branch.RIGHT_ENDPOINT, lam_u, spectrum.null_u
    elif h_lo < 0.0 and h_hi < 0.0:
        branch, lam, basis = Branch.LEFT_ENDPOINT, lam_l, spectrum.null_l
    else:
        raise DegenerateSpectrum(f"h increases across the PD interval (h_l={h_lo:.3g}, h_u={h_hi:.3g})")

    y_star = limit_point(system, lam, basis, spectrum.null_tol)
    cands: list = []
    for j in range(basis.shape[1]):
        try:
            cands = endpoint_candidates(system, lam, y_star, basis[:, j])
        except NoRealCandidate:
            continue
        break
    return GtrsResult(branch, lam, y_star, cands, basis, h_lo, h_hi)


def near_endpoint_roots(system: LinearizedSystem, spectrum: SpectrumInfo, gtrs: GtrsResult, opts: SolverOptions = DEFAULT_OPTIONS) -> list[tuple[float, np.ndarray]]:
    """Root of ``h`` between an endpoint and the probe next to it.

    When ``A^T b`` is almost, but not exactly, orthogonal to the endpoint
    null direction, ``h`` has a pole there with a tiny residue and changes
    sign closer to the endpoint than the probe offset. The endpoint
    candidates are then only approximately stationary; this walks the probe
    towards the endpoint and bisects the sign change if there is one.
    """
    lam_l, lam_u = spectrum.lambda_l, spectrum.lambda_u
    eps = opts.endpoint_eps * (lam_u - lam_l)
    if gtrs.branch is Branch.LEFT_ENDPOINT:
        hit = _approach(system, lam_l, lam_l + eps, gtrs.h_left, want_positive=True)
        if hit is None:
            return []
        lo, h_lo, hi, h_hi = hit
    elif gtrs.branch is Branch.RIGHT_ENDPOINT:
        hit = _approach(system, lam_u, lam_u - eps, gtrs.h_right, want_positive=False)
        if hit is None:
            return []
        hi, h_hi, lo, h_lo = hit
    else:
        return []
    try:
        lam = _root(system, lo, hi, h_lo, h_hi, opts)
        return [(lam, y_of_lambda(system, lam))]
    except SingularPencil:
        # bracket sits where the pencil is numerically singular
        return []


def idi_roots(system: LinearizedSystem, spectrum: SpectrumInfo, opts: SolverOptions = DEFAULT_OPTIONS) -> list[tuple[float, np.ndarray]]:
    """Roots of ``h`` on the indefinite interval ``(-inf, lambda_l)``.

    Grid: ``lambda_l - delta 10^-k`` for ``k = 12..1`` (a root can sit right
    next to the pole of ``h`` at ``lambda_l``), then ``p_0 = lambda_l - delta``
    and ``p_{k+1} = p_k - step * 2^k`` with ``step = max(1, |lambda_l|)``, each
    cell split into ``idi_subdivisions`` pieces. Every sign change is
    bisected. Far out ``h`` decays like ``lam^-2``, so the cut-off after
    ``idi_max_expansions`` doublings only drops roots that are already below
    the ``h`` tolerance.
    """
    lam_l = spectrum.lambda_l
    delta = max(opts.idi_delta, opts.idi_delta * abs(lam_l))
    step = max(1.0, abs(lam_l))
    pts = [lam_l - delta * 10.0**-k for k in range(12, 0, -1)]
    pts = [p for p in pts if p < lam_l]
    pts.append(lam_l - delta)
    for k in range(opts.idi_max_expansions):
        nxt = pts[-1] - step * 2.0**k
        sub = np.linspace(pts[-1], nxt, opts.idi_subdivisions + 1)[1:]
        pts.extend(float(p) for p in sub)

    out = []
    prev_lam, prev_h = None, None
    for lam in pts:
        try:
            h = h_of_lambda(system, lam)
        except SingularPencil:
            continue
        if prev_h is not None and (h == 0.0 or (h > 0.0) != (prev_h > 0.0)):
            # bracket is (lam, prev_lam) with lam < prev_lam
            try:
                root = _root(system, lam, prev_lam, h, prev_h, opts)
                out.append((root, y_of_lambda(system, root)))
            except SingularPencil:
                _log.debug("skipping IDI bracket (%g, %g): singular pencil", lam, prev_lam)
        prev_lam, prev_h = lam, h
    return out


# ---------------------------------------------------------------------------
# certification and classification


def verify_kkt(system: LinearizedSystem, y, lam: float, spectrum: Optional[SpectrumInfo], opts: SolverOptions = DEFAULT_OPTIONS) -> KktCertificate:
    """Recompute every optimality residual for ``(y, lam)`` from scratch.

    Without a spectrum, ``lambda <= 0`` is used as the membership test, which
    is sound because ``lambda_u >= 0`` always.
    """
    y = np.asarray(y, dtype=float)
    pencil = system.pencil(lam)
    stat = float(np.linalg.norm(pencil @ y - system.atb))
    ynorm = float(np.linalg.norm(y))
    stat_tol = opts.tol_stationarity * (1.0 + np.linalg.norm(pencil, 2) * ynorm + np.linalg.norm(system.atb))
    feas = abs(system.g(y))
    feas_tol = opts.tol_feasibility * (1.0 + ynorm * ynorm)
    sign_ok = bool(y[0] >= -opts.tol_sign * (1.0 + ynorm))
    lam_u = 0.0 if spectrum is None else spectrum.lambda_u
    in_i = bool(lam <= lam_u + opts.tol_lambda * (1.0 + abs(lam_u)))
    return KktCertificate(stat, feas, sign_ok, float(lam), in_i, float(stat_tol), float(feas_tol))


def classify_uniqueness(
    system: LinearizedSystem,
    spectrum: Optional[SpectrumInfo],
    candidates: list,
    lam: float,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> Classification:
    """Decide how many global minimisers there are.

    A multiplier strictly left of ``lambda_u`` certifies a unique minimiser.
    At ``lambda_u`` the count follows the null space: a multi-dimensional one
    carries a continuum, a one-dimensional one up to two points.
    """
    if not candidates:
        return Classification.ORIGIN_ONLY
    if spectrum is None:
        return Classification.UNIQUE
    lam_u = spectrum.lambda_u
    if lam < lam_u - opts.tol_lambda * (1.0 + abs(lam_u)):
        return Classification.UNIQUE
    if spectrum.mult_u >= 2:
        return Classification.CONTINUUM
    distinct = _dedup([np.asarray(c, dtype=float) for c in candidates], opts.dedup)
    return Classification.TWO_POINT if len(distinct) >= 2 else Classification.UNIQUE


# ---------------------------------------------------------------------------
# driver


def _positive(y: np.ndarray, opts: SolverOptions) -> bool:
    return bool(y[0] > opts.tol_sign * (1.0 + np.linalg.norm(y)))


def _is_b_zero(system: LinearizedSystem, opts: SolverOptions) -> bool:
    rel = system.a_matrix[:, 1:]
    scale = 1.0 + float(np.max(np.sum(rel * rel, axis=1)))
    return float(np.linalg.norm(system.b_vector)) <= opts.tol_b * scale


def _finish(system, y, lam, spectrum, classification, branch, opts, **extra) -> ClsSolution:
    y = np.asarray(y, dtype=float)
    cert = verify_kkt(system, y, lam, spectrum, opts)
    x_hat = y[1:] + system.origin
    return ClsSolution(y, x_hat, float(lam), system.f(y), classification, cert, branch, spectrum, **extra)


def solve_cls(system: LinearizedSystem, opts: Optional[SolverOptions] = None) -> ClsSolution:
    """Global minimiser of the CLS problem with a KKT certificate.

    Candidates from the closed PD interval are tried first. Only if none of
    them is feasible and certified are the near-endpoint and indefinite
    interval searches run. Should every candidate fail certification (a
    numerical corner), the best feasible one is returned with its failing
    certificate rather than silently replaced by the origin.

    Raises
    ------
    DegenerateSpectrum
        If ``A^T A + lam D`` is positive definite for no ``lam``.
    """
    opts = opts or DEFAULT_OPTIONS
    n1 = system.dim + 1

    if _is_b_zero(system, opts):
        return _finish(system, np.zeros(n1), 0.0, None, Classification.UNIQUE, Branch.COLLINEAR_B0, opts)

    spectrum = pd_interval(system, opts.tol_abs, opts.tol_rel, opts.rank_rtol, debug=opts.debug)
    gtrs = gtrs_solve(system, spectrum, opts)

    def ok(lam, y):
        return verify_kkt(system, y, lam, spectrum, opts).valid

    ys = [y for _, y in gtrs.candidates]
    discarded = tuple(y for y in ys if not _positive(y, opts))
    feasible = [y for y in ys if _positive(y, opts)]
    certified = [y for y in feasible if ok(gtrs.lam, y)]

    if certified:
        if gtrs.branch is Branch.RIGHT_ENDPOINT and spectrum.mult_u >= 2:
            best = max(certified, key=lambda v: v[0])
            cls = classify_uniqueness(system, spectrum, certified, gtrs.lam, opts)
            return _finish(
                system, best, gtrs.lam, spectrum, cls, gtrs.branch, opts,
                gtrs=gtrs, continuum_base=gtrs.y, continuum_basis=gtrs.null_basis, discarded=discarded,
            )
        distinct = _dedup(certified, opts.dedup)
        distinct.sort(key=system.f)
        cls = classify_uniqueness(system, spectrum, distinct, gtrs.lam, opts)
        second = distinct[1] if cls is Classification.TWO_POINT else None
        return _finish(system, distinct[0], gtrs.lam, spectrum, cls, gtrs.branch, opts,
                       gtrs=gtrs, second_solution=second, discarded=discarded)

    near = near_endpoint_roots(system, spectrum, gtrs, opts)
    roots = idi_roots(system, spectrum, opts)
    pool = [(lam, y, Branch.INTERIOR_ROOT) for lam, y in near] + [(lam, y, Branch.IDI_ROOT) for lam, y in roots]
    discarded += tuple(y for _, y, _ in pool if not _positive(y, opts))
    pool = [p for p in pool if _positive(p[1], opts)]
    good = [p for p in pool if ok(p[0], p[1])]
    if good:
        lam, y, branch = min(good, key=lambda p: system.f(p[1]))
        cls = classify_uniqueness(system, spectrum, [y], lam, opts)
        return _finish(system, y, lam, spectrum, cls, branch, opts, gtrs=gtrs, discarded=discarded, idi=tuple(roots))

    loose = [(gtrs.lam, y, gtrs.branch) for y in feasible] + pool
    if loose:
        lam, y, branch = min(loose, key=lambda p: system.f(p[1]))
        if system.f(y) < float(system.b_vector @ system.b_vector):
            _log.warning("no candidate passed certification; returning the best uncertified one (branch %s)", branch.value)
            return _finish(system, y, lam, spectrum, Classification.UNIQUE, branch, opts,
                           gtrs=gtrs, discarded=discarded, idi=tuple(roots))

    return _finish(system, np.zeros(n1), gtrs.lam, spectrum, Classification.ORIGIN_ONLY, Branch.ORIGIN, opts,
                   gtrs=gtrs, discarded=discarded, idi=tuple(roots))
