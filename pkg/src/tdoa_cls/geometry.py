"""Measurement model, CLS system assembly and identifiability diagnostics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from .numerics import sym_eig

__all__ = [
    "SensorArray",
    "RangeDiffSet",
    "LinearizedSystem",
    "PeReport",
    "Assumption1Report",
    "ScenarioFile",
    "ScenarioError",
    "RANK_RTOL",
    "make_rng",
    "trial_seed",
    "simulate_measurements",
    "build_system",
    "jacobian_j0",
    "jacobian_j",
    "check_local_pe",
    "check_assumption1",
    "assumption1_value",
    "numerical_rank",
    "load_scenario",
    "parse_scenario",
]

RANK_RTOL = 1e-9
SEED_MASK = (1 << 64) - 1


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator used for every random draw in the package.

    The bit generator is Philox-4x64 (counter based) keyed by the 64-bit
    ``seed``; Gaussian variates come from numpy's ziggurat transform of that
    stream, which is fixed for a given numpy major version.
    """
    return np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))


def trial_seed(seed: int, trial: int) -> int:
    """Per-trial sub-seed: ``seed XOR trial`` on 64 bits."""
    return (int(seed) ^ int(trial)) & SEED_MASK


def numerical_rank(mat, rtol: float = RANK_RTOL) -> tuple[int, np.ndarray]:
    """Rank counting singular values above ``rtol * sigma_max``."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.size == 0:
        return 0, np.zeros(0)
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0.0:
        return 0, sv
    return int(np.sum(sv > rtol * sv[0])), sv


@dataclass(frozen=True)
class SensorArray:
    """Reference sensor ``a_0`` plus ``m`` auxiliary sensors in ``dim`` dimensions.

    Coordinates are stored as given. ``normalized()`` returns the same array
    translated so the reference sits at the origin, which is the frame every
    solver routine works in.
    """

    reference: np.ndarray
    sensors: np.ndarray

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=float).reshape(-1)
        sens = np.atleast_2d(np.asarray(self.sensors, dtype=float))
        if ref.size not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {ref.size}")
        if sens.ndim != 2 or sens.shape[1] != ref.size:
            raise ValueError(f"sensors must have shape (m, {ref.size}), got {sens.shape}")
        if sens.shape[0] < 1:
            raise ValueError("at least one auxiliary sensor is required")
        object.__setattr__(self, "reference", _frozen(ref))
        object.__setattr__(self, "sensors", _frozen(sens))

    @classmethod
    def from_sensors(cls, sensors, reference=None) -> "SensorArray":
        sensors = np.atleast_2d(np.asarray(sensors, dtype=float))
        if reference is None:
            reference = np.zeros(sensors.shape[1])
        return cls(reference, sensors)

    @property
    def dim(self) -> int:
        return self.reference.size

    @property
    def count(self) -> int:
        return self.sensors.shape[0]

    @cached_property
    def relative(self) -> np.ndarray:
        """Sensor coordinates relative to the reference (rows ``a_i - a_0``)."""
        return _frozen(self.sensors - self.reference)

    def normalized(self) -> "SensorArray":
        return SensorArray(np.zeros(self.dim), self.relative)

    def translated(self, offset) -> "SensorArray":
        offset = np.asarray(offset, dtype=float)
        return SensorArray(self.reference + offset, self.sensors + offset)

    @property
    def coincident_sensors(self) -> list[int]:
        """0-based indices of auxiliary sensors sitting on the reference."""
        dist = np.linalg.norm(self.relative, axis=1)
        scale = max(1.0, float(dist.max()))
        return [int(i) for i in np.flatnonzero(dist <= 1e-12 * scale)]


@dataclass(frozen=True)
class RangeDiffSet:
    """Range differences ``d_i`` (meters) and where they came from.

    ``provenance`` is ``"measured"`` or ``"simulated"``; simulated sets carry
    the noise level, the seed, the true source and the drawn errors ``r_i``.
    """

    values: np.ndarray
    provenance: str = "measured"
    sigma: Optional[float] = None
    seed: Optional[int] = None
    source: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float).reshape(-1)))
        if self.provenance not in ("measured", "simulated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        for name in ("source", "noise"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))

    def __len__(self) -> int:
        return self.values.size

    def infeasible_indices(self, array: SensorArray) -> list[int]:
        """Indices with ``|d_i| > ||a_i - a_0||`` (no source can produce these)."""
        norms = np.linalg.norm(array.relative, axis=1)
        slack = 1e-12 * max(1.0, float(norms.max()))
        return [int(i) for i in np.flatnonzero(np.abs(self.values) > norms + slack)]


@dataclass(frozen=True)
class LinearizedSystem:
    """CLS problem data: minimise ``||A y - b||^2`` s.t. ``y^T D y = 0``, ``y_1 >= 0``.

    Row ``i`` of ``a_matrix`` is ``[d_i, a_i^T]`` and ``b_i = (||a_i||^2 - d_i^2)/2``,
    with sensor coordinates taken relative to the reference. ``origin`` is the
    reference position used to map solutions back to the caller's frame.
    """

    a_matrix: np.ndarray
    b_vector: np.ndarray
    origin: Optional[np.ndarray] = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_matrix, dtype=float))
        b = np.asarray(self.b_vector, dtype=float).reshape(-1)
        if a.shape[0] != b.size:
            raise ValueError(f"A has {a.shape[0]} rows but b has {b.size} entries")
        if a.shape[1] < 2:
            raise ValueError("A needs at least two columns")
        origin = np.zeros(a.shape[1] - 1) if self.origin is None else np.asarray(self.origin, dtype=float)
        if origin.size != a.shape[1] - 1:
            raise ValueError("origin has the wrong dimension")
        object.__setattr__(self, "a_matrix", _frozen(a))
        object.__setattr__(self, "b_vector", _frozen(b))
        object.__setattr__(self, "origin", _frozen(origin))

    @property
    def dim(self) -> int:
        return self.a_matrix.shape[1] - 1

    @property
    def count(self) -> int:
        return self.a_matrix.shape[0]

    @cached_property
    def signature(self) -> np.ndarray:
        return _frozen(np.diag([1.0] + [-1.0] * self.dim))

    @cached_property
    def signature_diag(self) -> np.ndarray:
        return _frozen([1.0] + [-1.0] * self.dim)

    @cached_property
    def gram(self) -> np.ndarray:
        """``A^T A``."""
        return _frozen(self.a_matrix.T @ self.a_matrix)

    @cached_property
    def atb(self) -> np.ndarray:
        """``A^T b``."""
        return _frozen(self.a_matrix.T @ self.b_vector)

    def pencil(self, lam: float) -> np.ndarray:
        """``A^T A + lam * D``."""
        return self.gram + lam * self.signature

    def f(self, y) -> float:
        r = self.a_matrix @ np.asarray(y, dtype=float) - self.b_vector
        return float(r @ r)

    def g(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(y[0] * y[0] - y[1:] @ y[1:])

    def residuals(self, y) -> np.ndarray:
        """Spherical errors ``e_i = d_i y_1 + a_i^T y_{2:} - b_i``."""
        return self.a_matrix @ np.asarray(y, dtype=float) - self.b_vector

    def lift(self, x) -> np.ndarray:
        """``y = [||x||, x]`` for a position ``x`` in the normalized frame."""
        x = np.asarray(x, dtype=float)
        return np.concatenate([[np.linalg.norm(x)], x])


@dataclass(frozen=True)
class PeReport:
    collinear_or_coplanar: bool
    affine_rank: int
    jacobian_rank: Optional[int]
    jacobian_min_singular_value: Optional[float]
    pe_holds: bool
    note: str = ""


@dataclass(frozen=True)
class Assumption1Report:
    """Sampled check that ``J(x) x`` does not vanish on the unit sphere.

    This is a heuristic: a finite sample can miss a direction where the
    assumption fails.
    """

    passed_samples: int
    num_samples: int
    min_norm_seen: float
    argmin_direction: np.ndarray
    a_gram_min_eig: float
    heuristic: bool = True


def simulate_measurements(array: SensorArray, source, sigma: float, seed: int = 0) -> RangeDiffSet:
    """Range differences ``||a_i - x|| - ||x - a_0|| + r_i`` with Gaussian ``r_i``.

    ``r_i`` are i.i.d. N(0, sigma^2) drawn from ``make_rng(seed)``; sigma = 0
    gives exact differences and draws nothing.
    """
    x = np.asarray(source, dtype=float).reshape(-1)
    if x.size != array.dim:
        raise ValueError(f"source has dimension {x.size}, array has {array.dim}")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    exact = np.linalg.norm(array.sensors - x, axis=1) - np.linalg.norm(x - array.reference)
    if sigma > 0:
        noise = sigma * make_rng(seed).standard_normal(array.count)
    else:
        noise = np.zeros(array.count)
    return RangeDiffSet(exact + noise, "simulated", float(sigma), int(seed), x, noise)


def build_system(array: SensorArray, meas: RangeDiffSet) -> LinearizedSystem:
    """Assemble ``A`` and ``b`` in the reference-at-origin frame."""
    d = np.asarray(meas.values if isinstance(meas, RangeDiffSet) else meas, dtype=float).reshape(-1)
    if d.size != array.count:
        raise ValueError(f"{d.size} measurements for {array.count} sensors")
    rel = array.relative
    a_mat = np.column_stack([d, rel])
    b = 0.5 * (np.sum(rel * rel, axis=1) - d * d)
    return LinearizedSystem(a_mat, b, array.reference)


def _unit_terms(array: SensorArray, x) -> tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != array.dim:
        raise ValueError(f"x has dimension {x.size}, array has {array.dim}")
    x = x - array.reference
    rel = array.relative
    xn = float(np.linalg.norm(x))
    diff = rel - x
    dist = np.linalg.norm(diff, axis=1)
    scale = max(1.0, float(np.abs(rel).max()))
    if xn <= 1e-14 * scale:
        raise ValueError("Jacobian undefined at the reference sensor (x = 0)")
    if np.any(dist <= 1e-14 * scale):
        raise ValueError("Jacobian undefined at a sensor location")
    return x, diff, xn, dist


def jacobian_j0(array: SensorArray, x) -> np.ndarray:
    """Jacobian of the range-difference model; row ``i`` is
    ``-(x/||x|| + (a_i - x)/||a_i - x||)``, everything relative to ``a_0``."""
    x, diff, xn, dist = _unit_terms(array, x)
    return -(x / xn + diff / dist[:, None])


def jacobian_j(array: SensorArray, x) -> np.ndarray:
    """Jacobian of the spherical error model; row ``i`` is
    ``w_i x/||x|| + a_i`` with ``w_i = ||a_i - x|| - ||x||``."""
    x, _, xn, dist = _unit_terms(array, x)
    w = dist - xn
    return np.outer(w, x / xn) + array.relative


def check_local_pe(array: SensorArray, x=None) -> PeReport:
    """Local persistence-of-excitation check.

    Without ``x`` only the generic verdict is returned: PE holds iff the
    sensors (reference included) are not collinear in 2-D / coplanar in 3-D.
    With ``x`` the numerical rank of ``J(x)`` decides.
    """
    rank, _ = numerical_rank(array.relative)
    degenerate = rank < array.dim
    if x is None:
        return PeReport(degenerate, rank, None, None, not degenerate, "generic position verdict")
    try:
        jac = jacobian_j(array, x)
    except ValueError as exc:
        return PeReport(degenerate, rank, None, None, False, str(exc))
    jrank, sv = numerical_rank(jac)
    smin = float(sv[-1]) if sv.size >= array.dim else 0.0
    return PeReport(degenerate, rank, jrank, smin, jrank == array.dim, "pointwise Jacobian rank")


def assumption1_value(array: SensorArray, x) -> float:
    """``||J(x) x||`` for ``x`` given relative to the reference."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(jacobian_j(array, array.reference + x) @ x))


def check_assumption1(system: LinearizedSystem, array: SensorArray, num_samples: int = 256, seed: int = 0) -> Assumption1Report:
    """Evaluate ``||J(x) x||`` at seeded random unit vectors.

    Also reports the smallest eigenvalue of ``A^T A`` as a boundedness
    surrogate. Directions that land on a sensor are skipped (redrawn).
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = make_rng(seed)
    rel_scale = max(1.0, float(np.abs(array.relative).max()))
    tol = 1e-9 * rel_scale
    best, best_dir, passed, drawn = math.inf, None, 0, 0
    while drawn < num_samples:
        u = rng.standard_normal(array.dim)
        u /= np.linalg.norm(u)
        try:
            val = assumption1_value(array, u)
        except ValueError:
            continue
        drawn += 1
        passed += val > tol
        if val < best:
            best, best_dir = val, u
    gmin = float(sym_eig(system.gram).eigenvalues[0])
    return Assumption1Report(int(passed), num_samples, float(best), best_dir, gmin)


@dataclass(frozen=True)
class ScenarioFile:
    """Parsed scenario file."""

    array: SensorArray
    source: Optional[np.ndarray] = None
    measurements: Optional[RangeDiffSet] = None
    sigma: Optional[float] = None
    seed: Optional[int] = None

    def resolve_measurements(self, seed: Optional[int] = None) -> RangeDiffSet:
        """Measurements to solve with.

        Exactly one source of data is allowed: explicit ``measurements``, or a
        ``source`` + ``sigma`` + ``seed`` triple to simulate from. ``seed``
        overrides the file's seed in the second case. A ``source`` next to
        explicit measurements is kept as ground truth only.
        """
        if self.measurements is not None:
            if self.sigma is not None or self.seed is not None:
                raise ScenarioError("give either 'measurements' or 'source' + 'sigma' + 'seed', not both")
            return self.measurements
        use_seed = self.seed if seed is None else seed
        if self.source is None or self.sigma is None or use_seed is None:
            raise ScenarioError("scenario needs either 'measurements' or 'source' + 'sigma' + 'seed'")
        return simulate_measurements(self.array, self.source, self.sigma, use_seed)

    def to_dict(self) -> dict:
        out = {
            "dim": self.array.dim,
            "reference": self.array.reference.tolist(),
            "sensors": self.array.sensors.tolist(),
        }
        if self.source is not None:
            out["source"] = np.asarray(self.source).tolist()
        if self.measurements is not None:
            out["measurements"] = self.measurements.values.tolist()
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.seed is not None:
            out["seed"] = self.seed
        return out


class ScenarioError(ValueError):
    pass


def parse_scenario(doc: dict) -> ScenarioFile:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    try:
        dim = int(doc["dim"])
        sensors = doc["sensors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"missing or invalid field: {exc}") from None
    reference = doc.get("reference", [0.0] * dim)
    try:
        array = SensorArray(reference, sensors)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc)) from None
    if array.dim != dim:
        raise ScenarioError(f"'dim' is {dim} but coordinates have dimension {array.dim}")
    source = doc.get("source")
    if source is not None:
        source = np.asarray(source, dtype=float)
        if source.shape != (dim,):
            raise ScenarioError("'source' has the wrong dimension")
    meas = doc.get("measurements")
    if meas is not None:
        meas = RangeDiffSet(meas)
        if len(meas) != array.count:
            raise ScenarioError(f"{len(meas)} measurements for {array.count} sensors")
    sigma = doc.get("sigma")
    if sigma is not None:
        sigma = float(sigma)
        if sigma < 0:
            raise ScenarioError("'sigma' must be nonnegative")
    seed = doc.get("seed")
    if seed is not None:
        seed = int(seed)
    return ScenarioFile(array, source, meas, sigma, seed)


def load_scenario(path) -> ScenarioFile:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    return parse_scenario(doc)
