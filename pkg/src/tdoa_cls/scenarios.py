"""Reference configurations used throughout the tests and demos.

``example1`` .. ``example4`` are small hand-checkable systems with known
closed-form answers; ``example6``/``example7`` are the Monte Carlo geometries
(the latter is the former with every auxiliary sensor moved by (-100, -100)).
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import LinearizedSystem, RangeDiffSet, SensorArray, build_system

__all__ = [
    "example1",
    "example2",
    "example4",
    "example6_array",
    "example7_array",
    "EXAMPLE6_SOURCE",
    "BUILTIN_ARRAYS",
]

EXAMPLE6_SOURCE = np.array([-5.0, 2.0])


def example1() -> tuple[SensorArray, RangeDiffSet]:
    """Three sensors with ``A^T A = I``; the minimisers form a ring."""
    r2, r6 = math.sqrt(2.0), math.sqrt(6.0)
    array = SensorArray.from_sensors([[1 / r2, 1 / r6], [-1 / r2, 1 / r6], [0.0, -2 / r6]])
    return array, RangeDiffSet([1 / math.sqrt(3.0)] * 3)


def example2() -> tuple[SensorArray, RangeDiffSet]:
    """``A = 4 I``, ``b = (-8, 8, 8)``; the first sensor sits on the reference."""
    array = SensorArray.from_sensors([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    return array, RangeDiffSet([4.0, 0.0, 0.0])


def example4() -> tuple[SensorArray, RangeDiffSet]:
    """3-D array whose multiplier lands on the left singular point."""
    array = SensorArray.from_sensors([[-1, 0, 0], [1, -1, 0], [1, 1, 1], [0, 1, 0]])
    return array, RangeDiffSet([-1.0, 1.0, 0.0, -1.0])


def example6_array() -> SensorArray:
    return SensorArray.from_sensors([[-1, 1], [-1, 4], [-4, 6], [-6, 7]])


def example7_array() -> SensorArray:
    base = example6_array()
    return SensorArray(base.reference, base.sensors - 100.0)


BUILTIN_ARRAYS = {"example6": example6_array, "example7": example7_array}


def system_of(pair) -> LinearizedSystem:
    return build_system(*pair)
