#!/usr/bin/env python3
"""Minkowski space R^{1,2}: quadratic form, causal classes and isometries.

Vectors use coordinates (x, y, z) with the form q(x, y, z) = x^2 + y^2 - z^2.
The future is the component of (0, 0, 1). Isometries are the 3x3 matrices of
SO0(1,2): they preserve q, have determinant one and preserve the future cone.

Everything here is a pure function of its arguments. Functions accept any
array-like of length 3 as a vector and return numpy arrays; ``MinkVector`` is
a thin immutable wrapper for places that want a named value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy.linalg import expm

# ----------------------------------------------------------------------------
# Constants
# ----------------------------------------------------------------------------
G = np.diag([1.0, 1.0, -1.0])
E3 = np.array([0.0, 0.0, 1.0])
EPS_ALG = 1e-10

logger = logging.getLogger("lorentz_kernel")


class GeometryError(ValueError):
    """Invalid geometric input (wrong causal type, degenerate data)."""


# ----------------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------------


class CausalClass(str, Enum):
    SPACELIKE = "spacelike"
    TIMELIKE_FUTURE = "timelike-future"
    TIMELIKE_PAST = "timelike-past"
    LIGHTLIKE_FUTURE = "lightlike-future"
    LIGHTLIKE_PAST = "lightlike-past"
    ZERO = "zero"

    @property
    def is_timelike(self) -> bool:
        return self in (CausalClass.TIMELIKE_FUTURE, CausalClass.TIMELIKE_PAST)

    @property
    def is_lightlike(self) -> bool:
        return self in (CausalClass.LIGHTLIKE_FUTURE, CausalClass.LIGHTLIKE_PAST)

    @property
    def is_future(self) -> bool:
        return self in (CausalClass.TIMELIKE_FUTURE, CausalClass.LIGHTLIKE_FUTURE)


@dataclass(frozen=True)
class MinkVector:
    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, v: "VectorLike") -> "MinkVector":
        a = as_vector(v)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


VectorLike = Union[MinkVector, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class MinkPlane:
    """A plane through the origin given by two spanning vectors."""

    a: tuple
    b: tuple

    @classmethod
    def span(cls, a: VectorLike, b: VectorLike) -> "MinkPlane":
        va, vb = as_vector(a), as_vector(b)
        if np.linalg.norm(np.cross(_unit(va), _unit(vb))) < 1e-9:
            raise GeometryError("spanning vectors are linearly dependent")
        return cls(tuple(va), tuple(vb))

    @property
    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.a), np.array(self.b)

    def normal(self) -> np.ndarray:
        """Lorentz normal: <n, a> = <n, b> = 0."""
        a, b = self.basis
        return G @ np.cross(a, b)

    def contains(self, v: VectorLike, tol: float = 1e-9) -> bool:
        a, b = self.basis
        n = np.cross(a, b)
        n = n / np.linalg.norm(n)
        w = as_vector(v)
        return abs(float(n @ w)) <= tol * max(1.0, float(np.linalg.norm(w)))


@dataclass(frozen=True)
class Isometry:
    """Element of SO0(1,2) acting on column vectors."""

    m: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", np.array(self.m, dtype=float).reshape(3, 3))

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return Isometry(self.m @ other.m)

    def apply(self, v: VectorLike) -> np.ndarray:
        return self.m @ as_vector(v)

    def inverse(self) -> "Isometry":
        # m^-1 = G m^T G for Lorentz matrices
        return Isometry(G @ self.m.T @ G)

    @classmethod
    def identity(cls) -> "Isometry":
        return cls(np.eye(3))


# ----------------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------------


def as_vector(v: VectorLike) -> np.ndarray:
    if isinstance(v, MinkVector):
        return v.array
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise GeometryError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"non-finite coordinates {arr}")
    return arr


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    return v / n if n > 0 else v


# ----------------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------------


def q_form(v: VectorLike) -> float:
    x, y, z = as_vector(v)
    return float(x * x + y * y - z * z)


def inner(u: VectorLike, v: VectorLike) -> float:
    a, b = as_vector(u), as_vector(v)
    return float(a[0] * b[0] + a[1] * b[1] - a[2] * b[2])


def classify(v: VectorLike, tol: float = EPS_ALG) -> CausalClass:
    w = as_vector(v)
    scale = float(np.linalg.norm(w))
    if scale <= tol:
        return CausalClass.ZERO
    q = q_form(w) / (scale * scale)
    if q > tol:
        return CausalClass.SPACELIKE
    future = w[2] > 0
    if q < -tol:
        return CausalClass.TIMELIKE_FUTURE if future else CausalClass.TIMELIKE_PAST
    return CausalClass.LIGHTLIKE_FUTURE if future else CausalClass.LIGHTLIKE_PAST


def classify_plane(plane: MinkPlane, tol: float = 1e-9) -> str:
    """Return "timelike", "lightlike" or "spacelike" for the restricted form."""
    a, b = (_unit(v) for v in plane.basis)
    if np.linalg.norm(np.cross(a, b)) < 1e-9:
        raise GeometryError("degenerate span")
    gram = np.array([[inner(a, a), inner(a, b)], [inner(a, b), inner(b, b)]])
    # normalize by the Euclidean area so the test does not depend on the basis
    det = float(np.linalg.det(gram)) / float(np.linalg.norm(np.cross(a, b))) ** 2
    if det < -tol:
        return "timelike"
    if det > tol:
        return "spacelike"
    return "lightlike"


def boost_generator(base: VectorLike) -> np.ndarray:
    """Lie algebra element annihilating ``base``: v -> G (v x b) with q(b) = 1."""
    b = as_vector(base)
    qb = q_form(b)
    if qb <= EPS_ALG:
        raise GeometryError(f"boost base must be spacelike, got q = {qb:.3g}")
    b = b / np.sqrt(qb)
    cross_right = np.array(
        [[0.0, b[2], -b[1]], [-b[2], 0.0, b[0]], [b[1], -b[0], 0.0]]
    )  # v x b
    return G @ cross_right


def stabilizer_boost(base: VectorLike, u: float) -> Isometry:
    """The one-parameter group a^u fixing the spacelike vector ``base``."""
    return Isometry(expm(float(u) * boost_generator(base)))


def is_isometry(m: np.ndarray, tol: float = EPS_ALG) -> bool:
    mat = np.asarray(m, dtype=float)
    if mat.shape != (3, 3) or not np.all(np.isfinite(mat)):
        return False
    if np.max(np.abs(mat.T @ G @ mat - G)) > tol:
        return False
    if abs(float(np.linalg.det(mat)) - 1.0) > tol:
        return False
    return bool(mat[2, 2] > 0)


def lorentz_cross(u: VectorLike, v: VectorLike) -> np.ndarray:
    """Vector orthogonal (for q) to u and v."""
    return G @ np.cross(as_vector(u), as_vector(v))
