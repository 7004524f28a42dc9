"""Arithmetic in PSL(2,C) and its action on the projective line.

A Moebius map is stored as a 2x2 complex matrix of determinant one; the
matrices M and -M describe the same transformation and compare equal.
Points of CP^1 are stored as unit-norm homogeneous pairs.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InversiveError

DET_TOL = 1e-12
UNIT_CIRCLE_TOL = 1e-9


class _Infinity:
    """The point at infinity of the stereographic chart."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()


def _as_sl2(m) -> np.ndarray:
    arr = np.array(m, dtype=complex).reshape(2, 2)
    det = arr[0, 0] * arr[1, 1] - arr[0, 1] * arr[1, 0]
    if abs(det) < 1e-300 or not np.isfinite(det):
        raise InversiveError("DEGENERATE", "matrix is singular")
    if abs(det - 1.0) > DET_TOL:
        arr = arr / cmath.sqrt(det)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MobiusMap:
    """An element of PSL(2,C); construction rescales to determinant one."""

    matrix: np.ndarray

    def __init__(self, matrix):
        object.__setattr__(self, "matrix", _as_sl2(matrix))

    @classmethod
    def from_entries(cls, a, b, c, d) -> "MobiusMap":
        return cls([[a, b], [c, d]])

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(np.eye(2))

    @classmethod
    def diagonal(cls, lam: complex) -> "MobiusMap":
        return cls([[lam, 0.0], [0.0, 1.0 / lam]])

    @property
    def a(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def b(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def c(self) -> complex:
        return complex(self.matrix[1, 0])

    @property
    def d(self) -> complex:
        return complex(self.matrix[1, 1])

    @property
    def det(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def trace(self) -> complex:
        return complex(self.matrix[0, 0] + self.matrix[1, 1])

    def inverse(self) -> "MobiusMap":
        m = self.matrix
        return MobiusMap([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        return compose(self, other)

    def __neg__(self) -> "MobiusMap":
        return MobiusMap(-self.matrix)

    def sign_aligned(self, other: "MobiusMap") -> np.ndarray:
        """Representative of ``other`` whose sign best matches this matrix."""
        idx = np.unravel_index(np.argmax(np.abs(self.matrix)), (2, 2))
        s = other.matrix[idx] * np.conj(self.matrix[idx])
        return other.matrix if s.real >= 0 else -other.matrix

    def distance(self, other: "MobiusMap") -> float:
        """Frobenius distance between sign-aligned representatives."""
        return float(np.linalg.norm(self.matrix - self.sign_aligned(other)))

    def projectively_equal(self, other: "MobiusMap", tol: float = 1e-10) -> bool:
        scale = max(1.0, float(np.linalg.norm(self.matrix)))
        return self.distance(other) <= tol * scale

    def __eq__(self, other):
        if not isinstance(other, MobiusMap):
            return NotImplemented
        return self.projectively_equal(other)

    __hash__ = None

    def act(self, z):
        """Apply to finite complex numbers (vectorised; poles give inf)."""
        m = self.matrix
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1])

    def derivative(self, z):
        """Complex derivative of z -> M(z), which is 1/(cz+d)^2."""
        m = self.matrix
        z = np.asarray(z, dtype=complex)
        return 1.0 / (m[1, 0] * z + m[1, 1]) ** 2

    def __repr__(self):
        m = self.matrix
        return f"MobiusMap([[{m[0,0]:.6g}, {m[0,1]:.6g}], [{m[1,0]:.6g}, {m[1,1]:.6g}]])"


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A point [z1; z2] of CP^1, stored with unit Euclidean norm."""

    z1: complex
    z2: complex

    def __init__(self, z1, z2=1.0):
        z1, z2 = complex(z1), complex(z2)
        norm = math.hypot(abs(z1), abs(z2))
        if norm == 0.0 or not math.isfinite(norm):
            raise InversiveError("DEGENERATE", "homogeneous coordinates vanish")
        object.__setattr__(self, "z1", z1 / norm)
        object.__setattr__(self, "z2", z2 / norm)

    @classmethod
    def from_complex(cls, z) -> "ProjectivePoint":
        if z is INFINITY:
            return cls(1.0, 0.0)
        return cls(z, 1.0)

    def vector(self) -> np.ndarray:
        return np.array([self.z1, self.z2])

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        return abs(self.z1 * other.z2 - self.z2 * other.z1) < 1e-12

    __hash__ = None


@dataclass(frozen=True)
class MonodromyClass:
    """Conjugacy data of a loxodromic monodromy plus the winding integer.

    ``L = T^-1 diag(lam, 1/lam) T`` with ``lam = r exp(i theta)``.
    ``n`` stays ``None`` until a winding computation fills it in.
    """

    r: float
    theta: float
    n: Optional[int] = None
    T: MobiusMap = None

    def __post_init__(self):
        if not (0.0 < self.r < 1.0):
            raise InversiveError("INVALID_CLASS", f"r={self.r} not in (0,1)")
        if not (0.0 <= self.theta < math.pi):
            raise InversiveError("INVALID_CLASS", f"theta={self.theta} not in [0,pi)")
        if self.n is not None and 2 * math.pi * self.n + 2 * self.theta <= 0:
            raise InversiveError("INVALID_CLASS", "2*pi*n + 2*theta must be positive")
        if self.T is None:
            object.__setattr__(self, "T", MobiusMap.identity())

    @property
    def eigenvalue(self) -> complex:
        return self.r * cmath.exp(1j * self.theta)

    @property
    def turning(self) -> float:
        """Total Euclidean turning per period, 2*pi*n + 2*theta."""
        if self.n is None:
            raise InversiveError("INVALID_CLASS", "winding number not set")
        return 2 * math.pi * self.n + 2 * self.theta

    def with_winding(self, n: int) -> "MonodromyClass":
        return MonodromyClass(self.r, self.theta, int(n), self.T)

    def monodromy(self) -> MobiusMap:
        return compose(self.T.inverse(), compose(MobiusMap.diagonal(self.eigenvalue), self.T))


def compose(A: MobiusMap, B: MobiusMap) -> MobiusMap:
    """A after B."""
    return MobiusMap(A.matrix @ B.matrix)


def apply(M: MobiusMap, p: ProjectivePoint) -> ProjectivePoint:
    v = M.matrix @ p.vector()
    return ProjectivePoint(v[0], v[1])


def stereographic(p: ProjectivePoint, tol: float = 1e-15):
    """[z1; z2] -> z1/z2, or INFINITY when z2 vanishes."""
    if abs(p.z2) <= tol:
        return INFINITY
    return p.z1 / p.z2


def _eigenvector(m: np.ndarray, mu: complex) -> np.ndarray:
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    v1 = np.array([b, mu - a])
    v2 = np.array([mu - d, c])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    if np.linalg.norm(v) < 1e-14:
        # m is (numerically) scalar on this eigenspace: pick the matching axis
        v = np.array([1.0, 0.0]) if abs(a - mu) <= abs(d - mu) else np.array([0.0, 1.0])
    # phase convention: largest component real positive (gives T = I for diagonal input)
    big = v[np.argmax(np.abs(v))]
    return v * (abs(big) / big) / np.linalg.norm(v)


def normal_form(L: MobiusMap) -> MonodromyClass:
    """Conjugate a loxodromic map to diag(lam, 1/lam) with 0 < |lam| < 1.

    Returns the class with ``theta = arg(lam)`` reduced to [0, pi) using the
    sign freedom of PSL(2,C); the winding integer is left unset.
    """
    m = L.matrix
    tr = m[0, 0] + m[1, 1]
    disc = cmath.sqrt(tr * tr - 4.0)
    lam1, lam2 = (tr + disc) / 2.0, (tr - disc) / 2.0
    if abs(lam1 - lam2) < UNIT_CIRCLE_TOL:
        raise InversiveError("PARABOLIC", "repeated eigenvalue")
    lam = lam1 if abs(lam1) < abs(lam2) else lam2
    if abs(abs(lam) - 1.0) < UNIT_CIRCLE_TOL:
        raise InversiveError("EIGENVALUE_ON_UNIT_CIRCLE", f"|lambda|={abs(lam):.12g}")
    # lam and -lam give the same PSL class; keep the one with arg in [0, pi)
    sign = 1.0
    ph = cmath.phase(lam)
    if ph < -1e-14 or ph > math.pi - 1e-14:
        sign = -1.0
    lam = sign * lam
    mm = sign * m
    theta = min(max(cmath.phase(lam), 0.0), math.pi)
    if theta >= math.pi - 1e-14:
        theta = 0.0
    v1 = _eigenvector(mm, lam)
    v2 = _eigenvector(mm, 1.0 / lam)
    T_inv = MobiusMap(np.column_stack([v1, v2]))
    return MonodromyClass(float(abs(lam)), float(theta), None, T_inv.inverse())


def three_point_map(src: Sequence[complex], dst: Sequence[complex]) -> MobiusMap:
    """The Moebius map sending three distinct finite points to three others."""

    def to_standard(p):
        z1, z2, z3 = p
        # sends z1 -> 0, z2 -> 1, z3 -> inf
        return np.array([[z2 - z3, -z1 * (z2 - z3)], [z2 - z1, -z3 * (z2 - z1)]], dtype=complex)

    A = to_standard(src)
    B = to_standard(dst)
    Binv = np.array([[B[1, 1], -B[0, 1]], [-B[1, 0], B[0, 0]]])
    return MobiusMap(Binv @ A)
