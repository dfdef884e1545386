"""Symmetric 3x3 tensor algebra.

Fields of tensors are plain ``ndarray`` objects of shape ``(..., 3, 3)``;
:class:`SymTensor3` wraps a single tensor through its six independent
components for the places where an explicit value object reads better.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY = np.eye(3)

# (row, col) of the six independent components, in storage order
_COMPONENTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

# Plane-strain strain space: out-of-plane shears vanish identically.
PLANE_COMPONENTS = ((0, 0), (1, 1), (2, 2), (0, 1))


def trace(a):
    return np.trace(a, axis1=-2, axis2=-1)


def dev(a):
    """Deviatoric part ``a - tr(a)/3 I`` (works on stacks of tensors)."""
    a = np.asarray(a, dtype=float)
    return a - (trace(a) / 3.0)[..., None, None] * IDENTITY


def ddot(a, b):
    """Double contraction ``a : b`` over the last two axes."""
    return np.einsum("...ij,...ij->...", a, b)


def norm(a):
    """Frobenius norm ``|a| = sqrt(a : a)``."""
    return np.sqrt(np.maximum(ddot(a, a), 0.0))


def sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def canonical_basis(components=PLANE_COMPONENTS):
    """Frobenius-orthonormal symmetric basis tensors for the given components."""
    out = []
    for i, j in components:
        e = np.zeros((3, 3))
        if i == j:
            e[i, i] = 1.0
        else:
            e[i, j] = e[j, i] = np.sqrt(0.5)
        out.append(e)
    return np.array(out)


@dataclass(frozen=True)
class SymTensor3:
    """A single symmetric 3x3 tensor stored by its six components."""

    a11: float = 0.0
    a22: float = 0.0
    a33: float = 0.0
    a12: float = 0.0
    a13: float = 0.0
    a23: float = 0.0

    @classmethod
    def from_matrix(cls, m) -> "SymTensor3":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        m = sym(m)
        return cls(*(float(m[i, j]) for i, j in _COMPONENTS))

    @classmethod
    def identity(cls) -> "SymTensor3":
        return cls(1.0, 1.0, 1.0)

    @classmethod
    def diag(cls, d1, d2, d3) -> "SymTensor3":
        return cls(d1, d2, d3)

    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12, self.a13],
                         [self.a12, self.a22, self.a23],
                         [self.a13, self.a23, self.a33]])

    @property
    def trace(self) -> float:
        return self.a11 + self.a22 + self.a33

    def dev(self) -> "SymTensor3":
        return SymTensor3.from_matrix(dev(self.matrix()))

    def norm(self) -> float:
        return float(norm(self.matrix()))

    def ddot(self, other: "SymTensor3") -> float:
        return float(ddot(self.matrix(), other.matrix()))

    def __add__(self, other):
        return SymTensor3.from_matrix(self.matrix() + other.matrix())

    def __sub__(self, other):
        return SymTensor3.from_matrix(self.matrix() - other.matrix())

    def __mul__(self, s):
        return SymTensor3.from_matrix(float(s) * self.matrix())

    __rmul__ = __mul__
