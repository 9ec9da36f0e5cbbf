"""Uniform 1D grids, coefficient fields and Dirichlet elliptic operators.

The operator ``-d/dx(c(x) d/dx)`` is discretized with the three-point flux
stencil, coefficients sampled at half nodes.  Its eigenpairs give the spectral
coordinates used by every solver and norm in the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceFailure, NonPositiveCoefficient, SchemaError


@dataclass(frozen=True)
class Grid1D:
    """Interior nodes ``x_i = i*h``, ``i = 1..N`` of ``(0, L)``."""

    length: float
    n_interior: int

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"domain length must be positive, got {self.length}")
        if self.n_interior < 2:
            raise ValueError(f"need at least 2 interior nodes, got {self.n_interior}")

    @property
    def h(self) -> float:
        return self.length / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n_interior + 1)

    @property
    def half_nodes(self) -> np.ndarray:
        """``x_{i+1/2}`` for ``i = 0..N``."""
        return self.h * (np.arange(self.n_interior + 1) + 0.5)

    def inner(self, u, v) -> complex:
        """Discrete L2 inner product ``h * sum(u * conj(v))``."""
        return self.h * np.sum(np.asarray(u) * np.conj(v))

    def window_indices(self, a: float, b: float) -> np.ndarray:
        """Indices of interior nodes lying in the closed interval ``[a, b]``."""
        x = self.nodes
        eps = 1e-9 * self.h
        return np.flatnonzero((x >= a - eps) & (x <= b + eps))


@dataclass(frozen=True)
class CoefficientField:
    """Scalar coefficient ``c(x)`` on ``[0, L]``.

    ``kind`` is one of ``"constant"``, ``"piecewise"`` (values between
    breakpoints) or ``"samples"`` (node-aligned values including both
    boundary nodes, linearly interpolated).
    """

    kind: str
    values: tuple
    breaks: tuple = ()
    length: float | None = None

    @classmethod
    def constant(cls, value: float) -> "CoefficientField":
        return cls("constant", (float(value),))

    @classmethod
    def piecewise(cls, breaks: Sequence[float], values: Sequence[float]) -> "CoefficientField":
        if len(values) != len(breaks) + 1:
            raise SchemaError("piecewise coefficient needs len(values) == len(breaks) + 1")
        if list(breaks) != sorted(breaks):
            raise SchemaError("piecewise breaks must be increasing")
        return cls("piecewise", tuple(map(float, values)), tuple(map(float, breaks)))

    @classmethod
    def samples(cls, values: Sequence[float], length: float) -> "CoefficientField":
        if len(values) < 2:
            raise SchemaError("sampled coefficient needs at least two values")
        return cls("samples", tuple(map(float, values)), (), float(length))

    @classmethod
    def from_json(cls, obj, grid: Grid1D | None = None) -> "CoefficientField":
        """Parse ``{"type": "constant" | "piecewise" | "samples", ...}``.

        A bare number is accepted as a constant.
        """
        if isinstance(obj, (int, float)):
            return cls.constant(obj)
        if not isinstance(obj, dict) or "type" not in obj:
            raise SchemaError("coeff: expected an object with a 'type' key")
        kind = obj["type"]
        try:
            if kind == "constant":
                return cls.constant(obj["value"])
            if kind == "piecewise":
                return cls.piecewise(obj["breaks"], obj["values"])
            if kind == "samples":
                if grid is None:
                    raise SchemaError("coeff.samples needs a grid to be parsed")
                vals = obj["values"]
                if len(vals) != grid.n_interior + 2:
                    raise SchemaError(
                        f"coeff.values: expected {grid.n_interior + 2} samples, got {len(vals)}"
                    )
                return cls.samples(vals, grid.length)
        except KeyError as exc:
            raise SchemaError(f"coeff.{exc.args[0]}: missing key") from None
        raise SchemaError(f"coeff.type: unknown coefficient type {kind!r}")

    def to_json(self) -> dict:
        if self.kind == "constant":
            return {"type": "constant", "value": self.values[0]}
        if self.kind == "piecewise":
            return {"type": "piecewise", "breaks": list(self.breaks), "values": list(self.values)}
        return {"type": "samples", "values": list(self.values)}

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.values[0])
        if self.kind == "piecewise":
            idx = np.searchsorted(np.asarray(self.breaks), x, side="right")
            return np.asarray(self.values)[idx]
        xs = np.linspace(0.0, self.length, len(self.values))
        return np.interp(x, xs, self.values)

    def bounds(self, a: float = 0.0, b: float | None = None) -> tuple[float, float]:
        """(inf, sup) of ``c`` over ``[a, b]``."""
        if self.kind == "constant":
            return self.values[0], self.values[0]
        if b is None:
            b = self.length if self.length is not None else max(self.breaks + (a,)) + 1.0
        if self.kind == "piecewise":
            edges = np.concatenate([[a], [t for t in self.breaks if a < t < b], [b]])
            mids = 0.5 * (edges[:-1] + edges[1:])
            vals = self(mids)
        else:
            xs = np.linspace(0.0, self.length, len(self.values))
            inside = (xs >= a) & (xs <= b)
            vals = np.concatenate([np.asarray(self.values)[inside], self([a, b])])
        return float(vals.min()), float(vals.max())

    def scaled(self, s: float) -> "CoefficientField":
        return CoefficientField(self.kind, tuple(s * v for v in self.values), self.breaks, self.length)


@dataclass(frozen=True)
class EllipticOperator:
    grid: Grid1D
    coeff: CoefficientField
    diag: np.ndarray = field(repr=False)
    offdiag: np.ndarray = field(repr=False)

    @cached_property
    def matrix(self) -> np.ndarray:
        n = self.grid.n_interior
        A = np.zeros((n, n))
        A[np.arange(n), np.arange(n)] = self.diag
        A[np.arange(n - 1), np.arange(1, n)] = self.offdiag
        A[np.arange(1, n), np.arange(n - 1)] = self.offdiag
        return A

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Matrix-vector product along the first axis of ``u``."""
        u = np.asarray(u)
        out = self.diag.reshape((-1,) + (1,) * (u.ndim - 1)) * u
        off = self.offdiag.reshape((-1,) + (1,) * (u.ndim - 1))
        out[:-1] += off * u[1:]
        out[1:] += off * u[:-1]
        return out


def build_elliptic(grid: Grid1D, coeff: CoefficientField) -> EllipticOperator:
    """Three-point discretization of ``-d/dx(c d/dx)`` with Dirichlet ends.

    ``(Au)_i = [c_{i+1/2}(u_i - u_{i+1}) + c_{i-1/2}(u_i - u_{i-1})] / h^2``
    with ``c`` evaluated at the half-node midpoints.
    """
    c_half = coeff(grid.half_nodes)
    if np.min(c_half) <= 0 or np.min(coeff(np.concatenate([[0.0], grid.nodes, [grid.length]]))) <= 0:
        raise NonPositiveCoefficient("elliptic coefficient must be strictly positive on [0, L]")
    h2 = grid.h ** 2
    diag = (c_half[:-1] + c_half[1:]) / h2
    offdiag = -c_half[1:-1] / h2
    return EllipticOperator(grid, coeff, diag, offdiag)


@dataclass(frozen=True)
class ModeBasis:
    """First ``M`` eigenpairs, eigenvectors orthonormal in the ``h``-weighted L2."""

    grid: Grid1D
    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)  # shape (N, M), column j is phi_j

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    def truncate(self, m: int) -> "ModeBasis":
        return ModeBasis(self.grid, self.eigenvalues[:m], self.vectors[:, :m])

    def synthesize(self, coeffs) -> np.ndarray:
        """Node values of ``sum_j coeffs_j phi_j`` (coeffs along the last axis)."""
        return np.asarray(coeffs) @ self.vectors.T

    def project(self, u) -> np.ndarray:
        """Mode coefficients ``<u, phi_j>`` of node values ``u``."""
        return self.grid.h * (np.asarray(u) @ self.vectors)


def eigendecompose(op: EllipticOperator, M: int, rtol: float = 1e-10) -> ModeBasis:
    n = op.grid.n_interior
    if not 1 <= M <= n:
        raise ValueError(f"mode count must lie in [1, {n}], got {M}")
    lam, vec = eigh_tridiagonal(op.diag, op.offdiag, select="i", select_range=(0, M - 1))
    order = np.argsort(lam)
    lam, vec = lam[order], vec[:, order]
    # First nonzero entry positive: at the first interior node for generic modes.
    lead = vec[np.argmax(np.abs(vec) > 1e-8 * np.abs(vec).max(axis=0), axis=0), np.arange(M)]
    vec = vec * np.sign(lead)
    phi = vec / np.sqrt(op.grid.h)

    resid = np.abs(op.apply(phi) - phi * lam).max()
    gram = op.grid.h * (phi.T @ phi)
    ortho = np.abs(gram - np.eye(M)).max()
    if resid > rtol * lam[-1] * max(1.0, np.abs(phi).max()) or ortho > rtol or lam[0] <= 0:
        raise ConvergenceFailure(
            f"eigensolve residual {resid:.3e}, orthogonality defect {ortho:.3e}"
        )
    return ModeBasis(op.grid, lam, phi)
